#pragma once

#include <complex>

#include <Eigen/Core>

#include "ousym/dual.hpp"

namespace ousym {

template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using MatrixXcd = Eigen::MatrixXcd;
using VectorXcd = Eigen::VectorXcd;
using cdouble = std::complex<double>;

template <class S>
VecX<double> primal(const VecX<S>& v) {
  VecX<double> out(v.size());
  for (Index i = 0; i < v.size(); ++i) out[i] = primal(v[i]);
  return out;
}

}  // namespace ousym
