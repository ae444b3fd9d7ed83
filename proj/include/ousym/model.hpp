#pragma once

// The Ornstein-Uhlenbeck system in an external force field,
//
//   dx^i = v^i dt
//   dv^i = [F^i(x) - beta_i v^i] dt + mu_i dw^i ,
//
// written as a 2n-dimensional Ito system driven by 2n Wiener processes: n
// ghost processes z that never enter the dynamics, and n active processes w.
//
// Layout conventions used throughout the library:
//   state  = [x_1..x_n, v_1..v_n]
//   wiener = [z_1..z_n, w_1..w_n]
// so the diffusion matrix is zero except sigma(n+i, n+i) = mu_i.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ousym/errors.hpp"
#include "ousym/expression.hpp"
#include "ousym/ito_system.hpp"
#include "ousym/types.hpp"

namespace ousym {

struct ConstantForce {
  VectorXd c;
};

struct LinearForce {
  MatrixXd L;
  VectorXd K;
};

struct ExpressionForce {
  std::vector<expr::Expression> components;
};

/// Autonomous force field F(x) on R^n.
class ForceField {
 public:
  using Variant = std::variant<ConstantForce, LinearForce, ExpressionForce>;

  static ForceField constant(VectorXd c);
  static ForceField linear(MatrixXd L, VectorXd K);
  static ForceField expression(std::vector<expr::Expression> components, int n);

  int dimension() const { return n_; }
  const Variant& variant() const { return force_; }

  template <class S>
  VecX<S> evaluate(const VecX<S>& x) const;

  MatrixXd jacobian(const VectorXd& x) const;
  /// One symmetric n x n matrix of second derivatives per component.
  std::vector<MatrixXd> hessians(const VectorXd& x) const;

  std::string describe() const;

 private:
  ForceField(int n, Variant v) : n_(n), force_(std::move(v)) {}

  int n_ = 0;
  Variant force_;
};

/// Parses "expr_1; expr_2; ...; expr_n" over variables x1..xn (and norm(x)).
ForceField parse_force_expression(std::string_view text, int n);

/// Variables accepted in force expressions.
expr::VariableSet force_variables(int n);

class OUSystem {
 public:
  int n() const { return n_; }
  const VectorXd& beta() const { return beta_; }
  const VectorXd& mu() const { return mu_; }
  const ForceField& force() const { return force_; }
  bool isotropic() const { return isotropic_; }

  template <class S>
  VecX<S> drift(const VecX<S>& state) const {
    const Index n = n_;
    VecX<S> out(2 * n);
    const VecX<S> x = state.head(n);
    const VecX<S> force = force_.evaluate<S>(x);
    for (Index i = 0; i < n; ++i) {
      out[i] = state[n + i];
      out[n + i] = force[i] - beta_[i] * state[n + i];
    }
    return out;
  }

  template <class S>
  MatX<S> diffusion() const {
    MatX<S> sigma = MatX<S>::Zero(2 * n_, 2 * n_);
    for (Index i = 0; i < n_; ++i) sigma(n_ + i, n_ + i) = S(mu_[i]);
    return sigma;
  }

  /// The same system as a general 2n x 2n Ito system.
  ItoSystem ito() const;

 private:
  friend OUSystem build_ou_system(int, const VectorXd&, const VectorXd&, const ForceField&);

  int n_ = 0;
  VectorXd beta_;
  VectorXd mu_;
  ForceField force_ = ForceField::constant(VectorXd::Zero(1));
  bool isotropic_ = false;
};

/// Validates and assembles an OU system.
/// Errors: DimensionMismatch, NonPositiveFriction, ZeroNoise.
OUSystem build_ou_system(int n, const VectorXd& beta, const VectorXd& mu, const ForceField& force);

enum class ForceTag {
  Constant,
  LinearRegular,
  LinearDegenerate,
  NonlinearSecondOrderRegular,
  NonlinearSecondOrderDegenerate,
};

std::string_view to_string(ForceTag tag);

struct ProbeWitness {
  VectorXd point;
  MatrixXd jacobian;
  double jacobian_sv_ratio = 0.0;  // smallest / largest singular value
  bool jacobian_zero = false;
  bool jacobian_singular = false;
  bool hessians_zero = false;
  std::vector<double> hessian_sv_ratios;
  bool hessians_regular = false;  // every Hessian matrix nonsingular here
};

struct ForceClass {
  ForceTag tag = ForceTag::Constant;
  /// False when probes disagree (e.g. zero Hessians at some probes only, or a
  /// piecewise linear field whose Jacobian changes between probes).
  bool consistent = true;
  std::string note;
  std::vector<ProbeWitness> probes;
  // Linear witness (also filled for Constant with L = 0).
  MatrixXd L;
  VectorXd K;
  Index rank = 0;
  // Constant witness.
  VectorXd c;
};

/// Default probe set: `count` points uniform in [-2, 2]^n from `seed`.
std::vector<VectorXd> default_force_probes(int n, int count = 32, std::uint64_t seed = 0);

/// True when sigma_min < tol * sigma_max (a zero matrix is singular).
bool is_singular(const MatrixXd& m, double tol, double* ratio = nullptr);

/// Regularity classification of a force field at a probe set.
/// Errors: EmptyProbeSet, NonFiniteEvaluation.
ForceClass classify_force(const ForceField& force, const std::vector<VectorXd>& probes,
                          double tol = 1e-8);

template <class S>
VecX<S> ForceField::evaluate(const VecX<S>& x) const {
  if (x.size() != n_) throw Error(ErrorKind::DimensionMismatch, "force evaluated at wrong dimension");
  return std::visit(
      [&](const auto& f) -> VecX<S> {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantForce>) {
          return f.c.template cast<S>();
        } else if constexpr (std::is_same_v<T, LinearForce>) {
          VecX<S> out(n_);
          for (Index i = 0; i < n_; ++i) {
            S acc(f.K[i]);
            for (Index j = 0; j < n_; ++j) acc = acc + f.L(i, j) * x[j];
            out[i] = acc;
          }
          return out;
        } else {
          VecX<S> out(n_);
          for (Index i = 0; i < n_; ++i) out[i] = f.components[i].template evaluate<S>(x);
          return out;
        }
      },
      force_);
}

}  // namespace ousym
