#pragma once

#include <functional>
#include <string>
#include <utility>

#include "ousym/types.hpp"

namespace ousym {

/// A general Ito system  dy = f(y,t) dt + sigma(y,t) dW  with state dimension
/// m and Wiener dimension d. Drift and diffusion are stored for plain and
/// first-order dual scalars, which is all the determining equations need.
class ItoSystem {
 public:
  template <class S>
  using Drift = std::function<VecX<S>(const VecX<S>&, const S&)>;
  template <class S>
  using Diffusion = std::function<MatX<S>(const VecX<S>&, const S&)>;

  ItoSystem() = default;

  /// `drift` and `diffusion` must be generic callables over the scalar type.
  template <class F, class G>
  ItoSystem(std::string name, Index state_dim, Index wiener_dim, F drift, G diffusion)
      : name_(std::move(name)),
        state_dim_(state_dim),
        wiener_dim_(wiener_dim),
        drift0_(drift),
        drift1_(drift),
        diffusion0_(diffusion),
        diffusion1_(diffusion) {}

  const std::string& name() const { return name_; }
  Index state_dim() const { return state_dim_; }
  Index wiener_dim() const { return wiener_dim_; }

  template <class S>
  VecX<S> drift(const VecX<S>& y, const S& t) const {
    if constexpr (std::is_same_v<S, double>) {
      return drift0_(y, t);
    } else {
      static_assert(std::is_same_v<S, D1>, "ItoSystem supports double and D1 only");
      return drift1_(y, t);
    }
  }

  template <class S>
  MatX<S> diffusion(const VecX<S>& y, const S& t) const {
    if constexpr (std::is_same_v<S, double>) {
      return diffusion0_(y, t);
    } else {
      static_assert(std::is_same_v<S, D1>, "ItoSystem supports double and D1 only");
      return diffusion1_(y, t);
    }
  }

 private:
  std::string name_;
  Index state_dim_ = 0;
  Index wiener_dim_ = 0;
  Drift<double> drift0_;
  Drift<D1> drift1_;
  Diffusion<double> diffusion0_;
  Diffusion<D1> diffusion1_;
};

/// Scalar geometric Brownian motion  dx = a x dt + b x dw.
ItoSystem geometric_brownian_motion(double a, double b);

/// dy = [exp(-y) - exp(-2y)/2] dt + exp(-y) dw, which x = exp(y) rectifies.
ItoSystem kozlov_exp_system();

}  // namespace ousym
