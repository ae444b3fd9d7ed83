#pragma once

// Differentiation on the extended space (state, t; wiener).
//
// A point is one flat coordinate vector laid out as
//   [ state (m) | t | wiener (d) ]
// and for the OU system m = d = 2n with state = [x, v], wiener = [z, w].
//
// Fields are type erased but keep the scalar type generic: each field can be
// evaluated on double and on nested dual numbers up to third order, which is
// enough for a Laplacian of a bracket of two generators.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <type_traits>
#include <vector>

#include "ousym/dual.hpp"
#include "ousym/errors.hpp"
#include "ousym/expression.hpp"
#include "ousym/ito_system.hpp"
#include "ousym/model.hpp"
#include "ousym/types.hpp"

namespace ousym {

struct ExtLayout {
  Index m = 0;  // state dimension
  Index d = 0;  // wiener dimension

  static ExtLayout ou(int n) { return {2 * n, 2 * n}; }
  static ExtLayout of(const ItoSystem& sys) { return {sys.state_dim(), sys.wiener_dim()}; }

  Index size() const { return m + 1 + d; }
  Index t_index() const { return m; }
  Index wiener_index(Index k) const { return m + 1 + k; }
  friend bool operator==(const ExtLayout&, const ExtLayout&) = default;
};

template <class S>
struct ExtPoint {
  ExtLayout layout;
  VecX<S> c;

  ExtPoint() = default;
  ExtPoint(ExtLayout l, VecX<S> coords) : layout(l), c(std::move(coords)) {
    if (c.size() != layout.size()) throw Error(ErrorKind::DimensionMismatch, "extended point size");
  }

  /// OU point; `z` defaults to zero when empty.
  static ExtPoint ou(const VecX<S>& x, const VecX<S>& v, const S& t, const VecX<S>& w,
                     const VecX<S>& z = VecX<S>()) {
    const Index n = x.size();
    if (v.size() != n || w.size() != n || (z.size() != 0 && z.size() != n))
      throw Error(ErrorKind::DimensionMismatch, "extended point components");
    ExtLayout l = ExtLayout::ou(static_cast<int>(n));
    VecX<S> c(l.size());
    c.head(n) = x;
    c.segment(n, n) = v;
    c[2 * n] = t;
    c.segment(2 * n + 1, n) = z.size() ? z : VecX<S>::Zero(n).eval();
    c.segment(3 * n + 1, n) = w;
    return ExtPoint(l, std::move(c));
  }

  /// General Ito-system point.
  static ExtPoint general(const VecX<S>& y, const S& t, const VecX<S>& w) {
    ExtLayout l{y.size(), w.size()};
    VecX<S> c(l.size());
    c.head(l.m) = y;
    c[l.m] = t;
    c.tail(l.d) = w;
    return ExtPoint(l, std::move(c));
  }

  Index n() const { return layout.m / 2; }
  auto state() const { return c.head(layout.m); }
  auto wiener() const { return c.tail(layout.d); }
  const S& t() const { return c[layout.m]; }
  const S& x(Index i) const { return c[i]; }
  const S& v(Index i) const { return c[n() + i]; }
  const S& z(Index i) const { return c[layout.m + 1 + i]; }
  const S& w(Index i) const { return c[layout.m + 1 + n() + i]; }

  /// zeta^i = w^i - v^i / mu_i
  S zeta(Index i, const OUSystem& sys) const { return w(i) - v(i) / sys.mu()[i]; }
  /// u^i = zeta^i - (beta_i / mu_i) x^i
  S u(Index i, const OUSystem& sys) const {
    return zeta(i, sys) - (sys.beta()[i] / sys.mu()[i]) * x(i);
  }
  /// chi^i = u^i + (c^i / mu_i) t; constant-force systems only.
  S chi(Index i, const OUSystem& sys) const;
};

/// Variables x1..xn, v1..vn, t, z1..zn, w1..wn at their extended indices.
expr::VariableSet ext_variables(int n);

template <class S>
using ScalarFn = std::function<S(const VecX<S>&)>;
template <class S>
using VectorFn = std::function<VecX<S>(const VecX<S>&)>;

[[noreturn]] void throw_order_exhausted();

class ScalarField {
 public:
  ScalarField() = default;
  template <class F>
    requires(!std::is_same_v<std::decay_t<F>, ScalarField>)
  ScalarField(F f) : f0_(f), f1_(f), f2_(f), f3_(f) {}

  bool empty() const { return !f0_; }

  template <class S>
  S operator()(const VecX<S>& p) const {
    if constexpr (std::is_same_v<S, double>) return f0_(p);
    else if constexpr (std::is_same_v<S, D1>) return f1_(p);
    else if constexpr (std::is_same_v<S, D2>) return f2_(p);
    else if constexpr (std::is_same_v<S, D3>) return f3_(p);
    else static_assert(kDualLevel<S> <= 3, "derivative order exhausted");
  }

  static ScalarField constant(double c);
  static ScalarField from_expression(const expr::Expression& e);

 private:
  ScalarFn<double> f0_;
  ScalarFn<D1> f1_;
  ScalarFn<D2> f2_;
  ScalarFn<D3> f3_;
};

class VectorField {
 public:
  VectorField() = default;
  template <class F>
    requires(!std::is_same_v<std::decay_t<F>, VectorField>)
  VectorField(Index out_dim, F f) : out_(out_dim), f0_(f), f1_(f), f2_(f), f3_(f) {}

  Index out_dim() const { return out_; }
  bool empty() const { return !f0_; }

  template <class S>
  VecX<S> operator()(const VecX<S>& p) const {
    if constexpr (std::is_same_v<S, double>) return f0_(p);
    else if constexpr (std::is_same_v<S, D1>) return f1_(p);
    else if constexpr (std::is_same_v<S, D2>) return f2_(p);
    else if constexpr (std::is_same_v<S, D3>) return f3_(p);
    else static_assert(kDualLevel<S> <= 3, "derivative order exhausted");
  }

  static VectorField zero(Index out_dim);
  static VectorField from_expressions(std::vector<expr::Expression> comps);

 private:
  Index out_ = 0;
  VectorFn<double> f0_;
  VectorFn<D1> f1_;
  VectorFn<D2> f2_;
  VectorFn<D3> f3_;
};

enum class Engine { Dual, FiniteDifference };

/// Equality tolerance matched to the engine's truncation error.
constexpr double default_tolerance(Engine e) { return e == Engine::Dual ? 1e-8 : 1e-4; }

// ---------------------------------------------------------------------------
// Directional derivatives. The dual versions are generic in the scalar so they
// can be nested (a bracket evaluated on dual numbers).

namespace detail {

template <class S>
VecX<Dual<S>> seed(const VecX<S>& p, const VecX<S>& u) {
  VecX<Dual<S>> q(p.size());
  for (Index i = 0; i < p.size(); ++i) q[i] = Dual<S>(p[i], u[i]);
  return q;
}

template <class S>
VecX<S> tangent(const VecX<Dual<S>>& y) {
  VecX<S> out(y.size());
  for (Index i = 0; i < y.size(); ++i) out[i] = y[i].d;
  return out;
}

template <class S>
VecX<S> value(const VecX<Dual<S>>& y) {
  VecX<S> out(y.size());
  for (Index i = 0; i < y.size(); ++i) out[i] = y[i].v;
  return out;
}

inline VecX<D2> seed2(const VectorXd& p, const VectorXd& u, const VectorXd& u2) {
  VecX<D2> q(p.size());
  for (Index i = 0; i < p.size(); ++i) q[i] = D2(D1(p[i], u[i]), D1(u2[i], 0.0));
  return q;
}

inline double fd_step1(const VectorXd& p, const VectorXd& u) {
  const double scale = std::max(1.0, p.cwiseAbs().maxCoeff());
  const double unorm = u.cwiseAbs().maxCoeff();
  return std::cbrt(std::numeric_limits<double>::epsilon()) * scale / (unorm > 0 ? unorm : 1.0);
}

inline double fd_step2(const VectorXd& p, const VectorXd& u) {
  const double scale = std::max(1.0, p.cwiseAbs().maxCoeff());
  const double unorm = u.cwiseAbs().maxCoeff();
  return std::pow(std::numeric_limits<double>::epsilon(), 0.25) * scale / (unorm > 0 ? unorm : 1.0);
}

template <class G>
auto fd_dir1(const G& g, const VectorXd& p, const VectorXd& u) {
  const double h = fd_step1(p, u);
  return ((g(VectorXd(p + h * u)) - g(VectorXd(p - h * u))) / (2.0 * h)).eval();
}

template <class G>
auto fd_dir2(const G& g, const VectorXd& p, const VectorXd& u) {
  const double h = fd_step2(p, u);
  return ((g(VectorXd(p + h * u)) - 2.0 * g(p) + g(VectorXd(p - h * u))) / (h * h)).eval();
}

// Scalar variants (Eigen expression `.eval()` is not available on double).
template <class G>
double fd_dir1_scalar(const G& g, const VectorXd& p, const VectorXd& u) {
  const double h = fd_step1(p, u);
  return (g(VectorXd(p + h * u)) - g(VectorXd(p - h * u))) / (2.0 * h);
}

template <class G>
double fd_dir2_scalar(const G& g, const VectorXd& p, const VectorXd& u) {
  const double h = fd_step2(p, u);
  return (g(VectorXd(p + h * u)) - 2.0 * g(p) + g(VectorXd(p - h * u))) / (h * h);
}

}  // namespace detail

/// D_u F(p) with dual numbers at any admissible level.
template <class S>
VecX<S> directional(const VectorField& F, const VecX<S>& p, const VecX<S>& u) {
  if constexpr (kDualLevel<S> < 3) {
    return detail::tangent<S>(F(detail::seed<S>(p, u)));
  } else {
    throw_order_exhausted();
  }
}

template <class S>
S directional(const ScalarField& f, const VecX<S>& p, const VecX<S>& u) {
  if constexpr (kDualLevel<S> < 3) {
    return f(detail::seed<S>(p, u)).d;
  } else {
    throw_order_exhausted();
  }
}

VectorXd directional(const VectorField& F, const VectorXd& p, const VectorXd& u, Engine e);
double directional(const ScalarField& f, const VectorXd& p, const VectorXd& u, Engine e);

/// Second directional derivative u^T H u.
VectorXd directional2(const VectorField& F, const VectorXd& p, const VectorXd& u, Engine e);
double directional2(const ScalarField& f, const VectorXd& p, const VectorXd& u, Engine e);

/// df/dc1 (order 1) or d2f/dc1 dc2 (order 2) at p.
/// Errors: NonFiniteResult, InvalidArgument for a bad coordinate index.
double derivative(const ScalarField& f, const ExtPoint<double>& p, Index c1, Engine e = Engine::Dual);
double derivative(const ScalarField& f, const ExtPoint<double>& p, Index c1, Index c2,
                  Engine e = Engine::Dual);

/// Directions d_k = (sigma[:,k](p), 0, e_k) whose second derivatives sum to
/// the Ito Laplacian.
std::vector<VectorXd> laplacian_directions(const ItoSystem& sys, const ExtPoint<double>& p);

/// Ito Laplacian of eq. (Lapl), summed over the full state and wiener space.
/// Errors: NonFiniteResult
double ito_laplacian(const ScalarField& f, const ItoSystem& sys, const ExtPoint<double>& p,
                     Engine e = Engine::Dual);
double ito_laplacian(const ScalarField& f, const OUSystem& sys, const ExtPoint<double>& p,
                     Engine e = Engine::Dual);
/// Componentwise Laplacian of a vector field.
VectorXd ito_laplacian(const VectorField& F, const ItoSystem& sys, const ExtPoint<double>& p,
                       Engine e = Engine::Dual);

/// [X, Y] = (X.grad) Y - (Y.grad) X, both fields over the whole extended space.
template <class S>
VecX<S> lie_bracket(const VectorField& X, const VectorField& Y, const VecX<S>& p) {
  return directional<S>(Y, p, X(p)) - directional<S>(X, p, Y(p));
}

/// Errors: NonFiniteResult, DimensionMismatch
VectorXd lie_bracket(const VectorField& X, const VectorField& Y, const ExtPoint<double>& p);

/// The bracket as a field in its own right (consumes one derivative level).
VectorField bracket_field(const VectorField& X, const VectorField& Y);

struct ProbeBox {
  double lo = -2.0;
  double hi = 2.0;
  double t_lo = 0.0;
  double t_hi = 2.0;
};

/// Seeded uniform probes in the box; t drawn from [t_lo, t_hi].
std::vector<ExtPoint<double>> random_probes(ExtLayout layout, int count = 100, std::uint64_t seed = 0,
                                            const ProbeBox& box = {});

void check_finite(double v, const char* what);
void check_finite(const Eigen::Ref<const MatrixXd>& m, const char* what);

template <class S>
S ExtPoint<S>::chi(Index i, const OUSystem& sys) const {
  const auto* f = std::get_if<ConstantForce>(&sys.force().variant());
  if (!f) throw Error(ErrorKind::WrongForceClass, "chi is defined for constant force only");
  return u(i, sys) + (f->c[i] / sys.mu()[i]) * t();
}

}  // namespace ousym
