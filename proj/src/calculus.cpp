#include "ousym/calculus.hpp"

#include "ousym/rng.hpp"

namespace ousym {

void throw_order_exhausted() {
  throw Error(ErrorKind::DerivativeOrderExhausted, "field nested beyond third-order dual numbers");
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteResult, what);
}

void check_finite(const Eigen::Ref<const MatrixXd>& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorKind::NonFiniteResult, what);
}

expr::VariableSet ext_variables(int n) {
  expr::VariableSet vs;
  vs.add_indexed("x", n, 0);
  vs.add_indexed("v", n, n);
  vs.add("t", 2 * n);
  vs.add_indexed("z", n, 2 * n + 1);
  vs.add_indexed("w", n, 3 * n + 1);
  return vs;
}

ScalarField ScalarField::constant(double c) {
  return ScalarField([c](const auto& p) {
    using S = typename std::decay_t<decltype(p)>::Scalar;
    return S(c);
  });
}

ScalarField ScalarField::from_expression(const expr::Expression& e) {
  return ScalarField([e](const auto& p) {
    using S = typename std::decay_t<decltype(p)>::Scalar;
    return e.evaluate<S>(p);
  });
}

VectorField VectorField::zero(Index out_dim) {
  return VectorField(out_dim, [out_dim](const auto& p) {
    using S = typename std::decay_t<decltype(p)>::Scalar;
    return VecX<S>::Zero(out_dim).eval();
  });
}

VectorField VectorField::from_expressions(std::vector<expr::Expression> comps) {
  const Index m = static_cast<Index>(comps.size());
  return VectorField(m, [comps](const auto& p) {
    using S = typename std::decay_t<decltype(p)>::Scalar;
    VecX<S> out(static_cast<Index>(comps.size()));
    for (std::size_t i = 0; i < comps.size(); ++i) out[i] = comps[i].template evaluate<S>(p);
    return out;
  });
}

VectorXd directional(const VectorField& F, const VectorXd& p, const VectorXd& u, Engine e) {
  VectorXd out = e == Engine::Dual
                     ? directional<double>(F, p, u)
                     : detail::fd_dir1([&](const VectorXd& q) { return F(q); }, p, u);
  check_finite(out, "directional derivative");
  return out;
}

double directional(const ScalarField& f, const VectorXd& p, const VectorXd& u, Engine e) {
  const double out = e == Engine::Dual
                         ? directional<double>(f, p, u)
                         : detail::fd_dir1_scalar([&](const VectorXd& q) { return f(q); }, p, u);
  check_finite(out, "directional derivative");
  return out;
}

VectorXd directional2(const VectorField& F, const VectorXd& p, const VectorXd& u, Engine e) {
  VectorXd out;
  if (e == Engine::Dual) {
    const VecX<D2> y = F(detail::seed2(p, u, u));
    out.resize(y.size());
    for (Index i = 0; i < y.size(); ++i) out[i] = y[i].d.d;
  } else {
    out = detail::fd_dir2([&](const VectorXd& q) { return F(q); }, p, u);
  }
  check_finite(out, "second directional derivative");
  return out;
}

double directional2(const ScalarField& f, const VectorXd& p, const VectorXd& u, Engine e) {
  const double out = e == Engine::Dual
                         ? f(detail::seed2(p, u, u)).d.d
                         : detail::fd_dir2_scalar([&](const VectorXd& q) { return f(q); }, p, u);
  check_finite(out, "second directional derivative");
  return out;
}

namespace {

VectorXd unit(Index size, Index k) {
  if (k < 0 || k >= size) throw Error(ErrorKind::InvalidArgument, "coordinate index out of range");
  return VectorXd::Unit(size, k);
}

}  // namespace

double derivative(const ScalarField& f, const ExtPoint<double>& p, Index c1, Engine e) {
  return directional(f, p.c, unit(p.c.size(), c1), e);
}

double derivative(const ScalarField& f, const ExtPoint<double>& p, Index c1, Index c2, Engine e) {
  const VectorXd u1 = unit(p.c.size(), c1);
  const VectorXd u2 = unit(p.c.size(), c2);
  double out;
  if (e == Engine::Dual) {
    out = f(detail::seed2(p.c, u1, u2)).d.d;
  } else if (c1 == c2) {
    out = detail::fd_dir2_scalar([&](const VectorXd& q) { return f(q); }, p.c, u1);
  } else {
    // Central mixed difference.
    const double h1 = detail::fd_step2(p.c, u1);
    const double h2 = detail::fd_step2(p.c, u2);
    auto g = [&](double s1, double s2) { return f(VectorXd(p.c + s1 * h1 * u1 + s2 * h2 * u2)); };
    out = (g(1, 1) - g(1, -1) - g(-1, 1) + g(-1, -1)) / (4.0 * h1 * h2);
  }
  check_finite(out, "second derivative");
  return out;
}

std::vector<VectorXd> laplacian_directions(const ItoSystem& sys, const ExtPoint<double>& p) {
  const ExtLayout l = ExtLayout::of(sys);
  if (!(p.layout == l)) throw Error(ErrorKind::DimensionMismatch, "point layout does not match system");
  const MatrixXd sigma = sys.diffusion<double>(p.c.head(l.m), p.c[l.t_index()]);
  std::vector<VectorXd> dirs;
  dirs.reserve(l.d);
  for (Index k = 0; k < l.d; ++k) {
    VectorXd u = VectorXd::Zero(l.size());
    u.head(l.m) = sigma.col(k);
    u[l.wiener_index(k)] = 1.0;
    dirs.push_back(std::move(u));
  }
  return dirs;
}

double ito_laplacian(const ScalarField& f, const ItoSystem& sys, const ExtPoint<double>& p, Engine e) {
  double acc = 0.0;
  for (const VectorXd& u : laplacian_directions(sys, p)) acc += directional2(f, p.c, u, e);
  check_finite(acc, "Ito Laplacian");
  return acc;
}

double ito_laplacian(const ScalarField& f, const OUSystem& sys, const ExtPoint<double>& p, Engine e) {
  return ito_laplacian(f, sys.ito(), p, e);
}

VectorXd ito_laplacian(const VectorField& F, const ItoSystem& sys, const ExtPoint<double>& p, Engine e) {
  VectorXd acc = VectorXd::Zero(F.out_dim());
  for (const VectorXd& u : laplacian_directions(sys, p)) acc += directional2(F, p.c, u, e);
  check_finite(acc, "Ito Laplacian");
  return acc;
}

VectorXd lie_bracket(const VectorField& X, const VectorField& Y, const ExtPoint<double>& p) {
  if (X.out_dim() != p.c.size() || Y.out_dim() != p.c.size())
    throw Error(ErrorKind::DimensionMismatch, "bracket fields must act on the whole extended space");
  VectorXd out = lie_bracket<double>(X, Y, p.c);
  check_finite(out, "Lie bracket");
  return out;
}

VectorField bracket_field(const VectorField& X, const VectorField& Y) {
  return VectorField(X.out_dim(), [X, Y](const auto& p) {
    using S = typename std::decay_t<decltype(p)>::Scalar;
    if constexpr (kDualLevel<S> < 3) {
      return lie_bracket<S>(X, Y, p);
    } else {
      throw_order_exhausted();
      return VecX<S>();
    }
  });
}

std::vector<ExtPoint<double>> random_probes(ExtLayout layout, int count, std::uint64_t seed,
                                            const ProbeBox& box) {
  std::vector<ExtPoint<double>> out;
  out.reserve(count);
  constexpr std::uint64_t kTag = 0x50524f4245ULL;
  for (int k = 0; k < count; ++k) {
    VectorXd c(layout.size());
    for (Index i = 0; i < layout.size(); ++i) {
      const double u = rng::uniform(seed, k, i, kTag, 0);
      c[i] = i == layout.t_index() ? box.t_lo + (box.t_hi - box.t_lo) * u : box.lo + (box.hi - box.lo) * u;
    }
    out.emplace_back(layout, std::move(c));
  }
  return out;
}

}  // namespace ousym
