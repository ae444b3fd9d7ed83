#include "ousym/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SVD>

namespace ousym {

namespace {

template <class S>
S scale_at(const ScalarField& r, const VecX<S>& p) {
  return r.empty() ? S(1.0) : r(p);
}

// Tangent of the drift at (state, t) along a state direction.
VectorXd drift_derivative(const ItoSystem& sys, const VectorXd& state, double t, const VectorXd& u,
                          Engine e) {
  if (e == Engine::Dual) {
    const VecX<D1> f = sys.drift<D1>(detail::seed<double>(state, u), D1(t));
    return detail::tangent<double>(f);
  }
  return detail::fd_dir1([&](const VectorXd& q) { return sys.drift<double>(q, t); }, state, u);
}

MatrixXd diffusion_derivative(const ItoSystem& sys, const VectorXd& state, double t, const VectorXd& u,
                              Engine e) {
  if (e == Engine::Dual) {
    const MatX<D1> s = sys.diffusion<D1>(detail::seed<double>(state, u), D1(t));
    MatrixXd out(s.rows(), s.cols());
    for (Index i = 0; i < s.rows(); ++i)
      for (Index j = 0; j < s.cols(); ++j) out(i, j) = s(i, j).d;
    return out;
  }
  return detail::fd_dir1([&](const VectorXd& q) { return sys.diffusion<double>(q, t); }, state, u);
}

void check_layout(const ExtLayout& a, const ExtLayout& b) {
  if (!(a == b)) throw Error(ErrorKind::DimensionMismatch, "generator and system layouts differ");
}

std::string coefficient_term(double c, const std::string& name, bool first) {
  std::string out;
  const double a = std::abs(c);
  if (first) {
    if (c < 0) out += "-";
  } else {
    out += c < 0 ? " - " : " + ";
  }
  if (a != 1.0 || name.empty()) out += expr::format_double(a) + (name.empty() ? "" : "*");
  return out + name;
}

// Reduced row echelon form in place; rows are basis vectors.
void rref(MatrixXd& A, double eps) {
  Index lead = 0;
  for (Index c = 0; c < A.cols() && lead < A.rows(); ++c) {
    Index piv;
    const double best = A.col(c).tail(A.rows() - lead).cwiseAbs().maxCoeff(&piv);
    if (best <= eps) continue;
    piv += lead;
    A.row(piv).swap(A.row(lead));
    A.row(lead) /= A(lead, c);
    for (Index r = 0; r < A.rows(); ++r)
      if (r != lead) A.row(r) -= A(r, c) * A.row(lead);
    ++lead;
  }
  A = A.unaryExpr([eps](double x) { return std::abs(x) <= eps ? 0.0 : x; }).eval();
}

}  // namespace

std::string family_name(const Family& f) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ExpDecay>) return "ExpDecay";
        else if constexpr (std::is_same_v<T, Translation>) return "Translation";
        else if constexpr (std::is_same_v<T, ModuleScaled>) return "ModuleScaled";
        else return "Generic";
      },
      f);
}

VectorField SymmetryGenerator::full() const {
  const ExtLayout l = layout;
  return VectorField(l.size(), [l, phi = phi, R = R, r = r_scale](const auto& p) {
    using S = typename std::decay_t<decltype(p)>::Scalar;
    VecX<S> out(l.size());
    out.head(l.m) = phi(p);
    out[l.m] = S(0.0);
    const S scale = scale_at(r, p);
    for (Index i = 0; i < l.d; ++i) {
      S acc(0.0);
      for (Index k = 0; k < l.d; ++k)
        if (R(i, k) != 0.0) acc = acc + R(i, k) * p[l.wiener_index(k)];
      out[l.wiener_index(i)] = acc * scale;
    }
    return out;
  });
}

MatrixXd SymmetryGenerator::R_at(const VectorXd& p) const { return R * scale_at(r_scale, p); }

SymmetryGenerator make_generator(ExtLayout layout, VectorField phi, MatrixXd R, Family family,
                                 std::string label) {
  if (phi.out_dim() != layout.m) throw Error(ErrorKind::DimensionMismatch, "phi must have one entry per state");
  if (R.size() == 0) R = MatrixXd::Zero(layout.d, layout.d);
  if (R.rows() != layout.d || R.cols() != layout.d)
    throw Error(ErrorKind::DimensionMismatch, "R must be d x d");
  MatrixXd S = R;
  S.diagonal().setZero();
  if ((S + S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + S.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::InvalidArgument, "R must be diagonal plus skew-symmetric");
  return SymmetryGenerator{layout, std::move(phi), std::move(R), {}, std::move(family), std::move(label)};
}

std::string render_expdecay(Index i, double kappa) {
  const std::string idx = std::to_string(i + 1);
  std::string out;
  if (kappa != 0.0) {
    out = "exp(" + std::string(kappa > 0 ? "-" : "") + expr::format_double(std::abs(kappa)) + "*t)*(";
  } else {
    out = "(";
  }
  out += "d/dx" + idx;
  if (kappa != 0.0) out += coefficient_term(-kappa, "d/dv" + idx, false);
  return out + ")";
}

SymmetryGenerator expdecay_generator(int n, Index i, double kappa) {
  if (i < 0 || i >= n) throw Error(ErrorKind::InvalidArgument, "component index out of range");
  const ExtLayout l = ExtLayout::ou(n);
  VectorField phi(l.m, [l, i, kappa, n](const auto& p) {
    using S = typename std::decay_t<decltype(p)>::Scalar;
    using std::exp;
    VecX<S> out = VecX<S>::Zero(l.m);
    const S e = exp(-kappa * p[l.t_index()]);
    out[i] = e;
    out[n + i] = -kappa * e;
    return out;
  });
  return make_generator(l, std::move(phi), {}, ExpDecay{i, kappa}, render_expdecay(i, kappa));
}

SymmetryGenerator translation_generator(int n, Index i) {
  if (i < 0 || i >= n) throw Error(ErrorKind::InvalidArgument, "component index out of range");
  const ExtLayout l = ExtLayout::ou(n);
  VectorField phi(l.m, [l, i](const auto& p) {
    using S = typename std::decay_t<decltype(p)>::Scalar;
    VecX<S> out = VecX<S>::Zero(l.m);
    out[i] = S(1.0);
    return out;
  });
  return make_generator(l, std::move(phi), {}, Translation{i}, "d/dx" + std::to_string(i + 1));
}

SymmetryGenerator zero_generator(ExtLayout layout) {
  return make_generator(layout, VectorField::zero(layout.m), {}, Generic{}, "0");
}

SymmetryGenerator generic_generator(int n, const std::vector<expr::Expression>& phi, MatrixXd R,
                                    std::string label) {
  const ExtLayout l = ExtLayout::ou(n);
  if (static_cast<Index>(phi.size()) != l.m)
    throw Error(ErrorKind::ArityMismatch, "generic generator needs 2n phi components");
  return make_generator(l, VectorField::from_expressions(phi), std::move(R), Generic{}, std::move(label));
}

SymmetryGenerator linear_combination(double a, const SymmetryGenerator& X, double b,
                                     const SymmetryGenerator& Y) {
  check_layout(X.layout, Y.layout);
  if (!X.r_scale.empty() || !Y.r_scale.empty())
    throw Error(ErrorKind::InvalidArgument, "linear combination of scaled W-matrices");
  VectorField phi(X.layout.m, [a, b, px = X.phi, py = Y.phi](const auto& p) {
    using S = typename std::decay_t<decltype(p)>::Scalar;
    return (px(p) * S(a) + py(p) * S(b)).eval();
  });
  std::ostringstream label;
  label << expr::format_double(a) << "*(" << X.label << ") + " << expr::format_double(b) << "*(" << Y.label
        << ")";
  return make_generator(X.layout, std::move(phi), a * X.R + b * Y.R, Generic{}, label.str());
}

SymmetryGenerator bracket(const SymmetryGenerator& X, const SymmetryGenerator& Y) {
  check_layout(X.layout, Y.layout);
  const bool scaled_x = !X.r_scale.empty() && !X.R.isZero(0.0);
  const bool scaled_y = !Y.r_scale.empty() && !Y.R.isZero(0.0);
  if (scaled_x || scaled_y)
    throw Error(ErrorKind::InvalidArgument, "bracket of generators with a scaled nonzero W-matrix");
  const VectorField b = bracket_field(X.full(), Y.full());
  const Index m = X.layout.m;
  VectorField phi(m, [b, m](const auto& p) { return b(p).head(m).eval(); });
  return make_generator(X.layout, std::move(phi), Y.R * X.R - X.R * Y.R, Generic{},
                        "[" + X.label + ", " + Y.label + "]");
}

// ---------------------------------------------------------------------------

double AffineInvariant::evaluate(const ExtPoint<double>& p) const {
  const Index n = p.n();
  double acc = a_0 + a_t * p.t();
  for (Index i = 0; i < n; ++i)
    acc += a_x[i] * p.x(i) + a_v[i] * p.v(i) + a_w[i] * p.w(i) + a_z[i] * p.z(i);
  return acc;
}

std::string AffineInvariant::render() const {
  std::string out;
  auto add = [&](double c, const std::string& name) {
    if (c == 0.0) return;
    out += coefficient_term(c, name, out.empty());
  };
  const Index n = a_x.size();
  for (Index i = 0; i < n; ++i) add(a_w[i], "w" + std::to_string(i + 1));
  for (Index i = 0; i < n; ++i) add(a_v[i], "v" + std::to_string(i + 1));
  for (Index i = 0; i < n; ++i) add(a_x[i], "x" + std::to_string(i + 1));
  for (Index i = 0; i < n; ++i) add(a_z[i], "z" + std::to_string(i + 1));
  add(a_t, "t");
  add(a_0, "");
  return out.empty() ? "0" : out;
}

InvariantCandidate affine_candidate(const AffineInvariant& a) {
  const Index n = a.a_x.size();
  ScalarField theta([a, n](const auto& p) {
    using S = typename std::decay_t<decltype(p)>::Scalar;
    S acc = S(a.a_0) + a.a_t * p[2 * n];
    for (Index i = 0; i < n; ++i) {
      acc = acc + a.a_x[i] * p[i] + a.a_v[i] * p[n + i] + a.a_z[i] * p[2 * n + 1 + i] +
            a.a_w[i] * p[3 * n + 1 + i];
    }
    return acc;
  });
  return InvariantCandidate{std::move(theta), a, a.render()};
}

InvariantCandidate expression_candidate(const expr::Expression& e, std::string label) {
  return InvariantCandidate{ScalarField::from_expression(e), std::nullopt,
                            label.empty() ? e.render() : std::move(label)};
}

expr::VariableSet chi_variables(int k) {
  expr::VariableSet vs = expr::VariableSet::indexed("chi", k);
  if (k == 1) vs.add("chi", 0);
  return vs;
}

InvariantCandidate compose_invariant(const std::vector<InvariantCandidate>& basis, const expr::Expression& f) {
  std::vector<ScalarField> fields;
  for (const auto& b : basis) fields.push_back(b.theta);
  ScalarField theta([fields, f](const auto& p) {
    using S = typename std::decay_t<decltype(p)>::Scalar;
    VecX<S> chi(static_cast<Index>(fields.size()));
    for (std::size_t i = 0; i < fields.size(); ++i) chi[i] = fields[i](p);
    return f.evaluate<S>(chi);
  });
  return InvariantCandidate{std::move(theta), std::nullopt, f.render()};
}

// ---------------------------------------------------------------------------

VectorXd f_residual(const SymmetryGenerator& X, const ItoSystem& sys, const ExtPoint<double>& p, Engine e) {
  const ExtLayout l = ExtLayout::of(sys);
  check_layout(X.layout, l);
  check_layout(p.layout, l);
  const VectorXd state = p.c.head(l.m);
  const double t = p.c[l.t_index()];
  VectorXd u = VectorXd::Zero(l.size());
  u.head(l.m) = sys.drift<double>(state, t);
  u[l.t_index()] = 1.0;
  const VectorXd phi = X.phi(p.c);
  VectorXd res = directional(X.phi, p.c, u, e) - drift_derivative(sys, state, t, phi, e) +
                 0.5 * ito_laplacian(X.phi, sys, p, e);
  check_finite(res, "f residual");
  return res;
}

VectorXd f_residual(const SymmetryGenerator& X, const OUSystem& sys, const ExtPoint<double>& p, Engine e) {
  return f_residual(X, sys.ito(), p, e);
}

MatrixXd sigma_residual(const SymmetryGenerator& X, const ItoSystem& sys, const ExtPoint<double>& p,
                        Engine e) {
  const ExtLayout l = ExtLayout::of(sys);
  check_layout(X.layout, l);
  check_layout(p.layout, l);
  const VectorXd state = p.c.head(l.m);
  const double t = p.c[l.t_index()];
  const MatrixXd sigma = sys.diffusion<double>(state, t);
  const VectorXd phi = X.phi(p.c);
  const MatrixXd dsigma = diffusion_derivative(sys, state, t, phi, e);
  const MatrixXd sR = sigma * X.R_at(p.c);
  const auto dirs = laplacian_directions(sys, p);
  MatrixXd res(l.m, l.d);
  for (Index k = 0; k < l.d; ++k) res.col(k) = directional(X.phi, p.c, dirs[k], e) - dsigma.col(k) - sR.col(k);
  check_finite(res, "sigma residual");
  return res;
}

MatrixXd sigma_residual(const SymmetryGenerator& X, const OUSystem& sys, const ExtPoint<double>& p,
                        Engine e) {
  return sigma_residual(X, sys.ito(), p, e);
}

VectorXd invariant_residual(const InvariantCandidate& theta, const ItoSystem& sys, const ExtPoint<double>& p,
                            Engine e) {
  const ExtLayout l = ExtLayout::of(sys);
  check_layout(p.layout, l);
  const auto dirs = laplacian_directions(sys, p);
  VectorXd res(l.d + 1);
  for (Index k = 0; k < l.d; ++k) res[k] = directional(theta.theta, p.c, dirs[k], e);
  VectorXd u = VectorXd::Zero(l.size());
  u.head(l.m) = sys.drift<double>(p.c.head(l.m), p.c[l.t_index()]);
  u[l.t_index()] = 1.0;
  res[l.d] = directional(theta.theta, p.c, u, e) + 0.5 * ito_laplacian(theta.theta, sys, p, e);
  check_finite(res, "invariant residual");
  return res;
}

VectorXd invariant_residual(const InvariantCandidate& theta, const OUSystem& sys, const ExtPoint<double>& p,
                            Engine e) {
  return invariant_residual(theta, sys.ito(), p, e);
}

ResidualReport residual_report(const SymmetryGenerator& X, const ItoSystem& sys, const ExtPoint<double>& p,
                               Engine e) {
  ResidualReport r{p, f_residual(X, sys, p, e), sigma_residual(X, sys, p, e), 0.0};
  r.max_abs = std::max(r.f_residual.cwiseAbs().maxCoeff(), r.sigma_residual.cwiseAbs().maxCoeff());
  return r;
}

ResidualSummary max_residual(const SymmetryGenerator& X, const ItoSystem& sys,
                             const std::vector<ExtPoint<double>>& probes, Engine e) {
  ResidualSummary s;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const ResidualReport r = residual_report(X, sys, probes[k], e);
    s.max_f = std::max(s.max_f, r.f_residual.cwiseAbs().maxCoeff());
    s.max_sigma = std::max(s.max_sigma, r.sigma_residual.cwiseAbs().maxCoeff());
    if (r.max_abs > s.max_abs) {
      s.max_abs = r.max_abs;
      s.worst_probe = k;
    }
  }
  return s;
}

ResidualSummary max_residual(const SymmetryGenerator& X, const OUSystem& sys,
                             const std::vector<ExtPoint<double>>& probes, Engine e) {
  return max_residual(X, sys.ito(), probes, e);
}

double max_invariant_residual(const InvariantCandidate& theta, const OUSystem& sys,
                              const std::vector<ExtPoint<double>>& probes, Engine e) {
  const ItoSystem ito = sys.ito();
  double m = 0.0;
  for (const auto& p : probes) m = std::max(m, invariant_residual(theta, ito, p, e).cwiseAbs().maxCoeff());
  return m;
}

SymmetryGenerator scale_by_invariant(const SymmetryGenerator& X, const InvariantCandidate& alpha,
                                     const OUSystem& sys, const std::vector<ExtPoint<double>>& probes,
                                     double tol) {
  const auto pts = probes.empty() ? random_probes(X.layout, 100, 0) : probes;
  const double res = max_invariant_residual(alpha, sys, pts);
  if (!(res <= tol))
    throw Error(ErrorKind::NotAnInvariant,
                "'" + alpha.label + "' has invariant residual " + expr::format_double(res));
  const bool unit = std::all_of(pts.begin(), pts.end(), [&](const auto& p) { return alpha.theta(p.c) == 1.0; });
  if (unit) return X;

  SymmetryGenerator out = X;
  out.phi = VectorField(X.layout.m, [phi = X.phi, a = alpha.theta](const auto& p) {
    return (phi(p) * a(p)).eval();
  });
  out.r_scale = ScalarField([r = X.r_scale, a = alpha.theta](const auto& p) {
    using S = typename std::decay_t<decltype(p)>::Scalar;
    return scale_at<S>(r, p) * a(p);
  });
  out.family = ModuleScaled{X.label, alpha.label};
  out.label = "(" + alpha.label + ")*" + X.label;
  return out;
}

// ---------------------------------------------------------------------------

MatrixXd null_space(const MatrixXd& A, double rel_tol) {
  const Index cols = A.cols();
  if (A.rows() == 0 || A.isZero(0.0)) return MatrixXd::Identity(cols, cols);
  Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeFullV);
  const VectorXd& s = svd.singularValues();
  const double cut = rel_tol * s[0];
  Index rank = 0;
  while (rank < s.size() && s[rank] > cut) ++rank;
  if (rank == cols) return MatrixXd(cols, 0);
  MatrixXd basis = svd.matrixV().rightCols(cols - rank).transpose();
  rref(basis, 1e-12);
  return basis.transpose();
}

std::vector<MatrixXd> solve_wsym_linear_constraint(const MatrixXd& L, const MatrixXd& B) {
  const Index n = L.rows();
  if (L.cols() != n || B.rows() != n || B.cols() != n)
    throw Error(ErrorKind::DimensionMismatch, "L and B must be square of equal size");
  MatrixXd off = B;
  off.diagonal().setZero();
  if (!off.isZero(0.0)) throw Error(ErrorKind::InvalidArgument, "B must be diagonal");
  // vec(L R - B R + R B) = (I (x) L - I (x) B + B^T (x) I) vec(R), column-major vec.
  const Index N = n * n;
  MatrixXd A = MatrixXd::Zero(N, N);
  for (Index j = 0; j < n; ++j) {
    A.block(j * n, j * n, n, n) += L - B;
    for (Index i = 0; i < n; ++i) A.block(i * n, j * n, n, n) += B(j, i) * MatrixXd::Identity(n, n);
  }
  const MatrixXd ns = null_space(A, 1e-10);
  std::vector<MatrixXd> out;
  for (Index k = 0; k < ns.cols(); ++k) out.push_back(Eigen::Map<const MatrixXd>(ns.col(k).data(), n, n));
  return out;
}

std::vector<AffineInvariant> solve_affine_invariants(const OUSystem& sys,
                                                     const std::vector<ExtPoint<double>>& probes,
                                                     double rel_tol) {
  if (probes.empty()) throw Error(ErrorKind::EmptyProbeSet, "affine invariant solve needs probes");
  const Index n = sys.n();
  const Index unknowns = 4 * n + 1;  // ordering: w, v, x, z, t
  auto unpack = [n](const VectorXd& a) {
    AffineInvariant inv;
    inv.a_w = a.segment(0, n);
    inv.a_v = a.segment(n, n);
    inv.a_x = a.segment(2 * n, n);
    inv.a_z = a.segment(3 * n, n);
    inv.a_t = a[4 * n];
    return inv;
  };
  const ItoSystem ito = sys.ito();
  const Index per_probe = 2 * n + 1;
  MatrixXd A(per_probe * static_cast<Index>(probes.size()), unknowns);
  for (Index j = 0; j < unknowns; ++j) {
    const InvariantCandidate cand = affine_candidate(unpack(VectorXd::Unit(unknowns, j)));
    for (std::size_t k = 0; k < probes.size(); ++k)
      A.block(static_cast<Index>(k) * per_probe, j, per_probe, 1) = invariant_residual(cand, ito, probes[k]);
  }
  const MatrixXd ns = null_space(A, rel_tol);
  std::vector<AffineInvariant> out;
  for (Index k = 0; k < ns.cols(); ++k) out.push_back(unpack(ns.col(k)));
  return out;
}

}  // namespace ousym
