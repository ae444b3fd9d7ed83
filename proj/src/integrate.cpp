#include "ousym/integrate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "ousym/parallel.hpp"
#include "ousym/rng.hpp"

namespace ousym {

namespace {

constexpr double kBlowUp = 1e12;

void validate_grid(double t0, double t1, Index steps, Index n_proc) {
  if (steps < 1) throw Error(ErrorKind::InvalidGrid, "steps must be >= 1");
  if (!(t1 > t0) || !std::isfinite(t0) || !std::isfinite(t1))
    throw Error(ErrorKind::InvalidGrid, "need finite t1 > t0");
  if (n_proc < 1) throw Error(ErrorKind::InvalidGrid, "need at least one process");
}

void guard(const VectorXd& s, Index step) {
  if (!s.allFinite() || s.cwiseAbs().maxCoeff() > kBlowUp)
    throw Error(ErrorKind::NonFiniteState, "state left the finite range at step " + std::to_string(step));
}

Path start_path(const WienerGrid& grid, Index dim, const VectorXd& s0) {
  Path p;
  p.times.resize(grid.steps + 1);
  for (Index k = 0; k <= grid.steps; ++k) p.times[k] = grid.time(k);
  p.states.resize(grid.steps + 1, dim);
  p.states.row(0) = s0.transpose();
  p.provenance = grid.provenance();
  return p;
}

void check_ou_inputs(const OUSystem& sys, const VectorXd& x0, const WienerGrid& grid) {
  if (x0.size() != 2 * sys.n()) throw Error(ErrorKind::DimensionMismatch, "initial state must be (x, v)");
  if (grid.n_proc != sys.n()) throw Error(ErrorKind::DimensionMismatch, "grid must carry n active processes");
}

}  // namespace

// ---------------------------------------------------------------------------

MatrixXd WienerGrid::cumulative() const {
  MatrixXd w = MatrixXd::Zero(n_proc, steps + 1);
  for (Index k = 0; k < steps; ++k) w.col(k + 1) = w.col(k) + increments.col(k);
  return w;
}

std::string WienerGrid::provenance() const {
  std::ostringstream os;
  os << "seed=" << seed << ",path=" << path << ",steps=" << steps << ",t0=" << format_number(t0)
     << ",t1=" << format_number(t1) << ",coarsening=" << coarsening;
  return os.str();
}

WienerGrid WienerGrid::from_increments(double t0, double t1, MatrixXd increments) {
  validate_grid(t0, t1, increments.cols(), increments.rows());
  WienerGrid g;
  g.t0 = t0;
  g.t1 = t1;
  g.steps = increments.cols();
  g.n_proc = increments.rows();
  g.increments = std::move(increments);
  return g;
}

WienerGrid sample_wiener(Index n_proc, double t0, double t1, Index steps, std::uint64_t seed, std::uint64_t path) {
  validate_grid(t0, t1, steps, n_proc);
  WienerGrid g;
  g.t0 = t0;
  g.t1 = t1;
  g.steps = steps;
  g.n_proc = n_proc;
  g.seed = seed;
  g.path = path;
  g.increments.resize(n_proc, steps);
  const double sdt = std::sqrt(g.dt());
  for (Index k = 0; k < steps; ++k)
    for (Index j = 0; j < n_proc; ++j) g.increments(j, k) = sdt * rng::normal(seed, path, j, k);
  return g;
}

WienerGrid coarsen(const WienerGrid& grid, Index k) {
  if (k < 1 || grid.steps % k != 0)
    throw Error(ErrorKind::InvalidGrid, "coarsening factor must divide the step count");
  WienerGrid g = grid;
  g.steps = grid.steps / k;
  g.coarsening = grid.coarsening * k;
  g.increments = MatrixXd::Zero(grid.n_proc, g.steps);
  for (Index c = 0; c < g.steps; ++c)
    for (Index f = 0; f < k; ++f) g.increments.col(c) += grid.increments.col(c * k + f);
  return g;
}

// ---------------------------------------------------------------------------

Path euler_maruyama(const OUSystem& sys, const VectorXd& x0, const WienerGrid& grid) {
  check_ou_inputs(sys, x0, grid);
  const Index n = sys.n();
  const double dt = grid.dt();
  Path p = start_path(grid, 2 * n, x0);
  VectorXd s = x0;
  for (Index k = 0; k < grid.steps; ++k) {
    const VectorXd F = sys.force().evaluate<double>(s.head(n));
    VectorXd next(2 * n);
    for (Index i = 0; i < n; ++i) {
      next[i] = s[i] + s[n + i] * dt;
      next[n + i] = s[n + i] + (F[i] - sys.beta()[i] * s[n + i]) * dt + sys.mu()[i] * grid.increments(i, k);
    }
    guard(next, k + 1);
    s = next;
    p.states.row(k + 1) = s.transpose();
  }
  return p;
}

Path euler_maruyama(const ItoSystem& sys, const VectorXd& y0, const WienerGrid& grid) {
  if (y0.size() != sys.state_dim()) throw Error(ErrorKind::DimensionMismatch, "initial state dimension");
  if (grid.n_proc != sys.wiener_dim()) throw Error(ErrorKind::DimensionMismatch, "grid process count");
  const double dt = grid.dt();
  Path p = start_path(grid, y0.size(), y0);
  VectorXd y = y0;
  for (Index k = 0; k < grid.steps; ++k) {
    const double t = grid.time(k);
    y = (y + sys.drift<double>(y, t) * dt + sys.diffusion<double>(y, t) * grid.increments.col(k)).eval();
    guard(y, k + 1);
    p.states.row(k + 1) = y.transpose();
  }
  return p;
}

Path exact_solve_constant(const OUSystem& sys, const VectorXd& x0, const WienerGrid& grid) {
  const auto* cf = std::get_if<ConstantForce>(&sys.force().variant());
  VectorXd c;
  if (cf) {
    c = cf->c;
  } else {
    const ForceClass fc = classify_force(sys.force(), default_force_probes(sys.n()));
    if (fc.tag != ForceTag::Constant || !fc.consistent)
      throw Error(ErrorKind::WrongForceClass, "exact_solve_constant needs a constant force");
    c = fc.c;
  }
  check_ou_inputs(sys, x0, grid);
  const Index n = sys.n();
  const double dt = grid.dt();
  Path p = start_path(grid, 2 * n, x0);
  for (Index i = 0; i < n; ++i) {
    const double beta = sys.beta()[i], mu = sys.mu()[i];
    const double x_init = x0[i], v_init = x0[n + i];
    // y = x + v/beta obeys dy = (c/beta) dt + (mu/beta) dw.
    // e^{beta t} v obeys d(e^{beta t} v) = e^{beta t}(c dt + mu dw); the Ito
    // integral is kept scaled as A_k = sum_j e^{-beta (t_k - t_j)} dw_j.
    const double y_init = x_init + v_init / beta;
    const double decay = std::exp(-beta * dt);
    double A = 0.0, w = 0.0;
    for (Index k = 0; k < grid.steps; ++k) {
      const double dw = grid.increments(i, k);
      A = decay * (A + dw);
      w += dw;
      const double tau = grid.time(k + 1) - grid.t0;
      const double e = std::exp(-beta * tau);
      const double v = v_init * e + (c[i] / beta) * (1.0 - e) + mu * A;
      const double y = y_init + (c[i] / beta) * tau + (mu / beta) * w;
      p.states(k + 1, i) = y - v / beta;
      p.states(k + 1, n + i) = v;
    }
  }
  for (Index k = 1; k <= grid.steps; ++k) guard(p.states.row(k).transpose(), k);
  return p;
}

std::array<cdouble, 2> mode_to_adapted(cdouble x, cdouble v, double t, cdouble kp, cdouble km) {
  return {std::exp(kp * t) * (km * x + v) / (km - kp), std::exp(km * t) * (kp * x + v) / (kp - km)};
}

std::array<cdouble, 2> adapted_to_mode(cdouble yp, cdouble ym, double t, cdouble kp, cdouble km) {
  const cdouble sp = yp * (km - kp) * std::exp(-kp * t);  // km x + v
  const cdouble sm = ym * (kp - km) * std::exp(-km * t);  // kp x + v
  const cdouble x = (sp - sm) / (km - kp);
  return {x, sp - km * x};
}

std::array<cdouble, 2> adapted_noise(double mu, double t, cdouble kp, cdouble km) {
  const cdouble root = kp - km;
  return {-mu * std::exp(kp * t) / root, mu * std::exp(km * t) / root};
}

Path exact_solve_linear(const OUSystem& sys, const VectorXd& x0, const WienerGrid& grid) {
  const int n = sys.n();
  if (!(sys.isotropic() || n == 1))
    throw Error(ErrorKind::WrongForceClass, "exact_solve_linear needs an isotropic system");
  MatrixXd L;
  VectorXd K;
  if (const auto* lf = std::get_if<LinearForce>(&sys.force().variant())) {
    L = lf->L;
    K = lf->K;
    if (is_singular(L, 1e-8)) throw Error(ErrorKind::WrongForceClass, "linear force must be regular");
  } else {
    const ForceClass fc = classify_force(sys.force(), default_force_probes(n));
    if (fc.tag != ForceTag::LinearRegular || !fc.consistent)
      throw Error(ErrorKind::WrongForceClass, "exact_solve_linear needs a regular linear force");
    L = fc.L;
    K = fc.K;
  }
  check_ou_inputs(sys, x0, grid);

  Eigen::EigenSolver<MatrixXd> es(L);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::NotDiagonalizable, "eigen decomposition failed");
  const MatrixXcd M = es.eigenvectors();
  const VectorXcd lambda = es.eigenvalues();
  {
    Eigen::JacobiSVD<MatrixXcd> svd(M);
    const auto& s = svd.singularValues();
    if (!(s.minCoeff() >= 1e-8 * s.maxCoeff()))
      throw Error(ErrorKind::NotDiagonalizable, "L has a defective eigenstructure");
  }
  const MatrixXcd Minv = M.inverse();
  const double beta = sys.beta()[0], mu = sys.mu()[0];
  VectorXcd kp(n), km(n);
  for (Index i = 0; i < n; ++i) {
    const cdouble root = std::sqrt(cdouble(beta * beta) + 4.0 * lambda[i]);
    kp[i] = 0.5 * (beta + root);
    km[i] = 0.5 * (beta - root);
    if (std::abs(kp[i] - km[i]) <= 1e-12 * (1.0 + std::abs(kp[i])))
      throw Error(ErrorKind::NotDiagonalizable, "critically damped mode: kappa_+ = kappa_-");
  }
  const VectorXd shift = L.lu().solve(K);  // L x + K = L (x + shift)

  const VectorXcd xt0 = Minv * (x0.head(n) + shift).cast<cdouble>();
  const VectorXcd vt0 = Minv * x0.tail(n).cast<cdouble>();
  VectorXcd yp(n), ym(n);
  for (Index i = 0; i < n; ++i) {
    const auto y = mode_to_adapted(xt0[i], vt0[i], grid.t0, kp[i], km[i]);
    yp[i] = y[0];
    ym[i] = y[1];
  }

  Path p = start_path(grid, 2 * n, x0);
  VectorXcd xt(n), vt(n);
  for (Index k = 0; k < grid.steps; ++k) {
    const double t = grid.time(k);
    const VectorXcd dw = Minv * grid.increments.col(k).cast<cdouble>();
    for (Index i = 0; i < n; ++i) {
      const auto a = adapted_noise(mu, t, kp[i], km[i]);
      yp[i] += a[0] * dw[i];
      ym[i] += a[1] * dw[i];
      const auto s = adapted_to_mode(yp[i], ym[i], grid.time(k + 1), kp[i], km[i]);
      xt[i] = s[0];
      vt[i] = s[1];
    }
    const VectorXcd x = M * xt;
    const VectorXcd v = M * vt;
    const double leak = std::max(x.imag().cwiseAbs().maxCoeff(), v.imag().cwiseAbs().maxCoeff());
    p.max_imag_leakage = std::max(p.max_imag_leakage, leak);
    const double scale = std::max({1.0, x.cwiseAbs().maxCoeff(), v.cwiseAbs().maxCoeff()});
    if (leak > 1e-10 * scale)
      throw Error(ErrorKind::NotDiagonalizable, "eigenbasis too ill-conditioned: imaginary leakage " + format_number(leak));
    VectorXd s(2 * n);
    s.head(n) = x.real() - shift;
    s.tail(n) = v.real();
    guard(s, k + 1);
    p.states.row(k + 1) = s.transpose();
  }
  return p;
}

std::vector<double> ito_integral(const std::function<double(double)>& a, const WienerGrid& grid, Index process) {
  if (process < 0 || process >= grid.n_proc) throw Error(ErrorKind::InvalidArgument, "process index out of range");
  std::vector<double> out(grid.steps);
  double acc = 0.0;
  for (Index k = 0; k < grid.steps; ++k) {
    acc += a(grid.time(k)) * grid.increments(process, k);
    out[k] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------

double fit_order(const std::vector<double>& dt, const std::vector<double>& err) {
  const std::size_t m = dt.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += std::log(dt[i]);
    my += std::log(err[i]);
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = std::log(dt[i]) - mx;
    sxy += dx * (std::log(err[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

namespace {

using TerminalFn = std::function<VectorXd(const WienerGrid&)>;

ConvergenceReport run_study(const ConvergenceSpec& spec, Index n_proc, const TerminalFn& reference,
                            const TerminalFn& em, std::string name) {
  if (spec.base_steps < 1 || spec.rungs < 2 || spec.ref_factor < 1 || spec.n_paths < 1)
    throw Error(ErrorKind::InvalidGrid, "convergence ladder needs base_steps >= 1, rungs >= 2, paths >= 1");
  const Index top = spec.base_steps << (spec.rungs - 1);
  const Index fine_steps = top * spec.ref_factor;
  struct PathResult {
    std::vector<double> err;
    bool rejected = false;
  };
  std::vector<PathResult> results(spec.n_paths);
  parallel_for(static_cast<std::size_t>(spec.n_paths), [&](std::size_t p) {
    PathResult r;
    try {
      const WienerGrid fine = sample_wiener(n_proc, spec.t0, spec.t1, fine_steps, spec.seed, p);
      const VectorXd ref = reference(fine);
      for (int k = 0; k < spec.rungs; ++k) {
        const Index steps = spec.base_steps << k;
        const VectorXd end = em(coarsen(fine, fine_steps / steps));
        r.err.push_back((end - ref).cwiseAbs().maxCoeff());
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DomainExit && e.kind() != ErrorKind::NonFiniteState) throw;
      r.rejected = true;
    }
    results[p] = std::move(r);
  });

  ConvergenceReport rep;
  rep.seed = spec.seed;
  rep.reference = std::move(name);
  rep.strong_error.assign(spec.rungs, 0.0);
  for (const auto& r : results) {
    if (r.rejected) {
      ++rep.rejected_paths;
      continue;
    }
    ++rep.n_paths;
    for (int k = 0; k < spec.rungs; ++k) rep.strong_error[k] += r.err[k];
  }
  if (rep.n_paths == 0) throw Error(ErrorKind::DomainExit, "every path was rejected");
  for (int k = 0; k < spec.rungs; ++k) {
    rep.dt.push_back((spec.t1 - spec.t0) / static_cast<double>(spec.base_steps << k));
    rep.strong_error[k] /= rep.n_paths;
  }
  rep.order = fit_order(rep.dt, rep.strong_error);
  return rep;
}

VectorXd terminal(const Path& p) { return p.states.row(p.states.rows() - 1).transpose(); }

}  // namespace

ConvergenceReport convergence_study(const OUSystem& sys, const VectorXd& x0, const ConvergenceSpec& spec) {
  const ForceClass fc = classify_force(sys.force(), default_force_probes(sys.n()));
  TerminalFn exact;
  std::string name;
  if (fc.tag == ForceTag::Constant) {
    exact = [&](const WienerGrid& g) { return terminal(exact_solve_constant(sys, x0, g)); };
    name = "exact_solve_constant";
  } else if (fc.tag == ForceTag::LinearRegular) {
    exact = [&](const WienerGrid& g) { return terminal(exact_solve_linear(sys, x0, g)); };
    name = "exact_solve_linear";
  } else {
    throw Error(ErrorKind::WrongForceClass, "no exact solver for a " + std::string(to_string(fc.tag)) + " force");
  }
  // Fail early (e.g. NotDiagonalizable) before spawning work.
  exact(sample_wiener(sys.n(), spec.t0, spec.t1, 1, spec.seed));
  return run_study(spec, sys.n(), exact,
                   [&](const WienerGrid& g) { return terminal(euler_maruyama(sys, x0, g)); }, name);
}

std::string_view to_string(ReferenceProblem p) { return p == ReferenceProblem::GBM ? "gbm" : "kozlov_exp"; }

ItoSystem reference_system(ReferenceProblem id, const ReferenceParams& params) {
  return id == ReferenceProblem::GBM ? geometric_brownian_motion(params.a, params.b) : kozlov_exp_system();
}

ReferenceResult solve_reference_problem(ReferenceProblem id, const ReferenceParams& prm, const WienerGrid& grid) {
  if (grid.n_proc != 1) throw Error(ErrorKind::DimensionMismatch, "reference problems are scalar");
  const MatrixXd w = grid.cumulative();
  ReferenceResult r;
  if (id == ReferenceProblem::GBM) {
    const double drift = prm.a - 0.5 * prm.b * prm.b;
    r.path = start_path(grid, 1, VectorXd::Constant(1, prm.x0));
    const double theta0 = prm.x0 * std::exp(-drift * grid.t0);
    for (Index k = 1; k <= grid.steps; ++k)
      r.path.states(k, 0) = prm.x0 * std::exp(drift * (grid.time(k) - grid.t0) + prm.b * w(0, k));
    for (Index k = 0; k <= grid.steps; ++k) {
      const double theta = r.path.states(k, 0) * std::exp(-drift * grid.time(k) - prm.b * w(0, k));
      r.certificate = std::max(r.certificate, std::abs(theta - theta0));
    }
    return r;
  }
  const double x0 = std::exp(prm.y0);
  r.path = start_path(grid, 1, VectorXd::Constant(1, prm.y0));
  for (Index k = 1; k <= grid.steps; ++k) {
    const double arg = x0 + (grid.time(k) - grid.t0) + w(0, k);
    if (!(arg > prm.floor))
      throw Error(ErrorKind::DomainExit, "log argument " + format_number(arg) + " fell below the floor at step " +
                                             std::to_string(k) + " (" + grid.provenance() + ")");
    r.path.states(k, 0) = std::log(arg);
  }
  for (Index k = 0; k <= grid.steps; ++k) {
    const double rect = std::exp(r.path.states(k, 0));
    r.certificate = std::max(r.certificate, std::abs(rect - (x0 + (grid.time(k) - grid.t0) + w(0, k))));
  }
  return r;
}

ConvergenceReport convergence_study(ReferenceProblem id, const ReferenceParams& params, const ConvergenceSpec& spec) {
  const ItoSystem sys = reference_system(id, params);
  const VectorXd y0 = VectorXd::Constant(1, id == ReferenceProblem::GBM ? params.x0 : params.y0);
  return run_study(
      spec, 1, [&](const WienerGrid& g) { return terminal(solve_reference_problem(id, params, g).path); },
      [&](const WienerGrid& g) { return terminal(euler_maruyama(sys, y0, g)); },
      std::string(to_string(id)));
}

// ---------------------------------------------------------------------------

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> ou_columns(int n) {
  std::vector<std::string> cols{"t"};
  for (int i = 1; i <= n; ++i) cols.push_back("x" + std::to_string(i));
  for (int i = 1; i <= n; ++i) cols.push_back("v" + std::to_string(i));
  return cols;
}

void write_path_csv(std::ostream& os, const Path& path, const std::vector<std::string>& columns,
                    const std::vector<std::string>& header) {
  for (const auto& h : header) os << "# " << h << '\n';
  os << "# grid " << path.provenance << '\n';
  for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
  os << '\n';
  for (Index k = 0; k < path.times.size(); ++k) {
    os << format_number(path.times[k]);
    for (Index j = 0; j < path.states.cols(); ++j) os << ',' << format_number(path.states(k, j));
    os << '\n';
  }
}

void write_convergence_csv(std::ostream& os, const ConvergenceReport& r, const std::vector<std::string>& header) {
  for (const auto& h : header) os << "# " << h << '\n';
  os << "# seed=" << r.seed << ",paths=" << r.n_paths << ",rejected=" << r.rejected_paths
     << ",reference=" << r.reference << '\n';
  os << "dt,strong_error\n";
  for (std::size_t k = 0; k < r.dt.size(); ++k)
    os << format_number(r.dt[k]) << ',' << format_number(r.strong_error[k]) << '\n';
  os << "# order=" << format_number(r.order) << '\n';
}

}  // namespace ousym
