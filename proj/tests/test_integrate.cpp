#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ousym/calculus.hpp"
#include "ousym/integrate.hpp"
#include "ousym/parallel.hpp"

using namespace ousym;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

OUSystem constant_sys(const VectorXd& c, const VectorXd& beta, const VectorXd& mu) {
  return build_ou_system(static_cast<int>(c.size()), beta, mu, ForceField::constant(c));
}

OUSystem linear1d(double lambda, double beta, double mu) {
  return build_ou_system(1, vec({beta}), vec({mu}),
                         ForceField::linear(MatrixXd::Constant(1, 1, lambda), VectorXd::Zero(1)));
}

double chi_at(const OUSystem& sys, const VectorXd& c, const Path& p, const MatrixXd& w, Index k, Index i) {
  const Index n = sys.n();
  return w(n + i, k) - p.states(k, n + i) / sys.mu()[i] - sys.beta()[i] / sys.mu()[i] * p.states(k, i) +
         c[i] / sys.mu()[i] * p.times[k];
}

struct Stats {
  double mean = 0.0;
  double var = 0.0;
};

Stats stats(const std::vector<double>& xs) {
  Stats s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  for (double x : xs) s.var += (x - s.mean) * (x - s.mean);
  s.var /= static_cast<double>(xs.size() - 1);
  return s;
}

}  // namespace

TEST(Wiener, Deterministic) {
  const WienerGrid a = sample_wiener(3, 0, 1, 100, 42);
  const WienerGrid b = sample_wiener(3, 0, 1, 100, 42);
  EXPECT_EQ(a.increments, b.increments);
  EXPECT_NE(a.increments, sample_wiener(3, 0, 1, 100, 43).increments);
  EXPECT_NE(a.increments, sample_wiener(3, 0, 1, 100, 42, 1).increments);
}

TEST(Wiener, IncrementVariance) {
  const WienerGrid g = sample_wiener(2, 0, 1, 100000, 5);
  for (Index j = 0; j < 2; ++j) {
    const double ratio = g.increments.row(j).squaredNorm() / static_cast<double>(g.steps) / g.dt();
    EXPECT_GE(ratio, 0.98);
    EXPECT_LE(ratio, 1.02);
  }
}

TEST(Wiener, Coarsen) {
  const WienerGrid g = sample_wiener(2, 0, 2, 64, 1);
  const WienerGrid c = coarsen(g, 2);
  EXPECT_EQ(c.steps, 32);
  EXPECT_DOUBLE_EQ(c.dt(), 2 * g.dt());
  for (Index k = 0; k < 32; ++k)
    for (Index j = 0; j < 2; ++j) EXPECT_EQ(c.increments(j, k), g.increments(j, 2 * k) + g.increments(j, 2 * k + 1));
  EXPECT_THROW(coarsen(g, 3), Error);
}

TEST(Wiener, InvalidGrid) {
  for (auto f : {+[] { sample_wiener(1, 0, 1, 0, 0); }, +[] { sample_wiener(1, 1, 1, 10, 0); },
                 +[] { sample_wiener(0, 0, 1, 10, 0); }}) {
    try {
      f();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidGrid);
    }
  }
}

TEST(ItoIntegral, Examples) {
  const WienerGrid g = WienerGrid::from_increments(0, 1, (MatrixXd(1, 2) << 0.3, -0.1).finished());
  const auto r = ito_integral([](double t) { return t; }, g);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_DOUBLE_EQ(r[0], 0.0);
  EXPECT_DOUBLE_EQ(r[1], -0.05);

  const WienerGrid h = sample_wiener(1, 0, 1, 50, 3);
  const auto one = ito_integral([](double) { return 1.0; }, h);
  const MatrixXd w = h.cumulative();
  for (Index k = 0; k < 50; ++k) EXPECT_NEAR(one[k], w(0, k + 1), 1e-14);
}

TEST(ItoIntegral, Isometry) {
  const double beta = 1.0;
  const int paths = 10000;
  std::vector<double> vals(paths);
  parallel_for(paths, [&](std::size_t p) {
    const WienerGrid g = sample_wiener(1, 0, 1, 200, 9, p);
    vals[p] = ito_integral([&](double t) { return std::exp(beta * t); }, g).back();
  });
  const Stats s = stats(vals);
  // left-endpoint quadrature of int_0^1 e^{2t} dt on the same grid
  double expect_grid = 0.0;
  for (int k = 0; k < 200; ++k) expect_grid += std::exp(2 * beta * k / 200.0) / 200.0;
  const double exact = (std::exp(2 * beta) - 1) / (2 * beta);
  EXPECT_LE(std::abs(s.var - exact), 0.05 * exact);
  // 3 sigma: Var of the sample variance of a Gaussian is 2 sigma^4 / (N - 1)
  EXPECT_LE(std::abs(s.var - expect_grid), 3 * std::sqrt(2.0 / (paths - 1)) * expect_grid);
  EXPECT_LE(std::abs(s.mean), 3 * std::sqrt(expect_grid / paths));
}

TEST(EulerMaruyama, DeterministicDecay) {
  const OUSystem sys = constant_sys(vec({0}), vec({1}), vec({1e-12}));
  const WienerGrid g = sample_wiener(1, 0, 1, 10000, 0);
  const Path p = euler_maruyama(sys, vec({0, 1}), g);
  EXPECT_NEAR(p.states(10000, 1), std::exp(-1.0), 1e-4 * std::exp(-1.0) + 1e-6);
  EXPECT_EQ(p.states.rows(), 10001);
  EXPECT_EQ(p.times.size(), 10001);
}

TEST(EulerMaruyama, ChiTelescopes) {
  for (int n : {1, 3}) {
    VectorXd c(n), beta(n), mu(n);
    for (int i = 0; i < n; ++i) {
      c[i] = 0.5 - 0.3 * i;
      beta[i] = 1.0 + 0.7 * i;
      mu[i] = 0.4 + 0.5 * i;
    }
    const OUSystem sys = constant_sys(c, beta, mu);
    const WienerGrid g = sample_wiener(n, 0, 1, 10000, 7);
    VectorXd x0 = VectorXd::LinSpaced(2 * n, -0.5, 0.5);
    const Path p = euler_maruyama(sys, x0, g);
    MatrixXd w(2 * n, g.steps + 1);
    w.topRows(n).setZero();
    w.bottomRows(n) = g.cumulative();
    for (Index i = 0; i < n; ++i) {
      const double chi0 = chi_at(sys, c, p, w, 0, i);
      double worst = 0.0;
      for (Index k = 0; k <= g.steps; ++k) worst = std::max(worst, std::abs(chi_at(sys, c, p, w, k, i) - chi0));
      EXPECT_LE(worst, 1e-12) << "n=" << n << " i=" << i;
    }
  }
}

TEST(EulerMaruyama, DimensionMismatch) {
  const OUSystem sys = constant_sys(vec({0}), vec({1}), vec({1}));
  try {
    euler_maruyama(sys, vec({0, 0, 0}), sample_wiener(1, 0, 1, 10, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(EulerMaruyama, BlowUpReported) {
  const OUSystem sys = build_ou_system(1, vec({1}), vec({1}), parse_force_expression("x1^3", 1));
  try {
    euler_maruyama(sys, vec({10, 0}), sample_wiener(1, 0, 1, 10, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteState);
  }
}

TEST(ExactConstant, FreeParticleMean) {
  const OUSystem sys = constant_sys(vec({0}), vec({1}), vec({1}));
  const int paths = 10000;
  std::vector<double> xs(paths);
  parallel_for(paths, [&](std::size_t p) {
    const Path r = exact_solve_constant(sys, vec({0, 0}), sample_wiener(1, 0, 1, 20, 11, p));
    xs[p] = r.states(20, 0);
  });
  const Stats s = stats(xs);
  EXPECT_LE(std::abs(s.mean), 3 * std::sqrt(s.var / paths));
}

TEST(ExactConstant, DeterministicLimit) {
  const double beta = 1.7, c = 0.6, x0 = 0.3, v0 = -1.1;
  const OUSystem sys = constant_sys(vec({c}), vec({beta}), vec({1e-14}));
  const WienerGrid g = sample_wiener(1, 0, 2, 50, 0);
  const Path p = exact_solve_constant(sys, vec({x0, v0}), g);
  for (Index k = 0; k <= g.steps; ++k) {
    const double t = p.times[k];
    const double e = std::exp(-beta * t);
    const double x = x0 + v0 / beta * (1 - e) + c / beta * (t - (1 - e) / beta);
    const double v = v0 * e + c / beta * (1 - e);
    EXPECT_NEAR(p.states(k, 0), x, 1e-8);
    EXPECT_NEAR(p.states(k, 1), v, 1e-8);
  }
}

TEST(ExactConstant, ChiConstantAlongPath) {
  const VectorXd c = vec({0.5, -2}), beta = vec({1, 3}), mu = vec({2, 0.5});
  const OUSystem sys = constant_sys(c, beta, mu);
  const WienerGrid g = sample_wiener(2, 0, 3, 1000, 4);
  const Path p = exact_solve_constant(sys, vec({1, 2, -1, 0.5}), g);
  MatrixXd w(4, g.steps + 1);
  w.topRows(2).setZero();
  w.bottomRows(2) = g.cumulative();
  for (Index i = 0; i < 2; ++i) {
    const double chi0 = chi_at(sys, c, p, w, 0, i);
    for (Index k = 0; k <= g.steps; ++k) EXPECT_LE(std::abs(chi_at(sys, c, p, w, k, i) - chi0), 1e-10);
  }
}

TEST(ExactConstant, WrongForceClass) {
  try {
    exact_solve_constant(linear1d(-2, 3, 1), vec({0, 0}), sample_wiener(1, 0, 1, 10, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::WrongForceClass);
  }
}

TEST(ExactLinear, DeterministicLimit) {
  // x'' + 3x' + 2x = 0: x = A e^{-t} + B e^{-2t}
  const double x0 = 1.0, v0 = 0.5;
  const double B = -(v0 + x0), A = x0 - B;
  const OUSystem sys = linear1d(-2, 3, 1e-14);
  const WienerGrid g = sample_wiener(1, 0, 2, 40, 0);
  const Path p = exact_solve_linear(sys, vec({x0, v0}), g);
  for (Index k = 0; k <= g.steps; ++k) {
    const double t = p.times[k];
    EXPECT_NEAR(p.states(k, 0), A * std::exp(-t) + B * std::exp(-2 * t), 1e-8);
    EXPECT_NEAR(p.states(k, 1), -A * std::exp(-t) - 2 * B * std::exp(-2 * t), 1e-8);
  }
}

TEST(ExactLinear, ComplexDeterministicLimit) {
  // x'' + x' + 5x = 0
  const double w = std::sqrt(19.0) / 2;
  const OUSystem sys = linear1d(-5, 1, 1e-14);
  const WienerGrid g = sample_wiener(1, 0, 3, 60, 0);
  const Path p = exact_solve_linear(sys, vec({1, 0}), g);
  for (Index k = 0; k <= g.steps; ++k) {
    const double t = p.times[k];
    const double x = std::exp(-t / 2) * (std::cos(w * t) + 0.5 / w * std::sin(w * t));
    EXPECT_NEAR(p.states(k, 0), x, 1e-8);
  }
  EXPECT_LE(p.max_imag_leakage, 1e-10);
}

TEST(ExactLinear, InversionIdentity) {
  const cdouble kp(2.0, 0.0), km(1.0, 0.0);
  const cdouble cp(0.5, 1.2), cm(0.5, -1.2);
  for (double t : {0.0, 0.7}) {
    for (auto [a, b] : {std::pair{kp, km}, std::pair{cp, cm}}) {
      const auto y = mode_to_adapted(0.3, -1.4, t, a, b);
      const auto xv = adapted_to_mode(y[0], y[1], t, a, b);
      EXPECT_LE(std::abs(xv[0] - 0.3), 1e-14);
      EXPECT_LE(std::abs(xv[1] + 1.4), 1e-14);
    }
  }
}

TEST(ExactLinear, AdaptedIncrementsMatchNoise) {
  const double lambda = -2, beta = 3, mu = 0.8;
  const OUSystem sys = linear1d(lambda, beta, mu);
  const WienerGrid g = sample_wiener(1, 0, 1, 200, 2);
  const cdouble kp(2.0), km(1.0);
  // Along the exact path dy_pm = alpha_pm(t_k) dw_k with no dt term.
  const Path p = exact_solve_linear(sys, vec({0.4, -0.2}), g);
  for (Index k = 0; k < g.steps; ++k) {
    const auto y0 = mode_to_adapted(p.states(k, 0), p.states(k, 1), p.times[k], kp, km);
    const auto y1 = mode_to_adapted(p.states(k + 1, 0), p.states(k + 1, 1), p.times[k + 1], kp, km);
    const auto a = adapted_noise(mu, p.times[k], kp, km);
    EXPECT_LE(std::abs((y1[0] - y0[0]) - a[0] * g.increments(0, k)), 1e-13);
    EXPECT_LE(std::abs((y1[1] - y0[1]) - a[1] * g.increments(0, k)), 1e-13);
  }
  // One EM step reproduces the same increment up to an O(dt^2) drift.
  const Path em = euler_maruyama(sys, vec({0.4, -0.2}), g);
  const double dt = g.dt();
  for (Index k = 0; k < g.steps; ++k) {
    const auto y0 = mode_to_adapted(em.states(k, 0), em.states(k, 1), em.times[k], kp, km);
    const auto y1 = mode_to_adapted(em.states(k + 1, 0), em.states(k + 1, 1), em.times[k + 1], kp, km);
    const auto a = adapted_noise(mu, em.times[k], kp, km);
    EXPECT_LE(std::abs((y1[0] - y0[0]) - a[0] * g.increments(0, k)), 100 * dt * (dt + std::abs(g.increments(0, k))));
    EXPECT_LE(std::abs((y1[1] - y0[1]) - a[1] * g.increments(0, k)), 100 * dt * (dt + std::abs(g.increments(0, k))));
  }
}

TEST(ExactLinear, CriticalDampingNotDiagonalizable) {
  try {
    exact_solve_linear(linear1d(-2.25, 3, 1), vec({0, 0}), sample_wiener(1, 0, 1, 10, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotDiagonalizable);
  }
}

TEST(ExactLinear, AnisotropicRejected) {
  const OUSystem sys = build_ou_system(2, vec({1, 2}), vec({1, 1}),
                                       ForceField::linear(MatrixXd::Identity(2, 2), VectorXd::Zero(2)));
  try {
    exact_solve_linear(sys, VectorXd::Zero(4), sample_wiener(2, 0, 1, 10, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::WrongForceClass);
  }
}

TEST(ExactSolvers, RefinementConsistency) {
  // Shared noise: the exact solve on a grid and on its coarsening differ by
  // quadrature error only; the mean difference shrinks as the pair is refined.
  const OUSystem cst = constant_sys(vec({0.5}), vec({2}), vec({1}));
  const OUSystem lin = linear1d(-2, 3, 1);
  const int paths = 200;
  for (const OUSystem* sys : {&cst, &lin}) {
    const bool is_const = sys == &cst;
    auto solve = [&](const WienerGrid& g) {
      return is_const ? exact_solve_constant(*sys, vec({0.1, 0.2}), g) : exact_solve_linear(*sys, vec({0.1, 0.2}), g);
    };
    std::vector<double> diffs;
    for (Index k : {64, 32, 16, 8}) {
      std::vector<double> d(paths);
      parallel_for(paths, [&](std::size_t p) {
        const WienerGrid fine = sample_wiener(1, 0, 1, 4096, 3, p);
        const WienerGrid a = coarsen(fine, k), b = coarsen(fine, 2 * k);
        d[p] = (solve(a).states.row(a.steps) - solve(b).states.row(b.steps)).cwiseAbs().maxCoeff();
      });
      diffs.push_back(stats(d).mean);
    }
    for (std::size_t i = 1; i < diffs.size(); ++i) {
      EXPECT_LT(diffs[i], diffs[i - 1]);
      EXPECT_NEAR(diffs[i - 1] / diffs[i], 2.0, 0.6);
    }
  }
}

TEST(Stationary, VelocityVariance) {
  const double beta = 2.0, mu = 1.5;
  const OUSystem sys = constant_sys(vec({0}), vec({beta}), vec({mu}));
  const int paths = 10000;
  std::vector<double> vs(paths);
  parallel_for(paths, [&](std::size_t p) {
    vs[p] = exact_solve_constant(sys, vec({0, 0}), sample_wiener(1, 0, 5, 500, 21, p)).states(500, 1);
  });
  const Stats s = stats(vs);
  // discrete AR(1) stationary variance of the left-point scheme at T = 5
  const double target = mu * mu / (2 * beta);
  EXPECT_LE(std::abs(s.var - target), 3 * std::sqrt(2.0 / (paths - 1)) * target + 0.02 * target);
}

TEST(Convergence, FitOrder) {
  const std::vector<double> dt{1, 0.5, 0.25};
  EXPECT_NEAR(fit_order(dt, {2, 1, 0.5}), 1.0, 1e-12);
  EXPECT_NEAR(fit_order(dt, {1, std::sqrt(0.5), 0.5}), 0.5, 1e-12);
}

TEST(Convergence, ConstantForceOrderOne) {
  const OUSystem sys = constant_sys(vec({0.5}), vec({1}), vec({1}));
  ConvergenceSpec spec;
  spec.n_paths = 100;
  const ConvergenceReport r = convergence_study(sys, vec({0, 0}), spec);
  EXPECT_EQ(r.dt.size(), 5u);
  EXPECT_GE(r.order, 0.8);
  EXPECT_LE(r.order, 1.2);
  EXPECT_EQ(r.rejected_paths, 0);
  for (std::size_t i = 1; i < r.dt.size(); ++i) EXPECT_LT(r.dt[i], r.dt[i - 1]);
}

TEST(Convergence, LinearForceOrderOne) {
  const OUSystem sys = linear1d(-2, 3, 1);
  ConvergenceSpec spec;
  spec.n_paths = 100;
  const ConvergenceReport r = convergence_study(sys, vec({0.5, 0}), spec);
  EXPECT_GE(r.order, 0.8);
  EXPECT_LE(r.order, 1.2);
}

TEST(Reference, GbmInvariant) {
  const ReferenceParams prm;
  const WienerGrid g = sample_wiener(1, 0, 1, 1000, 5);
  const ReferenceResult r = solve_reference_problem(ReferenceProblem::GBM, prm, g);
  EXPECT_LE(r.certificate, 1e-12);
  const MatrixXd w = g.cumulative();
  for (Index k = 0; k <= g.steps; k += 100) {
    const double t = g.time(k);
    EXPECT_NEAR(r.path.states(k, 0), prm.x0 * std::exp((prm.a - prm.b * prm.b / 2) * t + prm.b * w(0, k)), 1e-12);
  }
}

TEST(Reference, KozlovNoiseFree) {
  const ReferenceParams prm;
  const WienerGrid g = WienerGrid::from_increments(0, 2, MatrixXd::Zero(1, 20));
  const ReferenceResult r = solve_reference_problem(ReferenceProblem::KozlovExp, prm, g);
  for (Index k = 0; k <= 20; ++k) EXPECT_NEAR(r.path.states(k, 0), std::log(std::exp(prm.y0) + g.time(k)), 1e-14);
}

TEST(Reference, KozlovMatchesClosedForm) {
  const ReferenceParams prm;
  const WienerGrid g = sample_wiener(1, 0, 1, 500, 8);
  const ReferenceResult r = solve_reference_problem(ReferenceProblem::KozlovExp, prm, g);
  const MatrixXd w = g.cumulative();
  for (Index k = 0; k <= g.steps; ++k)
    EXPECT_NEAR(r.path.states(k, 0), std::log(4.0 + g.time(k) + w(0, k)), 1e-12);
  EXPECT_LE(r.certificate, 1e-12);
}

TEST(Reference, KozlovDomainExit) {
  ReferenceParams prm;
  prm.y0 = std::log(0.01);
  const WienerGrid g = WienerGrid::from_increments(0, 1, (MatrixXd(1, 2) << -1.0, 0.0).finished());
  try {
    solve_reference_problem(ReferenceProblem::KozlovExp, prm, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DomainExit);
  }
}

TEST(Reference, KozlovSystemIsRectified) {
  // x = e^y satisfies dx = dt + dw: Ito's formula on the system coefficients.
  const ItoSystem sys = kozlov_exp_system();
  for (double y : {-1.0, 0.0, 0.7, 2.0}) {
    const double f = sys.drift<double>(vec({y}), 0.0)[0];
    const double s = sys.diffusion<double>(vec({y}), 0.0)(0, 0);
    EXPECT_NEAR(std::exp(y) * f + 0.5 * std::exp(y) * s * s, 1.0, 1e-14);
    EXPECT_NEAR(std::exp(y) * s, 1.0, 1e-14);
  }
}

TEST(Reference, KozlovStrongErrorDecreases) {
  ConvergenceSpec spec;
  spec.n_paths = 100;
  const ConvergenceReport r = convergence_study(ReferenceProblem::KozlovExp, ReferenceParams{}, spec);
  for (std::size_t i = 1; i < r.strong_error.size(); ++i) EXPECT_LT(r.strong_error[i], r.strong_error[i - 1]);
}

TEST(Csv, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9, 0.0}) {
    const std::string s = format_number(v);
    EXPECT_EQ(std::stod(s), v) << s;
  }
  Path p;
  p.times = vec({0, 0.5});
  p.states = (MatrixXd(2, 2) << 1, 2, 3, 4).finished();
  p.provenance = "seed=1";
  std::ostringstream os;
  write_path_csv(os, p, {"t", "x1", "v1"}, {"k=v"});
  const std::string out = os.str();
  EXPECT_NE(out.find("# k=v"), std::string::npos);
  EXPECT_NE(out.find("t,x1,v1\n0,1,2\n0.5,3,4\n"), std::string::npos);
}
