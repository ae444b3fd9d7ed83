#pragma once

// Wiener paths, Euler-Maruyama, and exact solvers that integrate the OU
// system in symmetry-adapted coordinates.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ousym/ito_system.hpp"
#include "ousym/model.hpp"
#include "ousym/types.hpp"

namespace ousym {

/// Increments of n_proc independent Wiener processes on a uniform grid.
/// increments(k, j) ~ N(0, dt) is a pure function of (seed, path, k, j).
struct WienerGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  Index steps = 1;
  Index n_proc = 1;
  std::uint64_t seed = 0;
  std::uint64_t path = 0;
  Index coarsening = 1;  // product of coarsening factors applied
  MatrixXd increments;   // n_proc x steps

  double dt() const { return (t1 - t0) / static_cast<double>(steps); }
  double time(Index k) const { return t0 + static_cast<double>(k) * dt(); }
  /// w(t_k) for k = 0..steps, one row per process; w(t0) = 0.
  MatrixXd cumulative() const;
  std::string provenance() const;

  /// Errors: InvalidGrid
  static WienerGrid from_increments(double t0, double t1, MatrixXd increments);
};

/// Errors: InvalidGrid (steps < 1, t1 <= t0, n_proc < 1)
WienerGrid sample_wiener(Index n_proc, double t0, double t1, Index steps, std::uint64_t seed,
                         std::uint64_t path = 0);

/// Sums k consecutive increments. Errors: InvalidGrid unless k divides steps.
WienerGrid coarsen(const WienerGrid& grid, Index k);

struct Path {
  VectorXd times;
  MatrixXd states;  // (steps + 1) x state_dim; OU columns are x then v
  std::string provenance;
  double max_imag_leakage = 0.0;  // complex-mode exact solver only
};

/// Errors: DimensionMismatch, NonFiniteState
Path euler_maruyama(const OUSystem& sys, const VectorXd& x0, const WienerGrid& grid);
Path euler_maruyama(const ItoSystem& sys, const VectorXd& y0, const WienerGrid& grid);

/// Exact solve for constant force via y = x + v/beta, z = -e^{beta t} v / beta.
/// Errors: WrongForceClass, DimensionMismatch
Path exact_solve_constant(const OUSystem& sys, const VectorXd& x0, const WienerGrid& grid);

/// Exact solve for isotropic regular linear force in eigen-coordinates. The
/// complex-mode arithmetic must return real states: imaginary parts above
/// 1e-10 relative raise NotDiagonalizable.
/// Errors: WrongForceClass, NotDiagonalizable, DimensionMismatch
Path exact_solve_linear(const OUSystem& sys, const VectorXd& x0, const WienerGrid& grid);

/// Adapted variables of one eigen-mode at time t:
///   y_pm = e^{kappa_pm t} (kappa_mp x + v) / (kappa_mp - kappa_pm)
std::array<cdouble, 2> mode_to_adapted(cdouble x, cdouble v, double t, cdouble kp, cdouble km);
/// Inverse of mode_to_adapted.
std::array<cdouble, 2> adapted_to_mode(cdouble yp, cdouble ym, double t, cdouble kp, cdouble km);
/// Noise coefficients alpha_pm(t) = -/+ mu e^{kappa_pm t} / (kappa_+ - kappa_-).
std::array<cdouble, 2> adapted_noise(double mu, double t, cdouble kp, cdouble km);

/// Cumulative left-endpoint sums of a(t_k) dw_k; entry k is the integral up to t_{k+1}.
std::vector<double> ito_integral(const std::function<double(double)>& a, const WienerGrid& grid,
                                 Index process = 0);

struct ConvergenceSpec {
  double t0 = 0.0;
  double t1 = 1.0;
  Index base_steps = 16;  // coarsest EM grid
  int rungs = 5;          // EM grids base_steps * 2^r
  Index ref_factor = 64;  // reference grid = finest EM grid * ref_factor
  int n_paths = 200;
  std::uint64_t seed = 0;
};

struct ConvergenceReport {
  std::vector<double> dt;            // strictly decreasing
  std::vector<double> strong_error;  // mean over paths of terminal max-abs error
  double order = 0.0;                // least-squares slope of log error vs log dt
  int n_paths = 0;
  int rejected_paths = 0;
  std::uint64_t seed = 0;
  std::string reference;
};

/// Least-squares slope of log(err) against log(dt).
double fit_order(const std::vector<double>& dt, const std::vector<double>& err);

/// EM against the exact solver of the system on a shared finer grid.
/// Errors: WrongForceClass, NotDiagonalizable, InvalidGrid
ConvergenceReport convergence_study(const OUSystem& sys, const VectorXd& x0, const ConvergenceSpec& spec);

enum class ReferenceProblem { GBM, KozlovExp };
std::string_view to_string(ReferenceProblem p);

struct ReferenceParams {
  double a = 1.0;   // GBM drift
  double b = 0.5;   // GBM volatility
  double x0 = 1.0;  // GBM initial value
  double y0 = 1.3862943611198906;  // KozlovExp initial value, log 4
  double floor = 1e-9;
};

struct ReferenceResult {
  Path path;
  /// GBM: max |Theta(t_k) - Theta(t_0)|; KozlovExp: max |e^y - (e^{y0} + t - t0 + w)|,
  /// the rectified variable recomputed from the path.
  double certificate = 0.0;
};

/// GBM: x = x0 exp((a - b^2/2)(t - t0) + b w). KozlovExp: y = log(e^{y0} + t - t0 + w).
/// Errors: DomainExit, InvalidGrid
ReferenceResult solve_reference_problem(ReferenceProblem id, const ReferenceParams& params,
                                        const WienerGrid& grid);
ItoSystem reference_system(ReferenceProblem id, const ReferenceParams& params);

/// EM on the original equation against the exact reference solution.
ConvergenceReport convergence_study(ReferenceProblem id, const ReferenceParams& params,
                                    const ConvergenceSpec& spec);

// CSV output; floats are written in shortest round-trip form.
std::string format_number(double v);
void write_path_csv(std::ostream& os, const Path& path, const std::vector<std::string>& columns,
                    const std::vector<std::string>& header = {});
std::vector<std::string> ou_columns(int n);
void write_convergence_csv(std::ostream& os, const ConvergenceReport& r,
                           const std::vector<std::string>& header = {});

}  // namespace ousym
