#pragma once

// Simple (W-)symmetry generators
//
//   X = phi^i(x, v, t; w) d/dstate^i + (R w)^k d/dw^k
//
// and the pointwise residuals of their determining equations. Generators
// carry an optional scalar factor r(p) multiplying R; it stays identically one
// except after module scaling by a non-constant invariant, where R becomes
// alpha R and alpha is constant along the dynamics.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ousym/calculus.hpp"
#include "ousym/expression.hpp"
#include "ousym/ito_system.hpp"
#include "ousym/model.hpp"

namespace ousym {

/// e^{-kappa t} (d/dx^i - kappa d/dv^i); `i` is zero based.
struct ExpDecay {
  Index i = 0;
  double kappa = 0.0;
};

/// d/dx^i
struct Translation {
  Index i = 0;
};

/// An invariant alpha times a base generator.
struct ModuleScaled {
  std::string base;    // closed form of the unscaled generator
  std::string factor;  // rendering of alpha
};

struct Generic {};

using Family = std::variant<Generic, ExpDecay, Translation, ModuleScaled>;

std::string family_name(const Family& f);

struct SymmetryGenerator {
  ExtLayout layout;
  VectorField phi;     // state coefficients, out_dim = layout.m
  MatrixXd R;          // d x d, diagonal + skew-symmetric
  ScalarField r_scale; // empty means identically one
  Family family;
  std::string label;   // closed-form rendering

  /// The generator as a field on the whole extended space: (phi, 0, r R w).
  VectorField full() const;
  /// R times the scale at p.
  MatrixXd R_at(const VectorXd& p) const;
};

/// Errors: InvalidArgument when R is not diagonal plus skew-symmetric.
SymmetryGenerator make_generator(ExtLayout layout, VectorField phi, MatrixXd R, Family family,
                                 std::string label);
SymmetryGenerator expdecay_generator(int n, Index i, double kappa);
SymmetryGenerator translation_generator(int n, Index i);
SymmetryGenerator zero_generator(ExtLayout layout);
/// phi components as expressions over x1..xn, v1..vn, t, z1..zn, w1..wn.
SymmetryGenerator generic_generator(int n, const std::vector<expr::Expression>& phi, MatrixXd R,
                                    std::string label = "generic");

/// a X + b Y. R combines linearly; scaled R is not supported.
SymmetryGenerator linear_combination(double a, const SymmetryGenerator& X, double b,
                                     const SymmetryGenerator& Y);

/// [X, Y] as a generator; its W-matrix is R_Y R_X - R_X R_Y.
/// Errors: InvalidArgument when either R is nonzero and scaled.
SymmetryGenerator bracket(const SymmetryGenerator& X, const SymmetryGenerator& Y);

/// "exp(-4*t)*(d/dx1 - 4*d/dv1)" and friends.
std::string render_expdecay(Index i, double kappa);

// ---------------------------------------------------------------------------
// Invariants

/// Theta = a_x.x + a_v.v + a_w.w + a_z.z + a_t t + a_0 on the OU layout.
struct AffineInvariant {
  VectorXd a_x, a_v, a_w, a_z;
  double a_t = 0.0;
  double a_0 = 0.0;

  double evaluate(const ExtPoint<double>& p) const;
  std::string render() const;
};

struct InvariantCandidate {
  ScalarField theta;
  std::optional<AffineInvariant> affine;
  std::string label;
};

InvariantCandidate affine_candidate(const AffineInvariant& a);
/// Parses Theta over the extended variables of the OU layout.
InvariantCandidate expression_candidate(const expr::Expression& e, std::string label = "");
/// f(theta_1, .., theta_k) where f is an expression over chi1..chik.
InvariantCandidate compose_invariant(const std::vector<InvariantCandidate>& basis,
                                     const expr::Expression& f);
/// Variables chi1..chik used by compose_invariant.
expr::VariableSet chi_variables(int k);

// ---------------------------------------------------------------------------
// Residuals

/// d_t phi + (f.grad) phi - (phi.grad) f + Lapl(phi)/2, one entry per state component.
VectorXd f_residual(const SymmetryGenerator& X, const ItoSystem& sys, const ExtPoint<double>& p,
                    Engine e = Engine::Dual);
VectorXd f_residual(const SymmetryGenerator& X, const OUSystem& sys, const ExtPoint<double>& p,
                    Engine e = Engine::Dual);

/// Column k: dhat_k phi + (sigma_k.grad) phi - (phi.grad) sigma_k - sigma R e_k.
MatrixXd sigma_residual(const SymmetryGenerator& X, const ItoSystem& sys, const ExtPoint<double>& p,
                        Engine e = Engine::Dual);
MatrixXd sigma_residual(const SymmetryGenerator& X, const OUSystem& sys, const ExtPoint<double>& p,
                        Engine e = Engine::Dual);

/// First d entries: dw^k-coefficients of dTheta; last entry: its dt-coefficient.
VectorXd invariant_residual(const InvariantCandidate& theta, const ItoSystem& sys,
                            const ExtPoint<double>& p, Engine e = Engine::Dual);
VectorXd invariant_residual(const InvariantCandidate& theta, const OUSystem& sys,
                            const ExtPoint<double>& p, Engine e = Engine::Dual);

struct ResidualReport {
  ExtPoint<double> point;
  VectorXd f_residual;
  MatrixXd sigma_residual;
  double max_abs = 0.0;
};

ResidualReport residual_report(const SymmetryGenerator& X, const ItoSystem& sys,
                               const ExtPoint<double>& p, Engine e = Engine::Dual);

struct ResidualSummary {
  double max_f = 0.0;
  double max_sigma = 0.0;
  double max_abs = 0.0;
  std::size_t worst_probe = 0;
};

ResidualSummary max_residual(const SymmetryGenerator& X, const ItoSystem& sys,
                             const std::vector<ExtPoint<double>>& probes, Engine e = Engine::Dual);
ResidualSummary max_residual(const SymmetryGenerator& X, const OUSystem& sys,
                             const std::vector<ExtPoint<double>>& probes, Engine e = Engine::Dual);
double max_invariant_residual(const InvariantCandidate& theta, const OUSystem& sys,
                              const std::vector<ExtPoint<double>>& probes, Engine e = Engine::Dual);

/// alpha X, checked at the probes (default: 100 seeded probes).
/// Errors: NotAnInvariant
SymmetryGenerator scale_by_invariant(const SymmetryGenerator& X, const InvariantCandidate& alpha,
                                     const OUSystem& sys,
                                     const std::vector<ExtPoint<double>>& probes = {},
                                     double tol = 1e-8);

// ---------------------------------------------------------------------------
// Linear algebra on the determining equations

/// Orthonormal-free basis of the null space of A (columns), reduced to row
/// echelon form so that the basis is canonical.
MatrixXd null_space(const MatrixXd& A, double rel_tol = 1e-10);

/// Basis of {R : L R = B R - R B}. Empty when only R = 0 solves.
/// Errors: DimensionMismatch, InvalidArgument when B is not diagonal.
std::vector<MatrixXd> solve_wsym_linear_constraint(const MatrixXd& L, const MatrixXd& B);

/// Affine invariants of an OU system found as the null space of the invariant
/// residual over the probes, in canonical echelon form (pivot on w^i).
std::vector<AffineInvariant> solve_affine_invariants(const OUSystem& sys,
                                                     const std::vector<ExtPoint<double>>& probes,
                                                     double rel_tol = 1e-9);

}  // namespace ousym
