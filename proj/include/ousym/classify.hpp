#pragma once

// Invariant ring and simple-symmetry algebra of an OU system, following the
// case analysis by force class: constant, linear regular, nonlinear second
// order regular. Everything emitted is certified against the residuals.

#include <optional>
#include <string>
#include <vector>

#include "ousym/calculus.hpp"
#include "ousym/model.hpp"
#include "ousym/symmetry.hpp"

namespace ousym {

struct ClassifyOptions {
  std::vector<VectorXd> force_probes;       // default: default_force_probes(n)
  std::vector<ExtPoint<double>> probes;     // default: random_probes(layout, 100, 0)
  double tol = 1e-8;                        // singularity threshold for classify_force
  bool commutators = true;                  // fill the commutator table
  int commutator_probes = 20;
};

enum class InvariantBasis { Empty, ChiBasis };
std::string_view to_string(InvariantBasis b);

struct InvariantSet {
  InvariantBasis basis_kind = InvariantBasis::Empty;
  ForceTag force_tag = ForceTag::Constant;
  std::vector<InvariantCandidate> generators;
  std::string annotation;
  /// Affine null-space solution, reported as a numerical cross-check.
  std::vector<AffineInvariant> numerical;
  /// Largest invariant residual of each generator over the probes.
  std::vector<double> certification;
};

/// chi^i = w^i - v^i/mu_i - (beta_i/mu_i) x^i + (c^i/mu_i) t
AffineInvariant chi_invariant(const OUSystem& sys, const VectorXd& c, Index i);

/// Errors: UnclassifiableForce
InvariantSet classify_invariants(const OUSystem& sys, const ClassifyOptions& opts = {});

enum class CaseTag { NoRealSimple, LinearPair1D, LinearAbelian2n, ConstantModule, NotCovered };
std::string_view to_string(CaseTag t);

struct EigenData {
  MatrixXcd M;            // columns are eigenvectors of L
  VectorXcd lambda;
  VectorXcd kappa_plus;   // (beta + sqrt(beta^2 + 4 lambda)) / 2
  VectorXcd kappa_minus;  // (beta - sqrt(beta^2 + 4 lambda)) / 2
};

struct CommutatorEntry {
  std::string lhs;
  std::string rhs;
  double discrepancy = 0.0;
};

struct SymmetryAlgebra {
  CaseTag case_tag = CaseTag::NotCovered;
  ForceTag force_tag = ForceTag::Constant;
  std::vector<SymmetryGenerator> generators;
  int module_rank = 0;
  std::vector<std::size_t> x_set;  // ConstantModule: indices of the X^(i)
  std::vector<std::size_t> y_set;  // ConstantModule: indices of the Y^(i)
  std::optional<EigenData> eigen;
  std::vector<MatrixXd> wsym_candidates;  // uncertified, anisotropic linear case
  std::string annotation;
  std::vector<double> certification;      // max residual per generator
  std::vector<CommutatorEntry> commutators;
  VectorXd c;                             // constant force value, ConstantModule only
};

/// Default scaling functions 1, chi1, sin(chi1), chi1^2.
std::vector<expr::Expression> default_scaling_functions(int n);

/// Errors: UnclassifiableForce, NotDiagonalizable
SymmetryAlgebra classify_symmetries(const OUSystem& sys, const ClassifyOptions& opts = {});

/// Evaluates every bracket of sampled module elements against its predicted
/// right-hand side. For the linear cases the prediction is zero.
std::vector<CommutatorEntry> structure_constants(const SymmetryAlgebra& alg, const OUSystem& sys,
                                                 const std::vector<expr::Expression>& sample_fs,
                                                 const std::vector<ExtPoint<double>>& probes);

/// Real generator from a complex mode e^{-kappa t}(m.d/dx - kappa m.d/dv):
/// part 0 takes the real part, part 1 the imaginary part.
SymmetryGenerator mode_generator(int n, const VectorXcd& m, cdouble kappa, int part);

/// Generator t e^{-kappa t} m.d/dx + (1 - kappa t) e^{-kappa t} m.d/dv for a
/// critically damped mode.
SymmetryGenerator critical_mode_generator(int n, const VectorXd& m, double kappa);

}  // namespace ousym
