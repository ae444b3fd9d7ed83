#include "ousym/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SVD>

#include "ousym/rng.hpp"

namespace ousym {

namespace {

bool all_finite(const VectorXd& v) { return v.allFinite(); }

double max_abs(const MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

ForceField ForceField::constant(VectorXd c) {
  const int n = static_cast<int>(c.size());
  if (n < 1) throw Error(ErrorKind::DimensionMismatch, "force dimension must be positive");
  return ForceField(n, ConstantForce{std::move(c)});
}

ForceField ForceField::linear(MatrixXd L, VectorXd K) {
  const int n = static_cast<int>(K.size());
  if (n < 1 || L.rows() != n || L.cols() != n)
    throw Error(ErrorKind::DimensionMismatch, "linear force needs an n x n matrix and length-n offset");
  return ForceField(n, LinearForce{std::move(L), std::move(K)});
}

ForceField ForceField::expression(std::vector<expr::Expression> components, int n) {
  if (n < 1 || static_cast<int>(components.size()) != n)
    throw Error(ErrorKind::DimensionMismatch, "expression force needs exactly n components");
  return ForceField(n, ExpressionForce{std::move(components)});
}

MatrixXd ForceField::jacobian(const VectorXd& x) const {
  if (const auto* c = std::get_if<ConstantForce>(&force_)) {
    (void)c;
    return MatrixXd::Zero(n_, n_);
  }
  if (const auto* l = std::get_if<LinearForce>(&force_)) return l->L;
  MatrixXd J(n_, n_);
  for (Index k = 0; k < n_; ++k) {
    VecX<D1> xd(n_);
    for (Index j = 0; j < n_; ++j) xd[j] = D1(x[j], j == k ? 1.0 : 0.0);
    const VecX<D1> f = evaluate<D1>(xd);
    for (Index i = 0; i < n_; ++i) J(i, k) = f[i].d;
  }
  return J;
}

std::vector<MatrixXd> ForceField::hessians(const VectorXd& x) const {
  std::vector<MatrixXd> H(n_, MatrixXd::Zero(n_, n_));
  if (!std::holds_alternative<ExpressionForce>(force_)) return H;
  for (Index j = 0; j < n_; ++j) {
    for (Index k = j; k < n_; ++k) {
      VecX<D2> xd(n_);
      for (Index m = 0; m < n_; ++m)
        xd[m] = D2(D1(x[m], m == k ? 1.0 : 0.0), D1(m == j ? 1.0 : 0.0, 0.0));
      const VecX<D2> f = evaluate<D2>(xd);
      for (Index i = 0; i < n_; ++i) {
        H[i](j, k) = f[i].d.d;
        H[i](k, j) = f[i].d.d;
      }
    }
  }
  return H;
}

std::string ForceField::describe() const {
  std::ostringstream os;
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantForce>) {
          os << "constant c=[";
          for (Index i = 0; i < f.c.size(); ++i) os << (i ? ", " : "") << expr::format_double(f.c[i]);
          os << "]";
        } else if constexpr (std::is_same_v<T, LinearForce>) {
          os << "linear L=[";
          for (Index i = 0; i < f.L.rows(); ++i) {
            os << (i ? ", " : "") << "[";
            for (Index j = 0; j < f.L.cols(); ++j) os << (j ? ", " : "") << expr::format_double(f.L(i, j));
            os << "]";
          }
          os << "] K=[";
          for (Index i = 0; i < f.K.size(); ++i) os << (i ? ", " : "") << expr::format_double(f.K[i]);
          os << "]";
        } else {
          for (std::size_t i = 0; i < f.components.size(); ++i)
            os << (i ? "; " : "") << f.components[i].render();
        }
      },
      force_);
  return os.str();
}

expr::VariableSet force_variables(int n) { return expr::VariableSet::indexed("x", n); }

ForceField parse_force_expression(std::string_view text, int n) {
  if (n < 1) throw Error(ErrorKind::DimensionMismatch, "dimension must be positive");
  return ForceField::expression(expr::parse_components(text, force_variables(n), n), n);
}

OUSystem build_ou_system(int n, const VectorXd& beta, const VectorXd& mu, const ForceField& force) {
  if (n < 1) throw Error(ErrorKind::DimensionMismatch, "n must be positive");
  if (beta.size() != n || mu.size() != n || force.dimension() != n)
    throw Error(ErrorKind::DimensionMismatch, "beta, mu and force must all have dimension n");
  for (Index i = 0; i < n; ++i) {
    if (!(beta[i] > 0.0) || !std::isfinite(beta[i]))
      throw Error(ErrorKind::NonPositiveFriction, "beta_" + std::to_string(i + 1) + " must be > 0");
    if (mu[i] == 0.0 || !std::isfinite(mu[i]))
      throw Error(ErrorKind::ZeroNoise, "mu_" + std::to_string(i + 1) + " must be nonzero");
  }
  OUSystem sys;
  sys.n_ = n;
  sys.beta_ = beta;
  sys.mu_ = mu;
  sys.force_ = force;
  sys.isotropic_ = (beta.array() == beta[0]).all() && (mu.array() == mu[0]).all();
  return sys;
}

ItoSystem OUSystem::ito() const {
  const OUSystem self = *this;
  return ItoSystem(
      "ou", 2 * n_, 2 * n_,
      [self](const auto& y, const auto&) { return self.drift(y); },
      [self](const auto& y, const auto&) {
        using S = typename std::decay_t<decltype(y)>::Scalar;
        return self.diffusion<S>();
      });
}

ItoSystem geometric_brownian_motion(double a, double b) {
  return ItoSystem(
      "gbm", 1, 1,
      [a](const auto& y, const auto&) {
        using V = std::decay_t<decltype(y)>;
        V out(1);
        out[0] = a * y[0];
        return out;
      },
      [b](const auto& y, const auto&) {
        using S = typename std::decay_t<decltype(y)>::Scalar;
        MatX<S> s(1, 1);
        s(0, 0) = b * y[0];
        return s;
      });
}

ItoSystem kozlov_exp_system() {
  return ItoSystem(
      "kozlov_exp", 1, 1,
      [](const auto& y, const auto&) {
        using std::exp;
        using V = std::decay_t<decltype(y)>;
        V out(1);
        out[0] = exp(-y[0]) - 0.5 * exp(-2.0 * y[0]);
        return out;
      },
      [](const auto& y, const auto&) {
        using std::exp;
        using S = typename std::decay_t<decltype(y)>::Scalar;
        MatX<S> s(1, 1);
        s(0, 0) = exp(-y[0]);
        return s;
      });
}

std::string_view to_string(ForceTag tag) {
  switch (tag) {
    case ForceTag::Constant: return "Constant";
    case ForceTag::LinearRegular: return "LinearRegular";
    case ForceTag::LinearDegenerate: return "LinearDegenerate";
    case ForceTag::NonlinearSecondOrderRegular: return "NonlinearSecondOrderRegular";
    case ForceTag::NonlinearSecondOrderDegenerate: return "NonlinearSecondOrderDegenerate";
  }
  return "?";
}

std::vector<VectorXd> default_force_probes(int n, int count, std::uint64_t seed) {
  std::vector<VectorXd> probes;
  probes.reserve(count);
  for (int p = 0; p < count; ++p) {
    VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = -2.0 + 4.0 * rng::uniform(seed, p, i, 0x464f524345ULL, 0);
    probes.push_back(x);
  }
  return probes;
}

bool is_singular(const MatrixXd& m, double tol, double* ratio) {
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s.maxCoeff() : 0.0;
  const double smin = s.size() ? s.minCoeff() : 0.0;
  const double r = smax > 0.0 ? smin / smax : 0.0;
  if (ratio) *ratio = r;
  return smax == 0.0 || smin < tol * smax;
}

ForceClass classify_force(const ForceField& force, const std::vector<VectorXd>& probes, double tol) {
  if (probes.empty()) throw Error(ErrorKind::EmptyProbeSet, "classify_force needs at least one probe");
  const int n = force.dimension();
  ForceClass out;
  out.probes.reserve(probes.size());

  bool all_jac_zero = true, any_jac_zero = false;
  bool all_hess_zero = true, any_hess_zero = false;
  bool all_hess_regular = true;
  for (const VectorXd& p : probes) {
    if (p.size() != n) throw Error(ErrorKind::DimensionMismatch, "probe has wrong dimension");
    if (!all_finite(p)) throw Error(ErrorKind::NonFiniteEvaluation, "probe is not finite");
    ProbeWitness w;
    w.point = p;
    const VectorXd f = force.evaluate<double>(p);
    w.jacobian = force.jacobian(p);
    const auto H = force.hessians(p);
    if (!all_finite(f) || !w.jacobian.allFinite() ||
        std::any_of(H.begin(), H.end(), [](const MatrixXd& h) { return !h.allFinite(); }))
      throw Error(ErrorKind::NonFiniteEvaluation, "force or its derivatives not finite at a probe");
    w.jacobian_zero = max_abs(w.jacobian) <= tol;
    w.jacobian_singular = is_singular(w.jacobian, tol, &w.jacobian_sv_ratio);
    w.hessians_zero = std::all_of(H.begin(), H.end(), [&](const MatrixXd& h) { return max_abs(h) <= tol; });
    w.hessians_regular = true;
    for (const MatrixXd& h : H) {
      double r = 0.0;
      if (is_singular(h, tol, &r)) w.hessians_regular = false;
      w.hessian_sv_ratios.push_back(r);
    }
    all_jac_zero &= w.jacobian_zero;
    any_jac_zero |= w.jacobian_zero;
    all_hess_zero &= w.hessians_zero;
    any_hess_zero |= w.hessians_zero;
    all_hess_regular &= w.hessians_regular;
    out.probes.push_back(std::move(w));
  }

  const VectorXd& p0 = probes.front();
  if (all_jac_zero) {
    out.tag = ForceTag::Constant;
    out.c = force.evaluate<double>(p0);
    out.L = MatrixXd::Zero(n, n);
    out.K = out.c;
    for (const VectorXd& p : probes) {
      if ((force.evaluate<double>(p) - out.c).cwiseAbs().maxCoeff() > tol * (1.0 + out.c.cwiseAbs().maxCoeff())) {
        out.consistent = false;
        out.note = "zero Jacobian but the field value changes between probes";
      }
    }
    return out;
  }
  if (all_hess_zero) {
    out.L = out.probes.front().jacobian;
    out.K = force.evaluate<double>(p0) - out.L * p0;
    const double scale = 1.0 + max_abs(out.L);
    for (std::size_t k = 0; k < probes.size(); ++k) {
      if (max_abs(out.probes[k].jacobian - out.L) > tol * scale) {
        out.consistent = false;
        out.note = "piecewise linear field: Jacobian differs between probes";
      }
    }
    Eigen::FullPivLU<MatrixXd> lu(out.L);
    lu.setThreshold(tol);
    out.rank = lu.rank();
    out.tag = is_singular(out.L, tol) ? ForceTag::LinearDegenerate : ForceTag::LinearRegular;
    if (any_jac_zero) {
      out.consistent = false;
      out.note = "Jacobian vanishes at some probes only";
    }
    return out;
  }
  if (any_hess_zero) {
    out.consistent = false;
    out.note = "second derivatives vanish at some probes only";
  }
  out.tag = all_hess_regular ? ForceTag::NonlinearSecondOrderRegular
                             : ForceTag::NonlinearSecondOrderDegenerate;
  return out;
}

}  // namespace ousym
