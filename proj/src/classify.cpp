#include "ousym/classify.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace ousym {

namespace {

std::vector<ExtPoint<double>> probes_or_default(const OUSystem& sys, const ClassifyOptions& opts) {
  return opts.probes.empty() ? random_probes(ExtLayout::ou(sys.n()), 100, 0) : opts.probes;
}

ForceClass classify_checked(const OUSystem& sys, const ClassifyOptions& opts) {
  const auto fp = opts.force_probes.empty() ? default_force_probes(sys.n()) : opts.force_probes;
  ForceClass fc = classify_force(sys.force(), fp, opts.tol);
  if (!fc.consistent) throw Error(ErrorKind::UnclassifiableForce, fc.note);
  return fc;
}

std::string fmt(double v) { return expr::format_double(v); }

std::string fmt(cdouble z) {
  if (z.imag() == 0.0) return fmt(z.real());
  return "(" + fmt(z.real()) + (z.imag() < 0 ? " - " : " + ") + fmt(std::abs(z.imag())) + "*i)";
}

// Coefficient list "a*d/dx1 + b*d/dx2 - ..." skipping zeros.
std::string render_combination(const VectorXd& coef, const std::string& prefix) {
  std::string out;
  for (Index i = 0; i < coef.size(); ++i) {
    const double c = coef[i];
    if (c == 0.0) continue;
    const std::string name = prefix + std::to_string(i + 1);
    if (out.empty()) out += c < 0 ? "-" : "";
    else out += c < 0 ? " - " : " + ";
    if (std::abs(c) != 1.0) out += fmt(std::abs(c)) + "*";
    out += name;
  }
  return out;
}

double partial(const expr::Expression& f, const VectorXd& chi, Index j) {
  VecX<D1> q(chi.size());
  for (Index k = 0; k < chi.size(); ++k) q[k] = D1(chi[k], k == j ? 1.0 : 0.0);
  return f.evaluate<D1>(q).d;
}

bool is_unit_vector(const VectorXcd& m, Index* which) {
  Index hit = -1;
  for (Index k = 0; k < m.size(); ++k) {
    if (m[k] == cdouble(1.0, 0.0)) {
      if (hit >= 0) return false;
      hit = k;
    } else if (m[k] != cdouble(0.0, 0.0)) {
      return false;
    }
  }
  if (hit < 0) return false;
  *which = hit;
  return true;
}

// Scale so the largest entry is real and positive; clean rounding noise.
VectorXcd normalize_mode(VectorXcd m) {
  Index k;
  m.cwiseAbs().maxCoeff(&k);
  m *= std::abs(m[k]) / m[k];
  m /= m.norm();
  for (Index i = 0; i < m.size(); ++i) {
    double re = m[i].real(), im = m[i].imag();
    if (std::abs(re) < 1e-14) re = 0.0;
    if (std::abs(im) < 1e-14) im = 0.0;
    if (std::abs(re - 1.0) < 1e-14) re = 1.0;
    m[i] = {re, im};
  }
  return m;
}

}  // namespace

std::string_view to_string(InvariantBasis b) { return b == InvariantBasis::Empty ? "Empty" : "ChiBasis"; }

std::string_view to_string(CaseTag t) {
  switch (t) {
    case CaseTag::NoRealSimple: return "NoRealSimple";
    case CaseTag::LinearPair1D: return "LinearPair1D";
    case CaseTag::LinearAbelian2n: return "LinearAbelian2n";
    case CaseTag::ConstantModule: return "ConstantModule";
    case CaseTag::NotCovered: return "NotCovered";
  }
  return "?";
}

AffineInvariant chi_invariant(const OUSystem& sys, const VectorXd& c, Index i) {
  const Index n = sys.n();
  AffineInvariant a;
  a.a_x = VectorXd::Zero(n);
  a.a_v = VectorXd::Zero(n);
  a.a_w = VectorXd::Zero(n);
  a.a_z = VectorXd::Zero(n);
  const double mu = sys.mu()[i];
  a.a_w[i] = 1.0;
  a.a_v[i] = -1.0 / mu;
  a.a_x[i] = -sys.beta()[i] / mu;
  a.a_t = c[i] / mu;
  return a;
}

InvariantSet classify_invariants(const OUSystem& sys, const ClassifyOptions& opts) {
  const ForceClass fc = classify_checked(sys, opts);
  const auto probes = probes_or_default(sys, opts);
  InvariantSet out;
  out.force_tag = fc.tag;
  switch (fc.tag) {
    case ForceTag::Constant:
      out.basis_kind = InvariantBasis::ChiBasis;
      for (Index i = 0; i < sys.n(); ++i) {
        InvariantCandidate chi = affine_candidate(chi_invariant(sys, fc.c, i));
        out.certification.push_back(max_invariant_residual(chi, sys, probes));
        out.generators.push_back(std::move(chi));
      }
      out.annotation = "constant force: the chi^i generate the ring of invariants";
      break;
    case ForceTag::LinearRegular:
      out.annotation = "regular linear force: no non-trivial invariant";
      break;
    default:
      out.annotation = "not classified by theory; affine null-space solve reported as a numerical check";
      break;
  }
  out.numerical = solve_affine_invariants(sys, probes);
  return out;
}

std::vector<expr::Expression> default_scaling_functions(int n) {
  const auto vars = chi_variables(n);
  std::vector<expr::Expression> out;
  for (const char* s : {"1", "chi1", "sin(chi1)", "chi1^2"}) out.push_back(expr::parse(s, vars));
  return out;
}

SymmetryGenerator mode_generator(int n, const VectorXcd& m, cdouble kappa, int part) {
  Index unit_index;
  if (kappa.imag() == 0.0 && part == 0 && m.imag().isZero(0.0) && is_unit_vector(m, &unit_index))
    return expdecay_generator(n, unit_index, kappa.real());

  const ExtLayout l = ExtLayout::ou(n);
  const VectorXd mr = m.real(), mi = m.imag();
  const double a = kappa.real(), b = kappa.imag();
  // v-coefficients are -kappa m.
  const VectorXcd km = -kappa * m;
  const VectorXd kr = km.real(), ki = km.imag();
  VectorField phi(l.m, [=](const auto& p) {
    using S = typename std::decay_t<decltype(p)>::Scalar;
    using std::cos;
    using std::exp;
    using std::sin;
    const S t = p[l.t_index()];
    const S e = exp(-a * t);
    const S cs = cos(b * t), sn = sin(b * t);
    // e^{-kappa t} c = e^{-a t} (cos bt - i sin bt)(c_r + i c_i)
    auto re = [&](double cr, double ci) { return e * (cs * cr + sn * ci); };
    auto im = [&](double cr, double ci) { return e * (cs * ci - sn * cr); };
    VecX<S> out(l.m);
    for (Index i = 0; i < n; ++i) {
      out[i] = part == 0 ? re(mr[i], mi[i]) : im(mr[i], mi[i]);
      out[n + i] = part == 0 ? re(kr[i], ki[i]) : im(kr[i], ki[i]);
    }
    return out;
  });
  std::string label;
  if (kappa.imag() == 0.0 && mi.isZero(0.0)) {
    label = "exp(" + std::string(a > 0 ? "-" : "") + fmt(std::abs(a)) + "*t)*(" + render_combination(mr, "d/dx");
    const std::string v = render_combination(kr, "d/dv");
    if (!v.empty()) label += (v[0] == '-' ? " - " + v.substr(1) : " + " + v);
    label += ")";
  } else {
    std::ostringstream os;
    os << (part == 0 ? "Re" : "Im") << "[exp(-" << fmt(kappa) << "*t)*(m.d/dx - " << fmt(kappa)
       << "*m.d/dv)], m=[";
    for (Index i = 0; i < m.size(); ++i) os << (i ? ", " : "") << fmt(m[i]);
    os << "]";
    label = os.str();
  }
  return make_generator(l, std::move(phi), {}, Generic{}, label);
}

SymmetryGenerator critical_mode_generator(int n, const VectorXd& m, double kappa) {
  const ExtLayout l = ExtLayout::ou(n);
  VectorField phi(l.m, [=](const auto& p) {
    using S = typename std::decay_t<decltype(p)>::Scalar;
    using std::exp;
    const S t = p[l.t_index()];
    const S e = exp(-kappa * t);
    VecX<S> out(l.m);
    for (Index i = 0; i < n; ++i) {
      out[i] = m[i] * t * e;
      out[n + i] = m[i] * (1.0 - kappa * t) * e;
    }
    return out;
  });
  std::string label = "t*exp(" + std::string(kappa > 0 ? "-" : "") + fmt(std::abs(kappa)) + "*t)*(" +
                      render_combination(m, "d/dx") + ") + (1 - " + fmt(kappa) + "*t)*exp(" +
                      std::string(kappa > 0 ? "-" : "") + fmt(std::abs(kappa)) + "*t)*(" +
                      render_combination(m, "d/dv") + ")";
  return make_generator(l, std::move(phi), {}, Generic{}, label);
}

namespace {

void linear_isotropic(const OUSystem& sys, const ForceClass& fc, SymmetryAlgebra& alg) {
  const int n = sys.n();
  const double beta = sys.beta()[0];
  Eigen::EigenSolver<MatrixXd> es(fc.L);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::NotDiagonalizable, "eigen decomposition failed");
  EigenData ed;
  ed.lambda = es.eigenvalues();
  ed.M = es.eigenvectors();
  for (Index i = 0; i < n; ++i) {
    ed.M.col(i) = normalize_mode(ed.M.col(i));
    if (std::abs(ed.lambda[i].imag()) <= 1e-14 * (1.0 + std::abs(ed.lambda[i]))) {
      ed.lambda[i] = ed.lambda[i].real();
      ed.M.col(i) = ed.M.col(i).real().cast<cdouble>();
    }
  }
  {
    double ratio = 0.0;
    Eigen::JacobiSVD<MatrixXcd> svd(ed.M);
    const auto& s = svd.singularValues();
    ratio = s.minCoeff() / s.maxCoeff();
    if (!(ratio >= 1e-8))
      throw Error(ErrorKind::NotDiagonalizable,
                  "L has a defective eigenstructure (eigenvector matrix condition " + fmt(1.0 / ratio) + ")");
  }
  ed.kappa_plus.resize(n);
  ed.kappa_minus.resize(n);
  for (Index i = 0; i < n; ++i) {
    const cdouble disc = beta * beta + 4.0 * ed.lambda[i];
    cdouble s = std::sqrt(disc);
    if (disc.imag() == 0.0 && disc.real() >= 0.0) s = std::sqrt(disc.real());
    ed.kappa_plus[i] = 0.5 * (beta + s);
    ed.kappa_minus[i] = 0.5 * (beta - s);
  }
  for (Index i = 0; i < n; ++i) {
    const VectorXcd m = ed.M.col(i);
    const cdouble lam = ed.lambda[i];
    if (lam.imag() != 0.0) {
      if (lam.imag() < 0.0) continue;  // conjugate partner spans the same real pair
      for (const cdouble k : {ed.kappa_plus[i], ed.kappa_minus[i]})
        for (int part : {0, 1}) alg.generators.push_back(mode_generator(n, m, k, part));
      continue;
    }
    const double disc = beta * beta + 4.0 * lam.real();
    if (disc > 0.0) {
      alg.generators.push_back(mode_generator(n, m, ed.kappa_plus[i], 0));
      alg.generators.push_back(mode_generator(n, m, ed.kappa_minus[i], 0));
    } else if (disc == 0.0) {
      alg.generators.push_back(mode_generator(n, m, ed.kappa_plus[i], 0));
      alg.generators.push_back(critical_mode_generator(n, m.real(), ed.kappa_plus[i].real()));
    } else {
      alg.generators.push_back(mode_generator(n, m, ed.kappa_plus[i], 0));
      alg.generators.push_back(mode_generator(n, m, ed.kappa_plus[i], 1));
    }
  }
  alg.eigen = std::move(ed);
  alg.case_tag = n == 1 ? CaseTag::LinearPair1D : CaseTag::LinearAbelian2n;
  alg.annotation = n == 1 ? "linear force: two commuting simple symmetries"
                          : "isotropic regular linear force: 2n commuting simple symmetries";
}

}  // namespace

SymmetryAlgebra classify_symmetries(const OUSystem& sys, const ClassifyOptions& opts) {
  const ForceClass fc = classify_checked(sys, opts);
  const int n = sys.n();
  const bool isotropic = sys.isotropic() || n == 1;
  SymmetryAlgebra alg;
  alg.force_tag = fc.tag;
  switch (fc.tag) {
    case ForceTag::Constant:
      alg.case_tag = CaseTag::ConstantModule;
      alg.c = fc.c;
      for (Index i = 0; i < n; ++i) {
        alg.x_set.push_back(alg.generators.size());
        alg.generators.push_back(expdecay_generator(n, i, sys.beta()[i]));
      }
      for (Index i = 0; i < n; ++i) {
        alg.y_set.push_back(alg.generators.size());
        alg.generators.push_back(translation_generator(n, i));
      }
      alg.module_rank = 2 * n;
      alg.annotation = "constant force: Lie module of rank 2n over the chi invariants; X-set is an Abelian ideal";
      break;
    case ForceTag::LinearRegular:
      if (isotropic) {
        linear_isotropic(sys, fc, alg);
      } else {
        alg.case_tag = CaseTag::NotCovered;
        alg.wsym_candidates = solve_wsym_linear_constraint(fc.L, sys.beta().asDiagonal().toDenseMatrix());
        alg.annotation = "theory incomplete: anisotropic linear force; W-matrix constraint solutions "
                         "reported as uncertified candidates";
      }
      break;
    case ForceTag::LinearDegenerate:
      alg.case_tag = CaseTag::NotCovered;
      alg.annotation = "theory incomplete: degenerate linear force";
      break;
    case ForceTag::NonlinearSecondOrderRegular:
      if (isotropic) {
        alg.case_tag = CaseTag::NoRealSimple;
        alg.annotation = "second order regular nonlinear force: no real simple symmetry";
      } else {
        alg.case_tag = CaseTag::NotCovered;
        alg.annotation = "not covered by theory: anisotropic nonlinear force";
      }
      break;
    case ForceTag::NonlinearSecondOrderDegenerate:
      alg.case_tag = CaseTag::NotCovered;
      alg.annotation = "not covered by theory: nonlinear force with a singular second derivative matrix";
      break;
  }

  const auto probes = probes_or_default(sys, opts);
  const ItoSystem ito = sys.ito();
  for (const auto& g : alg.generators) alg.certification.push_back(max_residual(g, ito, probes).max_abs);

  if (opts.commutators && !alg.generators.empty()) {
    const std::vector<ExtPoint<double>> few(probes.begin(),
                                            probes.begin() + std::min<std::size_t>(probes.size(), opts.commutator_probes));
    alg.commutators = structure_constants(alg, sys, default_scaling_functions(n), few);
  }
  return alg;
}

std::vector<CommutatorEntry> structure_constants(const SymmetryAlgebra& alg, const OUSystem& sys,
                                                 const std::vector<expr::Expression>& sample_fs,
                                                 const std::vector<ExtPoint<double>>& probes) {
  std::vector<CommutatorEntry> out;
  const ItoSystem ito = sys.ito();
  auto phi_gap = [&](const SymmetryGenerator& b, auto&& predicted) {
    double gap = 0.0;
    for (const auto& p : probes) {
      gap = std::max(gap, (b.phi(p.c) - predicted(p)).cwiseAbs().maxCoeff());
      gap = std::max(gap, b.R_at(p.c).cwiseAbs().maxCoeff());
    }
    return gap;
  };

  if (alg.case_tag != CaseTag::ConstantModule) {
    for (std::size_t a = 0; a < alg.generators.size(); ++a) {
      for (std::size_t b = a + 1; b < alg.generators.size(); ++b) {
        const SymmetryGenerator br = bracket(alg.generators[a], alg.generators[b]);
        const double gap = phi_gap(br, [&](const auto&) { return VectorXd::Zero(br.layout.m).eval(); });
        out.push_back({br.label, "0", gap});
      }
    }
    return out;
  }

  const int n = sys.n();
  std::vector<InvariantCandidate> chi;
  std::vector<AffineInvariant> chi_aff;
  for (Index i = 0; i < n; ++i) {
    chi_aff.push_back(chi_invariant(sys, alg.c, i));
    chi.push_back(affine_candidate(chi_aff.back()));
  }
  auto chi_at = [&](const ExtPoint<double>& p) {
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v[i] = chi_aff[i].evaluate(p);
    return v;
  };
  const VectorXd& beta = sys.beta();
  const VectorXd& mu = sys.mu();
  // Unscaled X^(i) and Y^(i) coefficient vectors at p.
  auto x_dir = [&](Index i, const ExtPoint<double>& p) {
    VectorXd v = VectorXd::Zero(2 * n);
    const double e = std::exp(-beta[i] * p.t());
    v[i] = e;
    v[n + i] = -beta[i] * e;
    return v;
  };
  auto y_dir = [&](Index i) {
    VectorXd v = VectorXd::Zero(2 * n);
    v[i] = 1.0;
    return v;
  };

  std::vector<std::vector<SymmetryGenerator>> Xf(sample_fs.size()), Yf(sample_fs.size());
  for (std::size_t k = 0; k < sample_fs.size(); ++k) {
    const InvariantCandidate alpha = compose_invariant(chi, sample_fs[k]);
    for (Index i = 0; i < n; ++i) {
      Xf[k].push_back(scale_by_invariant(alg.generators[alg.x_set[i]], alpha, sys, probes));
      Yf[k].push_back(scale_by_invariant(alg.generators[alg.y_set[i]], alpha, sys, probes));
    }
  }
  for (std::size_t a = 0; a < sample_fs.size(); ++a) {
    for (std::size_t b = 0; b < sample_fs.size(); ++b) {
      const auto& f = sample_fs[a];
      const auto& g = sample_fs[b];
      const std::string fs = f.render(), gs = g.render();
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
          const std::string I = std::to_string(i + 1), J = std::to_string(j + 1);
          {
            const SymmetryGenerator br = bracket(Xf[a][i], Xf[b][j]);
            const double gap = phi_gap(br, [&](const auto&) { return VectorXd::Zero(2 * n).eval(); });
            out.push_back({"[X" + I + "_{" + fs + "}, X" + J + "_{" + gs + "}]", "0", gap});
          }
          {
            const SymmetryGenerator br = bracket(Yf[a][i], Yf[b][j]);
            const double cj = beta[j] / mu[j], ci = beta[i] / mu[i];
            const double gap = phi_gap(br, [&](const ExtPoint<double>& p) {
              const VectorXd c = chi_at(p);
              const double fv = f.evaluate<double>(c), gv = g.evaluate<double>(c);
              return (cj * partial(f, c, j) * gv * y_dir(i) - ci * fv * partial(g, c, i) * y_dir(j)).eval();
            });
            out.push_back({"[Y" + I + "_{" + fs + "}, Y" + J + "_{" + gs + "}]",
                           "Y" + I + "_{" + fmt(cj) + "*d(" + fs + ")/dchi" + J + "*(" + gs + ")} - Y" + J + "_{" +
                               fmt(ci) + "*(" + fs + ")*d(" + gs + ")/dchi" + I + "}",
                           gap});
          }
          {
            const SymmetryGenerator br = bracket(Xf[a][i], Yf[b][j]);
            const double cj = beta[j] / mu[j];
            const double gap = phi_gap(br, [&](const ExtPoint<double>& p) {
              const VectorXd c = chi_at(p);
              return (cj * partial(f, c, j) * g.evaluate<double>(c) * x_dir(i, p)).eval();
            });
            out.push_back({"[X" + I + "_{" + fs + "}, Y" + J + "_{" + gs + "}]",
                           "X" + I + "_{" + fmt(cj) + "*d(" + fs + ")/dchi" + J + "*(" + gs + ")}", gap});
          }
        }
      }
    }
  }
  return out;
}

}  // namespace ousym
