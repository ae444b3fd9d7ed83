#include "ousym/cli.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ousym/integrate.hpp"

namespace ousym::cli {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); }

VectorXd vector_field(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) invalid(std::string("'") + key + "' must be an array of numbers");
  const json& a = j.at(key);
  VectorXd v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) invalid(std::string("'") + key + "' must contain numbers only");
    v[static_cast<Index>(i)] = a[i].get<double>();
  }
  return v;
}

MatrixXd matrix_field(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) invalid(std::string("'") + key + "' must be an array of rows");
  const json& a = j.at(key);
  const Index rows = static_cast<Index>(a.size());
  const Index cols = rows ? static_cast<Index>(a[0].is_array() ? a[0].size() : 0) : 0;
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (!a[r].is_array() || static_cast<Index>(a[r].size()) != cols) invalid(std::string("'") + key + "' rows differ");
    for (Index c = 0; c < cols; ++c) {
      if (!a[r][c].is_number()) invalid(std::string("'") + key + "' must contain numbers only");
      m(r, c) = a[r][c].get<double>();
    }
  }
  return m;
}

json to_json(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json to_json(const MatrixXd& m) {
  json a = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(row);
  }
  return a;
}

json to_json(cdouble z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

json to_json(const VectorXcd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(to_json(v[i]));
  return a;
}

json to_json(const MatrixXcd& m) {
  json a = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(to_json(m(r, c)));
    a.push_back(row);
  }
  return a;
}

json system_json(const OUSystem& sys) {
  json j;
  j["n"] = sys.n();
  j["beta"] = to_json(sys.beta());
  j["mu"] = to_json(sys.mu());
  json f;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ConstantForce>) {
          f["type"] = "constant";
          f["c"] = to_json(v.c);
        } else if constexpr (std::is_same_v<T, LinearForce>) {
          f["type"] = "linear";
          f["L"] = to_json(v.L);
          f["K"] = to_json(v.K);
        } else {
          f["type"] = "expr";
          f["expr"] = sys.force().describe();
        }
      },
      sys.force().variant());
  j["force"] = f;
  j["isotropic"] = sys.isotropic();
  return j;
}

json affine_json(const AffineInvariant& a) {
  json j;
  j["expression"] = a.render();
  j["a_x"] = to_json(a.a_x);
  j["a_v"] = to_json(a.a_v);
  j["a_w"] = to_json(a.a_w);
  j["a_z"] = to_json(a.a_z);
  j["a_t"] = a.a_t;
  j["a_0"] = a.a_0;
  return j;
}

json family_json(const Family& f) {
  json j;
  j["name"] = family_name(f);
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ExpDecay>) {
          j["i"] = v.i + 1;
          j["kappa"] = v.kappa;
        } else if constexpr (std::is_same_v<T, Translation>) {
          j["i"] = v.i + 1;
        } else if constexpr (std::is_same_v<T, ModuleScaled>) {
          j["base"] = v.base;
          j["factor"] = v.factor;
        }
      },
      f);
  return j;
}

std::string read_source(const std::string& value) {
  if (!value.empty() && value.front() == '{') return value;
  std::ifstream in(value);
  if (!in) invalid("cannot read '" + value + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> parse_pairs(std::string_view body) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    std::size_t end = pos;
    int depth = 0;
    while (end < body.size() && !(body[end] == ',' && depth == 0)) {
      if (body[end] == '(') ++depth;
      if (body[end] == ')') --depth;
      ++end;
    }
    const std::string_view item = body.substr(pos, end - pos);
    if (!item.empty()) {
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) invalid("expected key=value in generator spec, got '" + std::string(item) + "'");
      kv[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
    }
    pos = end + 1;
  }
  return kv;
}

double parse_number(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) invalid("bad number for " + what + ": '" + s + "'");
  return v;
}

Index parse_index(const std::string& s, const OUSystem& sys) {
  const double v = parse_number(s, "i");
  if (v != std::floor(v) || v < 1 || v > sys.n()) invalid("component index i must be in 1..n");
  return static_cast<Index>(v) - 1;
}

std::vector<InvariantCandidate> chi_basis(const OUSystem& sys) {
  const ForceClass fc = classify_force(sys.force(), default_force_probes(sys.n()));
  if (fc.tag != ForceTag::Constant || !fc.consistent)
    throw Error(ErrorKind::WrongForceClass, "module scaling by f(chi) needs a constant force");
  std::vector<InvariantCandidate> out;
  for (Index i = 0; i < sys.n(); ++i) out.push_back(affine_candidate(chi_invariant(sys, fc.c, i)));
  return out;
}

SymmetryGenerator family_generator(const std::string& family, const std::map<std::string, std::string>& kv,
                                   const OUSystem& sys) {
  auto get = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) invalid(std::string("generator spec needs '") + key + "'");
    return it->second;
  };
  if (family == "expdecay") return expdecay_generator(sys.n(), parse_index(get("i"), sys), parse_number(get("kappa"), "kappa"));
  if (family == "translation") return translation_generator(sys.n(), parse_index(get("i"), sys));
  if (family == "modulescaled") {
    std::map<std::string, std::string> base_kv = kv;
    base_kv.erase("base");
    base_kv.erase("f");
    const std::string base = get("base");
    if (base == "modulescaled") invalid("modulescaled base must be expdecay or translation");
    const SymmetryGenerator X = family_generator(base, base_kv, sys);
    const auto basis = chi_basis(sys);
    const expr::Expression f = expr::parse(get("f"), chi_variables(sys.n()));
    return scale_by_invariant(X, compose_invariant(basis, f), sys);
  }
  invalid("unknown generator family '" + family + "'");
}

std::string json_scalar_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

OUSystem parse_system_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    invalid(std::string("system JSON: ") + e.what());
  }
  if (!j.is_object()) invalid("system JSON must be an object");
  if (!j.contains("n") || !j["n"].is_number_integer()) invalid("'n' must be an integer");
  const int n = j["n"].get<int>();
  if (n < 1) throw Error(ErrorKind::DimensionMismatch, "'n' must be positive");
  const VectorXd beta = vector_field(j, "beta");
  const VectorXd mu = vector_field(j, "mu");
  if (!j.contains("force") || !j["force"].is_object()) invalid("'force' must be an object");
  const json& f = j["force"];
  if (!f.contains("type") || !f["type"].is_string()) invalid("'force.type' must be a string");
  const std::string type = f["type"];
  ForceField force = ForceField::constant(VectorXd::Zero(1));
  if (type == "constant") {
    force = ForceField::constant(vector_field(f, "c"));
  } else if (type == "linear") {
    force = ForceField::linear(matrix_field(f, "L"), vector_field(f, "K"));
  } else if (type == "expr") {
    if (!f.contains("expr") || !f["expr"].is_string()) invalid("'force.expr' must be a string");
    force = parse_force_expression(f["expr"].get<std::string>(), n);
  } else {
    invalid("'force.type' must be constant, linear or expr");
  }
  return build_ou_system(n, beta, mu, force);
}

std::string system_to_json(const OUSystem& sys) { return system_json(sys).dump(2); }

SymmetryGenerator parse_generator(std::string_view spec, const OUSystem& sys) {
  if (!spec.empty() && spec.front() == '{') {
    json j;
    try {
      j = json::parse(spec);
    } catch (const json::exception& e) {
      invalid(std::string("generator JSON: ") + e.what());
    }
    if (j.contains("family")) {
      std::map<std::string, std::string> kv;
      for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "family") kv[it.key()] = json_scalar_text(it.value());
      return family_generator(j["family"].get<std::string>(), kv, sys);
    }
    if (!j.contains("phi") || !j["phi"].is_array()) invalid("generator JSON needs 'family' or 'phi'");
    const auto vars = ext_variables(sys.n());
    std::vector<expr::Expression> phi;
    for (const auto& c : j["phi"]) {
      if (!c.is_string()) invalid("'phi' entries must be expression strings");
      phi.push_back(expr::parse(c.get<std::string>(), vars));
    }
    MatrixXd R = j.contains("R") ? matrix_field(j, "R") : MatrixXd();
    std::string label = "phi=[";
    for (std::size_t i = 0; i < phi.size(); ++i) label += (i ? "; " : "") + phi[i].render();
    label += "]";
    return generic_generator(sys.n(), phi, std::move(R), label);
  }
  const auto colon = spec.find(':');
  const std::string family(spec.substr(0, colon));
  const auto kv = colon == std::string_view::npos ? std::map<std::string, std::string>{} : parse_pairs(spec.substr(colon + 1));
  return family_generator(family, kv, sys);
}

std::string algebra_to_json(const SymmetryAlgebra& alg, const OUSystem& sys, int probes, std::uint64_t seed) {
  json j;
  j["system"] = system_json(sys);
  j["force_tag"] = std::string(to_string(alg.force_tag));
  j["case_tag"] = std::string(to_string(alg.case_tag));
  j["annotation"] = alg.annotation;
  j["module_rank"] = alg.module_rank;
  json gens = json::array();
  for (std::size_t k = 0; k < alg.generators.size(); ++k) {
    const auto& g = alg.generators[k];
    json e;
    e["label"] = g.label;
    e["family"] = family_json(g.family);
    e["R"] = to_json(g.R);
    e["max_residual"] = alg.certification.at(k);
    gens.push_back(e);
  }
  j["generators"] = gens;
  j["x_set"] = alg.x_set;
  j["y_set"] = alg.y_set;
  if (alg.eigen) {
    json ed;
    ed["M"] = to_json(alg.eigen->M);
    ed["lambda"] = to_json(alg.eigen->lambda);
    ed["kappa_plus"] = to_json(alg.eigen->kappa_plus);
    ed["kappa_minus"] = to_json(alg.eigen->kappa_minus);
    j["eigen_data"] = ed;
  } else {
    j["eigen_data"] = nullptr;
  }
  json cands = json::array();
  for (const auto& m : alg.wsym_candidates) cands.push_back(to_json(m));
  j["wsym_candidates"] = cands;
  json comm = json::array();
  for (const auto& c : alg.commutators) comm.push_back({{"lhs", c.lhs}, {"rhs", c.rhs}, {"discrepancy", c.discrepancy}});
  j["commutators"] = comm;
  j["probes"] = {{"count", probes}, {"seed", seed}};
  return j.dump(2);
}

std::string invariants_to_json(const InvariantSet& inv, const OUSystem& sys, int probes, std::uint64_t seed) {
  json j;
  j["system"] = system_json(sys);
  j["force_tag"] = std::string(to_string(inv.force_tag));
  j["basis_kind"] = std::string(to_string(inv.basis_kind));
  j["annotation"] = inv.annotation;
  json gens = json::array();
  for (std::size_t k = 0; k < inv.generators.size(); ++k) {
    json e = affine_json(*inv.generators[k].affine);
    e["max_residual"] = inv.certification.at(k);
    gens.push_back(e);
  }
  j["generators"] = gens;
  json num = json::array();
  for (const auto& a : inv.numerical) num.push_back(affine_json(a));
  j["numerical"] = num;
  j["probes"] = {{"count", probes}, {"seed", seed}};
  return j.dump(2);
}

// ---------------------------------------------------------------------------

namespace {

struct Common {
  std::string system;
  std::string out;
  std::uint64_t seed = 0;
};

VectorXd parse_state(const std::string& text, Index size) {
  if (text.empty()) return VectorXd::Zero(size);
  std::vector<double> vals;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    vals.push_back(parse_number(item, "--x0"));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (static_cast<Index>(vals.size()) != size)
    throw Error(ErrorKind::DimensionMismatch, "--x0 needs " + std::to_string(size) + " values (x then v)");
  return Eigen::Map<const VectorXd>(vals.data(), size);
}

void emit(const Common& c, std::ostream& out, const std::string& text) {
  if (c.out.empty() || c.out == "-") {
    out << text;
    return;
  }
  std::ofstream f(c.out);
  if (!f) invalid("cannot write '" + c.out + "'");
  f << text;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Symmetry analysis and integration of the Ornstein-Uhlenbeck process in a force field", "ousym"};
  app.require_subcommand(1);

  Common common;
  int probes = 100;
  std::string generator, engine = "dual", x0_text, problem = "gbm";
  double t0 = 0.0, t1 = 1.0, a = 1.0, b = 0.5, gbm_x0 = 1.0, y0 = std::log(4.0);
  Index steps = 1000, base_steps = 16, ref_factor = 64;
  std::uint64_t path_index = 0;
  int paths = 200, ladder = 5;
  bool converge_flag = false;

  auto add_system = [&](CLI::App* s) { s->add_option("--system", common.system, "system JSON file or inline JSON")->required(); };
  auto add_out = [&](CLI::App* s) { s->add_option("--out", common.out, "output file (default stdout)"); };
  auto add_seed = [&](CLI::App* s) { s->add_option("--seed", common.seed, "random seed (default 0)"); };

  auto* classify = app.add_subcommand("classify", "simple-symmetry algebra as JSON");
  auto* invariants = app.add_subcommand("invariants", "invariant ring as JSON");
  auto* verify = app.add_subcommand("verify", "max determining-equation residual of a generator");
  auto* simulate = app.add_subcommand("simulate", "Euler-Maruyama path as CSV");
  auto* solve = app.add_subcommand("solve", "exact symmetry-based solution as CSV");
  auto* converge = app.add_subcommand("converge", "strong convergence of EM against the exact solver");
  auto* reference = app.add_subcommand("reference", "GBM / KozlovExp reference fixtures");

  for (auto* s : {classify, invariants, verify}) {
    add_system(s);
    add_out(s);
    add_seed(s);
    s->add_option("--probes", probes, "number of probe points (default 100)")->check(CLI::PositiveNumber);
  }
  verify->add_option("--generator", generator, "generator spec (shorthand or JSON)")->required();
  verify->add_option("--engine", engine, "dual | fd")->check(CLI::IsMember({"dual", "fd"}));
  for (auto* s : {simulate, solve, converge}) {
    add_system(s);
    add_out(s);
    add_seed(s);
    s->add_option("--x0", x0_text, "initial state x1..xn,v1..vn (default zeros)");
    s->add_option("--t0", t0, "start time");
    s->add_option("--t1", t1, "end time");
  }
  for (auto* s : {simulate, solve}) {
    s->add_option("--steps", steps, "grid steps")->check(CLI::PositiveNumber);
    s->add_option("--path", path_index, "path index in the counter-based stream");
  }
  for (auto* s : {converge, reference}) {
    s->add_option("--paths", paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
    s->add_option("--ladder", ladder, "number of EM grids")->check(CLI::Range(2, 20));
    s->add_option("--base-steps", base_steps, "coarsest EM grid")->check(CLI::PositiveNumber);
    s->add_option("--ref-factor", ref_factor, "reference refinement over the finest EM grid")->check(CLI::PositiveNumber);
  }
  add_out(reference);
  add_seed(reference);
  reference->add_option("--problem", problem, "gbm | kozlov_exp")->check(CLI::IsMember({"gbm", "kozlov", "kozlov_exp"}));
  reference->add_option("--a", a, "GBM drift");
  reference->add_option("--b", b, "GBM volatility");
  reference->add_option("--x0", gbm_x0, "GBM initial value");
  reference->add_option("--y0", y0, "KozlovExp initial value (default log 4)");
  reference->add_option("--t1", t1, "end time");
  reference->add_option("--steps", steps, "grid steps")->check(CLI::PositiveNumber);
  reference->add_option("--path", path_index, "path index");
  reference->add_flag("--converge", converge_flag, "run the EM convergence study instead");

  std::vector<const char*> argv{"ousym"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (classify->parsed() || invariants->parsed() || verify->parsed()) {
      const OUSystem sys = parse_system_json(read_source(common.system));
      ClassifyOptions opts;
      opts.probes = random_probes(ExtLayout::ou(sys.n()), probes, common.seed);
      if (classify->parsed()) {
        const SymmetryAlgebra alg = classify_symmetries(sys, opts);
        emit(common, out, algebra_to_json(alg, sys, probes, common.seed) + "\n");
      } else if (invariants->parsed()) {
        const InvariantSet inv = classify_invariants(sys, opts);
        emit(common, out, invariants_to_json(inv, sys, probes, common.seed) + "\n");
      } else {
        const SymmetryGenerator g = parse_generator(generator, sys);
        const Engine e = engine == "fd" ? Engine::FiniteDifference : Engine::Dual;
        const ResidualSummary s = max_residual(g, sys, opts.probes, e);
        json j;
        j["generator"] = g.label;
        j["family"] = family_json(g.family);
        j["engine"] = engine;
        j["max_f_residual"] = s.max_f;
        j["max_sigma_residual"] = s.max_sigma;
        j["max_residual"] = s.max_abs;
        j["worst_probe"] = s.worst_probe;
        j["tolerance"] = default_tolerance(e);
        j["passes"] = s.max_abs <= default_tolerance(e);
        j["probes"] = {{"count", probes}, {"seed", common.seed}};
        emit(common, out, j.dump(2) + "\n");
      }
      return 0;
    }
    if (simulate->parsed() || solve->parsed()) {
      const OUSystem sys = parse_system_json(read_source(common.system));
      const VectorXd x0 = parse_state(x0_text, 2 * sys.n());
      const WienerGrid grid = sample_wiener(sys.n(), t0, t1, steps, common.seed, path_index);
      Path p;
      std::string method = "euler_maruyama";
      if (simulate->parsed()) {
        p = euler_maruyama(sys, x0, grid);
      } else {
        const ForceClass fc = classify_force(sys.force(), default_force_probes(sys.n()));
        if (fc.tag == ForceTag::Constant) {
          p = exact_solve_constant(sys, x0, grid);
          method = "exact_solve_constant";
        } else if (fc.tag == ForceTag::LinearRegular) {
          p = exact_solve_linear(sys, x0, grid);
          method = "exact_solve_linear";
        } else {
          throw Error(ErrorKind::WrongForceClass, "no exact solver for a " + std::string(to_string(fc.tag)) + " force");
        }
      }
      std::ostringstream os;
      write_path_csv(os, p, ou_columns(sys.n()),
                     {"command=" + std::string(simulate->parsed() ? "simulate" : "solve"), "method=" + method,
                      "seed=" + std::to_string(common.seed), "force=" + sys.force().describe()});
      emit(common, out, os.str());
      return 0;
    }
    if (converge->parsed()) {
      const OUSystem sys = parse_system_json(read_source(common.system));
      ConvergenceSpec spec{t0, t1, base_steps, ladder, ref_factor, paths, common.seed};
      const ConvergenceReport r = convergence_study(sys, parse_state(x0_text, 2 * sys.n()), spec);
      std::ostringstream os;
      write_convergence_csv(os, r, {"command=converge", "force=" + sys.force().describe()});
      emit(common, out, os.str());
      return 0;
    }
    if (reference->parsed()) {
      const ReferenceProblem id = problem == "gbm" ? ReferenceProblem::GBM : ReferenceProblem::KozlovExp;
      const ReferenceParams prm{a, b, gbm_x0, y0, 1e-9};
      std::ostringstream os;
      if (converge_flag) {
        ConvergenceSpec spec{0.0, t1, base_steps, ladder, ref_factor, paths, common.seed};
        write_convergence_csv(os, convergence_study(id, prm, spec), {"command=reference --converge"});
      } else {
        const WienerGrid grid = sample_wiener(1, 0.0, t1, steps, common.seed, path_index);
        const ReferenceResult r = solve_reference_problem(id, prm, grid);
        write_path_csv(os, r.path, {"t", id == ReferenceProblem::GBM ? "x" : "y"},
                       {"command=reference", "problem=" + std::string(to_string(id)),
                        "seed=" + std::to_string(common.seed), "certificate=" + format_number(r.certificate)});
      }
      emit(common, out, os.str());
      return 0;
    }
  } catch (const SyntaxError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace ousym::cli
