#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ousym/cli.hpp"

using namespace ousym;
using json = nlohmann::json;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome r;
  r.code = cli::run_command(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

const std::string kLinear = R"({"n":1,"beta":[3],"mu":[1],"force":{"type":"linear","L":[[4]],"K":[0]}})";
const std::string kCubic = R"({"n":1,"beta":[1],"mu":[1],"force":{"type":"expr","expr":"x1^3"}})";
const std::string kConst = R"({"n":1,"beta":[1],"mu":[2],"force":{"type":"constant","c":[3]}})";

void expect_keys(const json& j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) EXPECT_TRUE(j.contains(k)) << k;
}

}  // namespace

TEST(Cli, ClassifyCubicFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "ousym_cubic.json";
  std::ofstream(path) << kCubic;
  const Outcome r = run({"classify", "--system", path.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["case_tag"], "NoRealSimple");
  expect_keys(j, {"system", "force_tag", "case_tag", "annotation", "module_rank", "generators", "x_set", "y_set",
                  "eigen_data", "wsym_candidates", "commutators", "probes"});
  EXPECT_EQ(j["probes"]["seed"], 0);
  std::filesystem::remove(path);
}

TEST(Cli, ClassifyLinearSchema) {
  const Outcome r = run({"classify", "--system", kLinear, "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["case_tag"], "LinearPair1D");
  ASSERT_EQ(j["generators"].size(), 2u);
  for (const auto& g : j["generators"]) {
    expect_keys(g, {"label", "family", "R", "max_residual"});
    EXPECT_LE(g["max_residual"].get<double>(), 1e-6);
    EXPECT_EQ(g["family"]["name"], "ExpDecay");
  }
  expect_keys(j["eigen_data"], {"M", "lambda", "kappa_plus", "kappa_minus"});
  EXPECT_EQ(j["probes"]["seed"], 3);
}

TEST(Cli, Invariants) {
  const Outcome r = run({"invariants", "--system", kConst});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["basis_kind"], "ChiBasis");
  ASSERT_EQ(j["generators"].size(), 1u);
  expect_keys(j["generators"][0], {"expression", "a_x", "a_v", "a_w", "a_z", "a_t", "a_0", "max_residual"});
  EXPECT_DOUBLE_EQ(j["generators"][0]["a_t"].get<double>(), 1.5);
}

TEST(Cli, VerifyShorthand) {
  const Outcome r = run({"verify", "--system", kLinear, "--generator", "expdecay:i=1,kappa=4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_LE(j["max_residual"].get<double>(), 1e-6);
  EXPECT_TRUE(j["passes"].get<bool>());
  const Outcome bad = run({"verify", "--system", kLinear, "--generator", "expdecay:i=1,kappa=4.01"});
  ASSERT_EQ(bad.code, 0);
  EXPECT_GE(json::parse(bad.out)["max_residual"].get<double>(), 1e-3);
}

TEST(Cli, VerifyJsonAndModuleScaled) {
  const Outcome a = run({"verify", "--system", kLinear, "--generator", R"({"family":"expdecay","i":1,"kappa":-1})"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_LE(json::parse(a.out)["max_residual"].get<double>(), 1e-8);
  const Outcome b = run({"verify", "--system", kLinear, "--generator", R"j({"phi":["exp(t)","exp(t)"]})j", "--engine", "fd"});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_LE(json::parse(b.out)["max_residual"].get<double>(), 1e-4);
  const Outcome c = run({"verify", "--system", kConst, "--generator", "modulescaled:base=translation,i=1,f=chi1^2"});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_LE(json::parse(c.out)["max_residual"].get<double>(), 1e-6);
  const Outcome d = run({"verify", "--system", kLinear, "--generator", "modulescaled:base=translation,i=1,f=chi1"});
  EXPECT_EQ(d.code, 1);
  EXPECT_NE(d.err.find("WrongForceClass"), std::string::npos);
}

TEST(Cli, ValidationErrorsExitOne) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"classify"}).code, 1);
  EXPECT_EQ(run({"classify", "--system", "/nonexistent/sys.json"}).code, 1);
  EXPECT_EQ(run({"classify", "--system", "{not json"}).code, 1);
  EXPECT_EQ(run({"classify", "--system", R"({"n":1,"beta":[1],"mu":[0],"force":{"type":"constant","c":[0]}})"}).code, 1);
  const Outcome syn = run({"classify", "--system", R"({"n":1,"beta":[1],"mu":[1],"force":{"type":"expr","expr":"4*x1 +"}})"});
  EXPECT_EQ(syn.code, 1);
  EXPECT_NE(syn.err.find("offset 7"), std::string::npos);
  EXPECT_EQ(run({"verify", "--system", kLinear, "--generator", "bogus:i=1"}).code, 1);
  EXPECT_EQ(run({"simulate", "--system", kLinear, "--x0", "1,2,3"}).code, 1);
  EXPECT_EQ(run({"solve", "--system", kCubic}).code, 1);
  EXPECT_EQ(run({"simulate", "--system", kLinear, "--steps", "0"}).code, 1);
}

TEST(Cli, HelpExitsZero) {
  const Outcome r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("classify"), std::string::npos);
}

TEST(Cli, SimulateAndSolveCsv) {
  for (const char* cmd : {"simulate", "solve"}) {
    const Outcome r = run({cmd, "--system", kLinear, "--steps", "10", "--x0", "0.5,0", "--seed", "9"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("# seed=9"), std::string::npos);
    EXPECT_NE(r.out.find("t,x1,v1\n0,0.5,0\n"), std::string::npos);
    std::size_t rows = 0;
    std::istringstream in(r.out);
    for (std::string line; std::getline(in, line);)
      if (!line.empty() && line[0] != '#') ++rows;
    EXPECT_EQ(rows, 12u);
  }
}

TEST(Cli, ConvergeReport) {
  const Outcome r = run({"converge", "--system", kConst, "--paths", "50", "--ladder", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t rows = 0;
  std::string footer;
  std::istringstream in(r.out);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("# order=", 0) == 0) footer = line;
    else if (!line.empty() && line[0] != '#' && line != "dt,strong_error") ++rows;
  }
  EXPECT_EQ(rows, 5u);
  ASSERT_FALSE(footer.empty());
  const double order = std::stod(footer.substr(8));
  EXPECT_GE(order, 0.8);
  EXPECT_LE(order, 1.2);
  EXPECT_NE(r.out.find("# seed=0,"), std::string::npos);
}

TEST(Cli, Reference) {
  const Outcome g = run({"reference", "--problem", "gbm", "--steps", "100"});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_NE(g.out.find("t,x\n"), std::string::npos);
  const Outcome k = run({"reference", "--problem", "kozlov_exp", "--steps", "100", "--seed", "2"});
  ASSERT_EQ(k.code, 0) << k.err;
  EXPECT_NE(k.out.find("t,y\n"), std::string::npos);
  EXPECT_NE(k.out.find("# seed=2"), std::string::npos);
}

TEST(Cli, OutputFile) {
  const auto path = std::filesystem::temp_directory_path() / "ousym_cli_out.json";
  const Outcome r = run({"invariants", "--system", kConst, "--out", path.string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(path);
  const json j = json::parse(in);
  EXPECT_EQ(j["basis_kind"], "ChiBasis");
  std::filesystem::remove(path);
}

TEST(Cli, SystemRoundTrip) {
  const OUSystem s = cli::parse_system_json(kLinear);
  const OUSystem t = cli::parse_system_json(cli::system_to_json(s));
  EXPECT_EQ(t.n(), 1);
  EXPECT_EQ(t.beta(), s.beta());
  EXPECT_EQ(cli::system_to_json(t), cli::system_to_json(s));
}
