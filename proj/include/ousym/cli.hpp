#pragma once

// Command-line surface. `run_command` is the whole program minus main() so it
// can be driven from tests.
//
// System JSON:
//   {"n": 1, "beta": [3], "mu": [1],
//    "force": {"type": "constant", "c": [0]}
//           | {"type": "linear", "L": [[4]], "K": [0]}
//           | {"type": "expr", "expr": "x1^3"}}
//
// Generator specs for `verify`, either JSON or shorthand (indices 1-based):
//   expdecay:i=1,kappa=4
//   translation:i=2
//   modulescaled:base=expdecay,i=1,kappa=2,f=sin(chi1)
//   {"family": "expdecay", "i": 1, "kappa": 4}
//   {"phi": ["exp(-t)", "-exp(-t)"], "R": [[0, 0], [0, 0]]}

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ousym/classify.hpp"
#include "ousym/model.hpp"
#include "ousym/symmetry.hpp"

namespace ousym::cli {

/// Errors: InvalidArgument for schema violations, plus build_ou_system errors.
OUSystem parse_system_json(std::string_view text);
std::string system_to_json(const OUSystem& sys);

/// Errors: InvalidArgument, WrongForceClass, NotAnInvariant, parse errors.
SymmetryGenerator parse_generator(std::string_view spec, const OUSystem& sys);

std::string algebra_to_json(const SymmetryAlgebra& alg, const OUSystem& sys, int probes, std::uint64_t seed);
std::string invariants_to_json(const InvariantSet& inv, const OUSystem& sys, int probes, std::uint64_t seed);

/// args excludes the program name. Exit codes: 0 ok, 1 validation error,
/// 2 internal error.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ousym::cli
