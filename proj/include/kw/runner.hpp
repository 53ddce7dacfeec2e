#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "kw/specfile.hpp"

namespace kw {

using ojson = nlohmann::ordered_json;

ojson to_json(cplx c);

struct RunResult {
  int exit_code = 0;  // 0 pass, 1 verification failure, 2 input error
  ojson report;
};

/// Library entry point behind the CLI: args are everything after the program
/// name.  Never throws; input errors come back as exit code 2 with a
/// diagnostic report.
RunResult run_command(const std::vector<std::string>& args);

/// Individual verification suites (the `verify` subcommand assembles these).
ojson verify_grassmann_suite(const VerifyConfig& cfg);
ojson verify_kernels_suite(const ParsedSpec& spec);
ojson verify_wick_suite(const ParsedSpec& spec, int n_products);
ojson verify_causal_suite(const ParsedSpec& spec, int n_sources, int n_polys);

}  // namespace kw
