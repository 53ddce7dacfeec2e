#include <iostream>
#include <string>
#include <vector>

#include "kw/runner.hpp"

namespace {

void usage() {
  std::cout <<
      R"(kw - Keldysh-contour Wick engine

usage:
  kw expand  --spec PATH --expr EXPR|PATH [--json PATH]
  kw expect  --spec PATH --expr EXPR|PATH [--tol T] [--json PATH]
  kw phivac  --spec PATH [--seed N] [--json PATH]
  kw verify  {kernels|causal|wick|grassmann|all} --spec PATH
             [--tol T] [--seed N] [--json PATH]

The expression DSL is a product of branch-tagged operators, optionally
wrapped in vev[...]:   vev[ Q-(x1,2.0) Q+(x1,1.0) ]
Exit codes: 0 pass, 1 verification failure, 2 input error.
KW_DIM_CAP overrides the oracle dimension cap.
)";
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty() || args[0] == "--help" || args[0] == "-h") {
    usage();
    return args.empty() ? 2 : 0;
  }
  const auto res = kw::run_command(args);
  std::cout << res.report.dump(2) << '\n';
  return res.exit_code;
}
