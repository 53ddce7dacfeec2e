#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "kw/runner.hpp"

namespace {

struct CliResult {
  int exit_code;
  std::string stdout_text;
};

CliResult run_cli(const std::string& args) {
  const std::string out_path = "cli_out.tmp";
  const std::string cmd = std::string(KW_BINARY) + " " + args + " > " + out_path + " 2>&1";
  const int rc = std::system(cmd.c_str());
  std::ifstream in(out_path);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::remove(out_path.c_str());
  return {WEXITSTATUS(rc), ss.str()};
}

const std::string kSpecDir = KW_SPEC_DIR;

}  // namespace

TEST_CASE("expect evaluates the oscillator pair value") {
  const auto r = run_cli("expect --spec " + kSpecDir +
                         "/oscillator.kw --expr \"vev[ Q-(x1,2.0) Q+(x1,1.0) ]\"");
  CHECK(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.stdout_text);
  // 0.5 e^{-i(t-t')} with t = 2, t' = 1
  CHECK(j["value"]["re"].get<double>() == doctest::Approx(0.5 * std::cos(1.0)).epsilon(1e-12));
  CHECK(j["value"]["im"].get<double>() == doctest::Approx(-0.5 * std::sin(1.0)).epsilon(1e-12));
  CHECK(j["pass"].get<bool>());
}

TEST_CASE("expand reports the two-term pair expansion") {
  const auto r = run_cli("expand --spec " + kSpecDir +
                         "/oscillator.kw --expr \"Q+(x1,0.5) Q+(x1,0.0)\"");
  CHECK(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.stdout_text);
  CHECK(j["n_terms"].get<int>() == 2);
}

TEST_CASE("malformed input exits 2 with a diagnostic") {
  const auto bad = kSpecDir + "/__missing__.kw";
  const auto r = run_cli("expect --spec " + bad + " --expr \"Q+(x1,0.0)\"");
  CHECK(r.exit_code == 2);
  const auto j = nlohmann::json::parse(r.stdout_text);
  CHECK(j.contains("error"));

  // syntactically bad expression
  const auto r2 =
      run_cli("expect --spec " + kSpecDir + "/oscillator.kw --expr \"Q(x1,1.0)\"");
  CHECK(r2.exit_code == 2);
}

TEST_CASE("byte-identical output for identical inputs") {
  const std::string args = "expand --spec " + kSpecDir +
                           "/channel_fermi.kw --expr \"psi+(x1,1.0) tpsi-(x2,0.5)\"";
  const auto a = run_cli(args);
  const auto b = run_cli(args);
  CHECK(a.exit_code == 0);
  CHECK(a.stdout_text == b.stdout_text);
}

TEST_CASE("verify grassmann on the bundled oscillator spec") {
  const auto r = run_cli("verify grassmann --spec " + kSpecDir + "/oscillator.kw");
  CHECK(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.stdout_text);
  CHECK(j["pass"].get<bool>());
}

TEST_CASE("an unreachable tolerance exits 1") {
  const auto r =
      run_cli("verify kernels --spec " + kSpecDir + "/channel_bose.kw --tol 1e-30");
  CHECK(r.exit_code == 1);
  const auto j = nlohmann::json::parse(r.stdout_text);
  CHECK_FALSE(j["pass"].get<bool>());
}

TEST_CASE("in-process run_command mirrors the binary") {
  const auto res = kw::run_command({"expect", "--spec", kSpecDir + "/oscillator.kw", "--expr",
                                    "vev[ Q-(x1,2.0) Q+(x1,1.0) ]"});
  CHECK(res.exit_code == 0);
  CHECK(res.report["pass"].get<bool>());
}
