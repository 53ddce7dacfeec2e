#pragma once

#include <string>

#include "kw/channel.hpp"
#include "kw/types.hpp"

namespace kw {

struct ParseError : std::runtime_error {
  int line;
  ParseError(int l, const std::string& msg)
      : std::runtime_error("line " + std::to_string(l) + ": " + msg), line(l) {}
};

struct GridConfig {
  double t0 = 0.0;   // 0 = centered automatically
  double dt = 0.0;   // 0 = derived from the mode frequencies
  std::size_t n = 1024;
  double epsilon = -1.0;  // <0 = default 4/(n dt)
  bool has_t0 = false, has_dt = false;
};

struct VerifyConfig {
  double tol_exact = 1e-12;
  double tol_kernel = 1e-9;
  double tol_projected = 1e-6;
  unsigned seed = 1;
  int degree_cap = 4;
  int moment_cap = 4;
  std::size_t dim_cap = 4096;
};

struct ParsedSpec {
  ChannelSpec channel;
  GridConfig grid;
  VerifyConfig verify;
  std::string raw;  // original text (hashed into reports)
};

/// Sectioned key/value format, first-error diagnostics with line numbers:
///
///   [channel]
///   field = real | channel
///   statistics = bose | fermi
///   nonrel = true | false
///   hbar = 1.0
///   truncation = 8
///   [xlabels]
///   x1 x2
///   [modes]
///   # kappa omega  u.re u.im [v.re v.im ut.re ut.im vt.re vt.im] per label
///   k1 1.0  1 0
///   [grid]
///   n = 1024
///   [verify]
///   seed = 1
///
/// Real-field modes take one complex u per label (the tilde tables are the
/// conjugates); channel modes take the full u/v/ut/vt quadruple per label.
/// Unknown keys are rejected.
ParsedSpec parse_spec(const std::string& text);

std::string spec_hash(const std::string& raw);

}  // namespace kw
