#include "kw/specfile.hpp"

#include <cmath>
#include <charconv>
#include <cstdint>
#include <sstream>
#include <vector>

namespace kw {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_num(const std::string& tok, int line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size() || !std::isfinite(v))
    throw ParseError(line, "expected a finite number, got '" + tok + "'");
  return v;
}

long parse_int(const std::string& tok, int line) {
  long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw ParseError(line, "expected an integer, got '" + tok + "'");
  return v;
}

bool parse_bool(const std::string& tok, int line) {
  if (tok == "true" || tok == "1") return true;
  if (tok == "false" || tok == "0") return false;
  throw ParseError(line, "expected true/false, got '" + tok + "'");
}

}  // namespace

ParsedSpec parse_spec(const std::string& text) {
  ParsedSpec out;
  out.raw = text;
  ChannelSpec& ch = out.channel;
  ch.x_labels.clear();
  ch.modes.clear();
  ch.truncation = 8;

  enum class Section { none, channel, xlabels, modes, grid, verify };
  Section sec = Section::none;
  bool field_set = false;

  std::istringstream is(text);
  std::string raw_line;
  int line = 0;
  while (std::getline(is, raw_line)) {
    ++line;
    std::string l = trim(raw_line);
    if (l.empty() || l[0] == '#') continue;
    if (l.front() == '[') {
      if (l == "[channel]")
        sec = Section::channel;
      else if (l == "[xlabels]")
        sec = Section::xlabels;
      else if (l == "[modes]")
        sec = Section::modes;
      else if (l == "[grid]")
        sec = Section::grid;
      else if (l == "[verify]")
        sec = Section::verify;
      else
        throw ParseError(line, "unknown section " + l);
      continue;
    }

    if (sec == Section::xlabels) {
      for (const auto& tok : split_ws(l)) {
        for (const auto& existing : ch.x_labels)
          if (existing == tok) throw ParseError(line, "duplicate x label '" + tok + "'");
        ch.x_labels.push_back(tok);
      }
      continue;
    }

    if (sec == Section::modes) {
      const auto toks = split_ws(l);
      if (ch.x_labels.empty()) throw ParseError(line, "[modes] must follow [xlabels]");
      if (!field_set) throw ParseError(line, "[channel] field must be set before [modes]");
      const std::size_t nx = ch.x_labels.size();
      Mode m;
      if (toks.size() < 2) throw ParseError(line, "mode row needs 'kappa omega ...'");
      m.kappa = toks[0];
      m.omega = parse_num(toks[1], line);
      if (!(m.omega > 0)) throw ParseError(line, "omega must be positive");
      const std::size_t rest = toks.size() - 2;
      const bool shorthand = rest == 2 * nx;
      if (!shorthand && rest != 8 * nx)
        throw ParseError(line, "mode row needs " + std::to_string(2 + 2 * nx) + " (u only) or " +
                                   std::to_string(2 + 8 * nx) + " (u/v/ut/vt) values");
      std::size_t p = 2;
      auto next = [&] { return parse_num(toks[p++], line); };
      for (std::size_t x = 0; x < nx; ++x) {
        if (shorthand) {
          const cplx u{next(), next()};
          m.u.push_back(u);
          if (ch.field == FieldType::real_field) {
            m.v.push_back(u);
            m.ut.push_back(std::conj(u));
            m.vt.push_back(std::conj(u));
          } else {
            m.v.push_back(0.0);
            m.ut.push_back(std::conj(u));
            m.vt.push_back(0.0);
          }
        } else {
          m.u.push_back({next(), next()});
          m.v.push_back({next(), next()});
          m.ut.push_back({next(), next()});
          m.vt.push_back({next(), next()});
        }
      }
      ch.modes.push_back(std::move(m));
      continue;
    }

    const auto eq = l.find('=');
    if (eq == std::string::npos) throw ParseError(line, "expected 'key = value'");
    const std::string key = trim(l.substr(0, eq));
    const std::string val = trim(l.substr(eq + 1));
    if (val.empty()) throw ParseError(line, "missing value for '" + key + "'");

    switch (sec) {
      case Section::channel:
        if (key == "field") {
          if (val == "real")
            ch.field = FieldType::real_field;
          else if (val == "channel")
            ch.field = FieldType::channel;
          else
            throw ParseError(line, "field must be real|channel");
          field_set = true;
        } else if (key == "statistics") {
          if (val == "bose")
            ch.statistics = Statistics::bose;
          else if (val == "fermi")
            ch.statistics = Statistics::fermi;
          else
            throw ParseError(line, "statistics must be bose|fermi");
        } else if (key == "nonrel") {
          ch.nonrel = parse_bool(val, line);
        } else if (key == "hbar") {
          ch.hbar = parse_num(val, line);
        } else if (key == "truncation") {
          ch.truncation = static_cast<int>(parse_int(val, line));
        } else {
          throw ParseError(line, "unknown [channel] key '" + key + "'");
        }
        break;
      case Section::grid:
        if (key == "t0") {
          out.grid.t0 = parse_num(val, line);
          out.grid.has_t0 = true;
        } else if (key == "dt") {
          out.grid.dt = parse_num(val, line);
          out.grid.has_dt = true;
        } else if (key == "n") {
          out.grid.n = static_cast<std::size_t>(parse_int(val, line));
        } else if (key == "epsilon") {
          out.grid.epsilon = parse_num(val, line);
        } else {
          throw ParseError(line, "unknown [grid] key '" + key + "'");
        }
        break;
      case Section::verify:
        if (key == "tol_exact")
          out.verify.tol_exact = parse_num(val, line);
        else if (key == "tol_kernel")
          out.verify.tol_kernel = parse_num(val, line);
        else if (key == "tol_projected")
          out.verify.tol_projected = parse_num(val, line);
        else if (key == "seed")
          out.verify.seed = static_cast<unsigned>(parse_int(val, line));
        else if (key == "degree_cap")
          out.verify.degree_cap = static_cast<int>(parse_int(val, line));
        else if (key == "moment_cap")
          out.verify.moment_cap = static_cast<int>(parse_int(val, line));
        else if (key == "dim_cap")
          out.verify.dim_cap = static_cast<std::size_t>(parse_int(val, line));
        else
          throw ParseError(line, "unknown [verify] key '" + key + "'");
        break;
      default:
        throw ParseError(line, "'" + key + "' outside any section");
    }
  }

  if (!field_set) throw ParseError(line, "missing 'field' in [channel]");
  try {
    ch.validate();
  } catch (const SpecError& e) {
    throw ParseError(line, std::string("invariant violation: ") + e.what());
  }
  return out;
}

std::string spec_hash(const std::string& raw) {
  // FNV-1a 64
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : raw) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace kw
