#include "kw/channel.hpp"

#include <cmath>

namespace kw {

int ChannelSpec::x_index(const std::string& label) const {
  for (std::size_t i = 0; i < x_labels.size(); ++i)
    if (x_labels[i] == label) return static_cast<int>(i);
  throw SpecError("unknown x label '" + label + "'");
}

void ChannelSpec::validate() const {
  if (x_labels.empty()) throw SpecError("no x labels");
  if (modes.empty()) throw SpecError("no modes");
  if (hbar <= 0) throw SpecError("hbar must be positive");
  if (field == FieldType::real_field && statistics == Statistics::fermi)
    throw SpecError("real field must be bosonic");
  if (field == FieldType::real_field && nonrel)
    throw SpecError("nonrel flag applies to channels, not the real field");
  for (const auto& m : modes) {
    if (!(m.omega > 0)) throw SpecError("mode " + m.kappa + ": omega must be positive");
    const std::size_t nx = x_labels.size();
    if (m.u.size() != nx || m.v.size() != nx || m.ut.size() != nx || m.vt.size() != nx)
      throw SpecError("mode " + m.kappa + ": mode tables must cover every x label");
    if (nonrel) {
      for (std::size_t i = 0; i < nx; ++i)
        if (m.v[i] != 0.0 || m.vt[i] != 0.0)
          throw SpecError("mode " + m.kappa + ": nonrel requires v = vt = 0");
    }
    if (field == FieldType::real_field) {
      for (std::size_t i = 0; i < nx; ++i) {
        if (m.v[i] != m.u[i] || m.ut[i] != std::conj(m.u[i]) || m.vt[i] != std::conj(m.u[i]))
          throw SpecError("mode " + m.kappa + ": real field requires identified tables");
      }
    }
  }
}

ChannelSpec oscillator_spec(double omega0, double hbar, int truncation) {
  return real_field_spec({"x1"}, {{omega0, {cplx{1.0}}}}, hbar, truncation);
}

ChannelSpec real_field_spec(const std::vector<std::string>& x_labels,
                            const std::vector<std::pair<double, std::vector<cplx>>>& modes,
                            double hbar, int truncation) {
  ChannelSpec s;
  s.statistics = Statistics::bose;
  s.field = FieldType::real_field;
  s.nonrel = false;
  s.hbar = hbar;
  s.truncation = truncation;
  s.x_labels = x_labels;
  int idx = 0;
  for (const auto& [omega, u] : modes) {
    Mode m;
    m.kappa = "k" + std::to_string(++idx);
    m.omega = omega;
    m.u = u;
    m.v = u;
    m.ut.reserve(u.size());
    for (auto c : u) m.ut.push_back(std::conj(c));
    m.vt = m.ut;
    s.modes.push_back(std::move(m));
  }
  s.validate();
  return s;
}

}  // namespace kw
