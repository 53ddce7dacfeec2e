#pragma once

#include <string>
#include <vector>

#include "kw/types.hpp"

namespace kw {

enum class FieldType { real_field, channel };

/// Mode data for one kappa: frequency plus the four mode functions
/// tabulated on the spec's x-label set (one entry per label, in order).
struct Mode {
  std::string kappa;
  double omega = 1.0;
  std::vector<cplx> u, v, ut, vt;
};

/// A linear quantum channel: a pair of tilde-conjugate free fields with
/// independent particle/antiparticle mode functions.  A real (Hermitian)
/// field is carried as the identified special case v = u, ut = vt = conj(u),
/// which reproduces its kernels through the same mode sums.
struct ChannelSpec {
  Statistics statistics = Statistics::bose;
  FieldType field = FieldType::channel;
  bool nonrel = false;
  double hbar = 1.0;
  int truncation = 6;  // bosonic ladder cutoff N_trunc
  std::vector<std::string> x_labels;
  std::vector<Mode> modes;

  double eps_f() const { return kw::eps_f(statistics); }
  std::size_t n_x() const { return x_labels.size(); }
  std::size_t n_modes() const { return modes.size(); }

  int x_index(const std::string& label) const;

  /// Enforces the structural invariants; throws SpecError with a message
  /// naming the offending mode or label.
  void validate() const;
};

/// Harmonic oscillator: real field, one mode omega0, one x label, u = 1.
ChannelSpec oscillator_spec(double omega0 = 1.0, double hbar = 1.0, int truncation = 8);

/// Real field from frequencies and u-tables; builds the identified tables.
ChannelSpec real_field_spec(const std::vector<std::string>& x_labels,
                            const std::vector<std::pair<double, std::vector<cplx>>>& modes,
                            double hbar = 1.0, int truncation = 6);

}  // namespace kw
