#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace kw {

using cplx = std::complex<double>;

inline constexpr cplx I{0.0, 1.0};

enum class Statistics { bose, fermi };

/// Statistics sign factor: +1 for bosons, -1 for fermions.
inline double eps_f(Statistics s) { return s == Statistics::bose ? 1.0 : -1.0; }

struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionCapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TieAtEqualTimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MixedParityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kw
