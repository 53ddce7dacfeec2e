#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kw/channel.hpp"
#include "kw/dense.hpp"
#include "kw/types.hpp"

namespace kw {

enum class KernelKind : std::int8_t {
  delta_plus,   // Delta^(+)
  delta_minus,  // Delta^(-)
  delta_f,      // Delta_F
  delta_ft,     // tilde Delta_F
  delta_r,      // Delta_R
  delta_rt,     // tilde Delta_R (transposed-argument definition)
  delta_comm,   // Delta = Delta^(+) + Delta^(-)
  g_f,          // real-field Feynman kernel
  g_plus,       // real-field frequency-positive pair kernel
  g_r,          // real-field retarded (transfer) kernel
  mode_g_f,     // single-mode g_F_kappa  (x arguments index the mode)
  mode_g_plus   // single-mode g^(+)_kappa
};

std::string kernel_kind_name(KernelKind k);

struct KernelValue {
  cplx value;
  bool convention_flagged = false;  // theta(0) entered the evaluation
};

/// Closed-form mode-sum evaluation at lag tau = t - t'.  theta0 is the
/// theta(0) convention (default 1/2).  Real-field G_* kinds evaluate through
/// the identified channel tables and are only valid on real-field specs.
KernelValue kernel_eval(const ChannelSpec& spec, KernelKind kind, int x, int xp, double tau,
                        double theta0 = 0.5);

/// Delta = Delta^(+) + Delta^(-); reduces to Delta^(+) for nonrel specs.
cplx commutator_delta(const ChannelSpec& spec, int x, int xp, double tau);

/// Frequency-positive/negative parts of the delta function,
/// +-1/(2 pi i (t -+ i eps)).
cplx delta_pm(double t, double eps, int sign);

/// Complex samples on a uniform grid (n a power of two), centered so that
/// sample n/2 sits at t = 0 when t0 = -n/2*dt.  eps records the e^{-eps|t|}
/// damping that was applied to the samples (0 = none).
struct SampledSignal {
  double t0 = 0.0;
  double dt = 1.0;
  double eps = 0.0;
  std::vector<cplx> v;

  std::size_t size() const { return v.size(); }
  double time(std::size_t j) const { return t0 + static_cast<double>(j) * dt; }
  void check() const;
};

SampledSignal make_signal(std::size_t n, double dt, double eps = 0.0);

/// In-place radix-2 transforms in the convention used throughout:
/// forward  F_k = sum_j f_j e^{+2 pi i jk/n}  (frequency components),
/// inverse  f_j = (1/n) sum_k F_k e^{-2 pi i jk/n}.
void fft_forward(std::vector<cplx>& a);
void fft_inverse(std::vector<cplx>& a);

/// Bin mask of the frequency-sign projector; DC and Nyquist bins carry the
/// theta(0) convention weight.
std::vector<double> freq_mask(std::size_t n, int sign, double theta0 = 0.5);

/// P^(+-): forward transform, mask the opposite-sign bins, transform back.
SampledSignal freq_part(const SampledSignal& s, int sign, double theta0 = 0.5);

/// The same projector as an explicit dense matrix (for transport checks).
dense::Matrix projector_matrix(std::size_t n, int sign, double theta0 = 0.5);

/// Reflection r(t) = s(-t) on the centered grid.
SampledSignal reflect(const SampledSignal& s);

/// Verification grid: dt chosen so that every mode frequency is resolved
/// (an exact DFT bin) with Nyquist margin >= 4x.  Frequencies that need
/// snapping beyond `snap_tol` relative are reported, and the snapped spec
/// replaces the original for grid work.
struct VerificationGrid {
  std::size_t n = 1024;
  double dt = 0.0;
  double eps = 0.0;  // default 4/(n dt)
  double t0 = 0.0;   // = -(n/2) dt
  ChannelSpec snapped_spec;
  bool snapped = false;
  double max_snap_rel = 0.0;
};

/// dt_override > 0 uses the caller's spacing instead of the derived one and
/// throws GridError when the 4x Nyquist margin is violated; eps_override >= 0
/// replaces the default damping constant 4/(n dt).
VerificationGrid build_verification_grid(const ChannelSpec& spec, std::size_t n = 1024,
                                         double snap_tol = 1e-12, double dt_override = 0.0,
                                         double eps_override = -1.0);

/// e^{-eps|t|} applied to the samples (the signal's own eps field).
SampledSignal damped(const SampledSignal& s);

/// Samples a kernel on the centered lag grid with the periodic step
/// convention: theta carries theta0 at tau = 0 and at the wrap point, so the
/// sampled retarded kernels are the exact periodic counterparts of their
/// continuum forms.  No damping is applied.
SampledSignal sample_kernel_periodized(const ChannelSpec& spec, KernelKind kind, int x, int xp,
                                       const VerificationGrid& grid, double theta0 = 0.5);

struct IdentityCheck {
  std::string name;
  double max_error = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct ResponseReport {
  std::vector<IdentityCheck> checks;
  bool snapped = false;
  double max_snap_rel = 0.0;
  std::vector<std::string> notes;

  bool pass() const;
  double worst_error() const;
};

struct ResponseTolerances {
  double exact = 1e-12;      // algebraic identities (nonrel)
  double projected = 1e-6;   // projector-level identities
};

/// Certifies the response-transformation identities on the verification
/// grid: nonrel (Delta_F = Delta_R etc.) pointwise without projection,
/// oscillator/real-field reflected identities and the four channel
/// identities through freq_part.  Also reports tilde-Delta_R in both
/// argument conventions at a probe lag.
ResponseReport verify_response_identities(const ChannelSpec& spec, const VerificationGrid& grid,
                                          const ResponseTolerances& tol = {});

}  // namespace kw
