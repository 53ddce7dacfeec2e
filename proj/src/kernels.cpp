#include "kw/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

namespace kw {

std::string kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::delta_plus: return "Delta+";
    case KernelKind::delta_minus: return "Delta-";
    case KernelKind::delta_f: return "Delta_F";
    case KernelKind::delta_ft: return "Delta~F";
    case KernelKind::delta_r: return "Delta_R";
    case KernelKind::delta_rt: return "Delta~R";
    case KernelKind::delta_comm: return "Delta";
    case KernelKind::g_f: return "G_F";
    case KernelKind::g_plus: return "G+";
    case KernelKind::g_r: return "G_R";
    case KernelKind::mode_g_f: return "g_F";
    case KernelKind::mode_g_plus: return "g+";
  }
  return "?";
}

namespace {

inline double theta(double x, double theta0) {
  if (x > 0) return 1.0;
  if (x < 0) return 0.0;
  return theta0;
}

cplx delta_plus_sum(const ChannelSpec& spec, int x, int xp, double tau) {
  cplx s = 0.0;
  for (const auto& m : spec.modes)
    s += m.u.at(x) * m.ut.at(xp) * std::exp(cplx{0.0, -m.omega * tau}) / (2.0 * m.omega);
  return I * s;
}

cplx delta_minus_sum(const ChannelSpec& spec, int x, int xp, double tau) {
  cplx s = 0.0;
  // note the transposed labels: v at x', vt at x
  for (const auto& m : spec.modes)
    s += m.v.at(xp) * m.vt.at(x) * std::exp(cplx{0.0, m.omega * tau}) / (2.0 * m.omega);
  return -I * spec.eps_f() * s;
}

}  // namespace

KernelValue kernel_eval(const ChannelSpec& spec, KernelKind kind, int x, int xp, double tau,
                        double theta0) {
  const bool real = spec.field == FieldType::real_field;
  if (kind == KernelKind::mode_g_f || kind == KernelKind::mode_g_plus) {
    if (x < 0 || x >= static_cast<int>(spec.n_modes())) throw SpecError("unknown mode index");
    const double w = spec.modes[x].omega;
    const cplx e = I * std::exp(cplx{0.0, -w * tau});
    if (kind == KernelKind::mode_g_plus) return {e, false};
    return {theta(tau, theta0) * e, tau == 0.0};
  }
  if ((kind == KernelKind::g_f || kind == KernelKind::g_plus || kind == KernelKind::g_r) && !real)
    throw SpecError("G_* kernels are defined for real-field specs");
  if (x < 0 || x >= static_cast<int>(spec.n_x()) || xp < 0 || xp >= static_cast<int>(spec.n_x()))
    throw SpecError("unknown x label index");

  const cplx dp = delta_plus_sum(spec, x, xp, tau);
  const cplx dm = delta_minus_sum(spec, x, xp, tau);
  const double th = theta(tau, theta0);
  const double thm = theta(-tau, theta0);
  const bool at_zero = tau == 0.0;

  switch (kind) {
    case KernelKind::delta_plus:
    case KernelKind::g_plus: return {dp, false};
    case KernelKind::delta_minus: return {dm, false};
    case KernelKind::delta_comm: return {dp + dm, false};
    case KernelKind::delta_f:
    case KernelKind::g_f: return {th * dp - thm * dm, at_zero};
    case KernelKind::delta_ft: return {th * dm - thm * dp, at_zero};
    case KernelKind::delta_r:
    case KernelKind::g_r: return {th * (dp + dm), at_zero};
    case KernelKind::delta_rt: return {-thm * (dp + dm), at_zero};
    default: break;
  }
  throw SpecError("unhandled kernel kind");
}

cplx commutator_delta(const ChannelSpec& spec, int x, int xp, double tau) {
  return kernel_eval(spec, KernelKind::delta_comm, x, xp, tau).value;
}

cplx delta_pm(double t, double eps, int sign) {
  const double s = sign >= 0 ? 1.0 : -1.0;
  return s / (2.0 * std::numbers::pi * I * (t - s * I * eps));
}

void SampledSignal::check() const {
  if (v.empty() || !std::has_single_bit(v.size())) throw GridError("n must be a power of two");
  if (!(dt > 0)) throw GridError("dt must be positive");
}

SampledSignal make_signal(std::size_t n, double dt, double eps) {
  SampledSignal s;
  s.dt = dt;
  s.eps = eps;
  s.t0 = -static_cast<double>(n / 2) * dt;
  s.v.assign(n, cplx{0.0});
  s.check();
  return s;
}

namespace {

// Iterative radix-2 FFT computing A_k = sum_j a_j e^{sgn * 2 pi i jk/n}.
void fft_core(std::vector<cplx>& a, double sgn) {
  const std::size_t n = a.size();
  if (!std::has_single_bit(n)) throw GridError("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sgn * 2.0 * std::numbers::pi / static_cast<double>(len);
    const cplx wl = std::exp(cplx{0.0, ang});
    for (std::size_t i = 0; i < n; i += len) {
      cplx w{1.0};
      for (std::size_t j = 0; j < len / 2; ++j) {
        const cplx u = a[i + j];
        const cplx t = w * a[i + j + len / 2];
        a[i + j] = u + t;
        a[i + j + len / 2] = u - t;
        w *= wl;
      }
    }
  }
}

}  // namespace

void fft_forward(std::vector<cplx>& a) { fft_core(a, +1.0); }

void fft_inverse(std::vector<cplx>& a) {
  fft_core(a, -1.0);
  const double inv = 1.0 / static_cast<double>(a.size());
  for (auto& c : a) c *= inv;
}

std::vector<double> freq_mask(std::size_t n, int sign, double theta0) {
  std::vector<double> m(n, 0.0);
  for (std::size_t k = 1; k < n / 2; ++k) m[k] = 1.0;
  m[0] = theta0;
  m[n / 2] = theta0;
  if (sign < 0)
    for (auto& x : m) x = 1.0 - x;
  return m;
}

SampledSignal freq_part(const SampledSignal& s, int sign, double theta0) {
  s.check();
  SampledSignal out = s;
  fft_forward(out.v);
  const auto mask = freq_mask(out.v.size(), sign, theta0);
  for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] *= mask[k];
  fft_inverse(out.v);
  return out;
}

dense::Matrix projector_matrix(std::size_t n, int sign, double theta0) {
  // P = F^{-1} diag(mask) F with F_kj = e^{+2 pi i kj/n}
  const auto mask = freq_mask(n, sign, theta0);
  dense::Matrix p(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<cplx> col(n, cplx{0.0});
    col[j] = 1.0;
    fft_forward(col);
    for (std::size_t k = 0; k < n; ++k) col[k] *= mask[k];
    fft_inverse(col);
    for (std::size_t i = 0; i < n; ++i) p(i, j) = col[i];
  }
  return p;
}

SampledSignal reflect(const SampledSignal& s) {
  SampledSignal out = s;
  const std::size_t n = s.v.size();
  for (std::size_t j = 0; j < n; ++j) out.v[j] = s.v[(n - j) % n];
  return out;
}

SampledSignal damped(const SampledSignal& s) {
  SampledSignal out = s;
  if (s.eps <= 0.0) return out;
  for (std::size_t j = 0; j < out.v.size(); ++j) out.v[j] *= std::exp(-s.eps * std::abs(s.time(j)));
  return out;
}

VerificationGrid build_verification_grid(const ChannelSpec& spec, std::size_t n, double snap_tol,
                                         double dt_override, double eps_override) {
  if (!std::has_single_bit(n) || n < 16) throw GridError("grid size must be a power of two >= 16");
  double wmax = 0.0;
  for (const auto& m : spec.modes) wmax = std::max(wmax, m.omega);

  VerificationGrid g;
  g.n = n;
  // Nyquist margin 4x: wmax <= (pi/dt)/4, i.e. wmax maps to bin <= n/8.
  g.dt = std::numbers::pi / (4.0 * wmax);
  if (dt_override > 0.0) {
    if (wmax * dt_override > std::numbers::pi / 4.0 + 1e-12)
      throw GridError("Nyquist violation: need max omega * dt <= pi/4");
    g.dt = dt_override;
  }
  const double dw = 2.0 * std::numbers::pi / (static_cast<double>(n) * g.dt);
  g.eps = eps_override >= 0.0 ? eps_override : 4.0 / (static_cast<double>(n) * g.dt);
  g.t0 = -static_cast<double>(n / 2) * g.dt;

  g.snapped_spec = spec;
  for (auto& m : g.snapped_spec.modes) {
    const double bins = m.omega / dw;
    double snapped = std::max(1.0, std::round(bins)) * dw;
    const double rel = std::abs(snapped - m.omega) / m.omega;
    g.max_snap_rel = std::max(g.max_snap_rel, rel);
    if (rel > snap_tol) g.snapped = true;
    m.omega = snapped;
  }
  return g;
}

SampledSignal sample_kernel_periodized(const ChannelSpec& spec, KernelKind kind, int x, int xp,
                                       const VerificationGrid& grid, double theta0) {
  SampledSignal s = make_signal(grid.n, grid.dt);
  const std::size_t n = grid.n;
  for (std::size_t j = 0; j < n; ++j) {
    const double tau = s.time(j);
    auto kv = kernel_eval(spec, kind, x, xp, tau, theta0);
    s.v[j] = kv.value;
  }
  // Periodic step convention: the wrap point (j = 0, tau = -T/2 == +T/2)
  // carries the theta(0) weight for every theta-bearing kernel.
  const bool theta_bearing = kind == KernelKind::delta_f || kind == KernelKind::delta_ft ||
                             kind == KernelKind::delta_r || kind == KernelKind::delta_rt ||
                             kind == KernelKind::g_f || kind == KernelKind::g_r ||
                             kind == KernelKind::mode_g_f;
  if (theta_bearing && n > 0) {
    const double tau = s.time(0);
    const cplx dp = kernel_eval(spec, kind == KernelKind::mode_g_f ? KernelKind::mode_g_plus
                                                                   : KernelKind::delta_plus,
                                x, xp, tau)
                        .value;
    switch (kind) {
      case KernelKind::mode_g_f: s.v[0] = theta0 * dp; break;
      case KernelKind::delta_f:
      case KernelKind::g_f: {
        const cplx dm = kernel_eval(spec, KernelKind::delta_minus, x, xp, tau).value;
        s.v[0] = theta0 * dp - (1.0 - theta0) * dm;
        break;
      }
      case KernelKind::delta_ft: {
        const cplx dm = kernel_eval(spec, KernelKind::delta_minus, x, xp, tau).value;
        s.v[0] = theta0 * dm - (1.0 - theta0) * dp;
        break;
      }
      case KernelKind::delta_r:
      case KernelKind::g_r: {
        const cplx d = commutator_delta(spec, x, xp, tau);
        s.v[0] = theta0 * d;
        break;
      }
      case KernelKind::delta_rt: {
        const cplx d = commutator_delta(spec, x, xp, tau);
        s.v[0] = -(1.0 - theta0) * d;
        break;
      }
      default: break;
    }
  }
  return s;
}

bool ResponseReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const IdentityCheck& c) { return c.pass; });
}

double ResponseReport::worst_error() const {
  double m = 0.0;
  for (const auto& c : checks) m = std::max(m, c.max_error);
  return m;
}

namespace {

double max_diff(const SampledSignal& a, const SampledSignal& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.v.size(); ++j) m = std::max(m, std::abs(a.v[j] - b.v[j]));
  return m;
}

SampledSignal sum(const SampledSignal& a, const SampledSignal& b, double sb = 1.0) {
  SampledSignal out = a;
  for (std::size_t j = 0; j < out.v.size(); ++j) out.v[j] += sb * b.v[j];
  return out;
}

}  // namespace

ResponseReport verify_response_identities(const ChannelSpec& spec, const VerificationGrid& grid,
                                          const ResponseTolerances& tol) {
  if (spec.n_x() != grid.snapped_spec.n_x() || spec.n_modes() != grid.snapped_spec.n_modes())
    throw GridError("verification grid was built for a different spec");
  ResponseReport rep;
  rep.snapped = grid.snapped;
  rep.max_snap_rel = grid.max_snap_rel;
  const ChannelSpec& s = grid.snapped_spec;  // frequencies resolved on the grid
  const int nx = static_cast<int>(s.n_x());
  const bool real = s.field == FieldType::real_field;

  auto add = [&rep](std::string name, double err, double tolv) {
    rep.checks.push_back({std::move(name), err, tolv, err <= tolv});
  };

  for (int x = 0; x < nx; ++x) {
    for (int xp = 0; xp < nx; ++xp) {
      const std::string at = "(" + s.x_labels[x] + "," + s.x_labels[xp] + ")";
      const auto Dp = sample_kernel_periodized(s, KernelKind::delta_plus, x, xp, grid);
      const auto Dm = sample_kernel_periodized(s, KernelKind::delta_minus, x, xp, grid);
      const auto DF = sample_kernel_periodized(s, KernelKind::delta_f, x, xp, grid);
      const auto DFt = sample_kernel_periodized(s, KernelKind::delta_ft, x, xp, grid);
      const auto DR = sample_kernel_periodized(s, KernelKind::delta_r, x, xp, grid);
      const auto DRt = sample_kernel_periodized(s, KernelKind::delta_rt, x, xp, grid);

      if (s.nonrel) {
        // Algebraic, no projection: Delta_F = Delta_R, Delta~F = Delta~R,
        // Delta+ = Delta_R - Delta~R, Delta- = 0.
        add("nonrel Delta_F=Delta_R " + at, max_diff(DF, DR), tol.exact);
        add("nonrel Delta~F=Delta~R " + at, max_diff(DFt, DRt), tol.exact);
        add("nonrel Delta+=Delta_R-Delta~R " + at, max_diff(Dp, sum(DR, DRt, -1.0)), tol.exact);
        double dm_max = 0.0;
        for (const auto& v : Dm.v) dm_max = std::max(dm_max, std::abs(v));
        add("nonrel Delta-=0 " + at, dm_max, tol.exact);
        continue;
      }

      const auto DRp = freq_part(DR, +1);
      const auto DRm = freq_part(DR, -1);
      const auto DRtp = freq_part(DRt, +1);
      const auto DRtm = freq_part(DRt, -1);

      add("Delta+ = Delta_R(+) - Delta~R(+) " + at, max_diff(Dp, sum(DRp, DRtp, -1.0)),
          tol.projected);
      add("Delta- = Delta_R(-) - Delta~R(-) " + at, max_diff(Dm, sum(DRm, DRtm, -1.0)),
          tol.projected);
      add("Delta_F = Delta_R(+) + Delta~R(-) " + at, max_diff(DF, sum(DRp, DRtm)),
          tol.projected);
      add("Delta~F = Delta_R(-) + Delta~R(+) " + at, max_diff(DFt, sum(DRm, DRtp)),
          tol.projected);

      if (real) {
        // Reflected-argument forms: G_F(x,x',tau) = G_R(+)(x,x',tau) + G_R(+)(x',x,-tau)
        // and G+(x,x',tau) = G_R(+)(x,x',tau) - G_R(-)(x',x,-tau).
        const auto DRx = sample_kernel_periodized(s, KernelKind::delta_r, xp, x, grid);
        const auto refl_p = reflect(freq_part(DRx, +1));
        const auto refl_m = reflect(freq_part(DRx, -1));
        add("G_F = G_R(+) + refl G_R(+) " + at, max_diff(DF, sum(DRp, refl_p)), tol.projected);
        add("G+ = G_R(+) - refl G_R(-) " + at, max_diff(Dp, sum(DRp, refl_m, -1.0)),
            tol.projected);
      }
    }
  }

  // Diagnostic: the damped-DFT estimator of the same identity.  Its floor is
  // O(eps) from the Lorentzian tails the damping smears across omega = 0, so
  // it is reported but never gates.
  if (!s.nonrel) {
    SampledSignal df = sample_kernel_periodized(s, KernelKind::delta_f, 0, 0, grid);
    SampledSignal dr = sample_kernel_periodized(s, KernelKind::delta_r, 0, 0, grid);
    SampledSignal drt = sample_kernel_periodized(s, KernelKind::delta_rt, 0, 0, grid);
    df.eps = dr.eps = drt.eps = grid.eps;
    const auto lhs = damped(df);
    const auto rhs = sum(freq_part(damped(dr), +1), freq_part(damped(drt), -1));
    rep.notes.push_back("damped-DFT estimator of the Feynman identity at eps=" +
                        std::to_string(grid.eps) + ": max error " +
                        std::to_string(max_diff(lhs, rhs)));
  }

  // tilde Delta_R is defined with transposed arguments; print a probe lag in
  // both conventions to keep the sign of time unambiguous.
  {
    const double tau = 3.0 * grid.dt;
    const cplx own = kernel_eval(s, KernelKind::delta_rt, 0, 0, tau).value;
    const cplx other = kernel_eval(s, KernelKind::delta_rt, 0, 0, -tau).value;
    rep.notes.push_back("Delta~R(x1,x1,+" + std::to_string(tau) + ") = (" +
                        std::to_string(own.real()) + "," + std::to_string(own.imag()) +
                        "); transposed-time argument: (" + std::to_string(other.real()) + "," +
                        std::to_string(other.imag()) + ")");
  }
  return rep;
}

}  // namespace kw
