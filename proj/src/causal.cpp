#include "kw/causal.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "kw/wick.hpp"

namespace kw {

Regime regime_of(const ChannelSpec& spec) {
  if (spec.field == FieldType::real_field) return Regime::osc_real;
  return spec.nonrel ? Regime::nonrel : Regime::semirel;
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::osc_real: return "osc/real";
    case Regime::semirel: return "semirel";
    case Regime::nonrel: return "nonrel";
  }
  return "?";
}

namespace {

SampledSignal lin2(cplx a, const SampledSignal& f, cplx b, const SampledSignal& g) {
  SampledSignal out = f;
  for (std::size_t j = 0; j < out.v.size(); ++j) out.v[j] = a * f.v[j] + b * g.v[j];
  return out;
}

SignalField sf_lin(cplx a, const SignalField& f, cplx b, const SignalField& g) {
  SignalField out;
  out.reserve(f.size());
  for (std::size_t x = 0; x < f.size(); ++x) out.push_back(lin2(a, f[x], b, g[x]));
  return out;
}

SignalField sf_scale(cplx a, const SignalField& f) {
  SignalField out = f;
  for (auto& s : out)
    for (auto& v : s.v) v *= a;
  return out;
}

SignalField sf_proj(const SignalField& f, int sign, double theta0 = 0.5) {
  SignalField out;
  out.reserve(f.size());
  for (const auto& s : f) out.push_back(freq_part(s, sign, theta0));
  return out;
}

SignalField sf_proj_lin(cplx a, const SignalField& f, int sa, cplx b, const SignalField& g,
                        int sb) {
  SignalField out;
  out.reserve(f.size());
  for (std::size_t x = 0; x < f.size(); ++x)
    out.push_back(lin2(a, freq_part(f[x], sa), b, freq_part(g[x], sb)));
  return out;
}

}  // namespace

CausalSources to_causal_sources(Regime r, const ChannelSpec& spec, const BranchSources& b) {
  CausalSources c;
  const double hb = spec.hbar;
  switch (r) {
    case Regime::osc_real:
      c.eta = sf_lin(1.0, b.eta_p, -1.0, b.eta_m);
      c.src_e = sf_proj_lin(hb, b.eta_p, +1, hb, b.eta_m, -1);
      break;
    case Regime::semirel:
      c.eta = sf_lin(-1.0, b.eta_p, 1.0, b.eta_m);
      c.src_e = sf_proj_lin(hb, b.eta_p, +1, hb, b.eta_m, -1);
      c.etat = sf_lin(1.0, b.etat_p, -1.0, b.etat_m);
      c.srct_e = sf_proj_lin(hb, b.etat_p, +1, hb, b.etat_m, -1);
      break;
    case Regime::nonrel:
      c.eta = sf_lin(-1.0, b.eta_p, 1.0, b.eta_m);
      c.src_e = sf_scale(hb, b.eta_p);
      c.etat = sf_lin(1.0, b.etat_p, -1.0, b.etat_m);
      c.srct_e = sf_scale(hb, b.etat_m);
      break;
  }
  return c;
}

BranchSources from_causal_sources(Regime r, const ChannelSpec& spec, const CausalSources& c) {
  BranchSources b;
  const double ih = 1.0 / spec.hbar;
  switch (r) {
    case Regime::osc_real:
      b.eta_p = sf_lin(ih, c.src_e, 1.0, sf_proj(c.eta, -1));
      b.eta_m = sf_lin(ih, c.src_e, -1.0, sf_proj(c.eta, +1));
      break;
    case Regime::semirel:
      b.eta_p = sf_lin(ih, c.src_e, -1.0, sf_proj(c.eta, -1));
      b.eta_m = sf_lin(ih, c.src_e, 1.0, sf_proj(c.eta, +1));
      b.etat_p = sf_lin(ih, c.srct_e, 1.0, sf_proj(c.etat, -1));
      b.etat_m = sf_lin(ih, c.srct_e, -1.0, sf_proj(c.etat, +1));
      break;
    case Regime::nonrel:
      b.eta_p = sf_scale(ih, c.src_e);
      b.eta_m = sf_lin(1.0, c.eta, ih, c.src_e);
      b.etat_p = sf_lin(1.0, c.etat, ih, c.srct_e);
      b.etat_m = sf_scale(ih, c.srct_e);
      break;
  }
  return b;
}

CausalFields to_causal_fields(Regime r, const ChannelSpec& spec, const BranchFields& b) {
  CausalFields c;
  const double ih = 1.0 / spec.hbar;
  switch (r) {
    case Regime::osc_real:
      c.zeta = sf_lin(ih, b.f_p, -ih, b.f_m);
      c.fe = sf_proj_lin(1.0, b.f_p, +1, 1.0, b.f_m, -1);
      break;
    case Regime::semirel:
      c.zeta = sf_lin(-ih, b.f_p, ih, b.f_m);
      c.fe = sf_proj_lin(1.0, b.f_p, +1, 1.0, b.f_m, -1);
      c.zetat = sf_lin(ih, b.ft_p, -ih, b.ft_m);
      c.fte = sf_proj_lin(1.0, b.ft_p, +1, 1.0, b.ft_m, -1);
      break;
    case Regime::nonrel:
      c.zeta = sf_lin(-ih, b.f_p, ih, b.f_m);
      c.fe = b.f_p;
      c.zetat = sf_lin(ih, b.ft_p, -ih, b.ft_m);
      c.fte = b.ft_m;
      break;
  }
  return c;
}

BranchFields from_causal_fields(Regime r, const ChannelSpec& spec, const CausalFields& c) {
  BranchFields b;
  const double hb = spec.hbar;
  switch (r) {
    case Regime::osc_real:
      b.f_p = sf_lin(1.0, c.fe, hb, sf_proj(c.zeta, -1));
      b.f_m = sf_lin(1.0, c.fe, -hb, sf_proj(c.zeta, +1));
      break;
    case Regime::semirel:
      b.f_p = sf_lin(1.0, c.fe, -hb, sf_proj(c.zeta, -1));
      b.f_m = sf_lin(1.0, c.fe, hb, sf_proj(c.zeta, +1));
      b.ft_p = sf_lin(1.0, c.fte, hb, sf_proj(c.zetat, -1));
      b.ft_m = sf_lin(1.0, c.fte, -hb, sf_proj(c.zetat, +1));
      break;
    case Regime::nonrel:
      b.f_p = c.fe;
      b.f_m = sf_lin(1.0, c.fe, hb, c.zeta);
      b.ft_p = sf_lin(1.0, c.fte, hb, c.zetat);
      b.ft_m = c.fte;
      break;
  }
  return b;
}

GrassmannCausalSources to_causal_sources(Regime r, const ChannelSpec& spec,
                                         const GrassmannBranchSources& b) {
  GrassmannCausalSources out;
  out.gens = b.gens;
  for (const auto& c : b.comps) out.comps.push_back(to_causal_sources(r, spec, c));
  return out;
}

GrassmannBranchSources from_causal_sources(Regime r, const ChannelSpec& spec,
                                           const GrassmannCausalSources& c) {
  GrassmannBranchSources out;
  out.gens = c.gens;
  for (const auto& comp : c.comps) out.comps.push_back(from_causal_sources(r, spec, comp));
  return out;
}

// ---------------------------------------------------------------------------
// GridKernels

namespace {

KernelKind normalize_kind(KernelKind k) {
  switch (k) {
    case KernelKind::g_f: return KernelKind::delta_f;
    case KernelKind::g_plus: return KernelKind::delta_plus;
    case KernelKind::g_r: return KernelKind::delta_r;
    default: return k;
  }
}

}  // namespace

GridKernels::GridKernels(const VerificationGrid& grid, double theta0)
    : spec_(grid.snapped_spec), grid_(grid), theta0_(theta0) {
  const int nx = static_cast<int>(spec_.n_x());
  const KernelKind kinds[] = {KernelKind::delta_plus, KernelKind::delta_minus,
                              KernelKind::delta_f,    KernelKind::delta_ft,
                              KernelKind::delta_r,    KernelKind::delta_rt};
  for (KernelKind k : kinds) {
    for (int x = 0; x < nx; ++x) {
      for (int xp = 0; xp < nx; ++xp) {
        Entry e;
        e.samples = sample_kernel_periodized(spec_, k, x, xp, grid_, theta0_);
        e.part_plus = freq_part(e.samples, +1, theta0_);
        e.part_minus = freq_part(e.samples, -1, theta0_);
        const std::size_t n = grid_.n;
        e.fft_circ.resize(n);
        for (std::size_t m = 0; m < n; ++m) e.fft_circ[m] = e.samples.v[(m + n / 2) % n];
        fft_forward(e.fft_circ);
        cache_.emplace(std::make_tuple(static_cast<int>(k), x, xp), std::move(e));
      }
    }
  }
}

const GridKernels::Entry& GridKernels::entry(KernelKind kind, int x, int xp) const {
  auto it = cache_.find(std::make_tuple(static_cast<int>(normalize_kind(kind)), x, xp));
  if (it == cache_.end()) throw GridError("kernel not cached: " + kernel_kind_name(kind));
  return it->second;
}

cplx GridKernels::at(KernelKind kind, int sigma, int x, int xp, long lag) const {
  const std::size_t n = grid_.n;
  if (lag <= -static_cast<long>(n / 2) || lag >= static_cast<long>(n / 2))
    throw GridError("lag outside the verification grid");
  const auto& e = entry(kind, x, xp);
  const std::size_t idx = static_cast<std::size_t>(lag + static_cast<long>(n / 2));
  if (sigma > 0) return e.part_plus.v[idx];
  if (sigma < 0) return e.part_minus.v[idx];
  return e.samples.v[idx];
}

SampledSignal GridKernels::convolve(KernelKind kind, int x, int xp,
                                    const SampledSignal& g) const {
  const auto& e = entry(kind, x, xp);
  SampledSignal out = g;
  fft_forward(out.v);
  for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] *= e.fft_circ[k];
  fft_inverse(out.v);
  return out;
}

cplx bilinear_form(const GridKernels& gk, KernelKind kind, const SignalField& f,
                   const SignalField& g, double* mass) {
  const std::size_t nx = gk.spec().n_x();
  if (f.size() != nx || g.size() != nx) throw GridError("signal fields do not cover the x labels");
  for (const auto& s : f)
    if (s.size() != gk.grid().n || s.dt != gk.grid().dt) throw GridError("grid mismatch");
  for (const auto& s : g)
    if (s.size() != gk.grid().n || s.dt != gk.grid().dt) throw GridError("grid mismatch");
  const double w2 = gk.grid().dt * gk.grid().dt;
  cplx s = 0.0;
  double m = 0.0;
  for (std::size_t x = 0; x < f.size(); ++x) {
    for (std::size_t xp = 0; xp < g.size(); ++xp) {
      const auto kg = gk.convolve(kind, static_cast<int>(x), static_cast<int>(xp), g[xp]);
      for (std::size_t p = 0; p < kg.v.size(); ++p) {
        s += f[x].v[p] * kg.v[p];
        if (mass) m += std::abs(f[x].v[p]) * std::abs(kg.v[p]);
      }
    }
  }
  if (mass) *mass = m * w2;
  return s * w2;
}

// ---------------------------------------------------------------------------
// Z form and the bilinear identity

namespace {

// the four addends of Z_C, kept separate so identity checks can condition
// their error on the quadrature mass that cancels
struct ZTerms {
  std::array<cplx, 4> t{};
  std::array<double, 4> mass{};

  cplx sum() const { return t[0] + t[1] + t[2] + t[3]; }
  double scale() const {
    double m = 0.0;
    for (const auto& v : t) m = std::max(m, std::abs(v));
    for (double v : mass) m = std::max(m, v);
    return m;
  }
};

ZTerms z_form_terms(Regime r, const GridKernels& gk, const BranchSources& s) {
  const ChannelSpec& spec = gk.spec();
  const cplx ih = I * spec.hbar;
  ZTerms z;
  if (r == Regime::osc_real) {
    z.t[0] = -0.5 * ih * bilinear_form(gk, KernelKind::delta_f, s.eta_p, s.eta_p, &z.mass[0]);
    z.t[1] = 0.5 * ih * bilinear_form(gk, KernelKind::delta_ft, s.eta_m, s.eta_m, &z.mass[1]);
    z.t[2] = -ih * bilinear_form(gk, KernelKind::delta_plus, s.eta_m, s.eta_p, &z.mass[2]);
    return z;
  }
  const cplx pref = -ih * spec.eps_f();
  z.t[0] = pref * bilinear_form(gk, KernelKind::delta_f, s.etat_p, s.eta_p, &z.mass[0]);
  z.t[1] = -pref * bilinear_form(gk, KernelKind::delta_ft, s.etat_m, s.eta_m, &z.mass[1]);
  z.t[2] = pref * bilinear_form(gk, KernelKind::delta_plus, s.etat_m, s.eta_p, &z.mass[2]);
  z.t[3] = -pref * bilinear_form(gk, KernelKind::delta_minus, s.etat_p, s.eta_m, &z.mass[3]);
  return z;
}

}  // namespace

cplx z_form_eval(Regime r, const GridKernels& gk, const BranchSources& s) {
  return z_form_terms(r, gk, s).sum();
}

GrassmannPoly z_form_eval(Regime r, const GridKernels& gk, const GrassmannBranchSources& s) {
  if (r == Regime::osc_real) throw SpecError("Grassmann sources need a channel regime");
  const ChannelSpec& spec = gk.spec();
  const cplx pref = -I * spec.hbar * spec.eps_f();
  GrassmannPoly out;
  for (std::size_t k = 0; k < s.comps.size(); ++k) {
    for (std::size_t l = 0; l < s.comps.size(); ++l) {
      const cplx z =
          pref * (bilinear_form(gk, KernelKind::delta_f, s.comps[k].etat_p, s.comps[l].eta_p) -
                  bilinear_form(gk, KernelKind::delta_ft, s.comps[k].etat_m, s.comps[l].eta_m) +
                  bilinear_form(gk, KernelKind::delta_plus, s.comps[k].etat_m, s.comps[l].eta_p) -
                  bilinear_form(gk, KernelKind::delta_minus, s.comps[k].etat_p, s.comps[l].eta_m));
      if (z != 0.0)
        out += z * (GrassmannPoly::generator(s.gens[k]) * GrassmannPoly::generator(s.gens[l]));
    }
  }
  return out;
}

namespace {

BranchSources phased(Regime r, const BranchSources& b) {
  BranchSources p;
  p.eta_p = sf_scale(I, b.eta_p);
  p.eta_m = sf_scale(-I, b.eta_m);
  if (r != Regime::osc_real) {
    p.etat_p = sf_scale(I, b.etat_p);
    p.etat_m = sf_scale(-I, b.etat_m);
  }
  return p;
}

cplx causal_retarded_form(Regime r, const GridKernels& gk, const CausalSources& c) {
  const double ef = gk.spec().eps_f();
  if (r == Regime::osc_real) return I * bilinear_form(gk, KernelKind::delta_r, c.eta, c.src_e);
  return I * ef *
         (bilinear_form(gk, KernelKind::delta_r, c.etat, c.src_e) -
          bilinear_form(gk, KernelKind::delta_rt, c.srct_e, c.eta));
}

}  // namespace

BilinearCheck verify_bilinear_identity(Regime r, const GridKernels& gk, const CausalSources& c) {
  const BranchSources b = from_causal_sources(r, gk.spec(), c);
  const ZTerms lhs = z_form_terms(r, gk, phased(r, b));
  const cplx rhs = causal_retarded_form(r, gk, c);
  const double scale = std::max({lhs.scale(), std::abs(lhs.sum()), std::abs(rhs)});
  return {std::abs(lhs.sum() - rhs), scale};
}

BilinearCheck verify_bilinear_identity(Regime r, const GridKernels& gk,
                                       const GrassmannCausalSources& c) {
  const GrassmannBranchSources b = from_causal_sources(r, gk.spec(), c);
  GrassmannBranchSources bp;
  bp.gens = b.gens;
  for (const auto& comp : b.comps) bp.comps.push_back(phased(r, comp));

  double scale = 0.0;
  GrassmannPoly lhs;
  for (std::size_t k = 0; k < bp.comps.size(); ++k) {
    for (std::size_t l = 0; l < bp.comps.size(); ++l) {
      BranchSources pair;
      pair.etat_p = bp.comps[k].etat_p;
      pair.etat_m = bp.comps[k].etat_m;
      pair.eta_p = bp.comps[l].eta_p;
      pair.eta_m = bp.comps[l].eta_m;
      const ZTerms z = z_form_terms(r, gk, pair);
      scale = std::max(scale, z.scale());
      if (z.sum() != 0.0)
        lhs += z.sum() *
               (GrassmannPoly::generator(bp.gens[k]) * GrassmannPoly::generator(bp.gens[l]));
    }
  }

  const double ef = gk.spec().eps_f();
  GrassmannPoly rhs;
  for (std::size_t k = 0; k < c.comps.size(); ++k) {
    for (std::size_t l = 0; l < c.comps.size(); ++l) {
      double m1 = 0.0, m2 = 0.0;
      const cplx v1 = I * ef * bilinear_form(gk, KernelKind::delta_r, c.comps[k].etat,
                                             c.comps[l].src_e, &m1);
      const cplx v2 = -I * ef * bilinear_form(gk, KernelKind::delta_rt, c.comps[k].srct_e,
                                              c.comps[l].eta, &m2);
      scale = std::max({scale, m1, m2});
      const cplx v = v1 + v2;
      if (v != 0.0)
        rhs += v * (GrassmannPoly::generator(c.gens[k]) * GrassmannPoly::generator(c.gens[l]));
    }
  }
  return {lhs.max_coeff_diff(rhs), scale};
}

cplx phi_vac_closed_form(Regime r, const GridKernels& gk, const BranchSources& s) {
  const double ef = gk.spec().eps_f();
  const cplx z = z_form_eval(r, gk, phased(r, s));
  return std::exp(r == Regime::osc_real ? z : ef * z);
}

GrassmannPoly phi_vac_closed_form(Regime r, const GridKernels& gk,
                                  const GrassmannBranchSources& s) {
  GrassmannBranchSources sp;
  sp.gens = s.gens;
  for (const auto& comp : s.comps) sp.comps.push_back(phased(r, comp));
  GrassmannPoly z = z_form_eval(r, gk, sp);
  z *= gk.spec().eps_f();
  return gp_exp(z);
}

cplx phi_vac_causal_form(Regime r, const GridKernels& gk, const CausalSources& c) {
  // exp(i eta G_R j_e) / exp(i etat D_R sig_e - i sigt_e D~R eta): the eps_f
  // of the reordering form cancels against the test-case formula's prefactor
  const double ef = r == Regime::osc_real ? 1.0 : gk.spec().eps_f();
  return std::exp(ef * causal_retarded_form(r, gk, c));
}

// ---------------------------------------------------------------------------
// Discrete-slot Phi_vac (weight-1 sums, closed-form kernels)

namespace {

// pair kernel of the exponent exp{i hbar [...]}: row slot is the
// tilde component (or eta+ for the real field), column slot the untilded one
struct SlotPair {
  SrcComp left, right;
  KernelKind kind;
  double sign;
};

std::vector<SlotPair> slot_pairs(Regime r) {
  if (r == Regime::osc_real)
    return {{SrcComp::eta_p, SrcComp::eta_p, KernelKind::delta_f, 0.5},
            {SrcComp::eta_m, SrcComp::eta_m, KernelKind::delta_ft, -0.5},
            {SrcComp::eta_m, SrcComp::eta_p, KernelKind::delta_plus, -1.0}};
  return {{SrcComp::etat_p, SrcComp::eta_p, KernelKind::delta_f, 1.0},
          {SrcComp::etat_m, SrcComp::eta_m, KernelKind::delta_ft, -1.0},
          {SrcComp::etat_m, SrcComp::eta_p, KernelKind::delta_plus, -1.0},
          {SrcComp::etat_p, SrcComp::eta_m, KernelKind::delta_minus, 1.0}};
}

using ExpPoly = std::map<std::vector<int>, cplx>;

ExpPoly exp_truncated(const ExpPoly& q, std::size_t nvars, int max_order) {
  ExpPoly result;
  result[std::vector<int>(nvars, 0)] = 1.0;
  ExpPoly power = result;
  double kfact = 1.0;
  for (int k = 1; k <= max_order / 2 + 1; ++k) {
    ExpPoly next;
    for (const auto& [ea, ca] : power) {
      for (const auto& [eb, cb] : q) {
        std::vector<int> e(nvars);
        int total = 0;
        for (std::size_t i = 0; i < nvars; ++i) total += (e[i] = ea[i] + eb[i]);
        if (total > max_order) continue;
        next[e] += ca * cb;
      }
    }
    if (next.empty()) break;
    power = std::move(next);
    kfact *= k;
    for (const auto& [e, c] : power) result[e] += c / kfact;
  }
  std::erase_if(result, [](const auto& kv) { return kv.second == 0.0; });
  return result;
}

}  // namespace

std::map<std::vector<int>, cplx> phi_vac_moments(const ChannelSpec& spec,
                                                 std::span<const SourceSlot> slots,
                                                 int max_order, double theta0) {
  const Regime r = regime_of(spec);
  ExpPoly q;
  const cplx ih = I * spec.hbar;
  for (std::size_t a = 0; a < slots.size(); ++a) {
    for (std::size_t b = 0; b < slots.size(); ++b) {
      for (const auto& sp : slot_pairs(r)) {
        if (slots[a].comp != sp.left || slots[b].comp != sp.right) continue;
        const cplx k =
            kernel_eval(spec, sp.kind, slots[a].x, slots[b].x, slots[a].t - slots[b].t, theta0)
                .value;
        if (k == 0.0) continue;
        std::vector<int> e(slots.size(), 0);
        e[a] += 1;
        e[b] += 1;
        q[e] += ih * sp.sign * k;
      }
    }
  }
  return exp_truncated(q, slots.size(), max_order);
}

GrassmannPoly phi_vac_grassmann(const ChannelSpec& spec, std::span<const SourceSlot> slots,
                                std::span<const GrassmannPoly> values, double theta0) {
  const Regime r = regime_of(spec);
  if (r == Regime::osc_real) throw SpecError("Grassmann Phi_vac needs a channel spec");
  GrassmannPoly q;
  const cplx ih = I * spec.hbar;
  for (std::size_t a = 0; a < slots.size(); ++a) {
    for (std::size_t b = 0; b < slots.size(); ++b) {
      for (const auto& sp : slot_pairs(r)) {
        if (slots[a].comp != sp.left || slots[b].comp != sp.right) continue;
        const cplx k =
            kernel_eval(spec, sp.kind, slots[a].x, slots[b].x, slots[a].t - slots[b].t, theta0)
                .value;
        if (k == 0.0) continue;
        q += (ih * sp.sign * k) * (values[a] * values[b]);
      }
    }
  }
  return gp_exp(q);
}

std::array<GrassmannPoly, 4> phi_vac_brackets(const ChannelSpec& spec,
                                              std::span<const SourceSlot> slots,
                                              std::span<const GrassmannPoly> values,
                                              double theta0) {
  std::array<GrassmannPoly, 4> out;
  const std::array<std::pair<SrcComp, SrcComp>, 4> comps = {
      std::pair{SrcComp::etat_p, SrcComp::eta_p}, std::pair{SrcComp::etat_m, SrcComp::eta_m},
      std::pair{SrcComp::etat_m, SrcComp::eta_p}, std::pair{SrcComp::etat_p, SrcComp::eta_m}};
  const std::array<KernelKind, 4> kinds = {KernelKind::delta_f, KernelKind::delta_ft,
                                           KernelKind::delta_plus, KernelKind::delta_minus};
  for (int i = 0; i < 4; ++i) {
    for (std::size_t a = 0; a < slots.size(); ++a) {
      for (std::size_t b = 0; b < slots.size(); ++b) {
        if (slots[a].comp != comps[i].first || slots[b].comp != comps[i].second) continue;
        const cplx k =
            kernel_eval(spec, kinds[i], slots[a].x, slots[b].x, slots[a].t - slots[b].t, theta0)
                .value;
        if (k != 0.0) out[i] += k * (values[a] * values[b]);
      }
    }
  }
  return out;
}

GrassmannPoly phi_vac_from_c_array(const ChannelSpec& spec, std::span<const SourceSlot> slots,
                                   std::span<const GrassmannPoly> values, int max_total,
                                   double theta0) {
  const auto br = phi_vac_brackets(spec, slots, values, theta0);
  const cplx ih = I * spec.hbar;
  GrassmannPoly sum;
  auto fact = [](int m) {
    double f = 1.0;
    for (int i = 2; i <= m; ++i) f *= i;
    return f;
  };
  for (int m0 = 0; m0 <= max_total; ++m0)
    for (int m1 = 0; m0 + m1 <= max_total; ++m1)
      for (int m2 = 0; m0 + m1 + m2 <= max_total; ++m2)
        for (int m3 = 0; m0 + m1 + m2 + m3 <= max_total; ++m3) {
          const int total = m0 + m1 + m2 + m3;
          cplx c = std::pow(ih, total) * ((m1 + m2) % 2 ? -1.0 : 1.0) /
                   (fact(m0) * fact(m1) * fact(m2) * fact(m3));
          GrassmannPoly term{c};
          for (int i = 0; i < m0; ++i) term = term * br[0];
          for (int i = 0; i < m1; ++i) term = term * br[1];
          for (int i = 0; i < m2; ++i) term = term * br[2];
          for (int i = 0; i < m3; ++i) term = term * br[3];
          sum += term;
        }
  return sum;
}

// ---------------------------------------------------------------------------
// The causal Wick route

namespace {

struct CAtom {
  VarKind kind;
  std::int8_t proj;  // frequency tag on zeta atoms; 0 = none
  int x;
  double t;
  cplx coeff;
};

std::vector<CAtom> causal_substitution(Regime r, const ChannelSpec& spec, const Atom& a) {
  const double hb = spec.hbar;
  std::vector<CAtom> out;
  switch (r) {
    case Regime::osc_real:
      if (a.kind != VarKind::branch_q) throw SpecError("osc/real regime expects q variables");
      out.push_back({VarKind::causal_qe, 0, a.x, a.t, 1.0});
      if (a.branch == Branch::plus)
        out.push_back({VarKind::causal_zeta, -1, a.x, a.t, hb});
      else
        out.push_back({VarKind::causal_zeta, +1, a.x, a.t, -hb});
      return out;
    case Regime::semirel:
      if (a.kind == VarKind::branch_psi) {
        out.push_back({VarKind::causal_psie, 0, a.x, a.t, 1.0});
        if (a.branch == Branch::plus)
          out.push_back({VarKind::causal_zeta, -1, a.x, a.t, -hb});
        else
          out.push_back({VarKind::causal_zeta, +1, a.x, a.t, hb});
      } else if (a.kind == VarKind::branch_tpsi) {
        out.push_back({VarKind::causal_tpsie, 0, a.x, a.t, 1.0});
        if (a.branch == Branch::plus)
          out.push_back({VarKind::causal_zetat, -1, a.x, a.t, hb});
        else
          out.push_back({VarKind::causal_zetat, +1, a.x, a.t, -hb});
      } else {
        throw SpecError("semirel regime expects psi/tpsi variables");
      }
      return out;
    case Regime::nonrel:
      if (a.kind == VarKind::branch_psi) {
        out.push_back({VarKind::causal_psie, 0, a.x, a.t, 1.0});
        if (a.branch == Branch::minus) out.push_back({VarKind::causal_zeta, 0, a.x, a.t, hb});
      } else if (a.kind == VarKind::branch_tpsi) {
        out.push_back({VarKind::causal_tpsie, 0, a.x, a.t, 1.0});
        if (a.branch == Branch::plus) out.push_back({VarKind::causal_zetat, 0, a.x, a.t, hb});
      } else {
        throw SpecError("nonrel regime expects psi/tpsi variables");
      }
      return out;
  }
  return out;
}

struct CausalPairer {
  const ChannelSpec& spec;
  Regime regime;
  const GridKernels* gk;
  CausalKernelMode mode;
  double theta0;

  cplx retarded(KernelKind kind, int sigma, int x, int xp, double tau) const {
    if (sigma == 0) return kernel_eval(spec, kind, x, xp, tau, theta0).value;
    if (gk == nullptr) throw GridError("projected kernels need a verification grid");
    const double dl = tau / gk->grid().dt;
    const long lag = std::lround(dl);
    if (std::abs(dl - static_cast<double>(lag)) > 1e-9)
      throw GridError("sample times must sit on the verification grid");
    return gk->at(kind, sigma, x, xp, lag);
  }

  // value of one derivative pairing for atoms in written order
  cplx pair_value(const CAtom& a, const CAtom& b) const {
    const double ef = spec.eps_f();
    // Delta_R term couples (psi_e/q_e, zetat/zeta-for-real)
    if (regime == Regime::osc_real) {
      if (a.kind == VarKind::causal_qe && b.kind == VarKind::causal_zeta)
        return -I * retarded(KernelKind::delta_r, -b.proj, a.x, b.x, a.t - b.t);
      if (a.kind == VarKind::causal_zeta && b.kind == VarKind::causal_qe)
        return -I * retarded(KernelKind::delta_r, -a.proj, b.x, a.x, b.t - a.t);
      return 0.0;
    }
    if (a.kind == VarKind::causal_psie && b.kind == VarKind::causal_zetat)
      return -I * retarded(KernelKind::delta_r, -b.proj, a.x, b.x, a.t - b.t);
    if (a.kind == VarKind::causal_zetat && b.kind == VarKind::causal_psie)
      return -I * ef * retarded(KernelKind::delta_r, -a.proj, b.x, a.x, b.t - a.t);
    if (a.kind == VarKind::causal_zeta && b.kind == VarKind::causal_tpsie)
      return I * retarded(KernelKind::delta_rt, a.proj, a.x, b.x, a.t - b.t);
    if (a.kind == VarKind::causal_tpsie && b.kind == VarKind::causal_zeta)
      return I * ef * retarded(KernelKind::delta_rt, b.proj, b.x, a.x, b.t - a.t);
    return 0.0;
  }

  // summed bracket over the substitution channels of a matched position pair
  cplx bracket(const Atom& ai, const Atom& aj) const {
    if (mode == CausalKernelMode::closed_form) {
      auto to_op = [](const Atom& a) {
        OpKind k = a.kind == VarKind::branch_q ? OpKind::Q
                   : a.kind == VarKind::branch_psi ? OpKind::psi
                                                   : OpKind::tpsi;
        return FieldOp{k, a.x, {a.t, a.branch}};
      };
      return contraction_value(spec, to_op(ai), to_op(aj), theta0).value;
    }
    cplx sum = 0.0;
    for (const auto& ca : causal_substitution(regime, spec, ai))
      for (const auto& cb : causal_substitution(regime, spec, aj))
        sum += ca.coeff * cb.coeff * pair_value(ca, cb);
    return sum;
  }

  bool pairable(const Atom& ai, const Atom& aj) const {
    if (regime == Regime::osc_real) return true;  // q with q
    return (ai.kind == VarKind::branch_psi && aj.kind == VarKind::branch_tpsi) ||
           (ai.kind == VarKind::branch_tpsi && aj.kind == VarKind::branch_psi);
  }
};

struct CausalEnumerator {
  const CausalPairer& pairer;
  const Monomial& atoms;
  FunctionalPolynomial* out;
  cplx base_coeff;
  std::vector<bool> fermionic;
  std::vector<char> used;
  std::vector<std::pair<int, int>> pairs;
  std::vector<cplx> values;

  void emit() {
    cplx coeff = base_coeff * matching_sign(fermionic, pairs);
    for (const auto& v : values) coeff *= v;
    Monomial residual;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (used[i] == 1) continue;
      // unmatched positions keep their e-type atom (zeta parts die at zeta=0)
      VarKind k = atoms[i].kind == VarKind::branch_q ? VarKind::causal_qe
                  : atoms[i].kind == VarKind::branch_psi ? VarKind::causal_psie
                                                         : VarKind::causal_tpsie;
      residual.push_back({k, Branch::plus, 0, atoms[i].x, atoms[i].t});
    }
    out->add_term(std::move(residual), coeff);
  }

  void recurse(std::size_t i) {
    while (i < atoms.size() && used[i]) ++i;
    if (i == atoms.size()) {
      emit();
      return;
    }
    used[i] = 2;
    recurse(i + 1);
    used[i] = 0;
    for (std::size_t j = i + 1; j < atoms.size(); ++j) {
      if (used[j] || !pairer.pairable(atoms[i], atoms[j])) continue;
      used[i] = used[j] = 1;
      pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
      values.push_back(pairer.bracket(atoms[i], atoms[j]));
      recurse(i + 1);
      pairs.pop_back();
      values.pop_back();
      used[i] = used[j] = 0;
    }
  }
};

}  // namespace

FunctionalPolynomial causal_normal_form(const ChannelSpec& spec, Regime r,
                                        const FunctionalPolynomial& f, const GridKernels* gk,
                                        CausalKernelMode mode, double theta0, int degree_cap) {
  if (f.degree() > degree_cap)
    throw SpecError("polynomial degree exceeds cap " + std::to_string(degree_cap));
  const ChannelSpec& work =
      (gk != nullptr && mode == CausalKernelMode::grid_projected) ? gk->spec() : spec;
  CausalPairer pairer{work, r, gk, mode, theta0};
  FunctionalPolynomial out(f.statistics());
  for (const auto& [mono, coeff] : f.terms()) {
    for (const auto& atom : mono)
      if (!is_branch_var(atom.kind))
        throw SpecError("causal_normal_form expects branch-field variables");
    CausalEnumerator en{pairer,
                        mono,
                        &out,
                        coeff,
                        std::vector<bool>(mono.size(), f.statistics() == Statistics::fermi),
                        std::vector<char>(mono.size(), 0),
                        {},
                        {}};
    en.recurse(0);
  }
  return out.canonicalized();
}

// ---------------------------------------------------------------------------
// Derivative transport check

namespace {

// (nx*n) x (nx*n) block matrix of the periodized kernel with dt^2 weights
dense::Matrix kernel_block(const ChannelSpec& spec, const VerificationGrid& grid,
                           KernelKind kind, double theta0) {
  const std::size_t n = grid.n;
  const std::size_t nx = spec.n_x();
  dense::Matrix m(nx * n, nx * n);
  const double w2 = grid.dt * grid.dt;
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t xp = 0; xp < nx; ++xp) {
      const auto samples = sample_kernel_periodized(spec, kind, static_cast<int>(x),
                                                    static_cast<int>(xp), grid, theta0);
      for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
          const long lag = static_cast<long>(p) - static_cast<long>(q);
          const long idx = ((lag + static_cast<long>(n / 2)) % static_cast<long>(n) +
                            static_cast<long>(n)) %
                           static_cast<long>(n);
          m(x * n + p, xp * n + q) = samples.v[static_cast<std::size_t>(idx)] * w2;
        }
      }
    }
  }
  return m;
}

dense::Matrix proj_block(std::size_t nx, std::size_t n, int sign, double theta0) {
  const auto p = projector_matrix(n, sign, theta0);
  dense::Matrix m(nx * n, nx * n);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(x * n + i, x * n + j) = p(i, j);
  return m;
}

dense::Matrix scal_block(std::size_t nx, std::size_t n, cplx c) {
  dense::Matrix m(nx * n, nx * n);
  for (std::size_t i = 0; i < nx * n; ++i) m(i, i) = c;
  return m;
}

// rows (b0; b1), cols (c0 | c1) of N x N blocks
dense::Matrix assemble2x2(const dense::Matrix& a00, const dense::Matrix& a01,
                          const dense::Matrix& a10, const dense::Matrix& a11) {
  const std::size_t nr = a00.rows();
  dense::Matrix m(2 * nr, 2 * nr);
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < nr; ++j) {
      m(i, j) = a00(i, j);
      m(i, nr + j) = a01(i, j);
      m(nr + i, j) = a10(i, j);
      m(nr + i, nr + j) = a11(i, j);
    }
  }
  return m;
}

dense::Matrix transpose(const dense::Matrix& a) {
  dense::Matrix m(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(j, i) = a(i, j);
  return m;
}

dense::Matrix symmetrize(const dense::Matrix& a) {
  dense::Matrix m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = 0.5 * (a(i, j) + a(j, i));
  return m;
}

}  // namespace

TransportReport derivative_transport_check(const ChannelSpec& spec, Regime r, std::size_t n,
                                           double theta0) {
  const VerificationGrid grid = build_verification_grid(spec, n);
  const ChannelSpec& s = grid.snapped_spec;
  const std::size_t nx = s.n_x();
  const std::size_t N = nx * n;
  const cplx ih = I * s.hbar;
  const double hb = s.hbar;
  const double ef = s.eps_f();

  const auto KF = kernel_block(s, grid, KernelKind::delta_f, theta0);
  const auto KFt = kernel_block(s, grid, KernelKind::delta_ft, theta0);
  const auto Kp = kernel_block(s, grid, KernelKind::delta_plus, theta0);
  const auto KR = kernel_block(s, grid, KernelKind::delta_r, theta0);
  const auto Z0 = scal_block(nx, n, 0.0);
  const auto Id = scal_block(nx, n, 1.0);

  TransportReport rep;
  rep.grid_n = n;

  if (r == Regime::osc_real) {
    const auto Pp = proj_block(nx, n, +1, theta0);
    const auto Pm = proj_block(nx, n, -1, theta0);
    // Z over (dq+, dq-)
    dense::Matrix Z = assemble2x2(-0.5 * ih * KF, Z0, -ih * Kp, 0.5 * ih * KFt);
    // R over (dzeta, dq_e): -i dq_e G_R dzeta
    dense::Matrix R(2 * N, 2 * N);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) R(N + i, j) = -I * KR(i, j);
    // S: (zeta, q_e) -> (q+, q-)
    dense::Matrix S = assemble2x2(hb * Pm, Id, (-hb) * Pp, Id);
    dense::Matrix T = assemble2x2((1.0 / hb) * Id, (-1.0 / hb) * Id, Pp, Pm);
    const auto lhs = symmetrize(Z);
    const auto rhs = symmetrize(dense::matmul(dense::matmul(S, R), transpose(S)));
    rep.max_entry_error = dense::max_abs_diff(lhs, rhs);
    dense::Matrix STm = dense::matmul(S, T);
    for (std::size_t i = 0; i < 2 * N; ++i) STm(i, i) -= 1.0;
    rep.inverse_error = STm.max_abs();
    return rep;
  }

  const auto Km = kernel_block(s, grid, KernelKind::delta_minus, theta0);
  const auto KRt = kernel_block(s, grid, KernelKind::delta_rt, theta0);

  // In the reordering form the untilded-field derivatives stand on the left:
  // Z rows = (dpsi+, dpsi-), cols = (dtpsi+, dtpsi-).
  dense::Matrix Z = assemble2x2(-ih * ef * KF, ih * ef * Km, -ih * ef * Kp, ih * ef * KFt);
  // Causal form, same orientation: rows = (dzeta, dpsi_e), cols = (dzetat, dtpsi_e)
  dense::Matrix R(2 * N, 2 * N);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      R(N + i, j) = -I * ef * KR(i, j);    // dpsi_e Delta_R dzetat
      R(i, N + j) = I * ef * KRt(i, j);    // dzeta Delta~R dtpsi_e
    }
  }

  dense::Matrix Su, St, Tu, Tt;
  if (r == Regime::semirel) {
    const auto Pp = proj_block(nx, n, +1, theta0);
    const auto Pm = proj_block(nx, n, -1, theta0);
    Su = assemble2x2((-hb) * Pm, Id, hb * Pp, Id);
    St = assemble2x2(hb * Pm, Id, (-hb) * Pp, Id);
    Tu = assemble2x2((-1.0 / hb) * Id, (1.0 / hb) * Id, Pp, Pm);
    Tt = assemble2x2((1.0 / hb) * Id, (-1.0 / hb) * Id, Pp, Pm);
  } else {
    Su = assemble2x2(Z0, Id, hb * Id, Id);
    St = assemble2x2(hb * Id, Id, Z0, Id);
    Tu = assemble2x2((-1.0 / hb) * Id, (1.0 / hb) * Id, Id, Z0);
    Tt = assemble2x2((1.0 / hb) * Id, (-1.0 / hb) * Id, Z0, Id);
  }

  const auto rhs = dense::matmul(dense::matmul(Su, R), transpose(St));
  rep.max_entry_error = dense::max_abs_diff(Z, rhs);
  dense::Matrix SuTu = dense::matmul(Su, Tu);
  dense::Matrix StTt = dense::matmul(St, Tt);
  for (std::size_t i = 0; i < 2 * N; ++i) {
    SuTu(i, i) -= 1.0;
    StTt(i, i) -= 1.0;
  }
  rep.inverse_error = std::max(SuTu.max_abs(), StTt.max_abs());
  return rep;
}

}  // namespace kw
