#pragma once

#include <array>
#include <map>
#include <span>
#include <vector>

#include "kw/channel.hpp"
#include "kw/fock.hpp"
#include "kw/grassmann.hpp"
#include "kw/kernels.hpp"
#include "kw/poly.hpp"
#include "kw/types.hpp"

namespace kw {

enum class Regime { osc_real, semirel, nonrel };

Regime regime_of(const ChannelSpec& spec);
std::string regime_name(Regime r);

/// One signal per x label, all on a common grid.
using SignalField = std::vector<SampledSignal>;

/// Branch sources of the generating functional; the oscillator/real field
/// uses only the untilded pair.
struct BranchSources {
  SignalField eta_p, eta_m, etat_p, etat_m;
};

/// Causal (probe/external-source) variables.  src_e is j_e for the real
/// field and sigma_e for channels; srct_e is channel-only.
struct CausalSources {
  SignalField eta, etat, src_e, srct_e;
};

struct BranchFields {
  SignalField f_p, f_m, ft_p, ft_m;  // q+- lives in f_p/f_m for the real field
};

struct CausalFields {
  SignalField zeta, zetat, fe, fte;
};

CausalSources to_causal_sources(Regime r, const ChannelSpec& spec, const BranchSources& b);
BranchSources from_causal_sources(Regime r, const ChannelSpec& spec, const CausalSources& c);
CausalFields to_causal_fields(Regime r, const ChannelSpec& spec, const BranchFields& b);
BranchFields from_causal_fields(Regime r, const ChannelSpec& spec, const CausalFields& c);

/// Grassmann-valued source set: value(x,t) = sum_k comps[k](x,t) gamma_gens[k].
/// The response substitutions act componentwise (c-number kernels).
struct GrassmannBranchSources {
  std::vector<int> gens;
  std::vector<BranchSources> comps;
};

struct GrassmannCausalSources {
  std::vector<int> gens;
  std::vector<CausalSources> comps;
};

GrassmannCausalSources to_causal_sources(Regime r, const ChannelSpec& spec,
                                         const GrassmannBranchSources& b);
GrassmannBranchSources from_causal_sources(Regime r, const ChannelSpec& spec,
                                           const GrassmannCausalSources& c);

/// Periodized grid kernels of one spec: centered lag samples, their
/// frequency parts, and circulant FFTs for fast bilinear quadratures.
class GridKernels {
 public:
  /// Works on grid.snapped_spec so that every mode frequency is an exact bin.
  explicit GridKernels(const VerificationGrid& grid, double theta0 = 0.5);

  const VerificationGrid& grid() const { return grid_; }
  const ChannelSpec& spec() const { return spec_; }

  /// Kernel sample at integer lag (centered, |lag| <= n/2-1); sigma = +-1
  /// selects the frequency part, 0 the plain kernel.
  cplx at(KernelKind kind, int sigma, int x, int xp, long lag) const;

  /// y(p) = sum_q K(x,xp,p-q) g(q), circular.
  SampledSignal convolve(KernelKind kind, int x, int xp, const SampledSignal& g) const;

 private:
  struct Entry {
    SampledSignal samples;       // centered lag samples
    SampledSignal part_plus;     // P^+ samples
    SampledSignal part_minus;    // P^- samples
    std::vector<cplx> fft_circ;  // forward FFT of the circulant order
  };
  const Entry& entry(KernelKind kind, int x, int xp) const;

  ChannelSpec spec_;
  VerificationGrid grid_;
  double theta0_;
  std::map<std::tuple<int, int, int>, Entry> cache_;  // filled once in the
                                                      // ctor, read-only after
};

/// f K g = sum_{x,x'} sum_{p,q} f_x(p) K(x,x',p-q) g_x'(q) dt^2 with the
/// periodized circulant kernel.  When given, `mass` receives the absolute
/// quadrature mass sum |f||Kg| dt^2 (the backward-error scale of the sum).
cplx bilinear_form(const GridKernels& gk, KernelKind kind, const SignalField& f,
                   const SignalField& g, double* mass = nullptr);

/// The reordering form Z_C evaluated at the given source values (no implicit
/// phases): oscillator form -(i hbar/2)[f+ G_F f+ - f- G_F^* f- + 2 f- G+ f+],
/// channel form -(i eps_f hbar)[ft+ D_F f+ - ft- D~F f- + ft- D+ f+ - ft+ D- f-].
cplx z_form_eval(Regime r, const GridKernels& gk, const BranchSources& s);
GrassmannPoly z_form_eval(Regime r, const GridKernels& gk, const GrassmannBranchSources& s);

struct BilinearCheck {
  double abs_error = 0.0;
  double scale = 0.0;  // max |LHS|, |RHS|
};

/// |Z_C(phased branch sources) - retarded causal form| after the response
/// substitution (branch sources are derived from the causal ones, so both
/// sides see the same data).
BilinearCheck verify_bilinear_identity(Regime r, const GridKernels& gk, const CausalSources& c);
BilinearCheck verify_bilinear_identity(Regime r, const GridKernels& gk,
                                       const GrassmannCausalSources& c);

/// Phi_vac by the test-case formula, exp[eps_f Z_C(i etat+, i eta+, -i etat-, -i eta-)]
/// (oscillator: exp Z_C(i eta+, -i eta-)).
cplx phi_vac_closed_form(Regime r, const GridKernels& gk, const BranchSources& s);
GrassmannPoly phi_vac_closed_form(Regime r, const GridKernels& gk,
                                  const GrassmannBranchSources& s);

/// Phi_vac in causal variables: exp(i eta G_R j_e) / exp(i etat D_R sig_e - i sigt_e D~R eta).
cplx phi_vac_causal_form(Regime r, const GridKernels& gk, const CausalSources& c);

/// Formal Taylor coefficients of Phi_vac over discrete source slots
/// (weight-1 sums, matching moment_vev's convention), up to max_order.
std::map<std::vector<int>, cplx> phi_vac_moments(const ChannelSpec& spec,
                                                 std::span<const SourceSlot> slots,
                                                 int max_order = 4, double theta0 = 0.5);

/// Grassmann Phi_vac from closed-form kernels over discrete slots (weight-1).
GrassmannPoly phi_vac_grassmann(const ChannelSpec& spec, std::span<const SourceSlot> slots,
                                std::span<const GrassmannPoly> values, double theta0 = 0.5);

/// The four bilinear brackets of the test-case formula over discrete slots,
/// in the order (etat+ D_F eta+), (etat- D~F eta-), (etat- D+ eta+), (etat+ D- eta-).
std::array<GrassmannPoly, 4> phi_vac_brackets(const ChannelSpec& spec,
                                              std::span<const SourceSlot> slots,
                                              std::span<const GrassmannPoly> values,
                                              double theta0 = 0.5);

/// Structural reassembly of Phi_vac with the bosonic coefficient array
/// C_{m m' m'' m'''} applied to the Grassmann brackets.
GrassmannPoly phi_vac_from_c_array(const ChannelSpec& spec, std::span<const SourceSlot> slots,
                                   std::span<const GrassmannPoly> values, int max_total = 4,
                                   double theta0 = 0.5);

enum class CausalKernelMode { closed_form, grid_projected };

/// The causal Wick route: substitute causal variables, apply the exponential
/// of the retarded bilinear derivative form as a matching enumeration, set
/// zeta = zetat = 0.  Output variables are causal_qe / causal_psie /
/// causal_tpsie.  grid_projected evaluates the frequency-projected retarded
/// kernels through the grid; closed_form uses the analytically collapsed
/// pair brackets.
FunctionalPolynomial causal_normal_form(const ChannelSpec& spec, Regime r,
                                        const FunctionalPolynomial& f, const GridKernels* gk,
                                        CausalKernelMode mode, double theta0 = 0.5,
                                        int degree_cap = 4);

struct TransportReport {
  double max_entry_error = 0.0;
  double inverse_error = 0.0;  // || S S^{-1} - 1 ||_max
  std::size_t grid_n = 0;
};

/// Builds the response substitution as explicit grid matrices and checks the
/// transported derivative bilinear form against the causal retarded form.
TransportReport derivative_transport_check(const ChannelSpec& spec, Regime r, std::size_t n,
                                           double theta0 = 0.5);

}  // namespace kw
