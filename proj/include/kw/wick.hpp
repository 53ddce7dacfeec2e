#pragma once

#include <span>
#include <vector>
#include <utility>
#include <vector>

#include "kw/channel.hpp"
#include "kw/contour.hpp"
#include "kw/kernels.hpp"
#include "kw/poly.hpp"
#include "kw/types.hpp"

namespace kw {

/// One Wick term: a contraction pattern with its cached kernel values and
/// the uncontracted residual in canonical normal-symbol order.  Fermionic
/// signs (matching sign and residual reordering) are folded into coeff.
struct WickTerm {
  cplx coeff{1.0};
  std::vector<std::pair<int, int>> contractions;  // index pairs (i < j) into the input
  std::vector<cplx> values;                       // one kernel value per pair
  std::vector<FieldOp> residual;
};

struct WickExpansion {
  std::vector<WickTerm> terms;
  std::vector<FieldOp> input;
  bool theta_convention_flagged = false;  // an equal-time Feynman kernel entered
};

/// <0| T_C A B |0> in closed form from the kernel tables (A written before
/// B).  Zero for the six vanishing placements (psi-psi and tpsi-tpsi pairs);
/// throws on kind/spec mismatch.
KernelValue contraction_value(const ChannelSpec& spec, const FieldOp& a, const FieldOp& b,
                              double theta0 = 0.5);

/// True when the pair can carry a nonzero contraction at all.
bool contractible(const ChannelSpec& spec, const FieldOp& a, const FieldOp& b);

/// Normative sign algorithm: repeatedly take the leftmost contracted
/// position, count not-yet-removed fermionic positions strictly between it
/// and its partner, multiply eps_f^count, remove the pair.
double matching_sign(const std::vector<bool>& fermionic, std::span<const std::pair<int, int>> pairs);

/// All partial matchings with allowed pairs, one term each; coeff =
/// matching sign times the product of contraction values; residual
/// canonicalized with its fermionic sign.
WickExpansion wick_expand(const ChannelSpec& spec, std::span<const FieldOp> product,
                          double theta0 = 0.5);

/// Sum of coefficients over complete contractions (empty product -> 1).
cplx vacuum_value(const WickExpansion& e);

/// Applies exp Z_C monomial-wise to a polynomial in branch fields and
/// identifies the branches: the Hori route to the normal form.  Output
/// variables are field_q / field_psi / field_tpsi.
FunctionalPolynomial normal_form_polynomial(const ChannelSpec& spec,
                                            const FunctionalPolynomial& f, double theta0 = 0.5,
                                            int degree_cap = 6);

/// Number of partial matchings of a 2n real-field product: sum_m C(2n,2m)(2m-1)!!.
long double real_field_term_count(int n_ops);

}  // namespace kw
