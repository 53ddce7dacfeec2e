#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <vector>

#include "kw/contour.hpp"
#include "kw/types.hpp"

namespace kw {

/// Variable families a functional polynomial can live in: branch-labeled
/// auxiliary fields (the inputs of the two Wick routes), plain fields (the
/// Hori route's normal-form output) and causal variables (the causal
/// route's output and intermediates).
enum class VarKind : std::int8_t {
  branch_q,
  branch_psi,
  branch_tpsi,
  field_q,
  field_psi,
  field_tpsi,
  causal_qe,
  causal_zeta,
  causal_psie,
  causal_tpsie,
  causal_zetat,
};

bool is_branch_var(VarKind k);
bool is_tilde_var(VarKind k);

/// One field sample in a monomial.  `proj` tags a frequency projection
/// (+1/-1) on causal zeta variables, 0 otherwise.  Times are exact sample
/// points and compare bitwise.
struct Atom {
  VarKind kind = VarKind::branch_q;
  Branch branch = Branch::plus;
  std::int8_t proj = 0;
  int x = 0;
  double t = 0.0;

  friend auto operator<=>(const Atom&, const Atom&) = default;
};

using Monomial = std::vector<Atom>;

/// Finite-degree polynomial in field samples.  Fermionic monomials keep
/// their written factor order; reordering happens only in canonicalize(),
/// with the anticommutation signs.
class FunctionalPolynomial {
 public:
  FunctionalPolynomial() = default;
  explicit FunctionalPolynomial(Statistics s) : stat_(s) {}

  Statistics statistics() const { return stat_; }
  const std::map<Monomial, cplx>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;

  void add_term(Monomial m, cplx c);
  FunctionalPolynomial& operator+=(const FunctionalPolynomial& o);
  FunctionalPolynomial& operator*=(cplx c);
  friend FunctionalPolynomial operator*(const FunctionalPolynomial& a,
                                        const FunctionalPolynomial& b);

  /// Normal-symbol canonical form: tilded kinds before untilded, then x,
  /// then time; fermionic reordering contributes eps_f per transposition and
  /// a repeated fermionic atom annihilates the monomial.
  FunctionalPolynomial canonicalized() const;

  /// Renames variable kinds (e.g. field_psi -> causal_psie) for cross-route
  /// comparison; everything else is untouched.
  FunctionalPolynomial translated(VarKind from1, VarKind to1, VarKind from2, VarKind to2,
                                  VarKind from3, VarKind to3) const;

  double max_coeff_diff(const FunctionalPolynomial& o) const;
  double max_abs_coeff() const;

 private:
  Statistics stat_ = Statistics::bose;
  std::map<Monomial, cplx> terms_;
};

/// Atom ordering used for the canonical normal-symbol form.
bool canonical_atom_less(const Atom& a, const Atom& b);

/// Sorts atoms into canonical order; returns the fermionic sign (or 0.0 when
/// a repeated fermionic atom annihilates the monomial).
double canonical_sort(Monomial& atoms, Statistics stat);

}  // namespace kw
