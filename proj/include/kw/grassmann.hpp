#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "kw/types.hpp"

namespace kw {

enum class Parity { even, odd };

/// Finite polynomial in anticommuting generators gamma_1, gamma_2, ...
/// with complex coefficients.  Monomials are stored as strictly increasing
/// index tuples; the sign of the reordering that brings a product into
/// this canonical form is folded into the coefficient.  The generator
/// count is never fixed: max_generator() reports the largest index in
/// use, and fresh indices are simply max_generator()+1.
class GrassmannPoly {
 public:
  using Key = std::vector<int>;

  GrassmannPoly() = default;
  explicit GrassmannPoly(cplx c);

  static GrassmannPoly generator(int k);
  static GrassmannPoly monomial(Key indices, cplx c);

  bool is_zero() const { return terms_.empty(); }
  int max_generator() const;
  cplx coeff(const Key& k) const;
  const std::map<Key, cplx>& terms() const { return terms_; }

  GrassmannPoly& operator+=(const GrassmannPoly& o);
  GrassmannPoly& operator-=(const GrassmannPoly& o);
  GrassmannPoly& operator*=(cplx c);

  friend GrassmannPoly operator+(GrassmannPoly a, const GrassmannPoly& b) { return a += b; }
  friend GrassmannPoly operator-(GrassmannPoly a, const GrassmannPoly& b) { return a -= b; }
  friend GrassmannPoly operator*(GrassmannPoly a, cplx c) { return a *= c; }
  friend GrassmannPoly operator*(cplx c, GrassmannPoly a) { return a *= c; }
  friend GrassmannPoly operator*(const GrassmannPoly& a, const GrassmannPoly& b);
  friend bool operator==(const GrassmannPoly& a, const GrassmannPoly& b);

  /// Left variational derivative d/d gamma_k: for a monomial holding k at
  /// 1-based position q the result is (-1)^(q-1) times the monomial with k
  /// removed; monomials without k are dropped.
  GrassmannPoly left_derivative(int k) const;

  /// Length parity of the monomials, or MixedParityError when they disagree
  /// (a superselection violation in whatever algebra produced the input).
  Parity parity() const;

  /// Largest absolute coefficient difference against another polynomial.
  double max_coeff_diff(const GrassmannPoly& o) const;

  void add_term(Key k, cplx c);

 private:
  std::map<Key, cplx> terms_;  // strictly increasing keys, no zero coefficients
};

/// Linear generator substitution gamma_old -> sum_j coeff_j gamma_new_j with
/// c-number coefficients.  Rows keyed by the old generator index.
using LinearGeneratorMap = std::map<int, std::vector<std::pair<int, cplx>>>;

/// Substitute each generator by the given linear combination.  Generators
/// absent from the map are kept as they are.
GrassmannPoly substitute_linear(const GrassmannPoly& p, const LinearGeneratorMap& map);

/// Uniqueness probe "pair against a fresh generator": returns
/// the first label whose polynomial survives multiplication by
/// gamma_(max_generator+1), or nullopt when the whole family is zero.
std::optional<std::size_t> uniqueness_probe(const std::vector<GrassmannPoly>& family);

/// exp of an even Grassmann polynomial; the series truncates by nilpotency.
GrassmannPoly gp_exp(const GrassmannPoly& p);

/// Session-local allocator for fresh generator indices.
class GeneratorPool {
 public:
  explicit GeneratorPool(int first = 1) : next_(first) {}
  int fresh() { return next_++; }
  int peek() const { return next_; }

 private:
  int next_;
};

}  // namespace kw
