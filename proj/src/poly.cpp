#include "kw/poly.hpp"

#include <algorithm>
#include <cmath>

namespace kw {

bool is_branch_var(VarKind k) {
  return k == VarKind::branch_q || k == VarKind::branch_psi || k == VarKind::branch_tpsi;
}

bool is_tilde_var(VarKind k) {
  return k == VarKind::branch_tpsi || k == VarKind::field_tpsi || k == VarKind::causal_tpsie ||
         k == VarKind::causal_zetat;
}

int FunctionalPolynomial::degree() const {
  std::size_t d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m.size());
  return static_cast<int>(d);
}

void FunctionalPolynomial::add_term(Monomial m, cplx c) {
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(std::move(m), c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

FunctionalPolynomial& FunctionalPolynomial::operator+=(const FunctionalPolynomial& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

FunctionalPolynomial& FunctionalPolynomial::operator*=(cplx c) {
  if (c == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, v] : terms_) v *= c;
  return *this;
}

FunctionalPolynomial operator*(const FunctionalPolynomial& a, const FunctionalPolynomial& b) {
  FunctionalPolynomial out(a.stat_);
  for (const auto& [ma, ca] : a.terms_) {
    for (const auto& [mb, cb] : b.terms_) {
      Monomial m = ma;
      m.insert(m.end(), mb.begin(), mb.end());
      out.add_term(std::move(m), ca * cb);
    }
  }
  return out;
}

bool canonical_atom_less(const Atom& a, const Atom& b) {
  const int ta = is_tilde_var(a.kind) ? 0 : 1;
  const int tb = is_tilde_var(b.kind) ? 0 : 1;
  if (ta != tb) return ta < tb;
  if (a.x != b.x) return a.x < b.x;
  if (a.t != b.t) return a.t < b.t;
  return a < b;
}

double canonical_sort(Monomial& atoms, Statistics stat) {
  // insertion sort, counting transpositions
  long swaps = 0;
  for (std::size_t i = 1; i < atoms.size(); ++i) {
    Atom key = atoms[i];
    std::size_t j = i;
    while (j > 0 && canonical_atom_less(key, atoms[j - 1])) {
      atoms[j] = atoms[j - 1];
      --j;
      ++swaps;
    }
    atoms[j] = key;
  }
  if (stat == Statistics::fermi) {
    for (std::size_t i = 0; i + 1 < atoms.size(); ++i)
      if (atoms[i] == atoms[i + 1]) return 0.0;
    return swaps % 2 ? -1.0 : 1.0;
  }
  return 1.0;
}

FunctionalPolynomial FunctionalPolynomial::canonicalized() const {
  FunctionalPolynomial out(stat_);
  for (const auto& [m, c] : terms_) {
    Monomial sorted = m;
    const double sign = canonical_sort(sorted, stat_);
    if (sign == 0.0) continue;
    out.add_term(std::move(sorted), sign * c);
  }
  return out;
}

FunctionalPolynomial FunctionalPolynomial::translated(VarKind f1, VarKind t1, VarKind f2,
                                                      VarKind t2, VarKind f3, VarKind t3) const {
  FunctionalPolynomial out(stat_);
  for (const auto& [m, c] : terms_) {
    Monomial mm = m;
    for (auto& a : mm) {
      if (a.kind == f1)
        a.kind = t1;
      else if (a.kind == f2)
        a.kind = t2;
      else if (a.kind == f3)
        a.kind = t3;
    }
    out.add_term(std::move(mm), c);
  }
  return out;
}

double FunctionalPolynomial::max_coeff_diff(const FunctionalPolynomial& o) const {
  double m = 0.0;
  for (const auto& [k, c] : terms_) {
    auto it = o.terms_.find(k);
    m = std::max(m, std::abs(c - (it == o.terms_.end() ? cplx{0.0} : it->second)));
  }
  for (const auto& [k, c] : o.terms_) {
    if (!terms_.contains(k)) m = std::max(m, std::abs(c));
  }
  return m;
}

double FunctionalPolynomial::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [k, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

}  // namespace kw
