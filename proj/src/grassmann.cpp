#include "kw/grassmann.hpp"

#include <algorithm>
#include <cmath>

namespace kw {

namespace {

// Merge two strictly increasing tuples, counting the transpositions the
// merge performs.  Returns false when an index repeats (gamma_k^2 = 0).
bool merge_keys(const GrassmannPoly::Key& a, const GrassmannPoly::Key& b,
                GrassmannPoly::Key& out, int& swaps) {
  out.clear();
  out.reserve(a.size() + b.size());
  swaps = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return false;
    if (a[i] < b[j]) {
      out.push_back(a[i++]);
    } else {
      // b[j] jumps over the remaining a-elements
      swaps += static_cast<int>(a.size() - i);
      out.push_back(b[j++]);
    }
  }
  out.insert(out.end(), a.begin() + i, a.end());
  out.insert(out.end(), b.begin() + j, b.end());
  return true;
}

}  // namespace

GrassmannPoly::GrassmannPoly(cplx c) {
  if (c != 0.0) terms_[{}] = c;
}

GrassmannPoly GrassmannPoly::generator(int k) {
  GrassmannPoly p;
  p.terms_[{k}] = 1.0;
  return p;
}

GrassmannPoly GrassmannPoly::monomial(Key indices, cplx c) {
  GrassmannPoly p;
  p.add_term(std::move(indices), c);
  return p;
}

int GrassmannPoly::max_generator() const {
  int m = 0;
  for (const auto& [k, c] : terms_)
    if (!k.empty()) m = std::max(m, k.back());
  return m;
}

cplx GrassmannPoly::coeff(const Key& k) const {
  auto it = terms_.find(k);
  return it == terms_.end() ? cplx{0.0} : it->second;
}

void GrassmannPoly::add_term(Key k, cplx c) {
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(std::move(k), c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

GrassmannPoly& GrassmannPoly::operator+=(const GrassmannPoly& o) {
  for (const auto& [k, c] : o.terms_) add_term(k, c);
  return *this;
}

GrassmannPoly& GrassmannPoly::operator-=(const GrassmannPoly& o) {
  for (const auto& [k, c] : o.terms_) add_term(k, -c);
  return *this;
}

GrassmannPoly& GrassmannPoly::operator*=(cplx c) {
  if (c == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [k, v] : terms_) v *= c;
  return *this;
}

GrassmannPoly operator*(const GrassmannPoly& a, const GrassmannPoly& b) {
  GrassmannPoly out;
  GrassmannPoly::Key merged;
  int swaps = 0;
  for (const auto& [ka, ca] : a.terms_) {
    for (const auto& [kb, cb] : b.terms_) {
      if (!merge_keys(ka, kb, merged, swaps)) continue;
      out.add_term(merged, (swaps % 2 ? -1.0 : 1.0) * ca * cb);
    }
  }
  return out;
}

bool operator==(const GrassmannPoly& a, const GrassmannPoly& b) {
  return a.terms_ == b.terms_;
}

GrassmannPoly GrassmannPoly::left_derivative(int k) const {
  GrassmannPoly out;
  for (const auto& [key, c] : terms_) {
    auto it = std::find(key.begin(), key.end(), k);
    if (it == key.end()) continue;
    auto pos = static_cast<int>(it - key.begin());  // 0-based, so (-1)^pos
    Key rest;
    rest.reserve(key.size() - 1);
    rest.insert(rest.end(), key.begin(), it);
    rest.insert(rest.end(), it + 1, key.end());
    out.add_term(std::move(rest), (pos % 2 ? -1.0 : 1.0) * c);
  }
  return out;
}

Parity GrassmannPoly::parity() const {
  std::optional<int> par;
  for (const auto& [k, c] : terms_) {
    int p = static_cast<int>(k.size()) % 2;
    if (!par)
      par = p;
    else if (*par != p)
      throw MixedParityError("polynomial mixes even and odd monomials");
  }
  return (par && *par == 1) ? Parity::odd : Parity::even;
}

double GrassmannPoly::max_coeff_diff(const GrassmannPoly& o) const {
  double m = 0.0;
  for (const auto& [k, c] : terms_) m = std::max(m, std::abs(c - o.coeff(k)));
  for (const auto& [k, c] : o.terms_) m = std::max(m, std::abs(c - coeff(k)));
  return m;
}

GrassmannPoly substitute_linear(const GrassmannPoly& p, const LinearGeneratorMap& map) {
  GrassmannPoly out;
  for (const auto& [key, c] : p.terms()) {
    GrassmannPoly term{c};
    for (int k : key) {
      auto it = map.find(k);
      GrassmannPoly factor;
      if (it == map.end()) {
        factor = GrassmannPoly::generator(k);
      } else {
        for (const auto& [g, w] : it->second) factor += w * GrassmannPoly::generator(g);
      }
      term = term * factor;
    }
    out += term;
  }
  return out;
}

GrassmannPoly gp_exp(const GrassmannPoly& p) {
  if (!p.is_zero() && p.parity() != Parity::even)
    throw MixedParityError("gp_exp needs an even argument");
  GrassmannPoly sum{cplx{1.0}};
  GrassmannPoly power{cplx{1.0}};
  const int max_k = p.max_generator() / 2 + 1;
  for (int k = 1; k <= max_k; ++k) {
    power = power * p;
    if (power.is_zero()) break;
    double kfact = 1.0;
    for (int i = 2; i <= k; ++i) kfact *= i;
    sum += (1.0 / kfact) * power;
  }
  return sum;
}

std::optional<std::size_t> uniqueness_probe(const std::vector<GrassmannPoly>& family) {
  int top = 0;
  for (const auto& g : family) top = std::max(top, g.max_generator());
  const GrassmannPoly probe = GrassmannPoly::generator(top + 1);
  for (std::size_t i = 0; i < family.size(); ++i) {
    // With a fresh generator nothing can annihilate: g * gamma_(K+1) = 0 iff g = 0.
    if (!(family[i] * probe).is_zero()) return i;
  }
  return std::nullopt;
}

}  // namespace kw
