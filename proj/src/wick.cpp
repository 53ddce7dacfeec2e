#include "kw/wick.hpp"

#include <algorithm>
#include <cmath>

namespace kw {

namespace {

// Branch-pair kernel for <0| T_C psi_a(x,t) tpsi_b(x',t') |0> (psi written
// first); the tilde-first value is eps_f times this.
KernelValue channel_pair(const ChannelSpec& spec, Branch a, Branch b, int x, int xp, double tau,
                         double theta0) {
  const double hb = spec.hbar;
  if (a == Branch::plus && b == Branch::plus) {
    auto k = kernel_eval(spec, KernelKind::delta_f, x, xp, tau, theta0);
    return {-I * hb * k.value, k.convention_flagged};
  }
  if (a == Branch::minus && b == Branch::minus) {
    auto k = kernel_eval(spec, KernelKind::delta_ft, x, xp, tau, theta0);
    return {I * hb * k.value, k.convention_flagged};
  }
  if (a == Branch::minus && b == Branch::plus) {
    auto k = kernel_eval(spec, KernelKind::delta_plus, x, xp, tau, theta0);
    return {-I * hb * k.value, false};
  }
  auto k = kernel_eval(spec, KernelKind::delta_minus, x, xp, tau, theta0);
  return {I * hb * k.value, false};
}

}  // namespace

bool contractible(const ChannelSpec& spec, const FieldOp& a, const FieldOp& b) {
  if (spec.field == FieldType::real_field) return a.kind == OpKind::Q && b.kind == OpKind::Q;
  return (a.kind == OpKind::psi && b.kind == OpKind::tpsi) ||
         (a.kind == OpKind::tpsi && b.kind == OpKind::psi);
}

KernelValue contraction_value(const ChannelSpec& spec, const FieldOp& a, const FieldOp& b,
                              double theta0) {
  if (spec.field == FieldType::real_field) {
    if (a.kind != OpKind::Q || b.kind != OpKind::Q)
      throw SpecError("real-field contractions are Q-Q only");
    return channel_pair(spec, a.ct.branch, b.ct.branch, a.x, b.x, a.ct.t - b.ct.t, theta0);
  }
  if (a.kind == OpKind::psi && b.kind == OpKind::tpsi)
    return channel_pair(spec, a.ct.branch, b.ct.branch, a.x, b.x, a.ct.t - b.ct.t, theta0);
  if (a.kind == OpKind::tpsi && b.kind == OpKind::psi) {
    auto k = channel_pair(spec, b.ct.branch, a.ct.branch, b.x, a.x, b.ct.t - a.ct.t, theta0);
    return {spec.eps_f() * k.value, k.convention_flagged};
  }
  if ((a.kind == OpKind::psi && b.kind == OpKind::psi) ||
      (a.kind == OpKind::tpsi && b.kind == OpKind::tpsi))
    return {cplx{0.0}, false};
  throw SpecError("contraction_value expects field operators of one spec");
}

double matching_sign(const std::vector<bool>& fermionic, std::span<const std::pair<int, int>> pairs) {
  for (const auto& [i, j] : pairs)
    if (i >= j) throw SpecError("matching pairs must have i < j");
  std::vector<bool> removed(fermionic.size(), false);
  std::vector<char> contracted(fermionic.size(), 0);
  for (const auto& [i, j] : pairs) {
    if (contracted[i] || contracted[j]) throw SpecError("overlapping matching pairs");
    contracted[i] = contracted[j] = 1;
  }
  auto sorted = std::vector<std::pair<int, int>>(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end());
  long count = 0;
  for (const auto& [i, j] : sorted) {
    if (fermionic[i] && fermionic[j]) {
      for (int k = i + 1; k < j; ++k)
        if (!removed[k] && fermionic[k]) ++count;
    }
    removed[i] = removed[j] = true;
  }
  return count % 2 ? -1.0 : 1.0;
}

namespace {

void canonical_residual(std::vector<FieldOp>& ops, Statistics stat, double& sign) {
  // normal-symbol order: tilded kinds first, then x, then time; branch and
  // input position break ties deterministically
  auto less = [](const FieldOp& a, const FieldOp& b) {
    const int ta = a.kind == OpKind::tpsi ? 0 : 1;
    const int tb = b.kind == OpKind::tpsi ? 0 : 1;
    if (ta != tb) return ta < tb;
    if (a.x != b.x) return a.x < b.x;
    if (a.ct.t != b.ct.t) return a.ct.t < b.ct.t;
    return static_cast<int>(a.ct.branch) < static_cast<int>(b.ct.branch);
  };
  long swaps = 0;
  for (std::size_t i = 1; i < ops.size(); ++i) {
    FieldOp key = ops[i];
    std::size_t j = i;
    while (j > 0 && less(key, ops[j - 1])) {
      ops[j] = ops[j - 1];
      --j;
      ++swaps;
    }
    ops[j] = key;
  }
  if (stat == Statistics::fermi && swaps % 2) sign = -sign;
}

struct Enumerator {
  const ChannelSpec& spec;
  std::span<const FieldOp> ops;
  double theta0;
  WickExpansion* out;
  std::vector<bool> fermionic;
  std::vector<char> used;
  std::vector<std::pair<int, int>> pairs;
  std::vector<cplx> values;
  bool flagged = false;

  void emit() {
    WickTerm term;
    term.contractions = pairs;
    term.values = values;
    cplx coeff = matching_sign(fermionic, pairs);
    for (const auto& v : values) coeff *= v;
    double sign = 1.0;
    for (std::size_t i = 0; i < ops.size(); ++i)
      if (used[i] != 1) term.residual.push_back(ops[i]);
    canonical_residual(term.residual, spec.statistics, sign);
    term.coeff = coeff * sign;
    out->terms.push_back(std::move(term));
  }

  void recurse(std::size_t i) {
    while (i < ops.size() && used[i]) ++i;
    if (i == ops.size()) {
      emit();
      return;
    }
    // leave position i uncontracted
    used[i] = 2;
    recurse(i + 1);
    used[i] = 0;
    // or pair it with each later compatible position
    for (std::size_t j = i + 1; j < ops.size(); ++j) {
      if (used[j] || !contractible(spec, ops[i], ops[j])) continue;
      auto kv = contraction_value(spec, ops[i], ops[j], theta0);
      if (kv.convention_flagged) flagged = true;
      used[i] = used[j] = 1;
      pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
      values.push_back(kv.value);
      recurse(i + 1);
      pairs.pop_back();
      values.pop_back();
      used[i] = used[j] = 0;
    }
  }
};

}  // namespace

WickExpansion wick_expand(const ChannelSpec& spec, std::span<const FieldOp> product,
                          double theta0) {
  for (const auto& op : product) {
    if (is_ladder(op.kind)) throw SpecError("wick_expand takes field operators, not ladders");
    if (spec.field == FieldType::real_field && op.kind != OpKind::Q)
      throw SpecError("real-field products are Q-only");
    if (spec.field == FieldType::channel && op.kind == OpKind::Q)
      throw SpecError("Q does not belong to a channel spec");
  }
  WickExpansion e;
  e.input.assign(product.begin(), product.end());
  Enumerator en{spec, product, theta0, &e,
                std::vector<bool>(product.size(), spec.statistics == Statistics::fermi),
                std::vector<char>(product.size(), 0),
                {},
                {},
                false};
  en.recurse(0);
  e.theta_convention_flagged = en.flagged;
  return e;
}

cplx vacuum_value(const WickExpansion& e) {
  cplx s = 0.0;
  for (const auto& t : e.terms)
    if (t.residual.empty()) s += t.coeff;
  return s;
}

FunctionalPolynomial normal_form_polynomial(const ChannelSpec& spec,
                                            const FunctionalPolynomial& f, double theta0,
                                            int degree_cap) {
  if (f.degree() > degree_cap)
    throw SpecError("polynomial degree exceeds cap " + std::to_string(degree_cap));
  FunctionalPolynomial out(f.statistics());
  for (const auto& [mono, coeff] : f.terms()) {
    std::vector<FieldOp> ops;
    ops.reserve(mono.size());
    for (const auto& atom : mono) {
      if (!is_branch_var(atom.kind))
        throw SpecError("normal_form_polynomial expects branch-field variables");
      OpKind k = atom.kind == VarKind::branch_q ? OpKind::Q
                 : atom.kind == VarKind::branch_psi ? OpKind::psi
                                                    : OpKind::tpsi;
      ops.push_back({k, atom.x, {atom.t, atom.branch}});
    }
    const auto expansion = wick_expand(spec, ops, theta0);
    for (const auto& term : expansion.terms) {
      Monomial residual;
      residual.reserve(term.residual.size());
      for (const auto& op : term.residual) {
        VarKind k = op.kind == OpKind::Q ? VarKind::field_q
                    : op.kind == OpKind::psi ? VarKind::field_psi
                                             : VarKind::field_tpsi;
        residual.push_back({k, Branch::plus, 0, op.x, op.ct.t});
      }
      out.add_term(std::move(residual), coeff * term.coeff);
    }
  }
  return out.canonicalized();
}

long double real_field_term_count(int n_ops) {
  auto binom = [](int n, int k) {
    long double r = 1.0L;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  };
  auto dfact = [](int m) {  // (m-1)!! with (-1)!! = 1
    long double r = 1.0L;
    for (int i = m - 1; i > 1; i -= 2) r *= i;
    return r;
  };
  long double total = 0.0L;
  for (int m = 0; 2 * m <= n_ops; ++m) total += binom(n_ops, 2 * m) * dfact(2 * m);
  return total;
}

}  // namespace kw
