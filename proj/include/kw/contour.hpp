#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kw/channel.hpp"
#include "kw/types.hpp"

namespace kw {

enum class Branch : std::int8_t { plus, minus };

inline char branch_char(Branch b) { return b == Branch::plus ? '+' : '-'; }

/// A point on the closed-time contour.  Total order: every minus-branch
/// point succeeds every plus-branch point; the plus branch is ordered by
/// ascending t, the minus branch by descending t.
struct ContourTime {
  double t = 0.0;
  Branch branch = Branch::plus;

  friend bool operator==(const ContourTime&, const ContourTime&) = default;
};

/// True when a is strictly contour-later than b (i.e. a stands to the left
/// of b in the ordered product).
inline bool contour_later(const ContourTime& a, const ContourTime& b) {
  if (a.branch != b.branch) return a.branch == Branch::minus;
  if (a.branch == Branch::plus) return a.t > b.t;
  return a.t < b.t;
}

enum class OpKind : std::int8_t { Q, psi, tpsi, b, bdag, c, cdag };

std::string op_kind_name(OpKind k);

/// One field-operator occurrence in a product.  `x` indexes the spec's
/// x-label set for Q/psi/tpsi and the mode list for ladder operators.
struct FieldOp {
  OpKind kind = OpKind::Q;
  int x = 0;
  ContourTime ct{};

  friend bool operator==(const FieldOp&, const FieldOp&) = default;
};

inline bool is_ladder(OpKind k) {
  return k == OpKind::b || k == OpKind::bdag || k == OpKind::c || k == OpKind::cdag;
}

inline bool is_fermionic(const FieldOp& op, const ChannelSpec& spec) {
  (void)op;
  return spec.statistics == Statistics::fermi;
}

struct TcSortResult {
  std::vector<std::size_t> perm;  // perm[i] = input index of the i-th (leftmost) factor
  double sign = 1.0;
};

/// Contour-sorts a product (leftmost = contour-latest).  The sign is
/// eps_f^(transpositions among fermionic operators); bosonic moves are free.
/// Distinct fermionic operators tied at the same contour time are an error;
/// bosonic ties keep input order.
TcSortResult tc_sort(std::span<const FieldOp> ops, const ChannelSpec& spec);

}  // namespace kw
