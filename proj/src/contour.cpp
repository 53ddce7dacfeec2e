#include "kw/contour.hpp"

#include <algorithm>
#include <numeric>

namespace kw {

std::string op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::Q: return "Q";
    case OpKind::psi: return "psi";
    case OpKind::tpsi: return "tpsi";
    case OpKind::b: return "b";
    case OpKind::bdag: return "bdag";
    case OpKind::c: return "c";
    case OpKind::cdag: return "cdag";
  }
  return "?";
}

TcSortResult tc_sort(std::span<const FieldOp> ops, const ChannelSpec& spec) {
  TcSortResult res;
  res.perm.resize(ops.size());
  std::iota(res.perm.begin(), res.perm.end(), std::size_t{0});
  std::stable_sort(res.perm.begin(), res.perm.end(), [&](std::size_t a, std::size_t b) {
    return contour_later(ops[a].ct, ops[b].ct);
  });

  if (spec.statistics == Statistics::fermi) {
    // Ties between distinct fermionic operators are undefined (theta(0) for
    // operators); identical factors are allowed, the product vanishes anyway.
    for (std::size_t i = 0; i + 1 < res.perm.size(); ++i) {
      const FieldOp& a = ops[res.perm[i]];
      const FieldOp& b = ops[res.perm[i + 1]];
      if (a.ct == b.ct && !(a == b))
        throw TieAtEqualTimeError("distinct fermionic operators at equal contour time");
    }
    // Parity of the permutation restricted to fermionic factors; here every
    // factor is fermionic, so count inversions of the whole permutation.
    long inversions = 0;
    for (std::size_t i = 0; i < res.perm.size(); ++i)
      for (std::size_t j = i + 1; j < res.perm.size(); ++j)
        if (res.perm[i] > res.perm[j]) ++inversions;
    res.sign = (inversions % 2 == 0) ? 1.0 : -1.0;
  }
  return res;
}

}  // namespace kw
