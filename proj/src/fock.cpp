#include "kw/fock.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kw {

FockSpace FockSpace::build(const ChannelSpec& spec, int truncation, std::size_t dim_cap) {
  spec.validate();
  FockSpace s;
  s.stat_ = spec.statistics;
  s.ntrunc_ = truncation;
  s.local_dim_ = spec.statistics == Statistics::fermi ? 2 : static_cast<std::size_t>(truncation) + 1;
  if (s.local_dim_ < 2) throw SpecError("truncation must be >= 1");

  const bool has_anti = spec.field == FieldType::channel && !spec.nonrel;
  for (int m = 0; m < static_cast<int>(spec.n_modes()); ++m) s.ladders_.push_back({m, false});
  if (has_anti)
    for (int m = 0; m < static_cast<int>(spec.n_modes()); ++m) s.ladders_.push_back({m, true});

  std::size_t dim = 1;
  for (std::size_t l = 0; l < s.ladders_.size(); ++l) {
    if (dim > dim_cap / s.local_dim_)
      throw DimensionCapError("mode space dimension exceeds cap " + std::to_string(dim_cap));
    dim *= s.local_dim_;
  }
  if (dim > dim_cap)
    throw DimensionCapError("mode space dimension exceeds cap " + std::to_string(dim_cap));
  s.dim_ = dim;

  s.strides_.resize(s.ladders_.size());
  std::size_t stride = 1;
  for (std::size_t l = s.ladders_.size(); l-- > 0;) {
    s.strides_[l] = stride;
    stride *= s.local_dim_;
  }
  return s;
}

std::vector<cplx> FockSpace::vacuum() const {
  std::vector<cplx> v(dim_);
  v[0] = 1.0;
  return v;
}

std::size_t FockSpace::ladder_index(int mode, bool anti) const {
  for (std::size_t l = 0; l < ladders_.size(); ++l)
    if (ladders_[l].mode == mode && ladders_[l].anti == anti) return l;
  throw SpecError("no such ladder (mode " + std::to_string(mode) +
                  (anti ? ", antiparticle)" : ")"));
}

namespace {

// Jordan-Wigner parity of the ladders before `ladder` in basis state idx.
inline double jw_sign(std::size_t idx, std::size_t ladder,
                      const std::vector<std::size_t>& strides, std::size_t local_dim) {
  int occ = 0;
  for (std::size_t m = 0; m < ladder; ++m) occ += static_cast<int>((idx / strides[m]) % local_dim);
  return occ % 2 ? -1.0 : 1.0;
}

}  // namespace

void FockSpace::apply_annihilate(std::size_t ladder, cplx weight, std::span<const cplx> x,
                                 std::span<cplx> y) const {
  const std::size_t stride = strides_[ladder];
  const bool fermi = stat_ == Statistics::fermi;
  for (std::size_t idx = 0; idx < dim_; ++idx) {
    if (x[idx] == 0.0) continue;
    const std::size_t occ = (idx / stride) % local_dim_;
    if (occ == 0) continue;
    double amp = fermi ? 1.0 : std::sqrt(static_cast<double>(occ));
    if (fermi) amp *= jw_sign(idx, ladder, strides_, local_dim_);
    y[idx - stride] += weight * amp * x[idx];
  }
}

void FockSpace::apply_create(std::size_t ladder, cplx weight, std::span<const cplx> x,
                             std::span<cplx> y) const {
  const std::size_t stride = strides_[ladder];
  const bool fermi = stat_ == Statistics::fermi;
  for (std::size_t idx = 0; idx < dim_; ++idx) {
    if (x[idx] == 0.0) continue;
    const std::size_t occ = (idx / stride) % local_dim_;
    if (fermi) {
      if (occ != 0) continue;
    } else if (occ + 1 > static_cast<std::size_t>(ntrunc_)) {
      continue;  // truncated top state
    }
    double amp = fermi ? 1.0 : std::sqrt(static_cast<double>(occ) + 1.0);
    if (fermi) amp *= jw_sign(idx, ladder, strides_, local_dim_);
    y[idx + stride] += weight * amp * x[idx];
  }
}

dense::Matrix mode_operator(const FockSpace& space, LadderKind which, int mode) {
  const bool anti = which == LadderKind::c || which == LadderKind::cdag;
  const bool create = which == LadderKind::bdag || which == LadderKind::cdag;
  const std::size_t l = space.ladder_index(mode, anti);
  dense::Matrix m(space.dim(), space.dim());
  std::vector<cplx> col(space.dim()), out(space.dim());
  for (std::size_t j = 0; j < space.dim(); ++j) {
    std::fill(col.begin(), col.end(), cplx{0.0});
    std::fill(out.begin(), out.end(), cplx{0.0});
    col[j] = 1.0;
    if (create)
      space.apply_create(l, 1.0, col, out);
    else
      space.apply_annihilate(l, 1.0, col, out);
    for (std::size_t i = 0; i < space.dim(); ++i) m(i, j) = out[i];
  }
  return m;
}

namespace {

struct LadderTerm {
  std::size_t ladder;
  bool create;
  cplx weight;
};

std::vector<LadderTerm> field_terms(const FockSpace& space, const ChannelSpec& spec,
                                    OpKind kind, int x, double t) {
  std::vector<LadderTerm> terms;
  const bool real = spec.field == FieldType::real_field;
  switch (kind) {
    case OpKind::Q: {
      if (!real) throw SpecError("Q is only defined for real-field specs");
      for (int m = 0; m < static_cast<int>(spec.n_modes()); ++m) {
        const Mode& mode = spec.modes[m];
        const double pref = std::sqrt(spec.hbar / (2.0 * mode.omega));
        const cplx down = std::exp(cplx{0.0, -mode.omega * t});
        terms.push_back({space.ladder_index(m, false), false, pref * mode.u.at(x) * down});
        terms.push_back({space.ladder_index(m, false), true,
                         pref * std::conj(mode.u.at(x)) * std::conj(down)});
      }
      break;
    }
    case OpKind::psi:
    case OpKind::tpsi: {
      if (real) throw SpecError("psi/tpsi are only defined for channel specs");
      for (int m = 0; m < static_cast<int>(spec.n_modes()); ++m) {
        const Mode& mode = spec.modes[m];
        const double pref = std::sqrt(spec.hbar / (2.0 * mode.omega));
        const cplx down = std::exp(cplx{0.0, -mode.omega * t});
        const cplx up = std::conj(down);
        if (kind == OpKind::psi) {
          terms.push_back({space.ladder_index(m, false), false, pref * mode.u.at(x) * down});
          if (!spec.nonrel)
            terms.push_back({space.ladder_index(m, true), true, pref * mode.vt.at(x) * up});
        } else {
          if (!spec.nonrel)
            terms.push_back({space.ladder_index(m, true), false, pref * mode.v.at(x) * down});
          terms.push_back({space.ladder_index(m, false), true, pref * mode.ut.at(x) * up});
        }
      }
      break;
    }
    case OpKind::b:
    case OpKind::bdag:
    case OpKind::c:
    case OpKind::cdag: {
      const int m = x;
      if (m < 0 || m >= static_cast<int>(spec.n_modes())) throw SpecError("unknown mode index");
      const bool anti = kind == OpKind::c || kind == OpKind::cdag;
      const bool create = kind == OpKind::bdag || kind == OpKind::cdag;
      const double w = spec.modes[m].omega;
      const cplx phase = std::exp(cplx{0.0, (create ? w : -w) * t});
      terms.push_back({space.ladder_index(m, anti), create, phase});
      break;
    }
  }
  return terms;
}

}  // namespace

dense::Matrix field_operator(const FockSpace& space, const ChannelSpec& spec, OpKind kind,
                             int x, double t) {
  if (!is_ladder(kind) && (x < 0 || x >= static_cast<int>(spec.n_x())))
    throw SpecError("unknown x label index");
  const auto terms = field_terms(space, spec, kind, x, t);
  dense::Matrix m(space.dim(), space.dim());
  std::vector<cplx> col(space.dim()), out(space.dim());
  for (std::size_t j = 0; j < space.dim(); ++j) {
    std::fill(col.begin(), col.end(), cplx{0.0});
    std::fill(out.begin(), out.end(), cplx{0.0});
    col[j] = 1.0;
    for (const auto& term : terms) {
      if (term.create)
        space.apply_create(term.ladder, term.weight, col, out);
      else
        space.apply_annihilate(term.ladder, term.weight, col, out);
    }
    for (std::size_t i = 0; i < space.dim(); ++i) m(i, j) = out[i];
  }
  return m;
}

std::vector<cplx> apply_field_op(const FockSpace& space, const ChannelSpec& spec,
                                 const FieldOp& op, std::span<const cplx> x) {
  std::vector<cplx> y(space.dim());
  for (const auto& term : field_terms(space, spec, op.kind, op.x, op.ct.t)) {
    if (term.create)
      space.apply_create(term.ladder, term.weight, x, y);
    else
      space.apply_annihilate(term.ladder, term.weight, x, y);
  }
  return y;
}

namespace {

bool has_creation_part(const ChannelSpec& spec, const FieldOp& op) {
  switch (op.kind) {
    case OpKind::Q: return true;
    case OpKind::psi: return !spec.nonrel && spec.field == FieldType::channel;
    case OpKind::tpsi: return true;
    case OpKind::bdag:
    case OpKind::cdag: return true;
    default: return false;
  }
}

}  // namespace

cplx tc_vev(const FockSpace& space, const ChannelSpec& spec, std::span<const FieldOp> ops) {
  if (space.statistics() == Statistics::bose) {
    int creations = 0;
    for (const auto& op : ops) creations += has_creation_part(spec, op) ? 1 : 0;
    if (creations > space.truncation())
      throw SpecError("truncation " + std::to_string(space.truncation()) +
                      " too small for " + std::to_string(creations) +
                      " creation-type insertions");
  }
  const auto sorted = tc_sort(ops, spec);
  std::vector<cplx> v = space.vacuum();
  for (std::size_t i = sorted.perm.size(); i-- > 0;)
    v = apply_field_op(space, spec, ops[sorted.perm[i]], v);
  return sorted.sign * v[0];
}

FieldOp slot_operator(const ChannelSpec& spec, const SourceSlot& slot) {
  const bool real = spec.field == FieldType::real_field;
  FieldOp op;
  op.x = slot.x;
  op.ct.t = slot.t;
  switch (slot.comp) {
    case SrcComp::eta_p:
      op.kind = real ? OpKind::Q : OpKind::tpsi;
      op.ct.branch = Branch::plus;
      break;
    case SrcComp::eta_m:
      op.kind = real ? OpKind::Q : OpKind::tpsi;
      op.ct.branch = Branch::minus;
      break;
    case SrcComp::etat_p:
      if (real) throw SpecError("tilded sources are channel-only");
      op.kind = OpKind::psi;
      op.ct.branch = Branch::plus;
      break;
    case SrcComp::etat_m:
      if (real) throw SpecError("tilded sources are channel-only");
      op.kind = OpKind::psi;
      op.ct.branch = Branch::minus;
      break;
  }
  return op;
}

cplx slot_phase(const SourceSlot& slot) {
  switch (slot.comp) {
    case SrcComp::eta_p:
    case SrcComp::etat_p: return cplx{0.0, 1.0};
    default: return cplx{0.0, -1.0};
  }
}

bool slot_source_first(const ChannelSpec& spec, const SourceSlot& slot) {
  if (spec.field == FieldType::real_field) return true;  // eta Q ordering
  // i etat psi  (source first) vs  i tpsi eta  (source last)
  return slot.comp == SrcComp::etat_p || slot.comp == SrcComp::etat_m;
}

cplx moment_vev(const FockSpace& space, const ChannelSpec& spec,
                std::span<const SourceSlot> slots, std::span<const int> order,
                int max_total_order) {
  if (slots.size() != order.size()) throw SpecError("order multi-index size mismatch");
  int total = 0;
  for (int o : order) total += o;
  if (total > max_total_order)
    throw SpecError("moment order " + std::to_string(total) + " exceeds cap " +
                    std::to_string(max_total_order));
  std::vector<FieldOp> ops;
  cplx phases = 1.0;
  double factorial = 1.0;
  for (std::size_t a = 0; a < slots.size(); ++a) {
    for (int r = 0; r < order[a]; ++r) {
      ops.push_back(slot_operator(spec, slots[a]));
      phases *= slot_phase(slots[a]);
      factorial *= static_cast<double>(r + 1);
    }
  }
  if (ops.empty()) return 1.0;
  return phases * tc_vev(space, spec, ops) / factorial;
}

GrassmannPoly oracle_phi_vac(const FockSpace& space, const ChannelSpec& spec,
                             std::span<const SourceSlot> slots,
                             std::span<const GrassmannPoly> values) {
  if (spec.statistics != Statistics::fermi)
    throw SpecError("oracle_phi_vac with Grassmann sources is fermionic-only");
  if (slots.size() != values.size()) throw SpecError("slot/value size mismatch");
  for (const auto& g : values)
    if (!g.is_zero() && g.parity() != Parity::odd)
      throw SpecError("fermionic source values must be odd Grassmann elements");

  const std::size_t n = slots.size();
  if (n > 20) throw SpecError("too many source slots");
  GrassmannPoly result{cplx{1.0}};  // empty subset

  for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
    // One addend per chosen slot; each S_a is even, so any order of the
    // subset gives the same term and the 1/n! cancels against n! orderings.
    std::vector<FieldOp> ops;
    GrassmannPoly gamma{cplx{1.0}};
    int ops_seen = 0;
    int extraction_swaps = 0;
    for (std::size_t a = 0; a < n; ++a) {
      if (!(mask & (std::size_t{1} << a))) continue;
      const cplx phase = slot_phase(slots[a]);
      const FieldOp op = slot_operator(spec, slots[a]);
      if (slot_source_first(spec, slots[a])) {
        extraction_swaps += ops_seen;
        gamma = gamma * (phase * values[a]);
        ops.push_back(op);
        ++ops_seen;
      } else {
        ops.push_back(op);
        ++ops_seen;
        extraction_swaps += ops_seen;
        gamma = gamma * (phase * values[a]);
      }
    }
    if (gamma.is_zero()) continue;
    const double sign = extraction_swaps % 2 ? -1.0 : 1.0;
    const cplx vev = tc_vev(space, spec, ops);
    if (vev == 0.0) continue;
    result += sign * vev * gamma;
  }
  return result;
}

}  // namespace kw
