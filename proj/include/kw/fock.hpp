#pragma once

#include <map>
#include <span>
#include <vector>

#include "kw/channel.hpp"
#include "kw/contour.hpp"
#include "kw/dense.hpp"
#include "kw/grassmann.hpp"
#include "kw/types.hpp"

namespace kw {

inline constexpr std::size_t kDefaultDimCap = 4096;

/// Truncated-bosonic / exact-fermionic mode space for a ChannelSpec: one
/// b ladder per mode plus, for channels with antiparticles, one c ladder.
/// Fermionic ladders anticommute through Jordan-Wigner parity strings.
/// Basis index 0 is the vacuum.
class FockSpace {
 public:
  struct Ladder {
    int mode;
    bool anti;  // c-type
  };

  static FockSpace build(const ChannelSpec& spec, int truncation,
                         std::size_t dim_cap = kDefaultDimCap);

  std::size_t dim() const { return dim_; }
  int truncation() const { return ntrunc_; }
  const std::vector<Ladder>& ladders() const { return ladders_; }
  Statistics statistics() const { return stat_; }

  std::vector<cplx> vacuum() const;

  /// y += weight * op(ladder) x for op in {annihilate, create}.
  void apply_annihilate(std::size_t ladder, cplx weight, std::span<const cplx> x,
                        std::span<cplx> y) const;
  void apply_create(std::size_t ladder, cplx weight, std::span<const cplx> x,
                    std::span<cplx> y) const;

  std::size_t ladder_index(int mode, bool anti) const;

 private:
  Statistics stat_ = Statistics::bose;
  int ntrunc_ = 0;
  std::size_t local_dim_ = 0;
  std::size_t dim_ = 0;
  std::vector<Ladder> ladders_;
  std::vector<std::size_t> strides_;
};

enum class LadderKind { b, bdag, c, cdag };

/// Dense matrix of a single creation/annihilation operator at t = 0.
dense::Matrix mode_operator(const FockSpace& space, LadderKind which, int mode);

/// Dense matrix of a field operator (mode sum with sqrt(hbar/2w) factors and
/// e^{-+iwt} phases); branch labels are ordering data and do not enter here.
dense::Matrix field_operator(const FockSpace& space, const ChannelSpec& spec, OpKind kind,
                             int x, double t);

/// y = op x without materializing the operator matrix.
std::vector<cplx> apply_field_op(const FockSpace& space, const ChannelSpec& spec,
                                 const FieldOp& op, std::span<const cplx> x);

/// <0| T_C (product) |0>: contour-sorts, applies right to left, reads the
/// vacuum component.  Exact for bosons when the truncation admits every
/// creation-type insertion (guarded).
cplx tc_vev(const FockSpace& space, const ChannelSpec& spec, std::span<const FieldOp> ops);

/// One source slot of the vacuum generating functional.
enum class SrcComp : std::int8_t { eta_p, eta_m, etat_p, etat_m };

struct SourceSlot {
  SrcComp comp;
  int x = 0;
  double t = 0.0;
};

/// The field operator a source component couples to, with its +-i phase:
/// channel  i etat+ psi+ + i tpsi+ eta+ - i etat- psi- - i tpsi- eta-,
/// real     i eta+ Q+ - i eta- Q-.
FieldOp slot_operator(const ChannelSpec& spec, const SourceSlot& slot);
cplx slot_phase(const SourceSlot& slot);
bool slot_source_first(const ChannelSpec& spec, const SourceSlot& slot);

/// Taylor coefficient of Phi_vac at the given multi-index over the slots
/// (bosonic sources): tc_vev of the corresponding operator product with the
/// 1/n! factors and branch phases.
cplx moment_vev(const FockSpace& space, const ChannelSpec& spec,
                std::span<const SourceSlot> slots, std::span<const int> order,
                int max_total_order = 4);

/// Brute-force Phi_vac for fermionic (Grassmann) sources: expands
/// T_C exp(sum_a S_a) over subsets (nilpotency truncates), extracts the
/// generators with anticommutation signs, contour-orders the operators and
/// assembles the dense-matrix expectations into a GrassmannPoly.
GrassmannPoly oracle_phi_vac(const FockSpace& space, const ChannelSpec& spec,
                             std::span<const SourceSlot> slots,
                             std::span<const GrassmannPoly> values);

}  // namespace kw
