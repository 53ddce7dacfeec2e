#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "kw/fock.hpp"

using namespace kw;

namespace {

ChannelSpec one_mode_channel(Statistics stat, bool nonrel, cplx u = 1.0, cplx v = 0.5,
                             cplx ut = 1.0, cplx vt = 0.5, double omega = 1.0) {
  ChannelSpec s;
  s.field = FieldType::channel;
  s.statistics = stat;
  s.nonrel = nonrel;
  s.x_labels = {"x1"};
  Mode m;
  m.kappa = "k1";
  m.omega = omega;
  m.u = {u};
  m.v = {nonrel ? cplx{0.0} : v};
  m.ut = {ut};
  m.vt = {nonrel ? cplx{0.0} : vt};
  s.modes = {m};
  s.validate();
  return s;
}

ChannelSpec two_mode_channel(Statistics stat, unsigned seed = 11) {
  ChannelSpec s;
  s.field = FieldType::channel;
  s.statistics = stat;
  s.x_labels = {"x1", "x2"};
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int k = 0; k < 2; ++k) {
    Mode m;
    m.kappa = "k" + std::to_string(k + 1);
    m.omega = 0.8 + 0.5 * k;
    for (int x = 0; x < 2; ++x) {
      m.u.push_back({d(rng), d(rng)});
      m.v.push_back({d(rng), d(rng)});
      m.ut.push_back({d(rng), d(rng)});
      m.vt.push_back({d(rng), d(rng)});
    }
    s.modes.push_back(m);
  }
  s.validate();
  return s;
}

dense::Matrix commutator(const dense::Matrix& a, const dense::Matrix& b, double eps_f) {
  auto ab = dense::matmul(a, b);
  auto ba = dense::matmul(b, a);
  ba *= cplx{eps_f};
  return ab - ba;
}

}  // namespace

TEST_CASE("space dimensions and the cap") {
  CHECK(FockSpace::build(one_mode_channel(Statistics::bose, true), 3).dim() == 4);
  CHECK(FockSpace::build(one_mode_channel(Statistics::fermi, false), 1).dim() == 4);

  ChannelSpec big;
  big.field = FieldType::channel;
  big.statistics = Statistics::fermi;
  big.x_labels = {"x1"};
  for (int k = 0; k < 10; ++k) {
    Mode m;
    m.kappa = "k" + std::to_string(k);
    m.omega = 1.0 + 0.1 * k;
    m.u = {cplx{1.0}};
    m.v = {cplx{1.0}};
    m.ut = {cplx{1.0}};
    m.vt = {cplx{1.0}};
    big.modes.push_back(m);
  }
  CHECK_THROWS_AS(FockSpace::build(big, 1), DimensionCapError);  // 2^20 ladders
}

TEST_CASE("ladder operators") {
  SUBCASE("bosonic") {
    const auto spec = one_mode_channel(Statistics::bose, true, 1.0, 0.0, 1.0, 0.0);
    const auto space = FockSpace::build(spec, 5);
    const auto b = mode_operator(space, LadderKind::b, 0);
    const auto bd = mode_operator(space, LadderKind::bdag, 0);
    // <0| b b† |0> = 1
    auto v = space.vacuum();
    auto w = dense::matvec(bd, v);
    w = dense::matvec(b, w);
    CHECK(std::abs(w[0] - cplx{1.0}) < 1e-14);
    // [b, b†] |n> = |n> below the truncation
    const auto comm = commutator(b, bd, 1.0);
    for (std::size_t n = 0; n < 5; ++n) CHECK(std::abs(comm(n, n) - cplx{1.0}) < 1e-14);
  }
  SUBCASE("fermionic anticommutation across ladders") {
    const auto spec = two_mode_channel(Statistics::fermi);
    const auto space = FockSpace::build(spec, 1);
    REQUIRE(space.dim() == 16);
    const auto b0 = mode_operator(space, LadderKind::b, 0);
    const auto b1 = mode_operator(space, LadderKind::b, 1);
    const auto c0d = mode_operator(space, LadderKind::cdag, 0);
    CHECK(dense::matmul(b0, b0).max_abs() == 0.0);  // nilpotent
    // {b0, b0†} = 1, {b0, b1†} = 0, {b0, c0†} = 0
    auto anti = commutator(b0, mode_operator(space, LadderKind::bdag, 0), -1.0);
    for (std::size_t i = 0; i < 16; ++i) anti(i, i) -= 1.0;
    CHECK(anti.max_abs() < 1e-14);
    CHECK(commutator(b0, mode_operator(space, LadderKind::bdag, 1), -1.0).max_abs() < 1e-14);
    CHECK(commutator(b0, c0d, -1.0).max_abs() < 1e-14);
    CHECK(commutator(b1, c0d, -1.0).max_abs() < 1e-14);
  }
}

TEST_CASE("field operators") {
  SUBCASE("oscillator displacement at t = 0") {
    const auto spec = oscillator_spec();
    const auto space = FockSpace::build(spec, 4);
    const auto q = field_operator(space, spec, OpKind::Q, 0, 0.0);
    auto aa = mode_operator(space, LadderKind::b, 0) + mode_operator(space, LadderKind::bdag, 0);
    aa *= cplx{1.0 / std::sqrt(2.0)};
    CHECK(dense::max_abs_diff(q, aa) < 1e-14);
    // <0| Q(0)^2 |0> = 0.5
    const std::vector<FieldOp> ops = {{OpKind::Q, 0, {0.0, Branch::plus}},
                                      {OpKind::Q, 0, {0.0, Branch::plus}}};
    CHECK(std::abs(tc_vev(space, spec, ops) - cplx{0.5}) < 1e-14);
  }
  SUBCASE("single-mode fermionic psi is nilpotent") {
    const auto spec = one_mode_channel(Statistics::fermi, false, 1.0, 0.5, 1.0, 0.0);
    const auto space = FockSpace::build(spec, 1);
    const auto psi = field_operator(space, spec, OpKind::psi, 0, 0.7);
    CHECK(dense::matmul(psi, psi).max_abs() < 1e-14);  // psi ~ b only (vt = 0)
  }
  SUBCASE("matrix path equals the vector fast path") {
    const auto spec = two_mode_channel(Statistics::bose);
    const auto space = FockSpace::build(spec, 3);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<cplx> x(space.dim());
    for (auto& v : x) v = {d(rng), d(rng)};
    const FieldOp op{OpKind::tpsi, 1, {0.421, Branch::minus}};
    const auto m = field_operator(space, spec, op.kind, op.x, op.ct.t);
    const auto y1 = dense::matvec(m, x);
    const auto y2 = apply_field_op(space, spec, op, x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y1[i] - y2[i]) < 1e-12);
  }
}

TEST_CASE("contour sort") {
  const auto real = oscillator_spec();
  SUBCASE("same-branch forward ordering") {
    const std::vector<FieldOp> ops = {{OpKind::Q, 0, {1.0, Branch::plus}},
                                      {OpKind::Q, 0, {3.0, Branch::plus}}};
    const auto r = tc_sort(ops, real);
    CHECK(r.perm == std::vector<std::size_t>{1, 0});
    CHECK(r.sign == 1.0);
  }
  SUBCASE("minus branch is contour-later for any times") {
    for (double t : {-2.0, 0.0, 5.0}) {
      const std::vector<FieldOp> ops = {{OpKind::Q, 0, {t, Branch::minus}},
                                        {OpKind::Q, 0, {1.0, Branch::plus}}};
      const auto r = tc_sort(ops, real);
      CHECK(r.perm == std::vector<std::size_t>{0, 1});
      CHECK(r.sign == 1.0);
    }
  }
  SUBCASE("fermionic transposition sign") {
    const auto spec = one_mode_channel(Statistics::fermi, false);
    const std::vector<FieldOp> ops = {{OpKind::tpsi, 0, {1.0, Branch::plus}},
                                      {OpKind::psi, 0, {2.0, Branch::plus}}};
    const auto r = tc_sort(ops, spec);
    CHECK(r.perm == std::vector<std::size_t>{1, 0});
    CHECK(r.sign == -1.0);
  }
  SUBCASE("distinct fermionic ops at equal contour time are an error") {
    const auto spec = one_mode_channel(Statistics::fermi, false);
    const std::vector<FieldOp> ops = {{OpKind::psi, 0, {1.0, Branch::plus}},
                                      {OpKind::tpsi, 0, {1.0, Branch::plus}}};
    CHECK_THROWS_AS(tc_sort(ops, spec), TieAtEqualTimeError);
  }
  SUBCASE("sign is multiplicative under composed shuffles") {
    const auto spec = two_mode_channel(Statistics::fermi);
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> td(-4.0, 4.0);
    for (int rep = 0; rep < 40; ++rep) {
      std::vector<FieldOp> ops;
      for (int i = 0; i < 5; ++i)
        ops.push_back({i % 2 ? OpKind::psi : OpKind::tpsi, i % 2, {td(rng),
                       rng() % 2 ? Branch::plus : Branch::minus}});
      const auto base = tc_sort(ops, spec);
      std::vector<std::size_t> p(ops.size());
      std::iota(p.begin(), p.end(), 0u);
      std::shuffle(p.begin(), p.end(), rng);
      long inv = 0;
      for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = i + 1; j < p.size(); ++j)
          if (p[i] > p[j]) ++inv;
      std::vector<FieldOp> shuffled;
      for (auto k : p) shuffled.push_back(ops[k]);
      const auto after = tc_sort(shuffled, spec);
      CHECK(after.sign == base.sign * (inv % 2 ? -1.0 : 1.0));
    }
  }
}

TEST_CASE("vacuum expectations") {
  SUBCASE("oscillator pair value") {
    const auto spec = oscillator_spec();
    const auto space = FockSpace::build(spec, 8);
    for (auto [t, tp] : {std::pair{1.3, 0.4}, std::pair{-0.7, 2.1}}) {
      const std::vector<FieldOp> ops = {{OpKind::Q, 0, {t, Branch::minus}},
                                        {OpKind::Q, 0, {tp, Branch::plus}}};
      const cplx expected = 0.5 * std::exp(cplx{0.0, -(t - tp)});
      CHECK(std::abs(tc_vev(space, spec, ops) - expected) < 1e-13);
    }
  }
  SUBCASE("single operators and odd fermionic products vanish") {
    const auto spec = one_mode_channel(Statistics::fermi, false);
    const auto space = FockSpace::build(spec, 1);
    const std::vector<FieldOp> one = {{OpKind::psi, 0, {0.3, Branch::plus}}};
    CHECK(std::abs(tc_vev(space, spec, one)) == 0.0);
    const std::vector<FieldOp> three = {{OpKind::psi, 0, {0.3, Branch::plus}},
                                        {OpKind::tpsi, 0, {0.9, Branch::minus}},
                                        {OpKind::psi, 0, {1.4, Branch::plus}}};
    CHECK(std::abs(tc_vev(space, spec, three)) == 0.0);
  }
  SUBCASE("bosonic truncation guard") {
    const auto spec = oscillator_spec(1.0, 1.0, 2);
    const auto space = FockSpace::build(spec, 2);
    std::vector<FieldOp> ops(4, FieldOp{OpKind::Q, 0, {0.0, Branch::plus}});
    for (int i = 0; i < 4; ++i) ops[static_cast<std::size_t>(i)].ct.t = 0.3 * i;
    CHECK_THROWS_AS(tc_vev(space, spec, ops), SpecError);
  }
}

TEST_CASE("channel commutator identities hold at any pair of times") {
  for (auto stat : {Statistics::bose, Statistics::fermi}) {
    const auto spec = two_mode_channel(stat);
    const auto space = FockSpace::build(spec, stat == Statistics::fermi ? 1 : 3);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> td(-3.0, 3.0);
    for (int rep = 0; rep < 4; ++rep) {
      const double t = td(rng), tp = td(rng);
      for (int x = 0; x < 2; ++x) {
        for (int xp = 0; xp < 2; ++xp) {
          const auto psi = field_operator(space, spec, OpKind::psi, x, t);
          const auto psip = field_operator(space, spec, OpKind::psi, xp, tp);
          const auto tpsi = field_operator(space, spec, OpKind::tpsi, x, t);
          const auto tpsip = field_operator(space, spec, OpKind::tpsi, xp, tp);
          CHECK(commutator(psi, psip, spec.eps_f()).max_abs() < 1e-13);
          CHECK(commutator(tpsi, tpsip, spec.eps_f()).max_abs() < 1e-13);
        }
      }
    }
    // anomalous pair vevs vanish
    const std::vector<FieldOp> pp = {{OpKind::psi, 0, {0.2, Branch::minus}},
                                     {OpKind::psi, 1, {1.1, Branch::plus}}};
    const std::vector<FieldOp> tt = {{OpKind::tpsi, 0, {0.2, Branch::minus}},
                                     {OpKind::tpsi, 1, {1.1, Branch::plus}}};
    CHECK(std::abs(tc_vev(space, spec, pp)) < 1e-14);
    CHECK(std::abs(tc_vev(space, spec, tt)) < 1e-14);
  }
}

TEST_CASE("moments of the generating functional") {
  const auto spec = oscillator_spec();
  const auto space = FockSpace::build(spec, 6);
  const std::vector<SourceSlot> slots = {{SrcComp::eta_p, 0, 0.7}, {SrcComp::eta_m, 0, -0.4}};

  const std::vector<int> zero{0, 0};
  CHECK(moment_vev(space, spec, slots, zero) == cplx{1.0});
  const std::vector<int> first{1, 0};
  CHECK(std::abs(moment_vev(space, spec, slots, first)) == 0.0);

  const std::vector<int> order11{1, 1};
  const std::vector<FieldOp> qq = {{OpKind::Q, 0, {-0.4, Branch::minus}},
                                   {OpKind::Q, 0, {0.7, Branch::plus}}};
  const cplx expected = I * (-I) * tc_vev(space, spec, qq);
  CHECK(std::abs(moment_vev(space, spec, slots, order11) - expected) < 1e-14);
}
