#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kw/fock.hpp"
#include "kw/kernels.hpp"

using namespace kw;

namespace {

ChannelSpec random_channel(Statistics stat, bool nonrel, unsigned seed, int n_modes = 2,
                           int nx = 2) {
  ChannelSpec s;
  s.field = FieldType::channel;
  s.statistics = stat;
  s.nonrel = nonrel;
  s.x_labels.clear();
  for (int x = 0; x < nx; ++x) s.x_labels.push_back("x" + std::to_string(x + 1));
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::uniform_real_distribution<double> wd(0.5, 2.0);
  for (int k = 0; k < n_modes; ++k) {
    Mode m;
    m.kappa = "k" + std::to_string(k + 1);
    m.omega = wd(rng);
    for (int x = 0; x < nx; ++x) {
      m.u.push_back({d(rng), d(rng)});
      m.v.push_back(nonrel ? cplx{0.0} : cplx{d(rng), d(rng)});
      m.ut.push_back({d(rng), d(rng)});
      m.vt.push_back(nonrel ? cplx{0.0} : cplx{d(rng), d(rng)});
    }
    s.modes.push_back(m);
  }
  s.validate();
  return s;
}

SampledSignal on_grid_exponential(const VerificationGrid& g, int bin, cplx amp) {
  SampledSignal s = make_signal(g.n, g.dt);
  const double w = 2.0 * std::numbers::pi * bin / (static_cast<double>(g.n) * g.dt);
  for (std::size_t j = 0; j < s.v.size(); ++j)
    s.v[j] = amp * std::exp(cplx{0.0, -w * s.time(j)});
  return s;
}

}  // namespace

TEST_CASE("closed-form kernel values") {
  SUBCASE("oscillator transfer function") {
    const auto spec = oscillator_spec();
    CHECK(std::abs(kernel_eval(spec, KernelKind::g_r, 0, 0, std::numbers::pi / 2).value -
                   cplx{1.0}) < 1e-15);
    // theta support
    CHECK(kernel_eval(spec, KernelKind::g_r, 0, 0, -0.5).value == cplx{0.0});
  }
  SUBCASE("single-mode kernels") {
    const auto spec = oscillator_spec(2.0);
    CHECK(kernel_eval(spec, KernelKind::mode_g_plus, 0, 0, 0.0).value == I);
    const cplx gf = kernel_eval(spec, KernelKind::mode_g_f, 0, 0, 1.2).value;
    CHECK(std::abs(gf - I * std::exp(cplx{0.0, -2.0 * 1.2})) < 1e-15);
  }
  SUBCASE("channel Delta+ at zero lag") {
    ChannelSpec s;
    s.field = FieldType::channel;
    s.statistics = Statistics::bose;
    s.x_labels = {"x1"};
    Mode m;
    m.kappa = "k1";
    m.omega = 2.0;
    m.u = {cplx{1.0}};
    m.v = {cplx{0.0}};
    m.ut = {cplx{1.0}};
    m.vt = {cplx{0.0}};
    s.modes = {m};
    CHECK(std::abs(kernel_eval(s, KernelKind::delta_plus, 0, 0, 0.0).value - I * 0.25) < 1e-15);
  }
  SUBCASE("retarded supports") {
    const auto spec = random_channel(Statistics::fermi, false, 3);
    for (double tau : {0.1, 1.7}) {
      CHECK(kernel_eval(spec, KernelKind::delta_r, 0, 1, -tau).value == cplx{0.0});
      CHECK(kernel_eval(spec, KernelKind::delta_rt, 0, 1, tau).value == cplx{0.0});
    }
    // theta(0) convention flag
    CHECK(kernel_eval(spec, KernelKind::delta_f, 0, 0, 0.0).convention_flagged);
    CHECK_FALSE(kernel_eval(spec, KernelKind::delta_plus, 0, 0, 0.0).convention_flagged);
  }
  SUBCASE("commutator reduction for nonrel") {
    const auto spec = random_channel(Statistics::bose, true, 5);
    for (double tau : {-1.0, 0.3}) {
      const cplx d = commutator_delta(spec, 0, 1, tau);
      const cplx dp = kernel_eval(spec, KernelKind::delta_plus, 0, 1, tau).value;
      CHECK(std::abs(d - dp) < 1e-15);
      CHECK(kernel_eval(spec, KernelKind::delta_minus, 0, 1, tau).value == cplx{0.0});
    }
  }
  SUBCASE("oscillator commutator against the oracle") {
    const auto spec = oscillator_spec();
    const auto space = FockSpace::build(spec, 6);
    for (auto [t, tp] : {std::pair{1.1, 0.3}, std::pair{-0.4, 0.9}}) {
      const auto qa = field_operator(space, spec, OpKind::Q, 0, t);
      const auto qb = field_operator(space, spec, OpKind::Q, 0, tp);
      const auto comm = dense::matmul(qa, qb) - dense::matmul(qb, qa);
      auto v = dense::matvec(comm, space.vacuum());
      const cplx expected = -I * spec.hbar * commutator_delta(spec, 0, 0, t - tp);
      CHECK(std::abs(v[0] - expected) < 1e-13);
    }
  }
}

TEST_CASE("frequency projection") {
  VerificationGrid g;
  g.n = 256;
  g.dt = 0.31;
  g.t0 = -static_cast<double>(g.n / 2) * g.dt;

  SUBCASE("frequency-positive exponential is invariant") {
    const auto s = on_grid_exponential(g, 9, {1.0, 0.5});
    const auto sp = freq_part(s, +1);
    for (std::size_t j = 0; j < s.v.size(); ++j) CHECK(std::abs(sp.v[j] - s.v[j]) < 1e-12);
  }
  SUBCASE("cosine splits in half") {
    const auto plus = on_grid_exponential(g, 7, 0.5);
    const auto minus = on_grid_exponential(g, -7, 0.5);
    SampledSignal cosw = plus;
    for (std::size_t j = 0; j < cosw.v.size(); ++j) cosw.v[j] += minus.v[j];
    const auto p = freq_part(cosw, +1);
    for (std::size_t j = 0; j < p.v.size(); ++j) CHECK(std::abs(p.v[j] - plus.v[j]) < 1e-12);
  }
  SUBCASE("decomposition, idempotence, annihilation, DC convention") {
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    SampledSignal s = make_signal(g.n, g.dt);
    for (auto& v : s.v) v = {d(rng), d(rng)};  // arbitrary content incl. DC
    const auto p = freq_part(s, +1);
    const auto m = freq_part(s, -1);
    for (std::size_t j = 0; j < s.v.size(); ++j)
      CHECK(std::abs(p.v[j] + m.v[j] - s.v[j]) < 1e-12);
    // bin-exact idempotence/annihilation on DC/Nyquist-free signals
    const auto f = on_grid_exponential(g, 5, 1.0);
    SampledSignal f2 = f;
    const auto neg = on_grid_exponential(g, -11, {0.3, 0.7});
    for (std::size_t j = 0; j < f2.v.size(); ++j) f2.v[j] += neg.v[j];
    const auto fp = freq_part(f2, +1);
    for (std::size_t j = 0; j < f2.v.size(); ++j) {
      CHECK(std::abs(freq_part(fp, +1).v[j] - fp.v[j]) < 1e-12);
      CHECK(std::abs(freq_part(fp, -1).v[j]) < 1e-12);
    }
  }
  SUBCASE("transfer identities for on-grid exponentials") {
    std::mt19937 rng(4);
    std::uniform_int_distribution<int> bin(1, 30);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
      SampledSignal f = make_signal(g.n, g.dt);
      SampledSignal h = make_signal(g.n, g.dt);
      for (int k = 0; k < 3; ++k) {
        const auto a = on_grid_exponential(g, (rng() % 2 ? 1 : -1) * bin(rng), {d(rng), d(rng)});
        const auto b = on_grid_exponential(g, (rng() % 2 ? 1 : -1) * bin(rng), {d(rng), d(rng)});
        for (std::size_t j = 0; j < f.v.size(); ++j) {
          f.v[j] += a.v[j];
          h.v[j] += b.v[j];
        }
      }
      cplx m1 = 0.0, m2 = 0.0, m3 = 0.0, orth = 0.0;
      const auto fp = freq_part(f, +1);
      const auto hm = freq_part(h, -1);
      const auto hp = freq_part(h, +1);
      for (std::size_t j = 0; j < f.v.size(); ++j) {
        m1 += fp.v[j] * h.v[j];
        m2 += f.v[j] * hm.v[j];
        m3 += fp.v[j] * hm.v[j];
        orth += fp.v[j] * hp.v[j];
      }
      CHECK(std::abs(m1 - m2) * g.dt < 1e-12);
      CHECK(std::abs(m1 - m3) * g.dt < 1e-12);
      CHECK(std::abs(orth) * g.dt < 1e-12);
    }
  }
  SUBCASE("projector matrix agrees with freq_part") {
    const auto P = projector_matrix(32, +1);
    VerificationGrid gs;
    gs.n = 32;
    gs.dt = 0.5;
    const auto s = on_grid_exponential(gs, 3, {0.2, -0.4});
    const auto expect = freq_part(s, +1);
    const auto got = dense::matvec(P, s.v);
    for (std::size_t j = 0; j < 32; ++j) CHECK(std::abs(got[j] - expect.v[j]) < 1e-13);
  }
}

TEST_CASE("delta_pm matches its Fourier definition") {
  const double eps = 0.35;
  const double W = 60.0 / eps;
  const std::size_t nw = 200000;
  const double dw = W / static_cast<double>(nw);
  double err = 0.0;
  for (int j = -16; j <= 16; ++j) {
    const double t = 0.45 * j;
    cplx acc = 0.0;
    for (std::size_t k = 0; k < nw; ++k) {
      const double w = (static_cast<double>(k) + 0.5) * dw;
      acc += std::exp(cplx{-eps * w, -w * t});
    }
    acc *= dw / (2.0 * std::numbers::pi);
    err = std::max(err, std::abs(acc - delta_pm(t, eps, +1)));
    // reflection property delta^(-)(t) = delta^(+)(-t)
    CHECK(std::abs(delta_pm(t, eps, -1) - delta_pm(-t, eps, +1)) < 1e-15);
  }
  CHECK(err < 1e-4);
}

TEST_CASE("response-transformation identities") {
  SUBCASE("nonrel is algebraic and exact") {
    const auto spec = random_channel(Statistics::fermi, true, 23);
    const auto grid = build_verification_grid(spec, 256);
    const auto rep = verify_response_identities(spec, grid);
    CHECK(rep.pass());
    CHECK(rep.worst_error() < 1e-12);
  }
  SUBCASE("channel identities on the verification grid") {
    for (auto stat : {Statistics::bose, Statistics::fermi}) {
      const auto spec = random_channel(stat, false, 29 + (stat == Statistics::bose ? 1 : 0));
      const auto grid = build_verification_grid(spec, 1024);
      const auto rep = verify_response_identities(spec, grid);
      CHECK(rep.pass());
      CHECK(rep.worst_error() < 1e-6);
    }
  }
  SUBCASE("oscillator and real-field reflected identities") {
    const auto osc = oscillator_spec();
    const auto grid = build_verification_grid(osc, 1024);
    const auto rep = verify_response_identities(osc, grid);
    CHECK(rep.pass());

    std::mt19937 rng(31);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<std::pair<double, std::vector<cplx>>> modes;
    modes.push_back({0.9, {cplx{d(rng), d(rng)}, cplx{d(rng), d(rng)}}});
    modes.push_back({1.7, {cplx{d(rng), d(rng)}, cplx{d(rng), d(rng)}}});
    const auto real = real_field_spec({"x1", "x2"}, modes);
    const auto grid2 = build_verification_grid(real, 1024);
    const auto rep2 = verify_response_identities(real, grid2);
    CHECK(rep2.pass());
    CHECK(rep2.worst_error() < 1e-6);
  }
}

TEST_CASE("mode-wise kernels assemble the whole-field contractions") {
  // the channel pair kernels are mode sums: sqrt(hbar/2w) weights on the
  // single-mode g_F / g^(+) kernels reproduce Delta_F and Delta^(+)
  for (auto stat : {Statistics::bose, Statistics::fermi}) {
    const auto spec = random_channel(stat, false, 59 + (stat == Statistics::bose ? 1 : 0));
    const double ef = spec.eps_f();
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> td(-3.0, 3.0);
    for (int rep = 0; rep < 10; ++rep) {
      const int x = static_cast<int>(rng() % 2), xp = static_cast<int>(rng() % 2);
      const double tau = td(rng);
      cplx feyn = 0.0, plus = 0.0;
      for (int k = 0; k < static_cast<int>(spec.n_modes()); ++k) {
        const Mode& m = spec.modes[static_cast<std::size_t>(k)];
        const double pref = spec.hbar / (2.0 * m.omega);
        const cplx gf = kernel_eval(spec, KernelKind::mode_g_f, k, k, tau).value;
        const cplx gf_r = kernel_eval(spec, KernelKind::mode_g_f, k, k, -tau).value;
        const cplx gp = kernel_eval(spec, KernelKind::mode_g_plus, k, k, tau).value;
        feyn += pref * (m.u[x] * m.ut[xp] * (-I) * gf + m.vt[x] * m.v[xp] * ef * (-I) * gf_r);
        plus += pref * m.u[x] * m.ut[xp] * (-I) * gp;
      }
      const cplx df = -I * spec.hbar * kernel_eval(spec, KernelKind::delta_f, x, xp, tau).value;
      const cplx dp =
          -I * spec.hbar * kernel_eval(spec, KernelKind::delta_plus, x, xp, tau).value;
      CHECK(std::abs(feyn - df) < 1e-13);
      CHECK(std::abs(plus - dp) < 1e-13);
    }
  }
}

TEST_CASE("kernel kinds match oracle pair expectations") {
  const auto spec = random_channel(Statistics::fermi, false, 41);
  const auto space = FockSpace::build(spec, 1);
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> td(-2.0, 2.0);
  const double hb = spec.hbar;
  for (int rep = 0; rep < 10; ++rep) {
    const int x = static_cast<int>(rng() % 2), xp = static_cast<int>(rng() % 2);
    const double t = td(rng), tp = td(rng), tau = t - tp;
    auto pair_vev = [&](Branch ba, Branch bb) {
      const std::vector<FieldOp> ops = {{OpKind::psi, x, {t, ba}}, {OpKind::tpsi, xp, {tp, bb}}};
      return tc_vev(space, spec, ops);
    };
    CHECK(std::abs(pair_vev(Branch::plus, Branch::plus) +
                   I * hb * kernel_eval(spec, KernelKind::delta_f, x, xp, tau).value) < 1e-13);
    CHECK(std::abs(pair_vev(Branch::minus, Branch::minus) -
                   I * hb * kernel_eval(spec, KernelKind::delta_ft, x, xp, tau).value) < 1e-13);
    CHECK(std::abs(pair_vev(Branch::minus, Branch::plus) +
                   I * hb * kernel_eval(spec, KernelKind::delta_plus, x, xp, tau).value) < 1e-13);
    CHECK(std::abs(pair_vev(Branch::plus, Branch::minus) -
                   I * hb * kernel_eval(spec, KernelKind::delta_minus, x, xp, tau).value) < 1e-13);
  }
}
