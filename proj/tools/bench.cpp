// Benchmark comparing the OpenMP kernels against the serial reference:
// dense products (the transport-check workload) and batched vacuum
// expectations (the wick-oracle workload).

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kw/causal.hpp"
#include "kw/dense.hpp"
#include "kw/fock.hpp"
#include "kw/wick.hpp"

using kw::cplx;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

kw::dense::Matrix random_matrix(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  kw::dense::Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = {d(rng), d(rng)};
  return m;
}

kw::ChannelSpec bose_channel() {
  kw::ChannelSpec s;
  s.field = kw::FieldType::channel;
  s.statistics = kw::Statistics::bose;
  s.truncation = 6;
  s.x_labels = {"x1", "x2"};
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int m = 0; m < 2; ++m) {
    kw::Mode mode;
    mode.kappa = "k" + std::to_string(m + 1);
    mode.omega = 0.7 + 0.6 * m;
    for (int x = 0; x < 2; ++x) {
      mode.u.push_back({d(rng), d(rng)});
      mode.v.push_back({d(rng), d(rng)});
      mode.ut.push_back({d(rng), d(rng)});
      mode.vt.push_back({d(rng), d(rng)});
    }
    s.modes.push_back(mode);
  }
  return s;
}

double bench_vev_batch(const kw::ChannelSpec& spec, const kw::FockSpace& space, int n_products,
                       bool parallel) {
  std::vector<cplx> out(static_cast<std::size_t>(n_products));
  const double t0 = now_ms();
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int r = 0; r < n_products; ++r) {
    std::mt19937 rng(1000u + static_cast<unsigned>(r));
    std::uniform_int_distribution<int> xd(0, 1), bd(0, 1);
    std::uniform_real_distribution<double> td(-3.0, 3.0);
    std::vector<kw::FieldOp> ops;
    for (int i = 0; i < 6; ++i)
      ops.push_back({bd(rng) ? kw::OpKind::psi : kw::OpKind::tpsi, xd(rng),
                     {td(rng), bd(rng) ? kw::Branch::plus : kw::Branch::minus}});
    out[static_cast<std::size_t>(r)] = kw::tc_vev(space, spec, ops);
  }
  return now_ms() - t0;
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; parallel paths run serially\n");
#endif

  for (std::size_t n : {256u, 512u, 1024u}) {
    const auto a = random_matrix(n, 1);
    const auto b = random_matrix(n, 2);
    double t0 = now_ms();
    const auto cs = kw::dense::matmul_serial(a, b);
    const double serial = now_ms() - t0;
    t0 = now_ms();
    const auto cp = kw::dense::matmul(a, b);
    const double par = now_ms() - t0;
    std::printf("matmul n=%4zu   serial %8.2f ms   parallel %8.2f ms   speedup %5.2fx   diff %.2e\n",
                n, serial, par, serial / par, kw::dense::max_abs_diff(cs, cp));
  }

  const auto spec = bose_channel();
  const auto space = kw::FockSpace::build(spec, 6);
  std::printf("fock space dim = %zu\n", space.dim());
  const double serial = bench_vev_batch(spec, space, 64, false);
  const double par = bench_vev_batch(spec, space, 64, true);
  std::printf("vev batch (64 products of 6 ops)   serial %8.2f ms   parallel %8.2f ms   speedup %5.2fx\n",
              serial, par, serial / par);

  // transport-check workload: dominated by dense products of projector blocks
  const double t0 = now_ms();
  const auto rep = kw::derivative_transport_check(spec, kw::Regime::semirel, 128);
  std::printf("transport check n=128: %8.2f ms (max err %.2e)\n", now_ms() - t0,
              rep.max_entry_error);
  return 0;
}
