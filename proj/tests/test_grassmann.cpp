#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "kw/grassmann.hpp"

using namespace kw;

namespace {

GrassmannPoly g(int k) { return GrassmannPoly::generator(k); }

GrassmannPoly random_poly(std::mt19937& rng, int max_gen, int n_terms, int parity = -1) {
  GrassmannPoly p;
  std::uniform_int_distribution<int> len(0, 3);
  std::uniform_int_distribution<int> gen(1, max_gen);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  for (int t = 0; t < n_terms; ++t) {
    int l = len(rng);
    if (parity >= 0) l = 2 * (l / 2) + parity;
    std::vector<int> key;
    while (static_cast<int>(key.size()) < l) {
      int k = gen(rng);
      if (std::find(key.begin(), key.end(), k) == key.end()) key.push_back(k);
    }
    std::sort(key.begin(), key.end());
    p += GrassmannPoly::monomial(key, {coef(rng), coef(rng)});
  }
  return p;
}

}  // namespace

TEST_CASE("product canonicalization and nilpotency") {
  CHECK((g(2) * g(1)).coeff({1, 2}) == cplx{-1.0});
  CHECK((g(1) * g(1)).is_zero());

  const auto p = (GrassmannPoly{2.0} + g(1)) * (GrassmannPoly{3.0} + g(2));
  CHECK(p.coeff({}) == cplx{6.0});
  CHECK(p.coeff({1}) == cplx{3.0});
  CHECK(p.coeff({2}) == cplx{2.0});
  CHECK(p.coeff({1, 2}) == cplx{1.0});
}

TEST_CASE("left derivative") {
  const auto m = g(1) * g(2);
  CHECK(m.left_derivative(1) == g(2));
  CHECK(m.left_derivative(2) == (-1.0) * g(1));
  CHECK(GrassmannPoly{5.0}.left_derivative(3).is_zero());
}

TEST_CASE("parity and the superselection error") {
  CHECK((g(1) * g(2)).parity() == Parity::even);
  CHECK(g(1).parity() == Parity::odd);
  CHECK(GrassmannPoly{}.parity() == Parity::even);
  CHECK_THROWS_AS((GrassmannPoly{1.0} + g(1)).parity(), MixedParityError);
}

TEST_CASE("linear substitution") {
  const auto m = g(1) * g(2);

  SUBCASE("identity kernel") {
    LinearGeneratorMap id{{1, {{1, 1.0}}}, {2, {{2, 1.0}}}};
    CHECK(substitute_linear(m, id) == m);
  }
  SUBCASE("slot swap anticommutes") {
    LinearGeneratorMap swap{{1, {{2, 1.0}}}, {2, {{1, 1.0}}}};
    CHECK(substitute_linear(m, swap) == (-1.0) * m);
  }
  SUBCASE("chain rule for a random 3x3 kernel") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    cplx K[3][3];
    LinearGeneratorMap sub;
    for (int i = 0; i < 3; ++i) {
      std::vector<std::pair<int, cplx>> row;
      for (int j = 0; j < 3; ++j) {
        K[i][j] = {d(rng), d(rng)};
        row.emplace_back(10 + j, K[i][j]);
      }
      sub[i + 1] = row;
    }
    GrassmannPoly p;
    p += GrassmannPoly::monomial({1, 2}, {d(rng), d(rng)});
    p += GrassmannPoly::monomial({2, 3}, {d(rng), d(rng)});
    p += GrassmannPoly::monomial({1, 2, 3}, {d(rng), d(rng)});
    const auto q = substitute_linear(p, sub);
    for (int j = 0; j < 3; ++j) {
      GrassmannPoly transported;
      for (int i = 0; i < 3; ++i)
        transported += K[i][j] * substitute_linear(p.left_derivative(i + 1), sub);
      CHECK(q.left_derivative(10 + j).max_coeff_diff(transported) < 1e-14);
    }
  }
}

TEST_CASE("uniqueness probe") {
  std::vector<GrassmannPoly> zeros(3);
  CHECK(!uniqueness_probe(zeros).has_value());

  // the full top monomial is the classic fixed-K counterexample; the fresh
  // generator K+1 must still find it
  const int K = 6;
  std::vector<int> top;
  for (int k = 1; k <= K; ++k) top.push_back(k);
  std::vector<GrassmannPoly> family(4);
  family[2] = GrassmannPoly::monomial(top, 1.0);
  auto w = uniqueness_probe(family);
  REQUIRE(w.has_value());
  CHECK(*w == 2);

  family[2] = GrassmannPoly{};
  family[1] = GrassmannPoly{cplx{0.5}};
  w = uniqueness_probe(family);
  REQUIRE(w.has_value());
  CHECK(*w == 1);
}

TEST_CASE("randomized algebra properties") {
  std::mt19937 rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    const int pa = rep % 2, pb = (rep / 2) % 2;
    const auto a = random_poly(rng, 12, 3, pa);
    const auto b = random_poly(rng, 12, 3, pb);
    const double sign = (pa == 1 && pb == 1) ? -1.0 : 1.0;
    CHECK((a * b).max_coeff_diff(sign * (b * a)) < 1e-13);

    // product rule with the parity factor eta_1
    const auto f2 = random_poly(rng, 12, 4);
    const int k = 1 + static_cast<int>(rng() % 12);
    const double eta1 = pa == 0 ? 1.0 : -1.0;
    const auto lhs = (a * f2).left_derivative(k);
    const auto rhs = a.left_derivative(k) * f2 + eta1 * (a * f2.left_derivative(k));
    CHECK(lhs.max_coeff_diff(rhs) < 1e-13);

    // associativity
    const auto c = random_poly(rng, 12, 2);
    CHECK(((a * b) * c).max_coeff_diff(a * (b * c)) < 1e-12);
  }
}

TEST_CASE("gp_exp truncates and matches the series") {
  const auto p = cplx{0.3, 0.1} * (g(1) * g(2)) + cplx{-0.2, 0.4} * (g(3) * g(4));
  const auto e = gp_exp(p);
  auto expected = GrassmannPoly{1.0} + p + 0.5 * (p * p);
  CHECK(e.max_coeff_diff(expected) < 1e-14);
  CHECK_THROWS_AS(gp_exp(g(1)), MixedParityError);
}
