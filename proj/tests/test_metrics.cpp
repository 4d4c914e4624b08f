#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "slicewise/error.hpp"
#include "slicewise/metrics.hpp"
#include "slicewise/random.hpp"

using namespace slicewise;
using namespace slicewise::metrics;
using V = std::vector<double>;

namespace {

V random_distribution(Rng& rng, std::size_t k) {
  V p(k);
  double total = 0;
  for (double& x : p) {
    x = rng.uniform() < 0.15 ? 0.0 : rng.uniform();
    total += x;
  }
  if (total == 0) {
    p[rng.next() % k] = 1;
    return p;
  }
  for (double& x : p) x /= total;
  return p;
}

}  // namespace

TEST_CASE("discrepancy examples") {
  V a{1, 0}, b{0, 1};
  CHECK(discrepancy(a, a, 1) == 0);
  CHECK(discrepancy(a, a, 2) == 0);
  CHECK(discrepancy(a, b, 1) == 2);
  CHECK(discrepancy(a, b, 2) == 2);
  CHECK(discrepancy(V{3}, V{1}, 2) == 4);
  CHECK(discrepancy(a, b, 1, true) == 1);
  CHECK_THROWS(discrepancy(a, V{1}, 1));
  CHECK_THROWS(discrepancy(a, b, 3));
}

TEST_CASE("tvd examples") {
  V p{0.8, 0.2}, q{0.6, 0.4};
  CHECK(tvd(p, p) == 0);
  CHECK(tvd(V{1, 0}, V{0, 1}) == 1);
  CHECK(tvd(p, q) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK_THROWS(tvd(V{0.5, 0.6}, V{0.5, 0.5}));
  CHECK_THROWS(tvd(V{-0.5, 1.5}, V{0.5, 0.5}));
}

TEST_CASE("jsd examples") {
  V p{0.3, 0.7};
  CHECK(jsd(p, p) == 0);
  CHECK(jsd(V{1, 0}, V{0, 1}) == doctest::Approx(1.0).epsilon(1e-12));
  double v = jsd(V{0.5, 0.5}, V{1, 0});
  CHECK(std::fabs(v - 0.311278) < 1e-6);
  CHECK(std::fabs(v - oracle::jsd({0.5, 0.5}, {1, 0})) < 1e-12);
  CHECK_THROWS(jsd(V{0.5}, V{0.5, 0.5}));
}

TEST_CASE("argmax agreement") {
  CHECK(argmax_agreement(V{1, 2, 3}, V{1, 2, 3}));
  CHECK(argmax_agreement(V{1, 2, 3}, V{10, 20, 30}));
  CHECK_FALSE(argmax_agreement(V{1, 2}, V{2, 1}));
  CHECK_THROWS(argmax_agreement(V{1, 2}, V{1}));
}

TEST_CASE("summarize") {
  SummaryStats one = summarize(V{5});
  CHECK(one.mean == 5);
  CHECK(one.std == 0);
  CHECK(one.min == 5);
  CHECK(one.max == 5);
  SummaryStats two = summarize(V{1, 3});
  CHECK(two.mean == 2);
  CHECK(two.std == 1);
  CHECK(two.min == 1);
  CHECK(two.max == 3);
  CHECK(summarize(V{0.1, 0.1, 0.1, 0.1}).std == 0);
  CHECK_THROWS(summarize(V{}));
}

TEST_CASE("metrics match brute-force oracles on random cases") {
  Rng rng(2024);
  for (int t = 0; t < 10000; ++t) {
    std::size_t k = 2 + rng.next() % 11;
    V p = random_distribution(rng, k), q = random_distribution(rng, k);
    double tv = tvd(p, q), js = jsd(p, q);
    CHECK(std::fabs(tv - oracle::tvd(p, q)) < 1e-12);
    CHECK(std::fabs(js - oracle::jsd(p, q)) < 1e-12);
    CHECK(tv >= 0);
    CHECK(tv <= 1);
    CHECK(js >= 0);
    CHECK(js <= 1 + 1e-15);
    CHECK(tvd(q, p) == tv);
    CHECK(std::fabs(jsd(q, p) - js) < 1e-15);
    CHECK(jsd(p, p) < 1e-12);

    V za(k), zb(k);
    for (std::size_t i = 0; i < k; ++i) {
      za[i] = rng.uniform(-10, 10);
      zb[i] = za[i] + rng.uniform(-1, 1);
    }
    double d1 = discrepancy(za, zb, 1), d2 = discrepancy(za, zb, 2);
    CHECK(std::fabs(d1 - oracle::d_p(za, zb, 1)) < 1e-12);
    CHECK(std::fabs(d2 - oracle::d_p(za, zb, 2)) < 1e-12);
    CHECK(d2 <= d1 + 1e-15);

    FidelitySample s = measure_fidelity(za, zb);
    CHECK(std::fabs(s.tvd - oracle::tvd(oracle::softmax(za), oracle::softmax(zb))) < 1e-12);
    CHECK(std::fabs(s.jsd - oracle::jsd(oracle::softmax(za), oracle::softmax(zb))) < 1e-12);
  }
}

TEST_CASE("softmax survives large logits") {
  FidelitySample s = measure_fidelity(V{1000, 0}, V{1000, 0});
  CHECK(s.tvd == 0);
  CHECK(s.jsd == 0);
  CHECK(s.agree);
  FidelitySample far = measure_fidelity(V{1000, 0}, V{0, 1000});
  CHECK(far.tvd == doctest::Approx(1.0));
  CHECK_FALSE(far.agree);
}
