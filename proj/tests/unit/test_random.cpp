#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "grokscale/random.hpp"
#include "grokscale/stats.hpp"

using namespace grokscale;

TEST_CASE("xoshiro is deterministic per seed") {
  Xoshiro256 a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    (void)c();
  }
  CHECK(Xoshiro256(42)() != Xoshiro256(43)());
}

TEST_CASE("derived streams differ") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}

TEST_CASE("uniform and normal moments") {
  Xoshiro256 rng(5);
  std::vector<double> u(200000), z(200000);
  for (auto& v : u) v = rng.uniform();
  for (auto& v : z) v = rng.normal();
  CHECK(*std::min_element(u.begin(), u.end()) >= 0.0);
  CHECK(*std::max_element(u.begin(), u.end()) < 1.0);
  CHECK(stats::mean(u) == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(stats::mean(z)) < 0.01);
  CHECK(stats::sample_variance(z) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("bounded draws stay in range") {
  Xoshiro256 rng(9);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.05));
}

TEST_CASE("fisher-yates permutes") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  Xoshiro256 rng(1);
  fisher_yates(std::span<int>(v), rng);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
  CHECK(!std::is_sorted(v.begin(), v.end()));
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a({}) == 0xCBF29CE484222325ULL);
  const unsigned char a[] = {'a'};
  CHECK(fnv1a(a) == 0xAF63DC4C8601EC8CULL);
}
