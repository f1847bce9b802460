#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "mkv/errors.hpp"
#include "mkv/parallel.hpp"
#include "mkv/rng.hpp"

using namespace mkv;

TEST_CASE("derive_seed is a pure function of its arguments") {
  CHECK(derive_seed(42, 0, 0, 0) == derive_seed(42, 0, 0, 0));
  CHECK(derive_seed(42, 0, 1, 0) != derive_seed(42, 1, 0, 0));
  CHECK(derive_seed(42, 0, 0, 1) != derive_seed(42, 0, 0, 0));
  CHECK(derive_seed(41, 0, 0, 0) != derive_seed(42, 0, 0, 0));
}

TEST_CASE("derive_seed rejects indices at or above 2^32") {
  const std::uint64_t big = std::uint64_t{1} << 32;
  CHECK_THROWS_AS(derive_seed(1, big, 0, 0), IndexOverflow);
  CHECK_THROWS_AS(derive_seed(1, 0, big, 0), IndexOverflow);
  CHECK_THROWS_AS(derive_seed(1, 0, 0, big), IndexOverflow);
  CHECK_NOTHROW(derive_seed(1, big - 1, big - 1, big - 1));
}

TEST_CASE("derive_seed is injective over all index triples below 2^8") {
  // Brute force: 2^24 keys, and the generator's first output must not
  // collide either (a weaker but observable property of the mixing).
  std::set<StreamKey> keys;
  std::unordered_set<std::uint64_t> first_outputs;
  std::size_t output_collisions = 0;
  for (std::uint64_t r = 0; r < 256; ++r) {
    for (std::uint64_t p = 0; p < 256; ++p) {
      for (std::uint64_t i = 0; i < 256; ++i) {
        const StreamKey k = derive_seed(7, r, p, i);
        keys.insert(k);
        Xoshiro256 g(k);
        if (!first_outputs.insert(g()).second) ++output_collisions;
      }
    }
  }
  CHECK(keys.size() == std::size_t{1} << 24);
  CHECK(output_collisions == 0);
}

TEST_CASE("xoshiro streams replay bit-identically") {
  Xoshiro256 a(derive_seed(3, 1, 2, 3));
  Xoshiro256 b(derive_seed(3, 1, 2, 3));
  for (int i = 0; i < 1000; ++i) CHECK(a() == b());
}

TEST_CASE("uniform draws lie in [0,1) and have mean near 1/2") {
  Xoshiro256 g(std::uint64_t{99});
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("neighbouring streams are uncorrelated") {
  const int n = 100000;
  std::normal_distribution<double> na, nb;
  Xoshiro256 ga(derive_seed(5, 0, 0, 0));
  Xoshiro256 gb(derive_seed(5, 0, 1, 0));
  double sab = 0.0;
  for (int i = 0; i < n; ++i) sab += na(ga) * nb(gb);
  CHECK(std::abs(sab / n) < 4.0 / std::sqrt(n));
}

TEST_CASE("parallel_for visits every index once for any thread count") {
  for (int threads : {1, 2, 4}) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
}

TEST_CASE("parallel_for rethrows the failure at the lowest index") {
  for (int threads : {1, 3}) {
    try {
      parallel_for(100, threads, [](std::size_t i) {
        if (i == 17 || i == 80) throw std::runtime_error(std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "17");
    }
  }
}
