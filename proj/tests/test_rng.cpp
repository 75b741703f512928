#include <doctest.h>

#include <set>

#include "napc/rng.hpp"

using napc::Rng;

TEST_CASE("streams replay and differ by name, seed and index") {
  Rng a = Rng::stream("shuffle", 42, {3});
  Rng b = Rng::stream("shuffle", 42, {3});
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  CHECK(Rng::stream("shuffle", 42, {3}).next_u64() !=
        Rng::stream("dropout", 42, {3}).next_u64());
  CHECK(Rng::stream("shuffle", 42, {3}).next_u64() !=
        Rng::stream("shuffle", 43, {3}).next_u64());
  CHECK(Rng::stream("shuffle", 42, {3}).next_u64() !=
        Rng::stream("shuffle", 42, {4}).next_u64());
}

TEST_CASE("uniform draws stay in range and cover it") {
  Rng rng = Rng::stream("test", 7);
  std::set<int64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const int64_t v = rng.uniform_int(2, 5);
    CHECK(v >= 2);
    CHECK(v <= 5);
    seen.insert(v);
  }
  CHECK(seen.size() == 4);

  for (int i = 0; i < 1000; ++i) {
    const double d = rng.next_double();
    CHECK(d >= 0.0);
    CHECK(d < 1.0);
  }
}

TEST_CASE("normal draws have roughly standard moments") {
  Rng rng = Rng::stream("normal", 11);
  double sum = 0, sum2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.next_normal();
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}
