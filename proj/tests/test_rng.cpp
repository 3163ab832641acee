#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "vasso/rng.hpp"

using namespace vasso;

TEST_CASE("same key replays the same draws") {
  RandomStream a(123, 5);
  RandomStream b(123, 5);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  a.set_counter(17);
  b.set_counter(17);
  CHECK(a.normal() == b.normal());
}

TEST_CASE("distinct stream ids decorrelate") {
  RandomStream a(123, 0);
  RandomStream b(123, 1);
  const int n = 20000;
  double corr = 0.0;
  for (int i = 0; i < n; ++i)
    corr += (a.uniform() - 0.5) * (b.uniform() - 0.5);
  corr /= n / 12.0;  // normalized by uniform variance
  CHECK(std::abs(corr) < 0.05);
}

TEST_CASE("child streams are reproducible and distinct") {
  RandomStream root(9);
  RandomStream c1 = root.child(3);
  RandomStream c2 = root.child(3);
  RandomStream c3 = root.child(4);
  CHECK(c1.next_u64() == c2.next_u64());
  CHECK(c1.next_u64() != c3.next_u64());
}

TEST_CASE("uniform moments") {
  RandomStream s(7);
  const int n = 100000;
  double mean = 0.0, var = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    mean += u;
    var += (u - 0.5) * (u - 0.5);
  }
  CHECK(mean / n == Catch::Approx(0.5).margin(0.005));
  CHECK(var / n == Catch::Approx(1.0 / 12).margin(0.005));
}

TEST_CASE("gaussian_vector basics") {
  RandomStream s(11);
  CHECK(gaussian_vector(3, 0.0, s) == ParamVector{0, 0, 0});

  RandomStream s1(11, 2);
  RandomStream s2(11, 2);
  CHECK(gaussian_vector(5, 1.0, s1) == gaussian_vector(5, 1.0, s2));
}

TEST_CASE("gaussian_vector chi-square moment") {
  // sample mean of ||zeta||^2 / dim over 1e5 draws at sigma = 1 is 1 +- 0.02
  RandomStream s(2024);
  const int n = 100000;
  const std::size_t dim = 4;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const ParamVector z = gaussian_vector(dim, 1.0, s);
    acc += dot(z, z) / double(dim);
  }
  CHECK(acc / n == Catch::Approx(1.0).margin(0.02));
}
