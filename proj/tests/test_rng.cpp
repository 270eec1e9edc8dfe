#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"

#include "optstop/rng.hpp"

using namespace optstop;

TEST_SUITE("rng") {

TEST_CASE("equal keys give equal draws, distinct keys differ") {
  RngStream a(7, substream::training, 3);
  RngStream b(7, substream::training, 3);
  for (int i = 0; i < 100; ++i) CHECK(a.standard_normal() == b.standard_normal());

  RngStream c(7, substream::training, 4);
  RngStream d(7, substream::test, 3);
  RngStream e(8, substream::training, 3);
  RngStream f(7, substream::training, 3);
  const double x = f.standard_normal();
  CHECK(c.standard_normal() != x);
  CHECK(d.standard_normal() != x);
  CHECK(e.standard_normal() != x);
}

TEST_CASE("uniform stays in the open unit interval") {
  RngStream s(1, 0, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = s.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("standard normal moments over a million draws") {
  RngStream s(2024, 0, 0);
  constexpr int n = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.standard_normal();
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 4e-3);
  CHECK(std::abs(var - 1.0) < 1e-2);
}

TEST_CASE("draws from distinct path indices are uncorrelated") {
  constexpr int n = 100000;
  double sxy = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    RngStream a(11, substream::training, static_cast<std::uint64_t>(2 * i));
    RngStream b(11, substream::training, static_cast<std::uint64_t>(2 * i + 1));
    const double x = a.standard_normal();
    const double y = b.standard_normal();
    sx += x; sy += y; sxy += x * y; sxx += x * x; syy += y * y;
  }
  const double cov = sxy / n - (sx / n) * (sy / n);
  const double corr = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
  CHECK(std::abs(corr) < 0.01);

  // Neighbouring sub-streams of one path index too.
  double s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    RngStream a(11, substream::training, static_cast<std::uint64_t>(i));
    RngStream b(11, substream::test, static_cast<std::uint64_t>(i));
    s2 += a.standard_normal() * b.standard_normal();
  }
  CHECK(std::abs(s2 / n) < 0.01);
}

TEST_CASE("q_function reference values") {
  CHECK(q_function(0.0) == 0.5);
  // Frozen values from adaptive quadrature of the normal density.
  CHECK(std::abs(q_function(1.959964) - 0.024999999096) < 1e-12);
  CHECK(std::abs(q_function(1.959964) - 0.025) < 1e-6);
  CHECK(std::abs(q_function(-3.0) - 0.99865010197) < 1e-10);
  CHECK(std::abs(q_function(-3.0) - 0.99865) < 1e-5);
}

TEST_CASE("q_function symmetry and monotonicity") {
  double prev = 1.0;
  for (double z = -8.0; z <= 8.0; z += 1.0 / 64) {
    CHECK(std::abs(q_function(z) + q_function(-z) - 1.0) <= 1e-12);
    const double q = q_function(z);
    CHECK(q >= 0.0);
    CHECK(q <= 1.0);
    CHECK(q <= prev);
    if (std::abs(z) <= 5.0) CHECK(q < prev);
    prev = q;
  }
}

TEST_CASE("log_q_function matches log Q and keeps going in the far tail") {
  for (double z : {-5.0, -1.0, 0.0, 2.5, 10.0, 30.0, 34.9})
    CHECK(log_q_function(z) == doctest::Approx(std::log(q_function(z))).epsilon(1e-12));
  // Continuity across the switch to the asymptotic series, while erfc is still representable.
  for (double z : {35.0, 36.0, 37.0})
    CHECK(log_q_function(z) == doctest::Approx(std::log(q_function(z))).epsilon(1e-12));
  double prev = log_q_function(37.0);
  for (double z = 40.0; z <= 1e4; z *= 1.5) {
    const double v = log_q_function(z);
    CHECK(std::isfinite(v));
    CHECK(v < prev);
    // Mills-ratio bounds: z/(1+z^2) phi(z) < Q(z) < phi(z)/z.
    const double log_phi = -0.5 * z * z - 0.5 * std::log(2 * std::numbers::pi);
    if (z < 500.0) {
      CHECK(v < log_phi - std::log(z));
      CHECK(v > log_phi + std::log(z / (1 + z * z)));
    }
    prev = v;
  }
}

TEST_CASE("normal_pdf") {
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
  CHECK(normal_pdf(1.5) == normal_pdf(-1.5));
}

}
