#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <boost/math/special_functions/bessel.hpp>

#include "../support.hpp"
#include "bnpreg/random.hpp"
#include "bnpreg/special.hpp"
#include "bnpreg/text.hpp"

using namespace bnpreg;
using namespace bnpreg::testing;

TEST_SUITE("core") {

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, 0.1, -3.5, 1e-300, 4.9e-324, 1.7976931348623157e308, 2.0 / 3.0, 123456789.0}) {
    double back = 0.0;
    REQUIRE(parse_double(format_double(v), back));
    CHECK(back == v);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("parse_double is strict") {
  double v = 0.0;
  CHECK(parse_double(" 2.5 ", v));
  CHECK(v == 2.5);
  CHECK(parse_double("1e3", v));
  CHECK(v == 1000.0);
  CHECK_FALSE(parse_double("", v));
  CHECK_FALSE(parse_double("abc", v));
  CHECK_FALSE(parse_double("1.2.3", v));
  CHECK_FALSE(parse_double("3x", v));
}

TEST_CASE("split_fields keeps empty fields") {
  const auto f = split_fields("a,,b,", ',');
  REQUIRE(f.size() == 4);
  CHECK(f[1].empty());
  CHECK(f[3].empty());
}

TEST_CASE("fnv1a64 published vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("rng save and restore continue the same stream") {
  Rng a(42);
  for (int i = 0; i < 10; ++i) a.normal();
  Rng b(7);
  b.restore(a.save());
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  CHECK(reason_of([&] { b.restore("garbage"); }) == "bad_rng_state");
}

TEST_CASE("split streams are distinct and reproducible") {
  const Rng base(5);
  Rng s1 = base.split(1);
  Rng s1b = base.split(1);
  Rng s2 = base.split(2);
  const double x = s1.uniform();
  CHECK(x == s1b.uniform());
  CHECK(x != s2.uniform());
}

TEST_CASE("truncated normal respects bounds") {
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const double v = rng.truncated_normal(0.0, 1.0, 2.0, kInfinity);
    CHECK(v >= 2.0);
    const double w = rng.truncated_normal(0.0, 1.0, 1.0, 2.0);
    CHECK(w >= 1.0);
    CHECK(w <= 2.0);
    const double far = rng.truncated_normal(0.0, 1.0, 30.0, 31.0);
    CHECK(far >= 30.0);
    CHECK(far <= 31.0);
  }
}

TEST_CASE("gamma and inverse-gamma means") {
  Rng rng(11);
  const int n = 40000;
  double sg = 0.0;
  double sig = 0.0;
  for (int i = 0; i < n; ++i) {
    sg += rng.gamma(3.0, 2.0);
    sig += rng.inv_gamma(5.0, 4.0);
  }
  // Gamma(3, rate 2): mean 1.5, sd sqrt(3)/2. IG(5, 4): mean 1, sd 1/sqrt(3).
  CHECK(std::fabs(sg / n - 1.5) < 4.0 * std::sqrt(3.0) / 2.0 / std::sqrt(n));
  CHECK(std::fabs(sig / n - 1.0) < 4.0 / std::sqrt(3.0) / std::sqrt(n));
}

TEST_CASE("GIG first moment matches the Bessel ratio") {
  Rng rng(12);
  for (auto [a, b, p] : {std::tuple{1.0, 1.0, -0.5}, std::tuple{2.0, 0.5, 1.5},
                         std::tuple{0.3, 1.0, -3.0}}) {
    const double w = std::sqrt(a * b);
    const double m1 = std::sqrt(a / b) * boost::math::cyl_bessel_k(p + 1, w) /
                      boost::math::cyl_bessel_k(p, w);
    const double m2 = (a / b) * boost::math::cyl_bessel_k(p + 2, w) /
                      boost::math::cyl_bessel_k(p, w);
    const int n = 40000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += rng.gig(a, b, p);
    const double se = std::sqrt((m2 - m1 * m1) / n);
    CHECK(std::fabs(s / n - m1) < 4.0 * se);
  }
}

TEST_CASE("categorical_log frequencies") {
  Rng rng(13);
  const std::vector<double> lw = {std::log(1.0), std::log(2.0), std::log(7.0)};
  std::vector<int> counts(3, 0);
  const int n = 50000;
  for (int i = 0; i < n; ++i) ++counts[rng.categorical_log(lw)];
  for (int k = 0; k < 3; ++k) {
    const double p = std::exp(lw[k]) / 10.0;
    CHECK(std::fabs(counts[k] / double(n) - p) < 4.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("normal tail functions") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145707).epsilon(1e-14));
  CHECK(normal_ccdf(10.0) == doctest::Approx(0.5 * std::erfc(10.0 / std::sqrt(2.0))).epsilon(1e-12));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  const double direct = std::log(0.5 * std::erfc(8.0 / std::sqrt(2.0)) - 0.5 * std::erfc(9.0 / std::sqrt(2.0)));
  CHECK(log_normal_interval(8.0, 9.0) == doctest::Approx(direct).epsilon(1e-10));
  CHECK(log_normal_interval(-9.0, -8.0) == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("quantile interpolates between closest ranks") {
  const std::vector<double> v = {1, 2, 3, 4};
  CHECK(quantile_sorted(v, 0.5) == 2.5);
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 4.0);
  CHECK(quantile({4, 1, 3, 2}, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("log_bessel_k agrees with boost where both are finite") {
  for (double nu : {-2.5, 0.5, 3.0}) {
    for (double z : {0.1, 1.0, 20.0}) {
      CHECK(log_bessel_k(nu, z) == doctest::Approx(std::log(boost::math::cyl_bessel_k(nu, z))).epsilon(1e-10));
    }
  }
  CHECK(std::isfinite(log_bessel_k(10.0, 2000.0)));
}

}  // TEST_SUITE
