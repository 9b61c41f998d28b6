#include "doctest.h"

#include "lipfit/bounds.hpp"
#include "lipfit/error.hpp"
#include "lipfit/rng.hpp"

#include <cmath>

using namespace lipfit;

TEST_CASE("pointwise and uniform bounds") {
  CHECK(pointwise_bound(1, 1, 0.5, 0, 0) == 1.0);
  CHECK(pointwise_bound(3, 4, 0.0, 0, 0) == 0.0);
  CHECK(pointwise_bound(2, 3, 0.1, 0.05, 0.05) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(uniform_bound(2, 3, 0.1, 0.05, 0.05) == pointwise_bound(2, 3, 0.1, 0.05, 0.05));
  CHECK_THROWS_AS(pointwise_bound(-1, 1, 0.5, 0, 0), Error);
}

TEST_CASE("interpolation-class bounds") {
  CHECK(thm1_bound(1, 0.1, 0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(thm1_bound(0, 0.7, 0.03) == doctest::Approx(0.06).epsilon(1e-15));
  CHECK(thm1_bound(4.33, 0.5, 0.01) == doctest::Approx(4.35).epsilon(1e-15));
  CHECK(thm2_bound(1, 0.1, 0.05, 0.01) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(thm2_bound(3, 0.4, 0.0, 0.02) == doctest::Approx(0.04).epsilon(1e-15));
  // ρ = 0 differs from the interpolation bound only by the ε coefficient.
  CHECK(thm2_bound(2, 0, 0.3, 0.1) == doctest::Approx(thm1_bound(2, 0.3, 0.1)).epsilon(1e-15));
}

TEST_CASE("probabilistic bound") {
  const double b1 = thm4_bound(1, 0, 0, 3, 1000, 0.1, 1, 1);
  const double b2 = thm4_bound(1, 0, 0, 3, 2000, 0.1, 1, 1);
  CHECK(b2 < b1);

  const double N = std::exp(1.0) * 1000;
  CHECK(thm4_bound(0.5, 0, 0, 1, N, std::exp(-1.0), 1, 1) ==
        doctest::Approx(std::log(std::exp(1.0) * N) / N).epsilon(1e-15));

  const double h = thm4_radius(2, 500, 0.05, 0.7, 3.0);
  CHECK(h == doctest::Approx(0.7 * std::sqrt(std::log(3.0 * 500 / 0.05) / 500)).epsilon(1e-15));
  CHECK(thm4_bound(1.5, 0.2, 0.01, 2, 500, 0.05, 0.7, 3.0) == thm2_bound(1.5, 0.2, h, 0.01));

  CHECK_THROWS_AS(thm4_radius(0, 100, 0.1, 1, 1), Error);
  CHECK_THROWS_AS(thm4_radius(1, 100, 1.5, 1, 1), Error);
  CHECK_THROWS_AS(thm4_radius(1, 2, 0.9, 1, 0.1), Error);
}

TEST_CASE("bound chain consistency on random inputs") {
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const double l_g = 5 * rng.uniform(), rho = rng.uniform(), h = rng.uniform();
    const double l_f = (l_g + rho) * rng.uniform();
    const double eps = rng.uniform(), eps_bar = eps * rng.uniform();
    CHECK(thm2_bound(l_g, rho, h, eps) >= uniform_bound(l_f, l_g, h, eps_bar, eps) - 1e-15);
  }
}

TEST_CASE("probabilistic bound monotonicity") {
  for (int n : {1, 2, 3}) {
    // Past the stationary point of log(k2 N/δ)/N the bound falls with N.
    double prev = thm4_bound(1, 0.1, 0, n, 50, 0.1, 1, 1);
    for (double N = 100; N <= 1e6; N *= 2) {
      const double b = thm4_bound(1, 0.1, 0, n, N, 0.1, 1, 1);
      CHECK(b < prev);
      prev = b;
    }
    double last = 0;
    for (double delta : {0.5, 0.1, 0.01, 1e-4}) {
      const double b = thm4_bound(1, 0.1, 0, n, 1000, delta, 1, 1);
      CHECK(b > last);
      last = b;
    }
  }
}

TEST_CASE("exact 1-D covering radius") {
  CHECK(covering_radius_1d({0.5}, 0, 1) == 0.5);
  CHECK(covering_radius_1d({0.0, 1.0}, 0, 1) == 0.5);
  CHECK(covering_radius_1d({0.9, 0.1, 0.5}, 0, 1) == doctest::Approx(0.2));
  CHECK(covering_radius_1d({0.2, 0.3}, 0, 1) == doctest::Approx(0.7));
}

TEST_CASE("calibration in one dimension") {
  const Thm4Calibration cal = calibrate_thm4_constants(1, {100, 300, 1000, 3000}, 50, 0.1, 3);
  CHECK(cal.r2 >= 0.95);
  CHECK(cal.rate_slope == doctest::Approx(-1.0).epsilon(0.05));
  CHECK(cal.k1 > 0);
  CHECK(cal.k2 > 0);
  CHECK(cal.quantiles.size() == 4);
  for (std::size_t i = 1; i < cal.quantiles.size(); ++i) CHECK(cal.quantiles[i] < cal.quantiles[i - 1]);

  // Held out size: the fitted radius law should not undershoot by more than 10%.
  const Thm4Calibration held = calibrate_thm4_constants(1, {1000, 10000}, 50, 0.1, 4);
  const double predicted = thm4_radius(1, 10000, 0.1, cal.k1, cal.k2);
  CHECK(held.quantiles[1] <= 1.1 * predicted);
}

TEST_CASE("calibration is reproducible and validates its inputs") {
  const auto a = calibrate_thm4_constants(1, {100, 1000}, 20, 0.1, 9);
  const auto b = calibrate_thm4_constants(1, {100, 1000}, 20, 0.1, 9);
  CHECK(a.quantiles == b.quantiles);
  CHECK(a.to_json() == b.to_json());
  try {
    calibrate_thm4_constants(1, {100, 1000}, 5, 0.1, 1);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Argument);
  }
  CHECK_THROWS_AS(calibrate_thm4_constants(1, {100, 200}, 30, 0.1, 1), Error);
  CHECK_THROWS_AS(calibrate_thm4_constants(0, {100, 1000}, 30, 0.1, 1), Error);
}

TEST_CASE("bound report") {
  BoundInputs in;
  in.l_data = 4.3;
  in.l_f = 4.5;
  in.h = 0.3;
  in.eps = 1e-3;
  in.rho = 0.2;
  in.n = 3;
  in.N = 527;
  const BoundReport r = bound_report(in);
  CHECK(r.l_g_is_proxy);
  CHECK(r.l_g_used == 4.3);
  CHECK(r.thm2 == thm2_bound(4.3, 0.2, 0.3, 1e-3));
  CHECK(r.thm4.has_value());
  bool proxy_flag = false;
  for (const auto& c : r.caveats) proxy_flag = proxy_flag || c.find("not a certificate") != std::string::npos;
  CHECK(proxy_flag);
  const auto j = r.to_json();
  CHECK(j.at("bounds").size() == 4);
  for (const auto& b : j.at("bounds")) {
    CHECK(b.contains("formula"));
    CHECK(b.contains("value"));
  }

  in.l_g = 5.0;
  const BoundReport certain = bound_report(in);
  CHECK_FALSE(certain.l_g_is_proxy);
  CHECK(certain.thm1 == thm1_bound(5.0, 0.3, 1e-3));

  in.N = 1;
  CHECK_FALSE(bound_report(in).thm4.has_value());
  in.h = -1;
  CHECK_THROWS_AS(bound_report(in), Error);
}
