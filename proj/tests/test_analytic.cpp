#include <doctest.h>

#include <cmath>

#include "dml/analytic.hpp"
#include "oracles.hpp"

using namespace dml::analytic;

TEST_CASE("bs_call on the reference point s=100 k=110 sigma=0.2 tau=1 r=0") {
  const auto q = bs_call(100.0, 110.0, 0.2, 1.0, 0.0);
  // frozen from closed form; quadrature below re-derives them independently
  CHECK(q.price == doctest::Approx(4.2920109414098880).epsilon(1e-12));
  CHECK(q.delta == doctest::Approx(0.35325369152806303).epsilon(1e-12));
  CHECK(q.d1 == doctest::Approx(-0.37655089902162430).epsilon(1e-12));
  CHECK(q.d2 == doctest::Approx(-0.57655089902162430).epsilon(1e-12));

  CHECK(q.price == doctest::Approx(oracles::quad_call_price(100, 110, 0.2, 1.0)).epsilon(1e-7));
  const auto call_payoff = [](double z) { return z > 110.0 ? z - 110.0 : 0.0; };
  CHECK(q.delta ==
        doctest::Approx(oracles::quad_delta(call_payoff, 100, 110, 0.2, 1.0)).epsilon(1e-5));
}

TEST_CASE("bs_call limits") {
  SUBCASE("strike to zero gives a forward") {
    const auto q = bs_call(100.0, 1e-9, 0.2, 1.0, 0.0);
    CHECK(q.price == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(q.delta == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("sigma=0 out of the money") {
    const auto q = bs_call(100.0, 110.0, 0.0, 1.0, 0.0);
    CHECK(q.price == 0.0);
    CHECK(q.delta == 0.0);
  }
  SUBCASE("sigma=0 in the money") {
    const auto q = bs_call(100.0, 90.0, 0.0, 1.0, 0.0);
    CHECK(q.price == doctest::Approx(10.0));
    CHECK(q.delta == 1.0);
  }
  SUBCASE("domain errors") {
    CHECK_THROWS_AS(bs_call(-1.0, 110.0, 0.2, 1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(bs_call(100.0, 0.0, 0.2, 1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(bs_call(100.0, 110.0, 0.2, 0.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(bs_call(100.0, 110.0, -0.2, 1.0, 0.0), std::domain_error);
  }
}

TEST_CASE("bs_digital on the reference point and in saturation") {
  const auto q = bs_digital(100.0, 110.0, 0.2, 1.0, 0.0);
  CHECK(q.price == doctest::Approx(0.28212143828542195).epsilon(1e-12));
  CHECK(q.delta == doctest::Approx(0.016892656529974242).epsilon(1e-12));

  CHECK(q.price == doctest::Approx(oracles::quad_digital_price(100, 110, 0.2, 1.0)).epsilon(1e-7));
  const auto dig_payoff = [](double z) { return z > 110.0 ? 1.0 : 0.0; };
  CHECK(q.delta ==
        doctest::Approx(oracles::quad_delta(dig_payoff, 100, 110, 0.2, 1.0)).epsilon(1e-4));

  const auto deep = bs_digital(1e6, 110.0, 0.2, 1.0, 0.0);
  CHECK(deep.price == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(deep.delta == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(bs_digital(110.0, 110.0, 0.0, 1.0, 0.0), std::domain_error);
}

TEST_CASE("quadrature agreement on an (s, tau) grid") {
  for (double s : {80.0, 95.0, 110.0, 140.0}) {
    for (double tau : {0.25, 1.0}) {
      const auto c = bs_call(s, 110.0, 0.2, tau, 0.0);
      const auto d = bs_digital(s, 110.0, 0.2, tau, 0.0);
      CHECK(c.price ==
            doctest::Approx(oracles::quad_call_price(s, 110.0, 0.2, tau)).epsilon(1e-6));
      CHECK(d.price ==
            doctest::Approx(oracles::quad_digital_price(s, 110.0, 0.2, tau)).epsilon(1e-6));
    }
  }
}

TEST_CASE("strike derivative of the call equals minus the digital price") {
  for (double s : {90.0, 100.0, 125.0}) {
    const double k = 110.0, h = 1e-3;
    const double dCdK =
        (bs_call(s, k + h, 0.2, 1.0, 0.0).price - bs_call(s, k - h, 0.2, 1.0, 0.0).price) /
        (2.0 * h);
    const double dig = bs_digital(s, k, 0.2, 1.0, 0.0).price;
    CHECK(dCdK == doctest::Approx(-dig).epsilon(1e-6));
  }
}

TEST_CASE("call delta is within bounds and non-decreasing in spot") {
  double prev = -1.0;
  for (double s = 40.0; s <= 250.0; s += 2.5) {
    const auto q = bs_call(s, 110.0, 0.2, 0.7, 0.0);
    CHECK(q.delta >= 0.0);
    CHECK(q.delta <= 1.0);
    CHECK(q.delta >= prev);
    CHECK(q.price >= std::max(s - 110.0, 0.0));  // r = 0 intrinsic bound
    CHECK(q.price <= s);
    prev = q.delta;
  }
}

TEST_CASE("lognormal density normalizes and is skewed") {
  const double s0 = 100.0, sigma = 0.2, tau = 1.0;
  const double mass = oracles::simpson(
      [&](double z) { return z <= 0.0 ? 0.0 : lognormal_pdf(z, s0, sigma, tau); }, 1e-9,
      20.0 * s0, 400000);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));

  // mode sits below the forward for sigma > 0
  double best_z = 0.0, best = -1.0;
  for (double z = 10.0; z <= 300.0; z += 0.05) {
    const double f = lognormal_pdf(z, s0, sigma, tau);
    if (f > best) {
      best = f;
      best_z = z;
    }
  }
  CHECK(best_z < s0);

  CHECK(lognormal_pdf(-5.0, s0, sigma, tau) == 0.0);
  CHECK(lognormal_pdf(0.0, s0, sigma, tau) == 0.0);
  CHECK_THROWS_AS(lognormal_pdf(100.0, s0, 0.0, tau), std::domain_error);
}

TEST_CASE("digital delta relates to the lognormal density at the strike") {
  // d(digital)/ds0 by finite difference of the quadrature tail mass
  const double s0 = 100.0, k = 110.0, sigma = 0.2, tau = 1.0;
  const auto dig_payoff = [k](double z) { return z > k ? 1.0 : 0.0; };
  const double fd = oracles::quad_delta(dig_payoff, s0, k, sigma, tau);
  const double closed = bs_digital(s0, k, sigma, tau).delta;
  CHECK(closed == doctest::Approx(fd).epsilon(1e-4));
  // the tail-mass derivative is pdf(k) * k / s0 for multiplicative dynamics
  CHECK(closed == doctest::Approx(lognormal_pdf(k, s0, sigma, tau) * k / s0).epsilon(1e-12));
}
