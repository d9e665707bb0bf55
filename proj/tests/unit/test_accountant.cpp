#include <cmath>

#include "doctest.h"
#include "dpgan/accountant.hpp"
#include "dpgan/error.hpp"
#include "oracles.hpp"

using namespace dpgan;

TEST_CASE("q = 0 gives zero log moment for every lambda") {
  for (int lambda : {1, 2, 8, 32, 64}) {
    CHECK(per_step_log_moment({0.0, 2.0}, lambda) == 0.0);
  }
}

TEST_CASE("quadrature matches the Monte-Carlo oracle at q=0.01 sigma=4 lambda=8") {
  MechanismParams p{0.01, 4.0};
  double alpha = per_step_log_moment(p, 8);
  oracle::McMoment mc = oracle::mc_log_moment(p.q, p.sigma, 8, 10'000'000, 99);
  CHECK(std::abs(alpha - mc.alpha()) <= 3.0 * std::max(mc.se1_rel, mc.se2_rel) + 1e-9);
}

TEST_CASE("asymptotic bound: alpha <= 2 q^2 lambda (lambda+1) / ((1-q) sigma^2) for small q, sigma >= 2") {
  for (double q : {0.001, 0.005, 0.01}) {
    for (double sigma : {2.0, 4.0}) {
      for (int lambda = 1; lambda <= 32; ++lambda) {
        double alpha = per_step_log_moment({q, sigma}, lambda);
        double lam = static_cast<double>(lambda);
        double bound = 2.0 * q * q * lam * (lam + 1.0) / ((1.0 - q) * sigma * sigma);
        CHECK(alpha <= bound);
      }
    }
  }
}

TEST_CASE("composition is additive and record order does not matter") {
  MomentAccountant a({0.02, 2.0}, 32);
  MomentAccountant b({0.02, 2.0}, 32);
  a.record_steps(10);
  a.record_steps(5);
  b.record_steps(15);
  for (int lambda = 1; lambda <= 32; ++lambda) {
    CHECK(a.log_moment(lambda) == b.log_moment(lambda));
    CHECK(a.log_moment(lambda) == doctest::Approx(15.0 * a.per_step(lambda)).epsilon(1e-9));
  }
  MomentAccountant c({0.02, 2.0}, 32);
  c.record_steps(0);
  CHECK(c.steps() == 0);
  CHECK(c.epsilon_for_delta(1e-5) == 0.0);
}

TEST_CASE("epsilon is zero for the empty composition and delta round-trips") {
  MomentAccountant acc({0.01, 4.0});
  CHECK(acc.epsilon_for_delta(1e-5) == 0.0);
  CHECK(acc.delta_for_epsilon(0.0) == 1.0);  // exp(0)

  acc.record_steps(500);
  double eps = acc.epsilon_for_delta(1e-5);
  CHECK(eps > 0.0);
  CHECK(acc.delta_for_epsilon(eps) <= 1e-5 * (1.0 + 1e-12));
}

TEST_CASE("epsilon monotonicity: nondecreasing in steps, nonincreasing in sigma and delta") {
  MomentAccountant acc({0.01, 4.0});
  double prev = 0.0;
  for (std::uint64_t steps : {10u, 100u, 400u, 1600u}) {
    double eps = acc.epsilon_for_delta_at(steps, 1e-5);
    CHECK(eps >= prev);
    prev = eps;
  }
  MomentAccountant tighter({0.01, 2.0});
  CHECK(tighter.epsilon_for_delta_at(400, 1e-5) >= acc.epsilon_for_delta_at(400, 1e-5));
  CHECK(acc.epsilon_for_delta_at(400, 1e-4) <= acc.epsilon_for_delta_at(400, 1e-5));
}

TEST_CASE("sublinear growth: eps(4T) < 4 eps(T) at delta 1e-5") {
  MomentAccountant acc({0.01, 4.0});
  double e1 = acc.epsilon_for_delta_at(250, 1e-5);
  double e4 = acc.epsilon_for_delta_at(1000, 1e-5);
  CHECK(e4 < 4.0 * e1);
  // ratio bounded by 2 when doubling
  double e2 = acc.epsilon_for_delta_at(500, 1e-5);
  CHECK(e2 / e1 < 2.0);
}

TEST_CASE("delta decreases in epsilon while headroom remains") {
  MomentAccountant acc({0.01, 4.0});
  acc.record_steps(1000);
  double d1 = acc.delta_for_epsilon(1.0);
  double d2 = acc.delta_for_epsilon(2.0);
  double d3 = acc.delta_for_epsilon(3.0);
  CHECK(d1 > d2);
  CHECK(d2 > d3);
  CHECK(d3 > 0.0);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(per_step_log_moment({-0.1, 1.0}, 2), ConfigError);
  CHECK_THROWS_AS(per_step_log_moment({0.5, 0.0}, 2), ConfigError);
  CHECK_THROWS_AS(per_step_log_moment({0.5, 1.0}, 0), std::invalid_argument);
  MomentAccountant acc({0.01, 1.0}, 8);
  CHECK_THROWS_AS(acc.epsilon_for_delta(0.0), ConfigError);
  CHECK_THROWS_AS(acc.epsilon_for_delta(1.0), ConfigError);
}

TEST_CASE("the accountant interface has no clipping input by construction") {
  // the only mechanism inputs are (q, sigma); composing with any clipping
  // schedule cannot change epsilon because C never enters this module
  MomentAccountant acc({0.02, 2.0});
  acc.record_steps(100);
  double eps = acc.epsilon_for_delta(1e-5);
  MomentAccountant again({0.02, 2.0});
  again.record_steps(100);
  CHECK(again.epsilon_for_delta(1e-5) == eps);
}
