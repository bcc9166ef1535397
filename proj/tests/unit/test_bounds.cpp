#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/special_functions/lambert_w.hpp>
#include <doctest.h>

#include "safeprob/bounds.hpp"

namespace b = safeprob::bounds;

namespace {

// Frozen oracles, evaluated in 50-digit arithmetic outside this code base.
constexpr double kEOver4 = 0.67957045711476130884;
constexpr double kLambda = 1.830161706366147524653;  // 5 * 0.99^100
constexpr double kFreedmanDtcbf = 0.69325740880981038;  // H(kLambda, 2)
constexpr double kH_4_2 = 0.21327402356696968;
constexpr double kH_099_third = 0.21535936829414312;
constexpr double kVille = 0.81698382936338525;
constexpr double kTightPqv = 4.8354010337355558;
constexpr double kWm1 = -3.5771520639572971;  // W_{-1}(-0.1)
constexpr double kPsiThreshold = 3.5128624172523394;  // phi = -0.5
constexpr double kSantoyo = 0.700631530380810546875;

b::SafetySpec spec(b::Mode mode, int k, double h0, double delta = 1.0, double sigma = 1.0) {
    b::SafetySpec s;
    s.mode = mode;
    s.horizon = k;
    s.h0 = h0;
    s.delta = delta;
    s.sigma = sigma;
    return s;
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace

TEST_CASE("kernel at lambda = 0 is exactly one") {
    for (double xi : {0.1, 1.0, 7.3, 10.0}) CHECK(b::freedman_kernel(0.0, xi) == 1.0);
}

TEST_CASE("kernel oracles") {
    CHECK(rel(b::freedman_kernel(1.0, 1.0), kEOver4) < 1e-14);
    CHECK(rel(b::freedman_kernel(4.0, 2.0), kH_4_2) < 1e-14);
    CHECK(rel(b::freedman_kernel(0.99, 1.0 / 3.0), kH_099_third) < 1e-13);
    CHECK(rel(b::freedman_kernel(kLambda, 2.0), kFreedmanDtcbf) < 1e-14);
}

TEST_CASE("kernel domain") {
    CHECK_THROWS_AS(b::freedman_kernel(-0.1, 1.0), std::domain_error);
    CHECK_THROWS_AS(b::freedman_kernel(1.0, 0.0), std::domain_error);
    // log-space keeps tiny values finite instead of underflowing to NaN
    const double lh = b::log_freedman_kernel(1e4, 0.01);
    CHECK(std::isfinite(lh));
    CHECK(lh < -1e3);
}

TEST_CASE("lambda threshold") {
    CHECK(b::lambda_threshold(spec(b::Dtcbf{1.0}, 50, 3.0)) == 3.0);
    CHECK(b::lambda_threshold(spec(b::CMart{0.0}, 50, 3.0)) == 3.0);
    for (double c : {0.0, 0.01, 0.3}) {
        CHECK(b::lambda_threshold(spec(b::General{1.0, c}, 40, 2.0)) ==
              doctest::Approx(b::lambda_threshold(spec(b::CMart{c}, 40, 2.0))).epsilon(1e-15));
    }
    CHECK(rel(b::lambda_threshold(spec(b::Dtcbf{0.99}, 100, 5.0)), kLambda) < 1e-14);
}

TEST_CASE("ville bound") {
    auto s = spec(b::Dtcbf{1.0}, 10, 5.0);
    CHECK_THROWS_AS(b::ville_bound(s), std::invalid_argument);
    s.upper_bound = 10.0;
    CHECK(b::ville_bound(s).raw == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_FALSE(b::ville_bound(s).vacuous);

    auto cm = spec(b::CMart{0.1}, 100, 5.0);
    cm.upper_bound = 10.0;
    const auto v = b::ville_bound(cm);
    CHECK(v.raw == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(v.clamped == 1.0);
    CHECK(v.vacuous);

    auto d = spec(b::Dtcbf{0.99}, 100, 5.0);
    d.upper_bound = 10.0;
    CHECK(rel(b::ville_bound(d).raw, kVille) < 1e-14);
}

TEST_CASE("freedman bound") {
    CHECK(b::freedman_bound(spec(b::Dtcbf{1.0}, 7, 0.0, 0.3, 2.0)).raw == 1.0);
    CHECK(rel(b::freedman_bound(spec(b::Dtcbf{0.99}, 100, 5.0, 1.0, 0.2)).raw, kFreedmanDtcbf) <
          1e-13);
    CHECK(rel(b::freedman_bound(spec(b::CMart{0.01}, 100, 5.0, 1.0, 0.2)).raw, kH_4_2) < 1e-13);

    const auto neg = b::freedman_bound(spec(b::CMart{0.1}, 100, 5.0, 1.0, 0.2));
    CHECK(neg.raw == 1.0);
    CHECK(neg.vacuous);
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(spec(b::Dtcbf{1.5}, 10, 1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(spec(b::Dtcbf{0.0}, 10, 1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(spec(b::CMart{-0.1}, 10, 1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(spec(b::Dtcbf{0.9}, 0, 1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(spec(b::Dtcbf{0.9}, 10, 1.0, 0.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(spec(b::Dtcbf{0.9}, 10, 1.0, 1.0, -1.0).validate(), std::invalid_argument);
    CHECK_NOTHROW(spec(b::General{0.9, 0.1}, 10, 1.0).validate());
}

TEST_CASE("tightened pqv") {
    CHECK(b::tightened_pqv(0.7, 1, 0.5, 2.0) == doctest::Approx(0.0625).epsilon(1e-15));
    CHECK(rel(b::tightened_pqv(0.99, 100, 1.0 / 3.0, 1.0), kTightPqv) < 1e-13);
}

TEST_CASE("issf floor and level") {
    CHECK(b::issf_worst_case(0.5, 1.0, 3.0, 0) == 3.0);
    CHECK(b::issf_worst_case(0.0, 1.0, 3.0, 1) == -1.0);
    CHECK(b::issf_worst_case(0.99, 1.0, 1.0, 1) == doctest::Approx(-0.01).epsilon(1e-12));
    CHECK(b::issf_safe_level(0.0, 1.0) == -1.0);
    CHECK(b::issf_safe_level(0.99, 1.0) == doctest::Approx(-100.0).epsilon(1e-12));
    CHECK(b::issf_safe_level(0.5, 2.0) == -4.0);
}

TEST_CASE("stochastic issf bound") {
    CHECK(b::stochastic_issf_bound(0.99, 1, 1.0, 1.0, 1.0 / 3.0, 2.0).raw == 0.0);
    const auto at0 = b::stochastic_issf_bound(0.99, 1, 1.0, 1.0, 1.0 / 3.0, 0.0);
    CHECK(rel(at0.raw, kH_099_third) < 1e-13);
    // indicator switches off once -eps is below the finite floor
    CHECK(b::stochastic_issf_bound(0.99, 50, 10.0, 1.0, 1.0 / 3.0, 1e3).raw == 0.0);
}

TEST_CASE("comparison conditions") {
    const auto a = b::comparison_conditions(6.0, 1.0, 0.2, 100, 10.0);
    CHECK(a.variance_limited);
    CHECK(a.below_upper);
    const auto c = b::comparison_conditions(6.0, 1.0, 0.5, 100, 10.0);
    CHECK_FALSE(c.variance_limited);
    CHECK(c.below_upper);
    const auto z = b::comparison_conditions(0.0, 1.0, 0.3, 100, 10.0);
    CHECK_FALSE(z.variance_limited);
    CHECK(z.below_upper == (10.0 >= 1.0 / b::kComparisonPhi));
}

TEST_CASE("dominance gap") {
    CHECK(b::dominance_gap(0.0, 10.0, 0.4, 100, 1.0) == 0.0);
    CHECK(b::dominance_gap(6.0, 10.0, 0.2, 100, 1.0) >= 0.0);
    CHECK(b::dominance_gap(9.9, 10.0, 3.0, 100, 1.0) < 0.0);
}

TEST_CASE("gap derivative matches finite difference") {
    const double lam = 5.0, ub = 10.0, delta = 1.0;
    const int k = 100;
    for (double sigma : {0.1, 0.3, 0.7}) {
        const double s2 = sigma * sigma, h = 1e-6 * s2;
        const double fp = b::dominance_gap(lam, ub, std::sqrt(s2 + h), k, delta);
        const double fm = b::dominance_gap(lam, ub, std::sqrt(s2 - h), k, delta);
        const double fd = (fp - fm) / (2.0 * h);
        const double an = b::dominance_gap_dsigma2(lam, ub, sigma, k, delta);
        CHECK(an <= 0.0);
        CHECK(std::abs(an - fd) <= 1e-5 * std::abs(an));
        const auto f = b::dominance_gap_factors(lam, sigma, k, delta);
        CHECK(f.a < 0.0);
        CHECK(f.b >= 0.0);
        CHECK(f.a * f.b == doctest::Approx(an).epsilon(1e-12));
    }
}

TEST_CASE("santoyo restatement") {
    CHECK(rel(b::santoyo_bound(0.9, -0.5, 10, 5.0, 10.0).raw, kSantoyo) < 1e-14);
    auto d = spec(b::Dtcbf{0.95}, 20, 4.0);
    d.upper_bound = 10.0;
    CHECK(b::santoyo_bound(0.95, 0.0, 20, 4.0, 10.0).raw ==
          doctest::Approx(b::ville_bound(d).raw).epsilon(1e-14));
    auto c = spec(b::CMart{0.05}, 20, 4.0);
    c.upper_bound = 10.0;
    CHECK(b::santoyo_bound(1.0, 0.05, 20, 4.0, 10.0).raw ==
          doctest::Approx(b::ville_bound(c).raw).epsilon(1e-14));
}

TEST_CASE("delta and sigma constructions") {
    auto z = b::constructive_delta_sigma(3.0, 0.0);
    CHECK(z.delta == 0.0);
    CHECK(z.sigma2 == 0.0);
    auto a = b::constructive_delta_sigma(2.0, 0.5);
    CHECK(a.delta == 2.0);
    CHECK(a.sigma2 == 1.0);
    auto u = b::constructive_delta_sigma(1.0, 1.0);
    CHECK(u.delta == 2.0);
    CHECK(u.sigma2 == 1.0);

    CHECK(b::hlip_delta_sigma(0.0).delta == 0.0);
    CHECK(b::hlip_delta_sigma(0.3).delta == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(b::hlip_delta_sigma(0.3).sigma2 == doctest::Approx(0.045).epsilon(1e-15));
    CHECK(b::hlip_delta_sigma(0.06).delta == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(b::hlip_delta_sigma(0.06).sigma2 == doctest::Approx(0.0018).epsilon(1e-15));
}

TEST_CASE("lambert w lower branch") {
    CHECK(std::abs(b::lambert_w_minus1(-std::exp(-1.0)) + 1.0) < 1e-9);
    CHECK(rel(b::lambert_w_minus1(-0.1), kWm1) < 1e-14);
    for (double x : {-0.367, -0.3, -0.1, -1e-3, -1e-8, -1e-200}) {
        const double w = b::lambert_w_minus1(x);
        CHECK(w <= -1.0);
        CHECK(w == doctest::Approx(boost::math::lambert_wm1(x)).epsilon(1e-13));
    }
    CHECK_THROWS_AS(b::lambert_w_minus1(0.1), std::domain_error);
    CHECK_THROWS_AS(b::lambert_w_minus1(-0.5), std::domain_error);
}

TEST_CASE("psi threshold") {
    CHECK(b::psi_threshold(-1.0) == doctest::Approx(1.0).epsilon(1e-12));
    const double t = b::psi_threshold(-0.5);
    CHECK(rel(t, kPsiThreshold) < 1e-13);
    CHECK(std::abs(b::psi(-0.5, t)) < 1e-12);
    for (double d : {1e-3, 0.5, 3.0, 40.0}) CHECK(b::psi(-0.5, t + d) >= 0.0);
    CHECK_THROWS(b::psi_threshold(0.2));
}
