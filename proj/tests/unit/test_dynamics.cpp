#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include "safeprob/disturbance.hpp"
#include "safeprob/montecarlo.hpp"
#include "safeprob/random.hpp"
#include "safeprob/systems.hpp"

using namespace safeprob;
using namespace safeprob::dynamics;

namespace {

constexpr double kTruncNormalVar = 0.29112509477279321;  // N(0,1) on [-1, 1]

HlipSystem make_hlip(double d_max, Obstacle obs = {{2.5, 0.15}, 0.5}) {
    return HlipSystem(hlip_matrices(Gait{}), Gait{}, obs, d_max,
                      Disturbance(ProductOfDisks{{d_max, d_max}}));
}

HlipState at(double px, double py) {
    HlipState x = HlipState::Zero();
    x(0) = px;
    x(1) = py;
    return x;
}

}  // namespace

TEST_CASE("disturbance validation") {
    CHECK_THROWS_AS(Disturbance(UniformInterval{1.0, -1.0}), std::invalid_argument);
    CHECK_THROWS_AS(Disturbance(TruncatedGaussian{0.0, 1.0, 1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(Disturbance(Categorical{{{0.0, 0.5}, {1.0, 0.4}}}), std::invalid_argument);
    CHECK_THROWS_AS(Disturbance(UniformDisk2{-0.1}), std::invalid_argument);
    CHECK_NOTHROW(Disturbance(Categorical{{{0.0, 0.5}, {1.0, 0.5 + 1e-13}}}));
}

TEST_CASE("exact moments") {
    const auto u = Disturbance(UniformInterval{-1.0, 1.0}).exact_moments();
    CHECK(u.mean(0) == 0.0);
    CHECK(u.covariance(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    const auto c = skewed_categorical().exact_moments();
    CHECK(std::abs(c.mean(0)) < 1e-15);
    CHECK(c.covariance(0, 0) == doctest::Approx(0.2).epsilon(1e-14));

    const auto t = Disturbance(TruncatedGaussian{0.0, 1.0, -1.0, 1.0}).exact_moments();
    CHECK(t.covariance(0, 0) == doctest::Approx(kTruncNormalVar).epsilon(1e-14));

    const auto d = Disturbance(UniformDisk2{0.2}).exact_moments();
    CHECK(d.covariance(0, 0) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(d.covariance(0, 1) == 0.0);

    const auto b = Disturbance(UniformBall{4, 0.3}).exact_moments();
    CHECK(b.covariance(2, 2) == doctest::Approx(0.09 / 6.0).epsilon(1e-15));
}

TEST_CASE("sampling") {
    Rng rng(7);
    const Disturbance atom(Categorical{{{5.0, 1.0}}});
    for (int i = 0; i < 10; ++i) CHECK(atom.sample_scalar(rng) == 5.0);

    const Disturbance tg(TruncatedGaussian{0.0, 1.0, -1.0, 1.0});
    for (int i = 0; i < 1000; ++i) CHECK(std::abs(tg.sample_scalar(rng)) <= 1.0);

    const Disturbance disks(ProductOfDisks{{0.1, 0.2}});
    for (int i = 0; i < 1000; ++i) {
        const auto v = disks.sample(rng);
        CHECK(v.head<2>().norm() <= 0.1);
        CHECK(v.tail<2>().norm() <= 0.2);
    }
    CHECK_THROWS_AS(disks.sample_scalar(rng), std::logic_error);

    const int n = 100000;
    const Disturbance uni(UniformInterval{-1.0, 1.0});
    const auto s = montecarlo::mc_moments([&](Rng& r) { return uni.sample_scalar(r); }, n, 11);
    CHECK(std::abs(s.mean) <= 5.0 * s.mean_se);
    const auto sk = skewed_categorical();
    const auto s2 = montecarlo::mc_moments([&](Rng& r) { return sk.sample_scalar(r); }, n, 12);
    CHECK(std::abs(s2.mean) <= 5.0 * s2.mean_se);
}

TEST_CASE("scalar system") {
    const ScalarLinearSystem zero{0.99, Disturbance(Categorical{{{0.0, 1.0}}})};
    Rng rng(1);
    CHECK(zero.step(1.0, rng) == 0.99);
    const ScalarLinearSystem half{1.0, Disturbance(Categorical{{{0.5, 1.0}}})};
    CHECK(half.step(0.0, rng) == 0.5);
    const ScalarLinearSystem tg{0.9, Disturbance(TruncatedGaussian{0.0, 1.0, -1.0, 1.0})};
    const auto cm = tg.cond_moments(2.0);
    CHECK(cm.mean == doctest::Approx(1.8).epsilon(1e-15));
    CHECK(cm.variance == doctest::Approx(kTruncNormalVar).epsilon(1e-14));
}

TEST_CASE("hlip matrices") {
    const auto m = hlip_matrices(Gait{});
    Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(m.a));
    CHECK(std::isfinite(es.eigenvalues().cwiseAbs().maxCoeff()));
    CHECK(m.b.norm() > 0.0);

    Gait slow;
    slow.t_ssp = 2.0 / 3.0;
    CHECK((hlip_matrices(slow).a - m.a).norm() > 1e-6);

    // p rows carry the position update of the relative coordinate
    CHECK(m.a(0, 0) == 1.0);
    CHECK(m.a(0, 2) == doctest::Approx(m.a(2, 2) - 1.0));
    CHECK(m.b(0, 0) == doctest::Approx(1.0 - m.a(2, 2)));

    Gait bad;
    bad.z0 = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("hlip selector and disturbance map") {
    const auto c = hlip_selector();
    CHECK(c.row(0).sum() == 1.0);
    CHECK(c(0, 0) == 1.0);
    CHECK(c(1, 1) == 1.0);
    CHECK(c.bottomRows(4).norm() == 0.0);

    HlipD want;
    want << 1, 0, 0, 0,
            0, 1, 0, 0,
            1, 0, 0, 0,
            0, 1, 0, 0,
            0, 0, 1, 0,
            0, 0, 0, 1;
    CHECK(hlip_disturbance_map() == want);
}

TEST_CASE("hlip passthrough") {
    HlipMatrices id{HlipA::Identity(), HlipB::Zero()};
    const HlipSystem sys(id, Gait{}, Obstacle{{5.0, 5.0}, 0.5}, 0.0,
                         Disturbance(ProductOfDisks{{0.0, 0.0}}));
    HlipState x;
    x << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
    CHECK(sys.step_with(x, Eigen::Vector2d::Zero(), Eigen::Vector4d::Zero()) == x);

    Eigen::Vector4d d(0.01, -0.02, 0.03, 0.04);
    const auto y = sys.step_with(x, Eigen::Vector2d::Zero(), d);
    CHECK(y(0) == doctest::Approx(0.11));
    CHECK(y(2) == doctest::Approx(0.31));
    CHECK(y(5) == doctest::Approx(0.64));
}

TEST_CASE("hlip construction errors") {
    CHECK_THROWS_AS(HlipSystem(hlip_matrices(Gait{}), Gait{}, Obstacle{}, 0.1,
                               Disturbance(UniformDisk2{0.1})),
                    std::invalid_argument);
    CHECK_NOTHROW(HlipSystem(hlip_matrices(Gait{}), Gait{}, Obstacle{}, 0.1,
                             Disturbance(UniformBall{4, 0.1})));
}

TEST_CASE("barrier geometry") {
    const auto sys = make_hlip(0.05, Obstacle{{1.0, 2.0}, 0.5});
    CHECK(std::abs(sys.h(at(1.5, 2.0))) < 1e-15);
    const auto ev = sys.barrier(at(2.0, 2.0));
    CHECK(ev.h == doctest::Approx(0.5));
    CHECK(ev.e_hat(0) == doctest::Approx(1.0));
    CHECK(std::abs(ev.e_hat(1)) < 1e-15);
    CHECK_THROWS_AS(sys.barrier(at(1.0, 2.0)), DegenerateDirection);

    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const auto p = at(1.0 + 4.0 * (uniform01(rng) - 0.5), 2.0 + 4.0 * (uniform01(rng) - 0.5));
        const auto q = at(1.0 + 4.0 * (uniform01(rng) - 0.5), 2.0 + 4.0 * (uniform01(rng) - 0.5));
        const auto e = sys.barrier(p, q);
        CHECK(std::abs(e.e_hat.norm() - 1.0) < 1e-12);
        CHECK(e.hbar <= sys.h(q) + 1e-12);
    }
}

TEST_CASE("conditional moments of the barrier") {
    const auto still = make_hlip(0.0);
    const auto x = still.periodic_state({0.0, 0.0}, {0.5, 0.0});
    const Eigen::Vector2d u = still.nominal_controller(x, {0.5, 0.0}, 0.6);
    CHECK(still.cond_moments_hbar(x, u).variance == 0.0);
    CHECK(still.cond_moments_h(x, u).variance < 1e-20);

    const auto sys = make_hlip(0.06);
    const auto cm = sys.cond_moments_hbar(x, u);
    CHECK(cm.variance == doctest::Approx(0.06 * 0.06 / 4.0).epsilon(1e-12));
    CHECK(cm.variance <= 0.06 * 0.06 / 2.0);

    const auto mc = montecarlo::mc_cond_moments(sys, x, u, true, 100000, 5);
    CHECK(std::abs(mc.mean - cm.mean) <= 5.0 * mc.mean_se);
    const auto th = sys.cond_moments_h(x, u);
    const auto mh = montecarlo::mc_cond_moments(sys, x, u, false, 100000, 6);
    CHECK(std::abs(mh.mean - th.mean) <= 5.0 * mh.mean_se);
    CHECK(std::abs(mh.variance - th.variance) <= 5.0 * mh.variance_se);
    CHECK(th.mean >= cm.mean - 1e-12);
}

TEST_CASE("safety filter") {
    const auto sys = make_hlip(0.03);
    const double alpha = 0.9;
    // far from the obstacle the nominal input passes through
    const auto far = sys.periodic_state({-5.0, 0.0}, {0.5, 0.0});
    const Eigen::Vector2d u_far = sys.nominal_controller(far, {0.5, 0.0}, 0.6);
    const auto f = sys.safety_filter(far, u_far, alpha);
    CHECK_FALSE(f.active);
    CHECK(f.u == u_far);

    // heading straight into it the filter must act
    const auto near = sys.periodic_state({1.6, 0.15}, {0.5, 0.0});
    const Eigen::Vector2d u_near = sys.nominal_controller(near, {0.5, 0.0}, 0.6);
    const auto g = sys.safety_filter(near, u_near, alpha);
    CHECK(g.active);
    CHECK(std::abs(g.slack) <= 1e-10);
    CHECK(sys.cond_moments_hbar(near, g.u).mean >= alpha * sys.h(near) - 1e-9);
    CHECK(sys.safety_filter(near, g.u, alpha).u == g.u);
}

TEST_CASE("nominal controller") {
    const auto sys = make_hlip(0.0);
    const Eigen::Vector2d v_des(0.5, 0.0);
    auto x = sys.periodic_state({0.0, 0.0}, v_des);
    const Eigen::Vector2d u = sys.nominal_controller(x, v_des, 0.6);
    CHECK(u.norm() <= 0.6 + 1e-15);
    CHECK(sys.nominal_controller(x, v_des, 0.6) == u);

    const auto sym = sys.periodic_state({0.0, 0.0}, {0.0, 0.0});
    const Eigen::Vector2d u0 = sys.nominal_controller(sym, {0.0, 0.0}, 0.6);
    CHECK(u0.allFinite());
    CHECK(u0.norm() < 1e-12);

    // velocity error contracts from a perturbed start
    x(4) += 0.2;
    x(5) -= 0.1;
    const double e0 = (x.tail<2>() - v_des).norm();
    for (int k = 0; k < 20; ++k) x = sys.mean_next(x, sys.nominal_controller(x, v_des, 0.6));
    CHECK((x.tail<2>() - v_des).norm() < 1e-3 * e0);
}
