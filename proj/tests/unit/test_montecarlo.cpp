#include <algorithm>
#include <cmath>
#include <memory>

#include <doctest.h>

#include "safeprob/experiments.hpp"
#include "safeprob/montecarlo.hpp"

using namespace safeprob;
using namespace safeprob::montecarlo;

namespace {

std::shared_ptr<ScalarModel> scalar(double alpha, dynamics::Disturbance d, double x0, int k) {
    return std::make_shared<ScalarModel>(dynamics::ScalarLinearSystem{alpha, std::move(d)}, x0, k);
}

dynamics::Disturbance atom(double v) { return dynamics::Disturbance(dynamics::Categorical{{{v, 1.0}}}); }

}  // namespace

TEST_CASE("first exit is strict") {
    CHECK_FALSE(first_exit({1.0, 0.0, 0.5}, 0.0, 2));
    CHECK(first_exit({1.0, 0.5, -0.1}, 0.0, 2) == 2);
    CHECK_FALSE(first_exit({1.0, 0.5, -0.1}, 0.0, 1));
    CHECK_FALSE(first_exit({1.0, -0.5}, 0.5, 1));
    CHECK(first_exit({-1.0, 2.0}, 0.0, 1) == 0);
}

TEST_CASE("deterministic trials") {
    const auto safe = scalar(0.9, atom(0.0), 1.0, 50);
    const auto o = run_trial(*safe, 0.0, 123);
    CHECK_FALSE(o.exit_index);
    CHECK_FALSE(o.controller_failed);

    const auto forced = scalar(1.0, atom(-3.0), 2.0, 5);
    CHECK(run_trial(*forced, 0.0, 1).exit_index == 1);

    const auto e0 = estimate_exit_probability(*safe, 200, 9);
    CHECK(e0.p_hat == 0.0);
    CHECK(e0.ci_lo == 0.0);
    const auto e1 = estimate_exit_probability(*forced, 200, 9);
    CHECK(e1.p_hat == 1.0);
    CHECK(e1.n_exits == 200);
}

TEST_CASE("trials are bitwise reproducible across worker counts") {
    const auto m = scalar(0.99, experiments::named_scalar_disturbance("truncated_gaussian"), 1.0, 100);
    const auto a = run_trials(*m, 300, 42, 0.0, {1, false});
    const auto b = run_trials(*m, 300, 42, 0.0, {4, false});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].exit_index == b[i].exit_index);
        CHECK(a[i].trajectory.h == b[i].trajectory.h);
    }
    const auto single = run_trial(*m, 0.0, derive_seed(42, 17));
    CHECK(single.trajectory.h == a[17].trajectory.h);
}

TEST_CASE("wilson interval") {
    const auto [lo0, hi0] = wilson_interval(0, 100);
    CHECK(lo0 == 0.0);
    CHECK(hi0 == doctest::Approx(0.036994).epsilon(1e-4));
    const auto [lo, hi] = wilson_interval(50, 100);
    CHECK(lo == doctest::Approx(0.40383).epsilon(1e-4));
    CHECK(hi == doctest::Approx(0.59617).epsilon(1e-4));
    const auto [l1, h1] = wilson_interval(100, 100);
    CHECK(h1 == 1.0);
    CHECK(l1 < 1.0);
}

TEST_CASE("estimate invariants") {
    const auto m = scalar(0.99, experiments::named_scalar_disturbance("uniform"), 0.5, 100);
    const auto e = estimate_exit_probability(*m, 1000, 3);
    CHECK(e.ci_lo <= e.p_hat);
    CHECK(e.p_hat <= e.ci_hi);
    CHECK(e.p_hat == static_cast<double>(e.n_exits) / e.n_trials);
}

TEST_CASE("scalar estimate sits under the stochastic issf bound") {
    const auto m = scalar(0.99, experiments::named_scalar_disturbance("truncated_gaussian"), 10.0, 100);
    const auto e = estimate_exit_probability(*m, 10000, 77);
    const auto b = bounds::stochastic_issf_bound(0.99, 100, 10.0, 1.0, 1.0 / 3.0, 0.0);
    CHECK(e.p_hat <= b.clamped);
}

TEST_CASE("sample moments") {
    const dynamics::ScalarLinearSystem fixed{0.8, atom(0.0)};
    const auto z = mc_cond_moments(fixed, 2.0, 1000, 1);
    CHECK(z.variance == 0.0);
    CHECK(z.mean == doctest::Approx(1.6));

    const dynamics::ScalarLinearSystem noisy{0.8, experiments::named_scalar_disturbance("categorical")};
    const auto s = mc_cond_moments(noisy, 2.0, 100000, 2);
    CHECK(std::abs(s.mean - 1.6) <= 5.0 * s.mean_se);
    CHECK(std::abs(s.variance - 0.2) <= 5.0 * s.variance_se);
}

TEST_CASE("sweep is order independent") {
    std::vector<GridPoint> grid;
    for (int k : {5, 20, 60}) {
        GridPoint g;
        g.key = "k=" + std::to_string(k);
        g.model = scalar(0.95, experiments::named_scalar_disturbance("uniform"), 1.0, k);
        grid.push_back(g);
    }
    const auto fwd = sweep(grid, 400, 5);
    std::reverse(grid.begin(), grid.end());
    const auto rev = sweep(grid, 400, 5);
    for (std::size_t i = 0; i < fwd.size(); ++i) {
        const auto& r = rev[fwd.size() - 1 - i];
        CHECK(fwd[i].key == r.key);
        CHECK(fwd[i].estimate.n_exits == r.estimate.n_exits);
    }
    const auto one = estimate_exit_probability(*grid[0].model, 400, grid_seed(5, grid[0].key));
    CHECK(one.n_exits == rev[0].estimate.n_exits);
}

TEST_CASE("seed derivation") {
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
    CHECK(grid_seed(9, "a") == derive_seed(9, hash_key("a")));
    CHECK(hash_key("") == 0xcbf29ce484222325ULL);
}
