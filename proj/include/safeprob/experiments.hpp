// experiments.hpp - the three scenario kinds and their fixed table schemas.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "safeprob/montecarlo.hpp"
#include "safeprob/systems.hpp"
#include "safeprob/table.hpp"

namespace safeprob::experiments {

/// n evenly spaced points from start to stop inclusive (n = 1 gives start).
std::vector<double> linspace(double start, double stop, int n);

// ---------------------------------------------------------------- schemas

std::vector<Column> bound_grid_columns();
std::vector<Column> issf_compare_columns();
std::vector<Column> hlip_case_columns();
std::vector<Column> hlip_trajectory_columns();
std::vector<Column> property_suite_columns();

// ------------------------------------------------------------- bound grid

struct BoundGridParams {
    double upper_bound{10.0};
    int horizon{100};
    double delta{1.0};
    std::vector<double> lambdas = linspace(0.0, 10.0, 101);
    std::vector<double> sigmas = linspace(0.01, 1.0, 100);
};

ResultTable bound_grid(const BoundGridParams& p);

// ------------------------------------------------------------ ISSf compare

/// Zero-mean scalar disturbances on [-1, 1] used by the comparison:
/// "uniform", "truncated_gaussian", "categorical".
dynamics::Disturbance named_scalar_disturbance(const std::string& name);

struct IssfParams {
    double alpha{0.99};
    double delta{1.0};
    double sigma{1.0 / 3.0};
    double h0{10.0};
    std::vector<int> horizons{1, 100, 200, 300, 400};
    std::vector<double> epsilons = linspace(0.0, 100.0, 20);
    std::vector<std::string> distributions{"uniform", "truncated_gaussian", "categorical"};
    int trials{2000};
};

/// Per-trajectory martingale audit totals.
struct AuditStats {
    std::int64_t trajectories{0};
    std::int64_t exits{0};
    std::int64_t containment_violations{0};
    /// Largest A_k - A_{k-1} (should be <= 0 up to rounding).
    double max_predictable_increment{-1e300};
    /// Largest M_k - M_{k-1} (should be <= 1).
    double max_martingale_step{-1e300};

    void merge(const AuditStats& other);
};

struct IssfOutput {
    ResultTable table{issf_compare_columns()};
    AuditStats audit;
};

IssfOutput issf_compare(const IssfParams& p, std::uint64_t seed,
                        const montecarlo::RunOptions& options = {});

// ------------------------------------------------------------------ HLIP

struct HlipParams {
    std::vector<double> d_max{0.0, 0.03, 0.06};
    std::vector<double> alphas{0.9, 0.99};
    int trials{500};
    double duration{10.0};
    dynamics::Gait gait{};
    /// When set, used verbatim instead of the gait-derived matrices.
    std::optional<dynamics::HlipMatrices> matrices;
    dynamics::Obstacle obstacle{{2.5, 0.15}, 0.5};
    Eigen::Vector2d start{0.0, 0.0};
    Eigen::Vector2d v_des{0.5, 0.0};
    double input_cap{0.6};
    /// "disks" (two uniform 2-disks) or "ball" (uniform 4-ball).
    std::string disturbance{"disks"};
    int retain_trajectories{50};

    int horizon() const;
};

struct HlipOutput {
    ResultTable table{hlip_case_columns()};
    ResultTable trajectories{hlip_trajectory_columns()};
    AuditStats audit;
    std::int64_t logged_steps{0};
    /// max over logged steps of alpha h(x_k) - E[hbar(x_{k+1}) | F_k], floored at 0.
    double max_constraint_violation{0.0};
};

/// delta and sigma^2 used for a cell, given the disturbance family.
bounds::DeltaSigma hlip_cell_delta_sigma(const std::string& family, double d_max);

/// Freedman bound for a cell; delta = 0 gives the limit (0 if lambda > 0).
bounds::BoundResult hlip_cell_bound(double alpha, int horizon, double h0, double delta,
                                    double sigma2);

/// Smallest k in 0..K with the almost-sure floor below 0, or -1.
int worst_case_first_violation(double alpha, double delta, double h0, int horizon);

HlipOutput hlip_case(const HlipParams& p, std::uint64_t seed,
                     const montecarlo::RunOptions& options = {});

}  // namespace safeprob::experiments
