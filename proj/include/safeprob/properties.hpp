// properties.hpp - executable versions of the invariants the bounds and proofs
// rely on. Each check reports sample counts, violations and the worst margin
// (smallest slack; negative means violated).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "safeprob/experiments.hpp"
#include "safeprob/table.hpp"

namespace safeprob::properties {

struct PropertyResult {
    std::string name;
    bool passed{true};
    std::int64_t samples{0};
    std::int64_t violations{0};
    double worst_margin{1e300};

    /// Records one sample with the given slack (>= 0 is a pass).
    void record(double margin);
    /// Marks a failed sample without a meaningful slack.
    void fail();
};

// bounds
PropertyResult kernel_identity();
PropertyResult kernel_monotonicity(int n = 50);
PropertyResult mgf_lemma(int samples, std::uint64_t seed);
PropertyResult optimal_gamma(int samples, std::uint64_t seed);
PropertyResult dominance_grid(const experiments::BoundGridParams& grid);
PropertyResult dominance_random(int samples, std::uint64_t seed);
PropertyResult gap_derivative(int n_lambda = 40, int n_sigma = 25);
PropertyResult gap_b_factor(int samples, std::uint64_t seed);
PropertyResult santoyo_coincidence(int samples, std::uint64_t seed);
PropertyResult vacuity_flags(int samples, std::uint64_t seed);
PropertyResult lambert_w_branch_point();
PropertyResult lambert_w_roundtrip(int points);
PropertyResult psi_above_threshold(double phi, int samples, std::uint64_t seed);

// martingale, on the scalar model
struct ScalarMartingaleParams {
    double alpha{0.99};
    std::string distribution{"truncated_gaussian"};
    int horizon{100};
    double h0{10.0};
    double delta{1.0};
    double sigma{1.0 / 3.0};
    int trials{10000};
};

/// Rows: doob_reconstruction, predictable_increment, martingale_difference,
/// pqv_bound (with the given sigma), pqv_bound_true_variance, terminal_mean,
/// supermartingale, containment.
std::vector<PropertyResult> scalar_martingale(const ScalarMartingaleParams& p,
                                              std::uint64_t seed,
                                              const montecarlo::RunOptions& options = {});

struct VilleParams {
    double alpha{0.95};
    double half_width{0.5};
    double upper_bound{10.0};
    double h0{2.0};
    int horizon{20};
    int trials{5000};
};

/// Empirical P{sup W > lambda} against E[W_0] / lambda plus 3 Wilson
/// half-widths for W_k = B a^{-K} - a^{-k} h(x_k).
PropertyResult ville_empirical(const VilleParams& p, std::uint64_t seed);

/// Every scalar trajectory with |d| <= delta stays above the almost-sure floor.
PropertyResult issf_floor(int trials, std::uint64_t seed);

// dynamics
std::vector<PropertyResult> disturbance_moments(int samples, std::uint64_t seed);

/// hbar_conservative, filter_idempotent, filter_condition, cond_moments_hbar_mc.
std::vector<PropertyResult> hlip_filter(int samples, std::uint64_t seed);

// montecarlo
/// Wilson 95% coverage of p in {0.1, 0.5} over reps repetitions at n trials.
PropertyResult wilson_coverage(int reps, int n, std::uint64_t seed);

/// Every property at suite-scale sample counts.
std::vector<PropertyResult> run_all(std::uint64_t seed, const montecarlo::RunOptions& options = {});

experiments::ResultTable to_table(const std::vector<PropertyResult>& rows);

}  // namespace safeprob::properties
