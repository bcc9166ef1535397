// montecarlo.hpp - deterministic trial execution and exit-probability estimates.
//
// Trial i of a run with base seed S draws from Rng(derive_seed(S, i)), so the
// outcome of a trial depends only on (S, i) and never on the worker that ran
// it. Results are merged by trial index.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "safeprob/bounds.hpp"
#include "safeprob/random.hpp"
#include "safeprob/systems.hpp"

namespace safeprob::montecarlo {

/// One simulated rollout. Index k runs 0..K for h and 1..K (stored at k - 1)
/// for the per-step conditional quantities.
struct Trajectory {
    std::vector<double> h;
    /// E[h(x_k) | F_{k-1}] and Var(h(x_k) | F_{k-1}) of the true barrier.
    std::vector<double> h_cond_mean;
    std::vector<double> h_cond_var;
    /// Filter constraint E[hbar(x_k) | F_{k-1}] - alpha h(x_{k-1}); empty for
    /// open-loop systems.
    std::vector<double> constraint_margin;
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> inputs;
    bool controller_failed{false};

    int steps() const { return static_cast<int>(h.size()) - 1; }
};

/// A closed-loop system with a fixed initial state and horizon.
class TrialModel {
public:
    virtual ~TrialModel() = default;
    virtual int horizon() const = 0;
    virtual double h0() const = 0;
    /// Simulates all K steps (stopping early only on controller failure).
    virtual Trajectory simulate(Rng& rng, bool keep_states) const = 0;
};

class ScalarModel final : public TrialModel {
public:
    ScalarModel(dynamics::ScalarLinearSystem system, double x0, int horizon);
    int horizon() const override { return horizon_; }
    double h0() const override { return x0_; }
    const dynamics::ScalarLinearSystem& system() const { return system_; }
    Trajectory simulate(Rng& rng, bool keep_states) const override;

private:
    dynamics::ScalarLinearSystem system_;
    double x0_;
    int horizon_;
    double noise_mean_;
    double noise_var_;
};

struct HlipControl {
    double alpha{0.9};
    Eigen::Vector2d v_des{0.5, 0.0};
    double input_cap{0.6};
};

class HlipModel final : public TrialModel {
public:
    HlipModel(dynamics::HlipSystem system, dynamics::HlipState x0, int horizon,
              HlipControl control);
    int horizon() const override { return horizon_; }
    double h0() const override;
    const dynamics::HlipSystem& system() const { return system_; }
    const dynamics::HlipState& x0() const { return x0_; }
    const HlipControl& control() const { return control_; }
    Trajectory simulate(Rng& rng, bool keep_states) const override;

private:
    dynamics::HlipSystem system_;
    dynamics::HlipState x0_;
    int horizon_;
    HlipControl control_;
};

/// First k in 1..K with h[k] < -epsilon (h[0] counts too, at index 0).
std::optional<int> first_exit(const std::vector<double>& h, double epsilon, int horizon);

struct TrialOutcome {
    std::optional<int> exit_index;
    bool controller_failed{false};
    Trajectory trajectory;
};

TrialOutcome run_trial(const TrialModel& model, double epsilon, std::uint64_t trial_seed,
                       bool keep_states = false);

struct RunOptions {
    /// 0 means one worker per hardware thread.
    unsigned workers{0};
    bool keep_states{false};
};

/// n_trials outcomes in trial-index order.
std::vector<TrialOutcome> run_trials(const TrialModel& model, int n_trials,
                                     std::uint64_t base_seed, double epsilon,
                                     const RunOptions& options = {});

struct ExitEstimate {
    double p_hat{0.0};
    double ci_lo{0.0};
    double ci_hi{0.0};
    int n_trials{0};
    int n_exits{0};
    int n_controller_failures{0};
};

inline constexpr double kWilsonZ95 = 1.959963984540054;

/// Two-sided Wilson score interval.
std::pair<double, double> wilson_interval(int successes, int n, double z = kWilsonZ95);

/// Counts exits within the first `horizon` steps at level -epsilon. Controller
/// failures are reported separately and only counted as exits on request.
ExitEstimate summarize(const std::vector<TrialOutcome>& outcomes, int horizon, double epsilon,
                       bool failures_as_exits = false);

ExitEstimate estimate_exit_probability(const TrialModel& model, int n_trials,
                                       std::uint64_t base_seed, double epsilon = 0.0,
                                       const RunOptions& options = {},
                                       bool failures_as_exits = false);

struct SampleMoments {
    double mean;
    double variance;
    double mean_se;
    double variance_se;
};

/// Sample mean and variance of n_samples draws, with standard errors.
SampleMoments mc_moments(const std::function<double(Rng&)>& draw, int n_samples,
                         std::uint64_t seed);

/// One-step moments of h(x_{k+1}) for the scalar system at x.
SampleMoments mc_cond_moments(const dynamics::ScalarLinearSystem& system, double x,
                              int n_samples, std::uint64_t seed);

/// One-step moments of h(x_{k+1}) or hbar(x_{k+1}) for the HLIP at (x, u).
SampleMoments mc_cond_moments(const dynamics::HlipSystem& system, const dynamics::HlipState& x,
                              const Eigen::Vector2d& u, bool use_hbar, int n_samples,
                              std::uint64_t seed);

struct GridPoint {
    /// Canonical coordinates; the trial seeds derive from this key, not from
    /// the point's position in the grid.
    std::string key;
    std::shared_ptr<const TrialModel> model;
    double epsilon{0.0};
    bounds::BoundResult bound;
};

struct SweepRow {
    std::string key;
    ExitEstimate estimate;
    bounds::BoundResult bound;
    std::string error;
};

std::vector<SweepRow> sweep(const std::vector<GridPoint>& grid, int n_trials,
                            std::uint64_t base_seed, const RunOptions& options = {});

/// Seed for a grid point: derive_seed(base, hash_key(key)).
std::uint64_t grid_seed(std::uint64_t base_seed, const std::string& key);

}  // namespace safeprob::montecarlo
