#include "safeprob/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

namespace safeprob::montecarlo {

ScalarModel::ScalarModel(dynamics::ScalarLinearSystem system, double x0, int horizon)
    : system_(std::move(system)), x0_(x0), horizon_(horizon) {
    if (horizon_ < 1) throw std::invalid_argument("horizon must be >= 1");
    if (system_.disturbance.dimension() != 1)
        throw std::invalid_argument("scalar model needs a scalar disturbance");
    const auto m = system_.disturbance.exact_moments();
    noise_mean_ = m.mean[0];
    noise_var_ = m.covariance(0, 0);
}

Trajectory ScalarModel::simulate(Rng& rng, bool keep_states) const {
    Trajectory t;
    t.h.reserve(horizon_ + 1);
    t.h_cond_mean.reserve(horizon_);
    t.h_cond_var.assign(horizon_, noise_var_);
    double x = x0_;
    t.h.push_back(system_.barrier(x));
    if (keep_states) t.states.push_back(Eigen::VectorXd::Constant(1, x));
    for (int k = 0; k < horizon_; ++k) {
        t.h_cond_mean.push_back(system_.alpha * x + noise_mean_);
        x = system_.step(x, rng);
        t.h.push_back(system_.barrier(x));
        if (keep_states) t.states.push_back(Eigen::VectorXd::Constant(1, x));
    }
    return t;
}

HlipModel::HlipModel(dynamics::HlipSystem system, dynamics::HlipState x0, int horizon,
                     HlipControl control)
    : system_(std::move(system)), x0_(x0), horizon_(horizon), control_(control) {
    if (horizon_ < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(control_.alpha > 0.0 && control_.alpha <= 1.0))
        throw std::invalid_argument("filter alpha must lie in (0, 1]");
}

double HlipModel::h0() const { return system_.h(x0_); }

Trajectory HlipModel::simulate(Rng& rng, bool keep_states) const {
    Trajectory t;
    t.h.reserve(horizon_ + 1);
    dynamics::HlipState x = x0_;
    t.h.push_back(system_.h(x));
    if (keep_states) t.states.emplace_back(x);
    for (int k = 0; k < horizon_; ++k) {
        Eigen::Vector2d u;
        try {
            const Eigen::Vector2d u_nom =
                system_.nominal_controller(x, control_.v_des, control_.input_cap);
            u = system_.safety_filter(x, u_nom, control_.alpha).u;
        } catch (const dynamics::ControllerFailure&) {
            t.controller_failed = true;
            return t;
        } catch (const dynamics::DegenerateDirection&) {
            t.controller_failed = true;
            return t;
        }
        const double h_now = t.h.back();
        t.constraint_margin.push_back(system_.cond_moments_hbar(x, u).mean -
                                      control_.alpha * h_now);
        const auto cm = system_.cond_moments_h(x, u);
        t.h_cond_mean.push_back(cm.mean);
        t.h_cond_var.push_back(cm.variance);
        x = system_.step(x, u, rng);
        t.h.push_back(system_.h(x));
        if (keep_states) {
            t.inputs.emplace_back(u);
            t.states.emplace_back(x);
        }
    }
    return t;
}

std::optional<int> first_exit(const std::vector<double>& h, double epsilon, int horizon) {
    const int last = std::min<int>(horizon, static_cast<int>(h.size()) - 1);
    for (int k = 0; k <= last; ++k)
        if (h[k] < -epsilon) return k;
    return std::nullopt;
}

TrialOutcome run_trial(const TrialModel& model, double epsilon, std::uint64_t trial_seed,
                       bool keep_states) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
    Rng rng(trial_seed);
    TrialOutcome out;
    out.trajectory = model.simulate(rng, keep_states);
    out.exit_index = first_exit(out.trajectory.h, epsilon, model.horizon());
    // A failed trial is its own outcome, unless it had already exited.
    out.controller_failed = out.trajectory.controller_failed && !out.exit_index;
    return out;
}

namespace {

unsigned worker_count(unsigned requested, int tasks) {
    unsigned n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
    return std::max(1u, std::min<unsigned>(n, static_cast<unsigned>(std::max(tasks, 1))));
}

// Runs body(i) for i in [0, n) on a pool; rethrows the first exception.
template <class Body>
void parallel_for(int n, unsigned workers, Body&& body) {
    const unsigned w = worker_count(workers, n);
    if (w == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (unsigned t = 0; t < w; ++t) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n && !failed; i = next.fetch_add(1)) {
                try {
                    body(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<TrialOutcome> run_trials(const TrialModel& model, int n_trials,
                                     std::uint64_t base_seed, double epsilon,
                                     const RunOptions& options) {
    if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
    std::vector<TrialOutcome> out(n_trials);
    parallel_for(n_trials, options.workers, [&](int i) {
        out[i] = run_trial(model, epsilon, derive_seed(base_seed, static_cast<std::uint64_t>(i)),
                           options.keep_states);
    });
    return out;
}

std::pair<double, double> wilson_interval(int successes, int n, double z) {
    if (n < 1) throw std::invalid_argument("wilson_interval: n must be >= 1");
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, std::min(p, centre - half)), std::min(1.0, std::max(p, centre + half))};
}

ExitEstimate summarize(const std::vector<TrialOutcome>& outcomes, int horizon, double epsilon,
                       bool failures_as_exits) {
    ExitEstimate e;
    e.n_trials = static_cast<int>(outcomes.size());
    for (const auto& o : outcomes) {
        const auto exit = first_exit(o.trajectory.h, epsilon, horizon);
        if (exit) {
            ++e.n_exits;
        } else if (o.trajectory.controller_failed) {
            ++e.n_controller_failures;
            if (failures_as_exits) ++e.n_exits;
        }
    }
    e.p_hat = static_cast<double>(e.n_exits) / e.n_trials;
    std::tie(e.ci_lo, e.ci_hi) = wilson_interval(e.n_exits, e.n_trials);
    return e;
}

ExitEstimate estimate_exit_probability(const TrialModel& model, int n_trials,
                                       std::uint64_t base_seed, double epsilon,
                                       const RunOptions& options, bool failures_as_exits) {
    const auto outcomes = run_trials(model, n_trials, base_seed, epsilon, options);
    return summarize(outcomes, model.horizon(), epsilon, failures_as_exits);
}

SampleMoments mc_moments(const std::function<double(Rng&)>& draw, int n_samples,
                         std::uint64_t seed) {
    if (n_samples < 2) throw std::invalid_argument("mc_moments: n_samples must be >= 2");
    Rng rng(seed);
    // Welford with fourth central moment for the variance standard error.
    double mean = 0.0, m2 = 0.0;
    std::vector<double> xs(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        xs[i] = draw(rng);
        const double delta = xs[i] - mean;
        mean += delta / (i + 1);
        m2 += delta * (xs[i] - mean);
    }
    const double var = m2 / (n_samples - 1);
    double m4 = 0.0;
    for (double x : xs) m4 += std::pow(x - mean, 4);
    m4 /= n_samples;
    SampleMoments out;
    out.mean = mean;
    out.variance = var;
    out.mean_se = std::sqrt(var / n_samples);
    out.variance_se = std::sqrt(std::max(0.0, m4 - var * var) / n_samples);
    return out;
}

SampleMoments mc_cond_moments(const dynamics::ScalarLinearSystem& system, double x,
                              int n_samples, std::uint64_t seed) {
    return mc_moments([&](Rng& rng) { return system.barrier(system.step(x, rng)); }, n_samples,
                      seed);
}

SampleMoments mc_cond_moments(const dynamics::HlipSystem& system, const dynamics::HlipState& x,
                              const Eigen::Vector2d& u, bool use_hbar, int n_samples,
                              std::uint64_t seed) {
    return mc_moments(
        [&](Rng& rng) {
            const dynamics::HlipState next = system.step(x, u, rng);
            return use_hbar ? system.barrier(x, next).hbar : system.h(next);
        },
        n_samples, seed);
}

std::uint64_t grid_seed(std::uint64_t base_seed, const std::string& key) {
    return derive_seed(base_seed, hash_key(key));
}

std::vector<SweepRow> sweep(const std::vector<GridPoint>& grid, int n_trials,
                            std::uint64_t base_seed, const RunOptions& options) {
    if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (const auto& point : grid) {
        SweepRow row;
        row.key = point.key;
        row.bound = point.bound;
        try {
            if (!point.model) throw std::invalid_argument("grid point has no model");
            row.estimate = estimate_exit_probability(*point.model, n_trials,
                                                     grid_seed(base_seed, point.key),
                                                     point.epsilon, options);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace safeprob::montecarlo
