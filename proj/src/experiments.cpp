#include "safeprob/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "safeprob/bounds.hpp"
#include "safeprob/martingale.hpp"

namespace safeprob::experiments {

namespace {

using montecarlo::Trajectory;

Cell flag(bool b) { return static_cast<std::int64_t>(b ? 1 : 0); }
Cell integer(long long v) { return static_cast<std::int64_t>(v); }

// Martingale audit of one trajectory prefix against the candidate built on
// (h + shift) / delta, with threshold lambda on the normalised scale.
void audit_trajectory(const Trajectory& t, int horizon, double shift, double alpha,
                      double delta, double lambda, AuditStats& stats) {
    const int n = std::min(horizon, t.steps());
    if (n < 1 || static_cast<int>(t.h_cond_mean.size()) < n) return;
    std::vector<double> eta(n + 1), mean(n), var(n);
    for (int k = 0; k <= n; ++k) eta[k] = (t.h[k] + shift) / delta;
    for (int k = 0; k < n; ++k) {
        mean[k] = (t.h_cond_mean[k] + shift) / delta;
        var[k] = t.h_cond_var[k] / (delta * delta);
    }
    // A trajectory cut short by a controller failure is audited on its own
    // horizon, where the candidate is still well defined.
    const auto trace = martingale::build_candidate(eta, mean, var, alpha, 0.0, 1.0);
    const auto parts = martingale::doob_decompose(trace);
    const double lam = n == horizon ? lambda : std::pow(alpha, n) * eta[0];
    const auto rec = martingale::containment_witness(eta, parts, lam);
    ++stats.trajectories;
    if (rec.exited) ++stats.exits;
    if (!rec.holds()) ++stats.containment_violations;
    for (int k = 1; k <= n; ++k) {
        stats.max_predictable_increment = std::max(
            stats.max_predictable_increment, parts.predictable[k] - parts.predictable[k - 1]);
        stats.max_martingale_step =
            std::max(stats.max_martingale_step, parts.martingale[k] - parts.martingale[k - 1]);
    }
}

std::string key_number(double v) { return format_double(v); }

}  // namespace

std::vector<double> linspace(double start, double stop, int n) {
    if (n < 1) throw std::invalid_argument("linspace: n must be >= 1");
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = start;
        return out;
    }
    const double step = (stop - start) / (n - 1);
    for (int i = 0; i < n; ++i) out[i] = start + step * i;
    out[n - 1] = stop;
    return out;
}

std::vector<Column> bound_grid_columns() {
    using T = ColumnType;
    return {{"lambda", T::Float}, {"sigma", T::Float},        {"ville", T::Float},
            {"freedman", T::Float}, {"cond1", T::Int},        {"cond2", T::Int},
            {"gap", T::Float},      {"ville_vacuous", T::Int}, {"freedman_vacuous", T::Int}};
}

std::vector<Column> issf_compare_columns() {
    using T = ColumnType;
    return {{"K", T::Int},           {"epsilon", T::Float},      {"distribution", T::String},
            {"issf_raw", T::Float},  {"issf_bound", T::Float},   {"issf_vacuous", T::Int},
            {"issf_indicator", T::Int}, {"as_floor", T::Float},  {"n_trials", T::Int},
            {"n_exits", T::Int},     {"p_hat", T::Float},        {"ci_lo", T::Float},
            {"ci_hi", T::Float},     {"containment_violations", T::Int}};
}

std::vector<Column> hlip_case_columns() {
    using T = ColumnType;
    return {{"d_max", T::Float},
            {"alpha", T::Float},
            {"K", T::Int},
            {"h0", T::Float},
            {"delta", T::Float},
            {"sigma2", T::Float},
            {"lambda", T::Float},
            {"bound_raw", T::Float},
            {"bound", T::Float},
            {"bound_vacuous", T::Int},
            {"n_trials", T::Int},
            {"n_exits", T::Int},
            {"n_controller_failures", T::Int},
            {"p_hat", T::Float},
            {"ci_lo", T::Float},
            {"ci_hi", T::Float},
            {"worst_case_first_violation", T::Int},
            {"max_constraint_violation", T::Float},
            {"containment_violations", T::Int}};
}

std::vector<Column> hlip_trajectory_columns() {
    using T = ColumnType;
    return {{"d_max", T::Float}, {"alpha", T::Float}, {"trial", T::Int}, {"k", T::Int},
            {"p_x", T::Float},   {"p_y", T::Float},   {"h", T::Float},   {"exited", T::Int}};
}

std::vector<Column> property_suite_columns() {
    using T = ColumnType;
    return {{"name", T::String},
            {"passed", T::Int},
            {"samples", T::Int},
            {"violations", T::Int},
            {"worst_margin", T::Float}};
}

void AuditStats::merge(const AuditStats& o) {
    trajectories += o.trajectories;
    exits += o.exits;
    containment_violations += o.containment_violations;
    max_predictable_increment = std::max(max_predictable_increment, o.max_predictable_increment);
    max_martingale_step = std::max(max_martingale_step, o.max_martingale_step);
}

ResultTable bound_grid(const BoundGridParams& p) {
    if (p.lambdas.empty() || p.sigmas.empty()) throw std::invalid_argument("bound_grid: empty grid");
    ResultTable t(bound_grid_columns());
    for (double lam : p.lambdas) {
        for (double sigma : p.sigmas) {
            bounds::SafetySpec spec;
            spec.mode = bounds::Dtcbf{1.0};
            spec.horizon = p.horizon;
            spec.h0 = lam;
            spec.delta = p.delta;
            spec.sigma = sigma;
            spec.upper_bound = p.upper_bound;
            const auto ville = bounds::ville_bound(spec);
            const auto freedman = bounds::freedman_bound(spec);
            const auto cond =
                bounds::comparison_conditions(lam, p.delta, sigma, p.horizon, p.upper_bound);
            const double gap =
                bounds::dominance_gap(lam, p.upper_bound, sigma, p.horizon, p.delta);
            t.add_row({lam, sigma, ville.raw, freedman.raw, flag(cond.variance_limited),
                       flag(cond.below_upper), gap, flag(ville.vacuous), flag(freedman.vacuous)});
        }
    }
    return t;
}

dynamics::Disturbance named_scalar_disturbance(const std::string& name) {
    using namespace dynamics;
    if (name == "uniform") return Disturbance(UniformInterval{-1.0, 1.0});
    if (name == "truncated_gaussian") return Disturbance(TruncatedGaussian{0.0, 1.0, -1.0, 1.0});
    if (name == "categorical") return skewed_categorical();
    throw std::invalid_argument("unknown distribution '" + name +
                                "' (expected uniform, truncated_gaussian or categorical)");
}

IssfOutput issf_compare(const IssfParams& p, std::uint64_t seed,
                        const montecarlo::RunOptions& options) {
    if (p.horizons.empty() || p.epsilons.empty() || p.distributions.empty())
        throw std::invalid_argument("issf_compare: empty grid");
    if (p.trials < 1) throw std::invalid_argument("issf_compare: trials must be >= 1");
    for (double e : p.epsilons)
        if (!(e >= 0.0)) throw std::invalid_argument("issf_compare: epsilon must be >= 0");
    const int k_max = *std::max_element(p.horizons.begin(), p.horizons.end());
    if (*std::min_element(p.horizons.begin(), p.horizons.end()) < 1)
        throw std::invalid_argument("issf_compare: K must be >= 1");

    IssfOutput out;
    for (const auto& name : p.distributions) {
        const montecarlo::ScalarModel model({p.alpha, named_scalar_disturbance(name)}, p.h0, k_max);
        const auto outcomes = montecarlo::run_trials(
            model, p.trials, montecarlo::grid_seed(seed, "issf/" + name), 0.0, options);
        for (int k : p.horizons) {
            const double floor = bounds::issf_worst_case(p.alpha, p.delta, p.h0, k);
            for (double eps : p.epsilons) {
                const auto bound =
                    bounds::stochastic_issf_bound(p.alpha, k, p.h0, p.delta, p.sigma, eps);
                const auto est = montecarlo::summarize(outcomes, k, eps);
                const double lambda = std::pow(p.alpha, k) * (p.h0 + eps) / p.delta;
                AuditStats cell;
                for (const auto& o : outcomes)
                    audit_trajectory(o.trajectory, k, eps, p.alpha, p.delta, lambda, cell);
                out.audit.merge(cell);
                out.table.add_row({integer(k), eps, name, bound.raw, bound.clamped,
                                   flag(bound.vacuous), flag(-eps >= floor), floor,
                                   integer(est.n_trials), integer(est.n_exits), est.p_hat,
                                   est.ci_lo, est.ci_hi, integer(cell.containment_violations)});
            }
        }
    }
    return out;
}

int HlipParams::horizon() const {
    const double k = duration * gait.step_rate();
    if (!(k >= 0.5)) throw std::invalid_argument("hlip: duration shorter than one step");
    return static_cast<int>(std::lround(k));
}

bounds::DeltaSigma hlip_cell_delta_sigma(const std::string& family, double d_max) {
    if (family == "disks") return bounds::hlip_delta_sigma(d_max);
    // h is 1-Lipschitz in the position disturbance and |(d1, d2)| <= |d|.
    if (family == "ball") return bounds::constructive_delta_sigma(1.0, d_max);
    throw std::invalid_argument("unknown HLIP disturbance '" + family + "' (expected disks or ball)");
}

bounds::BoundResult hlip_cell_bound(double alpha, int horizon, double h0, double delta,
                                    double sigma2) {
    if (delta == 0.0) {
        // No disturbance: the process is deterministic and stays above
        // alpha^K h0 > 0, so the bound collapses to 0.
        return bounds::BoundResult::from_raw(std::pow(alpha, horizon) * h0 > 0.0 ? 0.0 : 1.0);
    }
    bounds::SafetySpec spec;
    spec.mode = bounds::Dtcbf{alpha};
    spec.horizon = horizon;
    spec.h0 = h0;
    spec.delta = delta;
    spec.sigma = std::sqrt(sigma2);
    return bounds::freedman_bound(spec);
}

int worst_case_first_violation(double alpha, double delta, double h0, int horizon) {
    for (int k = 0; k <= horizon; ++k)
        if (bounds::issf_worst_case(alpha, delta, h0, k) < 0.0) return k;
    return -1;
}

HlipOutput hlip_case(const HlipParams& p, std::uint64_t seed,
                     const montecarlo::RunOptions& options) {
    if (p.d_max.empty() || p.alphas.empty()) throw std::invalid_argument("hlip_case: empty grid");
    if (p.trials < 1) throw std::invalid_argument("hlip_case: trials must be >= 1");
    const int horizon = p.horizon();
    const dynamics::HlipMatrices mats = p.matrices ? *p.matrices : dynamics::hlip_matrices(p.gait);

    HlipOutput out;
    for (double dm : p.d_max) {
        const auto ds = hlip_cell_delta_sigma(p.disturbance, dm);
        dynamics::Disturbance noise =
            p.disturbance == "disks"
                ? dynamics::Disturbance(dynamics::ProductOfDisks{{dm, dm}})
                : dynamics::Disturbance(dynamics::UniformBall{4, dm});
        for (double alpha : p.alphas) {
            dynamics::HlipSystem system(mats, p.gait, p.obstacle, dm, noise);
            const dynamics::HlipState x0 = system.periodic_state(p.start, p.v_des);
            const montecarlo::HlipModel model(system, x0, horizon,
                                              {alpha, p.v_des, p.input_cap});
            const std::string key =
                "hlip/d_max=" + key_number(dm) + "/alpha=" + key_number(alpha);
            auto opts = options;
            opts.keep_states = p.retain_trajectories > 0;
            const auto outcomes = montecarlo::run_trials(
                model, p.trials, montecarlo::grid_seed(seed, key), 0.0, opts);

            const double h0 = model.h0();
            const auto bound = hlip_cell_bound(alpha, horizon, h0, ds.delta, ds.sigma2);
            const auto est = montecarlo::summarize(outcomes, horizon, 0.0);
            const double lambda = std::pow(alpha, horizon) * h0;

            AuditStats cell;
            double worst = 0.0;
            for (const auto& o : outcomes) {
                for (double m : o.trajectory.constraint_margin) worst = std::max(worst, -m);
                out.logged_steps += static_cast<std::int64_t>(o.trajectory.constraint_margin.size());
                if (ds.delta > 0.0)
                    audit_trajectory(o.trajectory, horizon, 0.0, alpha, ds.delta,
                                     lambda / ds.delta, cell);
            }
            out.audit.merge(cell);
            out.max_constraint_violation = std::max(out.max_constraint_violation, worst);

            out.table.add_row(
                {dm, alpha, integer(horizon), h0, ds.delta, ds.sigma2, lambda, bound.raw,
                 bound.clamped, flag(bound.vacuous), integer(est.n_trials), integer(est.n_exits),
                 integer(est.n_controller_failures), est.p_hat, est.ci_lo, est.ci_hi,
                 integer(worst_case_first_violation(alpha, ds.delta, h0, horizon)), worst,
                 integer(cell.containment_violations)});

            const int keep = std::min<int>(p.retain_trajectories, p.trials);
            for (int i = 0; i < keep; ++i) {
                const auto& t = outcomes[i].trajectory;
                const bool exited = outcomes[i].exit_index.has_value();
                for (std::size_t k = 0; k < t.states.size(); ++k)
                    out.trajectories.add_row({dm, alpha, integer(i), integer(static_cast<long long>(k)),
                                              t.states[k][0], t.states[k][1], t.h[k], flag(exited)});
            }
        }
    }
    return out;
}

}  // namespace safeprob::experiments
