#include "safeprob/properties.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "safeprob/bounds.hpp"
#include "safeprob/martingale.hpp"

namespace safeprob::properties {

namespace b = safeprob::bounds;

void PropertyResult::record(double margin) {
    ++samples;
    worst_margin = std::min(worst_margin, margin);
    if (!(margin >= 0.0)) {
        ++violations;
        passed = false;
    }
}

void PropertyResult::fail() {
    ++samples;
    ++violations;
    passed = false;
}

namespace {

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

PropertyResult named(std::string name) {
    PropertyResult r;
    r.name = std::move(name);
    return r;
}

b::SafetySpec dtcbf_spec(double alpha, int k, double h0, double delta, double sigma,
                         std::optional<double> ub = std::nullopt) {
    b::SafetySpec s;
    s.mode = b::Dtcbf{alpha};
    s.horizon = k;
    s.h0 = h0;
    s.delta = delta;
    s.sigma = sigma;
    s.upper_bound = ub;
    return s;
}

}  // namespace

PropertyResult kernel_identity() {
    auto r = named("kernel_identity");
    for (double xi : {0.1, 0.5, 1.0, 7.3, 10.0}) {
        const double h = b::freedman_kernel(0.0, xi);
        r.record(h == 1.0 ? 0.0 : -std::abs(h - 1.0));
    }
    const double e_over_4 = std::numbers::e / 4.0;
    const double rel = std::abs(b::freedman_kernel(1.0, 1.0) - e_over_4) / e_over_4;
    r.record(1e-14 - rel);
    return r;
}

PropertyResult kernel_monotonicity(int n) {
    auto r = named("kernel_monotonicity");
    const auto lambdas = experiments::linspace(0.0, 20.0, n);
    const auto xis = experiments::linspace(10.0 / n, 10.0, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double h = b::freedman_kernel(lambdas[i], xis[j]);
            const double slack = 1e-15 * h;
            if (i + 1 < n) r.record(h - b::freedman_kernel(lambdas[i + 1], xis[j]) + slack);
            if (j + 1 < n) r.record(b::freedman_kernel(lambdas[i], xis[j + 1]) - h + slack);
        }
    }
    return r;
}

PropertyResult mgf_lemma(int samples, std::uint64_t seed) {
    auto r = named("mgf_lemma");
    Rng rng(seed);
    for (int i = 0; i < samples; ++i) {
        const double g = uniform(rng, 0.0, 5.0);
        const double x = uniform(rng, -10.0, 1.0);
        const double rhs = 1.0 + g * x + x * x * (std::exp(g) - 1.0 - g);
        r.record(rhs + 1e-12 - std::exp(g * x));
    }
    return r;
}

PropertyResult optimal_gamma(int samples, std::uint64_t seed) {
    auto r = named("optimal_gamma");
    Rng rng(seed);
    auto objective = [](double g, double lambda, double xi) {
        return std::exp((std::expm1(g) - g) * xi * xi - g * lambda);
    };
    for (int i = 0; i < samples; ++i) {
        const double lambda = uniform(rng, 0.0, 10.0);
        const double xi = uniform(rng, 0.1, 10.0);
        const double s = xi * xi;
        const double g_star = std::log1p(lambda / s);
        const double at_star = objective(g_star, lambda, xi);
        const double h = b::freedman_kernel(lambda, xi);
        r.record(1e-12 - std::abs(at_star - h) / h);
        for (int j = 0; j < 20; ++j) {
            const double g = std::max(0.0, g_star + uniform(rng, -1.0, 1.0) * (0.05 + g_star));
            r.record(objective(g, lambda, xi) * (1.0 + 1e-12) - at_star);
        }
    }
    return r;
}

PropertyResult dominance_grid(const experiments::BoundGridParams& g) {
    auto r = named("dominance_grid");
    for (double lam : g.lambdas) {
        for (double sigma : g.sigmas) {
            const auto c = b::comparison_conditions(lam, g.delta, sigma, g.horizon, g.upper_bound);
            if (!c.both()) continue;
            const double h =
                b::freedman_kernel(lam / g.delta, sigma * std::sqrt(g.horizon) / g.delta);
            r.record(1.0 - lam / g.upper_bound + 1e-12 - h);
        }
    }
    // An empty qualifying set would make the check vacuous.
    if (r.samples == 0) r.fail();
    return r;
}

PropertyResult dominance_random(int samples, std::uint64_t seed) {
    auto r = named("dominance_random");
    Rng rng(seed);
    while (r.samples < samples) {
        const double ub = uniform(rng, 1.0, 50.0);
        const double delta = uniform(rng, 0.05, 5.0);
        const int k = 1 + static_cast<int>(uniform01(rng) * 1000.0);
        const double sigma = uniform(rng, 0.01, 3.0);
        const double lo = sigma * sigma * k / delta;
        const double hi = ub - delta / b::kComparisonPhi;
        if (!(lo <= hi)) continue;
        const double lam = uniform(rng, lo, hi);
        if (!b::comparison_conditions(lam, delta, sigma, k, ub).both()) continue;
        r.record(b::dominance_gap(lam, ub, sigma, k, delta) + 1e-12);
    }
    return r;
}

PropertyResult gap_derivative(int n_lambda, int n_sigma) {
    auto r = named("gap_derivative");
    const double ub = 10.0, delta = 1.0;
    const int k = 100;
    for (double lam : experiments::linspace(0.25, 8.0, n_lambda)) {
        for (double sigma : experiments::linspace(0.1, 1.0, n_sigma)) {
            const double s2 = sigma * sigma;
            const double step = 1e-6 * s2;
            const double up = b::dominance_gap(lam, ub, std::sqrt(s2 + step), k, delta);
            const double dn = b::dominance_gap(lam, ub, std::sqrt(s2 - step), k, delta);
            const double fd = (up - dn) / (2.0 * step);
            const double an = b::dominance_gap_dsigma2(lam, ub, sigma, k, delta);
            const double rel = std::abs(fd - an) / std::max(std::abs(an), 1e-300);
            r.record(std::min(1e-5 - rel, -an));
        }
    }
    return r;
}

PropertyResult gap_b_factor(int samples, std::uint64_t seed) {
    auto r = named("gap_b_factor");
    Rng rng(seed);
    for (int i = 0; i < samples; ++i) {
        const double lam = uniform(rng, 0.0, 20.0);
        const double sigma = uniform(rng, 0.01, 3.0);
        const int k = 1 + static_cast<int>(uniform01(rng) * 500.0);
        const double delta = uniform(rng, 0.05, 5.0);
        const auto f = b::dominance_gap_factors(lam, sigma, k, delta);
        r.record(f.b);
        r.record(-f.a);
    }
    return r;
}

PropertyResult santoyo_coincidence(int samples, std::uint64_t seed) {
    auto r = named("santoyo_ville_coincidence");
    Rng rng(seed);
    for (int i = 0; i < samples; ++i) {
        const double alpha = uniform(rng, 0.01, 1.0);
        const double c = uniform(rng, 0.0, 0.2);
        const int k = 1 + static_cast<int>(uniform01(rng) * 200.0);
        const double ub = uniform(rng, 1.0, 20.0);
        const double h0 = uniform(rng, 0.0, ub);
        const double s1 = b::santoyo_bound(alpha, 0.0, k, h0, ub).raw;
        const double v1 = b::ville_bound(dtcbf_spec(alpha, k, h0, 1.0, 1.0, ub)).raw;
        r.record(1e-14 * std::max(1.0, std::abs(v1)) - std::abs(s1 - v1));
        b::SafetySpec cm = dtcbf_spec(1.0, k, h0, 1.0, 1.0, ub);
        cm.mode = b::CMart{c};
        const double s2 = b::santoyo_bound(1.0, c, k, h0, ub).raw;
        const double v2 = b::ville_bound(cm).raw;
        r.record(1e-14 * std::max(1.0, std::abs(v2)) - std::abs(s2 - v2));
    }
    return r;
}

PropertyResult vacuity_flags(int samples, std::uint64_t seed) {
    auto r = named("vacuity_flags");
    Rng rng(seed);
    auto check = [&](const b::BoundResult& res) {
        const bool ok = res.clamped >= 0.0 && res.clamped <= 1.0 &&
                        res.clamped == std::clamp(res.raw, 0.0, 1.0) &&
                        res.vacuous == (res.raw >= 1.0);
        r.record(ok ? 0.0 : -1.0);
    };
    for (int i = 0; i < samples; ++i) {
        b::SafetySpec s = dtcbf_spec(uniform(rng, 0.5, 1.0), 1 + static_cast<int>(uniform01(rng) * 300),
                                     uniform(rng, -2.0, 12.0), uniform(rng, 0.1, 2.0),
                                     uniform(rng, 0.05, 2.0), uniform(rng, 1.0, 12.0));
        if (uniform01(rng) < 0.5) s.mode = b::CMart{uniform(rng, 0.0, 0.2)};
        check(b::freedman_bound(s));
        check(b::ville_bound(s));
    }
    return r;
}

PropertyResult lambert_w_branch_point() {
    auto r = named("lambert_w_branch_point");
    r.record(1e-9 - std::abs(b::lambert_w_minus1(-std::exp(-1.0)) + 1.0));
    return r;
}

PropertyResult lambert_w_roundtrip(int points) {
    auto r = named("lambert_w_roundtrip");
    const double lo = -std::exp(-1.0);
    for (int i = 0; i < points; ++i) {
        // Half linear across the domain, half log-spaced towards 0.
        const double x = i % 2 == 0 ? lo * (1.0 - static_cast<double>(i) / points)
                                    : -std::pow(10.0, -1.0 - 11.0 * i / points);
        const double w = b::lambert_w_minus1(x);
        r.record(std::min(1e-10 - std::abs(w * std::exp(w) - x), -1.0 - w + 1e-15));
    }
    return r;
}

PropertyResult psi_above_threshold(double phi, int samples, std::uint64_t seed) {
    auto r = named("psi_above_threshold");
    Rng rng(seed);
    const double thr = b::psi_threshold(phi);
    r.record(1e-9 - std::abs(b::psi(phi, thr)));
    for (int i = 0; i < samples; ++i) r.record(b::psi(phi, thr + 20.0 * uniform01(rng)));
    return r;
}

std::vector<PropertyResult> scalar_martingale(const ScalarMartingaleParams& p,
                                              std::uint64_t seed,
                                              const montecarlo::RunOptions& options) {
    const montecarlo::ScalarModel model(
        {p.alpha, experiments::named_scalar_disturbance(p.distribution)}, p.h0, p.horizon);
    const double true_var = model.system().disturbance.exact_moments().covariance(0, 0);
    const auto outcomes = montecarlo::run_trials(model, p.trials, seed, 0.0, options);

    auto recon = named("doob_reconstruction");
    auto pred = named("predictable_increment");
    auto diff = named("martingale_difference");
    auto pqv_sigma = named("pqv_bound");
    auto pqv_true = named("pqv_bound_true_variance");
    auto terminal = named("terminal_mean");
    auto superm = named("supermartingale");
    auto contain = named("containment");

    const double lambda = std::pow(p.alpha, p.horizon) * p.h0 / p.delta;
    const double cap_sigma = p.sigma * p.sigma * p.horizon / (p.delta * p.delta);
    const double cap_true = true_var * p.horizon / (p.delta * p.delta);
    double sum = 0.0, sum2 = 0.0;
    for (const auto& o : outcomes) {
        const auto& t = o.trajectory;
        std::vector<double> eta(t.h.size()), mean(t.h_cond_mean.size()), var(t.h_cond_var.size());
        for (std::size_t k = 0; k < eta.size(); ++k) eta[k] = t.h[k] / p.delta;
        for (std::size_t k = 0; k < mean.size(); ++k) {
            mean[k] = t.h_cond_mean[k] / p.delta;
            var[k] = t.h_cond_var[k] / (p.delta * p.delta);
        }
        const auto trace = martingale::build_candidate(eta, mean, var, p.alpha, 0.0, 1.0);
        const auto parts = martingale::doob_decompose(trace);
        double rec_err = 0.0, max_da = -1e300, max_dm = -1e300;
        for (std::size_t k = 0; k < eta.size(); ++k) {
            rec_err = std::max(rec_err, std::abs(parts.martingale[k] + parts.predictable[k] -
                                                 trace.values[k]));
            if (k > 0) {
                max_da = std::max(max_da, parts.predictable[k] - parts.predictable[k - 1]);
                max_dm = std::max(max_dm, parts.martingale[k] - parts.martingale[k - 1]);
            }
        }
        recon.record(1e-12 - rec_err);
        pred.record(1e-12 - max_da);
        diff.record(1.0 + 1e-12 - max_dm);
        const double q = martingale::pqv(parts, trace).terminal();
        pqv_sigma.record(cap_sigma + 1e-12 - q);
        pqv_true.record(cap_true + 1e-12 - q);
        const auto ok = martingale::check_supermartingale(trace);
        superm.record(std::all_of(ok.begin(), ok.end(), [](bool v) { return v; }) ? 0.0 : -1.0);
        const auto rec = martingale::containment_witness(eta, parts, lambda);
        contain.record(rec.holds() ? 0.0 : -1.0);
        const double mk = parts.martingale.back();
        sum += mk;
        sum2 += mk * mk;
    }
    const double n = static_cast<double>(outcomes.size());
    const double m = sum / n;
    const double sd = std::sqrt(std::max(0.0, (sum2 - n * m * m) / (n - 1.0)));
    terminal.record(5.0 * sd / std::sqrt(n) - std::abs(m));
    terminal.samples = static_cast<std::int64_t>(n);
    return {recon, pred, diff, pqv_sigma, pqv_true, terminal, superm, contain};
}

PropertyResult ville_empirical(const VilleParams& p, std::uint64_t seed) {
    auto r = named("ville_empirical");
    const montecarlo::ScalarModel model(
        {p.alpha, dynamics::Disturbance(dynamics::UniformInterval{-p.half_width, p.half_width})},
        p.h0, p.horizon);
    const auto outcomes = montecarlo::run_trials(model, p.trials, seed, 0.0);
    const double lambda = p.upper_bound * std::pow(p.alpha, -p.horizon);
    int exceed = 0;
    bool nonnegative = true;
    for (const auto& o : outcomes) {
        const auto& t = o.trajectory;
        const auto w = martingale::build_ville_dtcbf(t.h, t.h_cond_mean, p.alpha, p.upper_bound);
        if (std::any_of(w.values.begin(), w.values.end(), [](double v) { return v < -1e-12; }))
            nonnegative = false;
        if (*std::max_element(w.values.begin(), w.values.end()) > lambda) ++exceed;
    }
    const double p_hat = static_cast<double>(exceed) / p.trials;
    const auto [lo, hi] = montecarlo::wilson_interval(exceed, p.trials);
    const double w0 = lambda - p.h0;
    r.record(w0 / lambda + 3.0 * 0.5 * (hi - lo) - p_hat);
    if (!nonnegative) r.fail();
    r.samples = p.trials;
    return r;
}

PropertyResult issf_floor(int trials, std::uint64_t seed) {
    auto r = named("issf_floor");
    const double alpha = 0.99, delta = 1.0, h0 = 1.0;
    const int horizon = 400;
    std::vector<double> floor(horizon + 1);
    for (int k = 0; k <= horizon; ++k) floor[k] = b::issf_worst_case(alpha, delta, h0, k);
    std::vector<dynamics::Disturbance> laws{
        experiments::named_scalar_disturbance("uniform"),
        experiments::named_scalar_disturbance("truncated_gaussian"),
        experiments::named_scalar_disturbance("categorical"),
        dynamics::Disturbance(dynamics::Categorical{{{-1.0, 1.0}}})};
    for (std::size_t l = 0; l < laws.size(); ++l) {
        const montecarlo::ScalarModel model({alpha, laws[l]}, h0, horizon);
        const auto outcomes = montecarlo::run_trials(model, trials, derive_seed(seed, l), 0.0);
        for (const auto& o : outcomes) {
            double worst = 1e300;
            for (int k = 0; k <= horizon; ++k)
                worst = std::min(worst, o.trajectory.h[k] - floor[k] + 1e-12);
            r.record(worst);
        }
    }
    return r;
}

std::vector<PropertyResult> disturbance_moments(int samples, std::uint64_t seed) {
    using namespace dynamics;
    const std::vector<std::pair<std::string, Disturbance>> laws{
        {"moments_uniform", Disturbance(UniformInterval{-1.0, 1.0})},
        {"moments_truncated_gaussian", Disturbance(TruncatedGaussian{0.0, 1.0, -1.0, 1.0})},
        {"moments_categorical", skewed_categorical()},
        {"moments_disk", Disturbance(UniformDisk2{0.3})},
        {"moments_product_of_disks", Disturbance(ProductOfDisks{{0.3, 0.1}})},
        {"moments_ball4", Disturbance(UniformBall{4, 0.3})},
    };
    std::vector<PropertyResult> out;
    for (std::size_t l = 0; l < laws.size(); ++l) {
        auto r = named(laws[l].first);
        const auto& dist = laws[l].second;
        const auto exact = dist.exact_moments();
        const int n = dist.dimension();
        Rng rng(derive_seed(seed, l));
        std::vector<Eigen::VectorXd> xs(samples);
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
        for (auto& x : xs) {
            x = dist.sample(rng);
            mean += x;
        }
        mean /= samples;
        for (int i = 0; i < n; ++i) {
            const double se = std::sqrt(exact.covariance(i, i) / samples);
            r.record(5.0 * se - std::abs(mean[i] - exact.mean[i]));
        }
        for (int i = 0; i < n; ++i) {
            for (int j = i; j < n; ++j) {
                double s = 0.0, s2 = 0.0;
                for (const auto& x : xs) {
                    const double v = (x[i] - exact.mean[i]) * (x[j] - exact.mean[j]);
                    s += v;
                    s2 += v * v;
                }
                const double c = s / samples;
                const double se = std::sqrt(std::max(0.0, s2 / samples - c * c) / samples);
                r.record(5.0 * se + 1e-15 - std::abs(c - exact.covariance(i, j)));
            }
        }
        out.push_back(r);
    }
    return out;
}

std::vector<PropertyResult> hlip_filter(int samples, std::uint64_t seed) {
    using namespace dynamics;
    const Gait gait;
    const HlipSystem sys(hlip_matrices(gait), gait, Obstacle{{2.5, 0.15}, 0.5}, 0.06,
                         Disturbance(ProductOfDisks{{0.06, 0.06}}));
    Rng rng(seed);
    auto random_state = [&] {
        HlipState x;
        x << uniform(rng, -1.0, 5.0), uniform(rng, -2.0, 2.0), uniform(rng, -0.3, 0.3),
            uniform(rng, -0.3, 0.3), uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0);
        return x;
    };
    auto conservative = named("hbar_conservative");
    auto idempotent = named("filter_idempotent");
    auto condition = named("filter_condition");
    auto mc = named("cond_moments_mc");
    for (int i = 0; i < samples; ++i) {
        const HlipState x = random_state();
        const HlipState next = random_state();
        const auto ev = sys.barrier(x, next);
        conservative.record(sys.h(next) - ev.hbar + 1e-12);

        const Eigen::Vector2d u_nom(uniform(rng, -0.6, 0.6), uniform(rng, -0.6, 0.6));
        const double alpha = uniform01(rng) < 0.5 ? 0.9 : 0.99;
        const auto f1 = sys.safety_filter(x, u_nom, alpha);
        const auto f2 = sys.safety_filter(x, f1.u, alpha);
        idempotent.record(f2.u == f1.u ? 0.0 : -(f2.u - f1.u).norm());
        condition.record(sys.cond_moments_hbar(x, f1.u).mean - alpha * ev.h + 1e-9);
    }
    // Analytic one-step moments against sampling, for hbar and the true h.
    for (int i = 0; i < 10; ++i) {
        const HlipState x = random_state();
        const Eigen::Vector2d u(uniform(rng, -0.6, 0.6), uniform(rng, -0.6, 0.6));
        const auto an_bar = sys.cond_moments_hbar(x, u);
        const auto an_h = sys.cond_moments_h(x, u);
        const auto s_bar = montecarlo::mc_cond_moments(sys, x, u, true, 100000, derive_seed(seed, 2 * i));
        const auto s_h = montecarlo::mc_cond_moments(sys, x, u, false, 100000, derive_seed(seed, 2 * i + 1));
        mc.record(5.0 * s_bar.mean_se - std::abs(s_bar.mean - an_bar.mean));
        mc.record(5.0 * s_bar.variance_se - std::abs(s_bar.variance - an_bar.variance));
        mc.record(5.0 * s_h.mean_se - std::abs(s_h.mean - an_h.mean));
        mc.record(5.0 * s_h.variance_se - std::abs(s_h.variance - an_h.variance));
    }
    return {conservative, idempotent, condition, mc};
}

PropertyResult wilson_coverage(int reps, int n, std::uint64_t seed) {
    auto r = named("wilson_coverage");
    Rng rng(seed);
    for (double p : {0.1, 0.5}) {
        int covered = 0;
        for (int rep = 0; rep < reps; ++rep) {
            int hits = 0;
            for (int i = 0; i < n; ++i) hits += uniform01(rng) < p ? 1 : 0;
            const auto [lo, hi] = montecarlo::wilson_interval(hits, n);
            if (lo <= p && p <= hi) ++covered;
        }
        r.record(static_cast<double>(covered) / reps - 0.93);
    }
    return r;
}

std::vector<PropertyResult> run_all(std::uint64_t seed, const montecarlo::RunOptions& options) {
    auto s = [seed](const char* key) { return derive_seed(seed, hash_key(key)); };
    std::vector<PropertyResult> out{
        kernel_identity(),
        kernel_monotonicity(),
        mgf_lemma(10000, s("mgf_lemma")),
        optimal_gamma(1000, s("optimal_gamma")),
        dominance_grid(experiments::BoundGridParams{}),
        dominance_random(10000, s("dominance_random")),
        gap_derivative(),
        gap_b_factor(1000, s("gap_b_factor")),
        santoyo_coincidence(1000, s("santoyo")),
        vacuity_flags(1000, s("vacuity")),
        lambert_w_branch_point(),
        lambert_w_roundtrip(100),
        psi_above_threshold(-0.5, 100, s("psi")),
    };
    // The PQV row uses each law's own variance as sigma^2, which is the
    // hypothesis under which the PQV bound is claimed.
    for (const char* law : {"uniform", "truncated_gaussian", "categorical"}) {
        ScalarMartingaleParams p;
        p.distribution = law;
        p.trials = 2000;
        p.sigma = std::sqrt(
            experiments::named_scalar_disturbance(law).exact_moments().covariance(0, 0));
        for (auto& row : scalar_martingale(p, s(law), options)) {
            row.name = std::string(law) + "/" + row.name;
            out.push_back(std::move(row));
        }
    }
    out.push_back(ville_empirical(VilleParams{}, s("ville")));
    out.push_back(issf_floor(200, s("issf_floor")));
    for (auto& row : disturbance_moments(1000000, s("moments"))) out.push_back(std::move(row));
    for (auto& row : hlip_filter(1000, s("hlip_filter"))) out.push_back(std::move(row));
    out.push_back(wilson_coverage(1000, 500, s("wilson")));
    return out;
}

experiments::ResultTable to_table(const std::vector<PropertyResult>& rows) {
    experiments::ResultTable t(experiments::property_suite_columns());
    for (const auto& r : rows)
        t.add_row({r.name, static_cast<std::int64_t>(r.passed ? 1 : 0), r.samples, r.violations,
                   r.samples == 0 ? 0.0 : r.worst_margin});
    return t;
}

}  // namespace safeprob::properties
