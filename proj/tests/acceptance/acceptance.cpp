// Acceptance suite: one PASS/FAIL line per primary criterion, at the stated
// tolerances and runtime limits.
//
// Exit status is 0 when every criterion passes, except that the martingale
// machinery line is expected to fail on its PQV sub-check alone (see
// kKnownFailure). Any other failure, or that line unexpectedly passing,
// gives exit status 1.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "safeprob/bounds.hpp"
#include "safeprob/experiments.hpp"
#include "safeprob/martingale.hpp"
#include "safeprob/montecarlo.hpp"
#include "safeprob/properties.hpp"
#include "safeprob/runner.hpp"

namespace fs = std::filesystem;
namespace b = safeprob::bounds;
namespace ex = safeprob::experiments;
namespace mc = safeprob::montecarlo;
namespace pr = safeprob::properties;

namespace {

constexpr std::uint64_t kSeed = 20240917;

// The only criterion allowed to fail, and the only sub-check allowed to
// sink it: the truncated N(0,1) on [-1, 1] has variance 0.2911 > 1/9, so
// <M>_K exceeds sigma^2 K / delta^2 at sigma = 1/3 on every trajectory.
constexpr const char* kKnownFailure = "martingale_machinery";
constexpr const char* kKnownSubcheck = "pqv_bound";

struct Check {
    std::string what;
    bool ok;
};

struct Outcome {
    std::vector<Check> checks;
    std::vector<std::string> notes;

    void expect(std::string what, bool ok) { checks.push_back({std::move(what), ok}); }
    void note(std::string s) { notes.push_back(std::move(s)); }
    bool ok() const {
        for (const auto& c : checks)
            if (!c.ok) return false;
        return true;
    }
};

struct Criterion {
    std::string name;
    double limit_s;
    std::function<Outcome()> body;
};

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void expect_property(Outcome& o, const pr::PropertyResult& r) {
    o.expect(r.name, r.passed);
    o.note(fmt("%s: %lld samples, %lld violations, worst margin %.3g", r.name.c_str(),
               static_cast<long long>(r.samples), static_cast<long long>(r.violations),
               r.worst_margin));
}

// Exits and containment violations seen by the Monte Carlo criteria, audited
// once all of them have run.
struct Corpus {
    std::int64_t trajectories{0};
    std::int64_t exits{0};
    std::int64_t violations{0};
    int sources{0};

    void add(std::int64_t t, std::int64_t e, std::int64_t v) {
        trajectories += t;
        exits += e;
        violations += v;
        ++sources;
    }
} corpus;

Outcome kernel_identities() {
    Outcome o;
    for (double xi : {0.1, 1.0, 10.0})
        o.expect(fmt("H(0, %g) == 1", xi), b::freedman_kernel(0.0, xi) == 1.0);
    const double e4 = std::numbers::e / 4.0;
    const double rel = std::abs(b::freedman_kernel(1.0, 1.0) - e4) / e4;
    o.expect("H(1,1) = e/4 to 1e-14", rel <= 1e-14);
    o.note(fmt("H(1,1) relative error %.3g", rel));
    return o;
}

Outcome freedman_dominance() {
    Outcome o;
    ex::BoundGridParams grid;  // B = 10, K = 100, delta = 1, 101 x 100
    o.expect("grid is 101 x 100", grid.lambdas.size() == 101 && grid.sigmas.size() == 100);
    expect_property(o, pr::dominance_grid(grid));
    expect_property(o, pr::dominance_random(10000, kSeed));
    return o;
}

Outcome derivative_factorization() {
    Outcome o;
    const auto r = pr::gap_derivative(40, 25);
    o.expect("1000 grid points", r.samples >= 1000);
    expect_property(o, r);
    return o;
}

Outcome mgf_lemma() {
    Outcome o;
    expect_property(o, pr::mgf_lemma(10000, kSeed));
    const auto g = pr::optimal_gamma(1000, kSeed + 1);
    expect_property(o, g);
    return o;
}

Outcome martingale_machinery() {
    Outcome o;
    pr::ScalarMartingaleParams p;  // alpha .99, truncated Gaussian, K 100, sigma 1/3
    p.trials = 10000;
    const auto rows = pr::scalar_martingale(p, mc::grid_seed(kSeed, "acceptance/martingale"));
    for (const auto& r : rows) {
        if (r.name == "pqv_bound_true_variance") {
            o.note(fmt("informational: <M>_K <= Var(d) K / delta^2 with the law's own "
                       "variance %.6f: %s (worst margin %.3g)",
                       ex::named_scalar_disturbance(p.distribution).exact_moments().covariance(0, 0),
                       r.passed ? "holds" : "fails", r.worst_margin));
            continue;
        }
        if (r.name == "supermartingale") continue;  // covered by predictable_increment
        if (r.name == "containment") {
            corpus.add(r.samples, 0, r.violations);
            continue;
        }
        expect_property(o, r);
    }
    // Exits for the containment audit, counted on the same seeds.
    const mc::ScalarModel model({p.alpha, ex::named_scalar_disturbance(p.distribution)}, p.h0,
                                p.horizon);
    const auto est = mc::estimate_exit_probability(
        model, p.trials, mc::grid_seed(kSeed, "acceptance/martingale"));
    corpus.exits += est.n_exits;
    return o;
}

Outcome issf_dominance() {
    Outcome o;
    ex::IssfParams p;  // alpha .99, delta 1, sigma 1/3, h0 10, 20 eps, 3 laws
    p.horizons = {1, 100, 400};
    p.trials = 2000;
    const auto out = ex::issf_compare(p, mc::grid_seed(kSeed, "acceptance/issf"));
    const auto& t = out.table;
    o.expect("3 x 20 x 3 rows", t.size() == 180);
    int dominated = 0, indicator_ok = 0;
    double worst = 1e300;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double lo = t.number(i, "ci_lo"), bound = t.number(i, "issf_bound");
        worst = std::min(worst, bound - lo);
        if (lo <= bound) ++dominated;
        const bool below = -t.number(i, "epsilon") < t.number(i, "as_floor");
        if ((t.number(i, "issf_indicator") == 0.0) == below) ++indicator_ok;
    }
    o.expect("ci_lo <= stochastic ISSf bound on every row", dominated == static_cast<int>(t.size()));
    o.expect("indicator 0 exactly where -eps < floor", indicator_ok == static_cast<int>(t.size()));
    o.note(fmt("smallest bound - ci_lo: %.3g over %zu rows", worst, t.size()));
    corpus.add(out.audit.trajectories, out.audit.exits, out.audit.containment_violations);
    return o;
}

Outcome ville_empirical() {
    Outcome o;
    pr::VilleParams p;  // B = 10
    p.trials = 5000;
    expect_property(o, pr::ville_empirical(p, mc::grid_seed(kSeed, "acceptance/ville")));
    return o;
}

Outcome hlip_desk_scale() {
    Outcome o;
    ex::HlipParams p;  // d_max {0,.03,.06} x alpha {.9,.99}, 10 s at 3 steps/s
    p.trials = 500;
    o.expect("K = 30", p.horizon() == 30);
    const auto out = ex::hlip_case(p, mc::grid_seed(kSeed, "acceptance/hlip"));
    const auto& t = out.table;
    o.expect("6 cells", t.size() == 6);
    bool zero_ok = true, dominated = true;
    long failures = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double d = t.number(i, "d_max");
        if (d == 0.0 && t.number(i, "n_exits") != 0.0) zero_ok = false;
        const auto ds = b::hlip_delta_sigma(d);
        const bool nominal_ds = std::abs(t.number(i, "delta") - ds.delta) <= 1e-15 &&
                                std::abs(t.number(i, "sigma2") - ds.sigma2) <= 1e-15;
        if (!nominal_ds || t.number(i, "ci_lo") > t.number(i, "bound")) dominated = false;
        failures += static_cast<long>(t.number(i, "n_controller_failures"));
        o.note(fmt("d_max %.2f alpha %.2f: %g/%g exits, ci [%.4f, %.4f], bound %.4g", d,
                   t.number(i, "alpha"), t.number(i, "n_exits"), t.number(i, "n_trials"),
                   t.number(i, "ci_lo"), t.number(i, "ci_hi"), t.number(i, "bound")));
    }
    o.expect("(i) d_max = 0 gives zero exits", zero_ok);
    o.expect("(ii) ci_lo <= bound with delta = 5/3 d_max, sigma^2 = d_max^2 / 2", dominated);
    o.expect("(iii) filtered constraint holds to 1e-9", out.max_constraint_violation <= 1e-9);
    o.note(fmt("%lld logged steps, max constraint violation %.3g, %ld controller failures",
               static_cast<long long>(out.logged_steps), out.max_constraint_violation, failures));
    corpus.add(out.audit.trajectories, out.audit.exits, out.audit.containment_violations);
    return o;
}

Outcome containment_audit() {
    Outcome o;
    o.expect("three Monte Carlo sources audited", corpus.sources == 3);
    o.expect("zero containment exceptions", corpus.violations == 0);
    o.note(fmt("%lld trajectories, %lld with an exit, %lld exceptions",
               static_cast<long long>(corpus.trajectories), static_cast<long long>(corpus.exits),
               static_cast<long long>(corpus.violations)));
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    Outcome o;
    auto cfg = safeprob::runner::load_run_config(SAFEPROB_CONFIG_DIR "/default.json");
    cfg.trials = 200;
    const fs::path root = fs::temp_directory_path() / "safeprob_acceptance";
    fs::remove_all(root);
    cfg.workers = 1;
    const auto a = safeprob::runner::run(cfg, root / "a");
    cfg.workers = 4;
    const auto b2 = safeprob::runner::run(cfg, root / "b");
    o.expect("same file list", a.files == b2.files);
    std::size_t same = 0;
    for (const auto& f : a.files)
        if (slurp(root / "a" / f) == slurp(root / "b" / f)) ++same;
    o.expect("every CSV/JSON byte-identical", same == a.files.size() && !a.files.empty());
    o.note(fmt("%zu/%zu files identical (workers 1 vs 4)", same, a.files.size()));
    fs::remove_all(root);
    return o;
}

Outcome lambert_w() {
    Outcome o;
    expect_property(o, pr::lambert_w_branch_point());
    expect_property(o, pr::lambert_w_roundtrip(100));
    expect_property(o, pr::psi_above_threshold(-0.5, 100, kSeed));
    return o;
}

}  // namespace

int main() {
    // Containment runs after every Monte Carlo criterion has fed the corpus.
    const std::vector<Criterion> criteria{
        {"kernel_identities", 1.0, kernel_identities},
        {"freedman_dominance", 5.0, freedman_dominance},
        {"derivative_factorization", 5.0, derivative_factorization},
        {"mgf_lemma", 5.0, mgf_lemma},
        {"martingale_machinery", 30.0, martingale_machinery},
        {"issf_dominance", 180.0, issf_dominance},
        {"ville_empirical", 60.0, ville_empirical},
        {"hlip_desk_scale", 300.0, hlip_desk_scale},
        {"containment_audit", 1.0, containment_audit},
        {"determinism", 120.0, determinism},
        {"lambert_w", 1.0, lambert_w},
    };

    int unexpected = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.body();
        } catch (const std::exception& e) {
            o.expect(std::string("threw: ") + e.what(), false);
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.expect(fmt("runtime < %g s", c.limit_s), secs < c.limit_s);

        std::string failed;
        int n_failed = 0;
        for (const auto& ch : o.checks)
            if (!ch.ok) {
                failed += (failed.empty() ? "" : "; ") + ch.what;
                ++n_failed;
            }
        std::printf("%s %-26s %8.2f s%s%s\n", o.ok() ? "PASS" : "FAIL", c.name.c_str(), secs,
                    failed.empty() ? "" : "  failed: ", failed.c_str());
        for (const auto& n : o.notes) std::printf("     %s\n", n.c_str());

        const bool known = c.name == kKnownFailure;
        if (known) {
            const bool only_pqv = n_failed == 1 && failed == kKnownSubcheck;
            if (only_pqv)
                std::printf("     expected failure: sigma = 1/3 understates the truncated "
                            "Gaussian's variance\n");
            else
                ++unexpected;
        } else if (!o.ok()) {
            ++unexpected;
        }
    }
    std::printf("%s: %d unexpected result(s)\n", unexpected ? "ACCEPTANCE FAILED" : "ACCEPTANCE OK",
                unexpected);
    return unexpected ? 1 : 0;
}
