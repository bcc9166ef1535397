// safeprob - bound evaluation and scenario runner.
//
// Exit codes: 0 ok, 2 invalid flags or config, 3 property-suite failure,
// 4 I/O error, 1 anything unexpected.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "safeprob/bounds.hpp"
#include "safeprob/runner.hpp"

namespace {

using nlohmann::json;
using namespace safeprob;

constexpr int kExitConfig = 2;
constexpr int kExitProperty = 3;
constexpr int kExitIo = 4;

struct CommonRunFlags {
    std::optional<int> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    unsigned workers{0};
};

void add_run_flags(CLI::App* cmd, CommonRunFlags& f, bool with_trials) {
    if (with_trials)
        cmd->add_option("--trials", f.trials, "Monte Carlo trials per cell (overrides config)")
            ->check(CLI::Range(1, 100000000));
    cmd->add_option("--seed", f.seed, "Base seed for the run");
    cmd->add_option("--out", f.out, "Output directory (default: config, then $SAFEPROB_OUT_DIR, then ./results)");
    cmd->add_option("--workers", f.workers, "Worker threads, 0 = one per hardware thread")
        ->check(CLI::Range(0u, 1024u));
}

std::filesystem::path output_dir(const CommonRunFlags& f, const runner::RunConfig& cfg) {
    if (f.out) return *f.out;
    if (cfg.output_dir) return *cfg.output_dir;
    if (const char* env = std::getenv("SAFEPROB_OUT_DIR"); env && *env) return env;
    return "results";
}

int execute(runner::RunConfig cfg, const CommonRunFlags& f) {
    if (f.trials) cfg.trials = f.trials;
    if (f.seed) cfg.seed = *f.seed;
    cfg.workers = f.workers;
    const auto dir = output_dir(f, cfg);
    const auto report = runner::run(cfg, dir, &std::cerr);
    std::cerr << "[safeprob] wrote " << report.files.size() << " files to " << dir.string() << '\n';
    return report.property_failure ? kExitProperty : 0;
}

json single_scenario(const std::string& id, const std::string& kind, const json& params) {
    json scenario = json::object();
    scenario["id"] = id;
    scenario["kind"] = kind;
    scenario["params"] = params;
    json cfg = json::object();
    cfg["scenarios"] = json::array({scenario});
    return cfg;
}

json bound_json(const bounds::BoundResult& r) {
    return {{"raw", r.raw}, {"clamped", r.clamped}, {"vacuous", r.vacuous}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-horizon safety probability bounds and Monte Carlo checks", "safeprob"};
    app.set_version_flag("--version", runner::kToolVersion);
    app.require_subcommand(1);

    // bound
    std::string mode;
    double alpha = 1.0, c = 0.0, h0 = 0.0, delta = 1.0, sigma = 1.0;
    int horizon = 1;
    std::optional<double> upper;
    auto* bound = app.add_subcommand("bound", "Evaluate the Freedman (and optionally Ville) bound");
    bound->add_option("--mode", mode, "dtcbf, cmart or general")
        ->required()
        ->check(CLI::IsMember({"dtcbf", "cmart", "general"}));
    auto* alpha_opt = bound->add_option("--alpha", alpha, "Decay rate in (0, 1] (dtcbf, general)");
    auto* c_opt = bound->add_option("--c", c, "Per-step drop c >= 0 (cmart, general)");
    bound->add_option("--K", horizon, "Horizon in steps")->required();
    bound->add_option("--h0", h0, "Initial barrier value")->required();
    bound->add_option("--delta", delta, "Worst predictable drop")->required();
    bound->add_option("--sigma", sigma, "Conditional standard deviation bound")->required();
    bound->add_option("--B", upper, "Upper bound on h; adds the Ville bound");

    // run
    std::string config_path;
    CommonRunFlags run_flags;
    auto* run = app.add_subcommand("run", "Run every scenario in a JSON config");
    run->add_option("config", config_path, "Config file")->required();
    add_run_flags(run, run_flags, true);

    // compare
    CommonRunFlags cmp_flags;
    experiments::BoundGridParams grid;
    double lambda_max = 10.0, sigma_min = 0.01, sigma_max = 1.0;
    int lambda_num = 101, sigma_num = 100;
    std::string cmp_id = "bound_grid";
    auto* compare = app.add_subcommand("compare", "Ville vs Freedman bound grid");
    compare->add_option("--B", grid.upper_bound, "Upper bound on h")->capture_default_str();
    compare->add_option("--K", grid.horizon, "Horizon")->capture_default_str();
    compare->add_option("--delta", grid.delta, "Worst predictable drop")->capture_default_str();
    compare->add_option("--lambda-max", lambda_max, "Largest lambda")->capture_default_str();
    compare->add_option("--lambda-num", lambda_num, "Lambda grid points")->capture_default_str()->check(CLI::Range(1, 100000));
    compare->add_option("--sigma-min", sigma_min, "Smallest sigma")->capture_default_str();
    compare->add_option("--sigma-max", sigma_max, "Largest sigma")->capture_default_str();
    compare->add_option("--sigma-num", sigma_num, "Sigma grid points")->capture_default_str()->check(CLI::Range(1, 100000));
    compare->add_option("--id", cmp_id, "Scenario id (file stem)")->capture_default_str();
    add_run_flags(compare, cmp_flags, false);

    // issf
    CommonRunFlags issf_flags;
    experiments::IssfParams issf;
    std::vector<int> issf_k;
    std::vector<std::string> issf_dists;
    double eps_max = 100.0;
    int eps_num = 20;
    std::string issf_id = "issf_compare";
    auto* issf_cmd = app.add_subcommand("issf", "Stochastic ISSf bound vs Monte Carlo");
    issf_cmd->add_option("--K", issf_k, "Horizons (repeat or comma-separate)")->delimiter(',');
    issf_cmd->add_option("--alpha", issf.alpha, "Decay rate in (0, 1)")->capture_default_str();
    issf_cmd->add_option("--delta", issf.delta, "Disturbance bound")->capture_default_str();
    issf_cmd->add_option("--sigma", issf.sigma, "Standard deviation bound")->capture_default_str();
    issf_cmd->add_option("--h0", issf.h0, "Initial barrier value")->capture_default_str();
    issf_cmd->add_option("--epsilon-max", eps_max, "Largest epsilon")->capture_default_str();
    issf_cmd->add_option("--epsilon-num", eps_num, "Epsilon grid points")->capture_default_str()->check(CLI::Range(1, 100000));
    issf_cmd->add_option("--distributions", issf_dists, "uniform, truncated_gaussian, categorical")
        ->delimiter(',');
    issf_cmd->add_option("--id", issf_id, "Scenario id (file stem)")->capture_default_str();
    add_run_flags(issf_cmd, issf_flags, true);

    // hlip
    CommonRunFlags hlip_flags;
    experiments::HlipParams hlip;
    std::vector<double> hlip_dmax, hlip_alpha;
    std::string hlip_id = "hlip_case";
    auto* hlip_cmd = app.add_subcommand("hlip", "HLIP obstacle avoidance: bound vs Monte Carlo");
    hlip_cmd->add_option("--dmax", hlip_dmax, "Disturbance radii (repeat or comma-separate)")->delimiter(',');
    hlip_cmd->add_option("--alpha", hlip_alpha, "Filter decay rates (repeat or comma-separate)")->delimiter(',');
    hlip_cmd->add_option("--duration", hlip.duration, "Seconds of walking")->capture_default_str();
    hlip_cmd->add_option("--disturbance", hlip.disturbance, "disks or ball")
        ->capture_default_str()
        ->check(CLI::IsMember({"disks", "ball"}));
    hlip_cmd->add_option("--retain", hlip.retain_trajectories, "Trajectories kept per cell")->capture_default_str();
    hlip_cmd->add_option("--id", hlip_id, "Scenario id (file stem)")->capture_default_str();
    add_run_flags(hlip_cmd, hlip_flags, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "safeprob: error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (*bound) {
            bounds::SafetySpec spec;
            if (mode == "dtcbf") {
                if (c_opt->count()) throw runner::ConfigError("--c is not used with --mode dtcbf");
                spec.mode = bounds::Dtcbf{alpha};
            } else if (mode == "cmart") {
                if (alpha_opt->count()) throw runner::ConfigError("--alpha is not used with --mode cmart");
                spec.mode = bounds::CMart{c};
            } else {
                spec.mode = bounds::General{alpha, c};
            }
            spec.horizon = horizon;
            spec.h0 = h0;
            spec.delta = delta;
            spec.sigma = sigma;
            spec.upper_bound = upper;
            spec.validate();
            const auto freedman = bounds::freedman_bound(spec);
            json out = bound_json(freedman);
            out["lambda"] = bounds::lambda_threshold(spec);
            if (upper) out["ville"] = bound_json(bounds::ville_bound(spec));
            std::cout << out.dump() << '\n';
            return 0;
        }
        if (*run) return execute(runner::load_run_config(config_path), run_flags);

        runner::RunConfig cfg;
        if (*compare) {
            if (!(sigma_min > 0.0)) throw runner::ConfigError("--sigma-min must be > 0");
            if (!(lambda_max >= 0.0)) throw runner::ConfigError("--lambda-max must be >= 0");
            grid.lambdas = experiments::linspace(0.0, lambda_max, lambda_num);
            grid.sigmas = experiments::linspace(sigma_min, sigma_max, sigma_num);
            cfg.scenarios.push_back({cmp_id, grid, std::nullopt});
            return execute(cfg, cmp_flags);
        }
        if (*issf_cmd) {
            if (!issf_k.empty()) issf.horizons = issf_k;
            if (!issf_dists.empty()) issf.distributions = issf_dists;
            issf.epsilons = experiments::linspace(0.0, eps_max, eps_num);
            // Re-validate through the config parser so flags and files share one rule set.
            json params = {{"alpha", issf.alpha}, {"delta", issf.delta}, {"sigma", issf.sigma},
                           {"h0", issf.h0}, {"K", issf.horizons}, {"epsilon", issf.epsilons},
                           {"distributions", issf.distributions}};
            cfg = runner::parse_run_config(single_scenario(issf_id, "issf_compare", params));
            return execute(cfg, issf_flags);
        }
        if (*hlip_cmd) {
            if (!hlip_dmax.empty()) hlip.d_max = hlip_dmax;
            if (!hlip_alpha.empty()) hlip.alphas = hlip_alpha;
            json params = {{"d_max", hlip.d_max}, {"alpha", hlip.alphas}, {"duration", hlip.duration},
                           {"disturbance", hlip.disturbance},
                           {"retain_trajectories", hlip.retain_trajectories}};
            cfg = runner::parse_run_config(single_scenario(hlip_id, "hlip_case", params));
            return execute(cfg, hlip_flags);
        }
    } catch (const runner::ConfigError& e) {
        std::cerr << "safeprob: config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "safeprob: invalid input: " << e.what() << '\n';
        return kExitConfig;
    } catch (const runner::IoError& e) {
        std::cerr << "safeprob: I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "safeprob: I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "safeprob: internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
