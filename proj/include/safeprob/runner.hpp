// runner.hpp - run configuration (JSON), scenario dispatch and file emission.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "safeprob/experiments.hpp"

namespace safeprob::runner {

inline constexpr const char* kToolName = "safeprob";
inline constexpr const char* kToolVersion = "0.1.0";

/// Malformed or schema-violating configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem failure while reading input or writing results.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PropertySuiteParams {};

using ScenarioParams = std::variant<experiments::BoundGridParams, experiments::IssfParams,
                                    experiments::HlipParams, PropertySuiteParams>;

struct Scenario {
    std::string id;
    ScenarioParams params;
    std::optional<std::uint64_t> seed;

    /// "bound_grid", "issf_compare", "hlip_case" or "property_suite".
    std::string kind() const;
};

struct RunConfig {
    std::optional<std::string> output_dir;
    std::uint64_t seed{20240917};
    std::optional<int> trials;
    unsigned workers{0};
    std::vector<Scenario> scenarios;
};

/// Validates against the published schema; unknown fields raise ConfigError
/// naming the JSON path of the offending field.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Scenario seed: explicit, else derived from the run seed and the id.
std::uint64_t scenario_seed(const RunConfig& cfg, const Scenario& s);

struct RunReport {
    std::vector<std::string> files;
    bool property_failure{false};
};

/// Runs every scenario and writes <id>.csv, <id>.json (plus
/// <id>_trajectories.csv for HLIP cases) and manifest.json into out_dir.
/// Output bytes depend only on the config, never on the worker count.
/// Progress lines go to log when given.
RunReport run(const RunConfig& cfg, const std::filesystem::path& out_dir,
              std::ostream* log = nullptr);

/// ISO-8601 UTC time taken from SOURCE_DATE_EPOCH, or the epoch when unset,
/// so that manifests are reproducible.
std::string manifest_timestamp();

}  // namespace safeprob::runner
