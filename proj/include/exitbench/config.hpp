#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "exitbench/agents.hpp"
#include "exitbench/evaluation.hpp"
#include "exitbench/llm_client.hpp"

namespace exitbench::cli {

struct RunConfig {
    // inputs
    std::filesystem::path events_path;
    std::filesystem::path firms_path;
    std::filesystem::path filings_dir;
    std::filesystem::path templates_dir;
    std::filesystem::path reputation_path;  // optional {"entity": "high"|"other"}
    // working/output
    std::filesystem::path ownership_path;  // written by extract, read by evaluate
    std::filesystem::path cache_dir;
    std::filesystem::path out_dir;

    agents::AgentConfig agent;
    agents::ClientConfig client;

    eval::ExitDefinition exit_definition = eval::ExitDefinition::threshold;
    pit::MonthIndex horizon = pit::kDefaultHorizon;
    double threshold_pct = 5.0;          // regulatory ownership threshold
    double materiality_delta_pp = 1.0;   // first-action sensitivity
    bool volatility_filter = false;      // drop the top volatility tercile
    bool exclude_censored = false;       // drop censored implied exits instead
    int max_in_flight = 4;
    uint64_t seed = 0;

    // robustness sweep; empty axes mean "no matrix"
    eval::DecisionAxes decision_axes;
    eval::EvalAxes eval_axes;

    bool matrix_enabled() const {
        return !decision_axes.models.empty() || !decision_axes.templates.empty() ||
               !decision_axes.theory_sets.empty() ||
               !eval_axes.exit_definitions.empty() ||
               !eval_axes.volatility_filter.empty();
    }
};

struct CliOverrides {
    std::optional<std::string> agent;
    std::optional<std::string> model;
    std::optional<std::string> template_id;
    std::optional<std::string> exit_definition;
    std::optional<int> horizon;
    std::optional<double> threshold_pct;
    std::optional<bool> volatility_filter;
    std::optional<std::string> cache_dir;
    std::optional<std::string> out_dir;
    std::optional<int> max_in_flight;
    std::optional<uint64_t> seed;
};

// Reads the JSON config document. Relative paths resolve against the config
// file's directory. Unknown keys are rejected. Throws InputError on any
// problem; validation covers horizon >= 1 and 0 < threshold_pct < 100.
RunConfig load_config(const std::filesystem::path& config_path);

// Flags win over config keys. Relative path overrides resolve against the
// current working directory.
void apply_overrides(RunConfig& config, const CliOverrides& overrides);

// Canonical serialization of the effective config; its sha256 is the config
// digest recorded in manifests.
std::string effective_config_json(const RunConfig& config);
std::string config_digest(const RunConfig& config);

}  // namespace exitbench::cli
