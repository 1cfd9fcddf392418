#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "exitbench/commands.hpp"

namespace {

struct RawFlags {
    std::string config_path;
    std::string agent;
    std::string model;
    std::string template_id;
    std::string exit_definition;
    int horizon = 0;
    double threshold_pct = 0.0;
    std::string cache_dir;
    std::string out_dir;
    int max_in_flight = 0;
    std::uint64_t seed = 0;
};

void add_common_options(CLI::App* sub, RawFlags& raw) {
    sub->add_option("--config", raw.config_path, "run configuration (JSON)")
        ->required();
    sub->add_option("--agent", raw.agent,
                    "agent kind: llm, lockup_exit, momentum, hazard_curve, "
                    "replay_actual, scripted_mock");
    sub->add_option("--model", raw.model, "model name for the llm agent");
    sub->add_option("--template", raw.template_id, "prompt template id");
    sub->add_option("--exit-definition", raw.exit_definition,
                    "actual-exit definition: threshold or full");
    sub->add_option("--horizon", raw.horizon, "evaluation horizon in months");
    sub->add_option("--threshold-pct", raw.threshold_pct,
                    "ownership threshold in percentage points");
    sub->add_flag("--volatility-filter,!--no-volatility-filter",
                  "drop firms in the top volatility tercile");
    sub->add_option("--cache-dir", raw.cache_dir, "LLM response cache directory");
    sub->add_option("--out-dir", raw.out_dir, "output directory");
    sub->add_option("--max-in-flight", raw.max_in_flight,
                    "concurrent firm evaluations");
    sub->add_option("--seed", raw.seed, "seed recorded in the effective config");
}

exitbench::cli::CliOverrides overrides_from(const CLI::App* sub, const RawFlags& raw) {
    exitbench::cli::CliOverrides o;
    if (sub->count("--agent")) o.agent = raw.agent;
    if (sub->count("--model")) o.model = raw.model;
    if (sub->count("--template")) o.template_id = raw.template_id;
    if (sub->count("--exit-definition")) o.exit_definition = raw.exit_definition;
    if (sub->count("--horizon")) o.horizon = raw.horizon;
    if (sub->count("--threshold-pct")) o.threshold_pct = raw.threshold_pct;
    if (sub->count("--volatility-filter")) o.volatility_filter = true;
    if (sub->count("--no-volatility-filter")) o.volatility_filter = false;
    if (sub->count("--cache-dir")) o.cache_dir = raw.cache_dir;
    if (sub->count("--out-dir")) o.out_dir = raw.out_dir;
    if (sub->count("--max-in-flight")) o.max_in_flight = raw.max_in_flight;
    if (sub->count("--seed")) o.seed = raw.seed;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace exitbench;

    CLI::App app{"exitbench: deterministic backtests of exit-timing agents"};
    app.require_subcommand(1);

    RawFlags raw;
    struct Command {
        const char* name;
        const char* help;
        int (*run)(const cli::RunConfig&, std::ostream&);
    };
    const Command commands[] = {
        {"ingest", "build the point-in-time timeline store", cli::cmd_ingest},
        {"extract", "parse filings into ownership series and exit records",
         cli::cmd_extract},
        {"backtest", "run the decision agent over every firm-month", cli::cmd_backtest},
        {"evaluate", "compare implied exits against actual VC exits", cli::cmd_evaluate},
        {"report", "emit descriptive tables from prior stages", cli::cmd_report},
    };
    for (const auto& c : commands) {
        add_common_options(app.add_subcommand(c.name, c.help), raw);
    }

    CLI11_PARSE(app, argc, argv);

    const CLI::App* sub = app.get_subcommands().front();
    try {
        auto config = cli::load_config(raw.config_path);
        cli::apply_overrides(config, overrides_from(sub, raw));
        for (const auto& c : commands) {
            if (sub->get_name() == c.name) return c.run(config, std::cout);
        }
        return 1;  // unreachable: require_subcommand(1)
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
