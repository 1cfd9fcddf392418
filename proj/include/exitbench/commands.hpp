#pragma once

#include <iosfwd>

#include "exitbench/config.hpp"

namespace exitbench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitValidationFailure = 3;
inline constexpr int kExitPartialFailure = 4;

// Each command writes its artifacts plus run_manifest.json into out_dir and
// returns a process exit code. InputError propagates to the caller (the CLI
// maps it to exit code 2).
int cmd_ingest(const RunConfig& config, std::ostream& log);
int cmd_extract(const RunConfig& config, std::ostream& log);
int cmd_backtest(const RunConfig& config, std::ostream& log);
int cmd_evaluate(const RunConfig& config, std::ostream& log);
int cmd_report(const RunConfig& config, std::ostream& log);

}  // namespace exitbench::cli
