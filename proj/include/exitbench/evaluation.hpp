#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "exitbench/decision.hpp"
#include "exitbench/errors.hpp"
#include "exitbench/ownership.hpp"
#include "exitbench/prompts.hpp"
#include "exitbench/returns.hpp"

namespace exitbench::eval {

struct EmptySequenceError : Error {
    using Error::Error;
};
struct MissingActualExitError : Error {
    using Error::Error;
};
struct EmptyInputError : Error {
    using Error::Error;
};
struct LengthMismatchError : Error {
    using Error::Error;
};
struct DegenerateInputError : Error {
    using Error::Error;
};

enum class ExitDefinition { threshold, full };
const char* to_string(ExitDefinition d);
std::optional<ExitDefinition> exit_definition_from_string(std::string_view name);

enum class ExitTrigger { ExitNow, WindowStart, Censored };
const char* to_string(ExitTrigger t);

struct ImpliedExit {
    MonthIndex exit_month = 0;
    bool censored = false;
    ExitTrigger trigger = ExitTrigger::Censored;
};

// Earliest month whose decision recommends exit; the start of an ExitWithin
// window counts as that month. No recommendation: censored at the horizon.
// decisions[t] is the decision for month t. Throws EmptySequence on [].
ImpliedExit derive_implied_exit(const std::vector<agents::Decision>& decisions,
                                MonthIndex horizon);

enum class Direction { Early, Late, Same };
const char* to_string(Direction d);

struct ExitComparison {
    std::string firm_id;
    std::string entity;  // canonical VC key
    MonthIndex llm_exit_month = 0;
    MonthIndex vc_exit_month = 0;
    double r_llm = 0.0;
    double r_vc = 0.0;
    double delta_r = 0.0;  // r_llm - r_vc exactly
    int timing_error_months = 0;
    Direction direction = Direction::Same;
    bool censored = false;  // implied exit was censored
};

// Both return legs run from month 0 on the same series. Throws
// MissingActualExit when the record lacks the month the definition needs.
ExitComparison compare_exit(const ImpliedExit& implied,
                            const filings::ActualExitRecord& actual,
                            const ReturnSeries& series, ExitDefinition exit_definition);

struct FirmMeta {
    std::string industry;
    std::optional<int> volatility_tercile;  // 0 = low, 1 = mid, 2 = high
};

struct GroupRow {
    std::string key;
    int n_pairs = 0;
    double mean_delta_r = 0.0;
    double median_delta_r = 0.0;
    double share_positive_delta_r = 0.0;  // percent
};

struct SummaryReport {
    int n_pairs = 0;
    int n_censored = 0;
    double mean_delta_r = 0.0;
    double median_delta_r = 0.0;
    double share_positive_delta_r = 0.0;  // percent
    double mean_abs_timing_error = 0.0;
    double pct_early = 0.0;
    double pct_late = 0.0;
    double pct_same = 0.0;
    // share of firms where strictly more than half the pairs have positive
    // delta_r; the per-firm view of "beats the VCs"
    double pct_firms_majority_positive = 0.0;
    std::vector<GroupRow> by_industry;
    std::vector<GroupRow> by_volatility;   // keys vol_low / vol_mid / vol_high / vol_unknown
    std::vector<GroupRow> by_reputation;   // keys high / other / unlabeled
    std::optional<double> hazard_correspondence;  // filled when a hazard run exists
};

// Aggregates comparisons; group rows partition the pair set within each
// dimension. Throws EmptyInput on [].
SummaryReport summarize_comparisons(
    const std::vector<ExitComparison>& pairs,
    const std::map<std::string, FirmMeta>& firm_meta,
    const std::map<std::string, filings::ReputationTier>& reputation_by_entity);

// rank -> tercile using g = floor(rank * 3 / n); ties broken by firm id so
// the assignment is deterministic.
std::map<std::string, int> volatility_terciles(
    const std::map<std::string, double>& vol_by_firm);

// Tie-aware Spearman rank correlation of exit months, aligned by index.
// Throws LengthMismatch (sizes differ or < 2) and DegenerateInput (either
// side constant).
double hazard_correspondence(const std::vector<MonthIndex>& implied_exits,
                             const std::vector<MonthIndex>& hazard_exits);

// Fixed-point serialization: every float printed with 6 decimals.
std::string summary_to_json(const SummaryReport& report);

// --- robustness matrix -------------------------------------------------------

// Axes that change what the agent decides (re-run backtest per cell).
struct DecisionAxes {
    std::vector<std::string> models;
    std::vector<std::string> templates;
    std::vector<std::vector<agents::TheoryId>> theory_sets;
};

// Axes that only change evaluation of recorded decisions.
struct EvalAxes {
    std::vector<ExitDefinition> exit_definitions;
    std::vector<bool> volatility_filter;
};

std::string theory_set_label(const std::vector<agents::TheoryId>& ids);  // "a+b" or "none"

// "model=M__template=T__theory=TH"
std::string decision_cell_id(const std::string& model, const std::string& template_id,
                             const std::vector<agents::TheoryId>& theory);

// decision cell id + "__exitdef=D__vol=on|off"
std::string eval_cell_id(const std::string& decision_cell, ExitDefinition def,
                         bool volatility_filter);

}  // namespace exitbench::eval
