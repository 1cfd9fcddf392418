#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "exitbench/calendar.hpp"
#include "exitbench/errors.hpp"
#include "exitbench/timeline.hpp"

namespace exitbench::filings {

using pit::MonthIndex;

struct EmptyNameError : Error {
    using Error::Error;
};
struct EmptySeriesError : Error {
    using Error::Error;
};
struct EmptyInputError : Error {
    using Error::Error;
};

// One holder row as printed in a filing: name plus ownership percentage.
struct HolderRow {
    std::string raw_name;
    double pct_owned = 0.0;
};

struct ExtractionOptions {
    // A stockholder section starts at a line containing one of these
    // (case-insensitive).
    std::vector<std::string> section_keywords = {"principal stockholders",
                                                 "security ownership"};
};

struct ExtractionResult {
    bool section_found = false;
    std::vector<HolderRow> rows;  // document order, per-filing
};

// Parses holder rows out of a plain-text filing excerpt. Rows live inside a
// detected stockholder section and look like: name, optional share count,
// percentage token with optional parenthesized footnote marker.
ExtractionResult extract_filing(const std::string& filing_text,
                                const ExtractionOptions& options = {});

// Convenience wrapper: just the rows (empty when no section is recognizable).
std::vector<HolderRow> extract_holders(const std::string& filing_text,
                                       const ExtractionOptions& options = {});

// Canonical key for an investor name: lowercased, punctuation collapsed,
// trailing legal suffixes and fund ordinals/numerals stripped, whitespace
// collapsed. Deterministic and idempotent. Throws EmptyNameError on "".
std::string normalize_name(const std::string& raw);

// One ownership data point for a VC-firm pair. A missing report_month marks
// the distinguished pre-IPO baseline observation.
struct OwnershipObservation {
    std::string firm_id;
    std::string vc_raw_name;
    std::optional<MonthIndex> report_month;  // nullopt = PRE_IPO baseline
    double pct_owned = 0.0;                  // 0..100
};

enum class ReputationTier { high, other };

struct VcEntity {
    std::string canonical_key;
    std::set<std::string> aliases;
    std::optional<ReputationTier> reputation_tier;
};

// Groups observations whose raw names normalize to the same key. Output is
// sorted by canonical key.
std::vector<VcEntity> link_aliases(const std::vector<OwnershipObservation>& observations);

// Month-ordered ownership trajectory of one entity in one firm. Ownership is
// held constant between observations.
struct OwnershipSeries {
    std::string firm_id;
    std::string canonical_key;
    std::optional<double> pre_ipo_pct;
    std::vector<std::pair<MonthIndex, double>> points;  // strictly increasing months
};

enum class ExitClassification { Complete, Partial, NoExit };

const char* to_string(ExitClassification c);

struct ActualExitRecord {
    std::string firm_id;
    std::string canonical_key;
    std::optional<MonthIndex> first_action_month;
    std::optional<MonthIndex> threshold_cross_month;
    std::optional<MonthIndex> full_exit_month;
    ExitClassification classification = ExitClassification::NoExit;
};

// Walks the ownership trajectory and dates the exits:
//   threshold_cross_month — first observation with pct strictly below
//       threshold_pct;
//   full_exit_month       — first observation at exactly zero;
//   first_action_month    — first observation lower than its predecessor
//       (including the pre-IPO baseline) by at least materiality_delta_pp.
// Observations beyond the horizon are outside the window and ignored.
ActualExitRecord derive_actual_exit(const OwnershipSeries& series, double threshold_pct,
                                    MonthIndex horizon,
                                    double materiality_delta_pp = 1.0);

struct ExitSummary {
    int n_records = 0;  // VC-firm pairs
    int n_firms = 0;
    int n_vcs = 0;
    double pct_complete = 0.0;
    double pct_partial = 0.0;
    double pct_no_exit = 0.0;
    std::optional<double> median_first_action_months;
    std::optional<double> median_full_exit_months;
};

// Aggregate exit statistics over VC-firm records. Percentages run over all
// records; the full-exit median over Complete records only; the first-action
// median over records that have one. Throws EmptyInputError on [].
ExitSummary summarize_exits(const std::vector<ActualExitRecord>& records);

// --- corpus-level assembly ---------------------------------------------------

struct ObservationBuildOptions {
    ExtractionOptions extraction;
    // Rows are treated as VC holders only when the name matches one of these
    // (case-insensitive substring) ...
    std::vector<std::string> vc_name_keywords = {
        "ventures", "capital", "partners", "fund",   "associates",
        "holdings", "equity",  "investors", "management"};
    // ... and none of these.
    std::vector<std::string> holder_exclude_patterns = {
        "as a group", "officers and directors", "directors and officers",
        "executive officer"};
};

struct FilingRef {
    std::filesystem::path path;
    std::string firm_id;
    YearMonth report_month;
    std::string form;  // 10-K, 10-Q, ...
};

// Parses "{firm_id}_{YYYY-MM}_{form}.txt" names from a filings directory.
// Unparseable names raise InputError; non-.txt entries are skipped.
std::vector<FilingRef> scan_filings_dir(const std::filesystem::path& dir);

struct ObservationLog {
    std::vector<std::string> notes;  // dedup and filter decisions, for the run log
};

// Reads every filing, extracts VC holder rows, and produces observations.
// Calendar months before the firm's lockup expiration become the PRE_IPO
// baseline. When a later filing has a recognizable section but an
// already-seen entity is absent, a zero observation is synthesized for that
// month (holders drop out of stockholder tables once divested).
std::vector<OwnershipObservation> build_observations(
    const std::vector<FilingRef>& filings, const std::vector<pit::FirmInfo>& firms,
    const ObservationBuildOptions& options, ObservationLog* log = nullptr);

// Groups observations into per-(firm, entity) series. Distinct raw names that
// normalize to one key within a month have their stakes summed.
std::vector<OwnershipSeries> build_series(
    const std::vector<OwnershipObservation>& observations);

// --- ownership.csv -----------------------------------------------------------
// Columns: firm_id, vc_raw_name, report_month (YYYY-MM or PRE_IPO), pct_owned.

struct OwnershipCsvRow {
    std::string firm_id;
    std::string vc_raw_name;
    std::string report_month;  // calendar form or "PRE_IPO"
    double pct_owned = 0.0;
};

std::vector<OwnershipCsvRow> load_ownership_csv(const std::filesystem::path& path);
void save_ownership_csv(const std::vector<OwnershipCsvRow>& rows,
                        const std::filesystem::path& path);

// Maps CSV rows (calendar months) onto month-indexed observations using firm
// metadata; months before lockup expiration become the PRE_IPO baseline.
std::vector<OwnershipObservation> observations_from_csv_rows(
    const std::vector<OwnershipCsvRow>& rows, const std::vector<pit::FirmInfo>& firms);

}  // namespace exitbench::filings
