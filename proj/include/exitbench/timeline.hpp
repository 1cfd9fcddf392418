#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "exitbench/calendar.hpp"
#include "exitbench/errors.hpp"

namespace exitbench::pit {

// Months elapsed since the firm's lockup-expiration month. Month 0 is the
// lockup-expiration month itself.
using MonthIndex = int;

inline constexpr MonthIndex kDefaultHorizon = 60;

enum class EventKind {
    price,
    filing_10K,
    filing_10Q,
    earnings_call,
    news,
    industry,
    macro,
    patent,
};

const char* to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view name);

// One timestamped piece of public information about a firm.
struct EventRecord {
    std::string firm_id;
    MonthIndex month = 0;
    EventKind kind = EventKind::news;
    nlohmann::json payload;
    std::string source_id;
};

struct FirmInfo {
    std::string firm_id;
    YearMonth ipo_month;
    YearMonth lockup_expiration_month;
    std::string industry;
};

// As-of-month view of a firm: every event dated at or before `as_of`, plus a
// content digest that is stable across identical ingests.
struct InfoPacket {
    std::string firm_id;
    MonthIndex as_of = 0;
    std::vector<EventRecord> events;
    std::string digest;
};

struct Violation {
    enum class Rule { MissingLockupPrice, BeyondHorizon };
    Rule rule;
    std::string firm_id;
    std::optional<MonthIndex> month;
    std::string message() const;
};

struct DuplicateEventError : Error {
    using Error::Error;
};
struct MalformedRecordError : InputError {
    using InputError::InputError;
};
struct NegativePriceError : Error {
    using Error::Error;
};
struct UnknownFirmError : Error {
    using Error::Error;
};
struct MonthOutOfRangeError : Error {
    using Error::Error;
};

// Immutable store of per-firm events. Construction validates and sorts; after
// that the store is read-only and safe to query from any number of threads.
class Timeline {
public:
    // Builds a timeline from month-indexed records. Rejects records that
    // violate their invariants and duplicate (firm, month, kind, source) keys.
    static Timeline ingest(std::vector<EventRecord> records,
                           MonthIndex horizon = kDefaultHorizon);

    // Same, with firm metadata attached. Every record must belong to a known
    // firm.
    static Timeline ingest(std::vector<EventRecord> records,
                           std::vector<FirmInfo> firms, MonthIndex horizon);

    // Point-in-time query: all events for `firm` with month <= t. Throws
    // UnknownFirmError / MonthOutOfRangeError on bad arguments.
    InfoPacket as_of(const std::string& firm, MonthIndex t) const;

    const std::set<std::string>& firms() const { return firm_ids_; }
    MonthIndex horizon() const { return horizon_; }
    size_t event_count() const { return total_events_; }

    const std::vector<EventRecord>& events_for(const std::string& firm) const;
    const std::map<std::string, FirmInfo>& firm_directory() const { return directory_; }
    const FirmInfo* firm_info(const std::string& firm) const;

private:
    Timeline() = default;

    std::map<std::string, std::vector<EventRecord>> events_;  // sorted per firm
    std::set<std::string> firm_ids_;
    std::map<std::string, FirmInfo> directory_;
    MonthIndex horizon_ = kDefaultHorizon;
    size_t total_events_ = 0;
};

// Checks data-quality rules that are not hard ingest failures: every firm has
// a month-0 price event, and no event lies beyond the horizon.
std::vector<Violation> validate_timeline(const Timeline& timeline);

// --- file formats ----------------------------------------------------------

// firms.json: array of {"firm_id", "ipo_month", "lockup_expiration_month",
// "industry"}.
std::vector<FirmInfo> load_firms_json(const std::filesystem::path& path);

// events.jsonl: one {"firm_id", "month": "YYYY-MM", "kind", "payload",
// "source_id"} object per line. Calendar months are rebased onto each firm's
// lockup-expiration month; months before it collapse into month 0.
std::vector<EventRecord> load_events_jsonl(const std::filesystem::path& path,
                                           const std::vector<FirmInfo>& firms);

// Persisted month-indexed store written by the ingest command.
void save_timeline_store(const Timeline& timeline, const std::filesystem::path& path);
Timeline load_timeline_store(const std::filesystem::path& path);

}  // namespace exitbench::pit
