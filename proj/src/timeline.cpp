#include "exitbench/timeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>

#include "exitbench/digest.hpp"

namespace exitbench::pit {

namespace {

struct KindName {
    EventKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {EventKind::price, "price"},
    {EventKind::filing_10K, "filing_10K"},
    {EventKind::filing_10Q, "filing_10Q"},
    {EventKind::earnings_call, "earnings_call"},
    {EventKind::news, "news"},
    {EventKind::industry, "industry"},
    {EventKind::macro, "macro"},
    {EventKind::patent, "patent"},
};

auto record_key(const EventRecord& r) {
    return std::tie(r.firm_id, r.month, r.kind, r.source_id);
}

void check_record(const EventRecord& r) {
    if (r.firm_id.empty()) {
        throw MalformedRecordError("event record with empty firm_id");
    }
    if (r.month < 0) {
        throw MalformedRecordError("event record with negative month for firm " + r.firm_id);
    }
    if (r.kind == EventKind::price) {
        if (!r.payload.is_object() || !r.payload.contains("close") ||
            !r.payload["close"].is_number()) {
            throw MalformedRecordError("price event without numeric close for firm " +
                                       r.firm_id);
        }
        if (r.payload["close"].get<double>() <= 0.0) {
            throw NegativePriceError("non-positive close for firm " + r.firm_id +
                                     " at month " + std::to_string(r.month));
        }
    }
}

// Canonical one-line rendering used for packet digests. Payload objects are
// dumped with nlohmann's sorted keys, so equal content hashes equally.
void append_event_canonical(std::string& out, const EventRecord& e) {
    out += e.firm_id;
    out += '\x1f';
    out += std::to_string(e.month);
    out += '\x1f';
    out += to_string(e.kind);
    out += '\x1f';
    out += e.source_id;
    out += '\x1f';
    out += e.payload.dump();
    out += '\n';
}

}  // namespace

const char* to_string(EventKind kind) {
    for (const auto& kn : kKindNames) {
        if (kn.kind == kind) return kn.name;
    }
    return "unknown";
}

std::optional<EventKind> event_kind_from_string(std::string_view name) {
    for (const auto& kn : kKindNames) {
        if (name == kn.name) return kn.kind;
    }
    return std::nullopt;
}

std::string Violation::message() const {
    switch (rule) {
        case Rule::MissingLockupPrice:
            return "firm " + firm_id + ": no price event at month 0";
        case Rule::BeyondHorizon:
            return "firm " + firm_id + ": event at month " +
                   std::to_string(month.value_or(-1)) + " beyond horizon";
    }
    return "unknown violation";
}

Timeline Timeline::ingest(std::vector<EventRecord> records, MonthIndex horizon) {
    return ingest(std::move(records), {}, horizon);
}

Timeline Timeline::ingest(std::vector<EventRecord> records, std::vector<FirmInfo> firms,
                          MonthIndex horizon) {
    if (horizon < 1) {
        throw MalformedRecordError("horizon must be >= 1");
    }
    Timeline t;
    t.horizon_ = horizon;
    for (auto& f : firms) {
        t.firm_ids_.insert(f.firm_id);
        t.directory_.emplace(f.firm_id, std::move(f));
    }

    for (auto& r : records) {
        check_record(r);
        if (!t.directory_.empty() && !t.directory_.count(r.firm_id)) {
            throw MalformedRecordError("event for firm '" + r.firm_id +
                                       "' absent from firm metadata");
        }
        t.firm_ids_.insert(r.firm_id);
        t.events_[r.firm_id].push_back(std::move(r));
    }

    for (auto& [firm, evs] : t.events_) {
        std::sort(evs.begin(), evs.end(), [](const EventRecord& a, const EventRecord& b) {
            return record_key(a) < record_key(b);
        });
        for (size_t i = 1; i < evs.size(); ++i) {
            if (record_key(evs[i - 1]) == record_key(evs[i])) {
                throw DuplicateEventError(
                    "duplicate event key (" + firm + ", " + std::to_string(evs[i].month) +
                    ", " + to_string(evs[i].kind) + ", " + evs[i].source_id + ")");
            }
        }
        t.total_events_ += evs.size();
    }
    return t;
}

InfoPacket Timeline::as_of(const std::string& firm, MonthIndex t) const {
    if (!firm_ids_.count(firm)) {
        throw UnknownFirmError("unknown firm '" + firm + "'");
    }
    if (t < 0 || t > horizon_) {
        throw MonthOutOfRangeError("month " + std::to_string(t) + " outside [0, " +
                                   std::to_string(horizon_) + "]");
    }
    InfoPacket packet;
    packet.firm_id = firm;
    packet.as_of = t;

    std::string canon = firm + '\x1f' + std::to_string(t) + '\n';
    auto it = events_.find(firm);
    if (it != events_.end()) {
        for (const auto& e : it->second) {
            if (e.month > t) break;  // events are month-sorted
            packet.events.push_back(e);
            append_event_canonical(canon, e);
        }
    }
    packet.digest = sha256_hex(canon);
    return packet;
}

const std::vector<EventRecord>& Timeline::events_for(const std::string& firm) const {
    static const std::vector<EventRecord> kEmpty;
    auto it = events_.find(firm);
    return it == events_.end() ? kEmpty : it->second;
}

const FirmInfo* Timeline::firm_info(const std::string& firm) const {
    auto it = directory_.find(firm);
    return it == directory_.end() ? nullptr : &it->second;
}

std::vector<Violation> validate_timeline(const Timeline& timeline) {
    std::vector<Violation> out;
    for (const auto& firm : timeline.firms()) {
        bool has_lockup_price = false;
        for (const auto& e : timeline.events_for(firm)) {
            if (e.month == 0 && e.kind == EventKind::price) {
                has_lockup_price = true;
            }
            if (e.month > timeline.horizon()) {
                out.push_back({Violation::Rule::BeyondHorizon, firm, e.month});
            }
        }
        if (!has_lockup_price) {
            out.push_back({Violation::Rule::MissingLockupPrice, firm, std::nullopt});
        }
    }
    return out;
}

std::vector<FirmInfo> load_firms_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open firms file: " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedRecordError(path.string() + ": " + e.what());
    }
    if (!doc.is_array()) {
        throw MalformedRecordError(path.string() + ": expected a JSON array of firms");
    }
    std::vector<FirmInfo> firms;
    for (const auto& item : doc) {
        try {
            FirmInfo f;
            f.firm_id = item.at("firm_id").get<std::string>();
            f.ipo_month = parse_year_month(item.at("ipo_month").get<std::string>());
            f.lockup_expiration_month =
                parse_year_month(item.at("lockup_expiration_month").get<std::string>());
            f.industry = item.value("industry", std::string("unknown"));
            if (f.firm_id.empty()) {
                throw InputError("empty firm_id");
            }
            firms.push_back(std::move(f));
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecordError(path.string() + ": bad firm entry: " + e.what());
        }
    }
    return firms;
}

std::vector<EventRecord> load_events_jsonl(const std::filesystem::path& path,
                                           const std::vector<FirmInfo>& firms) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open events file: " + path.string());
    }
    std::map<std::string, int> lockup_linear;
    for (const auto& f : firms) {
        lockup_linear[f.firm_id] = f.lockup_expiration_month.linear();
    }

    std::vector<EventRecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fail = [&](const std::string& why) -> MalformedRecordError {
            return MalformedRecordError(path.string() + ":" + std::to_string(line_no) +
                                        ": " + why);
        };
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw fail("not a JSON object");
        }
        EventRecord r;
        try {
            r.firm_id = obj.at("firm_id").get<std::string>();
            auto kind = event_kind_from_string(obj.at("kind").get<std::string>());
            if (!kind) {
                throw fail("unknown event kind '" +
                           obj.at("kind").get<std::string>() + "'");
            }
            r.kind = *kind;
            r.payload = obj.value("payload", nlohmann::json::object());
            r.source_id = obj.at("source_id").get<std::string>();

            auto lk = lockup_linear.find(r.firm_id);
            if (lk == lockup_linear.end()) {
                throw fail("unknown firm '" + r.firm_id + "'");
            }
            YearMonth em = parse_year_month(obj.at("month").get<std::string>());
            // Pre-lockup history collapses into the month-0 packet.
            r.month = std::max(0, em.linear() - lk->second);
        } catch (const nlohmann::json::exception& e) {
            throw fail(e.what());
        } catch (const InputError& e) {
            throw fail(e.what());
        }
        records.push_back(std::move(r));
    }
    return records;
}

void save_timeline_store(const Timeline& timeline, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["horizon"] = timeline.horizon();
    auto firms = nlohmann::json::array();
    for (const auto& [id, info] : timeline.firm_directory()) {
        firms.push_back({{"firm_id", id},
                         {"ipo_month", info.ipo_month.str()},
                         {"lockup_expiration_month", info.lockup_expiration_month.str()},
                         {"industry", info.industry}});
    }
    doc["firms"] = std::move(firms);
    auto events = nlohmann::json::array();
    for (const auto& firm : timeline.firms()) {
        for (const auto& e : timeline.events_for(firm)) {
            events.push_back({{"firm_id", e.firm_id},
                              {"month", e.month},
                              {"kind", to_string(e.kind)},
                              {"payload", e.payload},
                              {"source_id", e.source_id}});
        }
    }
    doc["events"] = std::move(events);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("cannot write timeline store: " + path.string());
    }
    out << doc.dump(2) << '\n';
}

Timeline load_timeline_store(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open timeline store: " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedRecordError(path.string() + ": " + e.what());
    }
    std::vector<FirmInfo> firms;
    for (const auto& item : doc.at("firms")) {
        FirmInfo f;
        f.firm_id = item.at("firm_id").get<std::string>();
        f.ipo_month = parse_year_month(item.at("ipo_month").get<std::string>());
        f.lockup_expiration_month =
            parse_year_month(item.at("lockup_expiration_month").get<std::string>());
        f.industry = item.value("industry", std::string("unknown"));
        firms.push_back(std::move(f));
    }
    std::vector<EventRecord> records;
    for (const auto& item : doc.at("events")) {
        EventRecord r;
        r.firm_id = item.at("firm_id").get<std::string>();
        r.month = item.at("month").get<int>();
        auto kind = event_kind_from_string(item.at("kind").get<std::string>());
        if (!kind) {
            throw MalformedRecordError(path.string() + ": unknown event kind in store");
        }
        r.kind = *kind;
        r.payload = item.value("payload", nlohmann::json::object());
        r.source_id = item.at("source_id").get<std::string>();
        records.push_back(std::move(r));
    }
    return Timeline::ingest(std::move(records), std::move(firms),
                            doc.at("horizon").get<int>());
}

}  // namespace exitbench::pit
