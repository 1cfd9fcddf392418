#include "exitbench/ownership.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>
#include <tuple>

namespace exitbench::filings {

namespace {

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool contains_ci(const std::string& haystack, const std::string& needle) {
    return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

// name span, optional attached footnote, optional share count, percentage
// token with optional footnote marker, end of line.
const std::regex kHolderRow(
    R"(^\s*([A-Za-z][^%]*?)(?:\((\d+)\))?\s+(?:(\d[\d,]*)\s+)?(\d+(?:\.\d+)?)\s*%\s*(?:\(\d+\))?\s*$)");

const std::regex kSectionEnd(R"(^\s*item\s+\d+)", std::regex::icase);

const std::regex kRomanNumeral(
    R"(^m{0,4}(cm|cd|d?c{0,3})(xc|xl|l?x{0,3})(ix|iv|v?i{0,3})$)");

bool is_roman_numeral(const std::string& tok) {
    return !tok.empty() && std::regex_match(tok, kRomanNumeral);
}

bool is_arabic_number(const std::string& tok) {
    return !tok.empty() &&
           std::all_of(tok.begin(), tok.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

bool is_ordinal(const std::string& tok) {
    static const std::regex re(R"(^\d+(st|nd|rd|th)$)");
    return std::regex_match(tok, re);
}

bool is_droppable_tail(const std::string& tok) {
    static const std::set<std::string> suffixes = {"lp", "llp", "lllp", "llc",
                                                   "inc", "ltd", "fund"};
    return suffixes.count(tok) > 0 || is_roman_numeral(tok) || is_arabic_number(tok) ||
           is_ordinal(tok);
}

double parse_pct(const std::string& digits) { return std::stod(digits); }

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ' ';
        out += parts[i];
    }
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

const char* to_string(ExitClassification c) {
    switch (c) {
        case ExitClassification::Complete: return "Complete";
        case ExitClassification::Partial: return "Partial";
        case ExitClassification::NoExit: return "NoExit";
    }
    return "unknown";
}

ExtractionResult extract_filing(const std::string& filing_text,
                                const ExtractionOptions& options) {
    ExtractionResult result;
    std::istringstream in(filing_text);
    std::string line;
    bool in_section = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!in_section) {
            const std::string lower = to_lower(line);
            for (const auto& kw : options.section_keywords) {
                if (lower.find(to_lower(kw)) != std::string::npos) {
                    in_section = true;
                    result.section_found = true;
                    break;
                }
            }
            continue;
        }
        if (std::regex_search(line, kSectionEnd)) {
            in_section = false;
            continue;
        }
        std::smatch m;
        if (std::regex_match(line, m, kHolderRow)) {
            HolderRow row;
            row.raw_name = m[1].str();
            // trim trailing whitespace left by the non-greedy capture
            while (!row.raw_name.empty() &&
                   std::isspace(static_cast<unsigned char>(row.raw_name.back()))) {
                row.raw_name.pop_back();
            }
            row.pct_owned = parse_pct(m[4].str());
            result.rows.push_back(std::move(row));
        }
    }
    return result;
}

std::vector<HolderRow> extract_holders(const std::string& filing_text,
                                       const ExtractionOptions& options) {
    return extract_filing(filing_text, options).rows;
}

std::string normalize_name(const std::string& raw) {
    if (raw.empty()) {
        throw EmptyNameError("normalize_name: empty name");
    }
    std::string cleaned;
    cleaned.reserve(raw.size());
    for (unsigned char c : raw) {
        c = static_cast<unsigned char>(std::tolower(c));
        if (std::isalnum(c)) {
            cleaned += static_cast<char>(c);
        } else if (c == '.' || c == ',' || c == '\'' || c == '"') {
            // punctuation inside abbreviations ("L.P.") vanishes entirely
        } else {
            cleaned += ' ';
        }
    }
    std::vector<std::string> tokens = split_ws(cleaned);
    if (tokens.empty()) {
        throw EmptyNameError("normalize_name: name '" + raw +
                             "' has no identifying content");
    }
    std::vector<std::string> stripped = tokens;
    while (!stripped.empty() && is_droppable_tail(stripped.back())) {
        stripped.pop_back();
    }
    if (stripped.empty()) {
        stripped = tokens;  // the whole name was suffix/numeral material
    }
    return join(stripped);
}

std::vector<VcEntity> link_aliases(const std::vector<OwnershipObservation>& observations) {
    std::map<std::string, VcEntity> by_key;
    for (const auto& obs : observations) {
        const std::string key = normalize_name(obs.vc_raw_name);
        auto& entity = by_key[key];
        entity.canonical_key = key;
        entity.aliases.insert(obs.vc_raw_name);
    }
    std::vector<VcEntity> out;
    out.reserve(by_key.size());
    for (auto& [key, entity] : by_key) {
        out.push_back(std::move(entity));
    }
    return out;
}

ActualExitRecord derive_actual_exit(const OwnershipSeries& series, double threshold_pct,
                                    MonthIndex horizon, double materiality_delta_pp) {
    if (series.points.empty()) {
        throw EmptySeriesError("ownership series for " + series.firm_id + "/" +
                               series.canonical_key + " has no points");
    }
    ActualExitRecord rec;
    rec.firm_id = series.firm_id;
    rec.canonical_key = series.canonical_key;

    double prev = 0.0;
    bool have_prev = false;
    if (series.pre_ipo_pct) {
        prev = *series.pre_ipo_pct;
        have_prev = true;
    }
    for (const auto& [month, pct] : series.points) {
        if (month > horizon) break;
        if (!rec.threshold_cross_month && pct < threshold_pct) {
            rec.threshold_cross_month = month;
        }
        if (!rec.full_exit_month && pct <= 1e-12) {
            rec.full_exit_month = month;
        }
        if (have_prev && !rec.first_action_month &&
            prev - pct >= materiality_delta_pp - 1e-9) {
            rec.first_action_month = month;
        }
        prev = pct;
        have_prev = true;
    }
    if (rec.full_exit_month) {
        rec.classification = ExitClassification::Complete;
    } else if (rec.first_action_month) {
        rec.classification = ExitClassification::Partial;
    } else {
        rec.classification = ExitClassification::NoExit;
    }
    return rec;
}

ExitSummary summarize_exits(const std::vector<ActualExitRecord>& records) {
    if (records.empty()) {
        throw EmptyInputError("summarize_exits: no records");
    }
    ExitSummary s;
    std::set<std::string> firms, vcs;
    int complete = 0, partial = 0, none = 0;
    std::vector<double> first_actions, full_exits;
    for (const auto& r : records) {
        firms.insert(r.firm_id);
        vcs.insert(r.canonical_key);
        switch (r.classification) {
            case ExitClassification::Complete: ++complete; break;
            case ExitClassification::Partial: ++partial; break;
            case ExitClassification::NoExit: ++none; break;
        }
        if (r.first_action_month) first_actions.push_back(*r.first_action_month);
        if (r.classification == ExitClassification::Complete) {
            full_exits.push_back(*r.full_exit_month);
        }
    }
    const double n = static_cast<double>(records.size());
    s.n_records = static_cast<int>(records.size());
    s.n_firms = static_cast<int>(firms.size());
    s.n_vcs = static_cast<int>(vcs.size());
    s.pct_complete = 100.0 * complete / n;
    s.pct_partial = 100.0 * partial / n;
    s.pct_no_exit = 100.0 * none / n;
    if (!first_actions.empty()) s.median_first_action_months = median(first_actions);
    if (!full_exits.empty()) s.median_full_exit_months = median(full_exits);
    return s;
}

std::vector<FilingRef> scan_filings_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw InputError("filings directory not found: " + dir.string());
    }
    std::vector<FilingRef> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        const std::string stem = entry.path().stem().string();
        // {firm_id}_{YYYY-MM}_{form}; firm_id may itself contain underscores
        const auto last = stem.rfind('_');
        const auto mid = last == std::string::npos ? std::string::npos
                                                   : stem.rfind('_', last - 1);
        if (mid == std::string::npos || mid == 0) {
            throw InputError("unrecognized filing name: " + entry.path().string());
        }
        FilingRef ref;
        ref.path = entry.path();
        ref.firm_id = stem.substr(0, mid);
        ref.report_month = parse_year_month(stem.substr(mid + 1, last - mid - 1));
        ref.form = stem.substr(last + 1);
        out.push_back(std::move(ref));
    }
    std::sort(out.begin(), out.end(), [](const FilingRef& a, const FilingRef& b) {
        return std::tie(a.firm_id, a.report_month.year, a.report_month.month, a.form,
                        a.path) < std::tie(b.firm_id, b.report_month.year,
                                           b.report_month.month, b.form, b.path);
    });
    return out;
}

namespace {

bool passes_vc_filter(const std::string& raw, const ObservationBuildOptions& opts,
                      ObservationLog* log) {
    for (const auto& pat : opts.holder_exclude_patterns) {
        if (contains_ci(raw, pat)) {
            if (log) log->notes.push_back("excluded holder row: " + raw);
            return false;
        }
    }
    for (const auto& kw : opts.vc_name_keywords) {
        if (contains_ci(raw, kw)) return true;
    }
    if (log) log->notes.push_back("non-VC holder row skipped: " + raw);
    return false;
}

}  // namespace

std::vector<OwnershipObservation> build_observations(
    const std::vector<FilingRef>& filings, const std::vector<pit::FirmInfo>& firms,
    const ObservationBuildOptions& options, ObservationLog* log) {
    std::map<std::string, const pit::FirmInfo*> firm_by_id;
    for (const auto& f : firms) firm_by_id[f.firm_id] = &f;

    // (firm, calendar month) -> merged holder rows, deduplicated on raw name
    struct MonthRows {
        std::vector<HolderRow> rows;
        std::set<std::string> seen;
    };
    std::map<std::string, std::map<int, MonthRows>> by_firm_month;

    for (const auto& ref : filings) {
        if (!firm_by_id.count(ref.firm_id)) {
            throw InputError("filing " + ref.path.string() + " names unknown firm '" +
                             ref.firm_id + "'");
        }
        std::ifstream in(ref.path);
        if (!in) {
            throw InputError("cannot read filing: " + ref.path.string());
        }
        std::stringstream buf;
        buf << in.rdbuf();
        ExtractionResult res = extract_filing(buf.str(), options.extraction);
        if (!res.section_found) {
            if (log) {
                log->notes.push_back("no stockholder section in " + ref.path.string());
            }
            continue;
        }
        auto& slot = by_firm_month[ref.firm_id][ref.report_month.linear()];
        for (auto& row : res.rows) {
            if (row.pct_owned < 0.0 || row.pct_owned > 100.0) {
                if (log) {
                    log->notes.push_back("out-of-range percentage dropped in " +
                                         ref.path.string() + ": " + row.raw_name);
                }
                continue;
            }
            if (!passes_vc_filter(row.raw_name, options, log)) continue;
            if (!slot.seen.insert(row.raw_name).second) {
                if (log) {
                    log->notes.push_back("duplicate holder row deduplicated in " +
                                         ref.path.string() + ": " + row.raw_name);
                }
                continue;
            }
            slot.rows.push_back(std::move(row));
        }
    }

    std::vector<OwnershipObservation> out;
    for (const auto& [firm_id, months] : by_firm_month) {
        const int lockup = firm_by_id.at(firm_id)->lockup_expiration_month.linear();

        // Baseline: the latest pre-lockup month in which each raw name appears.
        std::map<std::string, double> baseline;
        for (const auto& [lin, mr] : months) {
            if (lin - lockup >= 0) continue;
            for (const auto& row : mr.rows) {
                baseline[row.raw_name] = row.pct_owned;  // later months overwrite
            }
        }
        for (const auto& [raw, pct] : baseline) {
            out.push_back({firm_id, raw, std::nullopt, pct});
        }

        // Post-lockup observations, with implicit zeros for entities that have
        // dropped out of the stockholder table.
        std::map<std::string, std::pair<std::string, double>> last_by_key;  // key -> (raw, pct)
        for (const auto& [raw, pct] : baseline) {
            last_by_key[normalize_name(raw)] = {raw, pct};
        }
        for (const auto& [lin, mr] : months) {
            const MonthIndex midx = lin - lockup;
            if (midx < 0) continue;
            std::set<std::string> present;
            for (const auto& row : mr.rows) {
                out.push_back({firm_id, row.raw_name, midx, row.pct_owned});
                const std::string key = normalize_name(row.raw_name);
                present.insert(key);
                last_by_key[key] = {row.raw_name, row.pct_owned};
            }
            for (auto& [key, last] : last_by_key) {
                if (present.count(key) || last.second <= 0.0) continue;
                out.push_back({firm_id, last.first, midx, 0.0});
                last.second = 0.0;
                if (log) {
                    log->notes.push_back("implicit zero for " + firm_id + "/" + key +
                                         " at month " + std::to_string(midx) +
                                         " (absent from table)");
                }
            }
        }
    }
    return out;
}

std::vector<OwnershipSeries> build_series(
    const std::vector<OwnershipObservation>& observations) {
    struct Acc {
        std::optional<double> pre;
        std::map<MonthIndex, double> by_month;
    };
    std::map<std::pair<std::string, std::string>, Acc> acc;
    for (const auto& obs : observations) {
        auto& a = acc[{obs.firm_id, normalize_name(obs.vc_raw_name)}];
        if (!obs.report_month) {
            a.pre = a.pre.value_or(0.0) + obs.pct_owned;
        } else {
            a.by_month[*obs.report_month] += obs.pct_owned;
        }
    }
    std::vector<OwnershipSeries> out;
    for (auto& [key, a] : acc) {
        OwnershipSeries s;
        s.firm_id = key.first;
        s.canonical_key = key.second;
        if (a.pre) s.pre_ipo_pct = std::min(100.0, *a.pre);
        for (const auto& [m, pct] : a.by_month) {
            s.points.emplace_back(m, std::min(100.0, pct));
        }
        out.push_back(std::move(s));
    }
    return out;
}

// --- CSV ---------------------------------------------------------------------

namespace {

std::vector<std::string> parse_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::vector<OwnershipCsvRow> load_ownership_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open ownership file: " + path.string());
    }
    std::vector<OwnershipCsvRow> rows;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (line_no == 1) {
            continue;  // header
        }
        auto fields = parse_csv_line(line);
        if (fields.size() != 4) {
            throw InputError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 4 columns, got " +
                             std::to_string(fields.size()));
        }
        OwnershipCsvRow row;
        row.firm_id = fields[0];
        row.vc_raw_name = fields[1];
        row.report_month = fields[2];
        try {
            row.pct_owned = std::stod(fields[3]);
        } catch (const std::exception&) {
            throw InputError(path.string() + ":" + std::to_string(line_no) +
                             ": bad percentage '" + fields[3] + "'");
        }
        if (row.pct_owned < 0.0 || row.pct_owned > 100.0) {
            throw InputError(path.string() + ":" + std::to_string(line_no) +
                             ": percentage outside [0, 100]");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void save_ownership_csv(const std::vector<OwnershipCsvRow>& rows,
                        const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("cannot write ownership file: " + path.string());
    }
    out << "firm_id,vc_raw_name,report_month,pct_owned\n";
    char pct[32];
    for (const auto& row : rows) {
        std::snprintf(pct, sizeof(pct), "%.6f", row.pct_owned);
        out << csv_escape(row.firm_id) << ',' << csv_escape(row.vc_raw_name) << ','
            << row.report_month << ',' << pct << '\n';
    }
}

std::vector<OwnershipObservation> observations_from_csv_rows(
    const std::vector<OwnershipCsvRow>& rows, const std::vector<pit::FirmInfo>& firms) {
    std::map<std::string, int> lockup;
    for (const auto& f : firms) lockup[f.firm_id] = f.lockup_expiration_month.linear();

    std::vector<OwnershipObservation> out;
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    for (const auto& row : rows) {
        auto it = lockup.find(row.firm_id);
        if (it == lockup.end()) {
            throw InputError("ownership row names unknown firm '" + row.firm_id + "'");
        }
        if (!seen.insert({row.firm_id, row.vc_raw_name, row.report_month}).second) {
            continue;  // duplicate (firm, name, month): first row wins
        }
        OwnershipObservation obs;
        obs.firm_id = row.firm_id;
        obs.vc_raw_name = row.vc_raw_name;
        obs.pct_owned = row.pct_owned;
        if (row.report_month == "PRE_IPO") {
            obs.report_month = std::nullopt;
        } else {
            const int midx = parse_year_month(row.report_month).linear() - it->second;
            obs.report_month = midx < 0 ? std::optional<MonthIndex>() : midx;
        }
        out.push_back(std::move(obs));
    }
    return out;
}

}  // namespace exitbench::filings
