#include "exitbench/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace exitbench::eval {

const char* to_string(ExitDefinition d) {
    return d == ExitDefinition::threshold ? "threshold" : "full";
}

std::optional<ExitDefinition> exit_definition_from_string(std::string_view name) {
    if (name == "threshold") return ExitDefinition::threshold;
    if (name == "full") return ExitDefinition::full;
    return std::nullopt;
}

const char* to_string(ExitTrigger t) {
    switch (t) {
        case ExitTrigger::ExitNow: return "ExitNow";
        case ExitTrigger::WindowStart: return "WindowStart";
        case ExitTrigger::Censored: return "Censored";
    }
    return "unknown";
}

const char* to_string(Direction d) {
    switch (d) {
        case Direction::Early: return "Early";
        case Direction::Late: return "Late";
        case Direction::Same: return "Same";
    }
    return "unknown";
}

ImpliedExit derive_implied_exit(const std::vector<agents::Decision>& decisions,
                                MonthIndex horizon) {
    if (decisions.empty()) {
        throw EmptySequenceError("derive_implied_exit: empty decision sequence");
    }
    for (size_t t = 0; t < decisions.size(); ++t) {
        const auto& d = decisions[t];
        if (d.kind == agents::Decision::Kind::ExitNow) {
            return {static_cast<MonthIndex>(t), false, ExitTrigger::ExitNow};
        }
        if (d.kind == agents::Decision::Kind::ExitWithin) {
            return {static_cast<MonthIndex>(t), false, ExitTrigger::WindowStart};
        }
    }
    return {horizon, true, ExitTrigger::Censored};
}

ExitComparison compare_exit(const ImpliedExit& implied,
                            const filings::ActualExitRecord& actual,
                            const ReturnSeries& series,
                            ExitDefinition exit_definition) {
    std::optional<MonthIndex> vc_month =
        exit_definition == ExitDefinition::threshold ? actual.threshold_cross_month
                                                     : actual.full_exit_month;
    if (!vc_month) {
        throw MissingActualExitError(
            "pair " + actual.firm_id + "/" + actual.canonical_key + " has no " +
            std::string(to_string(exit_definition)) + " exit month");
    }
    ExitComparison cmp;
    cmp.firm_id = actual.firm_id;
    cmp.entity = actual.canonical_key;
    cmp.llm_exit_month = implied.exit_month;
    cmp.vc_exit_month = *vc_month;
    cmp.r_llm = cumulative_return(series, 0, implied.exit_month);
    cmp.r_vc = cumulative_return(series, 0, *vc_month);
    cmp.delta_r = cmp.r_llm - cmp.r_vc;
    cmp.timing_error_months = implied.exit_month - *vc_month;
    cmp.direction = cmp.timing_error_months < 0   ? Direction::Early
                    : cmp.timing_error_months > 0 ? Direction::Late
                                                  : Direction::Same;
    cmp.censored = implied.censored;
    return cmp;
}

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

GroupRow make_group_row(const std::string& key, const std::vector<double>& deltas) {
    GroupRow row;
    row.key = key;
    row.n_pairs = static_cast<int>(deltas.size());
    double sum = 0.0;
    int positive = 0;
    for (double d : deltas) {
        sum += d;
        if (d > 0.0) ++positive;
    }
    row.mean_delta_r = sum / static_cast<double>(deltas.size());
    row.median_delta_r = median_of(deltas);
    row.share_positive_delta_r =
        100.0 * positive / static_cast<double>(deltas.size());
    return row;
}

std::vector<GroupRow> rows_of(const std::map<std::string, std::vector<double>>& groups) {
    std::vector<GroupRow> rows;
    for (const auto& [key, deltas] : groups) {
        rows.push_back(make_group_row(key, deltas));
    }
    return rows;
}

}  // namespace

SummaryReport summarize_comparisons(
    const std::vector<ExitComparison>& pairs,
    const std::map<std::string, FirmMeta>& firm_meta,
    const std::map<std::string, filings::ReputationTier>& reputation_by_entity) {
    if (pairs.empty()) {
        throw EmptyInputError("summarize_comparisons: no pairs");
    }
    SummaryReport report;
    report.n_pairs = static_cast<int>(pairs.size());

    std::vector<double> deltas;
    double abs_timing_sum = 0.0;
    int early = 0, late = 0, same = 0, positive = 0;
    std::map<std::string, std::vector<double>> by_industry, by_vol, by_rep;
    std::map<std::string, std::pair<int, int>> firm_counts;  // firm -> (positive, total)

    for (const auto& p : pairs) {
        deltas.push_back(p.delta_r);
        abs_timing_sum += std::abs(p.timing_error_months);
        if (p.censored) ++report.n_censored;
        if (p.delta_r > 0.0) ++positive;
        switch (p.direction) {
            case Direction::Early: ++early; break;
            case Direction::Late: ++late; break;
            case Direction::Same: ++same; break;
        }

        std::string industry = "unknown";
        std::string vol = "vol_unknown";
        auto meta_it = firm_meta.find(p.firm_id);
        if (meta_it != firm_meta.end()) {
            if (!meta_it->second.industry.empty()) industry = meta_it->second.industry;
            if (meta_it->second.volatility_tercile) {
                static const char* kTercile[] = {"vol_low", "vol_mid", "vol_high"};
                const int g = *meta_it->second.volatility_tercile;
                if (g >= 0 && g <= 2) vol = kTercile[g];
            }
        }
        std::string rep = "unlabeled";
        auto rep_it = reputation_by_entity.find(p.entity);
        if (rep_it != reputation_by_entity.end()) {
            rep = rep_it->second == filings::ReputationTier::high ? "high" : "other";
        }
        by_industry[industry].push_back(p.delta_r);
        by_vol[vol].push_back(p.delta_r);
        by_rep[rep].push_back(p.delta_r);

        auto& fc = firm_counts[p.firm_id];
        if (p.delta_r > 0.0) ++fc.first;
        ++fc.second;
    }

    const double n = static_cast<double>(pairs.size());
    double delta_sum = std::accumulate(deltas.begin(), deltas.end(), 0.0);
    report.mean_delta_r = delta_sum / n;
    report.median_delta_r = median_of(deltas);
    report.share_positive_delta_r = 100.0 * positive / n;
    report.mean_abs_timing_error = abs_timing_sum / n;
    report.pct_early = 100.0 * early / n;
    report.pct_late = 100.0 * late / n;
    report.pct_same = 100.0 * same / n;

    int majority_firms = 0;
    for (const auto& [firm, counts] : firm_counts) {
        if (2 * counts.first > counts.second) ++majority_firms;
    }
    report.pct_firms_majority_positive =
        100.0 * majority_firms / static_cast<double>(firm_counts.size());

    report.by_industry = rows_of(by_industry);
    report.by_volatility = rows_of(by_vol);
    report.by_reputation = rows_of(by_rep);
    return report;
}

std::map<std::string, int> volatility_terciles(
    const std::map<std::string, double>& vol_by_firm) {
    std::vector<std::pair<double, std::string>> order;
    for (const auto& [firm, vol] : vol_by_firm) {
        order.emplace_back(vol, firm);
    }
    std::sort(order.begin(), order.end());
    std::map<std::string, int> out;
    const size_t n = order.size();
    for (size_t rank = 0; rank < n; ++rank) {
        out[order[rank].second] = static_cast<int>(rank * 3 / n);
    }
    return out;
}

namespace {

std::vector<double> tie_ranks(const std::vector<MonthIndex>& values) {
    const size_t n = values.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double hazard_correspondence(const std::vector<MonthIndex>& implied_exits,
                             const std::vector<MonthIndex>& hazard_exits) {
    if (implied_exits.size() != hazard_exits.size() || implied_exits.size() < 2) {
        throw LengthMismatchError("hazard_correspondence: lists must align and have "
                                  "length >= 2");
    }
    const auto ra = tie_ranks(implied_exits);
    const auto rb = tie_ranks(hazard_exits);
    const double n = static_cast<double>(ra.size());
    double mean_a = 0.0, mean_b = 0.0;
    for (size_t i = 0; i < ra.size(); ++i) {
        mean_a += ra[i];
        mean_b += rb[i];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (size_t i = 0; i < ra.size(); ++i) {
        const double da = ra[i] - mean_a;
        const double db = rb[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a <= 0.0 || var_b <= 0.0) {
        throw DegenerateInputError("hazard_correspondence: all months identical on "
                                   "one side");
    }
    return cov / std::sqrt(var_a * var_b);
}

// --- serialization -------------------------------------------------------------

namespace {

std::string fmt6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", x);
    return buf;
}

std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

void write_rows(std::ostringstream& out, const char* name,
                const std::vector<GroupRow>& rows, bool trailing_comma) {
    out << "  " << quote(name) << ": [";
    for (size_t i = 0; i < rows.size(); ++i) {
        if (i) out << ',';
        out << "\n    {\"key\": " << quote(rows[i].key)
            << ", \"n_pairs\": " << rows[i].n_pairs
            << ", \"mean_delta_r\": " << fmt6(rows[i].mean_delta_r)
            << ", \"median_delta_r\": " << fmt6(rows[i].median_delta_r)
            << ", \"share_positive_delta_r\": " << fmt6(rows[i].share_positive_delta_r)
            << "}";
    }
    if (!rows.empty()) out << "\n  ";
    out << "]" << (trailing_comma ? ",\n" : "\n");
}

}  // namespace

std::string summary_to_json(const SummaryReport& report) {
    std::ostringstream out;
    out << "{\n";
    out << "  \"n_pairs\": " << report.n_pairs << ",\n";
    out << "  \"n_censored\": " << report.n_censored << ",\n";
    out << "  \"mean_delta_r\": " << fmt6(report.mean_delta_r) << ",\n";
    out << "  \"median_delta_r\": " << fmt6(report.median_delta_r) << ",\n";
    out << "  \"share_positive_delta_r\": " << fmt6(report.share_positive_delta_r)
        << ",\n";
    out << "  \"mean_abs_timing_error\": " << fmt6(report.mean_abs_timing_error)
        << ",\n";
    out << "  \"pct_early\": " << fmt6(report.pct_early) << ",\n";
    out << "  \"pct_late\": " << fmt6(report.pct_late) << ",\n";
    out << "  \"pct_same\": " << fmt6(report.pct_same) << ",\n";
    out << "  \"pct_firms_majority_positive\": "
        << fmt6(report.pct_firms_majority_positive) << ",\n";
    out << "  \"hazard_correspondence\": "
        << (report.hazard_correspondence ? fmt6(*report.hazard_correspondence)
                                         : std::string("null"))
        << ",\n";
    write_rows(out, "by_industry", report.by_industry, true);
    write_rows(out, "by_volatility", report.by_volatility, true);
    write_rows(out, "by_reputation", report.by_reputation, false);
    out << "}\n";
    return out.str();
}

// --- robustness cells ------------------------------------------------------------

std::string theory_set_label(const std::vector<agents::TheoryId>& ids) {
    if (ids.empty()) return "none";
    std::vector<agents::TheoryId> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::string out;
    for (size_t i = 0; i < sorted.size(); ++i) {
        if (i) out += '+';
        out += agents::to_string(sorted[i]);
    }
    return out;
}

std::string decision_cell_id(const std::string& model, const std::string& template_id,
                             const std::vector<agents::TheoryId>& theory) {
    return "model=" + model + "__template=" + template_id + "__theory=" +
           theory_set_label(theory);
}

std::string eval_cell_id(const std::string& decision_cell, ExitDefinition def,
                         bool volatility_filter) {
    return decision_cell + "__exitdef=" + to_string(def) + "__vol=" +
           (volatility_filter ? "on" : "off");
}

}  // namespace exitbench::eval
