#include "exitbench/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "exitbench/digest.hpp"
#include "exitbench/manifest.hpp"

namespace exitbench::cli {

namespace {

std::string fmt6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", x);
    return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << content;
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

// "DECISION: HOLD" -> "HOLD"
std::string decision_token(const agents::Decision& d) {
    return agents::render_decision(d).substr(10);
}

std::vector<pit::FirmInfo> firms_of(const pit::Timeline& timeline) {
    std::vector<pit::FirmInfo> firms;
    for (const auto& [id, info] : timeline.firm_directory()) {
        firms.push_back(info);
    }
    return firms;
}

std::map<std::string, filings::ReputationTier> load_reputation(
    const std::filesystem::path& path) {
    std::map<std::string, filings::ReputationTier> out;
    if (path.empty()) return out;
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open reputation file: " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw InputError(path.string() + ": expected an object of name -> tier");
    }
    for (const auto& [name, tier] : doc.items()) {
        const std::string value = tier.get<std::string>();
        if (value != "high" && value != "other") {
            throw InputError(path.string() + ": tier for '" + name +
                             "' must be 'high' or 'other'");
        }
        out[filings::normalize_name(name)] = value == "high"
                                                 ? filings::ReputationTier::high
                                                 : filings::ReputationTier::other;
    }
    return out;
}

}  // namespace

// --- ingest ----------------------------------------------------------------------

int cmd_ingest(const RunConfig& config, std::ostream& log) {
    const auto firms = pit::load_firms_json(config.firms_path);
    auto records = pit::load_events_jsonl(config.events_path, firms);
    const auto timeline =
        pit::Timeline::ingest(std::move(records), firms, config.horizon);
    const auto violations = pit::validate_timeline(timeline);

    std::filesystem::create_directories(config.out_dir);
    pit::save_timeline_store(timeline, config.out_dir / "timeline.json");

    std::string report;
    for (const auto& v : violations) {
        report += v.message() + "\n";
    }
    write_text_file(config.out_dir / "validation.txt", report);

    RunManifest manifest;
    manifest.command = "ingest";
    manifest.config_digest = config_digest(config);
    manifest.input_digests["events.jsonl"] = sha256_file_hex(config.events_path);
    manifest.input_digests["firms.json"] = sha256_file_hex(config.firms_path);
    manifest.record_counts["firms"] = timeline.firms().size();
    manifest.record_counts["events"] = timeline.event_count();
    manifest.record_counts["violations"] = violations.size();
    save_manifest(manifest, config.out_dir);

    log << "ingest: " << timeline.firms().size() << " firms, "
        << timeline.event_count() << " events, " << violations.size()
        << " violations\n";
    for (const auto& v : violations) {
        log << "  violation: " << v.message() << "\n";
    }
    return violations.empty() ? kExitOk : kExitValidationFailure;
}

// --- extract ---------------------------------------------------------------------

namespace {

std::string exit_summary_to_json(const filings::ExitSummary& s) {
    std::ostringstream out;
    out << "{\n";
    out << "  \"n_records\": " << s.n_records << ",\n";
    out << "  \"n_firms\": " << s.n_firms << ",\n";
    out << "  \"n_vcs\": " << s.n_vcs << ",\n";
    out << "  \"pct_complete\": " << fmt6(s.pct_complete) << ",\n";
    out << "  \"pct_partial\": " << fmt6(s.pct_partial) << ",\n";
    out << "  \"pct_no_exit\": " << fmt6(s.pct_no_exit) << ",\n";
    out << "  \"median_first_action_months\": "
        << (s.median_first_action_months ? fmt6(*s.median_first_action_months)
                                         : std::string("null"))
        << ",\n";
    out << "  \"median_full_exit_months\": "
        << (s.median_full_exit_months ? fmt6(*s.median_full_exit_months)
                                      : std::string("null"))
        << "\n";
    out << "}\n";
    return out.str();
}

}  // namespace

int cmd_extract(const RunConfig& config, std::ostream& log) {
    const auto firms = pit::load_firms_json(config.firms_path);
    const auto refs = filings::scan_filings_dir(config.filings_dir);

    filings::ObservationLog obs_log;
    const auto observations =
        filings::build_observations(refs, firms, {}, &obs_log);

    std::map<std::string, YearMonth> lockup;
    for (const auto& f : firms) lockup[f.firm_id] = f.lockup_expiration_month;

    std::vector<filings::OwnershipCsvRow> rows;
    for (const auto& obs : observations) {
        filings::OwnershipCsvRow row;
        row.firm_id = obs.firm_id;
        row.vc_raw_name = obs.vc_raw_name;
        row.report_month =
            obs.report_month
                ? add_months(lockup.at(obs.firm_id), *obs.report_month).str()
                : "PRE_IPO";
        row.pct_owned = obs.pct_owned;
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        const int a_pre = a.report_month == "PRE_IPO" ? 0 : 1;
        const int b_pre = b.report_month == "PRE_IPO" ? 0 : 1;
        return std::tie(a.firm_id, a_pre, a.report_month, a.vc_raw_name) <
               std::tie(b.firm_id, b_pre, b.report_month, b.vc_raw_name);
    });
    std::filesystem::create_directories(config.out_dir);
    if (config.ownership_path.has_parent_path()) {
        std::filesystem::create_directories(config.ownership_path.parent_path());
    }
    filings::save_ownership_csv(rows, config.ownership_path);

    const auto reputation = load_reputation(config.reputation_path);
    auto entities = filings::link_aliases(observations);
    nlohmann::json entities_doc = nlohmann::json::array();
    for (auto& entity : entities) {
        auto rep_it = reputation.find(entity.canonical_key);
        if (rep_it != reputation.end()) entity.reputation_tier = rep_it->second;
        nlohmann::json item;
        item["canonical_key"] = entity.canonical_key;
        item["aliases"] = entity.aliases;
        item["reputation_tier"] =
            entity.reputation_tier
                ? nlohmann::json(entity.reputation_tier == filings::ReputationTier::high
                                     ? "high"
                                     : "other")
                : nlohmann::json(nullptr);
        entities_doc.push_back(std::move(item));
    }
    write_text_file(config.out_dir / "entities.json", entities_doc.dump(2) + "\n");

    const auto series = filings::build_series(observations);
    std::vector<filings::ActualExitRecord> exits;
    for (const auto& s : series) {
        exits.push_back(filings::derive_actual_exit(
            s, config.threshold_pct, config.horizon, config.materiality_delta_pp));
    }
    filings::ExitSummary summary;  // zeroed when the corpus is empty
    if (!exits.empty()) {
        summary = filings::summarize_exits(exits);
    } else {
        log << "extract: warning: no VC ownership observations found\n";
    }
    write_text_file(config.out_dir / "exit_summary.json", exit_summary_to_json(summary));

    std::string note_text;
    for (const auto& note : obs_log.notes) note_text += note + "\n";
    write_text_file(config.out_dir / "extraction_log.txt", note_text);

    RunManifest manifest;
    manifest.command = "extract";
    manifest.config_digest = config_digest(config);
    manifest.input_digests["firms.json"] = sha256_file_hex(config.firms_path);
    for (const auto& ref : refs) {
        manifest.input_digests["filings/" + ref.path.filename().string()] =
            sha256_file_hex(ref.path);
    }
    if (!config.reputation_path.empty()) {
        manifest.input_digests["reputation.json"] =
            sha256_file_hex(config.reputation_path);
    }
    manifest.record_counts["filings"] = refs.size();
    manifest.record_counts["observations"] = observations.size();
    manifest.record_counts["entities"] = entities.size();
    manifest.record_counts["pairs"] = exits.size();
    save_manifest(manifest, config.out_dir);

    log << "extract: " << refs.size() << " filings, " << observations.size()
        << " observations, " << entities.size() << " entities, " << exits.size()
        << " VC-firm pairs\n";
    if (!exits.empty()) {
        log << "  complete " << fmt6(summary.pct_complete) << "% / partial "
            << fmt6(summary.pct_partial) << "% / none " << fmt6(summary.pct_no_exit)
            << "%\n";
    }
    return kExitOk;
}

// --- backtest --------------------------------------------------------------------

namespace {

struct DecisionRow {
    std::string firm_id;
    pit::MonthIndex month;
    agents::AgentDecision ad;
};

struct BacktestOutcome {
    std::vector<DecisionRow> rows;                              // sorted (firm, month)
    std::vector<std::pair<std::string, std::string>> failures;  // firm -> error
    agents::ClientStats stats;
};

BacktestOutcome run_backtest(const pit::Timeline& timeline, const RunConfig& config,
                             const agents::AgentConfig& agent_config) {
    agents::validate_agent_config(agent_config);

    agents::AgentRuntime runtime;
    if (agent_config.kind == agents::AgentKind::llm) {
        runtime.prompt_template =
            agents::load_template(config.templates_dir, *agent_config.template_id);
        runtime.theory = agents::theory_blocks_for(agent_config.theory_ids);
        agents::ClientConfig client = config.client;
        client.model_name = *agent_config.model_name;
        client.temperature = agent_config.temperature;
        client.cache_dir = config.cache_dir;
        client.max_in_flight = config.max_in_flight;
        runtime.client = std::make_shared<agents::LlmClient>(client);
    }

    const std::vector<std::string> firm_list(timeline.firms().begin(),
                                             timeline.firms().end());
    const pit::MonthIndex bound =
        std::min(config.horizon, timeline.horizon() + 1);

    struct FirmOutcome {
        std::vector<DecisionRow> rows;
        std::string error;  // empty on success
    };
    std::vector<FirmOutcome> outcomes(firm_list.size());
    std::atomic<size_t> cursor{0};

    auto worker = [&] {
        for (size_t i = cursor.fetch_add(1); i < firm_list.size();
             i = cursor.fetch_add(1)) {
            const std::string& firm = firm_list[i];
            try {
                auto agent = agents::make_agent(agent_config, runtime, firm);
                for (pit::MonthIndex t = 0; t < bound; ++t) {
                    auto packet = timeline.as_of(firm, t);
                    auto decision = agent->decide(packet);
                    outcomes[i].rows.push_back({firm, t, decision});
                    if (decision.decision.recommends_exit()) break;
                }
            } catch (const std::exception& e) {
                outcomes[i].rows.clear();
                outcomes[i].error = e.what();
            }
        }
    };
    const size_t n_workers = std::max<size_t>(
        1, std::min<size_t>(static_cast<size_t>(config.max_in_flight),
                            firm_list.size()));
    std::vector<std::thread> pool;
    for (size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    BacktestOutcome outcome;
    for (size_t i = 0; i < firm_list.size(); ++i) {
        if (!outcomes[i].error.empty()) {
            outcome.failures.emplace_back(firm_list[i], outcomes[i].error);
        } else {
            for (auto& row : outcomes[i].rows) outcome.rows.push_back(std::move(row));
        }
    }
    if (runtime.client) outcome.stats = runtime.client->stats();
    return outcome;
}

std::string decisions_to_jsonl(const std::vector<DecisionRow>& rows) {
    std::string out;
    for (const auto& row : rows) {
        nlohmann::json line = {{"firm_id", row.firm_id},
                               {"month", row.month},
                               {"decision", decision_token(row.ad.decision)},
                               {"prompt_digest", row.ad.prompt_digest},
                               {"note", row.ad.note}};
        out += line.dump() + "\n";
    }
    return out;
}

struct DecisionCell {
    std::string model;
    std::string template_id;
    std::vector<agents::TheoryId> theory;
    std::string id;
};

bool has_decision_axes(const RunConfig& config) {
    return !config.decision_axes.models.empty() ||
           !config.decision_axes.templates.empty() ||
           !config.decision_axes.theory_sets.empty();
}

std::vector<DecisionCell> decision_cells(const RunConfig& config) {
    std::vector<std::string> models = config.decision_axes.models;
    if (models.empty()) models = {config.agent.model_name.value_or("default")};
    std::vector<std::string> templates = config.decision_axes.templates;
    if (templates.empty()) templates = {config.agent.template_id.value_or("default")};
    std::vector<std::vector<agents::TheoryId>> theory_sets =
        config.decision_axes.theory_sets;
    if (theory_sets.empty()) theory_sets = {config.agent.theory_ids};

    std::sort(models.begin(), models.end());
    std::sort(templates.begin(), templates.end());
    std::sort(theory_sets.begin(), theory_sets.end(),
              [](const auto& a, const auto& b) {
                  return eval::theory_set_label(a) < eval::theory_set_label(b);
              });

    std::vector<DecisionCell> cells;
    for (const auto& model : models) {
        for (const auto& tmpl : templates) {
            for (const auto& theory : theory_sets) {
                DecisionCell cell{model, tmpl, theory,
                                  eval::decision_cell_id(model, tmpl, theory)};
                cells.push_back(std::move(cell));
            }
        }
    }
    std::sort(cells.begin(), cells.end(),
              [](const DecisionCell& a, const DecisionCell& b) { return a.id < b.id; });
    return cells;
}

// Earliest recorded VC exit month per firm under the configured definition;
// what the replay_actual agent replays.
std::map<std::string, pit::MonthIndex> replay_months_from_ownership(
    const RunConfig& config, const pit::Timeline& timeline) {
    const auto rows = filings::load_ownership_csv(config.ownership_path);
    const auto observations =
        filings::observations_from_csv_rows(rows, firms_of(timeline));
    std::map<std::string, pit::MonthIndex> out;
    for (const auto& series : filings::build_series(observations)) {
        const auto rec = filings::derive_actual_exit(
            series, config.threshold_pct, config.horizon, config.materiality_delta_pp);
        const auto month = config.exit_definition == eval::ExitDefinition::threshold
                               ? rec.threshold_cross_month
                               : rec.full_exit_month;
        if (!month) continue;
        auto it = out.find(rec.firm_id);
        if (it == out.end() || *month < it->second) out[rec.firm_id] = *month;
    }
    return out;
}

}  // namespace

int cmd_backtest(const RunConfig& config, std::ostream& log) {
    const auto timeline = pit::load_timeline_store(config.out_dir / "timeline.json");

    agents::AgentConfig base_agent = config.agent;
    if (base_agent.kind == agents::AgentKind::replay_actual) {
        base_agent.replay_exit_months = replay_months_from_ownership(config, timeline);
    }

    RunManifest manifest;
    manifest.command = "backtest";
    manifest.config_digest = config_digest(config);
    manifest.input_digests["timeline.json"] =
        sha256_file_hex(config.out_dir / "timeline.json");
    if (base_agent.kind == agents::AgentKind::replay_actual) {
        manifest.input_digests["ownership.csv"] =
            sha256_file_hex(config.ownership_path);
    }

    std::vector<std::tuple<std::string, std::string, std::string>> failures;
    uint64_t cache_hits = 0, cache_misses = 0;

    auto record = [&](const std::string& cell, const BacktestOutcome& outcome) {
        for (const auto& [firm, error] : outcome.failures) {
            failures.emplace_back(cell, firm, error);
        }
        cache_hits += outcome.stats.cache_hits;
        cache_misses += outcome.stats.cache_misses;
    };

    const auto base_outcome = run_backtest(timeline, config, base_agent);
    std::filesystem::create_directories(config.out_dir);
    write_text_file(config.out_dir / "decisions.jsonl",
                    decisions_to_jsonl(base_outcome.rows));
    record("base", base_outcome);
    if (base_agent.kind == agents::AgentKind::llm) {
        manifest.input_digests["templates/" + *base_agent.template_id + ".txt"] =
            sha256_file_hex(config.templates_dir /
                            (*base_agent.template_id + ".txt"));
    }

    size_t n_cells = 0;
    if (config.matrix_enabled() && has_decision_axes(config)) {
        for (const auto& cell : decision_cells(config)) {
            agents::AgentConfig cell_agent = base_agent;
            cell_agent.model_name = cell.model;
            cell_agent.template_id = cell.template_id;
            cell_agent.theory_ids = cell.theory;
            const auto outcome = run_backtest(timeline, config, cell_agent);
            write_text_file(config.out_dir / "decisions" / (cell.id + ".jsonl"),
                            decisions_to_jsonl(outcome.rows));
            record(cell.id, outcome);
            if (cell_agent.kind == agents::AgentKind::llm) {
                manifest.input_digests["templates/" + cell.template_id + ".txt"] =
                    sha256_file_hex(config.templates_dir /
                                    (cell.template_id + ".txt"));
            }
            ++n_cells;
        }
    }

    std::sort(failures.begin(), failures.end());
    std::string failures_csv = "cell,firm_id,error\n";
    for (const auto& [cell, firm, error] : failures) {
        failures_csv += csv_escape(cell) + "," + csv_escape(firm) + "," +
                        csv_escape(error) + "\n";
    }
    write_text_file(config.out_dir / "failures.csv", failures_csv);

    manifest.record_counts["firms"] = timeline.firms().size();
    manifest.record_counts["decisions"] = base_outcome.rows.size();
    manifest.record_counts["decision_cells"] = n_cells;
    manifest.record_counts["failures"] = failures.size();
    manifest.cache_hits = cache_hits;
    manifest.cache_misses = cache_misses;
    save_manifest(manifest, config.out_dir);

    log << "backtest: " << base_outcome.rows.size() << " decisions for "
        << timeline.firms().size() << " firms";
    if (n_cells) log << ", " << n_cells << " matrix cells";
    log << ", " << failures.size() << " failures\n";
    for (const auto& [cell, firm, error] : failures) {
        log << "  failure [" << cell << "] " << firm << ": " << error << "\n";
    }
    return failures.empty() ? kExitOk : kExitPartialFailure;
}

// --- evaluate --------------------------------------------------------------------

namespace {

std::map<std::string, std::vector<agents::Decision>> load_decisions_file(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open decisions file: " + path.string() +
                         " (run backtest first)");
    }
    std::map<std::string, std::map<pit::MonthIndex, agents::Decision>> staged;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw InputError(path.string() + ":" + std::to_string(line_no) +
                             ": not a JSON object");
        }
        std::string firm;
        pit::MonthIndex month = 0;
        std::string token;
        try {
            firm = obj.at("firm_id").get<std::string>();
            month = obj.at("month").get<int>();
            token = obj.at("decision").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw InputError(path.string() + ":" + std::to_string(line_no) + ": " +
                             e.what());
        }
        const auto parsed = agents::parse_decision("DECISION: " + token);
        if (!parsed.ok()) {
            throw InputError(path.string() + ":" + std::to_string(line_no) +
                             ": bad decision token '" + token + "'");
        }
        if (!staged[firm].emplace(month, *parsed.decision).second) {
            throw InputError(path.string() + ":" + std::to_string(line_no) +
                             ": duplicate month " + std::to_string(month) +
                             " for firm " + firm);
        }
    }
    std::map<std::string, std::vector<agents::Decision>> out;
    for (const auto& [firm, months] : staged) {
        pit::MonthIndex expected = 0;
        for (const auto& [month, decision] : months) {
            if (month != expected) {
                throw InputError(path.string() + ": decisions for " + firm +
                                 " skip month " + std::to_string(expected));
            }
            out[firm].push_back(decision);
            ++expected;
        }
    }
    return out;
}

struct SkipRow {
    std::string firm_id;
    std::string entity;
    std::string reason;
};

struct CellResult {
    std::vector<eval::ExitComparison> pairs;
    std::vector<SkipRow> skips;
    eval::SummaryReport summary;
    bool has_pairs = false;
    bool had_errors = false;
};

struct EvalContext {
    std::vector<filings::ActualExitRecord> actuals;
    std::map<std::string, eval::ReturnSeries> series;    // firms with prices
    std::map<std::string, std::string> series_errors;    // firms without
    std::map<std::string, eval::FirmMeta> firm_meta;
    std::map<std::string, filings::ReputationTier> reputation;
};

EvalContext build_eval_context(const RunConfig& config, const pit::Timeline& timeline) {
    EvalContext ctx;
    const auto rows = filings::load_ownership_csv(config.ownership_path);
    const auto observations =
        filings::observations_from_csv_rows(rows, firms_of(timeline));
    for (const auto& series : filings::build_series(observations)) {
        ctx.actuals.push_back(filings::derive_actual_exit(
            series, config.threshold_pct, config.horizon, config.materiality_delta_pp));
    }

    std::map<std::string, double> vol;
    for (const auto& firm : timeline.firms()) {
        try {
            auto series = eval::returns_from_timeline(timeline, firm);
            vol[firm] = eval::monthly_volatility(series, config.horizon);
            ctx.series.emplace(firm, std::move(series));
        } catch (const Error& e) {
            ctx.series_errors[firm] = e.what();
        }
    }
    const auto terciles = eval::volatility_terciles(vol);
    for (const auto& [firm, info] : timeline.firm_directory()) {
        eval::FirmMeta meta;
        meta.industry = info.industry;
        auto it = terciles.find(firm);
        if (it != terciles.end()) meta.volatility_tercile = it->second;
        ctx.firm_meta[firm] = meta;
    }
    ctx.reputation = load_reputation(config.reputation_path);
    return ctx;
}

std::optional<double> hazard_corr_for(
    const RunConfig& config, const std::vector<eval::ExitComparison>& pairs) {
    if (config.agent.hazard_points.empty() || pairs.size() < 2) return std::nullopt;
    pit::MonthIndex peak = config.agent.hazard_points.front().first;
    double peak_rate = config.agent.hazard_points.front().second;
    for (const auto& [month, rate] : config.agent.hazard_points) {
        if (rate > peak_rate || (rate == peak_rate && month < peak)) {
            peak_rate = rate;
            peak = month;
        }
    }
    const pit::MonthIndex hazard_exit = std::min(peak + 1, config.horizon);
    std::vector<pit::MonthIndex> implied, hazard;
    for (const auto& p : pairs) {
        implied.push_back(p.llm_exit_month);
        hazard.push_back(hazard_exit);
    }
    try {
        return eval::hazard_correspondence(implied, hazard);
    } catch (const Error&) {
        return std::nullopt;  // constant exits: correspondence undefined
    }
}

CellResult evaluate_cell(const EvalContext& ctx,
                         const std::map<std::string, std::vector<agents::Decision>>& decisions,
                         const RunConfig& config, eval::ExitDefinition def,
                         bool vol_filter) {
    CellResult result;
    std::map<std::string, eval::ImpliedExit> implied_by_firm;

    for (const auto& rec : ctx.actuals) {
        auto dec_it = decisions.find(rec.firm_id);
        if (dec_it == decisions.end()) {
            result.skips.push_back({rec.firm_id, rec.canonical_key,
                                    "no decisions for firm"});
            continue;
        }
        auto err_it = ctx.series_errors.find(rec.firm_id);
        if (err_it != ctx.series_errors.end()) {
            result.skips.push_back({rec.firm_id, rec.canonical_key,
                                    "error: " + err_it->second});
            result.had_errors = true;
            continue;
        }
        if (vol_filter) {
            auto meta_it = ctx.firm_meta.find(rec.firm_id);
            if (meta_it != ctx.firm_meta.end() &&
                meta_it->second.volatility_tercile == 2) {
                result.skips.push_back({rec.firm_id, rec.canonical_key,
                                        "volatility filter"});
                continue;
            }
        }

        auto implied_it = implied_by_firm.find(rec.firm_id);
        if (implied_it == implied_by_firm.end()) {
            auto seq = dec_it->second;
            if (static_cast<pit::MonthIndex>(seq.size()) > config.horizon) {
                seq.resize(static_cast<size_t>(config.horizon));
            }
            implied_it =
                implied_by_firm
                    .emplace(rec.firm_id,
                             eval::derive_implied_exit(seq, config.horizon))
                    .first;
        }
        const auto& implied = implied_it->second;
        if (config.exclude_censored && implied.censored) {
            result.skips.push_back({rec.firm_id, rec.canonical_key,
                                    "censored implied exit"});
            continue;
        }
        try {
            result.pairs.push_back(eval::compare_exit(
                implied, rec, ctx.series.at(rec.firm_id), def));
        } catch (const eval::MissingActualExitError& e) {
            result.skips.push_back({rec.firm_id, rec.canonical_key, e.what()});
        } catch (const Error& e) {
            result.skips.push_back({rec.firm_id, rec.canonical_key,
                                    "error: " + std::string(e.what())});
            result.had_errors = true;
        }
    }

    if (!result.pairs.empty()) {
        result.summary =
            eval::summarize_comparisons(result.pairs, ctx.firm_meta, ctx.reputation);
        result.summary.hazard_correspondence = hazard_corr_for(config, result.pairs);
        result.has_pairs = true;
    }
    return result;
}

std::string comparisons_to_csv(const std::vector<eval::ExitComparison>& pairs) {
    std::string out =
        "firm_id,vc_canonical,llm_exit_month,vc_exit_month,r_llm,r_vc,delta_r,"
        "timing_error_months,direction,censored\n";
    for (const auto& p : pairs) {
        out += csv_escape(p.firm_id) + "," + csv_escape(p.entity) + "," +
               std::to_string(p.llm_exit_month) + "," +
               std::to_string(p.vc_exit_month) + "," + fmt6(p.r_llm) + "," +
               fmt6(p.r_vc) + "," + fmt6(p.delta_r) + "," +
               std::to_string(p.timing_error_months) + "," +
               eval::to_string(p.direction) + "," + (p.censored ? "true" : "false") +
               "\n";
    }
    return out;
}

std::string skips_to_csv(std::vector<SkipRow> skips) {
    std::sort(skips.begin(), skips.end(), [](const SkipRow& a, const SkipRow& b) {
        return std::tie(a.firm_id, a.entity, a.reason) <
               std::tie(b.firm_id, b.entity, b.reason);
    });
    std::string out = "firm_id,entity,reason\n";
    for (const auto& s : skips) {
        out += csv_escape(s.firm_id) + "," + csv_escape(s.entity) + "," +
               csv_escape(s.reason) + "\n";
    }
    return out;
}

std::string degenerate_summary_json() {
    eval::SummaryReport empty;
    return eval::summary_to_json(empty);
}

}  // namespace

int cmd_evaluate(const RunConfig& config, std::ostream& log) {
    const auto timeline = pit::load_timeline_store(config.out_dir / "timeline.json");
    const auto base_decisions = load_decisions_file(config.out_dir / "decisions.jsonl");
    if (base_decisions.empty()) {
        throw InputError("decisions file is empty: " +
                         (config.out_dir / "decisions.jsonl").string());
    }
    const auto ctx = build_eval_context(config, timeline);

    RunManifest manifest;
    manifest.command = "evaluate";
    manifest.config_digest = config_digest(config);
    manifest.input_digests["timeline.json"] =
        sha256_file_hex(config.out_dir / "timeline.json");
    manifest.input_digests["decisions.jsonl"] =
        sha256_file_hex(config.out_dir / "decisions.jsonl");
    manifest.input_digests["ownership.csv"] = sha256_file_hex(config.ownership_path);
    if (!config.reputation_path.empty()) {
        manifest.input_digests["reputation.json"] =
            sha256_file_hex(config.reputation_path);
    }

    bool partial = false;

    const auto base = evaluate_cell(ctx, base_decisions, config,
                                    config.exit_definition, config.volatility_filter);
    write_text_file(config.out_dir / "comparisons.csv",
                    comparisons_to_csv(base.pairs));
    write_text_file(config.out_dir / "summary.json",
                    base.has_pairs ? eval::summary_to_json(base.summary)
                                   : degenerate_summary_json());
    write_text_file(config.out_dir / "skips.csv", skips_to_csv(base.skips));
    if (!base.has_pairs) {
        log << "evaluate: warning: no usable VC-firm pairs\n";
    }
    partial = partial || base.had_errors;

    size_t n_cells = 0;
    if (config.matrix_enabled()) {
        const bool cells_on_disk = has_decision_axes(config);
        std::map<std::string, std::map<std::string, std::vector<agents::Decision>>>
            cell_decisions;
        std::vector<eval::ExitDefinition> defs = config.eval_axes.exit_definitions;
        if (defs.empty()) defs = {config.exit_definition};
        std::sort(defs.begin(), defs.end(), [](auto a, auto b) {
            return std::string_view(eval::to_string(a)) <
                   std::string_view(eval::to_string(b));
        });
        std::vector<bool> vols = config.eval_axes.volatility_filter;
        if (vols.empty()) vols = {config.volatility_filter};
        std::sort(vols.begin(), vols.end());  // off < on

        for (const auto& dcell : decision_cells(config)) {
            for (const auto def : defs) {
                for (const bool vol : vols) {
                    const std::string cell_id = eval::eval_cell_id(dcell.id, def, vol);
                    const auto cell_dir = config.out_dir / "matrix" / cell_id;
                    ++n_cells;
                    try {
                        const auto* decisions = &base_decisions;
                        if (cells_on_disk) {
                            auto it = cell_decisions.find(dcell.id);
                            if (it == cell_decisions.end()) {
                                const auto path = config.out_dir / "decisions" /
                                                  (dcell.id + ".jsonl");
                                it = cell_decisions
                                         .emplace(dcell.id, load_decisions_file(path))
                                         .first;
                                manifest.input_digests["decisions/" + dcell.id +
                                                       ".jsonl"] =
                                    sha256_file_hex(path);
                            }
                            decisions = &it->second;
                        }
                        const auto cell =
                            evaluate_cell(ctx, *decisions, config, def, vol);
                        write_text_file(cell_dir / "summary.json",
                                        cell.has_pairs
                                            ? eval::summary_to_json(cell.summary)
                                            : degenerate_summary_json());
                        partial = partial || cell.had_errors;
                    } catch (const Error& e) {
                        write_text_file(cell_dir / "error.txt",
                                        std::string(e.what()) + "\n");
                        log << "evaluate: cell " << cell_id << " failed: " << e.what()
                            << "\n";
                        partial = true;
                    }
                }
            }
        }
    }

    manifest.record_counts["pairs"] = base.pairs.size();
    manifest.record_counts["skips"] = base.skips.size();
    manifest.record_counts["matrix_cells"] = n_cells;
    save_manifest(manifest, config.out_dir);

    log << "evaluate: " << base.pairs.size() << " pairs, " << base.skips.size()
        << " skips";
    if (n_cells) log << ", " << n_cells << " matrix cells";
    log << "\n";
    return partial ? kExitPartialFailure : kExitOk;
}

// --- report ----------------------------------------------------------------------

int cmd_report(const RunConfig& config, std::ostream& log) {
    const auto firms = pit::load_firms_json(config.firms_path);

    std::map<int, int> ipos_by_year;
    for (const auto& f : firms) ++ipos_by_year[f.ipo_month.year];
    std::string freq_csv = "year,n_ipos\n";
    for (const auto& [year, n] : ipos_by_year) {
        freq_csv += std::to_string(year) + "," + std::to_string(n) + "\n";
    }
    std::filesystem::create_directories(config.out_dir);
    write_text_file(config.out_dir / "ipo_frequency.csv", freq_csv);

    RunManifest manifest;
    manifest.command = "report";
    manifest.config_digest = config_digest(config);
    manifest.input_digests["firms.json"] = sha256_file_hex(config.firms_path);
    manifest.record_counts["firms"] = firms.size();
    manifest.record_counts["ipo_years"] = ipos_by_year.size();

    size_t n_groups = 0;
    const auto summary_path = config.out_dir / "summary.json";
    if (std::filesystem::exists(summary_path)) {
        std::ifstream in(summary_path);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw InputError(summary_path.string() + ": " + e.what());
        }
        std::string groups_csv =
            "dimension,key,n_pairs,mean_delta_r,median_delta_r,"
            "share_positive_delta_r\n";
        const std::pair<const char*, const char*> dims[] = {
            {"by_industry", "industry"},
            {"by_volatility", "volatility"},
            {"by_reputation", "reputation"}};
        for (const auto& [field, label] : dims) {
            if (!doc.contains(field)) continue;
            for (const auto& row : doc[field]) {
                groups_csv += std::string(label) + "," +
                              csv_escape(row.at("key").get<std::string>()) + "," +
                              std::to_string(row.at("n_pairs").get<int>()) + "," +
                              fmt6(row.at("mean_delta_r").get<double>()) + "," +
                              fmt6(row.at("median_delta_r").get<double>()) + "," +
                              fmt6(row.at("share_positive_delta_r").get<double>()) +
                              "\n";
                ++n_groups;
            }
        }
        write_text_file(config.out_dir / "group_delta_r.csv", groups_csv);
        manifest.input_digests["summary.json"] = sha256_file_hex(summary_path);
        manifest.record_counts["groups"] = n_groups;
    } else {
        log << "report: no summary.json; emitting IPO frequency only\n";
    }
    save_manifest(manifest, config.out_dir);

    log << "report: " << ipos_by_year.size() << " IPO years over " << firms.size()
        << " firms";
    if (n_groups) log << ", " << n_groups << " group rows";
    log << "\n";
    return kExitOk;
}

}  // namespace exitbench::cli
