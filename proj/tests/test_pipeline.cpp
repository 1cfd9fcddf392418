#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "exitbench/commands.hpp"
#include "exitbench/config.hpp"
#include "exitbench/evaluation.hpp"
#include "helpers.hpp"

using namespace exitbench;
using cli::RunConfig;

namespace {

size_t count_occurrences(const std::string& haystack, const std::string& needle) {
    size_t count = 0;
    for (size_t pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

size_t data_lines(const std::string& text) {
    // non-empty lines minus the header
    size_t lines = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) ++lines;
    }
    return lines ? lines - 1 : 0;
}

nlohmann::json smoke_scripts() {
    nlohmann::json scripts;
    scripts["acme"] = {"HOLD", "HOLD", "EXIT_NOW"};
    scripts["bolt"] = {"EXIT_NOW"};
    scripts["cometa"] = nlohmann::json::array();
    for (int i = 0; i < 24; ++i) scripts["cometa"].push_back("HOLD");
    return scripts;
}

// Config over the committed three-firm corpus; `extra` overwrites top-level
// keys so tests can swap the agent or bolt on a matrix.
std::filesystem::path write_smoke_config(const testutil::TempDir& dir,
                                         const nlohmann::json& extra = {},
                                         const std::string& name = "config.json") {
    const auto base = testutil::fixtures_dir() / "smoke3";
    nlohmann::json cfg = {
        {"paths",
         {{"events", (base / "events.jsonl").string()},
          {"firms", (base / "firms.json").string()},
          {"filings", (base / "filings").string()},
          {"templates", (testutil::fixtures_dir() / "templates").string()},
          {"reputation", (base / "reputation.json").string()},
          {"out", "out"}}},
        {"agent", {{"kind", "scripted_mock"}, {"scripts", smoke_scripts()}}},
        {"horizon", 24},
        {"threshold_pct", 5.0},
    };
    if (!extra.is_null()) {
        for (const auto& [key, value] : extra.items()) cfg[key] = value;
    }
    const auto path = dir / name;
    testutil::write_file(path, cfg.dump(2));
    return path;
}

// ingest + extract + backtest + evaluate, asserting clean exits.
void run_through_evaluate(const RunConfig& config) {
    std::ostringstream log;
    REQUIRE(cli::cmd_ingest(config, log) == cli::kExitOk);
    REQUIRE(cli::cmd_extract(config, log) == cli::kExitOk);
    REQUIRE(cli::cmd_backtest(config, log) == cli::kExitOk);
    REQUIRE(cli::cmd_evaluate(config, log) == cli::kExitOk);
}

std::string completion_body(const std::string& content) {
    nlohmann::json message = {{"role", "assistant"}, {"content", content}};
    nlohmann::json body = {
        {"choices", nlohmann::json::array({nlohmann::json{{"message", message}}})}};
    return body.dump();
}

}  // namespace

TEST_CASE("the full pipeline reproduces the golden comparison table") {
    testutil::TempDir dir;
    const auto config = cli::load_config(write_smoke_config(dir));
    const auto out = dir / "out";
    std::ostringstream log;

    REQUIRE(cli::cmd_ingest(config, log) == cli::kExitOk);
    CHECK(testutil::read_file(out / "validation.txt").empty());
    {
        const auto manifest =
            nlohmann::json::parse(testutil::read_file(out / "run_manifest.json"));
        CHECK(manifest["command"] == "ingest");
        CHECK(manifest["record_counts"]["firms"] == 3);
        CHECK(manifest["record_counts"]["violations"] == 0);
        CHECK(manifest["config_digest"] == cli::config_digest(config));
        CHECK(manifest["tool_version"] == "0.1.0");
    }

    REQUIRE(cli::cmd_extract(config, log) == cli::kExitOk);
    {
        const auto entities =
            nlohmann::json::parse(testutil::read_file(out / "entities.json"));
        REQUIRE(entities.size() == 3);
        CHECK(entities[0]["canonical_key"] == "bluehill ventures");
        CHECK(entities[0]["reputation_tier"] == "high");
        CHECK(entities[1]["canonical_key"] == "granite peak partners");
        CHECK(entities[1]["reputation_tier"].is_null());
        CHECK(entities[2]["canonical_key"] == "orchard road capital");

        const auto exits =
            nlohmann::json::parse(testutil::read_file(out / "exit_summary.json"));
        CHECK(exits["n_records"] == 4);
        CHECK(exits["n_firms"] == 3);
        CHECK(exits["n_vcs"] == 3);
        CHECK(exits["pct_complete"].get<double>() == doctest::Approx(25.0));
        CHECK(exits["pct_partial"].get<double>() == doctest::Approx(50.0));
        CHECK(exits["median_first_action_months"].get<double>() == 3.0);
        CHECK(exits["median_full_exit_months"].get<double>() == 12.0);
    }

    REQUIRE(cli::cmd_backtest(config, log) == cli::kExitOk);
    {
        const auto decisions = testutil::read_file(out / "decisions.jsonl");
        CHECK(count_occurrences(decisions, "\n") == 28);  // 3 + 1 + 24
        std::istringstream in(decisions);
        std::string line;
        REQUIRE(std::getline(in, line));
        const auto first = nlohmann::json::parse(line);
        CHECK(first["firm_id"] == "acme");
        CHECK(first["month"] == 0);
        CHECK(first["decision"] == "HOLD");
        CHECK(first["prompt_digest"] == "");
        CHECK(first["note"] == "");

        CHECK(testutil::read_file(out / "failures.csv") == "cell,firm_id,error\n");
        const auto manifest =
            nlohmann::json::parse(testutil::read_file(out / "run_manifest.json"));
        CHECK(manifest["command"] == "backtest");
        CHECK(manifest["record_counts"]["decisions"] == 28);
        CHECK(manifest["record_counts"]["failures"] == 0);
        CHECK(manifest["cache_hits"] == 0);
        CHECK(manifest["cache_misses"] == 0);
    }

    REQUIRE(cli::cmd_evaluate(config, log) == cli::kExitOk);
    CHECK(testutil::read_file(out / "comparisons.csv") ==
          testutil::read_file(testutil::fixtures_dir() / "smoke3" /
                              "expected_comparisons.csv"));
    CHECK(testutil::read_file(out / "skips.csv") ==
          "firm_id,entity,reason\n"
          "acme,granite peak partners,"
          "pair acme/granite peak partners has no threshold exit month\n");
    {
        const auto text = testutil::read_file(out / "summary.json");
        CHECK(text.find("\"hazard_correspondence\": null") != std::string::npos);
        const auto summary = nlohmann::json::parse(text);
        CHECK(summary["n_pairs"] == 3);
        CHECK(summary["n_censored"] == 1);
        CHECK(summary["mean_delta_r"].get<double>() ==
              doctest::Approx(0.4625 / 3.0).epsilon(1e-6));
        CHECK(summary["median_delta_r"].get<double>() == doctest::Approx(0.0375));
        CHECK(summary["share_positive_delta_r"].get<double>() ==
              doctest::Approx(200.0 / 3.0).epsilon(1e-6));
        CHECK(summary["mean_abs_timing_error"].get<double>() == doctest::Approx(9.0));
        CHECK(summary["pct_early"].get<double>() ==
              doctest::Approx(200.0 / 3.0).epsilon(1e-6));
        CHECK(summary["pct_late"].get<double>() ==
              doctest::Approx(100.0 / 3.0).epsilon(1e-6));
        CHECK(summary["pct_same"].get<double>() == 0.0);
        CHECK(summary["pct_firms_majority_positive"].get<double>() ==
              doctest::Approx(200.0 / 3.0).epsilon(1e-6));
        REQUIRE(summary["by_volatility"].size() == 3);
        for (const auto& row : summary["by_volatility"]) {
            CHECK(row["n_pairs"] == 1);
        }
        REQUIRE(summary["by_reputation"].size() == 2);
        CHECK(summary["by_reputation"][0]["key"] == "high");
        CHECK(summary["by_reputation"][0]["n_pairs"] == 2);
        CHECK(summary["by_reputation"][1]["key"] == "unlabeled");

        const auto manifest =
            nlohmann::json::parse(testutil::read_file(out / "run_manifest.json"));
        CHECK(manifest["command"] == "evaluate");
        CHECK(manifest["record_counts"]["pairs"] == 3);
        CHECK(manifest["record_counts"]["skips"] == 1);
        CHECK(manifest["input_digests"].contains("decisions.jsonl"));
        CHECK(manifest["input_digests"].contains("ownership.csv"));
    }

    REQUIRE(cli::cmd_report(config, log) == cli::kExitOk);
    CHECK(testutil::read_file(out / "ipo_frequency.csv") ==
          "year,n_ipos\n2012,2\n2015,1\n");
    {
        const auto groups = testutil::read_file(out / "group_delta_r.csv");
        CHECK(groups.find("dimension,key,n_pairs,mean_delta_r,median_delta_r,"
                          "share_positive_delta_r\n") == 0);
        CHECK(groups.find("industry,biotech,1,") != std::string::npos);
        CHECK(groups.find("industry,software,2,") != std::string::npos);
        CHECK(groups.find("reputation,high,2,") != std::string::npos);
        CHECK(data_lines(groups) == 2 + 3 + 2);
    }
}

TEST_CASE("a repeated run leaves every artifact byte-identical") {
    testutil::TempDir dir;
    const auto config = cli::load_config(write_smoke_config(dir));
    const auto out = dir / "out";
    std::ostringstream log;

    auto run_all = [&] {
        REQUIRE(cli::cmd_ingest(config, log) == cli::kExitOk);
        REQUIRE(cli::cmd_extract(config, log) == cli::kExitOk);
        REQUIRE(cli::cmd_backtest(config, log) == cli::kExitOk);
        REQUIRE(cli::cmd_evaluate(config, log) == cli::kExitOk);
        REQUIRE(cli::cmd_report(config, log) == cli::kExitOk);
    };
    run_all();

    const char* artifacts[] = {
        "timeline.json",  "ownership.csv",   "entities.json",
        "exit_summary.json", "extraction_log.txt", "decisions.jsonl",
        "failures.csv",   "comparisons.csv", "summary.json",
        "skips.csv",      "ipo_frequency.csv", "group_delta_r.csv",
        "run_manifest.json"};
    std::map<std::string, std::string> before;
    for (const char* name : artifacts) {
        before[name] = testutil::read_file(out / name);
    }

    run_all();
    for (const char* name : artifacts) {
        INFO("artifact: ", name);
        REQUIRE(testutil::read_file(out / name) == before[name]);
    }
}

TEST_CASE("ingest flags leakage-relevant defects with a validation exit") {
    testutil::TempDir dir;
    testutil::write_file(dir / "firms.json",
                         R"([{"firm_id": "a", "ipo_month": "2012-01",
  "lockup_expiration_month": "2012-07", "industry": "x"}])");
    // only price is one month after lockup expiration: month 0 is bare
    testutil::write_file(
        dir / "events.jsonl",
        R"({"firm_id": "a", "kind": "price", "month": "2012-08", "payload": {"close": 10.0}, "source_id": "s1"})"
        "\n");
    nlohmann::json cfg = {
        {"paths",
         {{"events", "events.jsonl"}, {"firms", "firms.json"}, {"out", "out"}}},
        {"horizon", 12},
    };
    testutil::write_file(dir / "config.json", cfg.dump());
    const auto config = cli::load_config(dir / "config.json");

    std::ostringstream log;
    CHECK(cli::cmd_ingest(config, log) == cli::kExitValidationFailure);
    const auto report = testutil::read_file(dir / "out" / "validation.txt");
    CHECK(report.find("firm a: no price event at month 0") != std::string::npos);
    CHECK(log.str().find("violation") != std::string::npos);
    // the store is still written so the defect can be inspected
    CHECK(std::filesystem::exists(dir / "out" / "timeline.json"));
}

TEST_CASE("evaluate demands a backtest and a nonempty decision log") {
    testutil::TempDir dir;
    const auto config = cli::load_config(write_smoke_config(dir));
    std::ostringstream log;
    REQUIRE(cli::cmd_ingest(config, log) == cli::kExitOk);
    REQUIRE(cli::cmd_extract(config, log) == cli::kExitOk);

    try {
        cli::cmd_evaluate(config, log);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("run backtest first") != std::string::npos);
    }

    testutil::write_file(dir / "out" / "decisions.jsonl", "");
    try {
        cli::cmd_evaluate(config, log);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("empty") != std::string::npos);
    }
}

TEST_CASE("an exhausted script fails its firm but not the run") {
    testutil::TempDir dir;
    nlohmann::json agent = {{"kind", "scripted_mock"}, {"scripts", smoke_scripts()}};
    agent["scripts"]["cometa"] = {"HOLD"};  // runs out at month 1
    const auto config =
        cli::load_config(write_smoke_config(dir, {{"agent", agent}}));
    std::ostringstream log;
    REQUIRE(cli::cmd_ingest(config, log) == cli::kExitOk);

    CHECK(cli::cmd_backtest(config, log) == cli::kExitPartialFailure);
    const auto failures = testutil::read_file(dir / "out" / "failures.csv");
    CHECK(failures.find("base,cometa,") != std::string::npos);
    CHECK(failures.find("exhausted at month 1") != std::string::npos);
    CHECK(data_lines(failures) == 1);
    CHECK(log.str().find("failure [base] cometa") != std::string::npos);

    // the surviving firms still produced decisions
    const auto decisions = testutil::read_file(dir / "out" / "decisions.jsonl");
    CHECK(count_occurrences(decisions, "\"firm_id\":\"acme\"") == 3);
    CHECK(count_occurrences(decisions, "\"firm_id\":\"bolt\"") == 1);
    CHECK(count_occurrences(decisions, "cometa") == 0);
}

TEST_CASE("the config loader rejects unknown keys and out-of-range values") {
    testutil::TempDir dir;
    int counter = 0;
    auto expect_bad = [&](const nlohmann::json& doc) {
        const auto path = dir / ("bad" + std::to_string(counter++) + ".json");
        testutil::write_file(path, doc.is_string() ? doc.get<std::string>()
                                                   : doc.dump());
        CHECK_THROWS_AS(cli::load_config(path), InputError);
    };

    expect_bad({{"bogus", 1}});
    expect_bad({{"paths", {{"bogus", "x"}}}});
    expect_bad({{"agent", {{"bogus", "x"}}}});
    expect_bad({{"client", {{"bogus", "x"}}}});
    expect_bad({{"matrix", {{"bogus", nlohmann::json::array()}}}});
    expect_bad({{"horizon", 0}});
    expect_bad({{"threshold_pct", 0.0}});
    expect_bad({{"threshold_pct", 100.0}});
    expect_bad({{"materiality_delta_pp", 0.0}});
    expect_bad({{"max_in_flight", 0}});
    expect_bad({{"exit_definition", "partial"}});
    expect_bad({{"agent", {{"kind", "oracle"}}}});
    expect_bad({{"agent", {{"theories", {"astrology"}}}}});
    expect_bad({{"agent", {{"ambiguous_fallback", "panic"}}}});
    expect_bad({{"agent", {{"default_script", {"MAYBE"}}}}});
    expect_bad({{"agent", {{"hazard_points", {{1, 0.5, 9}}}}}});
    expect_bad({{"matrix", {{"exit_definitions", {"weekly"}}}}});
    expect_bad(nlohmann::json("[]"));      // not an object
    expect_bad(nlohmann::json("{\"x\""));  // not json
    CHECK_THROWS_AS(cli::load_config(dir / "absent.json"), InputError);
}

TEST_CASE("config paths resolve against the config file and fill defaults") {
    testutil::TempDir dir;
    nlohmann::json cfg = {
        {"paths", {{"events", "data/events.jsonl"}, {"out", "out"}}},
        {"seed", 42},
    };
    testutil::write_file(dir / "nested" / "config.json", cfg.dump());
    const auto config = cli::load_config(dir / "nested" / "config.json");

    CHECK(config.events_path == dir / "nested" / "data" / "events.jsonl");
    CHECK(config.out_dir == dir / "nested" / "out");
    CHECK(config.ownership_path == dir / "nested" / "out" / "ownership.csv");
    CHECK(config.cache_dir == dir / "nested" / "out" / "cache");
    CHECK(config.seed == 42);
    CHECK(config.horizon == 60);
    CHECK(config.threshold_pct == 5.0);

    // the effective form is valid json and the digest is stable across loads
    const auto effective = nlohmann::json::parse(cli::effective_config_json(config));
    CHECK(effective["horizon"] == 60);
    CHECK(effective["agent"]["kind"] == "lockup_exit");
    const auto again = cli::load_config(dir / "nested" / "config.json");
    CHECK(cli::config_digest(config) == cli::config_digest(again));

    cfg["horizon"] = 61;
    testutil::write_file(dir / "nested" / "config2.json", cfg.dump());
    const auto other = cli::load_config(dir / "nested" / "config2.json");
    CHECK(cli::config_digest(config) != cli::config_digest(other));
}

TEST_CASE("cli overrides replace config values and are validated") {
    testutil::TempDir dir;
    auto config = cli::load_config(write_smoke_config(dir));

    cli::CliOverrides ov;
    ov.agent = "momentum";
    ov.exit_definition = "full";
    ov.horizon = 36;
    ov.threshold_pct = 7.5;
    ov.volatility_filter = true;
    ov.out_dir = "elsewhere";
    ov.max_in_flight = 2;
    cli::apply_overrides(config, ov);

    CHECK(config.agent.kind == agents::AgentKind::momentum);
    CHECK(config.exit_definition == eval::ExitDefinition::full);
    CHECK(config.horizon == 36);
    CHECK(config.threshold_pct == 7.5);
    CHECK(config.volatility_filter);
    CHECK(config.out_dir.is_absolute());
    CHECK(config.out_dir.filename() == "elsewhere");
    CHECK(config.max_in_flight == 2);

    cli::CliOverrides bad_agent;
    bad_agent.agent = "alien";
    CHECK_THROWS_AS(cli::apply_overrides(config, bad_agent), InputError);
    cli::CliOverrides bad_def;
    bad_def.exit_definition = "alien";
    CHECK_THROWS_AS(cli::apply_overrides(config, bad_def), InputError);
    cli::CliOverrides bad_horizon;
    bad_horizon.horizon = 0;
    CHECK_THROWS_AS(cli::apply_overrides(config, bad_horizon), InputError);
}

TEST_CASE("decision axes stage per-cell decision logs and an eval cross product") {
    testutil::TempDir dir;
    nlohmann::json matrix = {{"models", {"mock-a", "mock-b"}},
                             {"exit_definitions", {"threshold", "full"}},
                             {"volatility_filter", {false, true}}};
    const auto config =
        cli::load_config(write_smoke_config(dir, {{"matrix", matrix}}));
    const auto out = dir / "out";
    run_through_evaluate(config);

    // both decision cells exist and, for a scripted agent, agree bytewise
    const std::string cell_a = "model=mock-a__template=default__theory=none";
    const std::string cell_b = "model=mock-b__template=default__theory=none";
    const auto decisions_a =
        testutil::read_file(out / "decisions" / (cell_a + ".jsonl"));
    CHECK(decisions_a == testutil::read_file(out / "decisions" / (cell_b + ".jsonl")));
    CHECK(decisions_a == testutil::read_file(out / "decisions.jsonl"));

    size_t cells = 0;
    for (const auto& entry :
         std::filesystem::directory_iterator(out / "matrix")) {
        ++cells;
        CHECK(std::filesystem::exists(entry.path() / "summary.json"));
        CHECK_FALSE(std::filesystem::exists(entry.path() / "error.txt"));
    }
    CHECK(cells == 8);
    for (const std::string& dcell : {cell_a, cell_b}) {
        for (const std::string def : {"full", "threshold"}) {
            for (const std::string vol : {"off", "on"}) {
                const auto cell_dir =
                    out / "matrix" /
                    (dcell + "__exitdef=" + def + "__vol=" + vol);
                INFO("cell: ", cell_dir.filename().string());
                REQUIRE(std::filesystem::exists(cell_dir / "summary.json"));
            }
        }
    }

    // the cell matching the base configuration reproduces it exactly
    const auto base_summary = testutil::read_file(out / "summary.json");
    CHECK(testutil::read_file(out / "matrix" /
                              (cell_a + "__exitdef=threshold__vol=off") /
                              "summary.json") == base_summary);
    // a different exit definition really changes the result
    const auto full_summary = testutil::read_file(
        out / "matrix" / (cell_a + "__exitdef=full__vol=off") / "summary.json");
    CHECK(full_summary != base_summary);
    CHECK(nlohmann::json::parse(full_summary)["n_pairs"] == 1);

    const auto manifest =
        nlohmann::json::parse(testutil::read_file(out / "run_manifest.json"));
    CHECK(manifest["record_counts"]["matrix_cells"] == 8);
    CHECK(manifest["input_digests"].contains("decisions/" + cell_a + ".jsonl"));
}

TEST_CASE("a single-point matrix reproduces the base cell byte for byte") {
    testutil::TempDir dir;
    nlohmann::json matrix = {{"exit_definitions", {"threshold"}},
                             {"volatility_filter", {false}}};
    const auto config =
        cli::load_config(write_smoke_config(dir, {{"matrix", matrix}}));
    const auto out = dir / "out";
    run_through_evaluate(config);

    // eval-only axes re-use the base decisions: nothing staged on disk
    CHECK_FALSE(std::filesystem::exists(out / "decisions"));
    std::vector<std::filesystem::path> cells;
    for (const auto& entry : std::filesystem::directory_iterator(out / "matrix")) {
        cells.push_back(entry.path());
    }
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].filename() ==
          "model=default__template=default__theory=none__exitdef=threshold__vol=off");
    CHECK(testutil::read_file(cells[0] / "summary.json") ==
          testutil::read_file(out / "summary.json"));
}

TEST_CASE("evaluation filters skip rather than silently drop") {
    testutil::TempDir dir;
    const auto base_cfg = write_smoke_config(dir);
    run_through_evaluate(cli::load_config(base_cfg));

    const auto vol_config = cli::load_config(write_smoke_config(
        dir, {{"volatility_filter", true}}, "config_vol.json"));
    std::ostringstream log;
    REQUIRE(cli::cmd_evaluate(vol_config, log) == cli::kExitOk);
    const auto out = dir / "out";
    CHECK(data_lines(testutil::read_file(out / "comparisons.csv")) == 2);
    CHECK(testutil::read_file(out / "skips.csv").find("volatility filter") !=
          std::string::npos);

    const auto censor_config = cli::load_config(write_smoke_config(
        dir, {{"exclude_censored", true}}, "config_censor.json"));
    REQUIRE(cli::cmd_evaluate(censor_config, log) == cli::kExitOk);
    const auto skips = testutil::read_file(out / "skips.csv");
    CHECK(skips.find("cometa,bluehill ventures,censored implied exit") !=
          std::string::npos);
    CHECK(data_lines(testutil::read_file(out / "comparisons.csv")) == 2);
    const auto summary =
        nlohmann::json::parse(testutil::read_file(out / "summary.json"));
    CHECK(summary["n_pairs"] == 2);
    CHECK(summary["n_censored"] == 0);
}

TEST_CASE("replay_actual recovers the recorded exits exactly") {
    testutil::TempDir dir;
    const auto config = cli::load_config(write_smoke_config(
        dir, {{"agent", {{"kind", "replay_actual"}}}}));
    run_through_evaluate(config);

    const auto csv = testutil::read_file(dir / "out" / "comparisons.csv");
    CHECK(data_lines(csv) == 3);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        INFO("row: ", line);
        CHECK(line.find(",0.000000,0,Same,false") != std::string::npos);
    }
    const auto summary =
        nlohmann::json::parse(testutil::read_file(dir / "out" / "summary.json"));
    CHECK(summary["pct_same"].get<double>() == 100.0);
    CHECK(summary["mean_delta_r"].get<double>() == 0.0);
    CHECK(summary["mean_abs_timing_error"].get<double>() == 0.0);
}

TEST_CASE("a constant hazard policy yields a null correspondence") {
    testutil::TempDir dir;
    nlohmann::json agent = {{"kind", "hazard_curve"},
                            {"hazard_points", {{2, 0.5}, {5, 0.2}}}};
    const auto config =
        cli::load_config(write_smoke_config(dir, {{"agent", agent}}));
    run_through_evaluate(config);

    const auto text = testutil::read_file(dir / "out" / "summary.json");
    CHECK(text.find("\"hazard_correspondence\": null") != std::string::npos);
    const auto summary = nlohmann::json::parse(text);
    CHECK(summary["n_pairs"] == 3);
    // every firm exits the month after the peak
    const auto csv = testutil::read_file(dir / "out" / "comparisons.csv");
    CHECK(count_occurrences(csv, ",3,") >= 3);
}

TEST_CASE("an llm backtest round-trips through the endpoint once, then replays") {
    std::atomic<int> requests{0};
    httplib::Server svr;
    svr.Post("/v1/chat/completions",
             [&](const httplib::Request&, httplib::Response& res) {
                 ++requests;
                 res.set_content(
                     completion_body("Sell into strength.\nDECISION: EXIT_WITHIN(2)"),
                     "application/json");
             });
    const int port = svr.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { svr.listen_after_bind(); });
    svr.wait_until_ready();

    testutil::TempDir dir;
    nlohmann::json agent = {
        {"kind", "llm"}, {"model", "test-model"}, {"template", "concise"}};
    nlohmann::json client = {
        {"base_url", "http://127.0.0.1:" + std::to_string(port)}};
    const auto config = cli::load_config(write_smoke_config(
        dir, {{"agent", agent}, {"client", client}}));
    const auto out = dir / "out";
    std::ostringstream log;

    REQUIRE(cli::cmd_ingest(config, log) == cli::kExitOk);
    REQUIRE(cli::cmd_extract(config, log) == cli::kExitOk);
    REQUIRE(cli::cmd_backtest(config, log) == cli::kExitOk);
    CHECK(requests.load() == 3);  // one prompt per firm, then they exit

    const auto decisions = testutil::read_file(out / "decisions.jsonl");
    CHECK(count_occurrences(decisions, "\n") == 3);
    CHECK(count_occurrences(decisions, "\"decision\":\"EXIT_WITHIN(2)\"") == 3);
    std::istringstream in(decisions);
    std::string line;
    while (std::getline(in, line)) {
        const auto row = nlohmann::json::parse(line);
        CHECK(row["prompt_digest"].get<std::string>().size() == 64);
        CHECK(row["note"] == "");
    }
    auto manifest =
        nlohmann::json::parse(testutil::read_file(out / "run_manifest.json"));
    CHECK(manifest["cache_misses"] == 3);
    CHECK(manifest["cache_hits"] == 0);
    CHECK(manifest["input_digests"].contains("templates/concise.txt"));

    // an offline rerun serves the cache and reproduces the log bytewise
    nlohmann::json offline_client = {{"base_url", ""}, {"offline", true}};
    const auto offline_config = cli::load_config(write_smoke_config(
        dir, {{"agent", agent}, {"client", offline_client}}, "config_offline.json"));
    REQUIRE(cli::cmd_backtest(offline_config, log) == cli::kExitOk);
    CHECK(requests.load() == 3);
    CHECK(testutil::read_file(out / "decisions.jsonl") == decisions);
    manifest = nlohmann::json::parse(testutil::read_file(out / "run_manifest.json"));
    CHECK(manifest["cache_hits"] == 3);
    CHECK(manifest["cache_misses"] == 0);

    REQUIRE(cli::cmd_evaluate(offline_config, log) == cli::kExitOk);
    const auto summary =
        nlohmann::json::parse(testutil::read_file(out / "summary.json"));
    CHECK(summary["n_pairs"] == 3);
    CHECK(summary["pct_early"].get<double>() == 100.0);

    svr.stop();
    worker.join();
}

TEST_CASE("extraction over the large corpus reproduces the frozen headline numbers") {
    testutil::TempDir dir;
    const auto base = testutil::fixtures_dir() / "ownership33";
    nlohmann::json cfg = {
        {"paths",
         {{"firms", (base / "firms.json").string()},
          {"filings", (base / "filings").string()},
          {"out", "out"}}},
    };
    testutil::write_file(dir / "config.json", cfg.dump());
    const auto config = cli::load_config(dir / "config.json");
    std::ostringstream log;
    REQUIRE(cli::cmd_extract(config, log) == cli::kExitOk);

    const auto expected =
        nlohmann::json::parse(testutil::read_file(base / "expected.json"));
    const auto summary = nlohmann::json::parse(
        testutil::read_file(dir / "out" / "exit_summary.json"));
    CHECK(summary["n_records"] == expected["n_records"]);
    CHECK(summary["n_firms"] == expected["n_firms"]);
    CHECK(summary["n_vcs"] == expected["n_vcs"]);
    CHECK(summary["pct_complete"].get<double>() ==
          doctest::Approx(expected["pct_complete"].get<double>()).epsilon(1e-8));
    CHECK(summary["pct_partial"].get<double>() ==
          doctest::Approx(expected["pct_partial"].get<double>()).epsilon(1e-8));
    CHECK(summary["pct_no_exit"].get<double>() ==
          doctest::Approx(expected["pct_no_exit"].get<double>()).epsilon(1e-8));
    CHECK(summary["median_first_action_months"].get<double>() ==
          expected["median_first_action_months"].get<double>());
    CHECK(summary["median_full_exit_months"].get<double>() ==
          expected["median_full_exit_months"].get<double>());

    // every Complete pair owes its zero to the dropout synthesis rule
    const auto notes = testutil::read_file(dir / "out" / "extraction_log.txt");
    CHECK(count_occurrences(notes, "implicit zero") == 28);

    const auto manifest =
        nlohmann::json::parse(testutil::read_file(dir / "out" / "run_manifest.json"));
    CHECK(manifest["record_counts"]["filings"] == 66);
    CHECK(manifest["record_counts"]["pairs"] == 33);
    CHECK(manifest["record_counts"]["entities"] == 30);
}

TEST_CASE("report stands alone when no evaluation has run") {
    testutil::TempDir dir;
    const auto config = cli::load_config(write_smoke_config(dir));
    std::ostringstream log;
    REQUIRE(cli::cmd_report(config, log) == cli::kExitOk);
    CHECK(testutil::read_file(dir / "out" / "ipo_frequency.csv") ==
          "year,n_ipos\n2012,2\n2015,1\n");
    CHECK_FALSE(std::filesystem::exists(dir / "out" / "group_delta_r.csv"));
    CHECK(log.str().find("no summary.json") != std::string::npos);
}
