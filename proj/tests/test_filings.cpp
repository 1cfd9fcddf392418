#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "exitbench/ownership.hpp"
#include "helpers.hpp"

using namespace exitbench;
using namespace exitbench::filings;

namespace {

pit::FirmInfo firm(const std::string& id, const std::string& ipo,
                   const std::string& lockup, const std::string& industry = "tech") {
    pit::FirmInfo f;
    f.firm_id = id;
    f.ipo_month = parse_year_month(ipo);
    f.lockup_expiration_month = parse_year_month(lockup);
    f.industry = industry;
    return f;
}

OwnershipSeries series_of(const std::string& firm_id, std::optional<double> pre,
                          std::vector<std::pair<pit::MonthIndex, double>> points) {
    OwnershipSeries s;
    s.firm_id = firm_id;
    s.canonical_key = "vc";
    s.pre_ipo_pct = pre;
    s.points = std::move(points);
    return s;
}

}  // namespace

TEST_CASE("extract_filing finds rows only inside a stockholder section") {
    const std::string text =
        "Sunrise Robotics Inc.\n"
        "Decoy Holdings LLC   1,000,000   9.9%\n"  // before the section: ignored
        "Item 4. Security Ownership of Certain Beneficial Owners\n"
        "The table below shows holdings:\n"
        "  Bluehill Ventures III, L.P. (1)   1,200,000   12.0%\n"
        "  Orchard Road Capital   950,000   8.5%\n"
        "  Harriet Lane (2)   55,000   0.4%\n"
        "Item 5. Market Information\n"
        "  Ghost Capital   10,000   1.0%\n";  // after the section: ignored

    const auto result = extract_filing(text);
    CHECK(result.section_found);
    REQUIRE(result.rows.size() == 3);
    CHECK(result.rows[0].raw_name == "Bluehill Ventures III, L.P.");
    CHECK(result.rows[0].pct_owned == doctest::Approx(12.0));
    CHECK(result.rows[1].raw_name == "Orchard Road Capital");
    CHECK(result.rows[1].pct_owned == doctest::Approx(8.5));
    CHECK(result.rows[2].raw_name == "Harriet Lane");

    const auto none = extract_filing("No ownership table here.\nJust prose.\n");
    CHECK_FALSE(none.section_found);
    CHECK(none.rows.empty());
    CHECK(extract_holders(text).size() == 3);
}

TEST_CASE("extract_filing grammar variants") {
    auto rows_of = [](const std::string& row_line) {
        return extract_filing("PRINCIPAL STOCKHOLDERS\n" + row_line + "\n").rows;
    };
    // no share count
    auto r = rows_of("  Kestrel Capital   7.5%");
    REQUIRE(r.size() == 1);
    CHECK(r[0].raw_name == "Kestrel Capital");
    CHECK(r[0].pct_owned == doctest::Approx(7.5));
    // integer percentage and trailing footnote after the percent sign
    r = rows_of("Foxglove Partners 4,100,000 12% (3)");
    REQUIRE(r.size() == 1);
    CHECK(r[0].pct_owned == doctest::Approx(12.0));
    // footnote attached to the name
    r = rows_of("Harborlight Capital(2) 310,500 3.2%");
    REQUIRE(r.size() == 1);
    CHECK(r[0].raw_name == "Harborlight Capital");
    // windows line endings
    const auto crlf = extract_filing("principal stockholders\r\n  Oakmont Partners   5.0%\r\n");
    REQUIRE(crlf.rows.size() == 1);
    CHECK(crlf.rows[0].raw_name == "Oakmont Partners");
    // prose without a percent sign is not a row
    CHECK(rows_of("This paragraph mentions 1,000,000 shares outstanding.").empty());
}

TEST_CASE("normalize_name strips suffixes, numerals, and punctuation") {
    CHECK(normalize_name("Bluehill Ventures III, L.P.") == "bluehill ventures");
    CHECK(normalize_name("Bluehill Ventures III LP") == "bluehill ventures");
    CHECK(normalize_name("BLUEHILL VENTURES") == "bluehill ventures");
    CHECK(normalize_name("Orchard Road Capital Fund II, L.P.") ==
          "orchard road capital");
    CHECK(normalize_name("Granite Peak Partners IV, LLC") == "granite peak partners");
    CHECK(normalize_name("Meridian Growth Fund 2") == "meridian growth");
    CHECK(normalize_name("Kestrel Capital 3rd") == "kestrel capital");
    CHECK(normalize_name("Acme   Ventures,   Inc.") == "acme ventures");
    // a name made entirely of droppable tokens keeps its tokens
    CHECK(normalize_name("Fund III") == "fund iii");
    CHECK_THROWS_AS(normalize_name(""), EmptyNameError);
    CHECK_THROWS_AS(normalize_name("--- ..."), EmptyNameError);
}

TEST_CASE("normalize_name is idempotent on random inputs") {
    std::mt19937 rng(31337);
    const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,-&'()/";
    std::uniform_int_distribution<size_t> pick(0, alphabet.size() - 1);
    std::uniform_int_distribution<int> len(1, 40);
    int effective = 0;
    for (int i = 0; i < 2000; ++i) {
        std::string raw;
        const int n = len(rng);
        for (int j = 0; j < n; ++j) raw += alphabet[pick(rng)];
        std::string once;
        try {
            once = normalize_name(raw);
        } catch (const EmptyNameError&) {
            continue;  // nothing alphanumeric in the draw
        }
        ++effective;
        CHECK(normalize_name(once) == once);
    }
    CHECK(effective > 1500);  // the property was actually exercised
}

TEST_CASE("link_aliases groups by canonical key") {
    std::vector<OwnershipObservation> obs = {
        {"acme", "Bluehill Ventures III, L.P.", std::nullopt, 12.0},
        {"acme", "Bluehill Ventures", 6, 4.0},
        {"bolt", "Bluehill Ventures III LP", std::nullopt, 9.0},
        {"acme", "Orchard Road Capital", 3, 8.0},
    };
    const auto entities = link_aliases(obs);
    REQUIRE(entities.size() == 2);
    CHECK(entities[0].canonical_key == "bluehill ventures");
    CHECK(entities[0].aliases.size() == 3);
    CHECK(entities[1].canonical_key == "orchard road capital");
    CHECK(entities[1].aliases.size() == 1);
}

TEST_CASE("derive_actual_exit dates the three exit events") {
    const auto rec = derive_actual_exit(
        series_of("acme", 12.0, {{3, 8.0}, {6, 4.2}, {12, 0.0}}), 5.0, 60);
    CHECK(rec.first_action_month == 3);
    CHECK(rec.threshold_cross_month == 6);
    CHECK(rec.full_exit_month == 12);
    CHECK(rec.classification == ExitClassification::Complete);
}

TEST_CASE("threshold crossing is strict") {
    auto rec = derive_actual_exit(series_of("a", 10.0, {{2, 5.0}}), 5.0, 60);
    CHECK_FALSE(rec.threshold_cross_month.has_value());
    rec = derive_actual_exit(series_of("a", 10.0, {{2, 4.999}}), 5.0, 60);
    CHECK(rec.threshold_cross_month == 2);
}

TEST_CASE("materiality boundary for the first action") {
    // exactly the materiality delta counts
    auto rec = derive_actual_exit(series_of("a", 8.0, {{1, 7.0}}), 5.0, 60, 1.0);
    CHECK(rec.first_action_month == 1);
    // a smaller drop does not
    rec = derive_actual_exit(series_of("a", 8.0, {{1, 7.01}}), 5.0, 60, 1.0);
    CHECK_FALSE(rec.first_action_month.has_value());
    CHECK(rec.classification == ExitClassification::NoExit);
    // the pre-IPO baseline is the first predecessor
    rec = derive_actual_exit(series_of("a", 10.0, {{0, 8.5}}), 5.0, 60, 1.0);
    CHECK(rec.first_action_month == 0);
    // without a baseline the first observation cannot be a decline
    rec = derive_actual_exit(series_of("a", std::nullopt, {{0, 8.5}, {4, 7.0}}), 5.0,
                             60, 1.0);
    CHECK(rec.first_action_month == 4);
}

TEST_CASE("full exit requires an exact zero holding") {
    auto rec = derive_actual_exit(series_of("a", 9.0, {{5, 1e-13}}), 5.0, 60);
    CHECK(rec.full_exit_month == 5);
    rec = derive_actual_exit(series_of("a", 9.0, {{5, 0.001}}), 5.0, 60);
    CHECK_FALSE(rec.full_exit_month.has_value());
    CHECK(rec.classification == ExitClassification::Partial);  // drop of ~9pp
}

TEST_CASE("observations beyond the horizon are ignored") {
    const auto rec =
        derive_actual_exit(series_of("a", 9.0, {{59, 8.0}, {61, 0.0}}), 5.0, 60);
    CHECK_FALSE(rec.full_exit_month.has_value());
    CHECK(rec.classification == ExitClassification::Partial);

    CHECK_THROWS_AS(derive_actual_exit(series_of("a", 9.0, {}), 5.0, 60),
                    EmptySeriesError);
}

TEST_CASE("summarize_exits aggregates classifications and medians") {
    auto make = [](const std::string& f, const std::string& vc,
                   std::optional<int> action, std::optional<int> full,
                   ExitClassification cls) {
        ActualExitRecord r;
        r.firm_id = f;
        r.canonical_key = vc;
        r.first_action_month = action;
        r.full_exit_month = full;
        r.classification = cls;
        return r;
    };
    const std::vector<ActualExitRecord> records = {
        make("a", "v1", 0, 10, ExitClassification::Complete),
        make("a", "v2", 2, 20, ExitClassification::Complete),
        make("b", "v1", 4, std::nullopt, ExitClassification::Partial),
        make("c", "v3", std::nullopt, std::nullopt, ExitClassification::NoExit),
    };
    const auto s = summarize_exits(records);
    CHECK(s.n_records == 4);
    CHECK(s.n_firms == 3);
    CHECK(s.n_vcs == 3);
    CHECK(s.pct_complete == doctest::Approx(50.0));
    CHECK(s.pct_partial == doctest::Approx(25.0));
    CHECK(s.pct_no_exit == doctest::Approx(25.0));
    CHECK(*s.median_first_action_months == doctest::Approx(2.0));
    CHECK(*s.median_full_exit_months == doctest::Approx(15.0));  // even count

    const auto one = summarize_exits({records[3]});
    CHECK_FALSE(one.median_first_action_months.has_value());
    CHECK_FALSE(one.median_full_exit_months.has_value());

    CHECK_THROWS_AS(summarize_exits({}), EmptyInputError);
}

TEST_CASE("build_observations on the small corpus synthesizes implicit zeros") {
    const auto refs = scan_filings_dir(testutil::fixtures_dir() / "smoke3" / "filings");
    CHECK(refs.size() == 8);
    const std::vector<pit::FirmInfo> firms = {
        firm("acme", "2012-01", "2012-07", "software"),
        firm("bolt", "2012-03", "2012-09", "biotech"),
        firm("cometa", "2015-06", "2015-12", "software"),
    };
    ObservationLog log;
    const auto obs = build_observations(refs, firms, {}, &log);

    // acme: 2 baselines + 2 at month 3 + 2 at month 6 + granite at 12 +
    // implicit zero for bluehill at 12
    int acme_rows = 0;
    bool zero_seen = false;
    for (const auto& o : obs) {
        if (o.firm_id != "acme") continue;
        ++acme_rows;
        if (o.report_month == 12 && normalize_name(o.vc_raw_name) == "bluehill ventures") {
            zero_seen = true;
            CHECK(o.pct_owned == doctest::Approx(0.0));
        }
    }
    CHECK(acme_rows == 8);
    CHECK(zero_seen);
    CHECK(std::any_of(log.notes.begin(), log.notes.end(), [](const std::string& n) {
        return n.find("implicit zero") != std::string::npos;
    }));
    // the officers row and the individual are filtered out everywhere
    for (const auto& o : obs) {
        CHECK(o.vc_raw_name.find("as a group") == std::string::npos);
        CHECK(o.vc_raw_name.find("Priya") == std::string::npos);
    }

    const auto series = build_series(obs);
    REQUIRE(series.size() == 4);
    std::vector<ActualExitRecord> recs;
    for (const auto& s : series) recs.push_back(derive_actual_exit(s, 5.0, 24));
    // acme/bluehill: Complete at 12; bolt + cometa: Partial; granite: NoExit
    int complete = 0, partial = 0, none = 0;
    for (const auto& r : recs) {
        if (r.classification == ExitClassification::Complete) ++complete;
        if (r.classification == ExitClassification::Partial) ++partial;
        if (r.classification == ExitClassification::NoExit) ++none;
    }
    CHECK(complete == 1);
    CHECK(partial == 2);
    CHECK(none == 1);
}

TEST_CASE("scan_filings_dir parses names and rejects malformed ones") {
    testutil::TempDir dir;
    testutil::write_file(dir / "filings" / "my_firm_2013-04_10-Q.txt", "x");
    testutil::write_file(dir / "filings" / "notes.md", "skipped");
    auto refs = scan_filings_dir(dir / "filings");
    REQUIRE(refs.size() == 1);
    CHECK(refs[0].firm_id == "my_firm");
    CHECK(refs[0].report_month.str() == "2013-04");
    CHECK(refs[0].form == "10-Q");

    testutil::write_file(dir / "filings" / "badname.txt", "x");
    CHECK_THROWS_AS(scan_filings_dir(dir / "filings"), InputError);
    CHECK_THROWS_AS(scan_filings_dir(dir / "absent"), InputError);
}

TEST_CASE("ownership csv round-trips, including quoted names") {
    const std::vector<OwnershipCsvRow> rows = {
        {"acme", "Bluehill Ventures III, L.P.", "PRE_IPO", 12.0},
        {"acme", "Bluehill Ventures III, L.P.", "2013-01", 4.2},
        {"acme", "Odd \"Quote\" Capital", "2013-01", 1.25},
    };
    testutil::TempDir dir;
    save_ownership_csv(rows, dir / "ownership.csv");
    const auto loaded = load_ownership_csv(dir / "ownership.csv");
    REQUIRE(loaded.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(loaded[i].firm_id == rows[i].firm_id);
        CHECK(loaded[i].vc_raw_name == rows[i].vc_raw_name);
        CHECK(loaded[i].report_month == rows[i].report_month);
        CHECK(loaded[i].pct_owned == doctest::Approx(rows[i].pct_owned));
    }
    CHECK_THROWS_AS(load_ownership_csv(dir / "absent.csv"), InputError);
}

TEST_CASE("observations_from_csv_rows maps calendar months onto month indexes") {
    const std::vector<pit::FirmInfo> firms = {firm("acme", "2012-01", "2012-07")};
    const std::vector<OwnershipCsvRow> rows = {
        {"acme", "Bluehill Ventures", "PRE_IPO", 12.0},
        {"acme", "Bluehill Ventures", "2012-05", 11.0},  // pre-lockup calendar month
        {"acme", "Bluehill Ventures", "2013-01", 4.2},
        {"acme", "Bluehill Ventures", "2013-01", 9.9},   // duplicate: first wins
    };
    const auto obs = observations_from_csv_rows(rows, firms);
    REQUIRE(obs.size() == 3);
    CHECK_FALSE(obs[0].report_month.has_value());
    CHECK_FALSE(obs[1].report_month.has_value());
    CHECK(obs[2].report_month == 6);
    CHECK(obs[2].pct_owned == doctest::Approx(4.2));

    const std::vector<OwnershipCsvRow> unknown = {{"ghost", "X Capital", "PRE_IPO", 1.0}};
    CHECK_THROWS_AS(observations_from_csv_rows(unknown, firms), InputError);
    const std::vector<OwnershipCsvRow> bad_month = {{"acme", "X Capital", "201301", 1.0}};
    CHECK_THROWS_AS(observations_from_csv_rows(bad_month, firms), InputError);
}

TEST_CASE("stakes of one entity sum within a month and cap at 100") {
    const std::vector<OwnershipObservation> obs = {
        {"acme", "Bluehill Ventures III, L.P.", 3, 60.0},
        {"acme", "Bluehill Ventures IV, L.P.", 3, 55.0},
    };
    const auto series = build_series(obs);
    REQUIRE(series.size() == 1);
    REQUIRE(series[0].points.size() == 1);
    CHECK(series[0].points[0].second == doctest::Approx(100.0));
}

TEST_CASE("full corpus extraction reproduces the frozen expected statistics") {
    const auto base = testutil::fixtures_dir() / "ownership33";
    const auto refs = scan_filings_dir(base / "filings");
    const auto firms = pit::load_firms_json(base / "firms.json");
    const auto obs = build_observations(refs, firms, {});
    const auto series = build_series(obs);
    std::vector<ActualExitRecord> recs;
    for (const auto& s : series) recs.push_back(derive_actual_exit(s, 5.0, 60));
    const auto summary = summarize_exits(recs);

    const auto expected =
        nlohmann::json::parse(testutil::read_file(base / "expected.json"));
    CHECK(summary.n_records == expected["n_records"].get<int>());
    CHECK(summary.n_firms == expected["n_firms"].get<int>());
    CHECK(summary.n_vcs == expected["n_vcs"].get<int>());
    // the frozen values carry six decimals, so compare at that resolution
    CHECK(summary.pct_complete ==
          doctest::Approx(expected["pct_complete"].get<double>()).epsilon(1e-8));
    CHECK(summary.pct_partial ==
          doctest::Approx(expected["pct_partial"].get<double>()).epsilon(1e-8));
    CHECK(summary.pct_no_exit ==
          doctest::Approx(expected["pct_no_exit"].get<double>()).epsilon(1e-8));
    CHECK(*summary.median_first_action_months ==
          expected["median_first_action_months"].get<double>());
    CHECK(*summary.median_full_exit_months ==
          expected["median_full_exit_months"].get<double>());
}
