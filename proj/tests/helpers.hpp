#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "exitbench/timeline.hpp"

namespace testutil {

// Self-cleaning unique directory under the system temp root.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<uint64_t> counter{0};
        const auto base = std::filesystem::temp_directory_path() / "exitbench_test";
        path = base / (std::to_string(::getpid()) + "_" +
                       std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const {
        return path / name;
    }
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::filesystem::path fixtures_dir() {
    return std::filesystem::path(EXITBENCH_FIXTURES_DIR);
}

inline exitbench::pit::EventRecord price_event(const std::string& firm, int month,
                                               double close,
                                               const std::string& source = "") {
    exitbench::pit::EventRecord r;
    r.firm_id = firm;
    r.month = month;
    r.kind = exitbench::pit::EventKind::price;
    r.payload = {{"close", close}};
    r.source_id = source.empty() ? "px-" + firm + "-" + std::to_string(month) : source;
    return r;
}

inline exitbench::pit::EventRecord text_event(const std::string& firm, int month,
                                              exitbench::pit::EventKind kind,
                                              const std::string& text,
                                              const std::string& source) {
    exitbench::pit::EventRecord r;
    r.firm_id = firm;
    r.month = month;
    r.kind = kind;
    r.payload = {{"text", text}};
    r.source_id = source;
    return r;
}

// Random event set over `n_firms` firms with months in [0, horizon]; source
// ids are globally unique so duplicate-key rejection never triggers.
inline std::vector<exitbench::pit::EventRecord> random_records(std::mt19937& rng,
                                                               int n_firms,
                                                               int horizon) {
    using exitbench::pit::EventKind;
    static const EventKind kKinds[] = {EventKind::price, EventKind::news,
                                       EventKind::filing_10Q, EventKind::earnings_call,
                                       EventKind::industry, EventKind::macro,
                                       EventKind::patent};
    std::uniform_int_distribution<int> month_dist(0, horizon);
    std::uniform_int_distribution<int> kind_dist(0, 6);
    std::uniform_real_distribution<double> price_dist(1.0, 100.0);
    std::uniform_int_distribution<int> count_dist(1, 40);

    std::vector<exitbench::pit::EventRecord> records;
    int source = 0;
    for (int f = 0; f < n_firms; ++f) {
        const std::string firm = "firm" + std::to_string(f);
        const int n = count_dist(rng);
        for (int i = 0; i < n; ++i) {
            const EventKind kind = kKinds[kind_dist(rng)];
            const int month = month_dist(rng);
            const std::string sid = "s" + std::to_string(source++);
            if (kind == EventKind::price) {
                records.push_back(price_event(firm, month, price_dist(rng), sid));
            } else {
                records.push_back(text_event(firm, month, kind, "event", sid));
            }
        }
    }
    return records;
}

}  // namespace testutil
