#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace exitbench::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Written with every run. Carries no timestamps so reruns stay
// byte-identical.
struct RunManifest {
    std::string command;
    std::string config_digest;
    std::map<std::string, std::string> input_digests;  // label -> sha256
    std::map<std::string, uint64_t> record_counts;     // stage counters
    uint64_t cache_hits = 0;
    uint64_t cache_misses = 0;
    std::string tool_version = kToolVersion;
};

std::string manifest_to_json(const RunManifest& manifest);
void save_manifest(const RunManifest& manifest, const std::filesystem::path& out_dir);

}  // namespace exitbench::cli
