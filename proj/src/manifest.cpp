#include "exitbench/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "exitbench/errors.hpp"

namespace exitbench::cli {

std::string manifest_to_json(const RunManifest& manifest) {
    nlohmann::json doc;
    doc["command"] = manifest.command;
    doc["config_digest"] = manifest.config_digest;
    doc["input_digests"] = manifest.input_digests;
    doc["record_counts"] = manifest.record_counts;
    doc["cache_hits"] = manifest.cache_hits;
    doc["cache_misses"] = manifest.cache_misses;
    doc["tool_version"] = manifest.tool_version;
    return doc.dump(2) + "\n";
}

void save_manifest(const RunManifest& manifest, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto path = out_dir / "run_manifest.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write manifest: " + path.string());
    }
    out << manifest_to_json(manifest);
}

}  // namespace exitbench::cli
