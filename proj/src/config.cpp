#include "exitbench/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "exitbench/digest.hpp"

namespace exitbench::cli {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!known.count(key)) {
            throw InputError("config: unknown key '" + key + "' in " + where);
        }
    }
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& raw) {
    std::filesystem::path p(raw);
    return p.is_absolute() ? p : base / p;
}

agents::Decision parse_script_token(const std::string& token) {
    const auto parsed = agents::parse_decision("DECISION: " + token);
    if (!parsed.ok()) {
        throw InputError("config: bad script token '" + token + "'");
    }
    return *parsed.decision;
}

std::vector<agents::Decision> parse_script(const json& arr, const std::string& where) {
    if (!arr.is_array()) {
        throw InputError("config: " + where + " must be an array of decision tokens");
    }
    std::vector<agents::Decision> script;
    for (const auto& item : arr) {
        if (!item.is_string()) {
            throw InputError("config: " + where + " entries must be strings");
        }
        script.push_back(parse_script_token(item.get<std::string>()));
    }
    return script;
}

std::vector<agents::TheoryId> parse_theories(const json& arr, const std::string& where) {
    if (!arr.is_array()) {
        throw InputError("config: " + where + " must be an array");
    }
    std::vector<agents::TheoryId> ids;
    for (const auto& item : arr) {
        if (!item.is_string()) {
            throw InputError("config: " + where + " entries must be strings");
        }
        auto id = agents::theory_id_from_string(item.get<std::string>());
        if (!id) {
            throw InputError("config: unknown theory '" + item.get<std::string>() +
                             "' in " + where);
        }
        ids.push_back(*id);
    }
    return ids;
}

void parse_agent(const json& obj, agents::AgentConfig& agent) {
    reject_unknown_keys(obj,
                        {"kind", "model", "template", "temperature", "theories",
                         "ambiguous_fallback", "momentum_lookback", "momentum_threshold",
                         "hazard_points", "scripts", "default_script"},
                        "agent");
    if (obj.contains("kind")) {
        const auto name = obj["kind"].get<std::string>();
        auto kind = agents::agent_kind_from_string(name);
        if (!kind) {
            throw InputError("config: unknown agent kind '" + name + "'");
        }
        agent.kind = *kind;
    }
    if (obj.contains("model")) agent.model_name = obj["model"].get<std::string>();
    if (obj.contains("template")) agent.template_id = obj["template"].get<std::string>();
    if (obj.contains("temperature")) agent.temperature = obj["temperature"].get<double>();
    if (obj.contains("theories")) {
        agent.theory_ids = parse_theories(obj["theories"], "agent.theories");
    }
    if (obj.contains("ambiguous_fallback")) {
        const auto mode = obj["ambiguous_fallback"].get<std::string>();
        if (mode == "hold") {
            agent.ambiguous_fallback = agents::AmbiguousFallback::TreatAsHold;
        } else if (mode == "fail") {
            agent.ambiguous_fallback = agents::AmbiguousFallback::FailRun;
        } else {
            throw InputError("config: ambiguous_fallback must be 'hold' or 'fail'");
        }
    }
    if (obj.contains("momentum_lookback")) {
        agent.momentum_lookback = obj["momentum_lookback"].get<int>();
    }
    if (obj.contains("momentum_threshold")) {
        agent.momentum_threshold = obj["momentum_threshold"].get<double>();
    }
    if (obj.contains("hazard_points")) {
        for (const auto& point : obj["hazard_points"]) {
            if (!point.is_array() || point.size() != 2) {
                throw InputError("config: hazard_points entries must be [month, rate]");
            }
            agent.hazard_points.emplace_back(point[0].get<int>(),
                                             point[1].get<double>());
        }
    }
    if (obj.contains("scripts")) {
        for (const auto& [firm, arr] : obj["scripts"].items()) {
            agent.scripts[firm] = parse_script(arr, "agent.scripts." + firm);
        }
    }
    if (obj.contains("default_script")) {
        agent.default_script = parse_script(obj["default_script"], "agent.default_script");
    }
}

void parse_client(const json& obj, agents::ClientConfig& client) {
    reject_unknown_keys(obj,
                        {"base_url", "completions_path", "max_attempts",
                         "backoff_initial_ms", "requests_per_second",
                         "connect_timeout_ms", "read_timeout_ms", "api_key_env",
                         "offline"},
                        "client");
    if (obj.contains("base_url")) client.base_url = obj["base_url"].get<std::string>();
    if (obj.contains("completions_path")) {
        client.completions_path = obj["completions_path"].get<std::string>();
    }
    if (obj.contains("max_attempts")) client.max_attempts = obj["max_attempts"].get<int>();
    if (obj.contains("backoff_initial_ms")) {
        client.backoff_initial_ms = obj["backoff_initial_ms"].get<int>();
    }
    if (obj.contains("requests_per_second")) {
        client.requests_per_second = obj["requests_per_second"].get<double>();
    }
    if (obj.contains("connect_timeout_ms")) {
        client.connect_timeout_ms = obj["connect_timeout_ms"].get<int>();
    }
    if (obj.contains("read_timeout_ms")) {
        client.read_timeout_ms = obj["read_timeout_ms"].get<int>();
    }
    if (obj.contains("api_key_env")) {
        client.api_key_env = obj["api_key_env"].get<std::string>();
    }
    if (obj.contains("offline")) client.offline = obj["offline"].get<bool>();
}

void parse_matrix(const json& obj, RunConfig& config) {
    reject_unknown_keys(
        obj, {"models", "templates", "theory_sets", "exit_definitions",
              "volatility_filter"},
        "matrix");
    if (obj.contains("models")) {
        for (const auto& m : obj["models"]) {
            config.decision_axes.models.push_back(m.get<std::string>());
        }
    }
    if (obj.contains("templates")) {
        for (const auto& t : obj["templates"]) {
            config.decision_axes.templates.push_back(t.get<std::string>());
        }
    }
    if (obj.contains("theory_sets")) {
        for (const auto& set : obj["theory_sets"]) {
            config.decision_axes.theory_sets.push_back(
                parse_theories(set, "matrix.theory_sets"));
        }
    }
    if (obj.contains("exit_definitions")) {
        for (const auto& d : obj["exit_definitions"]) {
            auto def = eval::exit_definition_from_string(d.get<std::string>());
            if (!def) {
                throw InputError("config: unknown exit definition '" +
                                 d.get<std::string>() + "'");
            }
            config.eval_axes.exit_definitions.push_back(*def);
        }
    }
    if (obj.contains("volatility_filter")) {
        for (const auto& v : obj["volatility_filter"]) {
            config.eval_axes.volatility_filter.push_back(v.get<bool>());
        }
    }
}

void validate(const RunConfig& config) {
    if (config.horizon < 1) {
        throw InputError("config: horizon must be >= 1");
    }
    if (!(config.threshold_pct > 0.0 && config.threshold_pct < 100.0)) {
        throw InputError("config: threshold_pct must be inside (0, 100)");
    }
    if (config.materiality_delta_pp <= 0.0) {
        throw InputError("config: materiality_delta_pp must be positive");
    }
    if (config.max_in_flight < 1) {
        throw InputError("config: max_in_flight must be >= 1");
    }
}

}  // namespace

RunConfig load_config(const std::filesystem::path& config_path) {
    std::ifstream in(config_path);
    if (!in) {
        throw InputError("cannot open config: " + config_path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    json doc = json::parse(buf.str(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw InputError("config is not a JSON object: " + config_path.string());
    }
    reject_unknown_keys(doc,
                        {"paths", "agent", "client", "exit_definition", "horizon",
                         "threshold_pct", "materiality_delta_pp", "volatility_filter",
                         "exclude_censored", "max_in_flight", "seed", "matrix"},
                        "top level");

    RunConfig config;
    const auto base = std::filesystem::absolute(config_path).parent_path();
    if (doc.contains("paths")) {
        const auto& paths = doc["paths"];
        reject_unknown_keys(paths,
                            {"events", "firms", "filings", "templates", "reputation",
                             "ownership", "cache", "out"},
                            "paths");
        if (paths.contains("events")) {
            config.events_path = resolve(base, paths["events"].get<std::string>());
        }
        if (paths.contains("firms")) {
            config.firms_path = resolve(base, paths["firms"].get<std::string>());
        }
        if (paths.contains("filings")) {
            config.filings_dir = resolve(base, paths["filings"].get<std::string>());
        }
        if (paths.contains("templates")) {
            config.templates_dir = resolve(base, paths["templates"].get<std::string>());
        }
        if (paths.contains("reputation")) {
            config.reputation_path =
                resolve(base, paths["reputation"].get<std::string>());
        }
        if (paths.contains("ownership")) {
            config.ownership_path = resolve(base, paths["ownership"].get<std::string>());
        }
        if (paths.contains("cache")) {
            config.cache_dir = resolve(base, paths["cache"].get<std::string>());
        }
        if (paths.contains("out")) {
            config.out_dir = resolve(base, paths["out"].get<std::string>());
        }
    }
    if (doc.contains("agent")) parse_agent(doc["agent"], config.agent);
    if (doc.contains("client")) parse_client(doc["client"], config.client);
    if (doc.contains("exit_definition")) {
        const auto name = doc["exit_definition"].get<std::string>();
        auto def = eval::exit_definition_from_string(name);
        if (!def) {
            throw InputError("config: unknown exit definition '" + name + "'");
        }
        config.exit_definition = *def;
    }
    if (doc.contains("horizon")) config.horizon = doc["horizon"].get<int>();
    if (doc.contains("threshold_pct")) {
        config.threshold_pct = doc["threshold_pct"].get<double>();
    }
    if (doc.contains("materiality_delta_pp")) {
        config.materiality_delta_pp = doc["materiality_delta_pp"].get<double>();
    }
    if (doc.contains("volatility_filter")) {
        config.volatility_filter = doc["volatility_filter"].get<bool>();
    }
    if (doc.contains("exclude_censored")) {
        config.exclude_censored = doc["exclude_censored"].get<bool>();
    }
    if (doc.contains("max_in_flight")) {
        config.max_in_flight = doc["max_in_flight"].get<int>();
    }
    if (doc.contains("seed")) config.seed = doc["seed"].get<uint64_t>();
    if (doc.contains("matrix")) parse_matrix(doc["matrix"], config);

    if (config.ownership_path.empty() && !config.out_dir.empty()) {
        config.ownership_path = config.out_dir / "ownership.csv";
    }
    if (config.cache_dir.empty() && !config.out_dir.empty()) {
        config.cache_dir = config.out_dir / "cache";
    }
    validate(config);
    return config;
}

void apply_overrides(RunConfig& config, const CliOverrides& overrides) {
    if (overrides.agent) {
        auto kind = agents::agent_kind_from_string(*overrides.agent);
        if (!kind) {
            throw InputError("unknown agent kind '" + *overrides.agent + "'");
        }
        config.agent.kind = *kind;
    }
    if (overrides.model) config.agent.model_name = *overrides.model;
    if (overrides.template_id) config.agent.template_id = *overrides.template_id;
    if (overrides.exit_definition) {
        auto def = eval::exit_definition_from_string(*overrides.exit_definition);
        if (!def) {
            throw InputError("unknown exit definition '" + *overrides.exit_definition +
                             "'");
        }
        config.exit_definition = *def;
    }
    if (overrides.horizon) config.horizon = *overrides.horizon;
    if (overrides.threshold_pct) config.threshold_pct = *overrides.threshold_pct;
    if (overrides.volatility_filter) config.volatility_filter = *overrides.volatility_filter;
    if (overrides.cache_dir) {
        config.cache_dir = std::filesystem::absolute(*overrides.cache_dir);
    }
    if (overrides.out_dir) {
        config.out_dir = std::filesystem::absolute(*overrides.out_dir);
    }
    if (overrides.max_in_flight) config.max_in_flight = *overrides.max_in_flight;
    if (overrides.seed) config.seed = *overrides.seed;
    validate(config);
}

std::string effective_config_json(const RunConfig& config) {
    json doc;
    doc["paths"] = {{"events", config.events_path.string()},
                    {"firms", config.firms_path.string()},
                    {"filings", config.filings_dir.string()},
                    {"templates", config.templates_dir.string()},
                    {"reputation", config.reputation_path.string()},
                    {"ownership", config.ownership_path.string()},
                    {"cache", config.cache_dir.string()},
                    {"out", config.out_dir.string()}};

    json agent;
    agent["kind"] = agents::to_string(config.agent.kind);
    if (config.agent.model_name) agent["model"] = *config.agent.model_name;
    if (config.agent.template_id) agent["template"] = *config.agent.template_id;
    agent["temperature"] = config.agent.temperature;
    json theories = json::array();
    for (auto id : config.agent.theory_ids) theories.push_back(agents::to_string(id));
    agent["theories"] = theories;
    agent["ambiguous_fallback"] =
        config.agent.ambiguous_fallback == agents::AmbiguousFallback::TreatAsHold
            ? "hold"
            : "fail";
    agent["momentum_lookback"] = config.agent.momentum_lookback;
    agent["momentum_threshold"] = config.agent.momentum_threshold;
    json hazard = json::array();
    for (const auto& [month, rate] : config.agent.hazard_points) {
        hazard.push_back(json::array({month, rate}));
    }
    agent["hazard_points"] = hazard;
    json scripts;
    for (const auto& [firm, script] : config.agent.scripts) {
        json arr = json::array();
        for (const auto& d : script) arr.push_back(agents::render_decision(d));
        scripts[firm] = arr;
    }
    agent["scripts"] = scripts.is_null() ? json::object() : scripts;
    json default_script = json::array();
    for (const auto& d : config.agent.default_script) {
        default_script.push_back(agents::render_decision(d));
    }
    agent["default_script"] = default_script;
    doc["agent"] = agent;

    doc["client"] = {{"base_url", config.client.base_url},
                     {"completions_path", config.client.completions_path},
                     {"max_attempts", config.client.max_attempts},
                     {"backoff_initial_ms", config.client.backoff_initial_ms},
                     {"requests_per_second", config.client.requests_per_second},
                     {"offline", config.client.offline}};
    doc["exit_definition"] = eval::to_string(config.exit_definition);
    doc["horizon"] = config.horizon;
    doc["threshold_pct"] = config.threshold_pct;
    doc["materiality_delta_pp"] = config.materiality_delta_pp;
    doc["volatility_filter"] = config.volatility_filter;
    doc["exclude_censored"] = config.exclude_censored;
    doc["max_in_flight"] = config.max_in_flight;
    doc["seed"] = config.seed;

    json matrix;
    matrix["models"] = config.decision_axes.models;
    matrix["templates"] = config.decision_axes.templates;
    json theory_sets = json::array();
    for (const auto& set : config.decision_axes.theory_sets) {
        theory_sets.push_back(eval::theory_set_label(set));
    }
    matrix["theory_sets"] = theory_sets;
    json defs = json::array();
    for (auto def : config.eval_axes.exit_definitions) {
        defs.push_back(eval::to_string(def));
    }
    matrix["exit_definitions"] = defs;
    matrix["volatility_filter"] = config.eval_axes.volatility_filter;
    doc["matrix"] = matrix;

    return doc.dump(2);
}

std::string config_digest(const RunConfig& config) {
    return sha256_hex(effective_config_json(config));
}

}  // namespace exitbench::cli
