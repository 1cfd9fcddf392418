#include "exitbench/agents.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "exitbench/digest.hpp"

namespace exitbench::agents {

const char* to_string(AgentKind kind) {
    switch (kind) {
        case AgentKind::llm: return "llm";
        case AgentKind::lockup_exit: return "lockup_exit";
        case AgentKind::momentum: return "momentum";
        case AgentKind::hazard_curve: return "hazard_curve";
        case AgentKind::replay_actual: return "replay_actual";
        case AgentKind::scripted_mock: return "scripted_mock";
    }
    return "unknown";
}

std::optional<AgentKind> agent_kind_from_string(std::string_view name) {
    for (AgentKind kind :
         {AgentKind::llm, AgentKind::lockup_exit, AgentKind::momentum,
          AgentKind::hazard_curve, AgentKind::replay_actual, AgentKind::scripted_mock}) {
        if (name == to_string(kind)) return kind;
    }
    return std::nullopt;
}

void validate_agent_config(const AgentConfig& config) {
    if (config.temperature < 0.0) {
        throw AgentConfigError("temperature must be >= 0");
    }
    switch (config.kind) {
        case AgentKind::llm:
            if (!config.model_name || config.model_name->empty()) {
                throw AgentConfigError("llm agent requires model_name");
            }
            if (!config.template_id || config.template_id->empty()) {
                throw AgentConfigError("llm agent requires template_id");
            }
            break;
        case AgentKind::momentum:
            if (config.momentum_lookback < 1) {
                throw AgentConfigError("momentum lookback must be >= 1");
            }
            break;
        case AgentKind::hazard_curve: {
            if (config.hazard_points.empty()) {
                throw AgentConfigError("hazard_curve agent requires curve points");
            }
            std::set<pit::MonthIndex> months;
            for (const auto& [month, rate] : config.hazard_points) {
                if (!months.insert(month).second) {
                    throw AgentConfigError("hazard curve repeats month " +
                                           std::to_string(month));
                }
            }
            break;
        }
        case AgentKind::scripted_mock:
            if (config.scripts.empty() && config.default_script.empty()) {
                throw AgentConfigError("scripted_mock agent requires a script");
            }
            break;
        case AgentKind::lockup_exit:
        case AgentKind::replay_actual:
            break;
    }
}

namespace {

struct LockupExitAgent final : DecisionAgent {
    AgentDecision decide(const pit::InfoPacket& packet) override {
        return {packet.as_of == 0 ? Decision::exit_now() : Decision::hold(), "", ""};
    }
};

struct MomentumAgent final : DecisionAgent {
    MomentumAgent(int lookback, double threshold)
        : lookback_(lookback), threshold_(threshold) {}

    AgentDecision decide(const pit::InfoPacket& packet) override {
        std::map<pit::MonthIndex, double> closes;
        for (const auto& ev : packet.events) {
            if (ev.kind == pit::EventKind::price) {
                closes[ev.month] = ev.payload.at("close").get<double>();
            }
        }
        const pit::MonthIndex t = packet.as_of;
        const pit::MonthIndex from = t - lookback_;
        auto now_it = closes.find(t);
        auto from_it = from >= 0 ? closes.find(from) : closes.end();
        if (now_it == closes.end() || from_it == closes.end()) {
            return {Decision::hold(), "", "insufficient price history"};
        }
        const double trailing = now_it->second / from_it->second - 1.0;
        if (trailing < threshold_) {
            return {Decision::exit_now(), "", ""};
        }
        return {Decision::hold(), "", ""};
    }

    int lookback_;
    double threshold_;
};

struct HazardCurveAgent final : DecisionAgent {
    explicit HazardCurveAgent(const std::vector<std::pair<pit::MonthIndex, double>>& points) {
        peak_month_ = points.front().first;
        double peak_rate = points.front().second;
        for (const auto& [month, rate] : points) {
            if (rate > peak_rate || (rate == peak_rate && month < peak_month_)) {
                peak_rate = rate;
                peak_month_ = month;
            }
        }
    }

    AgentDecision decide(const pit::InfoPacket& packet) override {
        return {packet.as_of > peak_month_ ? Decision::exit_now() : Decision::hold(),
                "", ""};
    }

    pit::MonthIndex peak_month_ = 0;
};

struct ReplayActualAgent final : DecisionAgent {
    explicit ReplayActualAgent(std::optional<pit::MonthIndex> exit_month)
        : exit_month_(exit_month) {}

    AgentDecision decide(const pit::InfoPacket& packet) override {
        if (exit_month_ && packet.as_of >= *exit_month_) {
            return {Decision::exit_now(), "", ""};
        }
        return {Decision::hold(), "", ""};
    }

    std::optional<pit::MonthIndex> exit_month_;
};

struct ScriptedMockAgent final : DecisionAgent {
    explicit ScriptedMockAgent(std::vector<Decision> script)
        : script_(std::move(script)) {}

    AgentDecision decide(const pit::InfoPacket& packet) override {
        if (next_ >= script_.size()) {
            throw ScriptExhaustedError("script for " + packet.firm_id +
                                       " exhausted at month " +
                                       std::to_string(packet.as_of));
        }
        return {script_[next_++], "", ""};
    }

    std::vector<Decision> script_;
    size_t next_ = 0;
};

struct LlmAgent final : DecisionAgent {
    LlmAgent(const AgentConfig& config, const AgentRuntime& runtime)
        : config_(config), runtime_(runtime) {
        if (!runtime_.client || !runtime_.prompt_template) {
            throw AgentConfigError("llm agent runtime lacks client or template");
        }
    }

    AgentDecision decide(const pit::InfoPacket& packet) override {
        const std::string prompt =
            build_prompt(packet, *runtime_.prompt_template, runtime_.theory);
        AgentDecision out;
        out.prompt_digest = sha256_hex(prompt);
        const std::string response = runtime_.client->complete_with_cache(prompt);
        const DecisionParseResult parsed = parse_decision(response);
        if (parsed.ok()) {
            out.decision = *parsed.decision;
            return out;
        }
        const char* what =
            parsed.failure == DecisionParseResult::Failure::InvalidWindow
                ? "invalid exit window"
                : "no decision line";
        if (config_.ambiguous_fallback == AmbiguousFallback::FailRun) {
            throw AmbiguousDecisionError(std::string(what) + " in response for " +
                                         packet.firm_id + " month " +
                                         std::to_string(packet.as_of));
        }
        out.decision = Decision::hold();
        out.note = std::string(what) + "; treated as HOLD";
        return out;
    }

    AgentConfig config_;
    AgentRuntime runtime_;
};

}  // namespace

std::unique_ptr<DecisionAgent> make_agent(const AgentConfig& config,
                                          const AgentRuntime& runtime,
                                          const std::string& firm_id) {
    validate_agent_config(config);
    switch (config.kind) {
        case AgentKind::llm:
            return std::make_unique<LlmAgent>(config, runtime);
        case AgentKind::lockup_exit:
            return std::make_unique<LockupExitAgent>();
        case AgentKind::momentum:
            return std::make_unique<MomentumAgent>(config.momentum_lookback,
                                                   config.momentum_threshold);
        case AgentKind::hazard_curve:
            return std::make_unique<HazardCurveAgent>(config.hazard_points);
        case AgentKind::replay_actual: {
            auto it = config.replay_exit_months.find(firm_id);
            std::optional<pit::MonthIndex> month;
            if (it != config.replay_exit_months.end()) month = it->second;
            return std::make_unique<ReplayActualAgent>(month);
        }
        case AgentKind::scripted_mock: {
            auto it = config.scripts.find(firm_id);
            const auto& script =
                it != config.scripts.end() ? it->second : config.default_script;
            if (script.empty()) {
                throw AgentConfigError("no script for firm " + firm_id);
            }
            return std::make_unique<ScriptedMockAgent>(script);
        }
    }
    throw AgentConfigError("unknown agent kind");
}

}  // namespace exitbench::agents
