#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "exitbench/decision.hpp"
#include "exitbench/errors.hpp"
#include "exitbench/llm_client.hpp"
#include "exitbench/prompts.hpp"
#include "exitbench/timeline.hpp"

namespace exitbench::agents {

struct ScriptExhaustedError : Error {
    using Error::Error;
};
struct AgentConfigError : InputError {
    using InputError::InputError;
};
struct AmbiguousDecisionError : Error {
    using Error::Error;
};

enum class AgentKind { llm, lockup_exit, momentum, hazard_curve, replay_actual, scripted_mock };

const char* to_string(AgentKind kind);
std::optional<AgentKind> agent_kind_from_string(std::string_view name);

enum class AmbiguousFallback { TreatAsHold, FailRun };

struct AgentConfig {
    AgentKind kind = AgentKind::lockup_exit;

    // llm
    std::optional<std::string> model_name;
    std::optional<std::string> template_id;
    double temperature = 0.0;
    std::vector<TheoryId> theory_ids;
    AmbiguousFallback ambiguous_fallback = AmbiguousFallback::TreatAsHold;

    // momentum
    int momentum_lookback = 3;
    double momentum_threshold = -0.10;  // fraction

    // hazard_curve: (month, hazard rate) points; peak month = argmax hazard,
    // earliest on ties
    std::vector<std::pair<pit::MonthIndex, double>> hazard_points;

    // scripted_mock: per-firm scripts, with a fallback script for firms
    // without one
    std::map<std::string, std::vector<Decision>> scripts;
    std::vector<Decision> default_script;

    // replay_actual: recorded exit month per firm; absent firm = never exits
    std::map<std::string, pit::MonthIndex> replay_exit_months;
};

// Throws AgentConfigError: llm requires model_name and template_id;
// temperature must be >= 0; momentum lookback >= 1; hazard_curve requires
// nonempty points with distinct months; scripted_mock requires a script.
void validate_agent_config(const AgentConfig& config);

struct AgentDecision {
    Decision decision;
    std::string prompt_digest;  // llm only: sha256 of the prompt sent
    std::string note;           // nonempty when a fallback or quirk applied
};

// One agent instance serves one firm's month sequence; the backtest calls
// decide once per month in ascending order. Instances for different firms
// may run on different threads; shared pieces (LLM client, template) are
// internally synchronized or immutable.
class DecisionAgent {
public:
    virtual ~DecisionAgent() = default;
    virtual AgentDecision decide(const pit::InfoPacket& packet) = 0;
};

// Shared, immutable runtime the llm agent draws on. Unused by rule agents.
struct AgentRuntime {
    std::shared_ptr<LlmClient> client;
    std::optional<PromptTemplate> prompt_template;
    std::vector<TheoryBlock> theory;
};

std::unique_ptr<DecisionAgent> make_agent(const AgentConfig& config,
                                          const AgentRuntime& runtime,
                                          const std::string& firm_id);

}  // namespace exitbench::agents
