#include "exitbench/decision.hpp"

#include <charconv>
#include <regex>
#include <sstream>

namespace exitbench::agents {

std::string render_decision(const Decision& d) {
    switch (d.kind) {
        case Decision::Kind::Hold: return "DECISION: HOLD";
        case Decision::Kind::ExitNow: return "DECISION: EXIT_NOW";
        case Decision::Kind::ExitWithin:
            return "DECISION: EXIT_WITHIN(" + std::to_string(d.window) + ")";
    }
    return "DECISION: HOLD";
}

namespace {

const std::regex kDecisionLine(
    R"(^\s*DECISION\s*:\s*(?:(HOLD)|(EXIT_NOW)|EXIT_WITHIN\s*\(\s*([0-9]+)\s*\))\s*\.?\s*$)",
    std::regex::icase);

}  // namespace

DecisionParseResult parse_decision(const std::string& response_text) {
    DecisionParseResult result;
    result.failure = DecisionParseResult::Failure::AmbiguousDecision;

    std::istringstream in(response_text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (!std::regex_match(line, m, kDecisionLine)) continue;
        // last matching line wins; earlier matches are overwritten
        if (m[1].matched) {
            result.decision = Decision::hold();
            result.failure = DecisionParseResult::Failure::None;
        } else if (m[2].matched) {
            result.decision = Decision::exit_now();
            result.failure = DecisionParseResult::Failure::None;
        } else {
            const std::string digits = m[3].str();
            int k = 0;
            const auto [ptr, ec] =
                std::from_chars(digits.data(), digits.data() + digits.size(), k);
            if (ec != std::errc() || ptr != digits.data() + digits.size() || k < 1) {
                result.decision.reset();
                result.failure = DecisionParseResult::Failure::InvalidWindow;
            } else {
                result.decision = Decision::exit_within(k);
                result.failure = DecisionParseResult::Failure::None;
            }
        }
    }
    return result;
}

}  // namespace exitbench::agents
