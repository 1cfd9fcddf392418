#pragma once

#include <optional>
#include <string>

namespace exitbench::agents {

// Monthly recommendation. ExitWithin carries a window length in months;
// window = 0 is not representable (that is ExitNow).
struct Decision {
    enum class Kind { Hold, ExitNow, ExitWithin };
    Kind kind = Kind::Hold;
    int window = 0;  // >= 1, ExitWithin only

    static Decision hold() { return {Kind::Hold, 0}; }
    static Decision exit_now() { return {Kind::ExitNow, 0}; }
    static Decision exit_within(int k) { return {Kind::ExitWithin, k}; }

    bool recommends_exit() const { return kind != Kind::Hold; }
    bool operator==(const Decision&) const = default;
};

// The grammar line: "DECISION: HOLD" / "DECISION: EXIT_NOW" /
// "DECISION: EXIT_WITHIN(k)".
std::string render_decision(const Decision& d);

struct DecisionParseResult {
    enum class Failure { None, AmbiguousDecision, InvalidWindow };
    std::optional<Decision> decision;
    Failure failure = Failure::None;

    bool ok() const { return decision.has_value(); }
};

// Total over arbitrary text: scans for the last line matching
// `DECISION: (HOLD | EXIT_NOW | EXIT_WITHIN(k))`, case-insensitive. No line
// matches -> AmbiguousDecision; k < 1 or unrepresentably large -> InvalidWindow.
// Never throws.
DecisionParseResult parse_decision(const std::string& response_text);

}  // namespace exitbench::agents
