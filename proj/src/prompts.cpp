#include "exitbench/prompts.hpp"

#include <fstream>
#include <sstream>

namespace exitbench::agents {

const char* to_string(TheoryId id) {
    switch (id) {
        case TheoryId::signaling: return "signaling";
        case TheoryId::survival_determinants: return "survival_determinants";
        case TheoryId::monitoring: return "monitoring";
        case TheoryId::lockup_timing_risk: return "lockup_timing_risk";
        case TheoryId::real_options: return "real_options";
    }
    return "unknown";
}

std::optional<TheoryId> theory_id_from_string(std::string_view name) {
    for (TheoryId id : {TheoryId::signaling, TheoryId::survival_determinants,
                        TheoryId::monitoring, TheoryId::lockup_timing_risk,
                        TheoryId::real_options}) {
        if (name == to_string(id)) return id;
    }
    return std::nullopt;
}

const std::vector<TheoryBlock>& all_theory_blocks() {
    static const std::vector<TheoryBlock> blocks = {
        {TheoryId::signaling,
         "Insider and early-investor holdings carry information. Retaining a stake "
         "signals confidence to outside investors, while a large early sale can be "
         "read as a negative signal and depress the price the seller receives."},
        {TheoryId::survival_determinants,
         "Post-IPO survival depends on firm fundamentals such as size, age, "
         "profitability, and industry conditions. Deteriorating fundamentals raise "
         "failure risk and argue for exiting before distress is fully priced in."},
        {TheoryId::monitoring,
         "Early investors add value through board seats and active oversight. That "
         "marginal value declines after the IPO as public governance takes over, so "
         "continued holding buys progressively less influence over outcomes."},
        {TheoryId::lockup_timing_risk,
         "Selling pressure clusters around lockup expiration, when restricted "
         "shareholders first become free to sell. Prices often dip near the "
         "expiration date, and crowding into that window can realize the dip."},
        {TheoryId::real_options,
         "Holding a stake is an option on future upside. Under high uncertainty the "
         "value of waiting rises, favoring later exit, unless downside risk or "
         "portfolio considerations dominate the option value."},
    };
    return blocks;
}

std::vector<TheoryBlock> theory_blocks_for(const std::vector<TheoryId>& ids) {
    std::vector<TheoryBlock> out;
    for (TheoryId id : ids) {
        for (const auto& block : all_theory_blocks()) {
            if (block.id == id) {
                out.push_back(block);
                break;
            }
        }
    }
    return out;
}

std::vector<TheoryBlock> theory_blocks_by_name(const std::vector<std::string>& names) {
    std::vector<TheoryId> ids;
    for (const auto& name : names) {
        auto id = theory_id_from_string(name);
        if (!id) {
            throw UnknownTheoryError("unknown theory id: " + name);
        }
        ids.push_back(*id);
    }
    return theory_blocks_for(ids);
}

PromptTemplate load_template(const std::filesystem::path& templates_dir,
                             const std::string& template_id) {
    const auto path = templates_dir / (template_id + ".txt");
    std::ifstream in(path);
    if (!in) {
        throw TemplateNotFoundError("prompt template not found: " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    PromptTemplate tmpl{template_id, buf.str()};
    validate_template(tmpl);
    return tmpl;
}

namespace {

size_t count_occurrences(const std::string& haystack, const std::string& needle) {
    size_t count = 0;
    for (size_t pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

std::string replace_once(std::string body, const std::string& placeholder,
                         const std::string& value) {
    const size_t pos = body.find(placeholder);
    if (pos == std::string::npos) {
        throw MissingPlaceholderError("template lacks " + placeholder);
    }
    body.replace(pos, placeholder.size(), value);
    return body;
}

bool is_market_kind(pit::EventKind kind) {
    return kind == pit::EventKind::industry || kind == pit::EventKind::macro;
}

std::string render_payload(const nlohmann::json& payload) {
    if (payload.is_object()) {
        if (payload.contains("text") && payload["text"].is_string()) {
            return payload["text"].get<std::string>();
        }
        if (payload.contains("close") && payload.size() == 1) {
            std::ostringstream out;
            out << "close " << payload["close"].get<double>();
            return out.str();
        }
    }
    return payload.dump();  // sorted keys, deterministic
}

std::string render_events(const std::vector<pit::EventRecord>& events, bool market) {
    std::string out;
    for (const auto& ev : events) {
        if (is_market_kind(ev.kind) != market) continue;
        out += "- month " + std::to_string(ev.month) + " [" +
               pit::to_string(ev.kind) + "] " + render_payload(ev.payload) + "\n";
    }
    if (out.empty()) {
        out = market ? "- no market events on record\n" : "- no firm events on record\n";
    }
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

const char* kInstructions =
    "Weigh the evidence above and decide whether the investor should keep holding "
    "this position or exit it. Explain your reasoning briefly, then finish with one "
    "final line in exactly this form:\n"
    "DECISION: HOLD\n"
    "or\n"
    "DECISION: EXIT_NOW\n"
    "or\n"
    "DECISION: EXIT_WITHIN(k)\n"
    "where k is a positive whole number of months.";

}  // namespace

void validate_template(const PromptTemplate& tmpl) {
    for (const char* placeholder : kPlaceholders) {
        const size_t n = count_occurrences(tmpl.body, placeholder);
        if (n == 0) {
            throw MissingPlaceholderError("template '" + tmpl.template_id +
                                          "' lacks placeholder " + placeholder);
        }
        if (n > 1) {
            throw MissingPlaceholderError("template '" + tmpl.template_id +
                                          "' repeats placeholder " + placeholder);
        }
    }
}

std::string build_prompt(const pit::InfoPacket& packet, const PromptTemplate& tmpl,
                         const std::vector<TheoryBlock>& theory) {
    if (packet.firm_id.empty()) {
        throw Error("build_prompt: empty packet");
    }
    validate_template(tmpl);

    std::string theory_text;
    if (theory.empty()) {
        theory_text = "(no theory provided)";
    } else {
        for (size_t i = 0; i < theory.size(); ++i) {
            if (i) theory_text += '\n';
            theory_text += "- ";
            theory_text += to_string(theory[i].id);
            theory_text += ": ";
            theory_text += theory[i].text;
        }
    }

    std::string firm_facts = "Firm " + packet.firm_id + ", month " +
                             std::to_string(packet.as_of) +
                             " since lockup expiration.\n" +
                             render_events(packet.events, /*market=*/false);

    std::string body = tmpl.body;
    body = replace_once(std::move(body), "{{month}}", std::to_string(packet.as_of));
    body = replace_once(std::move(body), "{{firm_facts}}", firm_facts);
    body = replace_once(std::move(body), "{{market_facts}}",
                        render_events(packet.events, /*market=*/true));
    body = replace_once(std::move(body), "{{theory_blocks}}", theory_text);
    body = replace_once(std::move(body), "{{instructions}}", kInstructions);
    return body;
}

}  // namespace exitbench::agents
