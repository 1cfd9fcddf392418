#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "exitbench/errors.hpp"
#include "exitbench/timeline.hpp"

namespace exitbench::agents {

struct MissingPlaceholderError : Error {
    using Error::Error;
};
struct UnknownTheoryError : InputError {
    using InputError::InputError;
};
struct TemplateNotFoundError : InputError {
    using InputError::InputError;
};

enum class TheoryId {
    signaling,
    survival_determinants,
    monitoring,
    lockup_timing_risk,
    real_options,
};

const char* to_string(TheoryId id);
std::optional<TheoryId> theory_id_from_string(std::string_view name);

struct TheoryBlock {
    TheoryId id;
    std::string text;
};

// The five built-in blocks, in enum order.
const std::vector<TheoryBlock>& all_theory_blocks();

// Resolves ids to blocks, preserving request order. Throws UnknownTheoryError
// is impossible here by construction; provided for name-based lookup.
std::vector<TheoryBlock> theory_blocks_for(const std::vector<TheoryId>& ids);
std::vector<TheoryBlock> theory_blocks_by_name(const std::vector<std::string>& names);

struct PromptTemplate {
    std::string template_id;
    std::string body;
};

inline constexpr const char* kPlaceholders[] = {
    "{{month}}", "{{firm_facts}}", "{{market_facts}}", "{{theory_blocks}}",
    "{{instructions}}"};

// Loads templates/{template_id}.txt.
PromptTemplate load_template(const std::filesystem::path& templates_dir,
                             const std::string& template_id);

// Every placeholder must appear exactly once.
void validate_template(const PromptTemplate& tmpl);

// Substitutes all placeholders. Events render in ascending month order; an
// empty theory list renders a fixed "no theory provided" sentinel. Output is
// deterministic for identical inputs.
std::string build_prompt(const pit::InfoPacket& packet, const PromptTemplate& tmpl,
                         const std::vector<TheoryBlock>& theory);

}  // namespace exitbench::agents
