#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "sitewarden/chat.hpp"
#include "sitewarden/perception.hpp"
#include "sitewarden/regstore.hpp"

namespace sitewarden::rulegen {

enum class Polarity { safe, unsafe_ };

struct SafetyRule {
    Polarity polarity = Polarity::safe;
    int ordinal = 1;            // 1 or 2 within its polarity
    std::string principle;      // abstract safety principle
    std::string criterion;      // measurable check; equals principle when the
                                // model emitted a single sentence

    bool operator==(const SafetyRule&) const = default;
};

// Exactly two safe + two unsafe rules for one frame, plus the retrieval
// trail that grounded them.
struct RuleSet {
    int frame_index = 0;
    std::array<SafetyRule, 4> rules;       // safe 1, safe 2, unsafe 1, unsafe 2
    std::vector<std::string> grounding;    // chunk ids in retrieval order
    std::string provenance_label;
    std::string raw_text;                  // unparsed model reply
    std::string request_key;
    int retries = 0;
};

inline constexpr const char* kSafeHeader = "Rules for Safe Construction Situation:";
inline constexpr const char* kUnsafeHeader = "Rules for Unsafe Construction Situation:";

std::string default_rule_role_line();  // overridable per run

// Renders the rule-generation prompt: role line, the 2+2 derivation
// instructions, the required headers, the scene description block, and the
// retrieved regulation chunks each prefixed by its clause id. An empty chunk
// list is stated explicitly rather than omitted.
std::string build_rule_prompt(const std::string& description,
                              std::span<const regstore::Chunk> context_chunks,
                              const std::string& role_line = default_rule_role_line());

// Strict parse of the reply format: both headers (case-insensitive, with or
// without the surrounding quotes), exactly items 1. and 2. under each. Each
// item splits into principle/criterion at the first sentence boundary.
std::array<SafetyRule, 4> parse_rule_response(const std::string& text);

// Canonical rendering of four rules in the reply format; parse_rule_response
// inverts it.
std::string render_rule_response(std::span<const SafetyRule> rules);

// Appended to the prompt for the single retry after a parse failure.
std::string format_reminder();

// The canonical chat request for one frame's rule generation; its
// request_key doubles as the stage cache key even when a retry follows.
inference::ChatRequest build_rule_request(const std::string& description_text,
                                          std::span<const regstore::Chunk> context_chunks,
                                          const std::string& model_id,
                                          const std::string& role_line = default_rule_role_line());

// Retrieve top-k chunks for the description text, prompt the rules model,
// parse, and keep the grounding trail. One format-reminder retry; a second
// parse failure propagates with the raw reply attached.
RuleSet generate_rules(const perception::SceneDescription& description,
                       const regstore::EmbeddingIndex& index, const regstore::Embedder& embedder,
                       int k, inference::ChatBackend& backend, const std::string& model_id,
                       const std::string& role_line = default_rule_role_line());

}  // namespace sitewarden::rulegen
