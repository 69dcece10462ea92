#pragma once

#include <optional>
#include <string>

#include "sitewarden/chat.hpp"
#include "sitewarden/ingest.hpp"
#include "sitewarden/rulegen.hpp"

namespace sitewarden::assess {

enum class Label { Safe, Unsafe };

std::string label_name(Label label);
std::optional<Label> label_from_name(const std::string& name);

// Five-level hazard rating; 4 and 5 map to Unsafe.
struct SeverityRating {
    int value = 1;
};

Label severity_to_label(SeverityRating severity);

// Per-frame Safe/Unsafe verdict with a one-sentence reason. Severity is
// advisory metadata present only when the model volunteered it; the model's
// own Safe/Unsafe word is authoritative for `label`, and a severity that
// contradicts it sets inconsistency_flag instead of being corrected.
struct Assessment {
    int frame_index = 0;
    ingest::TimeLabel time_label;
    Label label = Label::Safe;
    std::string reason;
    std::optional<SeverityRating> severity;
    bool inconsistency_flag = false;
    std::string rule_set_ref;       // provenance label of the RuleSet used
    std::string provenance_label;
    std::string raw_text;
    std::string request_key;
    int retries = 0;
};

// Renders the assessment prompt: hazard-identification instruction, the
// five-level scale with its descriptions, the thresholding sentence, the
// exact two-line output format, and the rules text block.
std::string build_assessment_prompt(const rulegen::RuleSet& rules);

struct ParsedVerdict {
    Label label = Label::Safe;
    std::string reason;
    std::optional<SeverityRating> severity;
};

// Strict parse of the two required lines. Whitespace and casing around the
// line prefixes are normalized; the reason text is stored verbatim. A
// "Severity:" line or a parenthesized digit on the Situation line populates
// severity.
ParsedVerdict parse_assessment(const std::string& text);

// The canonical chat request for one frame's assessment; its request_key
// doubles as the stage cache key.
inference::ChatRequest build_assess_request(const ingest::Frame& frame,
                                            const rulegen::RuleSet& rules,
                                            const std::string& model_id);

// Re-presents the frame image together with its rule set to the vision
// model and parses the verdict, with one format-reminder retry.
Assessment assess_frame(const ingest::Frame& frame, const rulegen::RuleSet& rules,
                        inference::ChatBackend& backend, const std::string& model_id);

}  // namespace sitewarden::assess
