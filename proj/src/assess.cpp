#include "sitewarden/assess.hpp"

#include <cctype>
#include <sstream>

#include "sitewarden/error.hpp"
#include "sitewarden/report.hpp"
#include "sitewarden/util.hpp"

namespace sitewarden::assess {

namespace {

// Trailing "(d)" with d in 1..5, e.g. "Unsafe (4)". Returns the digit and
// strips it from `value`.
std::optional<int> strip_parenthesized_rating(std::string& value) {
    std::string t = trim(value);
    if (t.size() >= 3 && t.back() == ')' && t[t.size() - 3] == '(' &&
        t[t.size() - 2] >= '1' && t[t.size() - 2] <= '5') {
        int rating = t[t.size() - 2] - '0';
        value = trim(t.substr(0, t.size() - 3));
        return rating;
    }
    value = std::move(t);
    return std::nullopt;
}

bool line_prefix(const std::string& line, const char* prefix, std::string& rest) {
    std::string lower = to_lower(trim(line));
    std::string want = to_lower(prefix);
    if (lower.rfind(want, 0) != 0) return false;
    rest = trim(trim(line).substr(want.size()));
    return true;
}

}  // namespace

std::string label_name(Label label) {
    return label == Label::Safe ? "Safe" : "Unsafe";
}

std::optional<Label> label_from_name(const std::string& name) {
    std::string lower = to_lower(trim(name));
    if (lower == "safe") return Label::Safe;
    if (lower == "unsafe") return Label::Unsafe;
    return std::nullopt;
}

Label severity_to_label(SeverityRating severity) {
    return severity.value >= 4 ? Label::Unsafe : Label::Safe;
}

std::string build_assessment_prompt(const rulegen::RuleSet& rules) {
    const std::string rules_text =
        rules.raw_text.empty() ? rulegen::render_rule_response(rules.rules) : rules.raw_text;
    std::ostringstream prompt;
    prompt
        << "1. Examine the image and identify any potential safety hazards based on the "
           "defined rules.\n"
           "2. Rate the severity of the hazard on a scale of 1 to 5:\n"
           "    - 1 = No real hazard or extremely minor risk\n"
           "    - 2 = Mild risk that does not violate serious safety regulations\n"
           "    - 3 = Moderate risk that may need attention but is not a major legal breach\n"
           "    - 4 = Serious hazard posing high risk of harm or a clear legal breach\n"
           "    - 5 = Extremely serious, life-threatening hazard or glaring violation of the "
           "law/regulations\n"
           "\n"
           "3. If the rating is 4 and 5, label it Unsafe; otherwise, if label is 1-4 it's "
           "Safe.\n"
           "\n"
           "\n"
           "Output Format\n"
           "Your response must be in this format exactly:\n"
           "Situation: [Safe or Unsafe]\n"
           "Reason for decision: [One sentence]\n"
           "\n"
           "Rules:\n"
        << rules_text << "\n";
    return prompt.str();
}

ParsedVerdict parse_assessment(const std::string& text) {
    std::optional<std::string> situation_value;
    std::optional<std::string> reason_value;
    std::optional<int> severity_value;

    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string rest;
        if (!situation_value && line_prefix(line, "situation:", rest)) {
            situation_value = rest;
        } else if (!reason_value && line_prefix(line, "reason for decision:", rest)) {
            reason_value = rest;
        } else if (!severity_value && line_prefix(line, "severity:", rest)) {
            std::string t = trim(rest);
            if (!t.empty() && t[0] >= '1' && t[0] <= '5') severity_value = t[0] - '0';
        }
    }
    if (!situation_value) {
        throw Error(errc::verdict_missing_line, "reply lacks the Situation line", "missing-line");
    }
    std::string value = *situation_value;
    if (auto rating = strip_parenthesized_rating(value); rating && !severity_value) {
        severity_value = rating;
    }
    auto label = label_from_name(value);
    if (!label) {
        throw Error(errc::verdict_bad_label, "Situation value is not Safe or Unsafe: " + value,
                    "bad-label");
    }
    if (!reason_value || trim(*reason_value).empty()) {
        throw Error(errc::verdict_missing_line, "reply lacks the Reason for decision line",
                    "missing-line");
    }
    ParsedVerdict verdict;
    verdict.label = *label;
    verdict.reason = *reason_value;
    if (severity_value) verdict.severity = SeverityRating{*severity_value};
    return verdict;
}

inference::ChatRequest build_assess_request(const ingest::Frame& frame,
                                            const rulegen::RuleSet& rules,
                                            const std::string& model_id) {
    if (rules.frame_index != frame.index) {
        throw Error(errc::invalid_params,
                    "rule set belongs to frame " + std::to_string(rules.frame_index) +
                        ", not frame " + std::to_string(frame.index));
    }
    if (!std::filesystem::is_regular_file(frame.image_ref)) {
        throw Error(errc::image_not_found, "image file not found: " + frame.image_ref.string());
    }
    inference::ChatRequest request;
    request.model_id = model_id;
    request.options = inference::default_options();
    inference::ChatMessage message;
    message.text = build_assessment_prompt(rules);
    message.images.push_back(read_file_bytes(frame.image_ref));
    request.messages.push_back(std::move(message));
    return request;
}

Assessment assess_frame(const ingest::Frame& frame, const rulegen::RuleSet& rules,
                        inference::ChatBackend& backend, const std::string& model_id) {
    inference::ChatRequest request = build_assess_request(frame, rules, model_id);
    const std::string prompt = request.messages[0].text;
    const std::string key = inference::request_key(request);

    Assessment assessment;
    assessment.frame_index = frame.index;
    assessment.time_label = ingest::TimeLabel{ingest::render_time_label(frame.capture_time_ms)};
    assessment.rule_set_ref = rules.provenance_label;
    // Citations: the frame image, the stage-1 description, the stage-2 rules.
    assessment.provenance_label = report::make_label(frame.index, 3, "ABC");
    assessment.request_key = key;

    for (int attempt = 0;; ++attempt) {
        inference::ChatResponse response = inference::chat(backend, request);
        assessment.raw_text = response.text;
        try {
            ParsedVerdict verdict = parse_assessment(response.text);
            assessment.label = verdict.label;
            assessment.reason = verdict.reason;
            assessment.severity = verdict.severity;
            assessment.inconsistency_flag =
                verdict.severity && severity_to_label(*verdict.severity) != verdict.label;
            assessment.retries = attempt;
            return assessment;
        } catch (const Error& e) {
            if (attempt >= 1) {
                throw Error(e.code(), e.message() + " (after format-reminder retry)",
                            assessment.raw_text);
            }
            request.messages[0].text =
                prompt +
                "\n\nYour previous reply did not follow the required format. Respond again "
                "using exactly:\nSituation: [Safe or Unsafe]\nReason for decision: [One "
                "sentence]\n";
        }
    }
}

}  // namespace sitewarden::assess
