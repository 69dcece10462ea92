#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sitewarden {

// Every failure mode in the pipeline is a typed error. In-band error strings
// (error text returned as model output) are never used: they would flow into
// downstream prompts as if they were content.
enum class errc {
    // ingest
    unreadable_video,
    invalid_rate,
    time_out_of_range,
    invalid_frame_dir,
    // inference
    backend_unreachable,
    model_not_found,
    cassette_miss,
    script_exhausted,
    image_not_found,
    // regstore
    invalid_corpus,
    invalid_params,
    empty_text,
    dimension_mismatch,
    // perception
    empty_template,
    empty_reply,
    // rulegen
    empty_description,
    missing_header,
    wrong_rule_count,
    // assess
    verdict_missing_line,
    verdict_bad_label,
    // report
    invalid_stage,
    invalid_label,
    unsorted_timeline,
    template_invalid,
    // evalkit
    key_mismatch,
    empty_matrix,
    // orchestrator
    invalid_config,
    io_error,
};

std::string_view errc_name(errc code);
errc errc_from_name(std::string_view name);

class Error : public std::runtime_error {
public:
    Error(errc code, std::string message, std::string detail = {})
        : std::runtime_error(std::string(errc_name(code)) + ": " + message),
          code_(code),
          message_(std::move(message)),
          detail_(std::move(detail)) {}

    errc code() const { return code_; }
    const std::string& message() const { return message_; }
    // Extra machine-readable context, e.g. the raw model reply that failed to
    // parse, or which header was missing.
    const std::string& detail() const { return detail_; }

private:
    errc code_;
    std::string message_;
    std::string detail_;
};

}  // namespace sitewarden
