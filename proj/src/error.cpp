#include "sitewarden/error.hpp"

#include <array>
#include <utility>

namespace sitewarden {

namespace {

constexpr std::array<std::pair<errc, std::string_view>, 27> kNames{{
    {errc::unreadable_video, "UnreadableVideo"},
    {errc::invalid_rate, "InvalidRate"},
    {errc::time_out_of_range, "TimeOutOfRange"},
    {errc::invalid_frame_dir, "InvalidFrameDir"},
    {errc::backend_unreachable, "BackendUnreachable"},
    {errc::model_not_found, "ModelNotFound"},
    {errc::cassette_miss, "CassetteMiss"},
    {errc::script_exhausted, "ScriptExhausted"},
    {errc::image_not_found, "ImageNotFound"},
    {errc::invalid_corpus, "InvalidCorpus"},
    {errc::invalid_params, "InvalidParams"},
    {errc::empty_text, "EmptyText"},
    {errc::dimension_mismatch, "DimensionMismatch"},
    {errc::empty_template, "EmptyTemplate"},
    {errc::empty_reply, "EmptyReply"},
    {errc::empty_description, "EmptyDescription"},
    {errc::missing_header, "MissingHeader"},
    {errc::wrong_rule_count, "WrongRuleCount"},
    {errc::verdict_missing_line, "VerdictMissingLine"},
    {errc::verdict_bad_label, "VerdictBadLabel"},
    {errc::invalid_stage, "InvalidStage"},
    {errc::invalid_label, "InvalidLabel"},
    {errc::unsorted_timeline, "UnsortedTimeline"},
    {errc::template_invalid, "TemplateInvalid"},
    {errc::key_mismatch, "KeyMismatch"},
    {errc::empty_matrix, "EmptyMatrix"},
    {errc::invalid_config, "InvalidConfig"},
}};

}  // namespace

std::string_view errc_name(errc code) {
    for (const auto& [c, name] : kNames) {
        if (c == code) return name;
    }
    return "IoError";
}

errc errc_from_name(std::string_view name) {
    for (const auto& [c, n] : kNames) {
        if (n == name) return c;
    }
    return errc::io_error;
}

}  // namespace sitewarden
