#pragma once

#include <string>

#include "sitewarden/chat.hpp"
#include "sitewarden/ingest.hpp"

namespace sitewarden::perception {

// Object-centric textual description of one frame (pipeline stage 1).
struct SceneDescription {
    int frame_index = 0;
    ingest::TimeLabel time_label;
    std::string text;
    std::string provenance_label;
    std::string model_id;
    std::string request_key;
};

// The stage takes no per-frame text input besides the image, so the prompt
// is the configured template verbatim.
std::string build_description_prompt(const std::string& templ);

std::string default_description_template();

// The canonical chat request for one frame; its request_key doubles as the
// stage cache key.
inference::ChatRequest build_describe_request(const ingest::Frame& frame,
                                              const std::string& model_id,
                                              const std::string& templ);

SceneDescription describe_scene(const ingest::Frame& frame, inference::ChatBackend& backend,
                                const std::string& model_id, const std::string& templ);

}  // namespace sitewarden::perception
