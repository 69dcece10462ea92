#include "sitewarden/perception.hpp"

#include "sitewarden/error.hpp"
#include "sitewarden/report.hpp"
#include "sitewarden/util.hpp"

namespace sitewarden::perception {

std::string build_description_prompt(const std::string& templ) {
    if (trim(templ).empty()) {
        throw Error(errc::empty_template, "description prompt template is empty");
    }
    return templ;
}

std::string default_description_template() {
    return "You are assisting a construction site safety inspection.\n"
           "Describe this image in detail. Provide an object-centric inventory of the "
           "objects, activities, and spatial relationships visible in the scene, including "
           "equipment, materials, workers, signage, and their positions relative to each "
           "other.";
}

inference::ChatRequest build_describe_request(const ingest::Frame& frame,
                                              const std::string& model_id,
                                              const std::string& templ) {
    const std::string prompt = build_description_prompt(templ);
    if (!std::filesystem::is_regular_file(frame.image_ref)) {
        throw Error(errc::image_not_found, "image file not found: " + frame.image_ref.string());
    }
    inference::ChatRequest request;
    request.model_id = model_id;
    request.options = inference::default_options();
    inference::ChatMessage message;
    message.text = prompt;
    message.images.push_back(read_file_bytes(frame.image_ref));
    request.messages.push_back(std::move(message));
    return request;
}

SceneDescription describe_scene(const ingest::Frame& frame, inference::ChatBackend& backend,
                                const std::string& model_id, const std::string& templ) {
    inference::ChatRequest request = build_describe_request(frame, model_id, templ);
    inference::ChatResponse response = inference::chat(backend, request);
    if (trim(response.text).empty()) {
        // A blank description would silently disable rule grounding downstream.
        throw Error(errc::empty_reply, "vision model returned an empty description");
    }
    SceneDescription description;
    description.frame_index = frame.index;
    description.time_label = ingest::TimeLabel{ingest::render_time_label(frame.capture_time_ms)};
    description.text = response.text;  // verbatim, never truncated or post-edited
    description.model_id = model_id;
    description.request_key = inference::request_key(request);
    // The single cited upstream input is the frame image itself.
    description.provenance_label = report::make_label(frame.index, 1, "A");
    return description;
}

}  // namespace sitewarden::perception
