#include "sitewarden/live_backend.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>

#include "sitewarden/error.hpp"
#include "sitewarden/util.hpp"

namespace sitewarden::inference {

nlohmann::ordered_json build_chat_body(const ChatRequest& request) {
    nlohmann::ordered_json body;
    body["model"] = request.model_id;
    body["messages"] = nlohmann::ordered_json::array();
    for (const auto& message : request.messages) {
        nlohmann::ordered_json m;
        m["role"] = role_name(message.role);
        m["content"] = message.text;
        if (!message.images.empty()) {
            auto images = nlohmann::ordered_json::array();
            for (const auto& image : message.images) {
                images.push_back(base64_encode(image.data(), image.size()));
            }
            m["images"] = std::move(images);
        }
        body["messages"].push_back(std::move(m));
    }
    body["stream"] = false;
    body["options"] = request.options;
    return body;
}

std::string resolve_base_url(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("SITEWARDEN_BASE_URL"); env && *env) return env;
    return {};
}

LiveBackend::LiveBackend(std::string base_url, int timeout_seconds)
    : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {
    if (base_url_.empty()) {
        throw Error(errc::invalid_config,
                    "live backend needs a base URL (flag or SITEWARDEN_BASE_URL)");
    }
    while (base_url_.size() > 1 && base_url_.back() == '/') base_url_.pop_back();
}

ChatResponse LiveBackend::chat(const ChatRequest& request) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    client.set_write_timeout(timeout_seconds_);

    auto start = std::chrono::steady_clock::now();
    auto result = client.Post("/api/chat", build_chat_body(request).dump(), "application/json");
    auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();

    if (!result) {
        throw Error(errc::backend_unreachable,
                    base_url_ + ": " + httplib::to_string(result.error()));
    }
    if (result->status == 404) {
        throw Error(errc::model_not_found,
                    "model " + request.model_id + " not available at " + base_url_);
    }
    if (result->status != 200) {
        std::string body = result->body.substr(0, 200);
        throw Error(errc::backend_unreachable,
                    base_url_ + " returned HTTP " + std::to_string(result->status) + ": " + body);
    }
    nlohmann::json reply;
    try {
        reply = nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::exception& e) {
        throw Error(errc::backend_unreachable, std::string("malformed server reply: ") + e.what());
    }
    if (reply.contains("error")) {
        std::string message = reply["error"].is_string() ? reply["error"].get<std::string>()
                                                         : reply["error"].dump();
        if (message.find("not found") != std::string::npos) {
            throw Error(errc::model_not_found, message);
        }
        throw Error(errc::backend_unreachable, message);
    }
    if (!reply.contains("message") || !reply["message"].contains("content")) {
        throw Error(errc::backend_unreachable, "server reply lacks message.content");
    }
    return ChatResponse{reply["message"]["content"].get<std::string>(), request.model_id,
                        latency};
}

}  // namespace sitewarden::inference
