#include "sitewarden/chat.hpp"

#include <sstream>

#include "sitewarden/error.hpp"
#include "sitewarden/util.hpp"

namespace sitewarden::inference {

namespace {

// Field/record separators chosen so no delimiter can collide with content;
// image bytes are additionally length-prefixed.
constexpr char kField = '\x1f';
constexpr char kRecord = '\x1e';

void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

std::string role_name(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

std::string request_key(const ChatRequest& request) {
    std::string canon;
    canon += "swchat/1";
    canon += kRecord;
    canon += request.model_id;
    canon += kRecord;
    for (const auto& message : request.messages) {
        canon += role_name(message.role);
        canon += kField;
        canon += message.text;
        canon += kField;
        append_u64(canon, message.images.size());
        for (const auto& image : message.images) {
            append_u64(canon, image.size());
            canon.append(reinterpret_cast<const char*>(image.data()), image.size());
        }
        canon += kRecord;
    }
    canon += request.options.dump();  // object keys are sorted by nlohmann
    return sha256_hex(canon);
}

std::string request_summary(const ChatRequest& request) {
    std::size_t n_images = 0;
    std::string last_text;
    for (const auto& message : request.messages) {
        n_images += message.images.size();
        if (!message.text.empty()) last_text = message.text;
    }
    if (last_text.size() > 80) last_text = last_text.substr(0, 77) + "...";
    for (auto& c : last_text) {
        if (c == '\n') c = ' ';
    }
    std::ostringstream ss;
    ss << request.model_id << " | " << request.messages.size() << " msg, " << n_images
       << " img | " << last_text;
    return ss.str();
}

nlohmann::json default_options() {
    return nlohmann::json{{"seed", 42}, {"temperature", 0}};
}

ChatResponse chat(ChatBackend& backend, const ChatRequest& request) {
    if (request.model_id.empty()) {
        throw Error(errc::invalid_params, "chat request needs a model_id");
    }
    if (request.messages.empty()) {
        throw Error(errc::invalid_params, "chat request needs at least one message");
    }
    for (const auto& message : request.messages) {
        if (message.text.empty() && message.images.empty()) {
            throw Error(errc::invalid_params, "chat message needs text or images");
        }
    }
    return backend.chat(request);
}

std::string chat_with_image(ChatBackend& backend, const std::string& model_id,
                            const std::string& prompt, const std::filesystem::path& image_ref) {
    if (!std::filesystem::is_regular_file(image_ref)) {
        throw Error(errc::image_not_found, "image file not found: " + image_ref.string());
    }
    ChatRequest request;
    request.model_id = model_id;
    request.options = default_options();
    ChatMessage message;
    message.role = Role::user;
    message.text = prompt;
    message.images.push_back(read_file_bytes(image_ref));
    request.messages.push_back(std::move(message));
    return chat(backend, request).text;
}

// --- ScriptedBackend ---------------------------------------------------

ScriptedBackend& ScriptedBackend::on(Predicate match, Responder respond) {
    std::lock_guard lock(mutex_);
    rules_.push_back(Rule{std::move(match), std::move(respond), {}, 0});
    return *this;
}

ScriptedBackend& ScriptedBackend::on(Predicate match, std::string response) {
    return on(std::move(match),
              [response = std::move(response)](const ChatRequest&) { return response; });
}

ScriptedBackend& ScriptedBackend::on_queue(Predicate match, std::vector<std::string> responses) {
    std::lock_guard lock(mutex_);
    rules_.push_back(Rule{std::move(match), nullptr, std::move(responses), 0});
    return *this;
}

ScriptedBackend& ScriptedBackend::always(std::string response) {
    return on(match_any(), std::move(response));
}

ScriptedBackend::Predicate ScriptedBackend::match_model(std::string model_id) {
    return [model_id = std::move(model_id)](const ChatRequest& request) {
        return request.model_id == model_id;
    };
}

ScriptedBackend::Predicate ScriptedBackend::match_prompt_contains(std::string needle) {
    return [needle = std::move(needle)](const ChatRequest& request) {
        for (const auto& message : request.messages) {
            if (message.text.find(needle) != std::string::npos) return true;
        }
        return false;
    };
}

ScriptedBackend::Predicate ScriptedBackend::match_any() {
    return [](const ChatRequest&) { return true; };
}

ChatResponse ScriptedBackend::chat(const ChatRequest& request) {
    std::lock_guard lock(mutex_);
    for (auto& rule : rules_) {
        if (!rule.match(request)) continue;
        if (rule.respond) {
            return ChatResponse{rule.respond(request), request.model_id, 0};
        }
        if (rule.next >= rule.queue.size()) {
            throw Error(errc::script_exhausted,
                        "scripted queue drained for " + request.model_id);
        }
        return ChatResponse{rule.queue[rule.next++], request.model_id, 0};
    }
    throw Error(errc::script_exhausted, "no scripted rule matches " + request_summary(request));
}

// --- ReplayBackend ------------------------------------------------------

ReplayBackend::ReplayBackend(const std::filesystem::path& cassette) {
    if (!std::filesystem::exists(cassette)) {
        // An absent cassette behaves like an empty one: every request misses.
        return;
    }
    for_each_jsonl(cassette, [&](std::size_t, const nlohmann::json& record) {
        Entry entry;
        entry.model_id = record.value("model_id", "");
        if (record.contains("error_code")) {
            entry.error_code = record.at("error_code").get<std::string>();
            entry.error_message = record.value("error_message", "");
        } else {
            entry.response_text = record.value("response_text", "");
        }
        // Later records win: the cassette is an append-only log.
        entries_[record.at("key").get<std::string>()] = std::move(entry);
    });
}

ChatResponse ReplayBackend::chat(const ChatRequest& request) {
    auto it = entries_.find(request_key(request));
    if (it == entries_.end()) {
        throw Error(errc::cassette_miss,
                    "no cassette entry for request: " + request_summary(request));
    }
    if (it->second.error_code) {
        throw Error(errc_from_name(*it->second.error_code), it->second.error_message);
    }
    return ChatResponse{it->second.response_text, it->second.model_id, 0};
}

// --- RecordingBackend ---------------------------------------------------

RecordingBackend::RecordingBackend(ChatBackend& inner, const std::filesystem::path& cassette)
    : inner_(inner), cassette_(cassette) {
    if (cassette_.has_parent_path()) std::filesystem::create_directories(cassette_.parent_path());
}

ChatResponse RecordingBackend::chat(const ChatRequest& request) {
    const std::string key = request_key(request);
    try {
        ChatResponse response = inner_.chat(request);
        std::lock_guard lock(mutex_);
        append_jsonl_line(cassette_, nlohmann::json{
                                         {"key", key},
                                         {"request_summary", request_summary(request)},
                                         {"response_text", response.text},
                                         {"model_id", response.model_id},
                                     });
        return response;
    } catch (const Error& e) {
        std::lock_guard lock(mutex_);
        append_jsonl_line(cassette_, nlohmann::json{
                                         {"key", key},
                                         {"request_summary", request_summary(request)},
                                         {"model_id", request.model_id},
                                         {"error_code", std::string(errc_name(e.code()))},
                                         {"error_message", e.message()},
                                     });
        throw;
    }
}

void record_cassette(ChatBackend& live, const std::vector<ChatRequest>& requests,
                     const std::filesystem::path& cassette) {
    RecordingBackend recorder(live, cassette);
    for (const auto& request : requests) {
        try {
            recorder.chat(request);
        } catch (const Error&) {
            // Recorded as an error entry; the cassette replays it as-is.
        }
    }
}

}  // namespace sitewarden::inference
