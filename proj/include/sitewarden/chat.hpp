#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sitewarden::inference {

enum class Role { system, user, assistant };

std::string role_name(Role role);

struct ChatMessage {
    Role role = Role::user;
    std::string text;
    std::vector<std::vector<std::uint8_t>> images;
};

struct ChatRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    // Generation parameters; nlohmann::json objects keep keys sorted, which
    // the request key relies on.
    nlohmann::json options = nlohmann::json::object();
};

struct ChatResponse {
    std::string text;
    std::string model_id;
    std::int64_t latency_ms = 0;
};

// SHA-256 over (model_id, canonicalized messages including raw image bytes,
// options). Invariant under message re-serialization; any content byte flips
// the key.
std::string request_key(const ChatRequest& request);

// Short human-readable request description for cassette records.
std::string request_summary(const ChatRequest& request);

// temperature 0 + fixed seed: maximizes run-to-run stability on servers that
// honor them.
nlohmann::json default_options();

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse chat(const ChatRequest& request) = 0;
};

ChatResponse chat(ChatBackend& backend, const ChatRequest& request);

// Reads the image, sends it with the prompt as a single user message, and
// returns the reply text. A missing image is a typed error, never an in-band
// error string.
std::string chat_with_image(ChatBackend& backend, const std::string& model_id,
                            const std::string& prompt, const std::filesystem::path& image_ref);

// Test/offline backend: ordered match rules; the first rule whose predicate
// accepts the request produces the response. A rule built from a finite
// queue raises ScriptExhausted once drained; so does a request no rule
// matches.
class ScriptedBackend final : public ChatBackend {
public:
    using Predicate = std::function<bool(const ChatRequest&)>;
    using Responder = std::function<std::string(const ChatRequest&)>;

    ScriptedBackend& on(Predicate match, Responder respond);
    ScriptedBackend& on(Predicate match, std::string response);
    // Responses consumed front to back, then ScriptExhausted.
    ScriptedBackend& on_queue(Predicate match, std::vector<std::string> responses);
    ScriptedBackend& always(std::string response);

    static Predicate match_model(std::string model_id);
    static Predicate match_prompt_contains(std::string needle);
    static Predicate match_any();

    ChatResponse chat(const ChatRequest& request) override;

private:
    struct Rule {
        Predicate match;
        Responder respond;                 // unlimited responder, or
        std::vector<std::string> queue;    // finite queue (respond == nullptr)
        std::size_t next = 0;
    };
    std::mutex mutex_;
    std::vector<Rule> rules_;
};

// Cassette-backed deterministic backend. Never touches the network: a key
// absent from the cassette is a CassetteMiss.
class ReplayBackend final : public ChatBackend {
public:
    explicit ReplayBackend(const std::filesystem::path& cassette);
    ChatResponse chat(const ChatRequest& request) override;
    std::size_t size() const { return entries_.size(); }

private:
    struct Entry {
        std::string response_text;
        std::string model_id;
        std::optional<std::string> error_code;  // replayed as the same typed error
        std::string error_message;
    };
    std::map<std::string, Entry> entries_;
};

// Wraps any backend and appends a {key, request_summary, response_text,
// model_id} record (or an error entry) to the cassette as calls happen.
class RecordingBackend final : public ChatBackend {
public:
    RecordingBackend(ChatBackend& inner, const std::filesystem::path& cassette);
    ChatResponse chat(const ChatRequest& request) override;

private:
    ChatBackend& inner_;
    std::filesystem::path cassette_;
    std::mutex mutex_;
};

// Plays each request against the live backend and persists the outcomes so a
// later ReplayBackend reproduces them exactly.
void record_cassette(ChatBackend& live, const std::vector<ChatRequest>& requests,
                     const std::filesystem::path& cassette);

}  // namespace sitewarden::inference
