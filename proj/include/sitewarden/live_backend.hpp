#pragma once

#include <string>

#include "sitewarden/chat.hpp"

namespace sitewarden::inference {

// Exact request body for POST {base_url}/api/chat:
//   {"model": <id>, "messages": [{"role": <r>, "content": <text>,
//    "images": [<base64>...]?}...], "stream": false, "options": {...}}
// "images" is omitted for messages without any. Key order is part of the
// wire contract, hence ordered_json.
nlohmann::ordered_json build_chat_body(const ChatRequest& request);

// Resolution order for the server address: explicit argument, then the
// SITEWARDEN_BASE_URL environment variable.
std::string resolve_base_url(const std::string& flag_value = {});

class LiveBackend final : public ChatBackend {
public:
    explicit LiveBackend(std::string base_url, int timeout_seconds = 300);
    ChatResponse chat(const ChatRequest& request) override;
    const std::string& base_url() const { return base_url_; }

private:
    std::string base_url_;
    int timeout_seconds_;
};

}  // namespace sitewarden::inference
