#include <doctest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "sitewarden/chat.hpp"
#include "sitewarden/error.hpp"
#include "sitewarden/live_backend.hpp"
#include "sitewarden/util.hpp"

using namespace sitewarden;
using namespace sitewarden::inference;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    auto dir = fs::temp_directory_path() / ("sw_inference_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ChatRequest text_request(const std::string& model, const std::string& prompt) {
    ChatRequest request;
    request.model_id = model;
    request.options = default_options();
    request.messages.push_back(ChatMessage{Role::user, prompt, {}});
    return request;
}

ChatRequest image_request(const std::string& prompt, std::vector<std::uint8_t> bytes) {
    ChatRequest request;
    request.model_id = "vision";
    request.options = default_options();
    ChatMessage message;
    message.text = prompt;
    message.images.push_back(std::move(bytes));
    request.messages.push_back(std::move(message));
    return request;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("request keys are stable and sensitive to every content byte") {
    auto a = image_request("prompt", {1, 2, 3});
    auto b = image_request("prompt", {1, 2, 3});
    CHECK(request_key(a) == request_key(b));

    auto flipped = image_request("prompt", {1, 2, 4});
    CHECK(request_key(a) != request_key(flipped));

    auto other_prompt = image_request("prompt!", {1, 2, 3});
    CHECK(request_key(a) != request_key(other_prompt));

    auto other_options = image_request("prompt", {1, 2, 3});
    other_options.options["temperature"] = 1;
    CHECK(request_key(a) != request_key(other_options));

    auto other_model = image_request("prompt", {1, 2, 3});
    other_model.model_id = "vision2";
    CHECK(request_key(a) != request_key(other_model));
}

TEST_CASE("scripted mock passthrough") {
    ScriptedBackend backend;
    backend.always("OK");
    CHECK(chat(backend, text_request("m", "anything")).text == "OK");
    CHECK(chat(backend, text_request("other", "x")).text == "OK");
}

TEST_CASE("scripted queues drain to ScriptExhausted") {
    ScriptedBackend backend;
    backend.on_queue(ScriptedBackend::match_model("m"), {"one", "two"});
    CHECK(chat(backend, text_request("m", "a")).text == "one");
    CHECK(chat(backend, text_request("m", "b")).text == "two");
    try {
        chat(backend, text_request("m", "c"));
        FAIL("expected ScriptExhausted");
    } catch (const Error& e) {
        CHECK(e.code() == errc::script_exhausted);
    }
}

TEST_CASE("chat_with_image wraps the reply and surfaces missing files as typed errors") {
    auto dir = temp_dir("img");
    {
        std::ofstream img(dir / "frame.jpg", std::ios::binary);
        img << "jpegbytes";
    }
    ScriptedBackend backend;
    backend.always("a ladder leans on a forklift");
    CHECK(chat_with_image(backend, "vision", "describe", dir / "frame.jpg") ==
          "a ladder leans on a forklift");
    try {
        chat_with_image(backend, "vision", "describe", dir / "missing.jpg");
        FAIL("expected ImageNotFound");
    } catch (const Error& e) {
        CHECK(e.code() == errc::image_not_found);
    }
}

TEST_CASE("record then replay reproduces responses byte for byte") {
    auto dir = temp_dir("cassette");
    auto cassette = dir / "c.jsonl";
    ScriptedBackend scripted;
    scripted.on_queue(ScriptedBackend::match_any(), {"alpha", "beta", "gamma"});

    std::vector<ChatRequest> requests{text_request("m", "one"), text_request("m", "two"),
                                      text_request("m", "three")};
    record_cassette(scripted, requests, cassette);

    ReplayBackend replay(cassette);
    CHECK(replay.size() == 3);
    CHECK(chat(replay, requests[0]).text == "alpha");
    CHECK(chat(replay, requests[1]).text == "beta");
    CHECK(chat(replay, requests[2]).text == "gamma");
}

TEST_CASE("one flipped image byte turns a replay hit into a CassetteMiss") {
    auto dir = temp_dir("flip");
    auto cassette = dir / "c.jsonl";
    ScriptedBackend scripted;
    scripted.always("recorded");
    record_cassette(scripted, {image_request("look", {9, 9, 9})}, cassette);

    ReplayBackend replay(cassette);
    CHECK(chat(replay, image_request("look", {9, 9, 9})).text == "recorded");
    try {
        chat(replay, image_request("look", {9, 9, 8}));
        FAIL("expected CassetteMiss");
    } catch (const Error& e) {
        CHECK(e.code() == errc::cassette_miss);
    }
}

TEST_CASE("an empty or absent cassette misses on the first request") {
    auto dir = temp_dir("empty");
    {
        std::ofstream touch(dir / "empty.jsonl");
    }
    ReplayBackend replay(dir / "empty.jsonl");
    CHECK_THROWS_AS(chat(replay, text_request("m", "x")), Error);
    ReplayBackend absent(dir / "never_written.jsonl");
    CHECK_THROWS_AS(chat(absent, text_request("m", "x")), Error);
}

TEST_CASE("errors are recorded as error entries and replay as the same typed errors") {
    auto dir = temp_dir("errs");
    auto cassette = dir / "c.jsonl";
    ScriptedBackend scripted;  // no rules at all: everything raises ScriptExhausted
    record_cassette(scripted, {text_request("m", "boom")}, cassette);

    ReplayBackend replay(cassette);
    try {
        chat(replay, text_request("m", "boom"));
        FAIL("expected replayed error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::script_exhausted);
    }
}

TEST_CASE("recording the same seeded request twice stores identical texts") {
    auto dir = temp_dir("seed");
    auto cassette = dir / "c.jsonl";
    // Stand-in for a seed-respecting server: the reply is a pure function of
    // the request content.
    ScriptedBackend deterministic;
    deterministic.on(ScriptedBackend::match_any(), [](const ChatRequest& request) {
        return "reply-" + request_key(request).substr(0, 12);
    });
    auto request = text_request("m", "same prompt, same seed");
    record_cassette(deterministic, {request, request}, cassette);

    std::vector<std::string> texts;
    for_each_jsonl(cassette, [&](std::size_t, const nlohmann::json& record) {
        texts.push_back(record.at("response_text").get<std::string>());
    });
    REQUIRE(texts.size() == 2);
    CHECK(texts[0] == texts[1]);
}

TEST_CASE("the chat body wire format is bit-exact") {
    ChatRequest request;
    request.model_id = "gemma3:12b";
    request.options = nlohmann::json{{"seed", 42}, {"temperature", 0}};
    ChatMessage message;
    message.role = Role::user;
    message.text = "hi";
    message.images.push_back({'a', 'b', 'c'});
    request.messages.push_back(message);

    CHECK(build_chat_body(request).dump() ==
          R"({"model":"gemma3:12b","messages":[{"role":"user","content":"hi","images":["YWJj"]}],"stream":false,"options":{"seed":42,"temperature":0}})");

    ChatRequest text_only = text_request("llama3.3", "rules please");
    CHECK(build_chat_body(text_only).dump() ==
          R"({"model":"llama3.3","messages":[{"role":"user","content":"rules please"}],"stream":false,"options":{"seed":42,"temperature":0}})");
}

TEST_CASE("live backend talks to an /api/chat server and maps failures to typed errors") {
    httplib::Server server;
    std::string seen_body;
    server.Post("/api/chat", [&](const httplib::Request& req, httplib::Response& res) {
        seen_body = req.body;
        auto body = nlohmann::json::parse(req.body);
        if (body["model"] == "missing:model") {
            res.status = 404;
            res.set_content(R"({"error":"model 'missing:model' not found"})",
                            "application/json");
            return;
        }
        nlohmann::json reply{{"model", body["model"]},
                             {"message", {{"role", "assistant"}, {"content", "pong"}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    LiveBackend backend("http://127.0.0.1:" + std::to_string(port));
    auto response = chat(backend, text_request("m", "ping"));
    CHECK(response.text == "pong");
    CHECK(nlohmann::json::parse(seen_body)["stream"] == false);

    try {
        chat(backend, text_request("missing:model", "x"));
        FAIL("expected ModelNotFound");
    } catch (const Error& e) {
        CHECK(e.code() == errc::model_not_found);
    }

    server.stop();
    server_thread.join();

    LiveBackend unreachable("http://127.0.0.1:1");  // nothing listens there
    try {
        chat(unreachable, text_request("m", "x"));
        FAIL("expected BackendUnreachable");
    } catch (const Error& e) {
        CHECK(e.code() == errc::backend_unreachable);
    }
}

TEST_CASE("requests must be structurally valid before any backend sees them") {
    ScriptedBackend backend;
    backend.always("never");
    ChatRequest no_model;
    no_model.messages.push_back(ChatMessage{Role::user, "x", {}});
    CHECK_THROWS_AS(chat(backend, no_model), Error);
    ChatRequest no_messages;
    no_messages.model_id = "m";
    CHECK_THROWS_AS(chat(backend, no_messages), Error);
    ChatRequest blank_message;
    blank_message.model_id = "m";
    blank_message.messages.push_back(ChatMessage{});
    CHECK_THROWS_AS(chat(backend, blank_message), Error);
}

}  // TEST_SUITE
