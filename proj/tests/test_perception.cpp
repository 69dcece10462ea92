#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sitewarden/error.hpp"
#include "sitewarden/perception.hpp"

using namespace sitewarden;
using namespace sitewarden::perception;
namespace fs = std::filesystem;

namespace {

ingest::Frame make_frame(const fs::path& dir, int index, std::int64_t ms) {
    ingest::Frame frame{index, ms, dir / ("Frame" + std::to_string(index) + ".jpg"), "test"};
    std::ofstream img(frame.image_ref, std::ios::binary);
    img << "fake image bytes " << index;
    return frame;
}

}  // namespace

TEST_SUITE("perception") {

TEST_CASE("the default template asks for objects, activities and spatial relationships") {
    auto prompt = build_description_prompt(default_description_template());
    CHECK(prompt.find("objects, activities, and spatial relationships") != std::string::npos);
}

TEST_CASE("custom templates pass through verbatim and empty ones are rejected") {
    CHECK(build_description_prompt("Describe the image.") == "Describe the image.");
    try {
        build_description_prompt("");
        FAIL("expected EmptyTemplate");
    } catch (const Error& e) {
        CHECK(e.code() == errc::empty_template);
    }
}

TEST_CASE("describe_scene wraps the reply with frame metadata and a stage-1 label") {
    auto dir = fs::temp_directory_path() / "sw_perception";
    fs::create_directories(dir);
    auto frame = make_frame(dir, 15, 15000);
    inference::ScriptedBackend backend;
    backend.always(
        "'Safety Gear' lying on the floor, forklift on the right, worker on ladder");

    auto description = describe_scene(frame, backend, "vision", "Describe the image.");
    CHECK(description.text ==
          "'Safety Gear' lying on the floor, forklift on the right, worker on ladder");
    CHECK(description.frame_index == 15);
    CHECK(description.provenance_label == "B15-1A");
    CHECK(description.time_label.text == "00:15:000");
    CHECK(description.model_id == "vision");
    CHECK_FALSE(description.request_key.empty());
}

TEST_CASE("mock passthrough keeps the text verbatim") {
    auto dir = fs::temp_directory_path() / "sw_perception";
    fs::create_directories(dir);
    auto frame = make_frame(dir, 0, 0);
    inference::ScriptedBackend backend;
    backend.always("empty room");
    CHECK(describe_scene(frame, backend, "vision", "t").text == "empty room");
}

TEST_CASE("a deleted image file is ImageNotFound") {
    auto dir = fs::temp_directory_path() / "sw_perception";
    fs::create_directories(dir);
    auto frame = make_frame(dir, 3, 3000);
    fs::remove(frame.image_ref);
    inference::ScriptedBackend backend;
    backend.always("unused");
    try {
        describe_scene(frame, backend, "vision", "t");
        FAIL("expected ImageNotFound");
    } catch (const Error& e) {
        CHECK(e.code() == errc::image_not_found);
    }
}

TEST_CASE("an empty model reply is an error, not an empty description") {
    auto dir = fs::temp_directory_path() / "sw_perception";
    fs::create_directories(dir);
    auto frame = make_frame(dir, 4, 4000);
    inference::ScriptedBackend backend;
    backend.always("   \n ");
    try {
        describe_scene(frame, backend, "vision", "t");
        FAIL("expected EmptyReply");
    } catch (const Error& e) {
        CHECK(e.code() == errc::empty_reply);
    }
}

TEST_CASE("backend errors propagate through describe_scene") {
    auto dir = fs::temp_directory_path() / "sw_perception";
    fs::create_directories(dir);
    auto frame = make_frame(dir, 5, 5000);
    inference::ScriptedBackend backend;  // no rules: ScriptExhausted
    try {
        describe_scene(frame, backend, "vision", "t");
        FAIL("expected propagation");
    } catch (const Error& e) {
        CHECK(e.code() == errc::script_exhausted);
    }
}

}  // TEST_SUITE
