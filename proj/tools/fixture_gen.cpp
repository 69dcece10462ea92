// Regenerates the bundled fixtures: the evaluation truth/prediction files,
// the violation catalog, and the 10-frame replay set (frames + cassette +
// run config). The regulation corpus under fixtures/corpus/ is hand-written
// and is never touched here.
//
// Usage: fixture_gen --out <fixtures-dir>

#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wdeprecated-enum-enum-conversion"
#include <opencv2/imgcodecs.hpp>
#pragma GCC diagnostic pop

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitewarden/assess.hpp"
#include "sitewarden/chat.hpp"
#include "sitewarden/fixtures.hpp"
#include "sitewarden/ingest.hpp"
#include "sitewarden/orchestrator.hpp"
#include "sitewarden/perception.hpp"
#include "sitewarden/regstore.hpp"
#include "sitewarden/rulegen.hpp"
#include "sitewarden/util.hpp"

namespace fs = std::filesystem;
using namespace sitewarden;

namespace {

constexpr int kFrames = 10;

// Distinct deterministic pixels per frame: a flat color plus an index stripe.
void write_frame_images(const fs::path& dir) {
    fs::create_directories(dir);
    for (int i = 0; i < kFrames; ++i) {
        cv::Mat img(48, 64, CV_8UC3, cv::Scalar(20 * i + 15, 255 - 20 * i, 80));
        img.rowRange(0, 4).setTo(cv::Scalar(10 * i, 10 * i, 10 * i));
        ingest::Frame frame;
        frame.index = i;
        frame.capture_time_ms = 1000 * i;
        cv::imwrite((dir / ingest::format_frame_filename(frame)).string(), img);
    }
}

std::vector<std::string> scripted_descriptions() {
    return {
        "An empty staging area with pallets stacked along the left wall and a clear walkway.",
        "A worker climbs an extension ladder leaning against a forklift mast; a yellow hard "
        "hat lies on the floor next to the ladder base.",
        "The same ladder rests against the forklift; the worker near the top has no hard hat "
        "and no high-visibility vest, and safety gear sits unused on the floor.",
        "A clear corridor between shelving units; a caution sign about high-visibility vests "
        "is posted on the right wall.",
        "Workbench area with tools hung on a pegboard and a coiled extension cord on a hook.",
        "An extension cord runs across the floor and through a puddle of standing water near "
        "the wet saw station.",
        "The extension cord remains in the puddle; a second flexible cord is pinched under a "
        "rolling cart wheel beside the water.",
        "A worker operates the wet saw while the cord still lies in standing water behind the "
        "machine.",
        "A tidy aisle with marked pedestrian lanes; a parked forklift has its forks lowered "
        "to the ground.",
        "Stacked bricks sit on a pallet fully inside the marked storage zone away from the "
        "walkway.",
    };
}

// Valid reply in the required format; every frame shares it (the prompt, and
// therefore the request key, still differs per frame).
std::string scripted_rules_reply() {
    return "\"Rules for Safe Construction Situation:\"\n"
           "1. Work at height uses stable, secured access. Ladders rest on stable level "
           "support, secured against displacement, with side rails extending 3 feet above "
           "the landing.\n"
           "2. Electrical cords stay clear of water. Extension cords are routed away from "
           "standing water and protected by GFCI devices.\n"
           "\n"
           "\"Rules for Unsafe Construction Situation:\"\n"
           "1. Unstable or unsecured ladder placement is prohibited. A ladder leaned on "
           "machinery or movable equipment without securing is a violation.\n"
           "2. Missing personal protective equipment near hazards is prohibited. A worker "
           "within 10 feet of an overhead or fall hazard without a hard hat is a "
           "violation.\n";
}

std::vector<std::string> scripted_verdicts() {
    auto safe = [](const std::string& reason) {
        return "Situation: Safe\nReason for decision: " + reason;
    };
    auto unsafe = [](const std::string& reason) {
        return "Situation: Unsafe\nReason for decision: " + reason;
    };
    return {
        safe("The staging area walkway is clear and no hazard is visible."),
        unsafe("The ladder leans on a forklift mast and is not secured against displacement."),
        "Situation: Unsafe (5)\nReason for decision: The worker on the unsecured ladder "
        "wears no hard hat or high-visibility vest.",
        safe("The corridor is clear and signage is in place."),
        safe("Tools and cords are stored off the floor at the workbench."),
        unsafe("An energized extension cord runs through standing water without GFCI "
               "protection."),
        "Situation: Unsafe\nReason for decision: Cords remain in the water and one is "
        "pinched under a cart wheel.\nSeverity: 4",
        unsafe("The wet saw is operated while its cord lies in standing water."),
        safe("The aisle is clear and the parked forklift has lowered forks."),
        safe("Materials are stacked inside the storage zone clear of the walkway."),
    };
}

orchestrator::RunConfig replay_config() {
    orchestrator::RunConfig config;
    config.source = "frames";
    config.corpus = "../corpus/osha_mini.jsonl";
    config.embedder = "lexical";
    config.k = 4;
    config.models = {{"describe", "gemma3:12b"}, {"rules", "llama3.3"},
                     {"report", "deepseek-r1"}};
    config.backend_mode = "replay";
    config.cassette = "cassette.jsonl";
    config.gap_tolerance = 0;
    config.report_mode = "deterministic";
    config.out_dir = "runs";
    config.concurrency = 2;
    return config;
}

void write_replay_fixture(const fs::path& replay_dir, const fs::path& corpus_path) {
    write_frame_images(replay_dir / "frames");

    // Record the cassette by driving the same stage functions the pipeline
    // uses, with scripted model behavior behind a recorder. Sequential, so
    // the per-model queues pair with frames in order.
    auto frames = ingest::ingest_frame_dir(replay_dir / "frames");
    auto corpus = regstore::load_corpus(corpus_path);
    regstore::LexicalEmbedder seed;
    auto index = regstore::build_index(corpus, seed, 800, 100);
    auto embedder = regstore::LexicalEmbedder::from_params(index.embedder_params);

    inference::ScriptedBackend scripted;
    scripted.on_queue(inference::ScriptedBackend::match_model("gemma3:12b"),
                      scripted_descriptions());
    scripted.always(scripted_rules_reply());  // reached only by llama3.3 requests

    const fs::path cassette = replay_dir / "cassette.jsonl";
    fs::remove(cassette);
    inference::RecordingBackend recorder(scripted, cassette);

    std::vector<perception::SceneDescription> descriptions;
    std::vector<rulegen::RuleSet> rule_sets;
    for (const auto& frame : frames) {
        descriptions.push_back(perception::describe_scene(
            frame, recorder, "gemma3:12b", perception::default_description_template()));
        rule_sets.push_back(rulegen::generate_rules(descriptions.back(), index, embedder, 4,
                                                    recorder, "llama3.3"));
    }
    // The describe queue is drained; assessments reuse the vision model with
    // a fresh scripted verdict queue.
    inference::ScriptedBackend verdicts;
    verdicts.on_queue(inference::ScriptedBackend::match_model("gemma3:12b"),
                      scripted_verdicts());
    inference::RecordingBackend verdict_recorder(verdicts, cassette);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        assess::assess_frame(frames[i], rule_sets[i], verdict_recorder, "gemma3:12b");
    }

    nlohmann::json doc = orchestrator::run_config_to_json(replay_config());
    write_file_atomic(replay_dir / "config.json", doc.dump(2) + "\n");
    std::cout << "replay fixture: " << frames.size() << " frames, cassette at "
              << cassette.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    fs::path out = "fixtures";
    for (int i = 1; i + 1 < argc; i += 2) {
        if (std::string(argv[i]) == "--out") out = argv[i + 1];
    }
    try {
        fixtures::emit_eval_fixtures(out / "eval");
        fixtures::emit_violations(out / "violations.jsonl");
        write_replay_fixture(out / "replay", out / "corpus" / "osha_mini.jsonl");
    } catch (const std::exception& e) {
        std::cerr << "fixture_gen failed: " << e.what() << "\n";
        return 1;
    }
    std::cout << "fixtures written under " << out.string() << "\n";
    return 0;
}
