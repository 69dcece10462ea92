#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "sitewarden/evalkit.hpp"

namespace sitewarden::fixtures {

// One row of the designed-violation catalog: a staged safety violation with
// the regulation clauses it breaches.
struct ViolationSpec {
    std::string id;           // A1..A5, B1..B7, C1..C8
    std::string category;
    std::string description;
    std::string osha_category;
    std::vector<std::string> osha_refs;
};

const std::array<ViolationSpec, 20>& violation_catalog();

enum class System { framework, baseline };

std::string system_name(System system);

// Per-run frame counts for the three scenarios (three runs each).
std::array<int, 3> scenario_run_frames(char scenario);

// The confusion matrix each scenario's recorded verdicts tally to. Only the
// tallies are claims; the per-frame placement below is a deterministic
// convention.
evalkit::ConfusionMatrix pinned_matrix(char scenario, System system);

struct LabeledFrame {
    std::string scenario;
    int run = 0;
    int frame_index = 0;
    assess::Label truth = assess::Label::Safe;
    assess::Label predicted = assess::Label::Safe;
};

// Deterministic expansion of the pinned matrix into per-frame labels:
// each cell is split across the three runs by largest remainder on the run
// frame counts, and within a run the truth-unsafe frames come first
// (TP block, then FN, then FP, then TN).
std::vector<LabeledFrame> scenario_prediction_fixture(char scenario, System system);

// Writes {system}_truth.jsonl / {system}_pred.jsonl for both systems across
// all scenarios into dir.
void emit_eval_fixtures(const std::filesystem::path& dir);

// Writes the violation catalog as JSONL.
void emit_violations(const std::filesystem::path& path);

}  // namespace sitewarden::fixtures
