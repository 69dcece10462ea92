#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sitewarden/assess.hpp"

namespace sitewarden::evalkit {

struct FrameId {
    std::string scenario;
    int run = 0;
    int frame_index = 0;

    auto operator<=>(const FrameId&) const = default;
};

std::string frame_id_string(const FrameId& id);

using LabelMap = std::map<FrameId, assess::Label>;

struct ConfusionMatrix {
    long tp = 0;  // predicted Unsafe, truth Unsafe
    long tn = 0;  // predicted Safe, truth Safe
    long fp = 0;  // predicted Unsafe, truth Safe
    long fn = 0;  // predicted Safe, truth Unsafe

    long total() const { return tp + tn + fp + fn; }
    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
    bool operator==(const ConfusionMatrix&) const = default;
};

// Predictions and truth must cover exactly the same frame ids; a mismatch is
// an error listing the offenders, never a silent intersection.
ConfusionMatrix tally(const LabelMap& predictions, const LabelMap& truth);

// Accuracy, precision, recall, F1. A zero-denominator metric is undefined
// (nullopt) rather than 0: reporting 0 would corrupt comparisons on
// degenerate fixtures.
struct MetricSet {
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

MetricSet compute_metrics(const ConfusionMatrix& matrix);

struct RunResult {
    std::string system;
    std::string scenario;
    int run = 0;
    ConfusionMatrix matrix;
};

struct ComparisonRow {
    std::string system;
    std::string scenario;
    ConfusionMatrix pooled;             // matrices summed across runs
    MetricSet metrics;                  // micro-averaged (or macro with flag)
    std::vector<RunResult> runs;        // per-run detail
    std::vector<MetricSet> run_metrics;
};

// Rows keyed by (system, scenario). Micro-averaging pools matrices before
// computing metrics; macro averages the per-run metric values and is
// undefined if any contributing run's metric is.
std::vector<ComparisonRow> aggregate(std::span<const RunResult> results, bool macro = false);

nlohmann::json comparison_to_json(std::span<const ComparisonRow> rows);
std::string comparison_to_text(std::span<const ComparisonRow> rows);

// Reads {scenario, run, frame_index, label} records. Records missing
// scenario/run fall back to the provided defaults (the assessments.jsonl
// shape carries only frame_index + label).
LabelMap load_labels(const std::filesystem::path& path,
                     const std::string& default_scenario = "A", int default_run = 1);

}  // namespace sitewarden::evalkit
