#include "sitewarden/evalkit.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sitewarden/error.hpp"
#include "sitewarden/util.hpp"

namespace sitewarden::evalkit {

std::string frame_id_string(const FrameId& id) {
    return id.scenario + "/run" + std::to_string(id.run) + "/frame" +
           std::to_string(id.frame_index);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    tp += other.tp;
    tn += other.tn;
    fp += other.fp;
    fn += other.fn;
    return *this;
}

ConfusionMatrix tally(const LabelMap& predictions, const LabelMap& truth) {
    std::vector<std::string> offenders;
    for (const auto& [id, label] : predictions) {
        (void)label;
        if (!truth.count(id)) offenders.push_back(frame_id_string(id) + " (no truth)");
    }
    for (const auto& [id, label] : truth) {
        (void)label;
        if (!predictions.count(id)) offenders.push_back(frame_id_string(id) + " (no prediction)");
    }
    if (!offenders.empty()) {
        std::ostringstream msg;
        msg << offenders.size() << " frame id(s) differ between predictions and truth:";
        for (std::size_t i = 0; i < offenders.size() && i < 20; ++i) msg << " " << offenders[i];
        if (offenders.size() > 20) msg << " ...";
        throw Error(errc::key_mismatch, msg.str());
    }
    ConfusionMatrix matrix;
    for (const auto& [id, predicted] : predictions) {
        assess::Label actual = truth.at(id);
        if (predicted == assess::Label::Unsafe) {
            (actual == assess::Label::Unsafe ? matrix.tp : matrix.fp) += 1;
        } else {
            (actual == assess::Label::Safe ? matrix.tn : matrix.fn) += 1;
        }
    }
    return matrix;
}

MetricSet compute_metrics(const ConfusionMatrix& matrix) {
    if (matrix.total() == 0) {
        throw Error(errc::empty_matrix, "cannot compute metrics over zero frames");
    }
    MetricSet metrics;
    metrics.accuracy =
        static_cast<double>(matrix.tp + matrix.tn) / static_cast<double>(matrix.total());
    if (matrix.tp + matrix.fp > 0) {
        metrics.precision =
            static_cast<double>(matrix.tp) / static_cast<double>(matrix.tp + matrix.fp);
    }
    if (matrix.tp + matrix.fn > 0) {
        metrics.recall =
            static_cast<double>(matrix.tp) / static_cast<double>(matrix.tp + matrix.fn);
    }
    if (metrics.precision && metrics.recall && (*metrics.precision + *metrics.recall) > 0.0) {
        metrics.f1 = 2.0 * (*metrics.precision * *metrics.recall) /
                     (*metrics.precision + *metrics.recall);
    }
    return metrics;
}

namespace {

std::optional<double> macro_average(const std::vector<MetricSet>& per_run,
                                    std::optional<double> MetricSet::*member) {
    double sum = 0.0;
    for (const auto& metrics : per_run) {
        if (!(metrics.*member)) return std::nullopt;
        sum += *(metrics.*member);
    }
    if (per_run.empty()) return std::nullopt;
    return sum / static_cast<double>(per_run.size());
}

std::string fmt_metric(const std::optional<double>& value) {
    if (!value) return "undefined";
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(1) << (*value * 100.0) << "%";
    return ss.str();
}

}  // namespace

std::vector<ComparisonRow> aggregate(std::span<const RunResult> results, bool macro) {
    if (results.empty()) {
        throw Error(errc::invalid_params, "aggregate needs at least one run result");
    }
    std::map<std::pair<std::string, std::string>, ComparisonRow> rows;
    for (const auto& result : results) {
        auto& row = rows[{result.system, result.scenario}];
        row.system = result.system;
        row.scenario = result.scenario;
        row.pooled += result.matrix;
        row.runs.push_back(result);
    }
    std::vector<ComparisonRow> out;
    out.reserve(rows.size());
    for (auto& [key, row] : rows) {
        std::sort(row.runs.begin(), row.runs.end(),
                  [](const RunResult& a, const RunResult& b) { return a.run < b.run; });
        for (const auto& run : row.runs) row.run_metrics.push_back(compute_metrics(run.matrix));
        if (macro) {
            row.metrics.accuracy = macro_average(row.run_metrics, &MetricSet::accuracy);
            row.metrics.precision = macro_average(row.run_metrics, &MetricSet::precision);
            row.metrics.recall = macro_average(row.run_metrics, &MetricSet::recall);
            row.metrics.f1 = macro_average(row.run_metrics, &MetricSet::f1);
        } else {
            row.metrics = compute_metrics(row.pooled);
        }
        out.push_back(std::move(row));
    }
    return out;
}

nlohmann::json comparison_to_json(std::span<const ComparisonRow> rows) {
    auto metric_json = [](const MetricSet& metrics) {
        auto one = [](const std::optional<double>& v) {
            return v ? nlohmann::json(*v) : nlohmann::json("undefined");
        };
        return nlohmann::json{{"accuracy", one(metrics.accuracy)},
                              {"precision", one(metrics.precision)},
                              {"recall", one(metrics.recall)},
                              {"f1", one(metrics.f1)}};
    };
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json runs = nlohmann::json::array();
        for (std::size_t i = 0; i < row.runs.size(); ++i) {
            runs.push_back({{"run", row.runs[i].run},
                            {"matrix",
                             {{"tp", row.runs[i].matrix.tp},
                              {"tn", row.runs[i].matrix.tn},
                              {"fp", row.runs[i].matrix.fp},
                              {"fn", row.runs[i].matrix.fn}}},
                            {"metrics", metric_json(row.run_metrics[i])}});
        }
        out.push_back({{"system", row.system},
                       {"scenario", row.scenario},
                       {"matrix",
                        {{"tp", row.pooled.tp},
                         {"tn", row.pooled.tn},
                         {"fp", row.pooled.fp},
                         {"fn", row.pooled.fn}}},
                       {"metrics", metric_json(row.metrics)},
                       {"runs", runs}});
    }
    return out;
}

std::string comparison_to_text(std::span<const ComparisonRow> rows) {
    std::size_t name_width = 8;
    for (const auto& row : rows) name_width = std::max(name_width, row.system.size() + 2);
    std::ostringstream out;
    auto w = static_cast<int>(name_width);
    out << std::left << std::setw(w) << "system" << std::setw(10) << "scenario" << std::setw(7)
        << "frames" << std::setw(22) << "tp/tn/fp/fn" << std::setw(11) << "accuracy"
        << std::setw(11) << "precision" << std::setw(11) << "recall" << std::setw(11) << "f1"
        << "\n";
    for (const auto& row : rows) {
        std::ostringstream cm;
        cm << row.pooled.tp << "/" << row.pooled.tn << "/" << row.pooled.fp << "/"
           << row.pooled.fn;
        out << std::left << std::setw(w) << row.system << std::setw(10) << row.scenario
            << std::setw(7) << row.pooled.total() << std::setw(22) << cm.str() << std::setw(11)
            << fmt_metric(row.metrics.accuracy) << std::setw(11)
            << fmt_metric(row.metrics.precision) << std::setw(11)
            << fmt_metric(row.metrics.recall) << std::setw(11) << fmt_metric(row.metrics.f1)
            << "\n";
    }
    return out.str();
}

LabelMap load_labels(const std::filesystem::path& path, const std::string& default_scenario,
                     int default_run) {
    LabelMap labels;
    for_each_jsonl(path, [&](std::size_t lineno, const nlohmann::json& record) {
        FrameId id;
        id.scenario = record.value("scenario", default_scenario);
        id.run = record.value("run", default_run);
        id.frame_index = record.at("frame_index").get<int>();
        auto label = assess::label_from_name(record.at("label").get<std::string>());
        if (!label) {
            throw Error(errc::invalid_params,
                        path.string() + ":" + std::to_string(lineno) +
                            ": label must be Safe or Unsafe");
        }
        if (!labels.emplace(id, *label).second) {
            throw Error(errc::invalid_params, path.string() + ":" + std::to_string(lineno) +
                                                  ": duplicate frame id " + frame_id_string(id));
        }
    });
    return labels;
}

}  // namespace sitewarden::evalkit
