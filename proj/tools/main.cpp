// sitewarden — frame-to-report construction safety inspection pipeline.
//
// Subcommands: extract, build-index, run, eval, report, record.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include <nlohmann/json.hpp>

#include "sitewarden/assess.hpp"
#include "sitewarden/error.hpp"
#include "sitewarden/evalkit.hpp"
#include "sitewarden/ingest.hpp"
#include "sitewarden/live_backend.hpp"
#include "sitewarden/orchestrator.hpp"
#include "sitewarden/regstore.hpp"
#include "sitewarden/report.hpp"
#include "sitewarden/util.hpp"

namespace fs = std::filesystem;
using namespace sitewarden;

namespace {

int cmd_extract(const std::string& video, const std::string& out, double rate,
                const std::string& separator) {
    ingest::ExtractOptions options;
    options.rate_hz = rate;
    options.separator = separator == "underscore" ? ingest::TimeSeparator::underscore
                                                  : ingest::TimeSeparator::colon;
    auto frames = ingest::extract_frames(video, out, options);
    std::cout << "extracted " << frames.size() << " frame(s) into " << out << "\n";
    return 0;
}

int cmd_build_index(const std::string& corpus_path, const std::string& out,
                    const std::string& embedder, const std::string& embed_model,
                    const std::string& base_url, std::size_t max_chars, std::size_t overlap) {
    auto corpus = regstore::load_corpus(corpus_path);
    regstore::EmbeddingIndex index;
    if (embedder == "remote") {
        regstore::RemoteEmbedder remote(inference::resolve_base_url(base_url), embed_model);
        index = regstore::build_index(corpus, remote, max_chars, overlap);
    } else {
        regstore::LexicalEmbedder lexical;
        index = regstore::build_index(corpus, lexical, max_chars, overlap);
    }
    regstore::save_index(index, out);
    std::cout << "indexed " << index.size() << " chunk(s) from " << corpus.size()
              << " clause(s), dimension " << index.dimension << ", into " << out << "\n";
    return 0;
}

int cmd_run(const std::string& config_path, const orchestrator::RunConfig& overrides,
            const std::vector<std::string>& set_flags, bool check_only) {
    orchestrator::RunConfig config;
    if (!config_path.empty()) config = orchestrator::load_run_config(config_path);
    // Flag overrides beat config-file values.
    if (!overrides.source.empty()) config.source = overrides.source;
    if (!overrides.out_dir.empty()) config.out_dir = overrides.out_dir;
    if (!overrides.run_id.empty()) config.run_id = overrides.run_id;
    if (!overrides.base_url.empty()) config.base_url = overrides.base_url;
    if (!overrides.backend_mode.empty()) config.backend_mode = overrides.backend_mode;
    if (!overrides.cassette.empty()) config.cassette = overrides.cassette;
    if (overrides.concurrency > 0) config.concurrency = overrides.concurrency;
    for (const auto& kv : set_flags) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::cerr << "--set expects key=value, got: " << kv << "\n";
            return 2;
        }
        nlohmann::json doc = orchestrator::run_config_to_json(config);
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        if (!doc.contains(key)) {
            std::cerr << "unknown config key: " << key << "\n";
            return 2;
        }
        if (doc[key].is_string()) {
            doc[key] = value;
        } else {
            doc[key] = nlohmann::json::parse(value);
        }
        config = orchestrator::run_config_from_json(doc);
    }

    if (check_only) {
        auto violations = orchestrator::validate(config);
        if (violations.empty()) {
            std::cout << "config ok\n";
            return 0;
        }
        for (const auto& violation : violations) std::cout << "violation: " << violation << "\n";
        return 1;
    }
    auto artifacts = orchestrator::run(config);
    std::cout << "run " << artifacts.run_id << ": " << artifacts.assessed_count << "/"
              << artifacts.frame_count << " frame(s) assessed";
    if (artifacts.failed_count > 0) std::cout << ", " << artifacts.failed_count << " failed";
    std::cout << "\nreport: " << artifacts.report.string() << "\n";
    return artifacts.failed_count == 0 ? 0 : 1;
}

int cmd_eval(const std::string& truth_path, const std::vector<std::string>& pred_paths,
             bool macro, const std::string& json_out, const std::string& default_scenario,
             int default_run) {
    auto truth = evalkit::load_labels(truth_path, default_scenario, default_run);
    std::vector<evalkit::RunResult> results;
    for (const auto& pred_path : pred_paths) {
        auto predictions = evalkit::load_labels(pred_path, default_scenario, default_run);
        const std::string system = fs::path(pred_path).stem().string();
        // One tally per (scenario, run) present in this predictions file.
        std::map<std::pair<std::string, int>, std::pair<evalkit::LabelMap, evalkit::LabelMap>>
            groups;
        for (const auto& [id, label] : predictions) {
            groups[{id.scenario, id.run}].first.emplace(id, label);
        }
        for (const auto& [id, label] : truth) {
            auto key = std::make_pair(id.scenario, id.run);
            if (groups.count(key)) groups[key].second.emplace(id, label);
        }
        for (auto& [key, maps] : groups) {
            evalkit::RunResult result;
            result.system = system;
            result.scenario = key.first;
            result.run = key.second;
            result.matrix = evalkit::tally(maps.first, maps.second);
            results.push_back(std::move(result));
        }
    }
    auto rows = evalkit::aggregate(results, macro);
    std::cout << evalkit::comparison_to_text(rows);
    if (!json_out.empty()) {
        write_file_atomic(json_out, evalkit::comparison_to_json(rows).dump(2) + "\n");
        std::cout << "json table written to " << json_out << "\n";
    }
    return 0;
}

int cmd_report(const std::string& assessments_path, const std::string& rules_path,
               const std::string& out, int gap_tolerance, const std::string& template_file,
               const std::string& run_id) {
    std::vector<assess::Assessment> timeline;
    for_each_jsonl(assessments_path, [&](std::size_t, const nlohmann::json& record) {
        assess::Assessment assessment;
        assessment.frame_index = record.at("frame_index").get<int>();
        assessment.time_label.text = record.at("time_label").get<std::string>();
        assessment.label = *assess::label_from_name(record.at("label").get<std::string>());
        assessment.reason = record.at("reason").get<std::string>();
        assessment.inconsistency_flag = record.value("inconsistency_flag", false);
        assessment.rule_set_ref = record.value("rule_set_ref", "");
        assessment.provenance_label = record.value("provenance_label", "");
        timeline.push_back(std::move(assessment));
    });
    std::sort(timeline.begin(), timeline.end(),
              [](const assess::Assessment& a, const assess::Assessment& b) {
                  return a.frame_index < b.frame_index;
              });

    report::ReportInputs inputs;
    inputs.header.run_id = run_id.empty() ? "re-render" : run_id;
    inputs.header.source = assessments_path;
    inputs.header.frame_count = static_cast<int>(timeline.size());
    inputs.timeline = std::move(timeline);
    inputs.gap_tolerance = gap_tolerance;
    if (!rules_path.empty()) {
        for_each_jsonl(rules_path, [&](std::size_t, const nlohmann::json& record) {
            std::vector<std::string> clauses;
            for (const auto& chunk_id : record.at("grounding")) {
                std::string id = chunk_id.get<std::string>();
                id = id.substr(0, id.find('#'));
                if (std::find(clauses.begin(), clauses.end(), id) == clauses.end()) {
                    clauses.push_back(id);
                }
            }
            inputs.grounding_clauses[record.at("frame_index").get<int>()] = std::move(clauses);
        });
    }
    auto safety_report = report::generate_report(inputs, report::ReportMode::deterministic);
    const std::string templ = template_file.empty() ? report::default_report_template()
                                                    : read_file_text(template_file);
    write_file_atomic(out, report::render_report_markdown(safety_report, templ));
    std::cout << "report written to " << out << "\n";
    return 0;
}

int cmd_record(const std::string& base_url, const std::string& requests_path,
               const std::string& out) {
    std::vector<inference::ChatRequest> requests;
    for_each_jsonl(requests_path, [&](std::size_t, const nlohmann::json& record) {
        inference::ChatRequest request;
        request.model_id = record.at("model").get<std::string>();
        request.options = record.value("options", inference::default_options());
        inference::ChatMessage message;
        message.text = record.value("prompt", "");
        if (record.contains("image")) {
            message.images.push_back(read_file_bytes(record.at("image").get<std::string>()));
        }
        request.messages.push_back(std::move(message));
        requests.push_back(std::move(request));
    });
    inference::LiveBackend live(inference::resolve_base_url(base_url));
    inference::record_cassette(live, requests, out);
    std::cout << "recorded " << requests.size() << " request(s) into " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sitewarden: retrieval-grounded construction safety inspection pipeline"};
    app.require_subcommand(1);

    // extract
    auto* extract = app.add_subcommand("extract", "Sample a video into timestamped frames");
    std::string video, out_dir = "frames", separator = "colon";
    double rate = 1.0;
    extract->add_option("--video", video, "input video file")->required();
    extract->add_option("--out", out_dir, "output frame directory");
    extract->add_option("--rate", rate, "sampling rate in Hz");
    extract->add_option("--time-separator", separator, "colon|underscore (filename time fields)");

    // build-index
    auto* build = app.add_subcommand("build-index", "Embed a regulation corpus into an index");
    std::string corpus, index_out, embedder = "lexical", embed_model, base_url;
    std::size_t max_chars = 800, overlap = 100;
    build->add_option("--corpus", corpus, "corpus jsonl file")->required();
    build->add_option("--out", index_out, "index output file")->required();
    build->add_option("--embedder", embedder, "lexical|remote");
    build->add_option("--embed-model", embed_model, "remote embedder model id");
    build->add_option("--base-url", base_url, "model server base URL");
    build->add_option("--max-chars", max_chars, "chunk size in characters");
    build->add_option("--overlap", overlap, "chunk overlap in characters");

    // run
    auto* run = app.add_subcommand("run", "Execute the full pipeline over a source");
    std::string config_path;
    orchestrator::RunConfig overrides;
    overrides.out_dir.clear();
    overrides.backend_mode.clear();
    overrides.concurrency = 0;
    std::vector<std::string> set_flags;
    bool check_only = false;
    run->add_option("--config", config_path, "run config JSON file");
    run->add_option("--source", overrides.source, "video file or frame directory");
    run->add_option("--out-dir", overrides.out_dir, "parent directory for run artifacts");
    run->add_option("--run-id", overrides.run_id, "explicit run id (default: config digest)");
    run->add_option("--base-url", overrides.base_url, "model server base URL");
    run->add_option("--backend", overrides.backend_mode, "live|replay|record");
    run->add_option("--cassette", overrides.cassette, "cassette path for replay/record");
    run->add_option("--concurrency", overrides.concurrency, "frame-level in-flight limit");
    run->add_option("--set", set_flags, "override any config key, key=value")
        ->take_all();
    run->add_flag("--check", check_only, "validate the config and exit");

    // eval
    auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
    std::string truth_path, json_out, default_scenario = "A";
    std::vector<std::string> pred_paths;
    bool macro = false;
    int default_run = 1;
    eval->add_option("--truth", truth_path, "truth jsonl file")->required();
    eval->add_option("--pred", pred_paths, "prediction jsonl file(s)")->required()->take_all();
    eval->add_flag("--macro", macro, "macro-average per-run metrics instead of pooling");
    eval->add_option("--json", json_out, "also write the table as JSON");
    eval->add_option("--scenario", default_scenario, "scenario for records lacking one");
    eval->add_option("--run", default_run, "run number for records lacking one");

    // report
    auto* rep = app.add_subcommand("report", "Re-render a report from recorded assessments");
    std::string assessments_path, rules_path, report_out = "report.md", template_file, run_id;
    int gap_tolerance = 0;
    rep->add_option("--assessments", assessments_path, "assessments jsonl file")->required();
    rep->add_option("--rules", rules_path, "rules jsonl file (for grounding citations)");
    rep->add_option("--out", report_out, "output markdown file");
    rep->add_option("--gap-tolerance", gap_tolerance, "episode gap tolerance in frames");
    rep->add_option("--template", template_file, "report template file");
    rep->add_option("--run-id", run_id, "run id to print in the header");

    // record
    auto* record = app.add_subcommand("record", "Record a cassette against a live server");
    std::string record_requests, record_out, record_base_url;
    record->add_option("--requests", record_requests, "jsonl of {model, prompt, image?}")
        ->required();
    record->add_option("--out", record_out, "cassette output path")->required();
    record->add_option("--base-url", record_base_url, "model server base URL");

    CLI11_PARSE(app, argc, argv);

    try {
        if (extract->parsed()) return cmd_extract(video, out_dir, rate, separator);
        if (build->parsed()) {
            return cmd_build_index(corpus, index_out, embedder, embed_model, base_url, max_chars,
                                   overlap);
        }
        if (run->parsed()) return cmd_run(config_path, overrides, set_flags, check_only);
        if (eval->parsed()) {
            return cmd_eval(truth_path, pred_paths, macro, json_out, default_scenario,
                            default_run);
        }
        if (rep->parsed()) {
            return cmd_report(assessments_path, rules_path, report_out, gap_tolerance,
                              template_file, run_id);
        }
        if (record->parsed()) return cmd_record(record_base_url, record_requests, record_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
