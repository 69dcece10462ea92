#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitewarden/chat.hpp"

namespace sitewarden::orchestrator {

// Everything one run needs, loadable from a single JSON document so the
// config bytes can participate in cache keys without parser ambiguity.
struct RunConfig {
    std::string source;                 // video file or pre-extracted frame dir
    double rate_hz = 1.0;
    std::string corpus;                 // regulation corpus jsonl
    std::string index_file;             // optional prebuilt index
    std::string embedder = "lexical";   // lexical | remote
    std::string embed_model;            // remote embedder model id
    std::size_t chunk_max_chars = 800;
    std::size_t chunk_overlap = 100;
    int k = 4;
    // Role -> model id; roles: describe (vision), rules (text), report
    // (reasoning; needed only in model report mode).
    std::map<std::string, std::string> models;
    std::string backend_mode = "live";  // live | replay | record
    std::string base_url;               // live/record; SITEWARDEN_BASE_URL fallback
    std::string cassette;               // replay/record cassette path
    std::string describe_template;      // empty -> built-in default
    std::string rule_role_line;         // empty -> built-in default
    std::string report_template_file;   // empty -> built-in default
    std::string narrative_prompt_file;  // empty -> built-in default
    int gap_tolerance = 0;
    std::string report_mode = "deterministic";  // deterministic | model
    std::string out_dir = "runs";
    std::string run_id;                 // empty -> content digest of the config
    int concurrency = 2;                // frame-level in-flight limit
    std::string time_separator = "colon";  // colon | underscore
};

RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& doc);

// Checks paths, role completeness and parameter ranges; never mutates state.
// An empty result means the config is runnable.
std::vector<std::string> validate(const RunConfig& config);

// run_id when none is configured: a digest of the config content, excluding
// out_dir and run_id themselves so the same logical run resumes regardless
// of where its artifacts live.
std::string derive_run_id(const RunConfig& config);

struct RunArtifacts {
    std::string run_id;
    std::filesystem::path run_dir;
    std::filesystem::path frames_index;
    std::filesystem::path descriptions;
    std::filesystem::path rules;
    std::filesystem::path assessments;
    std::filesystem::path report;
    std::filesystem::path ledger;
    std::filesystem::path errors;
    int frame_count = 0;
    int assessed_count = 0;
    int failed_count = 0;
};

// Executes ingest -> describe -> rules -> assess per frame, then the report
// once. Each stage's output is persisted before the next stage consumes it;
// records are cached by request key and reused on resume. A stage error
// fails that frame only; the run completes the rest and lists failures in
// errors.jsonl and the report appendix.
//
// backend_override replaces the config-selected backend (tests drive the
// pipeline with scripted mocks this way); the config's backend settings are
// not validated in that case.
RunArtifacts run(const RunConfig& config,
                 inference::ChatBackend* backend_override = nullptr);

}  // namespace sitewarden::orchestrator
