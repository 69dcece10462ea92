#include "sitewarden/orchestrator.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "sitewarden/assess.hpp"
#include "sitewarden/error.hpp"
#include "sitewarden/ingest.hpp"
#include "sitewarden/live_backend.hpp"
#include "sitewarden/perception.hpp"
#include "sitewarden/regstore.hpp"
#include "sitewarden/report.hpp"
#include "sitewarden/rulegen.hpp"
#include "sitewarden/util.hpp"

namespace sitewarden::orchestrator {

namespace {

namespace fs = std::filesystem;

nlohmann::json description_to_json(const perception::SceneDescription& d) {
    return nlohmann::json{{"frame_index", d.frame_index}, {"time_label", d.time_label.text},
                          {"text", d.text},               {"provenance_label", d.provenance_label},
                          {"model_id", d.model_id},       {"request_key", d.request_key}};
}

perception::SceneDescription description_from_json(const nlohmann::json& j) {
    perception::SceneDescription d;
    d.frame_index = j.at("frame_index").get<int>();
    d.time_label.text = j.at("time_label").get<std::string>();
    d.text = j.at("text").get<std::string>();
    d.provenance_label = j.at("provenance_label").get<std::string>();
    d.model_id = j.at("model_id").get<std::string>();
    d.request_key = j.at("request_key").get<std::string>();
    return d;
}

nlohmann::json rule_set_to_json(const rulegen::RuleSet& r) {
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& rule : r.rules) {
        rules.push_back({{"polarity", rule.polarity == rulegen::Polarity::safe ? "safe" : "unsafe"},
                         {"ordinal", rule.ordinal},
                         {"principle", rule.principle},
                         {"criterion", rule.criterion}});
    }
    nlohmann::json j{{"frame_index", r.frame_index},
                     {"provenance_label", r.provenance_label},
                     {"grounding", r.grounding},
                     {"rules", rules},
                     {"raw_text", r.raw_text},
                     {"request_key", r.request_key}};
    if (r.retries > 0) j["retries"] = r.retries;
    return j;
}

rulegen::RuleSet rule_set_from_json(const nlohmann::json& j) {
    rulegen::RuleSet r;
    r.frame_index = j.at("frame_index").get<int>();
    r.provenance_label = j.at("provenance_label").get<std::string>();
    r.grounding = j.at("grounding").get<std::vector<std::string>>();
    const auto& rules = j.at("rules");
    for (std::size_t i = 0; i < 4 && i < rules.size(); ++i) {
        r.rules[i].polarity = rules[i].at("polarity").get<std::string>() == "safe"
                                  ? rulegen::Polarity::safe
                                  : rulegen::Polarity::unsafe_;
        r.rules[i].ordinal = rules[i].at("ordinal").get<int>();
        r.rules[i].principle = rules[i].at("principle").get<std::string>();
        r.rules[i].criterion = rules[i].at("criterion").get<std::string>();
    }
    r.raw_text = j.at("raw_text").get<std::string>();
    r.request_key = j.at("request_key").get<std::string>();
    r.retries = j.value("retries", 0);
    return r;
}

nlohmann::json assessment_to_json(const assess::Assessment& a) {
    nlohmann::json j{{"frame_index", a.frame_index},
                     {"time_label", a.time_label.text},
                     {"label", assess::label_name(a.label)},
                     {"reason", a.reason},
                     {"inconsistency_flag", a.inconsistency_flag},
                     {"rule_set_ref", a.rule_set_ref},
                     {"provenance_label", a.provenance_label},
                     {"raw_text", a.raw_text},
                     {"request_key", a.request_key}};
    if (a.severity) j["severity"] = a.severity->value;
    if (a.retries > 0) j["retries"] = a.retries;
    return j;
}

assess::Assessment assessment_from_json(const nlohmann::json& j) {
    assess::Assessment a;
    a.frame_index = j.at("frame_index").get<int>();
    a.time_label.text = j.at("time_label").get<std::string>();
    a.label = *assess::label_from_name(j.at("label").get<std::string>());
    a.reason = j.at("reason").get<std::string>();
    if (j.contains("severity")) a.severity = assess::SeverityRating{j.at("severity").get<int>()};
    a.inconsistency_flag = j.at("inconsistency_flag").get<bool>();
    a.rule_set_ref = j.at("rule_set_ref").get<std::string>();
    a.provenance_label = j.at("provenance_label").get<std::string>();
    a.raw_text = j.at("raw_text").get<std::string>();
    a.request_key = j.at("request_key").get<std::string>();
    a.retries = j.value("retries", 0);
    return a;
}

// The stage files double as the stage cache: a record whose request_key
// matches the freshly computed one is a hit, anything else is recomputed.
// Malformed lines (a crash can leave a half-written tail) are skipped, not
// fatal; their frames simply recompute.
std::map<std::string, nlohmann::json> load_stage_cache(const fs::path& path) {
    std::map<std::string, nlohmann::json> cache;
    if (!fs::exists(path)) return cache;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.contains("request_key") ||
            !record["request_key"].is_string()) {
            continue;
        }
        cache[record["request_key"].get<std::string>()] = record;
    }
    return cache;
}

void write_stage_file(const fs::path& path, const std::map<int, nlohmann::json>& by_frame) {
    std::ostringstream out;
    for (const auto& [frame, record] : by_frame) out << record.dump() << "\n";
    write_file_atomic(path, out.str());
}

struct FrameFailure {
    int frame_index = 0;
    std::string stage;
    std::string code;
    std::string message;
};

}  // namespace

nlohmann::json run_config_to_json(const RunConfig& c) {
    return nlohmann::json{{"source", c.source},
                          {"rate_hz", c.rate_hz},
                          {"corpus", c.corpus},
                          {"index_file", c.index_file},
                          {"embedder", c.embedder},
                          {"embed_model", c.embed_model},
                          {"chunk_max_chars", c.chunk_max_chars},
                          {"chunk_overlap", c.chunk_overlap},
                          {"k", c.k},
                          {"models", c.models},
                          {"backend_mode", c.backend_mode},
                          {"base_url", c.base_url},
                          {"cassette", c.cassette},
                          {"describe_template", c.describe_template},
                          {"rule_role_line", c.rule_role_line},
                          {"report_template_file", c.report_template_file},
                          {"narrative_prompt_file", c.narrative_prompt_file},
                          {"gap_tolerance", c.gap_tolerance},
                          {"report_mode", c.report_mode},
                          {"out_dir", c.out_dir},
                          {"run_id", c.run_id},
                          {"concurrency", c.concurrency},
                          {"time_separator", c.time_separator}};
}

RunConfig run_config_from_json(const nlohmann::json& doc) {
    RunConfig c;
    c.source = doc.value("source", c.source);
    c.rate_hz = doc.value("rate_hz", c.rate_hz);
    c.corpus = doc.value("corpus", c.corpus);
    c.index_file = doc.value("index_file", c.index_file);
    c.embedder = doc.value("embedder", c.embedder);
    c.embed_model = doc.value("embed_model", c.embed_model);
    c.chunk_max_chars = doc.value("chunk_max_chars", c.chunk_max_chars);
    c.chunk_overlap = doc.value("chunk_overlap", c.chunk_overlap);
    c.k = doc.value("k", c.k);
    c.models = doc.value("models", c.models);
    c.backend_mode = doc.value("backend_mode", c.backend_mode);
    c.base_url = doc.value("base_url", c.base_url);
    c.cassette = doc.value("cassette", c.cassette);
    c.describe_template = doc.value("describe_template", c.describe_template);
    c.rule_role_line = doc.value("rule_role_line", c.rule_role_line);
    c.report_template_file = doc.value("report_template_file", c.report_template_file);
    c.narrative_prompt_file = doc.value("narrative_prompt_file", c.narrative_prompt_file);
    c.gap_tolerance = doc.value("gap_tolerance", c.gap_tolerance);
    c.report_mode = doc.value("report_mode", c.report_mode);
    c.out_dir = doc.value("out_dir", c.out_dir);
    c.run_id = doc.value("run_id", c.run_id);
    c.concurrency = doc.value("concurrency", c.concurrency);
    c.time_separator = doc.value("time_separator", c.time_separator);
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(errc::invalid_config, path.string() + ": " + e.what());
    }
    RunConfig config = run_config_from_json(doc);
    // Input paths are relative to the config file, so a checked-in config
    // works from any working directory. out_dir stays caller-relative.
    const fs::path base = fs::absolute(path).parent_path();
    auto anchor = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
    };
    anchor(config.source);
    anchor(config.corpus);
    anchor(config.index_file);
    anchor(config.cassette);
    anchor(config.report_template_file);
    anchor(config.narrative_prompt_file);
    return config;
}

std::vector<std::string> validate(const RunConfig& c) {
    std::vector<std::string> violations;
    auto need = [&](bool ok, const std::string& what) {
        if (!ok) violations.push_back(what);
    };
    need(!c.source.empty() && fs::exists(c.source), "source must exist: " + c.source);
    need(c.rate_hz > 0.0, "rate_hz must be > 0");
    need(!c.corpus.empty() || !c.index_file.empty(), "corpus (or index_file) is required");
    if (!c.corpus.empty()) need(fs::exists(c.corpus), "corpus must exist: " + c.corpus);
    if (!c.index_file.empty()) {
        need(fs::exists(c.index_file), "index_file must exist: " + c.index_file);
        need(!c.corpus.empty(), "index_file needs the corpus to re-derive chunk texts");
    }
    need(c.embedder == "lexical" || c.embedder == "remote",
         "embedder must be lexical or remote");
    if (c.embedder == "remote") {
        need(!c.embed_model.empty(), "remote embedder needs embed_model");
    }
    need(c.chunk_max_chars > 0 && c.chunk_overlap < c.chunk_max_chars,
         "chunking requires 0 <= overlap < max_chars");
    need(c.k >= 1, "k must be >= 1");
    need(c.models.count("describe") == 1, "models.describe is required");
    need(c.models.count("rules") == 1, "models.rules is required");
    need(c.backend_mode == "live" || c.backend_mode == "replay" || c.backend_mode == "record",
         "backend_mode must be live, replay or record");
    if (c.backend_mode == "replay" || c.backend_mode == "record") {
        need(!c.cassette.empty(), c.backend_mode + " mode needs a cassette path");
    }
    if (c.backend_mode == "live" || c.backend_mode == "record" ||
        (c.embedder == "remote")) {
        need(!inference::resolve_base_url(c.base_url).empty(),
             "live access needs base_url (flag, config or SITEWARDEN_BASE_URL)");
    }
    need(c.report_mode == "deterministic" || c.report_mode == "model",
         "report_mode must be deterministic or model");
    if (c.report_mode == "model") {
        need(c.models.count("report") == 1, "model report mode needs models.report");
    }
    if (!c.report_template_file.empty()) {
        need(fs::exists(c.report_template_file),
             "report_template_file must exist: " + c.report_template_file);
    }
    if (!c.narrative_prompt_file.empty()) {
        need(fs::exists(c.narrative_prompt_file),
             "narrative_prompt_file must exist: " + c.narrative_prompt_file);
    }
    need(c.gap_tolerance >= 0, "gap_tolerance must be >= 0");
    need(c.concurrency >= 1, "concurrency must be >= 1");
    need(c.time_separator == "colon" || c.time_separator == "underscore",
         "time_separator must be colon or underscore");
    return violations;
}

std::string derive_run_id(const RunConfig& config) {
    if (!config.run_id.empty()) return config.run_id;
    nlohmann::json doc = run_config_to_json(config);
    // Only fields that shape the outputs participate: where artifacts live,
    // how many workers ran, and which server answered are not part of the
    // run's identity (stage records are content-addressed anyway).
    doc.erase("out_dir");
    doc.erase("run_id");
    doc.erase("concurrency");
    doc.erase("base_url");
    return sha256_hex(doc.dump()).substr(0, 12);
}

RunArtifacts run(const RunConfig& config, inference::ChatBackend* backend_override) {
    auto violations = validate(config);
    if (backend_override != nullptr) {
        // Backend-related violations do not apply when the backend is
        // injected directly.
        std::erase_if(violations, [](const std::string& v) {
            return v.find("cassette") != std::string::npos ||
                   v.find("base_url") != std::string::npos;
        });
    }
    if (!violations.empty()) {
        std::ostringstream msg;
        msg << violations.size() << " config violation(s):";
        for (const auto& violation : violations) msg << "\n  - " << violation;
        throw Error(errc::invalid_config, msg.str());
    }

    RunArtifacts artifacts;
    artifacts.run_id = derive_run_id(config);
    artifacts.run_dir = fs::path(config.out_dir) / artifacts.run_id;
    fs::create_directories(artifacts.run_dir);
    artifacts.descriptions = artifacts.run_dir / "descriptions.jsonl";
    artifacts.rules = artifacts.run_dir / "rules.jsonl";
    artifacts.assessments = artifacts.run_dir / "assessments.jsonl";
    artifacts.report = artifacts.run_dir / "report.md";
    artifacts.ledger = artifacts.run_dir / "ledger.jsonl";
    artifacts.errors = artifacts.run_dir / "errors.jsonl";
    {
        nlohmann::json doc = run_config_to_json(config);
        doc["run_id"] = artifacts.run_id;
        write_file_atomic(artifacts.run_dir / "config.json", doc.dump(2) + "\n");
    }

    // --- ingest ---------------------------------------------------------
    const fs::path frames_dir = artifacts.run_dir / "frames";
    std::vector<ingest::Frame> frames;
    if (fs::is_directory(config.source)) {
        frames = ingest::ingest_frame_dir(config.source);
        ingest::write_frame_index(frames_dir, frames);
    } else if (auto cached = ingest::load_frame_index(frames_dir)) {
        // The run id pins source and rate, so a complete earlier extraction
        // in this run dir is reusable without decoding again.
        frames = std::move(*cached);
    } else {
        ingest::ExtractOptions options;
        options.rate_hz = config.rate_hz;
        options.separator = config.time_separator == "underscore"
                                ? ingest::TimeSeparator::underscore
                                : ingest::TimeSeparator::colon;
        frames = ingest::extract_frames(config.source, frames_dir, options);
    }
    artifacts.frames_index = frames_dir / "index.jsonl";
    artifacts.frame_count = static_cast<int>(frames.size());

    // --- knowledge base ---------------------------------------------------
    std::vector<regstore::RegulationClause> corpus;
    if (!config.corpus.empty()) corpus = regstore::load_corpus(config.corpus);
    std::unique_ptr<regstore::Embedder> query_embedder;
    regstore::EmbeddingIndex index;
    if (!config.index_file.empty()) {
        index = regstore::load_index(config.index_file, corpus);
    } else if (config.embedder == "remote") {
        query_embedder = std::make_unique<regstore::RemoteEmbedder>(
            inference::resolve_base_url(config.base_url), config.embed_model);
        index = regstore::build_index(corpus, *query_embedder, config.chunk_max_chars,
                                      config.chunk_overlap);
    } else {
        regstore::LexicalEmbedder seed;  // fitted inside build_index
        index = regstore::build_index(corpus, seed, config.chunk_max_chars,
                                      config.chunk_overlap);
    }
    if (!query_embedder) {
        if (index.embedder_id.rfind("remote/", 0) == 0) {
            query_embedder = std::make_unique<regstore::RemoteEmbedder>(
                inference::resolve_base_url(config.base_url), config.embed_model);
        } else {
            query_embedder = std::make_unique<regstore::LexicalEmbedder>(
                regstore::LexicalEmbedder::from_params(index.embedder_params));
        }
    }

    // --- backend ----------------------------------------------------------
    std::unique_ptr<inference::ChatBackend> live;
    std::unique_ptr<inference::ChatBackend> owned_backend;
    inference::ChatBackend* backend = backend_override;
    if (backend == nullptr) {
        if (config.backend_mode == "replay") {
            owned_backend = std::make_unique<inference::ReplayBackend>(config.cassette);
        } else if (config.backend_mode == "record") {
            live = std::make_unique<inference::LiveBackend>(
                inference::resolve_base_url(config.base_url));
            owned_backend = std::make_unique<inference::RecordingBackend>(*live, config.cassette);
        } else {
            owned_backend = std::make_unique<inference::LiveBackend>(
                inference::resolve_base_url(config.base_url));
        }
        backend = owned_backend.get();
    }

    const std::string describe_model = config.models.at("describe");
    const std::string rules_model = config.models.at("rules");
    const std::string describe_template = config.describe_template.empty()
                                              ? perception::default_description_template()
                                              : config.describe_template;
    const std::string role_line =
        config.rule_role_line.empty() ? rulegen::default_rule_role_line() : config.rule_role_line;

    std::mutex state_mutex;
    std::map<int, FrameFailure> failures;
    auto record_failure = [&](int frame_index, const char* stage, const Error& e) {
        std::lock_guard lock(state_mutex);
        failures[frame_index] = FrameFailure{frame_index, stage, std::string(errc_name(e.code())),
                                             e.message()};
    };

    // --- stage 1: scene descriptions --------------------------------------
    std::map<int, perception::SceneDescription> descriptions;
    {
        auto cache = load_stage_cache(artifacts.descriptions);
        parallel_for(frames.size(), config.concurrency, [&](std::size_t i) {
            const ingest::Frame& frame = frames[i];
            try {
                const std::string key = inference::request_key(
                    perception::build_describe_request(frame, describe_model,
                                                       describe_template));
                perception::SceneDescription description;
                bool hit = false;
                {
                    std::lock_guard lock(state_mutex);
                    if (auto it = cache.find(key); it != cache.end()) {
                        try {
                            description = description_from_json(it->second);
                            // Identical frames share one cache record; the
                            // content carries over, the frame metadata is
                            // rebound.
                            description.frame_index = frame.index;
                            description.time_label.text =
                                ingest::render_time_label(frame.capture_time_ms);
                            description.provenance_label =
                                report::make_label(frame.index, 1, "A");
                            hit = true;
                        } catch (const std::exception&) {
                            hit = false;  // corrupt record: recompute
                        }
                    }
                }
                if (!hit) {
                    description = perception::describe_scene(frame, *backend, describe_model,
                                                             describe_template);
                }
                std::lock_guard lock(state_mutex);
                if (!hit) {
                    append_jsonl_line(artifacts.descriptions, description_to_json(description));
                }
                descriptions[frame.index] = std::move(description);
            } catch (const Error& e) {
                record_failure(frame.index, "describe", e);
            }
        });
        std::map<int, nlohmann::json> rows;
        for (const auto& [frame, description] : descriptions) {
            rows[frame] = description_to_json(description);
        }
        write_stage_file(artifacts.descriptions, rows);
    }

    // --- stage 2: rule generation ------------------------------------------
    std::map<int, rulegen::RuleSet> rule_sets;
    {
        auto cache = load_stage_cache(artifacts.rules);
        std::vector<const perception::SceneDescription*> todo;
        for (const auto& [frame, description] : descriptions) todo.push_back(&description);
        parallel_for(todo.size(), config.concurrency, [&](std::size_t i) {
            const perception::SceneDescription& description = *todo[i];
            try {
                auto hits =
                    regstore::retrieve(index, query_embedder->embed(description.text), config.k);
                std::vector<regstore::Chunk> chunks;
                for (const auto& hit : hits) chunks.push_back(hit.chunk);
                const std::string key = inference::request_key(rulegen::build_rule_request(
                    description.text, chunks, rules_model, role_line));
                rulegen::RuleSet rule_set;
                bool found = false;
                {
                    std::lock_guard lock(state_mutex);
                    if (auto it = cache.find(key); it != cache.end()) {
                        try {
                            rule_set = rule_set_from_json(it->second);
                            rule_set.frame_index = description.frame_index;
                            std::string refs = "A";
                            for (std::size_t c = 0; c < rule_set.grounding.size() && c < 25;
                                 ++c) {
                                refs.push_back(static_cast<char>('B' + c));
                            }
                            rule_set.provenance_label =
                                report::make_label(description.frame_index, 2, refs);
                            found = true;
                        } catch (const std::exception&) {
                            found = false;
                        }
                    }
                }
                if (!found) {
                    rule_set = rulegen::generate_rules(description, index, *query_embedder,
                                                       config.k, *backend, rules_model,
                                                       role_line);
                }
                std::lock_guard lock(state_mutex);
                if (!found) {
                    append_jsonl_line(artifacts.rules, rule_set_to_json(rule_set));
                }
                rule_sets[description.frame_index] = std::move(rule_set);
            } catch (const Error& e) {
                record_failure(description.frame_index, "rules", e);
            }
        });
        std::map<int, nlohmann::json> rows;
        for (const auto& [frame, rule_set] : rule_sets) rows[frame] = rule_set_to_json(rule_set);
        write_stage_file(artifacts.rules, rows);
    }

    // --- stage 3: assessments ----------------------------------------------
    std::map<int, assess::Assessment> assessments;
    {
        auto cache = load_stage_cache(artifacts.assessments);
        std::vector<std::pair<const ingest::Frame*, const rulegen::RuleSet*>> todo;
        for (const auto& frame : frames) {
            auto it = rule_sets.find(frame.index);
            if (it != rule_sets.end()) todo.emplace_back(&frame, &it->second);
        }
        parallel_for(todo.size(), config.concurrency, [&](std::size_t i) {
            const ingest::Frame& frame = *todo[i].first;
            const rulegen::RuleSet& rule_set = *todo[i].second;
            try {
                const std::string key = inference::request_key(
                    assess::build_assess_request(frame, rule_set, describe_model));
                assess::Assessment assessment;
                bool found = false;
                {
                    std::lock_guard lock(state_mutex);
                    if (auto it = cache.find(key); it != cache.end()) {
                        try {
                            assessment = assessment_from_json(it->second);
                            assessment.frame_index = frame.index;
                            assessment.time_label.text =
                                ingest::render_time_label(frame.capture_time_ms);
                            assessment.rule_set_ref = rule_set.provenance_label;
                            assessment.provenance_label =
                                report::make_label(frame.index, 3, "ABC");
                            found = true;
                        } catch (const std::exception&) {
                            found = false;
                        }
                    }
                }
                if (!found) {
                    assessment = assess::assess_frame(frame, rule_set, *backend, describe_model);
                }
                std::lock_guard lock(state_mutex);
                if (!found) {
                    append_jsonl_line(artifacts.assessments, assessment_to_json(assessment));
                }
                assessments[frame.index] = std::move(assessment);
            } catch (const Error& e) {
                record_failure(frame.index, "assess", e);
            }
        });
        std::map<int, nlohmann::json> rows;
        for (const auto& [frame, assessment] : assessments) {
            rows[frame] = assessment_to_json(assessment);
        }
        write_stage_file(artifacts.assessments, rows);
    }

    // --- stage 4: report ------------------------------------------------
    report::ReportInputs inputs;
    inputs.header.run_id = artifacts.run_id;
    inputs.header.source = config.source;
    inputs.header.frame_count = static_cast<int>(assessments.size());
    inputs.header.model_ids = config.models;
    inputs.gap_tolerance = config.gap_tolerance;
    for (const auto& [frame, assessment] : assessments) inputs.timeline.push_back(assessment);
    for (const auto& clause : corpus) inputs.corpus_clause_ids.insert(clause.clause_id);
    for (const auto& [frame, rule_set] : rule_sets) {
        std::vector<std::string> clauses;
        for (const auto& chunk_id : rule_set.grounding) {
            std::string clause = chunk_id.substr(0, chunk_id.find('#'));
            if (std::find(clauses.begin(), clauses.end(), clause) == clauses.end()) {
                clauses.push_back(clause);
            }
        }
        inputs.grounding_clauses[frame] = std::move(clauses);
    }
    for (const auto& [frame, failure] : failures) {
        inputs.failed_frames.push_back("frame " + std::to_string(frame) + " (" + failure.stage +
                                       "): " + failure.code + ": " + failure.message);
    }

    report::ReportMode mode = config.report_mode == "model" ? report::ReportMode::model
                                                            : report::ReportMode::deterministic;
    std::string narrative_prompt;
    if (!config.narrative_prompt_file.empty()) {
        narrative_prompt = read_file_text(config.narrative_prompt_file);
    }
    report::SafetyReport safety_report =
        report::generate_report(inputs, mode, backend,
                                mode == report::ReportMode::model ? config.models.at("report")
                                                                  : std::string{},
                                narrative_prompt);
    const std::string report_template = config.report_template_file.empty()
                                            ? report::default_report_template()
                                            : read_file_text(config.report_template_file);
    write_file_atomic(artifacts.report,
                      report::render_report_markdown(safety_report, report_template));

    // --- ledger and error manifest -----------------------------------------
    {
        std::error_code ec;
        fs::remove(artifacts.ledger, ec);
        report::LedgerWriter ledger(artifacts.ledger);
        const std::string now = iso8601_utc_now();
        std::vector<report::LedgerRecord> records;
        for (const auto& [frame, description] : descriptions) {
            records.push_back({description.provenance_label, frame, 1, "A",
                               sha256_hex(description.text), now, "descriptions.jsonl", 0});
        }
        for (const auto& [frame, rule_set] : rule_sets) {
            records.push_back({rule_set.provenance_label, frame, 2,
                               report::parse_label(rule_set.provenance_label).refs,
                               sha256_hex(rule_set.raw_text), now, "rules.jsonl",
                               rule_set.retries});
        }
        for (const auto& [frame, assessment] : assessments) {
            records.push_back({assessment.provenance_label, frame, 3, "ABC",
                               sha256_hex(assessment.raw_text), now, "assessments.jsonl",
                               assessment.retries});
        }
        for (const auto& finding : safety_report.findings) {
            records.push_back({finding.provenance_label, finding.frame_indices.front(), 4, "",
                               sha256_hex(finding.reason + "|" + finding.start.text + "|" +
                                          finding.end.text),
                               now, "report.md", 0});
        }
        std::sort(records.begin(), records.end(),
                  [](const report::LedgerRecord& a, const report::LedgerRecord& b) {
                      if (a.frame_index != b.frame_index) return a.frame_index < b.frame_index;
                      return a.stage < b.stage;
                  });
        for (const auto& record : records) ledger.append(record);
    }
    {
        std::ostringstream out;
        for (const auto& [frame, failure] : failures) {
            out << nlohmann::json{{"frame_index", failure.frame_index},
                                  {"stage", failure.stage},
                                  {"error", failure.code},
                                  {"message", failure.message}}
                       .dump()
                << "\n";
        }
        write_file_atomic(artifacts.errors, out.str());
    }

    artifacts.assessed_count = static_cast<int>(assessments.size());
    artifacts.failed_count = static_cast<int>(failures.size());
    return artifacts;
}

}  // namespace sitewarden::orchestrator
