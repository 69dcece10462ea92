#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sitewarden/assess.hpp"
#include "sitewarden/chat.hpp"
#include "sitewarden/ingest.hpp"

namespace sitewarden::report {

// Provenance label grammar: B{frame}-{stage}{letters}. The letters cite, in
// order, the upstream artifacts used to produce the output (A = first
// citation); an empty citation list is allowed.
std::string make_label(int frame_index, int stage, const std::string& refs);

struct ParsedLabel {
    int frame_index = 0;
    int stage = 0;
    std::string refs;

    bool operator==(const ParsedLabel&) const = default;
};

ParsedLabel parse_label(const std::string& label);

// A maximal run of temporally adjacent Unsafe frames, reported as one
// finding with a time span.
struct HazardEpisode {
    ingest::TimeLabel start_label;
    ingest::TimeLabel end_label;
    std::vector<int> frame_indices;      // Unsafe members only
    std::string representative_reason;   // most frequent reason, ties -> earliest
    int count = 0;
};

// Groups Unsafe frames whose consecutive indices differ by at most
// gap_tolerance + 1. The timeline must be sorted by frame_index.
std::vector<HazardEpisode> coalesce_episodes(std::span<const assess::Assessment> timeline,
                                             int gap_tolerance);

// One line per assessment, "At {time_label}: {label} — {reason}", in time
// order; "(no assessments)" when empty. This exact string is the model input
// for model-mode reports.
std::string summarize_timeline(std::span<const assess::Assessment> timeline);

struct ReportHeader {
    std::string run_id;
    std::string source;
    int frame_count = 0;
    std::map<std::string, std::string> model_ids;  // role -> model
};

struct Finding {
    int number = 0;
    std::string provenance_label;  // B{start_frame}-4
    ingest::TimeLabel start;
    ingest::TimeLabel end;
    int count = 0;
    std::string reason;
    std::vector<std::string> clause_ids;  // grounding, first-citation order
    std::vector<int> frame_indices;
};

struct SafetyReport {
    ReportHeader header;
    std::string summary;
    std::vector<Finding> findings;
    std::string recommendations;
    std::string appendix;
};

enum class ReportMode { deterministic, model };

struct ReportInputs {
    ReportHeader header;
    std::vector<assess::Assessment> timeline;  // sorted by frame_index
    // frame -> clause ids that grounded its rules, in grounding order.
    std::map<int, std::vector<std::string>> grounding_clauses;
    // Known corpus ids; every cited clause_id must be one of them.
    std::set<std::string> corpus_clause_ids;
    std::vector<std::string> failed_frames;  // "frame 7: BackendUnreachable: ..."
    int gap_tolerance = 0;
};

// Deterministic mode is a pure function of inputs and template. Model mode
// sends summarize_timeline output inside the prompt and stores the reply as
// the executive summary; findings and the appendix stay deterministic so no
// model text can introduce an unverifiable timestamp.
SafetyReport generate_report(const ReportInputs& inputs, ReportMode mode,
                             inference::ChatBackend* backend = nullptr,
                             const std::string& model_id = {},
                             const std::string& narrative_prompt = {});

// Default narrative prompt for model mode; "{timeline}" is replaced with
// summarize_timeline output.
std::string default_narrative_prompt();

// Plain-text template with {{header}}, {{summary}}, {{findings}},
// {{recommendations}}, {{appendix}} placeholders; all five must be present.
std::string default_report_template();
std::string render_report_markdown(const SafetyReport& report, const std::string& templ);

// One provenance-labeled artifact: description, rule set, assessment, or
// report entry.
struct LedgerRecord {
    std::string provenance_label;
    int frame_index = 0;
    int stage = 0;
    std::string refs;
    std::string content_sha256;
    std::string created_at;
    std::string artifact_file;
    int retries = 0;  // serialized only when > 0
};

// Append-only JSONL ledger writer; appends are atomic per record.
class LedgerWriter {
public:
    explicit LedgerWriter(std::filesystem::path path);
    void append(const LedgerRecord& record);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::mutex mutex_;
};

std::vector<LedgerRecord> read_ledger(const std::filesystem::path& path);

}  // namespace sitewarden::report
