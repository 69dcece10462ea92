#include "sitewarden/report.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sitewarden/error.hpp"
#include "sitewarden/util.hpp"

namespace sitewarden::report {

std::string make_label(int frame_index, int stage, const std::string& refs) {
    if (stage < 1 || stage > 4) {
        throw Error(errc::invalid_stage, "stage must be in 1..4, got " + std::to_string(stage));
    }
    if (frame_index < 0) {
        throw Error(errc::invalid_label, "frame index must be non-negative");
    }
    for (char c : refs) {
        if (c < 'A' || c > 'Z') {
            throw Error(errc::invalid_label, "refs must be uppercase letters A-Z");
        }
    }
    return "B" + std::to_string(frame_index) + "-" + std::to_string(stage) + refs;
}

ParsedLabel parse_label(const std::string& label) {
    std::size_t i = 0;
    if (label.empty() || label[i++] != 'B') {
        throw Error(errc::invalid_label, "label must start with B: " + label);
    }
    std::size_t digits = 0;
    while (i + digits < label.size() &&
           std::isdigit(static_cast<unsigned char>(label[i + digits]))) {
        ++digits;
    }
    if (digits == 0 || i + digits >= label.size() || label[i + digits] != '-') {
        throw Error(errc::invalid_label, "label lacks a frame index: " + label);
    }
    ParsedLabel parsed;
    parsed.frame_index = std::stoi(label.substr(i, digits));
    i += digits + 1;
    if (i >= label.size() || label[i] < '1' || label[i] > '4') {
        throw Error(errc::invalid_label, "label lacks a stage in 1..4: " + label);
    }
    parsed.stage = label[i++] - '0';
    parsed.refs = label.substr(i);
    for (char c : parsed.refs) {
        if (c < 'A' || c > 'Z') {
            throw Error(errc::invalid_label, "label refs must be A-Z: " + label);
        }
    }
    return parsed;
}

std::vector<HazardEpisode> coalesce_episodes(std::span<const assess::Assessment> timeline,
                                             int gap_tolerance) {
    if (gap_tolerance < 0) {
        throw Error(errc::invalid_params, "gap_tolerance must be non-negative");
    }
    for (std::size_t i = 1; i < timeline.size(); ++i) {
        if (timeline[i].frame_index <= timeline[i - 1].frame_index) {
            throw Error(errc::unsorted_timeline,
                        "timeline must be sorted by frame_index (violation at position " +
                            std::to_string(i) + ")");
        }
    }
    std::vector<HazardEpisode> episodes;
    std::vector<const assess::Assessment*> run;
    auto flush = [&] {
        if (run.empty()) return;
        HazardEpisode episode;
        episode.start_label = run.front()->time_label;
        episode.end_label = run.back()->time_label;
        episode.count = static_cast<int>(run.size());
        for (const auto* a : run) episode.frame_indices.push_back(a->frame_index);
        // Most frequent reason; ties go to the reason seen earliest.
        std::map<std::string, int> counts;
        for (const auto* a : run) ++counts[a->reason];
        int best = 0;
        for (const auto* a : run) {
            int c = counts[a->reason];
            if (c > best) {
                best = c;
                episode.representative_reason = a->reason;
            }
        }
        episodes.push_back(std::move(episode));
        run.clear();
    };
    for (const auto& assessment : timeline) {
        if (assessment.label != assess::Label::Unsafe) continue;
        if (!run.empty() &&
            assessment.frame_index - run.back()->frame_index > gap_tolerance + 1) {
            flush();
        }
        run.push_back(&assessment);
    }
    flush();
    return episodes;
}

std::string summarize_timeline(std::span<const assess::Assessment> timeline) {
    if (timeline.empty()) return "(no assessments)";
    std::ostringstream out;
    for (std::size_t i = 0; i < timeline.size(); ++i) {
        if (i > 0) out << "\n";
        out << "At " << timeline[i].time_label.text << ": "
            << assess::label_name(timeline[i].label) << " — " << timeline[i].reason;
    }
    return out.str();
}

std::string default_narrative_prompt() {
    return "You are a construction safety engineer writing a formal inspection report.\n"
           "Below is the complete timeline of frame-level safety assessments from one\n"
           "inspection run. Write a concise executive summary of the observed safety\n"
           "conditions. Do not invent timestamps or events that are not in the timeline.\n"
           "\n"
           "Assessment timeline:\n"
           "{timeline}\n";
}

namespace {

std::string render_header(const ReportHeader& header) {
    std::ostringstream out;
    out << "- Run id: " << header.run_id << "\n"
        << "- Source: " << header.source << "\n"
        << "- Frames assessed: " << header.frame_count << "\n";
    for (const auto& [role, model] : header.model_ids) {
        out << "- Model (" << role << "): " << model << "\n";
    }
    return out.str();
}

std::string render_findings(const std::vector<Finding>& findings) {
    if (findings.empty()) return "No unsafe conditions observed.\n";
    std::ostringstream out;
    for (const auto& finding : findings) {
        out << finding.number << ". [" << finding.provenance_label << "] Unsafe period "
            << finding.start.text;
        if (finding.end.text != finding.start.text) out << " to " << finding.end.text;
        out << " (" << finding.count << (finding.count == 1 ? " frame" : " frames")
            << "): " << finding.reason;
        if (!finding.clause_ids.empty()) {
            out << " [grounding:";
            for (const auto& id : finding.clause_ids) out << " " << id;
            out << "]";
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace

SafetyReport generate_report(const ReportInputs& inputs, ReportMode mode,
                             inference::ChatBackend* backend, const std::string& model_id,
                             const std::string& narrative_prompt) {
    if (mode == ReportMode::model && backend == nullptr) {
        throw Error(errc::invalid_config, "model-mode report needs a backend");
    }
    std::span<const assess::Assessment> timeline(inputs.timeline);
    auto episodes = coalesce_episodes(timeline, inputs.gap_tolerance);

    std::set<std::string> known_times;
    std::map<int, const assess::Assessment*> by_frame;
    int unsafe_total = 0;
    for (const auto& assessment : inputs.timeline) {
        known_times.insert(assessment.time_label.text);
        by_frame[assessment.frame_index] = &assessment;
        if (assessment.label == assess::Label::Unsafe) ++unsafe_total;
    }

    SafetyReport safety_report;
    safety_report.header = inputs.header;

    int number = 1;
    for (const auto& episode : episodes) {
        Finding finding;
        finding.number = number++;
        finding.provenance_label = make_label(episode.frame_indices.front(), 4, "");
        finding.start = episode.start_label;
        finding.end = episode.end_label;
        finding.count = episode.count;
        finding.reason = episode.representative_reason;
        finding.frame_indices = episode.frame_indices;
        std::vector<std::string> cited;
        for (int frame : episode.frame_indices) {
            auto it = inputs.grounding_clauses.find(frame);
            if (it == inputs.grounding_clauses.end()) continue;
            for (const auto& clause : it->second) {
                if (std::find(cited.begin(), cited.end(), clause) == cited.end()) {
                    cited.push_back(clause);
                }
            }
        }
        finding.clause_ids = std::move(cited);
        safety_report.findings.push_back(std::move(finding));
    }

    // Mechanical checks; model text never enters the findings, so these hold
    // by construction, but the invariants are cheap to enforce.
    for (const auto& finding : safety_report.findings) {
        if (!known_times.count(finding.start.text) || !known_times.count(finding.end.text)) {
            throw Error(errc::invalid_params,
                        "finding cites a timestamp absent from the timeline");
        }
        if (!inputs.corpus_clause_ids.empty()) {
            for (const auto& clause : finding.clause_ids) {
                if (!inputs.corpus_clause_ids.count(clause)) {
                    throw Error(errc::invalid_params,
                                "finding cites a clause absent from the corpus: " + clause);
                }
            }
        }
    }

    std::ostringstream summary;
    summary << "Assessed " << inputs.timeline.size() << " frames; " << unsafe_total
            << " were labeled Unsafe across " << safety_report.findings.size()
            << (safety_report.findings.size() == 1 ? " hazard episode." : " hazard episodes.");
    if (mode == ReportMode::model) {
        std::string prompt =
            narrative_prompt.empty() ? default_narrative_prompt() : narrative_prompt;
        const std::string placeholder = "{timeline}";
        if (auto pos = prompt.find(placeholder); pos != std::string::npos) {
            prompt.replace(pos, placeholder.size(), summarize_timeline(timeline));
        }
        inference::ChatRequest request;
        request.model_id = model_id;
        request.options = inference::default_options();
        request.messages.push_back(inference::ChatMessage{inference::Role::user, prompt, {}});
        safety_report.summary = inference::chat(*backend, request).text;
    } else {
        safety_report.summary = summary.str();
    }

    std::ostringstream recommendations;
    if (safety_report.findings.empty()) {
        recommendations << "No corrective action required; continue routine monitoring.\n";
    } else {
        for (const auto& finding : safety_report.findings) {
            recommendations << finding.number << ". Address the condition observed at "
                            << finding.start.text << ": " << finding.reason;
            if (!finding.clause_ids.empty()) {
                recommendations << " (see";
                for (const auto& id : finding.clause_ids) recommendations << " " << id;
                recommendations << ")";
            }
            recommendations << "\n";
        }
    }
    safety_report.recommendations = recommendations.str();

    std::ostringstream appendix;
    for (const auto& [frame, assessment] : by_frame) {
        appendix << "B" << frame << ": " << assessment->time_label.text << " | "
                 << assess::label_name(assessment->label) << " | description B" << frame
                 << "-1A | rules " << assessment->rule_set_ref << " | assessment "
                 << assessment->provenance_label;
        if (assessment->inconsistency_flag) appendix << " | severity/label inconsistency";
        appendix << "\n";
    }
    if (!inputs.failed_frames.empty()) {
        appendix << "\nFrames excluded after stage errors:\n";
        for (const auto& failure : inputs.failed_frames) appendix << "- " << failure << "\n";
    }
    safety_report.appendix = appendix.str();
    return safety_report;
}

std::string default_report_template() {
    return "# Site Safety Inspection Report\n"
           "\n"
           "## 1. Header\n"
           "{{header}}\n"
           "## 2. Executive Summary\n"
           "{{summary}}\n"
           "\n"
           "## 3. Findings\n"
           "{{findings}}\n"
           "## 4. Recommendations\n"
           "{{recommendations}}\n"
           "## 5. Traceability Appendix\n"
           "{{appendix}}";
}

std::string render_report_markdown(const SafetyReport& report, const std::string& templ) {
    const std::vector<std::pair<std::string, std::string>> sections{
        {"{{header}}", render_header(report.header)},
        {"{{summary}}", report.summary},
        {"{{findings}}", render_findings(report.findings)},
        {"{{recommendations}}", report.recommendations},
        {"{{appendix}}", report.appendix},
    };
    std::string out = templ;
    for (const auto& [placeholder, content] : sections) {
        auto pos = out.find(placeholder);
        if (pos == std::string::npos) {
            throw Error(errc::template_invalid, "report template lacks " + placeholder);
        }
        while (pos != std::string::npos) {
            out.replace(pos, placeholder.size(), content);
            pos = out.find(placeholder, pos + content.size());
        }
    }
    return out;
}

LedgerWriter::LedgerWriter(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void LedgerWriter::append(const LedgerRecord& record) {
    nlohmann::json line{
        {"provenance_label", record.provenance_label},
        {"frame_index", record.frame_index},
        {"stage", record.stage},
        {"refs", record.refs},
        {"content_sha256", record.content_sha256},
        {"created_at", record.created_at},
        {"artifact_file", record.artifact_file},
    };
    if (record.retries > 0) line["retries"] = record.retries;
    std::lock_guard lock(mutex_);
    append_jsonl_line(path_, line);
}

std::vector<LedgerRecord> read_ledger(const std::filesystem::path& path) {
    std::vector<LedgerRecord> records;
    for_each_jsonl(path, [&](std::size_t, const nlohmann::json& line) {
        LedgerRecord record;
        record.provenance_label = line.at("provenance_label").get<std::string>();
        record.frame_index = line.at("frame_index").get<int>();
        record.stage = line.at("stage").get<int>();
        record.refs = line.at("refs").get<std::string>();
        record.content_sha256 = line.at("content_sha256").get<std::string>();
        record.created_at = line.at("created_at").get<std::string>();
        record.artifact_file = line.at("artifact_file").get<std::string>();
        record.retries = line.value("retries", 0);
        records.push_back(std::move(record));
    });
    return records;
}

}  // namespace sitewarden::report
