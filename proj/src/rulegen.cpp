#include "sitewarden/rulegen.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "sitewarden/error.hpp"
#include "sitewarden/report.hpp"
#include "sitewarden/util.hpp"

namespace sitewarden::rulegen {

namespace {

// Case-insensitive search for the header, tolerating the quote characters
// the reply format shows (models vary on emitting them). Returns the
// position just past the header, or npos.
std::size_t find_header_end(const std::string& lower_text, const std::string& lower_header) {
    std::size_t pos = lower_text.find(lower_header);
    if (pos == std::string::npos) return std::string::npos;
    std::size_t end = pos + lower_header.size();
    if (end < lower_text.size() && lower_text[end] == '"') ++end;
    return end;
}

struct Item {
    int number = 0;
    std::string text;
};

std::vector<Item> numbered_items(const std::string& region) {
    std::vector<Item> items;
    std::istringstream in(region);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        std::size_t d = 0;
        while (d < t.size() && std::isdigit(static_cast<unsigned char>(t[d]))) ++d;
        // 1-2 digit markers only, so a citation like "1926." never opens an
        // item.
        bool starts_item = d > 0 && d <= 2 && d < t.size() && (t[d] == '.' || t[d] == ')');
        if (starts_item) {
            Item item;
            item.number = std::stoi(t.substr(0, d));
            item.text = trim(t.substr(d + 1));
            items.push_back(std::move(item));
        } else if (!items.empty() && !t.empty()) {
            // Continuation line of the previous item.
            items.back().text += " " + t;
        }
    }
    return items;
}

// First '.', '!' or '?' followed by whitespace and further content. Keeps
// decimals ("1.5 m") and citation numbers ("1926.25(a)") intact.
std::size_t sentence_boundary(const std::string& text) {
    for (std::size_t i = 0; i + 1 < text.size(); ++i) {
        char c = text[i];
        if ((c == '.' || c == '!' || c == '?') &&
            std::isspace(static_cast<unsigned char>(text[i + 1]))) {
            std::size_t j = i + 1;
            while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
            if (j < text.size()) return i;
        }
    }
    return std::string::npos;
}

SafetyRule make_rule(Polarity polarity, int ordinal, const std::string& item_text) {
    SafetyRule rule;
    rule.polarity = polarity;
    rule.ordinal = ordinal;
    std::size_t boundary = sentence_boundary(item_text);
    if (boundary == std::string::npos) {
        rule.principle = trim(item_text);
        rule.criterion = rule.principle;
    } else {
        rule.principle = trim(item_text.substr(0, boundary + 1));
        rule.criterion = trim(item_text.substr(boundary + 1));
    }
    return rule;
}

std::array<SafetyRule, 2> parse_region(const std::string& region, Polarity polarity,
                                       const char* polarity_name) {
    auto items = numbered_items(region);
    if (items.size() != 2) {
        throw Error(errc::wrong_rule_count,
                    std::string("expected 2 ") + polarity_name + " rules, found " +
                        std::to_string(items.size()),
                    polarity_name);
    }
    return {make_rule(polarity, 1, items[0].text), make_rule(polarity, 2, items[1].text)};
}

}  // namespace

std::string default_rule_role_line() {
    return "You are an expert safety engineer in construction sites.";
}

std::string build_rule_prompt(const std::string& description,
                              std::span<const regstore::Chunk> context_chunks,
                              const std::string& role_line) {
    if (trim(description).empty()) {
        throw Error(errc::empty_description, "scene description is empty");
    }
    std::ostringstream context;
    if (context_chunks.empty()) {
        context << "(no retrieved regulations)";
    } else {
        for (std::size_t i = 0; i < context_chunks.size(); ++i) {
            if (i > 0) context << "\n\n";
            context << "[" << context_chunks[i].clause_id << "] " << context_chunks[i].text;
        }
    }
    std::ostringstream prompt;
    prompt << role_line << "\n"
           << "Below is a description of a scene from a construction site.\n"
              "Based on standard safety regulations, derive two rules for a\n"
              "safe situation and two rules for an unsafe situation.\n"
              "For each rule, start from an abstract principle,\n"
              "then explain or generalize to concrete objects/activities.\n"
              "Your rules must be objective, valid and based on regulations.\n"
              "It should be easy to measure with clear quantified metrics\n"
              "for effective decision making.\n"
              "\n"
              "Your response should be formatted:\n"
              "\n"
              "\"" << kSafeHeader << "\"\n"
              "1. ...\n"
              "2. ...\n"
              "\n"
              "\"" << kUnsafeHeader << "\"\n"
              "1. ...\n"
              "2. ...\n"
              "\n"
              "\n"
              "\n"
              "Scene description:\n"
           << description << "\n"
           << "\n"
              "Safety Regulations:\n"
           << context.str() << "\n";
    return prompt.str();
}

std::array<SafetyRule, 4> parse_rule_response(const std::string& text) {
    const std::string lower = to_lower(text);
    const std::string safe_header = to_lower(kSafeHeader);
    const std::string unsafe_header = to_lower(kUnsafeHeader);

    const std::size_t safe_pos = lower.find(safe_header);
    const std::size_t unsafe_pos = lower.find(unsafe_header);
    if (safe_pos == std::string::npos) {
        throw Error(errc::missing_header, "reply lacks the safe-rules header", "safe");
    }
    if (unsafe_pos == std::string::npos) {
        throw Error(errc::missing_header, "reply lacks the unsafe-rules header", "unsafe");
    }
    std::size_t safe_end = find_header_end(lower, safe_header);
    std::size_t unsafe_end = find_header_end(lower, unsafe_header);
    // A quoted header starts one character before the matched text.
    auto header_start = [&](std::size_t pos) {
        return (pos > 0 && text[pos - 1] == '"') ? pos - 1 : pos;
    };

    std::string safe_region, unsafe_region;
    if (safe_pos < unsafe_pos) {
        safe_region = text.substr(safe_end, header_start(unsafe_pos) - safe_end);
        unsafe_region = text.substr(unsafe_end);
    } else {
        unsafe_region = text.substr(unsafe_end, header_start(safe_pos) - unsafe_end);
        safe_region = text.substr(safe_end);
    }
    auto safe_rules = parse_region(safe_region, Polarity::safe, "safe");
    auto unsafe_rules = parse_region(unsafe_region, Polarity::unsafe_, "unsafe");
    return {safe_rules[0], safe_rules[1], unsafe_rules[0], unsafe_rules[1]};
}

std::string render_rule_response(std::span<const SafetyRule> rules) {
    auto item_text = [](const SafetyRule& rule) {
        if (rule.criterion == rule.principle) return rule.principle;
        return rule.principle + " " + rule.criterion;
    };
    std::ostringstream out;
    out << "\"" << kSafeHeader << "\"\n";
    int n = 1;
    for (const auto& rule : rules) {
        if (rule.polarity == Polarity::safe) out << n++ << ". " << item_text(rule) << "\n";
    }
    out << "\n\"" << kUnsafeHeader << "\"\n";
    n = 1;
    for (const auto& rule : rules) {
        if (rule.polarity == Polarity::unsafe_) out << n++ << ". " << item_text(rule) << "\n";
    }
    return out.str();
}

std::string format_reminder() {
    std::ostringstream out;
    out << "\n\nYour previous reply did not follow the required format. Respond again "
           "using exactly this structure:\n\n\""
        << kSafeHeader << "\"\n1. ...\n2. ...\n\n\"" << kUnsafeHeader << "\"\n1. ...\n2. ...\n";
    return out.str();
}

inference::ChatRequest build_rule_request(const std::string& description_text,
                                          std::span<const regstore::Chunk> context_chunks,
                                          const std::string& model_id,
                                          const std::string& role_line) {
    inference::ChatRequest request;
    request.model_id = model_id;
    request.options = inference::default_options();
    request.messages.push_back(inference::ChatMessage{
        inference::Role::user, build_rule_prompt(description_text, context_chunks, role_line),
        {}});
    return request;
}

RuleSet generate_rules(const perception::SceneDescription& description,
                       const regstore::EmbeddingIndex& index, const regstore::Embedder& embedder,
                       int k, inference::ChatBackend& backend, const std::string& model_id,
                       const std::string& role_line) {
    Eigen::VectorXd query = embedder.embed(description.text);
    std::vector<regstore::ScoredChunk> hits = regstore::retrieve(index, query, k);
    std::vector<regstore::Chunk> chunks;
    chunks.reserve(hits.size());
    for (const auto& hit : hits) chunks.push_back(hit.chunk);

    inference::ChatRequest request =
        build_rule_request(description.text, chunks, model_id, role_line);
    const std::string prompt = request.messages[0].text;
    // The cache key is always the key of the canonical (first) request, so a
    // resumed run finds the record even if the original needed a retry.
    const std::string key = inference::request_key(request);

    RuleSet rule_set;
    rule_set.frame_index = description.frame_index;
    rule_set.request_key = key;
    for (const auto& chunk : chunks) rule_set.grounding.push_back(chunk.chunk_id);
    // Citations: the stage-1 description first, then each grounding chunk in
    // retrieval order.
    std::string refs = "A";
    for (std::size_t i = 0; i < chunks.size() && i < 25; ++i) {
        refs.push_back(static_cast<char>('B' + i));
    }
    rule_set.provenance_label = report::make_label(description.frame_index, 2, refs);

    for (int attempt = 0;; ++attempt) {
        inference::ChatResponse response = inference::chat(backend, request);
        rule_set.raw_text = response.text;
        try {
            rule_set.rules = parse_rule_response(response.text);
            rule_set.retries = attempt;
            return rule_set;
        } catch (const Error& e) {
            if (attempt >= 1) {
                throw Error(e.code(), e.message() + " (after format-reminder retry)",
                            rule_set.raw_text);
            }
            request.messages[0].text = prompt + format_reminder();
        }
    }
}

}  // namespace sitewarden::rulegen
