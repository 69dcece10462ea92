#include <doctest.h>

#include <random>

#include "sitewarden/error.hpp"
#include "sitewarden/regstore.hpp"
#include "sitewarden/rulegen.hpp"

using namespace sitewarden;
using namespace sitewarden::rulegen;

namespace {

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
    std::size_t count = 0;
    for (auto pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + 1)) {
        ++count;
    }
    return count;
}

std::string canonical_reply() {
    return "\"Rules for Safe Construction Situation:\"\n"
           "1. Access to height must be stable. Ladders rest on level support secured "
           "against displacement.\n"
           "2. Electrical cords stay dry. Cords are routed away from water with GFCI "
           "protection in place.\n"
           "\n"
           "\"Rules for Unsafe Construction Situation:\"\n"
           "1. Unsecured ladders are prohibited. A ladder leaning on machinery without "
           "securing is a violation.\n"
           "2. Missing head protection is prohibited. A worker under an overhead load "
           "without a hard hat is a violation.\n";
}

// Sentence generator for the round-trip property: one sentence, capital
// start, single trailing period, no internal sentence boundaries.
std::string random_sentence(std::mt19937& rng) {
    static const std::vector<std::string> words{
        "ladder", "forklift", "worker",  "cord",   "water",  "vest",
        "hard",   "hat",      "walkway", "bricks", "signal", "zone"};
    std::uniform_int_distribution<std::size_t> len(3, 8);
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    std::string sentence = "The";
    std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) sentence += " " + words[pick(rng)];
    sentence += ".";
    return sentence;
}

regstore::Chunk make_chunk(const std::string& clause_id, const std::string& text) {
    regstore::Chunk chunk;
    chunk.clause_id = clause_id;
    chunk.chunk_id = clause_id + "#0";
    chunk.text = text;
    chunk.end = text.size();
    return chunk;
}

}  // namespace

TEST_SUITE("rulegen") {

TEST_CASE("the prompt contains each required header exactly once") {
    std::vector<regstore::Chunk> chunks{make_chunk("1926.1053", "ladders must be secured"),
                                        make_chunk("1926.25(a)", "keep walkways clear"),
                                        make_chunk("1926.404(b)", "gfci in wet areas"),
                                        make_chunk("1926.100(a)", "hard hats required")};
    auto prompt = build_rule_prompt("worker on ladder", chunks);
    CHECK(count_occurrences(prompt, kSafeHeader) == 1);
    CHECK(count_occurrences(prompt, kUnsafeHeader) == 1);
    CHECK(prompt.find(default_rule_role_line()) == 0);
    for (const auto& chunk : chunks) {
        CHECK(prompt.find("[" + chunk.clause_id + "] " + chunk.text) != std::string::npos);
    }
}

TEST_CASE("the description lands after the scene-description marker") {
    auto prompt = build_rule_prompt("worker on ladder", {});
    auto marker = prompt.find("Scene description:\n");
    REQUIRE(marker != std::string::npos);
    CHECK(prompt.find("worker on ladder", marker) != std::string::npos);
}

TEST_CASE("an empty retrieval context is stated explicitly") {
    auto prompt = build_rule_prompt("scene", {});
    CHECK(prompt.find("(no retrieved regulations)") != std::string::npos);
}

TEST_CASE("an empty description is rejected") {
    try {
        build_rule_prompt(" ", {});
        FAIL("expected EmptyDescription");
    } catch (const Error& e) {
        CHECK(e.code() == errc::empty_description);
    }
}

TEST_CASE("a canonical two-header reply parses into 2+2 rules") {
    auto rules = parse_rule_response(canonical_reply());
    CHECK(rules[0].polarity == Polarity::safe);
    CHECK(rules[0].ordinal == 1);
    CHECK(rules[0].principle == "Access to height must be stable.");
    CHECK(rules[0].criterion ==
          "Ladders rest on level support secured against displacement.");
    CHECK(rules[1].polarity == Polarity::safe);
    CHECK(rules[1].ordinal == 2);
    CHECK(rules[2].polarity == Polarity::unsafe_);
    CHECK(rules[3].polarity == Polarity::unsafe_);
    CHECK(rules[3].principle == "Missing head protection is prohibited.");
}

TEST_CASE("headers match without quotes and case-insensitively") {
    std::string reply =
        "rules for safe construction situation:\n1. One rule here.\n2. Two rule here.\n"
        "RULES FOR UNSAFE CONSTRUCTION SITUATION:\n1. Three rule here.\n2. Four rule here.\n";
    auto rules = parse_rule_response(reply);
    CHECK(rules[0].principle == "One rule here.");
    CHECK(rules[2].principle == "Three rule here.");
}

TEST_CASE("a single-sentence item stores the sentence as both principle and criterion") {
    std::string reply =
        "\"Rules for Safe Construction Situation:\"\n1. Keep it stable.\n2. Keep it dry.\n"
        "\"Rules for Unsafe Construction Situation:\"\n1. No loose loads.\n2. No bare "
        "cords.\n";
    auto rules = parse_rule_response(reply);
    CHECK(rules[0].principle == "Keep it stable.");
    CHECK(rules[0].criterion == rules[0].principle);
}

TEST_CASE("missing headers and wrong cardinality are typed errors") {
    try {
        parse_rule_response(
            "\"Rules for Safe Construction Situation:\"\n1. a b c.\n2. d e f.\n");
        FAIL("expected MissingHeader");
    } catch (const Error& e) {
        CHECK(e.code() == errc::missing_header);
        CHECK(e.detail() == "unsafe");
    }
    try {
        parse_rule_response("I cannot help with that.");
        FAIL("expected MissingHeader");
    } catch (const Error& e) {
        CHECK(e.code() == errc::missing_header);
        CHECK(e.detail() == "safe");
    }
    try {
        parse_rule_response(
            "\"Rules for Safe Construction Situation:\"\n1. a.\n2. b.\n3. c.\n"
            "\"Rules for Unsafe Construction Situation:\"\n1. d.\n2. e.\n");
        FAIL("expected WrongRuleCount");
    } catch (const Error& e) {
        CHECK(e.code() == errc::wrong_rule_count);
        CHECK(e.detail() == "safe");
        CHECK(e.message().find("3") != std::string::npos);
    }
}

TEST_CASE("sentence splitting ignores decimals and clause citations") {
    std::string reply =
        "\"Rules for Safe Construction Situation:\"\n"
        "1. Ladders follow the 4:1 rule per 1926.1053 at all times. Slope is measured at "
        "the base.\n"
        "2. Loads stay below 1.5 m. Stack height is checked hourly.\n"
        "\"Rules for Unsafe Construction Situation:\"\n1. No a.\n2. No b.\n";
    auto rules = parse_rule_response(reply);
    CHECK(rules[0].principle == "Ladders follow the 4:1 rule per 1926.1053 at all times.");
    CHECK(rules[0].criterion == "Slope is measured at the base.");
    CHECK(rules[1].principle == "Loads stay below 1.5 m.");
}

TEST_CASE("round-trip: parse(render(rules)) == rules") {
    std::mt19937 rng(41);
    for (int trial = 0; trial < 500; ++trial) {
        std::array<SafetyRule, 4> rules;
        for (int i = 0; i < 4; ++i) {
            rules[static_cast<std::size_t>(i)].polarity =
                i < 2 ? Polarity::safe : Polarity::unsafe_;
            rules[static_cast<std::size_t>(i)].ordinal = (i % 2) + 1;
            rules[static_cast<std::size_t>(i)].principle = random_sentence(rng);
            rules[static_cast<std::size_t>(i)].criterion =
                (trial % 3 == 0) ? rules[static_cast<std::size_t>(i)].principle
                                 : random_sentence(rng);
        }
        auto parsed = parse_rule_response(render_rule_response(rules));
        for (int i = 0; i < 4; ++i) {
            CHECK(parsed[static_cast<std::size_t>(i)] == rules[static_cast<std::size_t>(i)]);
        }
    }
}

TEST_CASE("fuzzing returns values or typed errors, never crashes") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<std::size_t> len(0, 400);
    for (int trial = 0; trial < 2000; ++trial) {
        std::string junk;
        std::size_t n = len(rng);
        for (std::size_t i = 0; i < n; ++i) junk.push_back(static_cast<char>(byte(rng)));
        try {
            auto rules = parse_rule_response(junk);
            for (const auto& rule : rules) CHECK_FALSE(rule.principle.empty());
        } catch (const Error&) {
            // typed error: acceptable outcome
        }
    }
}

TEST_CASE("generate_rules composes retrieval, prompting and parsing") {
    std::vector<regstore::RegulationClause> corpus{
        {"1926.1053", "X", "Ladders", "ladder secured against displacement stable support"},
        {"1926.404(b)", "K", "GFCI", "extension cord wet area gfci protection"},
    };
    regstore::LexicalEmbedder seed;
    auto index = regstore::build_index(corpus, seed, 800, 100);
    auto embedder = regstore::LexicalEmbedder::from_params(index.embedder_params);

    perception::SceneDescription description;
    description.frame_index = 16;
    description.text = "a worker climbs an unsecured ladder";
    description.provenance_label = "B16-1A";

    inference::ScriptedBackend backend;
    backend.always(canonical_reply());
    auto rule_set = generate_rules(description, index, embedder, 2, backend, "rules-model");
    CHECK(rule_set.frame_index == 16);
    CHECK(rule_set.rules[0].polarity == Polarity::safe);
    CHECK(rule_set.grounding.size() == 2);
    CHECK(rule_set.grounding[0] == "1926.1053#0");  // ladder text ranks first
    CHECK(rule_set.provenance_label == "B16-2ABC");
    CHECK(rule_set.raw_text == canonical_reply());
    CHECK(rule_set.retries == 0);
}

TEST_CASE("a refusal raises RuleParseError with the raw reply preserved") {
    std::vector<regstore::RegulationClause> corpus{
        {"1926.25(a)", "C", "Housekeeping", "keep walkways clear of debris"}};
    regstore::LexicalEmbedder seed;
    auto index = regstore::build_index(corpus, seed, 800, 100);
    auto embedder = regstore::LexicalEmbedder::from_params(index.embedder_params);

    perception::SceneDescription description;
    description.frame_index = 2;
    description.text = "cluttered walkways everywhere";

    inference::ScriptedBackend backend;
    backend.always("I cannot help with that.");
    try {
        generate_rules(description, index, embedder, 1, backend, "rules-model");
        FAIL("expected RuleParseError");
    } catch (const Error& e) {
        CHECK(e.code() == errc::missing_header);
        CHECK(e.detail() == "I cannot help with that.");
    }
}

TEST_CASE("one format-reminder retry recovers from a malformed first reply") {
    std::vector<regstore::RegulationClause> corpus{
        {"1926.25(a)", "C", "Housekeeping", "keep walkways clear of debris"}};
    regstore::LexicalEmbedder seed;
    auto index = regstore::build_index(corpus, seed, 800, 100);
    auto embedder = regstore::LexicalEmbedder::from_params(index.embedder_params);

    perception::SceneDescription description;
    description.frame_index = 2;
    description.text = "cluttered walkways everywhere";

    inference::ScriptedBackend backend;
    backend.on_queue(inference::ScriptedBackend::match_any(),
                     {"Sorry, here are thoughts instead.", canonical_reply()});
    auto rule_set = generate_rules(description, index, embedder, 1, backend, "rules-model");
    CHECK(rule_set.retries == 1);
    CHECK(rule_set.rules[0].principle == "Access to height must be stable.");
}

}  // TEST_SUITE
