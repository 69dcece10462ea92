#include <doctest.h>

#include <filesystem>
#include <set>

#include "sitewarden/evalkit.hpp"
#include "sitewarden/fixtures.hpp"
#include "sitewarden/regstore.hpp"

using namespace sitewarden;
using namespace sitewarden::fixtures;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = FIXTURES_DIR;

evalkit::ConfusionMatrix tally_fixture(char scenario, System system) {
    evalkit::LabelMap pred, truth;
    for (const auto& frame : scenario_prediction_fixture(scenario, system)) {
        evalkit::FrameId id{frame.scenario, frame.run, frame.frame_index};
        pred[id] = frame.predicted;
        truth[id] = frame.truth;
    }
    return evalkit::tally(pred, truth);
}

}  // namespace

TEST_SUITE("fixtures") {

TEST_CASE("the violation catalog has 20 entries with the documented rows") {
    const auto& catalog = violation_catalog();
    CHECK(catalog.size() == 20);
    CHECK(catalog[0].id == "A1");
    CHECK(catalog[0].osha_refs == std::vector<std::string>{"1926.1053"});
    CHECK(catalog[0].category == "Falls / Struck-By / Caught-Between");

    auto c7 = std::find_if(catalog.begin(), catalog.end(),
                           [](const ViolationSpec& v) { return v.id == "C7"; });
    REQUIRE(c7 != catalog.end());
    CHECK(c7->osha_refs == std::vector<std::string>{"1926.404(b)"});
    CHECK(c7->description == "Extension cord in wet area without GFCI protection");
}

TEST_CASE("every catalog reference has a corpus entry") {
    auto corpus = regstore::load_corpus(kFixtures / "corpus" / "osha_mini.jsonl");
    std::set<std::string> corpus_ids;
    for (const auto& clause : corpus) corpus_ids.insert(clause.clause_id);
    for (const auto& violation : violation_catalog()) {
        for (const auto& ref : violation.osha_refs) {
            CHECK_MESSAGE(corpus_ids.count(ref) == 1,
                          violation.id << " cites " << ref << " which is not in the corpus");
        }
    }
}

TEST_CASE("run frame counts match the dataset shape") {
    CHECK(scenario_run_frames('A') == std::array<int, 3>{49, 47, 51});
    CHECK(scenario_run_frames('B') == std::array<int, 3>{46, 45, 43});
    CHECK(scenario_run_frames('C') == std::array<int, 3>{51, 54, 56});
    int total = 0;
    for (char s : {'A', 'B', 'C'}) {
        for (int n : scenario_run_frames(s)) total += n;
    }
    CHECK(total == 442);
}

TEST_CASE("expanded fixtures tally exactly to their pinned matrices") {
    for (char scenario : {'A', 'B', 'C'}) {
        for (System system : {System::framework, System::baseline}) {
            CAPTURE(scenario);
            CAPTURE(system_name(system));
            CHECK(tally_fixture(scenario, system) == pinned_matrix(scenario, system));
        }
    }
}

TEST_CASE("the scenario-A framework fixture carries the published matrix") {
    CHECK(pinned_matrix('A', System::framework) == evalkit::ConfusionMatrix{71, 54, 16, 6});
}

TEST_CASE("fixture frame counts per run match the dataset shape") {
    for (char scenario : {'A', 'B', 'C'}) {
        auto frames = scenario_prediction_fixture(scenario, System::framework);
        auto expected = scenario_run_frames(scenario);
        std::array<int, 3> counts{};
        for (const auto& frame : frames) counts[static_cast<std::size_t>(frame.run - 1)] += 1;
        CHECK(counts[0] == expected[0]);
        CHECK(counts[1] == expected[1]);
        CHECK(counts[2] == expected[2]);
    }
}

TEST_CASE("recall of each fixture matches the published percentages to 0.1 pp") {
    auto recall_pct = [](char scenario, System system) {
        auto matrix = pinned_matrix(scenario, system);
        return 100.0 * static_cast<double>(matrix.tp) /
               static_cast<double>(matrix.tp + matrix.fn);
    };
    CHECK(recall_pct('A', System::framework) == doctest::Approx(92.2).epsilon(0.0011));
    CHECK(recall_pct('B', System::framework) == doctest::Approx(85.9).epsilon(0.0012));
    CHECK(recall_pct('C', System::framework) == doctest::Approx(78.6).epsilon(0.0013));
    CHECK(recall_pct('A', System::baseline) == doctest::Approx(87.2).epsilon(0.0012));
    CHECK(recall_pct('B', System::baseline) == doctest::Approx(81.7).epsilon(0.0013));
    CHECK(recall_pct('C', System::baseline) == doctest::Approx(76.2).epsilon(0.0014));
}

TEST_CASE("the committed eval fixture files agree with the in-code expansion") {
    for (System system : {System::framework, System::baseline}) {
        auto truth = evalkit::load_labels(kFixtures / "eval" /
                                          (system_name(system) + "_truth.jsonl"));
        auto pred = evalkit::load_labels(kFixtures / "eval" /
                                         (system_name(system) + "_pred.jsonl"));
        evalkit::LabelMap expected_truth, expected_pred;
        for (char scenario : {'A', 'B', 'C'}) {
            for (const auto& frame : scenario_prediction_fixture(scenario, system)) {
                evalkit::FrameId id{frame.scenario, frame.run, frame.frame_index};
                expected_truth[id] = frame.truth;
                expected_pred[id] = frame.predicted;
            }
        }
        CHECK(truth == expected_truth);
        CHECK(pred == expected_pred);
    }
}

}  // TEST_SUITE
