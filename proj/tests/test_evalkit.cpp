#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "sitewarden/error.hpp"
#include "sitewarden/evalkit.hpp"

using namespace sitewarden;
using namespace sitewarden::evalkit;
using assess::Label;

namespace {

FrameId fid(int frame, const std::string& scenario = "A", int run = 1) {
    return FrameId{scenario, run, frame};
}

// Builds aligned prediction/truth maps from two label strings of 'U'/'S'.
std::pair<LabelMap, LabelMap> from_strings(const std::string& pred, const std::string& truth) {
    REQUIRE(pred.size() == truth.size());
    LabelMap p, t;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        p[fid(static_cast<int>(i))] = pred[i] == 'U' ? Label::Unsafe : Label::Safe;
        t[fid(static_cast<int>(i))] = truth[i] == 'U' ? Label::Unsafe : Label::Safe;
    }
    return {p, t};
}

}  // namespace

TEST_SUITE("evalkit") {

TEST_CASE("tally counts the four agreement cells") {
    auto [p1, t1] = from_strings("UUU", "UUU");
    CHECK(tally(p1, t1) == ConfusionMatrix{3, 0, 0, 0});

    auto [p2, t2] = from_strings("USUS", "UUSS");
    CHECK(tally(p2, t2) == ConfusionMatrix{1, 1, 1, 1});
}

TEST_CASE("key mismatches are an error listing the offenders, not an intersection") {
    LabelMap pred{{fid(0), Label::Safe}, {fid(1), Label::Unsafe}};
    LabelMap truth{{fid(0), Label::Safe}, {fid(2), Label::Unsafe}};
    try {
        tally(pred, truth);
        FAIL("expected KeyMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == errc::key_mismatch);
        CHECK(e.message().find("frame1") != std::string::npos);
        CHECK(e.message().find("frame2") != std::string::npos);
    }
}

TEST_CASE("tally is symmetric-safe: swapping labels in both inputs swaps the cells") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::string pred, truth;
        int n = 1 + static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i) {
            pred.push_back(rng() % 2 ? 'U' : 'S');
            truth.push_back(rng() % 2 ? 'U' : 'S');
        }
        auto [p, t] = from_strings(pred, truth);
        auto flip = [](std::string s) {
            for (auto& c : s) c = (c == 'U') ? 'S' : 'U';
            return s;
        };
        auto [pf, tf] = from_strings(flip(pred), flip(truth));
        auto m = tally(p, t);
        auto mf = tally(pf, tf);
        CHECK(mf.tp == m.tn);
        CHECK(mf.tn == m.tp);
        CHECK(mf.fp == m.fn);
        CHECK(mf.fn == m.fp);
    }
}

TEST_CASE("the pinned scenario-A matrix reproduces the published metric values") {
    ConfusionMatrix matrix{71, 54, 16, 6};
    auto metrics = compute_metrics(matrix);
    REQUIRE(metrics.recall);
    REQUIRE(metrics.precision);
    REQUIRE(metrics.accuracy);
    REQUIRE(metrics.f1);
    CHECK(*metrics.recall == doctest::Approx(0.922).epsilon(0.001));
    CHECK(*metrics.precision == doctest::Approx(0.816).epsilon(0.001));
    CHECK(*metrics.accuracy == doctest::Approx(0.850).epsilon(0.001));
    CHECK(*metrics.f1 == doctest::Approx(0.866).epsilon(0.001));
}

TEST_CASE("a perfect classifier scores 1.0 everywhere") {
    auto metrics = compute_metrics({1, 1, 0, 0});
    CHECK(*metrics.accuracy == 1.0);
    CHECK(*metrics.precision == 1.0);
    CHECK(*metrics.recall == 1.0);
    CHECK(*metrics.f1 == 1.0);
}

TEST_CASE("zero-denominator metrics are undefined, not zero") {
    auto metrics = compute_metrics({0, 5, 0, 0});
    CHECK(*metrics.accuracy == 1.0);
    CHECK_FALSE(metrics.precision.has_value());
    CHECK_FALSE(metrics.recall.has_value());
    CHECK_FALSE(metrics.f1.has_value());

    // tp=0 with fp and fn present: precision and recall defined but zero, so
    // the F1 denominator vanishes.
    auto zeros = compute_metrics({0, 1, 1, 1});
    CHECK(*zeros.precision == 0.0);
    CHECK(*zeros.recall == 0.0);
    CHECK_FALSE(zeros.f1.has_value());

    CHECK_THROWS_AS(compute_metrics({0, 0, 0, 0}), Error);
}

TEST_CASE("brute-force equivalence over random label sets") {
    std::mt19937 rng(29);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 1 + static_cast<int>(rng() % 50);
        std::vector<char> pred, truth;
        LabelMap p, t;
        for (int i = 0; i < n; ++i) {
            pred.push_back(rng() % 2 ? 'U' : 'S');
            truth.push_back(rng() % 2 ? 'U' : 'S');
            p[fid(i)] = pred.back() == 'U' ? Label::Unsafe : Label::Safe;
            t[fid(i)] = truth.back() == 'U' ? Label::Unsafe : Label::Safe;
        }
        auto metrics = compute_metrics(tally(p, t));

        // Direct recomputation from the label lists by definition.
        long tp = 0, tn = 0, fp = 0, fn = 0;
        for (int i = 0; i < n; ++i) {
            if (pred[static_cast<std::size_t>(i)] == 'U') {
                (truth[static_cast<std::size_t>(i)] == 'U' ? tp : fp) += 1;
            } else {
                (truth[static_cast<std::size_t>(i)] == 'S' ? tn : fn) += 1;
            }
        }
        double accuracy = static_cast<double>(tp + tn) / n;
        CHECK(*metrics.accuracy == doctest::Approx(accuracy).epsilon(1e-12));
        if (tp + fp > 0) {
            CHECK(*metrics.precision ==
                  doctest::Approx(static_cast<double>(tp) / (tp + fp)).epsilon(1e-12));
        } else {
            CHECK_FALSE(metrics.precision.has_value());
        }
        if (tp + fn > 0) {
            CHECK(*metrics.recall ==
                  doctest::Approx(static_cast<double>(tp) / (tp + fn)).epsilon(1e-12));
        } else {
            CHECK_FALSE(metrics.recall.has_value());
        }
        if (metrics.precision && metrics.recall && (*metrics.precision + *metrics.recall) > 0) {
            double f1 = 2.0 * *metrics.precision * *metrics.recall /
                        (*metrics.precision + *metrics.recall);
            CHECK(*metrics.f1 == doctest::Approx(f1).epsilon(1e-12));
        } else {
            CHECK_FALSE(metrics.f1.has_value());
        }
    }
}

TEST_CASE("aggregation pools matrices across runs before computing metrics") {
    std::vector<RunResult> results{
        {"fw", "A", 1, {10, 10, 0, 0}},
        {"fw", "A", 2, {0, 0, 10, 10}},
    };
    auto rows = aggregate(results);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].pooled == ConfusionMatrix{10, 10, 10, 10});
    CHECK(*rows[0].metrics.accuracy == doctest::Approx(0.5));
    CHECK(rows[0].run_metrics.size() == 2);
}

TEST_CASE("aggregating one run is the identity") {
    std::vector<RunResult> results{{"fw", "B", 1, {5, 3, 1, 2}}};
    auto rows = aggregate(results);
    REQUIRE(rows.size() == 1);
    auto direct = compute_metrics({5, 3, 1, 2});
    CHECK(*rows[0].metrics.recall == *direct.recall);
    CHECK(*rows[0].metrics.precision == *direct.precision);
}

TEST_CASE("k identical runs micro-average to the single-run metrics") {
    ConfusionMatrix one{7, 5, 2, 3};
    std::vector<RunResult> results;
    for (int run = 1; run <= 3; ++run) results.push_back({"fw", "C", run, one});
    auto rows = aggregate(results);
    auto single = compute_metrics(one);
    REQUIRE(rows.size() == 1);
    CHECK(*rows[0].metrics.accuracy == doctest::Approx(*single.accuracy).epsilon(1e-12));
    CHECK(*rows[0].metrics.recall == doctest::Approx(*single.recall).epsilon(1e-12));
    CHECK(*rows[0].metrics.f1 == doctest::Approx(*single.f1).epsilon(1e-12));
}

TEST_CASE("macro averaging averages per-run metric values") {
    std::vector<RunResult> results{
        {"fw", "A", 1, {10, 0, 0, 0}},   // recall 1.0
        {"fw", "A", 2, {5, 0, 0, 5}},    // recall 0.5
    };
    auto rows = aggregate(results, true);
    CHECK(*rows[0].metrics.recall == doctest::Approx(0.75));
    // Micro over the same data: 15/20.
    auto micro = aggregate(results, false);
    CHECK(*micro[0].metrics.recall == doctest::Approx(0.75));
}

TEST_CASE("label files load with per-record or default scenario and run") {
    auto dir = std::filesystem::temp_directory_path() / "sw_evalkit";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "labels.jsonl");
        out << R"({"scenario":"B","run":2,"frame_index":0,"label":"Unsafe"})" << "\n";
        out << R"({"frame_index":1,"label":"Safe"})" << "\n";
    }
    auto labels = load_labels(dir / "labels.jsonl", "A", 1);
    REQUIRE(labels.size() == 2);
    CHECK(labels.at(FrameId{"B", 2, 0}) == Label::Unsafe);
    CHECK(labels.at(FrameId{"A", 1, 1}) == Label::Safe);
}

}  // TEST_SUITE
