#include "sitewarden/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sitewarden/error.hpp"
#include "sitewarden/util.hpp"

namespace sitewarden::fixtures {

const std::array<ViolationSpec, 20>& violation_catalog() {
    static const std::array<ViolationSpec, 20> catalog{{
        {"A1", "Falls / Struck-By / Caught-Between",
         "Ladder placed where it can be displaced by adjacent equipment; not secured",
         "Ladders (Subpart X)", {"1926.1053"}},
        {"A2", "Trip hazards", "Bricks/debris scattered in walkways",
         "Housekeeping (Subpart C)", {"1926.25(a)"}},
        {"A3", "PPE",
         "No high visible vest and no head protection while exposed to fall hazards",
         "PPE (Subpart E)", {"1926.100(a)"}},
        {"A4", "Electrocutions", "Extension cord in wet area without GFCI protection",
         "Electrical (Subpart K)", {"1926.404(b)"}},
        {"A5", "Electrocutions", "Flexible cord routed through water/subject to damage",
         "Electrical (Subpart K)", {"1926.405(a)(2)", "1926.405(j)(1)"}},
        {"B1", "Falls / Struck-By / Caught-Between",
         "Portable ladder leaned on a machine (unstable/unsuitable support)",
         "Ladders (Subpart X)", {"1926.1053"}},
        {"B2", "PPE", "No head protection while on ladder/under overhead hazards",
         "PPE (Subpart E)", {"1926.100(a)"}},
        {"B3", "Trip hazard", "Bricks cluttered in a spot creating trip hazard",
         "Housekeeping (Subpart C)", {"1926.25(a)"}},
        {"B4", "Struck-by/ Materials handling",
         "Bricks stored on forklift forks with load elevated/unattended",
         "Materials handling (Subpart H)", {"1926.600(a)(3)", "1926.602(c)(1)"}},
        {"B5", "Trip hazard/ Material handling",
         "Bricks stacked in the middle of a walkway (aisles not kept clear)",
         "Materials handling (Subpart H)", {"1926.602(c)(1)"}},
        {"B6", "Electrocutions", "Extension cord in wet area without GFCI protection",
         "Electrical (Subpart K)", {"1926.404(b)"}},
        {"B7", "Electrocutions", "Flexible cord routed through water/subject to damage",
         "Electrical (Subpart K)", {"1926.405(a)(2)", "1926.405(j)(1)"}},
        {"C1", "Falls / Struck-By / Caught-Between",
         "Working atop large machine with unprotected sides/edges (at or above 6 ft)",
         "Fall protection (Subpart M)", {"1926.501(b)(1)"}},
        {"C2", "Falls/ Struck-By",
         "Using a material lift table to elevate a person (not designed/approved for "
         "personnel)",
         "Hoists/material lifts (Subpart N)", {"1926.552(b)(1)"}},
        {"C3", "Falls/ Struck-By",
         "Elevated work accessed without proper ladder/stair/approved platform",
         "Access (Subpart X)", {"1926.1051(a)"}},
        {"C4", "Falls/ Struck-By/ Trip hazards",
         "Bricks placed on lift platform near feet (sliding/falling object/trip hazard)",
         "Materials handling & storage (Subpart H)", {"1926.250(a)(1)"}},
        {"C5", "Struck-by/ Materials handling",
         "Bricks stored on forklift forks with load elevated/unattended",
         "Materials handling (Subpart H)", {"1926.600(a)(3)", "1926.602(c)(1)"}},
        {"C6", "Trip hazard/ Material handling",
         "Bricks stacked in the middle of a walkway (aisles not kept clear)",
         "Materials handling (Subpart H)", {"1926.602(c)(1)"}},
        {"C7", "Electrocutions", "Extension cord in wet area without GFCI protection",
         "Electrical (Subpart K)", {"1926.404(b)"}},
        {"C8", "Electrocutions", "Flexible cord routed through water/subject to damage",
         "Electrical (Subpart K)", {"1926.405(a)(2)", "1926.405(j)(1)"}},
    }};
    return catalog;
}

std::string system_name(System system) {
    return system == System::framework ? "framework" : "baseline";
}

std::array<int, 3> scenario_run_frames(char scenario) {
    switch (scenario) {
        case 'A': return {49, 47, 51};
        case 'B': return {46, 45, 43};
        case 'C': return {51, 54, 56};
        default: throw Error(errc::invalid_params, "scenario must be A, B or C");
    }
}

evalkit::ConfusionMatrix pinned_matrix(char scenario, System system) {
    // Scenario A framework counts are published outright. The remaining
    // matrices are integer solutions to the published recall percentages
    // over the scenario frame totals; fixtures/README.md records the
    // derivation.
    if (system == System::framework) {
        switch (scenario) {
            case 'A': return {71, 54, 16, 6};
            case 'B': return {61, 49, 14, 10};
            case 'C': return {66, 57, 20, 18};
            default: break;
        }
    } else {
        switch (scenario) {
            case 'A': return {68, 49, 20, 10};
            case 'B': return {58, 45, 18, 13};
            case 'C': return {64, 51, 26, 20};
            default: break;
        }
    }
    throw Error(errc::invalid_params, "scenario must be A, B or C");
}

namespace {

// Splits `total` across buckets proportionally to `weights` using the
// largest-remainder method; ties go to the earlier bucket.
std::array<long, 3> largest_remainder(long total, const std::array<int, 3>& weights) {
    const double sum = static_cast<double>(weights[0] + weights[1] + weights[2]);
    std::array<long, 3> base{};
    std::array<double, 3> frac{};
    long assigned = 0;
    for (int i = 0; i < 3; ++i) {
        double quota = sum > 0.0 ? static_cast<double>(total) * weights[i] / sum : 0.0;
        base[i] = static_cast<long>(std::floor(quota));
        frac[i] = quota - static_cast<double>(base[i]);
        assigned += base[i];
    }
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (frac[a] != frac[b]) return frac[a] > frac[b];
        return a < b;
    });
    for (long r = 0; r < total - assigned; ++r) base[order[static_cast<std::size_t>(r)]] += 1;
    return base;
}

}  // namespace

std::vector<LabeledFrame> scenario_prediction_fixture(char scenario, System system) {
    const auto frames = scenario_run_frames(scenario);
    const auto matrix = pinned_matrix(scenario, system);

    const auto unsafe_per_run = largest_remainder(matrix.tp + matrix.fn, frames);
    const auto tp_per_run = largest_remainder(
        matrix.tp, {static_cast<int>(unsafe_per_run[0]), static_cast<int>(unsafe_per_run[1]),
                    static_cast<int>(unsafe_per_run[2])});
    std::array<int, 3> safe_per_run{};
    for (int r = 0; r < 3; ++r) {
        safe_per_run[static_cast<std::size_t>(r)] =
            frames[static_cast<std::size_t>(r)] -
            static_cast<int>(unsafe_per_run[static_cast<std::size_t>(r)]);
    }
    const auto fp_per_run = largest_remainder(matrix.fp, safe_per_run);

    std::vector<LabeledFrame> out;
    for (int r = 0; r < 3; ++r) {
        auto ri = static_cast<std::size_t>(r);
        const long unsafe_n = unsafe_per_run[ri];
        const long tp_n = tp_per_run[ri];
        const long fp_n = fp_per_run[ri];
        for (int f = 0; f < frames[ri]; ++f) {
            LabeledFrame frame;
            frame.scenario = std::string(1, scenario);
            frame.run = r + 1;
            frame.frame_index = f;
            if (f < unsafe_n) {
                frame.truth = assess::Label::Unsafe;
                frame.predicted = f < tp_n ? assess::Label::Unsafe : assess::Label::Safe;
            } else {
                frame.truth = assess::Label::Safe;
                frame.predicted =
                    (f - unsafe_n) < fp_n ? assess::Label::Unsafe : assess::Label::Safe;
            }
            out.push_back(std::move(frame));
        }
    }
    return out;
}

void emit_eval_fixtures(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (System system : {System::framework, System::baseline}) {
        std::ostringstream truth, pred;
        for (char scenario : {'A', 'B', 'C'}) {
            for (const auto& frame : scenario_prediction_fixture(scenario, system)) {
                nlohmann::json base{{"scenario", frame.scenario},
                                    {"run", frame.run},
                                    {"frame_index", frame.frame_index}};
                nlohmann::json t = base;
                t["label"] = assess::label_name(frame.truth);
                truth << t.dump() << "\n";
                nlohmann::json p = base;
                p["label"] = assess::label_name(frame.predicted);
                pred << p.dump() << "\n";
            }
        }
        write_file_atomic(dir / (system_name(system) + "_truth.jsonl"), truth.str());
        write_file_atomic(dir / (system_name(system) + "_pred.jsonl"), pred.str());
    }
}

void emit_violations(const std::filesystem::path& path) {
    std::ostringstream violations;
    for (const auto& violation : violation_catalog()) {
        violations << nlohmann::json{{"id", violation.id},
                                     {"category", violation.category},
                                     {"description", violation.description},
                                     {"osha_category", violation.osha_category},
                                     {"osha_refs", violation.osha_refs}}
                          .dump()
                   << "\n";
    }
    write_file_atomic(path, violations.str());
}

}  // namespace sitewarden::fixtures
