#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcostlab/dp_solver.hpp"
#include "tcostlab/friction.hpp"
#include "tcostlab/market_lattice.hpp"
#include "tcostlab/utility.hpp"

namespace tcostlab {

struct ExperimentToggles {
    bool mz = true;
    bool cps = true;
    bool uniqueness = false;
    bool self_consistency = true;
};

struct ExperimentConfig {
    std::optional<GbmSpec> gbm;   // exactly one model must be set
    std::optional<FbmSpec> fbm;
    UtilitySpec utility;
    double x = 1.0;
    FrictionParams params;
    double eps = -1.0;            // dual band width; negative selects kappa/2
    std::vector<int> levels;      // refinement depths, ascending
    int seeds = 2000;
    std::uint64_t seed = 12345;
    GridSpec grid;
    ExperimentToggles toggles;
    double suboptimality = 0.0;   // no-trade band widening in the coupled paths
    std::string out_dir = "out";

    double eps_effective() const;
    void validate() const;
};

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

struct RunResult {
    std::string report;              // report.json, byte-stable for a config
    std::vector<std::string> files;  // names written under the output directory
};

// Full study: values per level, successive differences, coupled path
// distances, dual feasibility, optional uniqueness probe and cross-check of
// the two solver paths. Artifacts land in the output directory; MANIFEST.json
// is written last and records failure if a stage throws.
RunResult run(const ExperimentConfig& cfg,
              const std::string& out_dir_override = "",
              int seeds_override = -1, int jobs = 1);

struct DiffResult {
    bool schema_ok = true;
    bool same = true;
    std::vector<std::string> notes;
};

// Structural comparison of two reports. Monte Carlo means agree when within
// three combined standard errors; their stderr entries are informational.
// Everything else must match up to 1e-9 relative.
DiffResult diff_reports(const std::string& a_text, const std::string& b_text);

}  // namespace tcostlab
