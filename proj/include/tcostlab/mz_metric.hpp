#pragma once

#include <cstdint>
#include <vector>

#include "tcostlab/dp_solver.hpp"
#include "tcostlab/friction.hpp"
#include "tcostlab/scenario_tree.hpp"

namespace tcostlab {

// Piecewise-constant path on [0, horizon), right-continuous, with the value
// at the horizon itself kept separate.
struct MzPath {
    double horizon = 1.0;
    std::vector<double> times;   // strictly increasing, times[0] == 0
    std::vector<double> values;  // values[i] holds on [times[i], times[i+1])
    double terminal = 0.0;

    void validate() const;
    MzPath canonical() const;  // drop breakpoints that do not change the value
};

// Bounded pathwise distance: integral of min(1, |f - g|) over [0, horizon)
// plus the gap between the terminal values. Insensitive to redundant
// breakpoints; throws if the horizons differ.
double d_mz(const MzPath& f, const MzPath& g);

// Holding path along the root-to-leaf walk, sampled at the trading dates.
MzPath path_from_strategy(const ScenarioTree& tree, const GridStrategy& s,
                          int leaf_id);

struct MzEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int n = 0;      // steps of the finer policy
    int seeds = 0;
};

// Monte Carlo distance between the holding paths of two lattice policies,
// driven by one shared Gaussian stream per seed. The finer model must halve
// the coarser step. widen > 0 inflates both no-trade bands, producing a
// deliberately suboptimal pair of paths.
MzEstimate coupled_mz_distance(const LayerSolution& fine,
                               const LayerSolution& coarse,
                               std::uint64_t base_seed, int seeds,
                               double widen = 0.0, int jobs = 1);

}  // namespace tcostlab
