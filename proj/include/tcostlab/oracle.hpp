#pragma once

#include <vector>

#include "tcostlab/friction.hpp"
#include "tcostlab/scenario_tree.hpp"
#include "tcostlab/utility.hpp"

namespace tcostlab {

// Candidate share increments applied at every non-terminal node.
struct TradeGrid {
    std::vector<double> increments;  // must contain 0, strictly increasing

    void validate() const;
    static TradeGrid centered(double delta, int half_width = 2);
};

struct OracleResult {
    double value = 0.0;
    GridStrategy best;
    long long leaf_evals = 0;       // work actually spent, in leaf visits
    int optima = 0;                 // argmax strategies found (capped)
    bool argmax_truncated = false;
    std::vector<GridStrategy> argmax;
};

// Exhaustive search over per-node increments, decomposed by subtree. The
// a-priori work bound counts one unit per leaf visit and refuses to start
// above work_budget. Inadmissible prefixes are pruned. Ties within
// 1e-12 relative are kept; the reported best takes the smallest increment.
OracleResult enumerate_optimal(const ScenarioTree& tree,
                               const UtilitySpec& utility, double x,
                               const FrictionParams& params,
                               const TradeGrid& grid, double work_budget = 1e8);

struct OracleRefineResult {
    OracleResult last;
    double delta_final = 0.0;
    int iters = 0;
    bool converged = false;
};

// Pattern search over the joint increment lattice, recentered on the
// incumbent each pass. The spacing halves only when no node's winner sits on
// its local grid edge, so the walk escapes a too-small first grid. All
// max_iters passes run; the argmax location error is bounded by half the
// final spacing and converged reports a value stall within tol on the last
// two passes.
OracleRefineResult oracle_refine(const ScenarioTree& tree,
                                 const UtilitySpec& utility, double x,
                                 const FrictionParams& params, double delta0,
                                 double tol = 1e-8, int max_iters = 12,
                                 double work_budget = 1e8);

struct UniquenessReport {
    double best_value = 0.0;
    long long enumerated = 0;       // admissible complete assignments
    int argmax_count = 0;           // ties within 1e-12 relative of the best
    int near_optimal = 0;           // within 1e-9 relative of the best
    double diameter = 0.0;          // largest pairwise distance among those
    std::vector<double> eps_levels;
    std::vector<double> eps_diameters;  // diameter of the eps-optimal set
    std::vector<double> radii;
    std::vector<double> gaps;       // best_value minus best at distance >= r
    bool jittered = false;
};

// Full assignment enumeration (no decomposition), measuring how isolated the
// optimum is. Distance between two strategies is the largest over leaves of
// the pathwise metric d_mz. jitter perturbs each node's increments by a
// node-dependent relative factor, separating ties that exist only through
// identical candidate values in sibling subtrees.
UniquenessReport uniqueness_probe(const ScenarioTree& tree,
                                  const UtilitySpec& utility, double x,
                                  const FrictionParams& params,
                                  const TradeGrid& grid,
                                  const std::vector<double>& radii,
                                  bool jitter = false,
                                  double assignment_budget = 1e7,
                                  const std::vector<double>& eps_levels = {});

}  // namespace tcostlab
