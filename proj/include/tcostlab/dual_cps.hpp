#pragma once

#include <vector>

#include "tcostlab/market_lattice.hpp"
#include "tcostlab/scenario_tree.hpp"

namespace tcostlab {

struct CpsBand {
    double lo = 1.0;
    double hi = -1.0;
    bool feasible() const { return lo <= hi; }
};

struct CpsPropagation {
    std::vector<CpsBand> bands;  // by node id, in price units
    bool feasible = false;
    int witness_node = -1;       // earliest empty band by (time, id)
};

// Backward interval sweep. A node's band collects the values reachable as a
// q-average of child values, each child weighted at least q_min, then meets
// the node's own bid-ask interval. Leaves carry the raw interval.
CpsPropagation propagate_bands(const ScenarioTree& tree, double kappa_eff,
                               double q_min = 1e-6);

struct CpsSystem {
    std::vector<double> M;               // price component, by node
    std::vector<std::vector<double>> q;  // branch weights, by node
};

// Top-down selection of a concrete system from feasible bands. Throws if the
// propagation result is infeasible or inconsistent with the bands.
CpsSystem extract_cps(const ScenarioTree& tree, const CpsPropagation& prop,
                      double kappa_eff, double q_min = 1e-6);

struct MartingaleCheck {
    double max_residual = 0.0;        // |M - sum q M_child|, absolute
    double max_band_violation = 0.0;  // distance to the bid-ask interval
};

MartingaleCheck verify_martingale(const ScenarioTree& tree,
                                  const CpsSystem& sys, double kappa_eff);

// Same sweep on a recombining level model, carried in units of the current
// price so one interval serves a whole layer.
bool layered_cps_feasible(const LayerModel& model, double kappa_eff,
                          double q_min = 1e-6);

// Smallest band width that admits a system, located by bisection.
double kappa_eff_min(const ScenarioTree& tree, double q_min = 1e-6,
                     double tol = 1e-6);
double kappa_eff_min(const LayerModel& model, double q_min = 1e-6,
                     double tol = 1e-6);

}  // namespace tcostlab
