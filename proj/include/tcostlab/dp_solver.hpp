#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tcostlab/friction.hpp"
#include "tcostlab/market_lattice.hpp"
#include "tcostlab/scenario_tree.hpp"
#include "tcostlab/utility.hpp"

namespace tcostlab {

struct GridSpec {
    int n_points = 161;
    double pi_min = -0.5;
    double pi_max = 3.0;
    void validate() const;  // n_points >= 33, pi_min < 0 < pi_max
};

// Position-fraction grid, denser side proportional to range; contains 0
// exactly so the untraded root state is a grid point.
class PositionGrid {
public:
    explicit PositionGrid(const GridSpec& spec);
    const std::vector<double>& points() const { return pts_; }
    int zero_index() const { return zero_; }

private:
    std::vector<double> pts_;
    int zero_ = 0;
};

struct GridTooCoarse : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-node (or per-layer) backward-induction result. Positions below
// pi_low buy up to it, positions above pi_high sell down to it, the
// interval between them holds. best_buy and best_sell are the maxima of
// the cost-adjusted continuation objectives behind those targets;
// [adm_lo, adm_hi] is the post-trade interval that keeps every child
// state on the grid with positive wealth.
struct NodePolicy {
    double pi_low = 0.0;
    double pi_high = 0.0;
    double best_buy = 0.0;
    double best_sell = 0.0;
    double adm_lo = 0.0;
    double adm_hi = 0.0;
};

// Realized state at a node under the extracted policy.
struct NodeState {
    double pi = 0.0;      // pre-trade position fraction
    double target = 0.0;  // post-trade position fraction
    double wealth = 0.0;  // pre-trade liquidation wealth x + V
    bool trades = false;
    double shadow = 0.0;
    double shadow_excess = 0.0;  // pre-clip band excess, relative to price
    bool shadow_flag = false;    // estimator defect beyond clipping tolerance
};

struct LayerSolution {
    LayerModel model;
    UtilitySpec utility;
    FrictionParams params;
    GridSpec grid;
    double x = 1.0;
    std::vector<std::vector<double>> h;  // per layer 0..n_steps over the grid
    std::vector<NodePolicy> policy;      // per layer 0..n_steps-1
    double value = 0.0;                  // root value from (wealth x, pi 0)
};

struct DpSolution {
    double value = 0.0;
    UtilitySpec utility;
    FrictionParams params;
    GridSpec grid;
    double x = 1.0;
    bool layered = false;            // solved through the collapsed form
    std::vector<NodePolicy> policy;  // by node id
    std::vector<NodeState> state;    // by node id
    // value-table samples: per node id on the general path (empty rows when
    // not retained), per layer on the layered path
    std::vector<std::vector<double>> h;
    std::vector<std::vector<double>> layer_h;
};

double trade_factor(double pi, double target, double kappa);

LayerSolution solve_layers(const LayerModel& model, const UtilitySpec& utility, double x,
                           const FrictionParams& params, const GridSpec& grid);

DpSolution solve(const ScenarioTree& tree, const UtilitySpec& utility, double x,
                 const FrictionParams& params, const GridSpec& grid);

GridStrategy extract_strategy(const DpSolution& sol, const ScenarioTree& tree, double x);

std::vector<double> extract_shadow_price(const DpSolution& sol, const ScenarioTree& tree);

// Exact expected terminal utility of a strategy.
double replay_value(const ScenarioTree& tree, const GridStrategy& s, const UtilitySpec& utility,
                    const FrictionParams& params, double x);

// Post-trade share counts per step along one branch-choice path of the
// collapsed model. widen > 0 enlarges the no-trade intervals, giving a
// deliberately suboptimal but admissible strategy.
std::vector<double> simulate_layer_path(const LayerSolution& sol, const std::vector<int>& choices,
                                        double widen = 0.0);

struct BandCheckStats {
    long long visited = 0;
    long long trading = 0;
    long long band_ok = 0;
    long long comp_ok = 0;  // trading nodes whose shadow sits on the traded side
    long long flagged = 0;
    double max_band_excess_rel = 0.0;
    bool truncated = false;
};

BandCheckStats check_shadow_band(const DpSolution& sol, const ScenarioTree& tree);

// Audits every state the layered policy can reach, merging states closer
// than 1e-9; truncates (and says so) past state_cap states per layer.
BandCheckStats check_shadow_band_layered(const LayerSolution& sol, std::size_t state_cap = 20000);

} // namespace tcostlab
