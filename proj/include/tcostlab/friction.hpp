#pragma once

#include <string>
#include <vector>

#include "tcostlab/scenario_tree.hpp"

namespace tcostlab {

struct FrictionParams {
    double kappa = 0.01;  // in (0,1)
    void validate() const;
    double bid(double s) const { return (1.0 - kappa) * s; }
    double ask(double s) const { return (1.0 + kappa) * s; }
};

// Shares held at each node. The pre-root position is 0 and every leaf must
// hold exactly 0 (terminal liquidation).
struct GridStrategy {
    std::vector<double> gamma;  // by node id
    void validate(const ScenarioTree& tree) const;
};

// Per-node accounting for one strategy. value is the liquidation value V:
// cash plus the position closed at bid/ask. pnl and cost split V into the
// frictionless gain along the path and the accumulated fee charge including
// the fee of closing the current position, so value = pnl - cost.
struct WealthLedger {
    std::vector<double> delta;  // shares traded at the node
    std::vector<double> cash;
    std::vector<double> value;
    std::vector<double> pnl;
    std::vector<double> cost;
};

// Cumulative positive and negative variation of gamma along one
// root-to-leaf path; pos - neg reproduces gamma, pos + neg is the total
// variation charged by the fee.
struct JordanPath {
    int leaf = -1;
    std::vector<int> nodes;
    std::vector<double> pos;
    std::vector<double> neg;
};

std::vector<JordanPath> jordan_decompose(const GridStrategy& s, const ScenarioTree& tree);

WealthLedger liquidation_value(const ScenarioTree& tree, const GridStrategy& s,
                               const FrictionParams& params, double x);

struct AdmissibilityResult {
    bool admissible = true;
    int violating_node = -1;  // earliest by (time_index, id) when inadmissible
};
AdmissibilityResult is_admissible(const WealthLedger& ledger, const ScenarioTree& tree, double x);

std::string strategy_to_json(const GridStrategy& s);
GridStrategy strategy_from_json(const std::string& text, const ScenarioTree& tree);
void save_strategy(const GridStrategy& s, const std::string& path);
GridStrategy load_strategy(const std::string& path, const ScenarioTree& tree);

void export_ledger_csv(const ScenarioTree& tree, const GridStrategy& s,
                       const WealthLedger& ledger, const std::string& path);

} // namespace tcostlab
