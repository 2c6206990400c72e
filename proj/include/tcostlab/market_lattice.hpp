#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tcostlab/scenario_tree.hpp"

namespace tcostlab {

inline constexpr std::size_t kDefaultNodeBudget = 1000000;

struct GbmSpec {
    double s0 = 100.0;
    double mu = 0.0;
    double sigma = 0.2;  // must be > 0
    double horizon = 1.0;
    void validate() const;
};

struct FbmSpec {
    double s0 = 100.0;
    double hurst = 0.5;  // in (0,1)
    double scale = 0.2;
    double horizon = 1.0;
    int branching = 2;
    std::uint64_t seed = 0;
    void validate() const;
};

// One refinement level of the up/down lattice. p_up is clamped away from
// {0,1} by 1e-9 so all branch measures stay equivalent.
struct BinomialStep {
    double u = 1.0;
    double d = 1.0;
    double p_up = 0.5;
    double dt = 0.0;
};
BinomialStep binomial_step(const GbmSpec& spec, int n_steps);

ScenarioTree build_binomial(const GbmSpec& spec, int n_steps,
                            std::size_t node_budget = kDefaultNodeBudget);
ScenarioTree build_fbm_tree(const FbmSpec& spec, int n_steps,
                            std::size_t node_budget = kDefaultNodeBudget);
std::vector<ScenarioTree> refine(const GbmSpec& spec, const std::vector<int>& levels,
                                 std::size_t node_budget = kDefaultNodeBudget);

// Collapsed form of a market whose branch ratios and probabilities depend on
// the layer only. Deep binomial families are solved in this form; an
// explicit tree of the same family collapses to the identical model.
struct LayerModel {
    int n_steps = 0;
    double horizon = 0.0;
    double s0 = 0.0;
    std::vector<LayerProfile> steps;  // one per time step
    double dt() const { return horizon / n_steps; }
    void validate() const;
};

LayerModel layer_model(const GbmSpec& spec, int n_steps);
std::optional<LayerModel> layer_model(const ScenarioTree& tree);

} // namespace tcostlab
