#pragma once

// Independent feasibility oracle for pricing-system bands: per node a fixed
// grid of candidate values inside the bid-ask band, combined bottom-up with
// the exact linear attainability interval for floor-weighted mixtures. Only
// grid points count as feasible, so the oracle is conservative by up to one
// grid spacing per level.

#include <cmath>
#include <vector>

#include "tcostlab/scenario_tree.hpp"

namespace tcsupport {

struct GridCpsResult {
    bool feasible = false;
    double root_lo = 0.0;  // extreme feasible grid values at the root
    double root_hi = 0.0;
};

inline GridCpsResult grid_cps_feasible(const tcostlab::ScenarioTree& tree,
                                       double band, double q_min = 1e-6,
                                       int points = 50) {
    const std::size_t n = tree.size();
    std::vector<char> empty(n, 0);
    std::vector<double> lo_f(n, 0.0), hi_f(n, 0.0);

    const auto layers = tree.layers();
    for (auto layer = layers.rbegin(); layer != layers.rend(); ++layer) {
        for (int id : *layer) {
            const std::size_t idx = static_cast<std::size_t>(id);
            const double s = tree.nodes[idx].price;
            const double blo = (1.0 - band) * s;
            const double bhi = (1.0 + band) * s;
            if (tree.is_leaf(id)) {
                lo_f[idx] = blo;
                hi_f[idx] = bhi;
                continue;
            }
            const auto& kids = tree.children(id);
            double lo_min = 0.0, hi_max = 0.0, lo_sum = 0.0, hi_sum = 0.0;
            bool dead = false, first = true;
            for (const tcostlab::Branch& b : kids) {
                const std::size_t c = static_cast<std::size_t>(b.child_id);
                if (empty[c]) {
                    dead = true;
                    break;
                }
                lo_sum += lo_f[c];
                hi_sum += hi_f[c];
                if (first || lo_f[c] < lo_min) lo_min = lo_f[c];
                if (first || hi_f[c] > hi_max) hi_max = hi_f[c];
                first = false;
            }
            if (dead) {
                empty[idx] = 1;
                continue;
            }
            // extremes of sum q_c * m_c over q >= q_min, sum q = 1,
            // m_c in the child's feasible range
            const double nb = static_cast<double>(kids.size());
            const double lo_att = (1.0 - (nb - 1.0) * q_min) * lo_min +
                                  q_min * (lo_sum - lo_min);
            const double hi_att = (1.0 - (nb - 1.0) * q_min) * hi_max +
                                  q_min * (hi_sum - hi_max);
            // snap to the node's own candidate grid
            const double step = (bhi - blo) / static_cast<double>(points - 1);
            const double from = std::max(blo, lo_att);
            const double to = std::min(bhi, hi_att);
            if (step == 0.0) {
                if (from > s || to < s) {
                    empty[idx] = 1;
                    continue;
                }
                lo_f[idx] = s;
                hi_f[idx] = s;
                continue;
            }
            long k_lo = std::lround(std::ceil((from - blo) / step - 1e-12));
            long k_hi = std::lround(std::floor((to - blo) / step + 1e-12));
            if (k_lo < 0) k_lo = 0;
            if (k_hi > points - 1) k_hi = points - 1;
            if (k_lo > k_hi) {
                empty[idx] = 1;
                continue;
            }
            lo_f[idx] = blo + static_cast<double>(k_lo) * step;
            hi_f[idx] = blo + static_cast<double>(k_hi) * step;
        }
    }

    GridCpsResult res;
    res.feasible = !empty[0];
    if (res.feasible) {
        res.root_lo = lo_f[0];
        res.root_hi = hi_f[0];
    }
    return res;
}

}  // namespace tcsupport
