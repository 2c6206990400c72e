#include "tcostlab/dual_cps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tcostlab {

namespace {

void check_kappa_eff(double kappa_eff) {
    if (!(kappa_eff >= 0.0) || !(kappa_eff < 1.0))
        throw std::invalid_argument("kappa_eff must lie in [0, 1)");
}

void check_q_min(const ScenarioTree& tree, double q_min) {
    if (!(q_min > 0.0))
        throw std::invalid_argument("q_min must be positive");
    std::size_t max_branching = 0;
    for (const TreeNode& node : tree.nodes)
        max_branching = std::max(max_branching, tree.children(node.id).size());
    if (q_min * static_cast<double>(max_branching) >= 1.0)
        throw std::invalid_argument("q_min too large for the branching factor");
}

}  // namespace

CpsPropagation propagate_bands(const ScenarioTree& tree, double kappa_eff,
                               double q_min) {
    tree.validate();
    check_kappa_eff(kappa_eff);
    check_q_min(tree, q_min);

    CpsPropagation out;
    out.bands.assign(tree.nodes.size(), {});

    const auto layers = tree.layers();
    for (int k = tree.n_steps; k >= 0; --k) {
        for (int id : layers[static_cast<std::size_t>(k)]) {
            const std::size_t idx = static_cast<std::size_t>(id);
            const double S = tree.nodes[idx].price;
            const double bid = (1.0 - kappa_eff) * S;
            const double ask = (1.0 + kappa_eff) * S;
            if (tree.is_leaf(id)) {
                out.bands[idx] = {bid, ask};
                continue;
            }
            double lo_att = std::numeric_limits<double>::infinity();
            double hi_att = -std::numeric_limits<double>::infinity();
            bool broken = false;
            for (const Branch& b : tree.children(id)) {
                const CpsBand& cb = out.bands[static_cast<std::size_t>(b.child_id)];
                if (!cb.feasible()) {
                    broken = true;
                    break;
                }
                lo_att = std::min(lo_att, cb.lo);
                hi_att = std::max(hi_att, cb.hi);
            }
            if (broken) {
                out.bands[idx] = {1.0, -1.0};
                continue;
            }
            const double span = hi_att - lo_att;
            if (span > 0.0) {
                const double margin = q_min * span;
                lo_att += margin;
                hi_att -= margin;
            }
            out.bands[idx] = {std::max(lo_att, bid), std::min(hi_att, ask)};
        }
    }

    out.feasible = true;
    for (int k = 0; k <= tree.n_steps && out.feasible; ++k)
        for (int id : layers[static_cast<std::size_t>(k)])
            if (!out.bands[static_cast<std::size_t>(id)].feasible()) {
                out.feasible = false;
                out.witness_node = id;
                break;
            }
    return out;
}

CpsSystem extract_cps(const ScenarioTree& tree, const CpsPropagation& prop,
                      double kappa_eff, double q_min) {
    check_kappa_eff(kappa_eff);
    check_q_min(tree, q_min);
    if (!prop.feasible)
        throw std::invalid_argument("extract_cps: propagation is infeasible");
    if (prop.bands.size() != tree.nodes.size())
        throw std::invalid_argument("extract_cps: bands do not match the tree");

    CpsSystem sys;
    sys.M.assign(tree.nodes.size(), 0.0);
    sys.q.assign(tree.nodes.size(), {});
    const CpsBand& root = prop.bands[0];
    sys.M[0] = 0.5 * (root.lo + root.hi);

    for (const TreeNode& node : tree.nodes) {
        if (tree.is_leaf(node.id)) continue;
        const std::size_t idx = static_cast<std::size_t>(node.id);
        const double M = sys.M[idx];
        const auto& kids = tree.children(node.id);
        const std::size_t B = kids.size();

        std::vector<double> lo(B), hi(B), m(B);
        for (std::size_t j = 0; j < B; ++j) {
            const CpsBand& cb = prop.bands[static_cast<std::size_t>(kids[j].child_id)];
            lo[j] = cb.lo;
            hi[j] = cb.hi;
            m[j] = 0.5 * (cb.lo + cb.hi);
        }

        std::vector<double> q(B, q_min);

        if (B == 1) {
            // chain node: the margin keeps M strictly inside the child band
            q[0] = 1.0;
            m[0] = M;
        } else {
            const std::size_t p_lo = static_cast<std::size_t>(
                std::min_element(lo.begin(), lo.end()) - lo.begin());
            const std::size_t p_hi = static_cast<std::size_t>(
                std::max_element(hi.begin(), hi.end()) - hi.begin());
            if (hi[p_hi] - lo[p_lo] <= 0.0) {
                // every child band is the same point; any weights work
                if (std::fabs(hi[p_hi] - M) > 1e-9 * std::max(1.0, std::fabs(M)))
                    throw std::runtime_error(
                        "extract_cps: degenerate children exclude the parent value");
                for (std::size_t j = 0; j < B; ++j) q[j] = 1.0 / static_cast<double>(B);
                for (std::size_t j = 0; j < B; ++j) m[j] = M;
            } else if (p_lo == p_hi) {
                // one band contains all others; it absorbs the balance alone
                const std::size_t c = p_lo;
                double rest = 0.0;
                for (std::size_t j = 0; j < B; ++j)
                    if (j != c) rest += q_min * m[j];
                q[c] = 1.0 - static_cast<double>(B - 1) * q_min;
                m[c] = (M - rest) / q[c];
                if (m[c] < lo[c] || m[c] > hi[c])
                    throw std::runtime_error(
                        "extract_cps: no branch weights at node " + std::to_string(node.id));
            } else {
                // extreme children sit at the endpoints bracketing M, the rest
                // at band midpoints with the floor weight
                m[p_lo] = lo[p_lo];
                m[p_hi] = hi[p_hi];
                double m_rest = M;
                const double q_rest = 1.0 - static_cast<double>(B - 2) * q_min;
                for (std::size_t j = 0; j < B; ++j)
                    if (j != p_lo && j != p_hi) m_rest -= q_min * m[j];
                const double q_hi = (m_rest - q_rest * m[p_lo]) / (m[p_hi] - m[p_lo]);
                const double q_lo = q_rest - q_hi;
                if (q_hi < q_min || q_lo < q_min)
                    throw std::runtime_error(
                        "extract_cps: no branch weights at node " + std::to_string(node.id));
                q[p_lo] = q_lo;
                q[p_hi] = q_hi;
            }
        }

        sys.q[idx].assign(B, 0.0);
        for (std::size_t j = 0; j < B; ++j) {
            sys.q[idx][j] = q[j];
            sys.M[static_cast<std::size_t>(kids[j].child_id)] = m[j];
        }
    }
    return sys;
}

MartingaleCheck verify_martingale(const ScenarioTree& tree,
                                  const CpsSystem& sys, double kappa_eff) {
    if (sys.M.size() != tree.nodes.size() || sys.q.size() != tree.nodes.size())
        throw std::invalid_argument("verify_martingale: system does not match tree");
    MartingaleCheck chk;
    for (const TreeNode& node : tree.nodes) {
        const std::size_t idx = static_cast<std::size_t>(node.id);
        const double S = node.price;
        const double M = sys.M[idx];
        chk.max_band_violation =
            std::max({chk.max_band_violation, (1.0 - kappa_eff) * S - M,
                      M - (1.0 + kappa_eff) * S});
        if (tree.is_leaf(node.id)) continue;
        const auto& kids = tree.children(node.id);
        if (sys.q[idx].size() != kids.size())
            throw std::invalid_argument("verify_martingale: weights do not match branching");
        double acc = 0.0;
        double wsum = 0.0;
        for (std::size_t j = 0; j < kids.size(); ++j) {
            acc += sys.q[idx][j] * sys.M[static_cast<std::size_t>(kids[j].child_id)];
            wsum += sys.q[idx][j];
        }
        chk.max_residual = std::max(chk.max_residual, std::fabs(M - acc));
        chk.max_residual =
            std::max(chk.max_residual, std::fabs(wsum - 1.0) * std::fabs(M));
    }
    chk.max_band_violation = std::max(chk.max_band_violation, 0.0);
    return chk;
}

bool layered_cps_feasible(const LayerModel& model, double kappa_eff,
                          double q_min) {
    model.validate();
    check_kappa_eff(kappa_eff);
    if (!(q_min > 0.0))
        throw std::invalid_argument("q_min must be positive");

    // intervals in units of the current price; leaves carry the raw band
    double lo = 1.0 - kappa_eff;
    double hi = 1.0 + kappa_eff;
    for (int k = model.n_steps - 1; k >= 0; --k) {
        const LayerProfile& prof = model.steps[static_cast<std::size_t>(k)];
        if (q_min * static_cast<double>(prof.ratios.size()) >= 1.0)
            throw std::invalid_argument("q_min too large for the branching factor");
        double r_min = prof.ratios[0], r_max = prof.ratios[0];
        for (double r : prof.ratios) {
            r_min = std::min(r_min, r);
            r_max = std::max(r_max, r);
        }
        double lo_att = lo * r_min;
        double hi_att = hi * r_max;
        const double span = hi_att - lo_att;
        if (span > 0.0) {
            const double margin = q_min * span;
            lo_att += margin;
            hi_att -= margin;
        }
        lo = std::max(lo_att, 1.0 - kappa_eff);
        hi = std::min(hi_att, 1.0 + kappa_eff);
        if (lo > hi) return false;
    }
    return true;
}

namespace {

template <class Feasible>
double bisect_kappa(const Feasible& feasible, double tol) {
    double hi = 1.0 - 1e-12;
    if (!feasible(hi)) return 1.0;
    double lo = 0.0;
    if (feasible(lo)) return 0.0;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace

double kappa_eff_min(const ScenarioTree& tree, double q_min, double tol) {
    tree.validate();
    check_q_min(tree, q_min);
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
    return bisect_kappa(
        [&](double k) { return propagate_bands(tree, k, q_min).feasible; }, tol);
}

double kappa_eff_min(const LayerModel& model, double q_min, double tol) {
    model.validate();
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
    return bisect_kappa(
        [&](double k) { return layered_cps_feasible(model, k, q_min); }, tol);
}

}  // namespace tcostlab
