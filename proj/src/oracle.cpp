#include "tcostlab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>

#include "tcostlab/mz_metric.hpp"

namespace tcostlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Enumeration order: smallest move first, so the first optimum found is the
// least aggressive one and ties resolve deterministically.
std::vector<double> by_magnitude(std::vector<double> v) {
    std::sort(v.begin(), v.end(), [](double a, double b) {
        const double fa = std::fabs(a), fb = std::fabs(b);
        if (fa != fb) return fa < fb;
        return a < b;
    });
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

double side_factor(double gamma, double kappa) {
    return gamma >= 0.0 ? 1.0 - kappa : 1.0 + kappa;
}

struct Core {
    const ScenarioTree* tree;
    const UtilitySpec* u;
    const FrictionParams* par;
    double x;
    const std::vector<std::vector<double>>* incr;  // by node id, magnitude order
    double tie = 1e-12;
    int cap = 64;
    long long leaf_evals = 0;

    bool admissible(double liq) const { return x + liq >= -1e-12 * x; }

    double leaf_value(int id, double gamma_in, double cash_in) {
        ++leaf_evals;
        const double S = tree->nodes[static_cast<std::size_t>(id)].price;
        const double liq = cash_in + side_factor(gamma_in, par->kappa) * S * gamma_in;
        if (!admissible(liq)) return -kInf;
        return (*u)(x + liq);
    }

    double value(int id, double gamma_in, double cash_in) {
        if (tree->is_leaf(id)) return leaf_value(id, gamma_in, cash_in);
        const double S = tree->nodes[static_cast<std::size_t>(id)].price;
        const double kappa = par->kappa;
        double best = -kInf;
        for (double d : (*incr)[static_cast<std::size_t>(id)]) {
            const double g = gamma_in + d;
            const double c = cash_in - S * d - kappa * S * std::fabs(d);
            if (!admissible(c + side_factor(g, kappa) * S * g)) continue;
            double acc = 0.0;
            for (const Branch& b : tree->children(id)) {
                const double cv = value(b.child_id, g, c);
                if (cv == -kInf) {
                    acc = -kInf;
                    break;
                }
                acc += b.p * cv;
            }
            if (acc > best) best = acc;
        }
        return best;
    }

    using Frag = std::vector<std::pair<int, double>>;  // (node, holding)

    struct Col {
        double value = -kInf;
        long long count = 0;
        std::vector<Frag> frags;
        bool trunc = false;
    };

    Col collect(int id, double gamma_in, double cash_in) {
        Col out;
        if (tree->is_leaf(id)) {
            out.value = leaf_value(id, gamma_in, cash_in);
            if (out.value > -kInf) {
                out.count = 1;
                out.frags.push_back({});
            }
            return out;
        }
        const double S = tree->nodes[static_cast<std::size_t>(id)].price;
        const double kappa = par->kappa;
        const auto& moves = (*incr)[static_cast<std::size_t>(id)];

        std::vector<double> vals(moves.size(), -kInf);
        for (std::size_t m = 0; m < moves.size(); ++m) {
            const double g = gamma_in + moves[m];
            const double c = cash_in - S * moves[m] - kappa * S * std::fabs(moves[m]);
            if (!admissible(c + side_factor(g, kappa) * S * g)) continue;
            double acc = 0.0;
            for (const Branch& b : tree->children(id)) {
                const double cv = value(b.child_id, g, c);
                if (cv == -kInf) {
                    acc = -kInf;
                    break;
                }
                acc += b.p * cv;
            }
            vals[m] = acc;
            if (acc > out.value) out.value = acc;
        }
        if (out.value == -kInf) return out;

        const double tol = tie * std::max(1.0, std::fabs(out.value));
        for (std::size_t m = 0; m < moves.size(); ++m) {
            if (vals[m] == -kInf || out.value - vals[m] > tol) continue;
            const double g = gamma_in + moves[m];
            const double c = cash_in - S * moves[m] - kappa * S * std::fabs(moves[m]);
            std::vector<Col> kids;
            kids.reserve(tree->children(id).size());
            for (const Branch& b : tree->children(id))
                kids.push_back(collect(b.child_id, g, c));
            long long prod = 1;
            for (const Col& k : kids) {
                if (k.trunc) out.trunc = true;
                prod = prod > (1LL << 40) / std::max<long long>(1, k.count)
                           ? (1LL << 40)
                           : prod * k.count;
            }
            out.count += prod;

            // cartesian product of the children's tied fragments
            std::vector<std::size_t> pick(kids.size(), 0);
            bool wrapped = kids.empty();
            while (!wrapped) {
                if (static_cast<int>(out.frags.size()) >= cap) {
                    out.trunc = true;
                    break;
                }
                Frag f;
                f.emplace_back(id, g);
                for (std::size_t k = 0; k < kids.size(); ++k) {
                    const Frag& part = kids[k].frags[pick[k]];
                    f.insert(f.end(), part.begin(), part.end());
                }
                out.frags.push_back(std::move(f));
                std::size_t k = kids.size();
                while (k > 0) {
                    --k;
                    if (++pick[k] < kids[k].frags.size()) break;
                    pick[k] = 0;
                    if (k == 0) wrapped = true;
                }
            }
            if (static_cast<int>(out.frags.size()) >= cap &&
                out.count > static_cast<long long>(out.frags.size()))
                out.trunc = true;
        }
        return out;
    }
};

double work_bound(const ScenarioTree& tree,
                  const std::vector<std::vector<double>>& incr, int id) {
    if (tree.is_leaf(id)) return 1.0;
    double acc = 0.0;
    for (const Branch& b : tree.children(id))
        acc += work_bound(tree, incr, b.child_id);
    return acc * static_cast<double>(incr[static_cast<std::size_t>(id)].size());
}

OracleResult run_core(const ScenarioTree& tree, const UtilitySpec& utility,
                      double x, const FrictionParams& params,
                      const std::vector<std::vector<double>>& incr,
                      double work_budget) {
    if (work_bound(tree, incr, 0) > work_budget)
        throw std::invalid_argument("oracle: enumeration exceeds the work budget");

    Core core{&tree, &utility, &params, x, &incr};
    Core::Col col = core.collect(0, 0.0, 0.0);
    if (col.value == -kInf)
        throw std::runtime_error("oracle: no admissible strategy on the grid");

    OracleResult res;
    res.value = col.value;
    res.leaf_evals = core.leaf_evals;
    res.optima = static_cast<int>(
        std::min<long long>(col.count, std::numeric_limits<int>::max()));
    res.argmax_truncated = col.trunc;
    for (const Core::Frag& f : col.frags) {
        GridStrategy s;
        s.gamma.assign(tree.nodes.size(), 0.0);
        for (const auto& [id, g] : f) s.gamma[static_cast<std::size_t>(id)] = g;
        res.argmax.push_back(std::move(s));
    }
    if (res.argmax.empty())
        throw std::logic_error("oracle: argmax collection lost the optimum");
    res.best = res.argmax.front();
    return res;
}

std::vector<std::vector<double>> uniform_lists(const ScenarioTree& tree,
                                               const TradeGrid& grid) {
    std::vector<std::vector<double>> incr(tree.nodes.size());
    const std::vector<double> ordered = by_magnitude(grid.increments);
    for (const TreeNode& node : tree.nodes)
        if (!tree.is_leaf(node.id))
            incr[static_cast<std::size_t>(node.id)] = ordered;
    return incr;
}

}  // namespace

void TradeGrid::validate() const {
    if (increments.empty())
        throw std::invalid_argument("TradeGrid: increments must be nonempty");
    bool has_zero = false;
    for (std::size_t i = 0; i < increments.size(); ++i) {
        if (!std::isfinite(increments[i]))
            throw std::invalid_argument("TradeGrid: increments must be finite");
        if (i > 0 && !(increments[i] > increments[i - 1]))
            throw std::invalid_argument("TradeGrid: increments must be strictly increasing");
        if (increments[i] == 0.0) has_zero = true;
    }
    if (!has_zero)
        throw std::invalid_argument("TradeGrid: increments must contain 0");
}

TradeGrid TradeGrid::centered(double delta, int half_width) {
    if (!(delta > 0.0) || !std::isfinite(delta))
        throw std::invalid_argument("TradeGrid: delta must be positive");
    if (half_width < 1)
        throw std::invalid_argument("TradeGrid: half_width must be at least 1");
    TradeGrid g;
    for (int j = -half_width; j <= half_width; ++j)
        g.increments.push_back(j * delta);
    return g;
}

OracleResult enumerate_optimal(const ScenarioTree& tree,
                               const UtilitySpec& utility, double x,
                               const FrictionParams& params,
                               const TradeGrid& grid, double work_budget) {
    tree.validate();
    utility.validate();
    params.validate();
    grid.validate();
    if (!(x > 0.0))
        throw std::invalid_argument("enumerate_optimal: x must be positive");
    return run_core(tree, utility, x, params, uniform_lists(tree, grid),
                    work_budget);
}

OracleRefineResult oracle_refine(const ScenarioTree& tree,
                                 const UtilitySpec& utility, double x,
                                 const FrictionParams& params, double delta0,
                                 double tol, int max_iters,
                                 double work_budget) {
    tree.validate();
    utility.validate();
    params.validate();
    if (!(x > 0.0) || !(delta0 > 0.0) || max_iters < 1)
        throw std::invalid_argument("oracle_refine: bad arguments");

    OracleRefineResult out;
    double delta = delta0;
    out.last = run_core(tree, utility, x, params,
                        uniform_lists(tree, TradeGrid::centered(delta)),
                        work_budget);
    out.iters = 1;
    out.delta_final = delta;

    // Pattern search over the joint increment lattice. The spacing halves
    // only when every node's winner sits in the interior of its local grid;
    // an edge hit keeps the spacing and recenters, so the walk reaches
    // optima arbitrarily far from the first grid. A value stall is not
    // stability on its own (near the optimum the incumbent re-evaluates to
    // an exactly zero gain whenever its offset is under half the spacing),
    // so the location error is bounded by delta_final / 2 and converged
    // reports a stall within tol on the last two iterations.
    int stalls = 0;
    bool edge = false;
    {
        const double span = 2.0 * delta * (1.0 - 1e-9);
        for (const TreeNode& node : tree.nodes) {
            if (tree.is_leaf(node.id)) continue;
            const double gp =
                node.parent_id < 0
                    ? 0.0
                    : out.last.best.gamma[static_cast<std::size_t>(node.parent_id)];
            const double inc =
                out.last.best.gamma[static_cast<std::size_t>(node.id)] - gp;
            if (std::fabs(inc) >= span) edge = true;
        }
    }
    while (out.iters < max_iters) {
        if (!edge) delta *= 0.5;
        std::vector<std::vector<double>> incr(tree.nodes.size());
        std::vector<double> centers(tree.nodes.size(), 0.0);
        for (const TreeNode& node : tree.nodes) {
            if (tree.is_leaf(node.id)) continue;
            const double gp =
                node.parent_id < 0
                    ? 0.0
                    : out.last.best.gamma[static_cast<std::size_t>(node.parent_id)];
            const double center =
                out.last.best.gamma[static_cast<std::size_t>(node.id)] - gp;
            centers[static_cast<std::size_t>(node.id)] = center;
            std::vector<double> moves{0.0};
            for (int j = -2; j <= 2; ++j) moves.push_back(center + j * delta);
            incr[static_cast<std::size_t>(node.id)] = by_magnitude(moves);
        }
        OracleResult next = run_core(tree, utility, x, params, incr, work_budget);
        const double gain = std::fabs(next.value - out.last.value);
        edge = false;
        const double span = 2.0 * delta * (1.0 - 1e-9);
        for (const TreeNode& node : tree.nodes) {
            if (tree.is_leaf(node.id)) continue;
            const double gp =
                node.parent_id < 0
                    ? 0.0
                    : next.best.gamma[static_cast<std::size_t>(node.parent_id)];
            const double inc =
                next.best.gamma[static_cast<std::size_t>(node.id)] - gp;
            if (std::fabs(inc - centers[static_cast<std::size_t>(node.id)]) >=
                span)
                edge = true;
        }
        out.last = std::move(next);
        out.delta_final = delta;
        ++out.iters;
        stalls = gain <= tol ? stalls + 1 : 0;
    }
    out.converged = stalls >= 2;
    return out;
}

namespace {

MzPath leaf_path(const std::vector<int>& walk, const std::vector<double>& gamma,
                 double horizon, int n_steps) {
    MzPath p;
    p.horizon = horizon;
    const double dt = horizon / n_steps;
    for (int k = 0; k < n_steps; ++k) {
        p.times.push_back(k * dt);
        p.values.push_back(gamma[static_cast<std::size_t>(walk[static_cast<std::size_t>(k)])]);
    }
    p.terminal = 0.0;
    return p;
}

}  // namespace

UniquenessReport uniqueness_probe(const ScenarioTree& tree,
                                  const UtilitySpec& utility, double x,
                                  const FrictionParams& params,
                                  const TradeGrid& grid,
                                  const std::vector<double>& radii,
                                  bool jitter, double assignment_budget,
                                  const std::vector<double>& eps_levels) {
    tree.validate();
    utility.validate();
    params.validate();
    grid.validate();
    if (!(x > 0.0))
        throw std::invalid_argument("uniqueness_probe: x must be positive");
    for (double r : radii)
        if (!(r > 0.0))
            throw std::invalid_argument("uniqueness_probe: radii must be positive");

    std::vector<std::vector<double>> incr = uniform_lists(tree, grid);
    std::vector<int> nonterm;
    for (const TreeNode& node : tree.nodes)
        if (!tree.is_leaf(node.id)) nonterm.push_back(node.id);
    if (jitter)
        for (int id : nonterm)
            for (double& d : incr[static_cast<std::size_t>(id)])
                d *= 1.0 + 1e-7 * (id + 1);

    double assignments = 1.0;
    for (int id : nonterm)
        assignments *= static_cast<double>(incr[static_cast<std::size_t>(id)].size());
    if (assignments > assignment_budget)
        throw std::invalid_argument("uniqueness_probe: joint enumeration exceeds the budget");

    const OracleResult best = run_core(tree, utility, x, params, incr, 1e18);

    const std::vector<double> prob = tree.node_probabilities();
    std::vector<int> leaf_ids;
    std::vector<std::vector<int>> walks;
    for (const TreeNode& node : tree.nodes) {
        if (!tree.is_leaf(node.id)) continue;
        leaf_ids.push_back(node.id);
        walks.push_back(tree.path_from_root(node.id));
    }
    std::vector<MzPath> best_paths;
    best_paths.reserve(walks.size());
    for (const auto& w : walks)
        best_paths.push_back(
            leaf_path(w, best.best.gamma, tree.horizon, tree.n_steps));

    UniquenessReport rep;
    rep.best_value = best.value;
    rep.radii = radii;
    rep.gaps.assign(radii.size(), kInf);
    rep.eps_levels = eps_levels;
    rep.eps_diameters.assign(eps_levels.size(), 0.0);
    rep.jittered = jitter;
    const double tie_tol = 1e-12 * std::max(1.0, std::fabs(best.value));
    const double near_tol = 1e-9 * std::max(1.0, std::fabs(best.value));
    double keep_tol = near_tol;
    for (double e : eps_levels) keep_tol = std::max(keep_tol, e);
    std::vector<double> far_best(radii.size(), -kInf);
    std::vector<std::pair<std::vector<double>, double>> near_set;
    constexpr std::size_t kNearCap = 256;

    std::vector<double> gamma(tree.nodes.size(), 0.0);
    std::vector<double> cash(tree.nodes.size(), 0.0);
    const double kappa = params.kappa;

    auto leaf_ok = [&](int id, double g, double c) {
        const double S = tree.nodes[static_cast<std::size_t>(id)].price;
        const double liq = c + side_factor(g, kappa) * S * g;
        return x + liq >= -1e-12 * x;
    };

    std::function<void(std::size_t)> rec = [&](std::size_t k) {
        if (k == nonterm.size()) {
            double val = 0.0;
            for (std::size_t li = 0; li < leaf_ids.size(); ++li) {
                const int id = leaf_ids[li];
                const int par = tree.nodes[static_cast<std::size_t>(id)].parent_id;
                const double g = gamma[static_cast<std::size_t>(par)];
                const double c = cash[static_cast<std::size_t>(par)];
                const double S = tree.nodes[static_cast<std::size_t>(id)].price;
                val += prob[static_cast<std::size_t>(id)] *
                       utility(x + c + side_factor(g, kappa) * S * g);
            }
            ++rep.enumerated;

            double dist = 0.0;
            for (std::size_t li = 0; li < walks.size(); ++li)
                dist = std::max(dist, d_mz(leaf_path(walks[li], gamma, tree.horizon,
                                                     tree.n_steps),
                                           best_paths[li]));
            for (std::size_t ri = 0; ri < radii.size(); ++ri)
                if (dist >= radii[ri]) far_best[ri] = std::max(far_best[ri], val);
            if (best.value - val <= tie_tol) ++rep.argmax_count;
            if (best.value - val <= near_tol) ++rep.near_optimal;
            if (best.value - val <= keep_tol && near_set.size() < kNearCap)
                near_set.emplace_back(gamma, val);
            return;
        }
        const int id = nonterm[k];
        const int par = tree.nodes[static_cast<std::size_t>(id)].parent_id;
        const double gp = par < 0 ? 0.0 : gamma[static_cast<std::size_t>(par)];
        const double cp = par < 0 ? 0.0 : cash[static_cast<std::size_t>(par)];
        const double S = tree.nodes[static_cast<std::size_t>(id)].price;
        for (double d : incr[static_cast<std::size_t>(id)]) {
            const double g = gp + d;
            const double c = cp - S * d - kappa * S * std::fabs(d);
            if (x + c + side_factor(g, kappa) * S * g < -1e-12 * x) continue;
            bool ok = true;
            for (const Branch& b : tree.children(id))
                if (tree.is_leaf(b.child_id) && !leaf_ok(b.child_id, g, c)) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            gamma[static_cast<std::size_t>(id)] = g;
            cash[static_cast<std::size_t>(id)] = c;
            rec(k + 1);
        }
    };
    rec(0);

    for (std::size_t a = 0; a < near_set.size(); ++a)
        for (std::size_t b = a + 1; b < near_set.size(); ++b) {
            double dist = 0.0;
            for (std::size_t li = 0; li < walks.size(); ++li)
                dist = std::max(
                    dist, d_mz(leaf_path(walks[li], near_set[a].first,
                                         tree.horizon, tree.n_steps),
                               leaf_path(walks[li], near_set[b].first,
                                         tree.horizon, tree.n_steps)));
            const double gap = best.value -
                               std::min(near_set[a].second, near_set[b].second);
            if (gap <= near_tol) rep.diameter = std::max(rep.diameter, dist);
            for (std::size_t ei = 0; ei < eps_levels.size(); ++ei)
                if (gap <= eps_levels[ei])
                    rep.eps_diameters[ei] = std::max(rep.eps_diameters[ei], dist);
        }
    for (std::size_t ri = 0; ri < radii.size(); ++ri)
        if (far_best[ri] > -kInf) rep.gaps[ri] = best.value - far_best[ri];
    return rep;
}

}  // namespace tcostlab
