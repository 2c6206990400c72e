#include "tcostlab/dp_solver.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "tcostlab/pchip.hpp"

namespace tcostlab {

void GridSpec::validate() const {
    if (n_points < 33)
        throw std::invalid_argument("GridSpec: n_points must be at least 33");
    if (!std::isfinite(pi_min) || !std::isfinite(pi_max))
        throw std::invalid_argument("GridSpec: bounds must be finite");
    if (!(pi_min < 0.0) || !(pi_max > 0.0))
        throw std::invalid_argument("GridSpec: range must straddle zero");
}

PositionGrid::PositionGrid(const GridSpec& spec) {
    spec.validate();
    const int n = spec.n_points;
    const double range = spec.pi_max - spec.pi_min;
    int k_neg = static_cast<int>(std::llround((n - 1) * (-spec.pi_min) / range));
    k_neg = std::clamp(k_neg, 1, n - 2);
    const int k_pos = n - 1 - k_neg;
    pts_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < k_neg; ++i)
        pts_[static_cast<std::size_t>(i)] =
            spec.pi_min * (1.0 - static_cast<double>(i) / k_neg);
    pts_[static_cast<std::size_t>(k_neg)] = 0.0;  // exact knot at the flat position
    for (int j = 1; j <= k_pos; ++j)
        pts_[static_cast<std::size_t>(k_neg + j)] =
            spec.pi_max * (static_cast<double>(j) / k_pos);
    zero_ = static_cast<std::size_t>(k_neg);
}

double trade_factor(double pi, double target, double kappa) {
    if (target > pi) {
        const double num = 1.0 + 2.0 * kappa * std::max(pi, 0.0);
        const double den = 1.0 + 2.0 * kappa * std::max(target, 0.0);
        return num / den;
    }
    if (target < pi) {
        const double num = 1.0 - 2.0 * kappa * std::min(pi, 0.0);
        const double den = 1.0 - 2.0 * kappa * std::min(target, 0.0);
        return num / den;
    }
    return 1.0;
}

namespace {

struct ChildRef {
    double ratio;
    double prob;
    const Pchip* h;  // continuation table; null means a terminal child
    double h_const;  // used when h is null
};

// Expected continuation objective for a post-trade position t, before the
// trading cost factor is applied.
struct Objective {
    const std::vector<ChildRef>* children;
    double kappa;
    bool is_log;
    double p;

    double growth(double t, double ratio) const {
        const double side = t >= 0.0 ? 1.0 - kappa : 1.0 + kappa;
        return 1.0 + side * t * (ratio - 1.0);
    }

    double phi(double t) const {
        double acc = 0.0;
        for (const ChildRef& c : *children) {
            const double g = growth(t, c.ratio);
            const double pc = t * c.ratio / g;
            const double hv = c.h != nullptr ? c.h->eval(pc) : c.h_const;
            if (is_log)
                acc += c.prob * (std::log(g) + hv);
            else
                acc += c.prob * std::pow(g, p) * hv;
        }
        return acc;
    }

    double cost_up(double t) const { return 1.0 + 2.0 * kappa * std::max(t, 0.0); }
    double cost_dn(double t) const { return 1.0 - 2.0 * kappa * std::min(t, 0.0); }

    double buy_from_phi(double t, double ph) const {
        return is_log ? ph - std::log(cost_up(t)) : ph / std::pow(cost_up(t), p);
    }
    double sell_from_phi(double t, double ph) const {
        return is_log ? ph - std::log(cost_dn(t)) : ph / std::pow(cost_dn(t), p);
    }
    double buy_obj(double t) const { return buy_from_phi(t, phi(t)); }
    double sell_obj(double t) const { return sell_from_phi(t, phi(t)); }

    // Value at pi of adopting a trade whose cost-free objective equals v.
    double compose_buy(double pi, double v) const {
        return is_log ? std::log(cost_up(pi)) + v : std::pow(cost_up(pi), p) * v;
    }
    double compose_sell(double pi, double v) const {
        return is_log ? std::log(cost_dn(pi)) + v : std::pow(cost_dn(pi), p) * v;
    }
};

// Post-trade positions for which every successor position stays on the grid
// range. Each bound solves pi_child(t) == limit in closed form; 0 always
// qualifies, and the child growth factor stays positive on the interval.
void admissible_interval(const std::vector<ChildRef>& children, double kappa,
                         double pi_min, double pi_max, double& lo, double& hi) {
    lo = pi_min;
    hi = pi_max;
    for (const ChildRef& c : children) {
        const double r = c.ratio;
        if (r == 1.0) continue;
        {
            const double den = r - pi_max * (1.0 - kappa) * (r - 1.0);
            if (den > 0.0) hi = std::min(hi, pi_max / den);
        }
        {
            const double den = r - pi_min * (1.0 + kappa) * (r - 1.0);
            if (den > 0.0) lo = std::max(lo, pi_min / den);
        }
    }
    assert(lo <= 0.0 && hi >= 0.0);
}

template <class F>
void golden_max(const F& f, double a, double b, double& best_t, double& best_v) {
    constexpr double invphi = 0.6180339887498949;
    constexpr double tol = 1e-10;
    if (b < a) std::swap(a, b);
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    auto track = [&](double t, double v) {
        if (v > best_v) {
            best_v = v;
            best_t = t;
        }
    };
    track(x1, f1);
    track(x2, f2);
    while (b - a > tol) {
        if (f1 >= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
            track(x1, f1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
            track(x2, f2);
        }
    }
}

// One backward step at a node: locate the trade thresholds and fill the value
// table row over the full grid.
void solve_node(const Objective& ob, const PositionGrid& grid,
                const GridSpec& spec, NodePolicy& pol, std::vector<double>& row) {
    const std::vector<double>& pts = grid.points();
    const std::size_t n = pts.size();

    double lo = 0.0, hi = 0.0;
    admissible_interval(*ob.children, ob.kappa, spec.pi_min, spec.pi_max, lo, hi);
    pol.adm_lo = lo;
    pol.adm_hi = hi;

    std::vector<double> phi_grid(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> cand_t;
    std::vector<double> cand_phi;
    cand_t.reserve(n + 2);
    cand_phi.reserve(n + 2);
    cand_t.push_back(lo);
    cand_phi.push_back(ob.phi(lo));
    for (std::size_t i = 0; i < n; ++i) {
        if (pts[i] <= lo || pts[i] >= hi) continue;
        phi_grid[i] = ob.phi(pts[i]);
        cand_t.push_back(pts[i]);
        cand_phi.push_back(phi_grid[i]);
    }
    cand_t.push_back(hi);
    cand_phi.push_back(ob.phi(hi));
    for (std::size_t i = 0; i < n; ++i) {
        if (pts[i] == lo) phi_grid[i] = cand_phi.front();
        if (pts[i] == hi) phi_grid[i] = cand_phi.back();
    }

    const std::size_t m = cand_t.size();
    auto refine = [&](auto&& f, double& t_out, double& v_out) {
        std::size_t jbest = 0;
        double vbest = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            const double v = j == 0 ? f(cand_t[j]) : f.from_phi(cand_t[j], cand_phi[j]);
            if (v > vbest) {
                vbest = v;
                jbest = j;
            }
        }
        t_out = cand_t[jbest];
        v_out = vbest;
        const double a = cand_t[jbest == 0 ? 0 : jbest - 1];
        const double b = cand_t[jbest + 1 < m ? jbest + 1 : m - 1];
        if (b > a) golden_max(f, a, b, t_out, v_out);
    };

    struct BuyFn {
        const Objective* ob;
        double operator()(double t) const { return ob->buy_obj(t); }
        double from_phi(double t, double ph) const { return ob->buy_from_phi(t, ph); }
    };
    struct SellFn {
        const Objective* ob;
        double operator()(double t) const { return ob->sell_obj(t); }
        double from_phi(double t, double ph) const { return ob->sell_from_phi(t, ph); }
    };

    refine(BuyFn{&ob}, pol.pi_low, pol.best_buy);
    refine(SellFn{&ob}, pol.pi_high, pol.best_sell);

    if (pol.pi_low > pol.pi_high + 1e-9)
        throw GridTooCoarse("trade thresholds crossed: pi_low=" +
                            std::to_string(pol.pi_low) +
                            " pi_high=" + std::to_string(pol.pi_high));

    const double tie_buy =
        1e-13 * (ob.is_log ? 1.0 : std::max(1.0, std::fabs(pol.best_buy)));
    const double tie_sell =
        1e-13 * (ob.is_log ? 1.0 : std::max(1.0, std::fabs(pol.best_sell)));

    row.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double pi = pts[i];
        if (pi < lo) {
            row[i] = ob.compose_buy(pi, pol.best_buy);
            continue;
        }
        if (pi > hi) {
            row[i] = ob.compose_sell(pi, pol.best_sell);
            continue;
        }
        const double ph = phi_grid[i];
        if (pi <= pol.pi_low &&
            pol.best_buy - ob.buy_from_phi(pi, ph) > tie_buy) {
            row[i] = ob.compose_buy(pi, pol.best_buy);
        } else if (pi >= pol.pi_high &&
                   pol.best_sell - ob.sell_from_phi(pi, ph) > tie_sell) {
            row[i] = ob.compose_sell(pi, pol.best_sell);
        } else {
            row[i] = ph;
        }
    }
}

std::vector<double> leaf_row(const UtilitySpec& u, std::size_t n) {
    return std::vector<double>(n, u.is_log() ? 0.0 : 1.0 / u.p);
}

double terminal_h(const UtilitySpec& u) { return u.is_log() ? 0.0 : 1.0 / u.p; }

double compose_value(const UtilitySpec& u, double x, double h0) {
    return u.is_log() ? std::log(x) + h0 : std::pow(x, u.p) * h0;
}

// Marginal value of a share in wealth units, divided by the marginal value of
// cash. Exact bid/ask at trading nodes; elsewhere a ratio of envelope
// derivatives of the reduced value function.
double shadow_from_state(double S, double pi, bool trades, bool buying,
                         double h, double dh, double kappa,
                         const UtilitySpec& u, bool& flag, double& excess) {
    const double bid = (1.0 - kappa) * S;
    const double ask = (1.0 + kappa) * S;
    flag = false;
    excess = 0.0;
    if (trades) return buying ? ask : bid;

    auto mrs = [&](double side) -> double {
        if (u.is_log()) {
            const double den = 1.0 - pi * dh;
            if (den <= 0.0) return std::numeric_limits<double>::quiet_NaN();
            return S * (side + dh * (1.0 - side * pi)) / den;
        }
        const double den = u.p * h - pi * dh;
        if (den <= 0.0) return std::numeric_limits<double>::quiet_NaN();
        return S * (side * u.p * h + dh * (1.0 - side * pi)) / den;
    };

    if (pi == 0.0) {
        const double right = mrs(1.0 - kappa);
        const double left = mrs(1.0 + kappa);
        if (!std::isfinite(right) || !std::isfinite(left)) {
            flag = true;
            return S;
        }
        if (right > ask * (1.0 + 1e-8) || left < bid * (1.0 - 1e-8)) flag = true;
        const double sel_lo = std::clamp(right, bid, ask);
        const double sel_hi = std::clamp(left, bid, ask);
        if (sel_lo > sel_hi) {
            flag = true;
            return S;
        }
        return std::clamp(S, sel_lo, sel_hi);
    }

    const double raw = mrs(pi > 0.0 ? 1.0 - kappa : 1.0 + kappa);
    if (!std::isfinite(raw)) {
        flag = true;
        return S;
    }
    excess = std::max({bid - raw, raw - ask, 0.0}) / S;
    if (excess > 1e-3) flag = true;
    return std::clamp(raw, bid, ask);
}

}  // namespace

LayerSolution solve_layers(const LayerModel& model, const UtilitySpec& utility,
                           double x, const FrictionParams& params,
                           const GridSpec& grid) {
    model.validate();
    utility.validate();
    params.validate();
    if (!(x > 0.0)) throw std::invalid_argument("solve_layers: x must be positive");

    PositionGrid pg(grid);
    const std::vector<double>& pts = pg.points();
    const int n = model.n_steps;

    LayerSolution ls;
    ls.model = model;
    ls.utility = utility;
    ls.params = params;
    ls.grid = grid;
    ls.x = x;
    ls.h.assign(static_cast<std::size_t>(n) + 1, {});
    ls.policy.assign(static_cast<std::size_t>(n), {});
    ls.h[static_cast<std::size_t>(n)] = leaf_row(utility, pts.size());

    for (int k = n - 1; k >= 0; --k) {
        Pchip next(pts, ls.h[static_cast<std::size_t>(k) + 1]);
        const LayerProfile& prof = model.steps[static_cast<std::size_t>(k)];
        std::vector<ChildRef> children;
        children.reserve(prof.ratios.size());
        for (std::size_t i = 0; i < prof.ratios.size(); ++i)
            children.push_back({prof.ratios[i], prof.probs[i], &next, 0.0});
        Objective ob{&children, params.kappa, utility.is_log(), utility.p};
        solve_node(ob, pg, grid, ls.policy[static_cast<std::size_t>(k)],
                   ls.h[static_cast<std::size_t>(k)]);
    }

    ls.value = compose_value(utility, x, ls.h[0][pg.zero_index()]);
    return ls;
}

namespace {

void forward_pass(const ScenarioTree& tree, DpSolution& sol,
                  const GridSpec& grid) {
    const double kappa = sol.params.kappa;
    sol.state.assign(tree.nodes.size(), {});
    sol.state[0].pi = 0.0;
    sol.state[0].wealth = sol.x;
    for (const TreeNode& node : tree.nodes) {
        NodeState& st = sol.state[static_cast<std::size_t>(node.id)];
        const NodePolicy& pol = sol.policy[static_cast<std::size_t>(node.id)];
        double t = st.pi;
        if (tree.is_leaf(node.id))
            t = 0.0;
        else
            t = std::clamp(st.pi, pol.pi_low, pol.pi_high);
        st.target = t;
        st.trades = t != st.pi;
        const double wpost = st.wealth * trade_factor(st.pi, t, kappa);
        for (const Branch& b : tree.children(node.id)) {
            const double r =
                tree.nodes[static_cast<std::size_t>(b.child_id)].price / node.price;
            const double side = t >= 0.0 ? 1.0 - kappa : 1.0 + kappa;
            const double g = 1.0 + side * t * (r - 1.0);
            if (!(g > 0.0))
                throw GridTooCoarse("forward pass left the solvent region");
            NodeState& cst = sol.state[static_cast<std::size_t>(b.child_id)];
            cst.pi = std::clamp(t * r / g, grid.pi_min, grid.pi_max);
            cst.wealth = wpost * g;
        }
    }
}

// Backward induction over an explicit tree. Rows for finished subtrees are
// dropped as soon as the parent is done unless the caller retains them.
// When eval_pi is given, the interpolated table and its slope are recorded at
// that position for every node flagged in need.
void general_backward(const ScenarioTree& tree, const UtilitySpec& utility,
                      const FrictionParams& params, const PositionGrid& pg,
                      const GridSpec& grid, std::vector<NodePolicy>& policy,
                      bool retain, std::vector<std::vector<double>>* rows_out,
                      const std::vector<char>* need,
                      const std::vector<double>* eval_pi,
                      std::vector<double>* h_at, std::vector<double>* dh_at) {
    const std::vector<double>& pts = pg.points();
    std::vector<std::vector<double>> rows(tree.nodes.size());
    const auto layers = tree.layers();

    for (int k = tree.n_steps; k >= 0; --k) {
        for (int id : layers[static_cast<std::size_t>(k)]) {
            const std::size_t idx = static_cast<std::size_t>(id);
            if (tree.is_leaf(id)) {
                rows[idx] = leaf_row(utility, pts.size());
            } else {
                std::vector<Pchip> interp;
                const auto& kids = tree.children(id);
                interp.reserve(kids.size());
                std::vector<ChildRef> children;
                children.reserve(kids.size());
                const double S = tree.nodes[idx].price;
                for (const Branch& b : kids)
                    interp.emplace_back(pts, rows[static_cast<std::size_t>(b.child_id)]);
                for (std::size_t j = 0; j < kids.size(); ++j) {
                    const double r =
                        tree.nodes[static_cast<std::size_t>(kids[j].child_id)].price / S;
                    children.push_back({r, kids[j].p, &interp[j], 0.0});
                }
                Objective ob{&children, params.kappa, utility.is_log(), utility.p};
                solve_node(ob, pg, grid, policy[idx], rows[idx]);
                if (!retain) {
                    for (const Branch& b : kids) {
                        rows[static_cast<std::size_t>(b.child_id)].clear();
                        rows[static_cast<std::size_t>(b.child_id)].shrink_to_fit();
                    }
                }
            }
            if (need != nullptr && (*need)[idx] != 0) {
                Pchip own(pts, rows[idx]);
                (*h_at)[idx] = own.eval((*eval_pi)[idx]);
                (*dh_at)[idx] = own.deriv((*eval_pi)[idx]);
            }
        }
    }
    if (retain && rows_out != nullptr) *rows_out = std::move(rows);
}

void assemble_shadows(const ScenarioTree& tree, DpSolution& sol,
                      const std::vector<double>& h_at,
                      const std::vector<double>& dh_at) {
    for (const TreeNode& node : tree.nodes) {
        NodeState& st = sol.state[static_cast<std::size_t>(node.id)];
        const bool leaf = tree.is_leaf(node.id);
        double h = h_at[static_cast<std::size_t>(node.id)];
        double dh = dh_at[static_cast<std::size_t>(node.id)];
        if (leaf) {
            h = terminal_h(sol.utility);
            dh = 0.0;
        }
        const bool trades = !leaf && st.trades;
        st.shadow = shadow_from_state(node.price, st.pi, trades,
                                      st.target > st.pi, h, dh,
                                      sol.params.kappa, sol.utility,
                                      st.shadow_flag, st.shadow_excess);
    }
}

}  // namespace

DpSolution solve(const ScenarioTree& tree, const UtilitySpec& utility, double x,
                 const FrictionParams& params, const GridSpec& grid) {
    tree.validate();
    utility.validate();
    params.validate();
    if (!(x > 0.0)) throw std::invalid_argument("solve: x must be positive");

    PositionGrid pg(grid);
    const std::vector<double>& pts = pg.points();

    DpSolution sol;
    sol.utility = utility;
    sol.params = params;
    sol.grid = grid;
    sol.x = x;
    sol.policy.assign(tree.nodes.size(), {});

    const auto lm = layer_model(tree);
    if (lm.has_value()) {
        LayerSolution ls = solve_layers(*lm, utility, x, params, grid);
        sol.layered = true;
        sol.value = ls.value;
        sol.layer_h = ls.h;
        for (const TreeNode& node : tree.nodes) {
            if (node.time_index < tree.n_steps)
                sol.policy[static_cast<std::size_t>(node.id)] =
                    ls.policy[static_cast<std::size_t>(node.time_index)];
        }
        forward_pass(tree, sol, grid);
        std::vector<Pchip> per_layer;
        per_layer.reserve(static_cast<std::size_t>(tree.n_steps) + 1);
        for (int k = 0; k <= tree.n_steps; ++k)
            per_layer.emplace_back(pts, ls.h[static_cast<std::size_t>(k)]);
        std::vector<double> h_at(tree.nodes.size(), 0.0);
        std::vector<double> dh_at(tree.nodes.size(), 0.0);
        for (const TreeNode& node : tree.nodes) {
            const std::size_t idx = static_cast<std::size_t>(node.id);
            const Pchip& ip = per_layer[static_cast<std::size_t>(node.time_index)];
            h_at[idx] = ip.eval(sol.state[idx].pi);
            dh_at[idx] = ip.deriv(sol.state[idx].pi);
        }
        assemble_shadows(tree, sol, h_at, dh_at);
        return sol;
    }

    sol.layered = false;
    const bool retain =
        static_cast<double>(tree.nodes.size()) * static_cast<double>(pts.size()) <=
        2e7;
    general_backward(tree, utility, params, pg, grid, sol.policy, retain,
                     retain ? &sol.h : nullptr, nullptr, nullptr, nullptr,
                     nullptr);
    forward_pass(tree, sol, grid);

    {
        // Value is reported for the realized policy, via the cash ledger.
        GridStrategy s;
        s.gamma.assign(tree.nodes.size(), 0.0);
        for (const TreeNode& node : tree.nodes) {
            if (tree.is_leaf(node.id)) continue;
            const NodeState& st = sol.state[static_cast<std::size_t>(node.id)];
            const double wpost =
                st.wealth * trade_factor(st.pi, st.target, params.kappa);
            s.gamma[static_cast<std::size_t>(node.id)] =
                st.target * wpost / node.price;
        }
        sol.value = replay_value(tree, s, utility, params, x);
    }

    std::vector<double> h_at(tree.nodes.size(), 0.0);
    std::vector<double> dh_at(tree.nodes.size(), 0.0);
    if (retain) {
        for (const TreeNode& node : tree.nodes) {
            const std::size_t idx = static_cast<std::size_t>(node.id);
            if (tree.is_leaf(node.id)) continue;
            Pchip ip(pts, sol.h[idx]);
            h_at[idx] = ip.eval(sol.state[idx].pi);
            dh_at[idx] = ip.deriv(sol.state[idx].pi);
        }
    } else {
        std::vector<char> need(tree.nodes.size(), 0);
        std::vector<double> at(tree.nodes.size(), 0.0);
        for (const TreeNode& node : tree.nodes) {
            if (tree.is_leaf(node.id)) continue;
            need[static_cast<std::size_t>(node.id)] = 1;
            at[static_cast<std::size_t>(node.id)] =
                sol.state[static_cast<std::size_t>(node.id)].pi;
        }
        std::vector<NodePolicy> scratch(tree.nodes.size());
        general_backward(tree, utility, params, pg, grid, scratch, false,
                         nullptr, &need, &at, &h_at, &dh_at);
    }
    assemble_shadows(tree, sol, h_at, dh_at);
    return sol;
}

GridStrategy extract_strategy(const DpSolution& sol, const ScenarioTree& tree,
                              double x) {
    if (!(x > 0.0))
        throw std::invalid_argument("extract_strategy: x must be positive");
    if (sol.state.size() != tree.nodes.size())
        throw std::invalid_argument("extract_strategy: solution does not match tree");
    const double scale = x / sol.x;
    GridStrategy s;
    s.gamma.assign(tree.nodes.size(), 0.0);
    for (const TreeNode& node : tree.nodes) {
        if (tree.is_leaf(node.id)) continue;  // forced flat at the horizon
        const NodeState& st = sol.state[static_cast<std::size_t>(node.id)];
        const double wpost =
            st.wealth * trade_factor(st.pi, st.target, sol.params.kappa);
        s.gamma[static_cast<std::size_t>(node.id)] =
            scale * st.target * wpost / node.price;
    }

    const double replay = replay_value(tree, s, sol.utility, sol.params, x);
    double expected = sol.value;
    if (scale != 1.0)
        expected = sol.utility.is_log()
                       ? sol.value + std::log(scale)
                       : sol.value * std::pow(scale, sol.utility.p);
    if (std::fabs(replay - expected) >
        1e-6 * std::max(1.0, std::fabs(expected)))
        throw GridTooCoarse("extracted strategy drifts from the solved value");
    return s;
}

std::vector<double> extract_shadow_price(const DpSolution& sol,
                                         const ScenarioTree& tree) {
    if (sol.state.size() != tree.nodes.size())
        throw std::invalid_argument(
            "extract_shadow_price: solution does not match tree");
    std::vector<double> out(tree.nodes.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sol.state[i].shadow;
    return out;
}

double replay_value(const ScenarioTree& tree, const GridStrategy& s,
                    const UtilitySpec& utility, const FrictionParams& params,
                    double x) {
    const WealthLedger led = liquidation_value(tree, s, params, x);
    const std::vector<double> prob = tree.node_probabilities();
    double acc = 0.0;
    for (const TreeNode& node : tree.nodes) {
        if (!tree.is_leaf(node.id)) continue;
        acc += prob[static_cast<std::size_t>(node.id)] *
               utility(x + led.value[static_cast<std::size_t>(node.id)]);
    }
    return acc;
}

std::vector<double> simulate_layer_path(const LayerSolution& sol,
                                        const std::vector<int>& choices,
                                        double widen) {
    sol.model.validate();
    if (static_cast<int>(choices.size()) != sol.model.n_steps)
        throw std::invalid_argument("simulate_layer_path: one choice per step");
    const double kappa = sol.params.kappa;
    std::vector<double> gamma(static_cast<std::size_t>(sol.model.n_steps));
    double pi = 0.0;
    double w = sol.x;
    double S = sol.model.s0;
    for (int k = 0; k < sol.model.n_steps; ++k) {
        const NodePolicy& pol = sol.policy[static_cast<std::size_t>(k)];
        double t = std::clamp(pi, pol.pi_low - widen, pol.pi_high + widen);
        t = std::clamp(t, pol.adm_lo, pol.adm_hi);
        const double wpost = w * trade_factor(pi, t, kappa);
        gamma[static_cast<std::size_t>(k)] = t * wpost / S;
        const LayerProfile& prof = sol.model.steps[static_cast<std::size_t>(k)];
        const int c = choices[static_cast<std::size_t>(k)];
        if (c < 0 || c >= static_cast<int>(prof.ratios.size()))
            throw std::invalid_argument("simulate_layer_path: branch out of range");
        const double r = prof.ratios[static_cast<std::size_t>(c)];
        const double side = t >= 0.0 ? 1.0 - kappa : 1.0 + kappa;
        const double g = 1.0 + side * t * (r - 1.0);
        pi = t * r / g;
        w = wpost * g;
        S *= r;
    }
    return gamma;
}

BandCheckStats check_shadow_band(const DpSolution& sol,
                                 const ScenarioTree& tree) {
    BandCheckStats st;
    const double kappa = sol.params.kappa;
    for (const TreeNode& node : tree.nodes) {
        const NodeState& ns = sol.state[static_cast<std::size_t>(node.id)];
        ++st.visited;
        const double bid = (1.0 - kappa) * node.price;
        const double ask = (1.0 + kappa) * node.price;
        const double slack = 1e-8 * node.price;
        if (ns.shadow >= bid - slack && ns.shadow <= ask + slack) ++st.band_ok;
        st.max_band_excess_rel = std::max(st.max_band_excess_rel, ns.shadow_excess);
        if (ns.shadow_flag) ++st.flagged;
        if (!tree.is_leaf(node.id) && ns.trades) {
            ++st.trading;
            const double want = ns.target > ns.pi ? ask : bid;
            if (std::fabs(ns.shadow - want) <= 1e-4 * node.price) ++st.comp_ok;
        }
    }
    return st;
}

BandCheckStats check_shadow_band_layered(const LayerSolution& sol,
                                         std::size_t state_cap) {
    BandCheckStats st;
    PositionGrid pg(sol.grid);
    const std::vector<double>& pts = pg.points();
    const double kappa = sol.params.kappa;

    std::vector<double> states{0.0};
    for (int k = 0; k <= sol.model.n_steps; ++k) {
        const bool leaf_layer = k == sol.model.n_steps;
        Pchip interp(pts, sol.h[static_cast<std::size_t>(k)]);
        for (double pi : states) {
            ++st.visited;
            bool trades = false;
            bool buying = false;
            double target = pi;
            if (!leaf_layer) {
                const NodePolicy& pol = sol.policy[static_cast<std::size_t>(k)];
                target = std::clamp(pi, pol.pi_low, pol.pi_high);
                trades = target != pi;
                buying = target > pi;
            }
            double h, dh;
            if (leaf_layer) {
                h = terminal_h(sol.utility);
                dh = 0.0;
            } else {
                h = interp.eval(pi);
                dh = interp.deriv(pi);
            }
            bool flag = false;
            double excess = 0.0;
            const double f = shadow_from_state(1.0, pi, trades, buying, h, dh,
                                               kappa, sol.utility, flag, excess);
            if (f >= 1.0 - kappa - 1e-8 && f <= 1.0 + kappa + 1e-8) ++st.band_ok;
            st.max_band_excess_rel = std::max(st.max_band_excess_rel, excess);
            if (flag) ++st.flagged;
            if (trades) {
                ++st.trading;
                const double want = buying ? 1.0 + kappa : 1.0 - kappa;
                if (std::fabs(f - want) <= 1e-4) ++st.comp_ok;
            }
        }
        if (leaf_layer) break;

        const NodePolicy& pol = sol.policy[static_cast<std::size_t>(k)];
        const LayerProfile& prof = sol.model.steps[static_cast<std::size_t>(k)];
        std::vector<double> next;
        next.reserve(states.size() * prof.ratios.size());
        for (double pi : states) {
            const double t = std::clamp(pi, pol.pi_low, pol.pi_high);
            for (double r : prof.ratios) {
                const double side = t >= 0.0 ? 1.0 - kappa : 1.0 + kappa;
                const double g = 1.0 + side * t * (r - 1.0);
                next.push_back(
                    std::clamp(t * r / g, sol.grid.pi_min, sol.grid.pi_max));
            }
        }
        std::sort(next.begin(), next.end());
        states.clear();
        for (double v : next) {
            if (!states.empty() &&
                std::fabs(v - states.back()) <= 1e-9 * (1.0 + std::fabs(v)))
                continue;
            states.push_back(v);
        }
        if (states.size() > state_cap) {
            states.resize(state_cap);
            st.truncated = true;
        }
    }
    return st;
}

}  // namespace tcostlab
