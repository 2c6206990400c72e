#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "support/closed_form.hpp"
#include "support/random_instances.hpp"
#include "tcostlab/dp_solver.hpp"
#include "tcostlab/market_lattice.hpp"
#include "tcostlab/pchip.hpp"

using namespace tcostlab;

namespace {

GbmSpec gbm(double mu, double sigma = 0.2) {
    GbmSpec spec;
    spec.mu = mu;
    spec.sigma = sigma;
    return spec;
}

}  // namespace

TEST_CASE("position grid holds zero exactly and spans the requested range") {
    GridSpec spec;
    const PositionGrid grid(spec);
    const auto& pts = grid.points();
    REQUIRE(static_cast<int>(pts.size()) == spec.n_points);
    CHECK(pts.front() == spec.pi_min);
    CHECK(pts.back() == spec.pi_max);
    CHECK(pts[grid.zero_index()] == 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i] > pts[i - 1]);

    GridSpec bad = spec;
    bad.n_points = 10;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = spec;
    bad.pi_min = 0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = spec;
    bad.pi_max = -0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("trade factors price only band crossings") {
    const double k = 0.01;
    CHECK(trade_factor(0.5, 0.5, k) == 1.0);
    // selling a long down to zero is already priced by liquidation
    CHECK(trade_factor(1.0, 0.0, k) == 1.0);
    // covering a short likewise
    CHECK(trade_factor(-1.0, 0.0, k) == 1.0);
    // entering a long from flat pays the ask on the way in
    CHECK(trade_factor(0.0, 1.0, k) == doctest::Approx(1.0 / 1.02).epsilon(1e-15));
    // extending a long
    CHECK(trade_factor(1.0, 2.0, k) ==
          doctest::Approx(1.02 / 1.04).epsilon(1e-15));
    // entering a short
    CHECK(trade_factor(0.0, -1.0, k) ==
          doctest::Approx(1.0 / 1.02).epsilon(1e-15));
    for (double pi : {-0.5, 0.0, 0.7})
        for (double t : {-0.4, -0.1, 0.0, 0.5, 1.3})
            CHECK(trade_factor(pi, t, k) <= 1.0);
}

TEST_CASE("a nearly frictionless one step recovers the closed-form fraction") {
    const GbmSpec spec = gbm(0.05);
    const ScenarioTree tree = build_binomial(spec, 1);
    const BinomialStep st = binomial_step(spec, 1);
    const double target =
        tcsupport::one_step_fraction_log(st.u, st.d, st.p_up);
    REQUIRE(target == doctest::Approx(1.2775133496738453).epsilon(1e-14));

    const double x = 1.0;
    const DpSolution sol = solve(tree, UtilitySpec{}, x, FrictionParams{1e-9},
                                 GridSpec{});
    const GridStrategy strat = extract_strategy(sol, tree, x);
    const double fraction = strat.gamma[0] * tree.nodes[0].price / x;
    CHECK(fraction == doctest::Approx(target).epsilon(1e-6));

    // value of the frictionless optimum, computed straight from the lattice
    const double ref = st.p_up * std::log(1.0 + target * (st.u - 1.0)) +
                       (1.0 - st.p_up) * std::log(1.0 + target * (st.d - 1.0));
    CHECK(sol.value == doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("wide spreads on a quiet lattice leave the endowment untouched") {
    const ScenarioTree tree = build_binomial(gbm(0.0, 0.05), 2);
    for (const char* u : {"log", "power:0.5"}) {
        const UtilitySpec util = UtilitySpec::parse(u);
        const double x = 2.0;
        const DpSolution sol =
            solve(tree, util, x, FrictionParams{0.3}, GridSpec{});
        CHECK(sol.value == util(x));
        const GridStrategy strat = extract_strategy(sol, tree, x);
        for (double g : strat.gamma) CHECK(g == 0.0);
        for (const NodeState& st : sol.state) CHECK(!st.trades);
        // the hold interval contains the flat state
        CHECK(sol.policy[0].pi_low <= 0.0);
        CHECK(sol.policy[0].pi_high >= 0.0);
    }
}

TEST_CASE("a driftless lattice is solved by never trading, exactly") {
    const LayerModel model = layer_model(gbm(0.0), 16);
    const LayerSolution ls =
        solve_layers(model, UtilitySpec{}, 1.0, FrictionParams{0.01}, GridSpec{});
    CHECK(ls.value == 0.0);
    for (const NodePolicy& pol : ls.policy) {
        CHECK(pol.pi_low <= 0.0);
        CHECK(pol.pi_high >= 0.0);
    }

    const ScenarioTree tree = build_binomial(gbm(0.0), 6);
    const DpSolution sol =
        solve(tree, UtilitySpec{}, 1.0, FrictionParams{0.01}, GridSpec{});
    CHECK(sol.value == 0.0);
    CHECK(sol.layered);
    for (const NodeState& st : sol.state) {
        CHECK(st.pi == 0.0);
        CHECK(st.target == 0.0);
        CHECK(!st.trades);
    }
}

TEST_CASE("power utility scales out of the wealth argument") {
    const ScenarioTree tree = build_binomial(gbm(0.05), 3);
    const UtilitySpec util = UtilitySpec::parse("power:0.5");
    const FrictionParams params{0.02};
    const DpSolution base = solve(tree, util, 1.0, params, GridSpec{});
    for (double lam : {0.5, 2.0, 10.0}) {
        const DpSolution scaled = solve(tree, util, lam, params, GridSpec{});
        const double expected = std::pow(lam, util.p) * base.value;
        CHECK(std::fabs(scaled.value - expected) <=
              1e-10 * std::fabs(expected));
        for (std::size_t i = 0; i < base.state.size(); ++i)
            CHECK(scaled.state[i].target == base.state[i].target);
        const GridStrategy a = extract_strategy(base, tree, 1.0);
        const GridStrategy b = extract_strategy(scaled, tree, lam);
        for (std::size_t i = 0; i < a.gamma.size(); ++i)
            CHECK(std::fabs(b.gamma[i] - lam * a.gamma[i]) <=
                  1e-10 * std::max(1.0, std::fabs(lam * a.gamma[i])));
    }
}

TEST_CASE("value rises with wealth and falls with the spread") {
    const ScenarioTree tree = build_binomial(gbm(0.05), 3);
    const UtilitySpec util;
    const DpSolution lo = solve(tree, util, 0.5, FrictionParams{0.05}, GridSpec{});
    const DpSolution mid = solve(tree, util, 1.0, FrictionParams{0.05}, GridSpec{});
    const DpSolution hi = solve(tree, util, 2.0, FrictionParams{0.05}, GridSpec{});
    CHECK(lo.value < mid.value);
    CHECK(mid.value < hi.value);

    double prev = 1e300;
    for (double k : {0.001, 0.01, 0.05, 0.2}) {
        const double v = solve(tree, util, 1.0, FrictionParams{k}, GridSpec{}).value;
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
    CHECK(solve(tree, util, 1.0, FrictionParams{0.001}, GridSpec{}).value >
          solve(tree, util, 1.0, FrictionParams{0.2}, GridSpec{}).value);
}

TEST_CASE("extracted strategies replay to the reported value") {
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL, 14ULL, 15ULL, 16ULL}) {
        const auto ins = tcsupport::random_instance(seed);
        const DpSolution sol =
            solve(ins.tree, ins.utility, ins.x, ins.params, GridSpec{});
        const GridStrategy strat = extract_strategy(sol, ins.tree, ins.x);
        const WealthLedger led =
            liquidation_value(ins.tree, strat, ins.params, ins.x);
        CHECK(is_admissible(led, ins.tree, ins.x).admissible);
        const double replay =
            replay_value(ins.tree, strat, ins.utility, ins.params, ins.x);
        CHECK(std::fabs(replay - sol.value) <=
              1e-6 * std::max(1.0, std::fabs(sol.value)));
    }
}

TEST_CASE("replay value agrees with a direct expectation over leaves") {
    const ScenarioTree tree = build_binomial(gbm(0.03), 2);
    GridStrategy s;
    s.gamma.assign(tree.size(), 0.0);
    s.gamma[0] = 0.004;
    s.gamma[1] = 0.006;
    s.gamma[2] = 0.001;
    const UtilitySpec util;
    const FrictionParams params{0.05};
    const double x = 1.0;
    const WealthLedger led = liquidation_value(tree, s, params, x);
    const auto prob = tree.node_probabilities();
    double expect = 0.0;
    for (int leaf : tree.leaves())
        expect += prob[leaf] * util(x + led.value[leaf]);
    CHECK(replay_value(tree, s, util, params, x) ==
          doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("a cramped grid still solves consistently, at a lower value") {
    const ScenarioTree tree = build_binomial(gbm(0.05), 2);
    GridSpec cramped;
    cramped.n_points = 41;
    cramped.pi_max = 0.5;
    cramped.pi_min = -0.2;
    const DpSolution narrow =
        solve(tree, UtilitySpec{}, 1.0, FrictionParams{0.001}, cramped);
    const DpSolution wide =
        solve(tree, UtilitySpec{}, 1.0, FrictionParams{0.001}, GridSpec{});
    CHECK(narrow.value < wide.value);
    const GridStrategy strat = extract_strategy(narrow, tree, 1.0);
    CHECK(std::fabs(replay_value(tree, strat, UtilitySpec{},
                                 FrictionParams{0.001}, 1.0) -
                    narrow.value) <= 1e-6);
}

TEST_CASE("shadow prices sit on the ask at buying nodes") {
    const ScenarioTree tree = build_binomial(gbm(0.05), 1);
    const FrictionParams params{0.01};
    const DpSolution sol = solve(tree, UtilitySpec{}, 1.0, params, GridSpec{});
    REQUIRE(sol.state[0].trades);
    CHECK(sol.state[0].target > 0.0);
    const std::vector<double> shadow = extract_shadow_price(sol, tree);
    CHECK(shadow[0] == doctest::Approx(params.ask(100.0)).epsilon(1e-12));
    CHECK(!sol.state[0].shadow_flag);
}

TEST_CASE("shadow prices collapse to the mid price as the spread closes") {
    const ScenarioTree tree = build_binomial(gbm(0.05), 2);
    const DpSolution sol =
        solve(tree, UtilitySpec{}, 1.0, FrictionParams{1e-9}, GridSpec{});
    const std::vector<double> shadow = extract_shadow_price(sol, tree);
    for (const TreeNode& node : tree.nodes)
        CHECK(std::fabs(shadow[node.id] - node.price) <= 1e-6 * node.price);
}

TEST_CASE("shadow prices stay inside the band on random instances") {
    for (std::uint64_t seed : {21ULL, 22ULL, 23ULL, 24ULL}) {
        const auto ins = tcsupport::random_instance(seed);
        const DpSolution sol =
            solve(ins.tree, ins.utility, ins.x, ins.params, GridSpec{});
        const BandCheckStats stats = check_shadow_band(sol, ins.tree);
        CHECK(stats.visited > 0);
        CHECK(stats.band_ok == stats.visited);
        CHECK(stats.comp_ok == stats.trading);
        CHECK(stats.max_band_excess_rel <= 1e-8);
    }
}

TEST_CASE("the layered band audit covers reachable states") {
    const LayerSolution quiet = solve_layers(
        layer_model(gbm(0.0), 8), UtilitySpec{}, 1.0, FrictionParams{0.01},
        GridSpec{});
    const BandCheckStats qs = check_shadow_band_layered(quiet);
    CHECK(!qs.truncated);
    CHECK(qs.visited == 9);  // one flat state per layer
    CHECK(qs.trading == 0);
    CHECK(qs.band_ok == qs.visited);

    const LayerSolution busy = solve_layers(
        layer_model(gbm(0.05), 8), UtilitySpec{}, 1.0, FrictionParams{0.01},
        GridSpec{});
    const BandCheckStats bs = check_shadow_band_layered(busy);
    CHECK(!bs.truncated);
    CHECK(bs.visited >= 9);
    CHECK(bs.trading > 0);
    CHECK(bs.band_ok == bs.visited);
    CHECK(bs.comp_ok == bs.trading);
    CHECK(bs.flagged == 0);
}

TEST_CASE("finite differences of the value table reproduce the shadow price") {
    // value of a root endowment (cash c, shares g):
    //   J = U(w) composed with the time-0 table row, w the liquidation wealth
    const double s = 100.0;
    const auto make_j = [s](const LayerSolution& ls) {
        const PositionGrid grid(ls.grid);
        const Pchip h0(grid.points(), ls.h[0]);
        const double k = ls.params.kappa;
        return [s, k, h0](double c, double g) {
            const double w = c + (g >= 0.0 ? (1.0 - k) : (1.0 + k)) * s * g;
            return std::log(w) + h0.eval(g * s / w);
        };
    };

    // a state deep in the buy region: the slope ratio sees the ask
    {
        const LayerSolution ls = solve_layers(
            layer_model(gbm(0.05), 4), UtilitySpec{}, 1.0, FrictionParams{0.01},
            GridSpec{});
        const auto j = make_j(ls);
        CHECK(j(1.0, 0.0) == doctest::Approx(ls.value).epsilon(1e-12));
        REQUIRE(ls.policy[0].pi_low > 0.6);
        const double dg = 1e-6, dc = 1e-6;
        const double g0 = 0.5 / (s * (1.0 - 0.99 * 0.5));  // state fraction 0.5
        const double jg = (j(1.0, g0 + dg) - j(1.0, g0 - dg)) / (2.0 * dg);
        const double jc = (j(1.0 + dc, g0) - j(1.0 - dc, g0)) / (2.0 * dc);
        CHECK(jg / jc == doctest::Approx(101.0).epsilon(1e-3));
    }

    // quiet root: the slope from above sees the bid, from below the ask
    {
        const LayerSolution ls = solve_layers(
            layer_model(gbm(0.0), 4), UtilitySpec{}, 1.0, FrictionParams{0.3},
            GridSpec{});
        const auto j = make_j(ls);
        const double dg = 1e-6, dc = 1e-6;
        for (double side : {1.0, -1.0}) {
            const double g0 = side * 3e-6;
            const double jg = (j(1.0, g0 + dg) - j(1.0, g0 - dg)) / (2.0 * dg);
            const double jc = (j(1.0 + dc, g0) - j(1.0 - dc, g0)) / (2.0 * dc);
            const double expect = side > 0 ? 70.0 : 130.0;
            CHECK(jg / jc == doctest::Approx(expect).epsilon(1e-3));
        }
    }
}

TEST_CASE("layer path simulation matches the extracted strategy") {
    const GbmSpec spec = gbm(0.05);
    const LayerModel model = layer_model(spec, 4);
    const UtilitySpec util;
    const FrictionParams params{0.01};
    const LayerSolution ls = solve_layers(model, util, 1.0, params, GridSpec{});
    const ScenarioTree tree = build_binomial(spec, 4);
    const DpSolution sol = solve(tree, util, 1.0, params, GridSpec{});
    REQUIRE(sol.layered);
    CHECK(sol.value == doctest::Approx(ls.value).epsilon(1e-14));
    const GridStrategy strat = extract_strategy(sol, tree, 1.0);

    for (const std::vector<int>& choices :
         {std::vector<int>{0, 0, 0, 0}, std::vector<int>{0, 1, 0, 1},
          std::vector<int>{1, 1, 1, 1}}) {
        const std::vector<double> gam = simulate_layer_path(ls, choices);
        int node = 0;
        for (std::size_t k = 0; k < choices.size(); ++k) {
            CHECK(gam[k] ==
                  doctest::Approx(strat.gamma[node]).epsilon(1e-10));
            node = tree.children(node)[choices[k]].child_id;
        }
    }
}

TEST_CASE("widened hold intervals trade less and lose value") {
    const LayerSolution ls = solve_layers(
        layer_model(gbm(0.05), 6), UtilitySpec{}, 1.0, FrictionParams{0.01},
        GridSpec{});
    const std::vector<int> choices{0, 1, 1, 0, 1, 0};
    const std::vector<double> tight = simulate_layer_path(ls, choices, 0.0);
    const std::vector<double> loose = simulate_layer_path(ls, choices, 0.2);
    bool differ = false;
    for (std::size_t k = 0; k < tight.size(); ++k)
        if (tight[k] != loose[k]) differ = true;
    CHECK(differ);
}

TEST_CASE("general and layered paths agree on homogeneous trees") {
    const GbmSpec spec = gbm(0.04);
    const ScenarioTree tree = build_binomial(spec, 4);
    const UtilitySpec util;
    const FrictionParams params{0.05};
    const DpSolution via_tree = solve(tree, util, 1.0, params, GridSpec{});
    REQUIRE(via_tree.layered);

    // break the layer profile so the general backward induction runs
    ScenarioTree bent = tree;
    bent.branches[1][0].p += 1e-6;
    bent.branches[1][1].p -= 1e-6;
    REQUIRE(!layer_model(bent).has_value());
    const DpSolution general = solve(bent, util, 1.0, params, GridSpec{});
    CHECK(!general.layered);
    CHECK(general.value ==
          doctest::Approx(via_tree.value).epsilon(1e-6));
    for (std::size_t i = 0; i < tree.size(); ++i)
        CHECK(general.state[i].target ==
              doctest::Approx(via_tree.state[i].target).epsilon(1e-5));
}
