#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "tcostlab/dp_solver.hpp"
#include "tcostlab/market_lattice.hpp"
#include "tcostlab/mz_metric.hpp"

using namespace tcostlab;

namespace {

MzPath step_path(double horizon, std::vector<double> times,
                 std::vector<double> values, double terminal) {
    MzPath p;
    p.horizon = horizon;
    p.times = std::move(times);
    p.values = std::move(values);
    p.terminal = terminal;
    p.validate();
    return p;
}

MzPath random_path(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> n_d(1, 6);
    std::uniform_real_distribution<double> v_d(-2.0, 2.0);
    const int n = n_d(rng);
    std::vector<double> times{0.0};
    std::uniform_real_distribution<double> t_d(0.01, 0.99);
    std::vector<double> raw;
    for (int i = 1; i < n; ++i) raw.push_back(t_d(rng));
    std::sort(raw.begin(), raw.end());
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (i == 0 || raw[i] > times.back() + 1e-6) times.push_back(raw[i]);
    std::vector<double> values;
    for (std::size_t i = 0; i < times.size(); ++i) values.push_back(v_d(rng));
    return step_path(1.0, times, values, v_d(rng));
}

}  // namespace

TEST_CASE("identical paths are at distance zero") {
    const MzPath f = step_path(1.0, {0.0, 0.4}, {1.0, -0.5}, 0.25);
    CHECK(d_mz(f, f) == 0.0);
}

TEST_CASE("unit separation saturates the integrand and adds the endpoint gap") {
    const MzPath zero = step_path(1.0, {0.0}, {0.0}, 0.0);
    const MzPath one = step_path(1.0, {0.0}, {1.0}, 1.0);
    CHECK(d_mz(zero, one) == doctest::Approx(2.0).epsilon(1e-15));
    // a five unit gap still counts one per unit time
    const MzPath five = step_path(1.0, {0.0}, {5.0}, 5.0);
    CHECK(d_mz(zero, five) == doctest::Approx(1.0 + 5.0).epsilon(1e-15));
}

TEST_CASE("a half-interval step integrates to its length plus the endpoint") {
    const MzPath zero = step_path(1.0, {0.0}, {0.0}, 0.0);
    const MzPath late = step_path(1.0, {0.0, 0.5}, {0.0, 1.0}, 1.0);
    CHECK(d_mz(zero, late) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("distances ignore redundant breakpoints bitwise") {
    const MzPath f = step_path(1.0, {0.0, 0.3, 0.7}, {0.5, -1.0, 2.0}, 0.0);
    const MzPath g = step_path(1.0, {0.0, 0.2, 0.6}, {1.0, 0.25, -0.75}, 0.5);
    MzPath f2 = f;
    f2.times = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9};
    f2.values = {0.5, 0.5, -1.0, -1.0, 2.0, 2.0};
    const double base = d_mz(f, g);
    CHECK(d_mz(f2, g) == base);
    CHECK(f2.canonical().times.size() == 3);
    CHECK(f2.canonical().values == f.values);
}

TEST_CASE("the metric is symmetric and satisfies the triangle inequality") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 2000; ++i) {
        const MzPath a = random_path(rng);
        const MzPath b = random_path(rng);
        const MzPath c = random_path(rng);
        const double ab = d_mz(a, b);
        CHECK(d_mz(b, a) == ab);
        CHECK(ab <= d_mz(a, c) + d_mz(c, b) + 1e-12);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0 * a.horizon + std::fabs(a.terminal) +
                        std::fabs(b.terminal) + 1e-12);
    }
}

TEST_CASE("horizon mismatches and malformed paths are rejected") {
    const MzPath f = step_path(1.0, {0.0}, {0.0}, 0.0);
    const MzPath g = step_path(2.0, {0.0}, {0.0}, 0.0);
    CHECK_THROWS_AS(d_mz(f, g), std::invalid_argument);

    MzPath bad;
    bad.horizon = 1.0;
    bad.times = {0.1};
    bad.values = {0.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.times = {0.0, 0.5, 0.5};
    bad.values = {0.0, 1.0, 2.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.times = {0.0, 1.5};
    bad.values = {0.0, 1.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("a held block liquidated at the end spans the whole horizon") {
    GbmSpec spec;
    spec.horizon = 0.7;
    const ScenarioTree tree = build_binomial(spec, 1);
    GridStrategy s;
    s.gamma = {2.0, 0.0, 0.0};
    const MzPath p = path_from_strategy(tree, s, 1);
    CHECK(p.times == std::vector<double>{0.0});
    CHECK(p.values == std::vector<double>{2.0});
    CHECK(p.terminal == 0.0);
    const MzPath zero = step_path(0.7, {0.0}, {0.0}, 0.0);
    CHECK(d_mz(p, zero) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK_THROWS_AS(path_from_strategy(tree, s, 0), std::invalid_argument);
}

TEST_CASE("strategy paths list the holdings along the chosen walk") {
    const ScenarioTree tree = build_binomial(GbmSpec{}, 2);
    GridStrategy s;
    s.gamma.assign(tree.size(), 0.0);
    s.gamma[0] = 1.0;
    s.gamma[1] = 0.5;   // up child
    s.gamma[2] = 1.5;   // down child
    const int up_up = tree.children(1)[0].child_id;
    const MzPath p = path_from_strategy(tree, s, up_up);
    CHECK(p.times == std::vector<double>{0.0, 0.5});
    CHECK(p.values == std::vector<double>{1.0, 0.5});
    CHECK(p.terminal == 0.0);
}

TEST_CASE("coupled estimates are deterministic and worker-count invariant") {
    GbmSpec spec;
    spec.mu = 0.05;
    const UtilitySpec util;
    const FrictionParams params{0.01};
    const LayerSolution coarse =
        solve_layers(layer_model(spec, 4), util, 1.0, params, GridSpec{});
    const LayerSolution fine =
        solve_layers(layer_model(spec, 8), util, 1.0, params, GridSpec{});
    const MzEstimate a = coupled_mz_distance(fine, coarse, 7, 200, 0.0, 1);
    const MzEstimate b = coupled_mz_distance(fine, coarse, 7, 200, 0.0, 4);
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
    CHECK(a.mean > 0.0);
    CHECK(a.std_error > 0.0);
    CHECK(a.seeds == 200);
    CHECK(a.n == 8);

    // a disjoint seed window draws a fresh sample
    const MzEstimate c = coupled_mz_distance(fine, coarse, 100003, 200, 0.0, 1);
    CHECK(c.mean != a.mean);
}

TEST_CASE("a quiet market couples to exactly zero distance") {
    const UtilitySpec util;
    const FrictionParams params{0.01};
    const GbmSpec spec;  // driftless
    const LayerSolution coarse =
        solve_layers(layer_model(spec, 4), util, 1.0, params, GridSpec{});
    const LayerSolution fine =
        solve_layers(layer_model(spec, 8), util, 1.0, params, GridSpec{});
    const MzEstimate est = coupled_mz_distance(fine, coarse, 3, 100);
    CHECK(est.mean == 0.0);
    CHECK(est.std_error == 0.0);
}

TEST_CASE("the refinement pairing demands a strict halving") {
    const UtilitySpec util;
    const FrictionParams params{0.01};
    const GbmSpec spec;
    const LayerSolution coarse =
        solve_layers(layer_model(spec, 4), util, 1.0, params, GridSpec{});
    const LayerSolution fine =
        solve_layers(layer_model(spec, 12), util, 1.0, params, GridSpec{});
    CHECK_THROWS_AS(coupled_mz_distance(fine, coarse, 1, 10),
                    std::invalid_argument);
}
