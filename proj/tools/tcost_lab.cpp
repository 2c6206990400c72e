#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tcostlab/dp_solver.hpp"
#include "tcostlab/dual_cps.hpp"
#include "tcostlab/experiment.hpp"
#include "tcostlab/friction.hpp"
#include "tcostlab/market_lattice.hpp"
#include "tcostlab/mz_metric.hpp"
#include "tcostlab/oracle.hpp"
#include "tcostlab/scenario_tree.hpp"
#include "tcostlab/utility.hpp"

namespace {

using nlohmann::ordered_json;
using namespace tcostlab;

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("TCOST_LAB_SEED");
    if (s == nullptr || *s == '\0') return std::nullopt;
    return std::strtoull(s, nullptr, 10);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

void emit(const ordered_json& j, const std::string& out_path) {
    const std::string text = j.dump(2) + "\n";
    if (out_path.empty())
        std::cout << text;
    else
        write_file(out_path, text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lattice laboratory for utility maximization under proportional trading costs"};
    app.require_subcommand(1);
    int rc = 0;

    // tree-gen
    auto* gen = app.add_subcommand("tree-gen", "generate a scenario tree file");
    std::string gen_model = "gbm", gen_out = "tree.json";
    int gen_n = 4, gen_branching = 2;
    double gen_s0 = 100.0, gen_mu = 0.0, gen_sigma = 0.2, gen_horizon = 1.0;
    double gen_hurst = 0.5, gen_scale = 0.2;
    std::uint64_t gen_seed = 0;
    gen->add_option("--model", gen_model, "gbm or fbm")
        ->check(CLI::IsMember({"gbm", "fbm"}));
    gen->add_option("--n", gen_n, "number of steps")->required();
    gen->add_option("--out", gen_out, "output path");
    gen->add_option("--s0", gen_s0, "initial price");
    gen->add_option("--mu", gen_mu, "drift (gbm)");
    gen->add_option("--sigma", gen_sigma, "volatility (gbm)");
    gen->add_option("--horizon", gen_horizon, "time horizon");
    gen->add_option("--hurst", gen_hurst, "roughness index (fbm)");
    gen->add_option("--scale", gen_scale, "volatility scale (fbm)");
    gen->add_option("--branching", gen_branching, "children per node (fbm)");
    gen->add_option("--seed", gen_seed, "stratification seed (fbm)");
    gen->callback([&] {
        ScenarioTree tree;
        if (gen_model == "gbm") {
            GbmSpec spec;
            spec.s0 = gen_s0;
            spec.mu = gen_mu;
            spec.sigma = gen_sigma;
            spec.horizon = gen_horizon;
            tree = build_binomial(spec, gen_n);
        } else {
            FbmSpec spec;
            spec.s0 = gen_s0;
            spec.hurst = gen_hurst;
            spec.scale = gen_scale;
            spec.horizon = gen_horizon;
            spec.branching = gen_branching;
            spec.seed = gen_seed;
            tree = build_fbm_tree(spec, gen_n);
        }
        save_tree(tree, gen_out);
        std::cout << "wrote " << gen_out << " (" << tree.size() << " nodes)\n";
    });

    // solve
    auto* sv = app.add_subcommand("solve", "backward induction on a tree file");
    std::string sv_tree, sv_utility = "log", sv_out, sv_strategy;
    double sv_x = 1.0, sv_kappa = 0.01;
    GridSpec sv_grid;
    sv->add_option("--tree", sv_tree, "tree file")->required();
    sv->add_option("--utility", sv_utility, "log or power:<p>");
    sv->add_option("--x", sv_x, "initial capital");
    sv->add_option("--kappa", sv_kappa, "proportional cost");
    sv->add_option("--grid", sv_grid.n_points, "position grid points");
    sv->add_option("--pi-min", sv_grid.pi_min, "lower grid bound");
    sv->add_option("--pi-max", sv_grid.pi_max, "upper grid bound");
    sv->add_option("--out", sv_out, "solution JSON path (default stdout)");
    sv->add_option("--strategy", sv_strategy, "also write the holdings file");
    sv->callback([&] {
        const ScenarioTree tree = load_tree(sv_tree);
        FrictionParams par;
        par.kappa = sv_kappa;
        const DpSolution sol =
            solve(tree, UtilitySpec::parse(sv_utility), sv_x, par, sv_grid);
        ordered_json j;
        j["value"] = sol.value;
        j["utility"] = sol.utility.to_string();
        j["x"] = sol.x;
        j["kappa"] = par.kappa;
        j["layered"] = sol.layered;
        j["nodes"] = ordered_json::array();
        for (const TreeNode& node : tree.nodes) {
            const NodeState& st = sol.state[static_cast<std::size_t>(node.id)];
            const NodePolicy& pol = sol.policy[static_cast<std::size_t>(node.id)];
            ordered_json nj;
            nj["id"] = node.id;
            nj["time"] = node.time_index;
            nj["pi"] = st.pi;
            nj["target"] = st.target;
            nj["trades"] = st.trades;
            if (tree.is_leaf(node.id))
                nj["no_trade"] = nullptr;
            else
                nj["no_trade"] = {pol.pi_low, pol.pi_high};
            nj["shadow"] = st.shadow;
            nj["flag"] = st.shadow_flag;
            j["nodes"].push_back(nj);
        }
        emit(j, sv_out);
        if (!sv_strategy.empty())
            save_strategy(extract_strategy(sol, tree, sv_x), sv_strategy);
    });

    // cps-check
    auto* cc = app.add_subcommand("cps-check",
                                  "frictionless pricing system inside a shrunken band");
    std::string cc_tree, cc_out;
    double cc_kappa = 0.0, cc_eps = -1.0, cc_qmin = 1e-6;
    cc->add_option("--tree", cc_tree, "tree file")->required();
    auto* cc_kappa_opt = cc->add_option("--kappa", cc_kappa, "friction level");
    auto* cc_eps_opt = cc->add_option("--eps", cc_eps, "band shrink amount");
    cc->add_option("--q-min", cc_qmin, "branch weight floor");
    cc->add_option("--out", cc_out, "output path (default stdout)");
    cc->callback([&] {
        const ScenarioTree tree = load_tree(cc_tree);
        // band half-width kappa - eps; --eps alone is read as the half-width
        double band = cc_eps;
        if (cc_kappa_opt->count() > 0) {
            if (cc_eps_opt->count() == 0) cc_eps = cc_kappa / 2.0;
            if (!(cc_eps >= 0.0 && cc_eps < cc_kappa))
                throw std::invalid_argument("cps-check: need 0 <= eps < kappa");
            band = cc_kappa - cc_eps;
        } else if (cc_eps_opt->count() == 0) {
            throw std::invalid_argument("cps-check: give --kappa, --eps, or both");
        }
        const CpsPropagation prop = propagate_bands(tree, band, cc_qmin);
        ordered_json j;
        j["feasible"] = prop.feasible;
        if (prop.feasible) {
            j["witness_node"] = nullptr;
            const CpsSystem sys = extract_cps(tree, prop, band, cc_qmin);
            const MartingaleCheck chk = verify_martingale(tree, sys, band);
            j["M"] = sys.M;
            j["q"] = sys.q;
            j["residual"] = chk.max_residual;
            j["band_violation"] = chk.max_band_violation;
        } else {
            j["witness_node"] = prop.witness_node;
        }
        j["kappa_eff_min"] = kappa_eff_min(tree, cc_qmin);
        emit(j, cc_out);
    });

    // mz-dist
    auto* mz = app.add_subcommand("mz-dist",
                                  "coupled path distance between two refinement levels");
    std::string mz_spec, mz_out;
    int mz_n = 0, mz_seeds = 0, mz_jobs = 1;
    mz->add_option("--spec", mz_spec, "experiment config file")->required();
    mz->add_option("--n", mz_n, "coarse level (pairs with 2n)")->required();
    mz->add_option("--seeds", mz_seeds, "sample count (default from config)");
    mz->add_option("--jobs", mz_jobs, "worker threads");
    mz->add_option("--out", mz_out, "output path (default stdout)");
    mz->callback([&] {
        ExperimentConfig cfg = config_from_json(read_file(mz_spec));
        if (!cfg.gbm)
            throw std::invalid_argument("mz-dist needs the up/down model");
        if (const auto s = env_seed()) cfg.seed = *s;
        const int seeds = mz_seeds > 0 ? mz_seeds : cfg.seeds;
        const LayerSolution coarse = solve_layers(
            layer_model(*cfg.gbm, mz_n), cfg.utility, cfg.x, cfg.params, cfg.grid);
        const LayerSolution fine =
            solve_layers(layer_model(*cfg.gbm, 2 * mz_n), cfg.utility, cfg.x,
                         cfg.params, cfg.grid);
        const MzEstimate est = coupled_mz_distance(fine, coarse, cfg.seed, seeds,
                                                   cfg.suboptimality, mz_jobs);
        ordered_json j;
        j["n"] = mz_n;
        j["n_pair"] = 2 * mz_n;
        j["mean"] = est.mean;
        j["stderr"] = est.std_error;
        j["seeds"] = est.seeds;
        emit(j, mz_out);
    });

    // oracle
    auto* orc = app.add_subcommand("oracle", "exhaustive grid search on a tree file");
    std::string orc_tree, orc_utility = "log", orc_out;
    double orc_x = 1.0, orc_kappa = 0.01, orc_delta = 0.0, orc_budget = 1e8;
    bool orc_refine = false, orc_unique = false;
    orc->add_option("--tree", orc_tree, "tree file")->required();
    orc->add_option("--utility", orc_utility, "log or power:<p>");
    orc->add_option("--x", orc_x, "initial capital");
    orc->add_option("--kappa", orc_kappa, "proportional cost");
    orc->add_option("--grid-delta", orc_delta, "share increment")->required();
    orc->add_option("--budget", orc_budget, "work budget in leaf visits");
    orc->add_flag("--refine", orc_refine, "halve the grid around the incumbent");
    orc->add_flag("--uniqueness", orc_unique, "probe isolation of the optimum");
    orc->add_option("--out", orc_out, "output path (default stdout)");
    orc->callback([&] {
        const ScenarioTree tree = load_tree(orc_tree);
        const UtilitySpec u = UtilitySpec::parse(orc_utility);
        FrictionParams par;
        par.kappa = orc_kappa;
        ordered_json j;
        auto strategy_map = [&](const GridStrategy& s) {
            ordered_json m = ordered_json::object();
            for (const TreeNode& node : tree.nodes)
                m[std::to_string(node.id)] =
                    s.gamma[static_cast<std::size_t>(node.id)];
            return m;
        };
        if (orc_refine) {
            const OracleRefineResult r = oracle_refine(tree, u, orc_x, par,
                                                       orc_delta, 1e-8, 5,
                                                       orc_budget);
            j["value"] = r.last.value;
            j["gamma"] = strategy_map(r.last.best);
            j["leaf_evals"] = r.last.leaf_evals;
            j["optima"] = r.last.optima;
            j["truncated"] = r.last.argmax_truncated;
            j["delta_final"] = r.delta_final;
            j["iters"] = r.iters;
            j["converged"] = r.converged;
        } else {
            const OracleResult r = enumerate_optimal(
                tree, u, orc_x, par, TradeGrid::centered(orc_delta), orc_budget);
            j["value"] = r.value;
            j["gamma"] = strategy_map(r.best);
            j["leaf_evals"] = r.leaf_evals;
            j["optima"] = r.optima;
            j["truncated"] = r.argmax_truncated;
        }
        if (orc_unique) {
            const std::vector<double> radii{0.5 * orc_delta, orc_delta,
                                            2.0 * orc_delta};
            const UniquenessReport rep =
                uniqueness_probe(tree, u, orc_x, par,
                                 TradeGrid::centered(orc_delta), radii, false, 1e7);
            ordered_json uq;
            uq["best_value"] = rep.best_value;
            uq["enumerated"] = rep.enumerated;
            uq["near_optimal"] = rep.near_optimal;
            uq["diameter"] = rep.diameter;
            uq["radii"] = rep.radii;
            uq["gaps"] = rep.gaps;
            uq["jittered"] = rep.jittered;
            j["uniqueness"] = uq;
        }
        emit(j, orc_out);
    });

    // run
    auto* rn = app.add_subcommand("run", "full study from a config file");
    std::string rn_config, rn_out;
    int rn_seeds = -1, rn_jobs = 1;
    rn->add_option("--config", rn_config, "config file")->required();
    rn->add_option("--out", rn_out, "output directory override");
    rn->add_option("--seeds", rn_seeds, "sample count override");
    rn->add_option("--jobs", rn_jobs, "worker threads");
    rn->callback([&] {
        ExperimentConfig cfg = config_from_json(read_file(rn_config));
        if (const auto s = env_seed()) cfg.seed = *s;
        const RunResult res = run(cfg, rn_out, rn_seeds, rn_jobs);
        const std::string dir = rn_out.empty() ? cfg.out_dir : rn_out;
        std::cout << "wrote " << res.files.size() << " files under " << dir << "\n";
    });

    // diff
    auto* df = app.add_subcommand("diff", "compare two report files");
    std::string df_a, df_b;
    df->add_option("a", df_a, "left report")->required();
    df->add_option("b", df_b, "right report")->required();
    df->callback([&] {
        const DiffResult d = diff_reports(read_file(df_a), read_file(df_b));
        for (const std::string& note : d.notes) std::cout << note << "\n";
        if (d.same) {
            std::cout << "reports agree\n";
        } else {
            std::cout << "reports differ\n";
            rc = 1;
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return rc;
}
