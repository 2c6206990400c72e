#include "tcostlab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "tcostlab/dual_cps.hpp"
#include "tcostlab/mz_metric.hpp"
#include "tcostlab/oracle.hpp"

namespace tcostlab {

using nlohmann::json;
using nlohmann::ordered_json;

double ExperimentConfig::eps_effective() const {
    return eps < 0.0 ? 0.5 * params.kappa : eps;
}

void ExperimentConfig::validate() const {
    if (gbm.has_value() == fbm.has_value())
        throw std::invalid_argument("config: exactly one model must be given");
    if (gbm) gbm->validate();
    if (fbm) fbm->validate();
    utility.validate();
    params.validate();
    grid.validate();
    if (!(x > 0.0)) throw std::invalid_argument("config: x must be positive");
    if (levels.empty())
        throw std::invalid_argument("config: levels must be nonempty");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] < 1)
            throw std::invalid_argument("config: levels must be positive");
        if (i > 0 && levels[i] <= levels[i - 1])
            throw std::invalid_argument("config: levels must be ascending");
    }
    if (seeds < 2) throw std::invalid_argument("config: need at least 2 seeds");
    if (!(suboptimality >= 0.0))
        throw std::invalid_argument("config: suboptimality must be >= 0");
    const double e = eps_effective();
    if (!(e > 0.0) || !(e < params.kappa))
        throw std::invalid_argument("config: eps must lie in (0, kappa)");
    if (toggles.mz) {
        if (!gbm)
            throw std::invalid_argument("config: coupled distances need the up/down model");
        for (std::size_t i = 1; i < levels.size(); ++i)
            if (levels[i] != 2 * levels[i - 1])
                throw std::invalid_argument("config: coupled distances need doubling levels");
    }
    if (out_dir.empty())
        throw std::invalid_argument("config: out_dir must be nonempty");
}

ExperimentConfig config_from_json(const std::string& text) {
    json j = json::parse(text);
    ExperimentConfig cfg;
    const json& model = j.at("model");
    const std::string kind = model.at("kind").get<std::string>();
    if (kind == "gbm") {
        GbmSpec g;
        g.s0 = model.value("s0", g.s0);
        g.mu = model.value("mu", g.mu);
        g.sigma = model.value("sigma", g.sigma);
        g.horizon = model.value("horizon", g.horizon);
        cfg.gbm = g;
    } else if (kind == "fbm") {
        FbmSpec f;
        f.s0 = model.value("s0", f.s0);
        f.hurst = model.value("hurst", f.hurst);
        f.scale = model.value("scale", f.scale);
        f.horizon = model.value("horizon", f.horizon);
        f.branching = model.value("branching", f.branching);
        f.seed = model.value("seed", f.seed);
        cfg.fbm = f;
    } else {
        throw std::invalid_argument("config: unknown model kind " + kind);
    }
    cfg.utility = UtilitySpec::parse(j.at("utility").get<std::string>());
    cfg.x = j.value("x", cfg.x);
    cfg.params.kappa = j.at("kappa").get<double>();
    cfg.eps = j.value("eps", cfg.eps);
    cfg.levels = j.at("levels").get<std::vector<int>>();
    cfg.seeds = j.value("seeds", cfg.seeds);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("grid")) {
        const json& g = j["grid"];
        cfg.grid.n_points = g.value("n_points", cfg.grid.n_points);
        cfg.grid.pi_min = g.value("pi_min", cfg.grid.pi_min);
        cfg.grid.pi_max = g.value("pi_max", cfg.grid.pi_max);
    }
    if (j.contains("toggles")) {
        const json& t = j["toggles"];
        cfg.toggles.mz = t.value("mz", cfg.toggles.mz);
        cfg.toggles.cps = t.value("cps", cfg.toggles.cps);
        cfg.toggles.uniqueness = t.value("uniqueness", cfg.toggles.uniqueness);
        cfg.toggles.self_consistency =
            t.value("self_consistency", cfg.toggles.self_consistency);
    }
    cfg.suboptimality = j.value("suboptimality", cfg.suboptimality);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.validate();
    return cfg;
}

namespace {

ordered_json config_json(const ExperimentConfig& cfg) {
    ordered_json j;
    ordered_json model;
    if (cfg.gbm) {
        model["kind"] = "gbm";
        model["s0"] = cfg.gbm->s0;
        model["mu"] = cfg.gbm->mu;
        model["sigma"] = cfg.gbm->sigma;
        model["horizon"] = cfg.gbm->horizon;
    } else {
        model["kind"] = "fbm";
        model["s0"] = cfg.fbm->s0;
        model["hurst"] = cfg.fbm->hurst;
        model["scale"] = cfg.fbm->scale;
        model["horizon"] = cfg.fbm->horizon;
        model["branching"] = cfg.fbm->branching;
        model["seed"] = cfg.fbm->seed;
    }
    j["model"] = model;
    j["utility"] = cfg.utility.to_string();
    j["x"] = cfg.x;
    j["kappa"] = cfg.params.kappa;
    j["eps"] = cfg.eps_effective();
    j["levels"] = cfg.levels;
    j["seeds"] = cfg.seeds;
    j["seed"] = cfg.seed;
    j["grid"] = {{"n_points", cfg.grid.n_points},
                 {"pi_min", cfg.grid.pi_min},
                 {"pi_max", cfg.grid.pi_max}};
    j["toggles"] = {{"mz", cfg.toggles.mz},
                    {"cps", cfg.toggles.cps},
                    {"uniqueness", cfg.toggles.uniqueness},
                    {"self_consistency", cfg.toggles.self_consistency}};
    j["suboptimality"] = cfg.suboptimality;
    j["out_dir"] = cfg.out_dir;
    return j;
}

void write_text(const std::filesystem::path& path, const std::string& text,
                std::vector<std::string>& files, const std::string& name) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    files.push_back(name);
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
    return config_json(cfg).dump(2) + "\n";
}

RunResult run(const ExperimentConfig& cfg, const std::string& out_dir_override,
              int seeds_override, int jobs) {
    cfg.validate();
    if (seeds_override == 0 || seeds_override == 1 || seeds_override < -1)
        throw std::invalid_argument("run: seeds override must be -1 or >= 2");
    if (jobs < 1) throw std::invalid_argument("run: jobs must be >= 1");
    const int seeds = seeds_override > 0 ? seeds_override : cfg.seeds;
    const std::filesystem::path out =
        out_dir_override.empty() ? cfg.out_dir : out_dir_override;
    std::filesystem::create_directories(out);

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> files;
    std::string stage = "values";

    auto manifest = [&](const std::string& status, const std::string& failed) {
        ordered_json m;
        m["status"] = status;
        if (failed.empty())
            m["failed_stage"] = nullptr;
        else
            m["failed_stage"] = failed;
        m["files"] = files;
        m["wall_ms"] = static_cast<long long>(
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - t0)
                .count());
        std::ofstream ms(out / "MANIFEST.json", std::ios::binary);
        ms << m.dump(2) << "\n";
    };

    try {
        ordered_json report;
        report["schema_version"] = 1;
        report["config"] = config_json(cfg);

        // per-level certainty equivalents of the solved objective
        std::vector<double> values(cfg.levels.size());
        std::map<int, LayerSolution> layer_sols;
        for (std::size_t i = 0; i < cfg.levels.size(); ++i) {
            const int n = cfg.levels[i];
            if (cfg.gbm) {
                LayerSolution ls = solve_layers(layer_model(*cfg.gbm, n),
                                                cfg.utility, cfg.x, cfg.params,
                                                cfg.grid);
                values[i] = ls.value;
                layer_sols.emplace(n, std::move(ls));
            } else {
                const ScenarioTree tree = build_fbm_tree(*cfg.fbm, n);
                values[i] =
                    solve(tree, cfg.utility, cfg.x, cfg.params, cfg.grid).value;
            }
        }
        report["values"] = ordered_json::array();
        for (std::size_t i = 0; i < cfg.levels.size(); ++i)
            report["values"].push_back(
                {{"n", cfg.levels[i]}, {"u", values[i]}});

        stage = "deltas";
        report["deltas"] = ordered_json::array();
        for (std::size_t i = 0; i + 1 < cfg.levels.size(); ++i)
            report["deltas"].push_back({{"n", cfg.levels[i]},
                                        {"n_next", cfg.levels[i + 1]},
                                        {"delta", std::fabs(values[i + 1] - values[i])}});

        stage = "mz";
        report["mz"] = ordered_json::array();
        if (cfg.toggles.mz) {
            for (std::size_t i = 0; i + 1 < cfg.levels.size(); ++i) {
                const MzEstimate est = coupled_mz_distance(
                    layer_sols.at(cfg.levels[i + 1]), layer_sols.at(cfg.levels[i]),
                    cfg.seed, seeds, cfg.suboptimality, jobs);
                report["mz"].push_back({{"n", cfg.levels[i]},
                                        {"n_pair", cfg.levels[i + 1]},
                                        {"mean", est.mean},
                                        {"stderr", est.std_error},
                                        {"seeds", est.seeds}});
            }
        }

        stage = "cps";
        if (cfg.toggles.cps) {
            const double ke = cfg.eps_effective();
            ordered_json cps;
            cps["kappa_eff"] = ke;
            ordered_json lv = ordered_json::array();
            int threshold = 0;
            if (cfg.gbm) {
                for (int n : cfg.levels)
                    lv.push_back({{"n", n},
                                  {"feasible",
                                   layered_cps_feasible(layer_model(*cfg.gbm, n), ke)}});
                for (int n = 1; n <= cfg.levels.back(); ++n)
                    if (layered_cps_feasible(layer_model(*cfg.gbm, n), ke)) {
                        threshold = n;
                        break;
                    }
                cps["kappa_eff_min"] =
                    kappa_eff_min(layer_model(*cfg.gbm, cfg.levels.back()));
            } else {
                for (int n : cfg.levels) {
                    const ScenarioTree tree = build_fbm_tree(*cfg.fbm, n);
                    const bool ok = propagate_bands(tree, ke).feasible;
                    lv.push_back({{"n", n}, {"feasible", ok}});
                    if (threshold == 0 && ok) threshold = n;
                }
                cps["kappa_eff_min"] =
                    kappa_eff_min(build_fbm_tree(*cfg.fbm, cfg.levels.front()));
            }
            cps["threshold"] = threshold;
            cps["levels"] = lv;
            report["cps"] = cps;
        } else {
            report["cps"] = nullptr;
        }

        stage = "uniqueness";
        if (cfg.toggles.uniqueness) {
            const int n0 = cfg.levels.front();
            const ScenarioTree tree = cfg.gbm ? build_binomial(*cfg.gbm, n0)
                                              : build_fbm_tree(*cfg.fbm, n0);
            std::size_t nonterm = 0;
            for (const TreeNode& node : tree.nodes)
                if (!tree.is_leaf(node.id)) ++nonterm;
            const double assignments = std::pow(5.0, static_cast<double>(nonterm));
            if (assignments > 1e7) {
                report["uniqueness"] = {{"skipped", true}, {"reason", "budget"}};
            } else {
                const double s0 = cfg.gbm ? cfg.gbm->s0 : cfg.fbm->s0;
                const double delta = 0.25 * cfg.x / s0;
                const std::vector<double> radii{0.5 * delta, delta, 2.0 * delta};
                const UniquenessReport rep = uniqueness_probe(
                    tree, cfg.utility, cfg.x, cfg.params,
                    TradeGrid::centered(delta), radii, false, 1e7);
                ordered_json u;
                u["skipped"] = false;
                u["best_value"] = rep.best_value;
                u["enumerated"] = rep.enumerated;
                u["argmax_count"] = rep.argmax_count;
                u["near_optimal"] = rep.near_optimal;
                u["diameter"] = rep.diameter;
                u["radii"] = rep.radii;
                u["gaps"] = rep.gaps;
                u["jittered"] = rep.jittered;
                report["uniqueness"] = u;
            }
        } else {
            report["uniqueness"] = nullptr;
        }

        stage = "self_consistency";
        if (cfg.toggles.self_consistency && cfg.gbm) {
            const int n0 = cfg.levels.front();
            const ScenarioTree tree = build_binomial(*cfg.gbm, n0);
            const DpSolution sol =
                solve(tree, cfg.utility, cfg.x, cfg.params, cfg.grid);
            report["self_consistency"] = {
                {"n", n0}, {"abs_diff", std::fabs(sol.value - values.front())}};
        } else {
            report["self_consistency"] = nullptr;
        }

        report["suboptimality"] = cfg.suboptimality;

        stage = "artifacts";
        {
            std::string csv = "n,u\n";
            for (std::size_t i = 0; i < cfg.levels.size(); ++i)
                csv += std::to_string(cfg.levels[i]) + "," + num(values[i]) + "\n";
            write_text(out / "values.csv", csv, files, "values.csv");
        }
        {
            std::string csv = "n,n_next,delta\n";
            for (std::size_t i = 0; i + 1 < cfg.levels.size(); ++i)
                csv += std::to_string(cfg.levels[i]) + "," +
                       std::to_string(cfg.levels[i + 1]) + "," +
                       num(std::fabs(values[i + 1] - values[i])) + "\n";
            write_text(out / "deltas.csv", csv, files, "deltas.csv");
        }
        if (cfg.toggles.cps) {
            std::string csv = "n,feasible,kappa_eff,threshold\n";
            for (const auto& row : report["cps"]["levels"])
                csv += std::to_string(row["n"].get<int>()) + "," +
                       std::string(row["feasible"].get<bool>() ? "1" : "0") + "," +
                       num(report["cps"]["kappa_eff"].get<double>()) + "," +
                       std::to_string(report["cps"]["threshold"].get<int>()) + "\n";
            write_text(out / "cps.csv", csv, files, "cps.csv");
        }
        if (cfg.toggles.mz) {
            std::string csv = "n,n_pair,mean,stderr,seeds\n";
            for (const auto& row : report["mz"])
                csv += std::to_string(row["n"].get<int>()) + "," +
                       std::to_string(row["n_pair"].get<int>()) + "," +
                       num(row["mean"].get<double>()) + "," +
                       num(row["stderr"].get<double>()) + "," +
                       std::to_string(row["seeds"].get<int>()) + "\n";
            write_text(out / "mz.csv", csv, files, "mz.csv");
        }

        RunResult res;
        res.report = report.dump(2) + "\n";
        write_text(out / "report.json", res.report, files, "report.json");
        res.files = files;
        manifest("OK", "");
        return res;
    } catch (...) {
        manifest("INCOMPLETE", stage);
        throw;
    }
}

namespace {

bool num_close(double a, double b) {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) == std::isnan(b);
    if (std::isinf(a) || std::isinf(b)) return a == b;
    return std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)});
}

void diff_walk(const json& a, const json& b, const std::string& path,
               DiffResult& out) {
    if (a.type() != b.type()) {
        // integer vs floating point with equal value is not a difference
        if (a.is_number() && b.is_number()) {
            if (!num_close(a.get<double>(), b.get<double>()))
                out.notes.push_back(path + ": " + a.dump() + " vs " + b.dump());
            return;
        }
        out.notes.push_back(path + ": type mismatch");
        return;
    }
    if (a.is_object()) {
        const bool mc_pair = a.contains("mean") && a.contains("stderr") &&
                             b.contains("mean") && b.contains("stderr") &&
                             a["mean"].is_number() && b["mean"].is_number();
        for (auto it = a.begin(); it != a.end(); ++it) {
            if (!b.contains(it.key())) {
                out.notes.push_back(path + "/" + it.key() + ": missing on right");
                continue;
            }
            if (it.key() == "stderr") continue;  // sampling noise descriptor
            if (mc_pair && it.key() == "mean") {
                const double am = a["mean"].get<double>();
                const double bm = b["mean"].get<double>();
                const double sa = a["stderr"].get<double>();
                const double sb = b["stderr"].get<double>();
                const double tol = 3.0 * std::sqrt(sa * sa + sb * sb);
                if (std::fabs(am - bm) > tol)
                    out.notes.push_back(path + "/mean: " + std::to_string(am) +
                                        " vs " + std::to_string(bm) +
                                        " beyond 3 stderr");
                continue;
            }
            diff_walk(it.value(), b[it.key()], path + "/" + it.key(), out);
        }
        for (auto it = b.begin(); it != b.end(); ++it)
            if (!a.contains(it.key()))
                out.notes.push_back(path + "/" + it.key() + ": missing on left");
        return;
    }
    if (a.is_array()) {
        if (a.size() != b.size()) {
            out.notes.push_back(path + ": length " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
            return;
        }
        for (std::size_t i = 0; i < a.size(); ++i)
            diff_walk(a[i], b[i], path + "[" + std::to_string(i) + "]", out);
        return;
    }
    if (a.is_number()) {
        if (!num_close(a.get<double>(), b.get<double>()))
            out.notes.push_back(path + ": " + a.dump() + " vs " + b.dump());
        return;
    }
    if (a != b) out.notes.push_back(path + ": " + a.dump() + " vs " + b.dump());
}

}  // namespace

DiffResult diff_reports(const std::string& a_text, const std::string& b_text) {
    DiffResult out;
    json a, b;
    try {
        a = json::parse(a_text);
        b = json::parse(b_text);
    } catch (const json::parse_error& e) {
        out.schema_ok = false;
        out.same = false;
        out.notes.push_back(std::string("parse error: ") + e.what());
        return out;
    }
    if (!a.contains("schema_version") || !b.contains("schema_version") ||
        a["schema_version"] != b["schema_version"]) {
        out.schema_ok = false;
        out.same = false;
        out.notes.push_back("schema_version mismatch");
        return out;
    }
    diff_walk(a, b, "", out);
    out.same = out.notes.empty();
    return out;
}

}  // namespace tcostlab
