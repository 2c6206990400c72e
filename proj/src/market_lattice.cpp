#include "tcostlab/market_lattice.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "tcostlab/rng.hpp"

namespace tcostlab {

void GbmSpec::validate() const {
    if (!(s0 > 0.0)) throw std::invalid_argument("GbmSpec: s0 must be > 0");
    if (!(sigma > 0.0)) throw std::invalid_argument("GbmSpec: sigma must be > 0");
    if (!(horizon > 0.0)) throw std::invalid_argument("GbmSpec: horizon must be > 0");
    if (!std::isfinite(mu)) throw std::invalid_argument("GbmSpec: mu must be finite");
}

void FbmSpec::validate() const {
    if (!(s0 > 0.0)) throw std::invalid_argument("FbmSpec: s0 must be > 0");
    if (!(hurst > 0.0 && hurst < 1.0))
        throw std::invalid_argument("FbmSpec: hurst must be in (0,1)");
    if (!(scale > 0.0)) throw std::invalid_argument("FbmSpec: scale must be > 0");
    if (!(horizon > 0.0)) throw std::invalid_argument("FbmSpec: horizon must be > 0");
    if (branching < 2) throw std::invalid_argument("FbmSpec: branching must be >= 2");
}

void LayerModel::validate() const {
    if (n_steps < 1) throw std::invalid_argument("LayerModel: n_steps must be >= 1");
    if (!(horizon > 0.0) || !(s0 > 0.0))
        throw std::invalid_argument("LayerModel: horizon and s0 must be > 0");
    if (static_cast<int>(steps.size()) != n_steps)
        throw std::invalid_argument("LayerModel: one profile per step required");
    for (const auto& st : steps) {
        if (st.ratios.empty() || st.ratios.size() != st.probs.size())
            throw std::invalid_argument("LayerModel: malformed step profile");
        double sum = 0.0;
        for (std::size_t c = 0; c < st.ratios.size(); ++c) {
            if (!(st.ratios[c] > 0.0)) throw std::invalid_argument("LayerModel: ratios must be > 0");
            if (!(st.probs[c] > 0.0)) throw std::invalid_argument("LayerModel: probs must be > 0");
            sum += st.probs[c];
        }
        if (std::fabs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("LayerModel: step probabilities must sum to 1");
    }
}

BinomialStep binomial_step(const GbmSpec& spec, int n_steps) {
    spec.validate();
    if (n_steps < 1) throw std::invalid_argument("binomial_step: n_steps must be >= 1");
    BinomialStep st;
    st.dt = spec.horizon / n_steps;
    st.u = std::exp(spec.sigma * std::sqrt(st.dt));
    st.d = 1.0 / st.u;
    const double p_raw = (std::exp(spec.mu * st.dt) - st.d) / (st.u - st.d);
    if (p_raw < -0.1 || p_raw > 1.1)
        throw std::invalid_argument(
            "binomial_step: drift too large for the step (p = " + std::to_string(p_raw) + ")");
    st.p_up = std::min(1.0 - 1e-9, std::max(1e-9, p_raw));
    return st;
}

ScenarioTree build_binomial(const GbmSpec& spec, int n_steps, std::size_t node_budget) {
    const BinomialStep st = binomial_step(spec, n_steps);
    if (n_steps >= 62 || ((std::size_t{2} << n_steps) - 1) > node_budget)
        throw std::invalid_argument("build_binomial: node budget exceeded");
    const double a = spec.sigma * std::sqrt(st.dt);

    ScenarioTree t;
    t.n_steps = n_steps;
    t.horizon = spec.horizon;
    const std::size_t total = (std::size_t{2} << n_steps) - 1;
    t.nodes.reserve(total);
    t.branches.assign(total, {});
    // net up-minus-down exponent per node; prices depend on it alone, so the
    // up-down and down-up leaves coincide bitwise.
    std::vector<int> net;
    net.reserve(total);
    t.nodes.push_back({0, -1, 0, spec.s0});
    net.push_back(0);
    const double q_down = 1.0 - st.p_up;
    std::size_t layer_begin = 0, layer_end = 1;
    for (int k = 0; k < n_steps; ++k) {
        for (std::size_t i = layer_begin; i < layer_end; ++i) {
            const int parent = static_cast<int>(i);
            for (int c = 0; c < 2; ++c) {
                const int id = static_cast<int>(t.nodes.size());
                const int nn = net[i] + (c == 0 ? 1 : -1);
                t.nodes.push_back({id, parent, k + 1, spec.s0 * std::exp(a * nn)});
                net.push_back(nn);
                t.branches[parent].push_back({id, c == 0 ? st.p_up : q_down});
            }
        }
        layer_begin = layer_end;
        layer_end = t.nodes.size();
    }
    t.branches.resize(t.nodes.size());
    t.validate();
    return t;
}

namespace {

// Covariance of consecutive scaled fBm increments on an even grid.
Eigen::MatrixXd fbm_increment_cov(const FbmSpec& spec, int n_steps) {
    const double dt = spec.horizon / n_steps;
    const double v = spec.scale * spec.scale * std::pow(dt, 2.0 * spec.hurst);
    const double two_h = 2.0 * spec.hurst;
    Eigen::MatrixXd cov(n_steps, n_steps);
    for (int j = 0; j < n_steps; ++j)
        for (int k = 0; k < n_steps; ++k) {
            const double m = std::fabs(static_cast<double>(j - k));
            cov(j, k) = 0.5 * v *
                        (std::pow(m + 1.0, two_h) + std::pow(std::fabs(m - 1.0), two_h) -
                         2.0 * std::pow(m, two_h));
        }
    return cov;
}

} // namespace

ScenarioTree build_fbm_tree(const FbmSpec& spec, int n_steps, std::size_t node_budget) {
    spec.validate();
    if (n_steps < 1) throw std::invalid_argument("build_fbm_tree: n_steps must be >= 1");
    const std::size_t b = static_cast<std::size_t>(spec.branching);
    std::size_t leaves = 1, total = 1;
    for (int k = 0; k < n_steps; ++k) {
        if (leaves > node_budget / b)
            throw std::invalid_argument("build_fbm_tree: node budget exceeded");
        leaves *= b;
        total += leaves;
    }

    Eigen::MatrixXd cov = fbm_increment_cov(spec, n_steps);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        for (int j = 0; j < n_steps; ++j) cov(j, j) += 1e-12;
        llt.compute(cov);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("build_fbm_tree: covariance factorization failed");
    }
    const Eigen::MatrixXd L = llt.matrixL();

    ScenarioTree t;
    t.n_steps = n_steps;
    t.horizon = spec.horizon;
    t.nodes.reserve(total);
    t.branches.assign(total, {});
    t.nodes.push_back({0, -1, 0, spec.s0});
    // standard-normal path coordinates per node; increments are conditioned on
    // them through the Cholesky rows
    std::vector<std::vector<double>> z(total);
    std::vector<double> logx(total, 0.0);

    std::mt19937_64 eng(spec.seed);
    const double qb = 1.0 / static_cast<double>(b);
    std::size_t layer_begin = 0, layer_end = 1;
    for (int k = 0; k < n_steps; ++k) {
        for (std::size_t i = layer_begin; i < layer_end; ++i) {
            const int parent = static_cast<int>(i);
            double drift = 0.0;
            for (int j = 0; j < k; ++j) drift += L(k, j) * z[i][j];
            double psum = 0.0;
            for (std::size_t c = 0; c < b; ++c) {
                const int id = static_cast<int>(t.nodes.size());
                // one stratum per branch keeps children ordered and adapted
                const double ustrat = (static_cast<double>(c) + draw_unit(eng)) * qb;
                const double zc = normal_inv_cdf(ustrat);
                const double dx = drift + L(k, k) * zc;
                logx[id] = logx[i] + dx;
                t.nodes.push_back({id, parent, k + 1, spec.s0 * std::exp(logx[id])});
                z[id] = z[i];
                z[id].push_back(zc);
                const double p = (c + 1 == b) ? 1.0 - psum : qb;
                psum += qb;
                t.branches[parent].push_back({id, p});
            }
            z[i].clear();
            z[i].shrink_to_fit();
        }
        layer_begin = layer_end;
        layer_end = t.nodes.size();
    }
    t.branches.resize(t.nodes.size());
    t.validate();
    return t;
}

std::vector<ScenarioTree> refine(const GbmSpec& spec, const std::vector<int>& levels,
                                 std::size_t node_budget) {
    if (levels.empty()) throw std::invalid_argument("refine: empty level list");
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (levels[i] <= levels[i - 1])
            throw std::invalid_argument("refine: levels must be strictly increasing");
    std::vector<ScenarioTree> out;
    out.reserve(levels.size());
    for (int n : levels) out.push_back(build_binomial(spec, n, node_budget));
    return out;
}

LayerModel layer_model(const GbmSpec& spec, int n_steps) {
    const BinomialStep st = binomial_step(spec, n_steps);
    LayerModel m;
    m.n_steps = n_steps;
    m.horizon = spec.horizon;
    m.s0 = spec.s0;
    LayerProfile pr;
    pr.ratios = {st.u, st.d};
    pr.probs = {st.p_up, 1.0 - st.p_up};
    m.steps.assign(n_steps, pr);
    m.validate();
    return m;
}

std::optional<LayerModel> layer_model(const ScenarioTree& tree) {
    auto profiles = homogeneous_layers(tree);
    if (!profiles) return std::nullopt;
    LayerModel m;
    m.n_steps = tree.n_steps;
    m.horizon = tree.horizon;
    m.s0 = tree.nodes[0].price;
    m.steps = std::move(*profiles);
    m.validate();
    return m;
}

} // namespace tcostlab
