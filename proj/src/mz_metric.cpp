#include "tcostlab/mz_metric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "tcostlab/rng.hpp"

namespace tcostlab {

void MzPath::validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("MzPath: horizon must be positive");
    if (times.empty() || times.size() != values.size())
        throw std::invalid_argument("MzPath: times and values must align");
    if (times.front() != 0.0)
        throw std::invalid_argument("MzPath: path must start at time 0");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || !std::isfinite(values[i]))
            throw std::invalid_argument("MzPath: entries must be finite");
        if (i > 0 && !(times[i] > times[i - 1]))
            throw std::invalid_argument("MzPath: times must be strictly increasing");
    }
    if (!(times.back() < horizon))
        throw std::invalid_argument("MzPath: breakpoints must precede the horizon");
    if (!std::isfinite(terminal))
        throw std::invalid_argument("MzPath: terminal value must be finite");
}

MzPath MzPath::canonical() const {
    validate();
    MzPath out;
    out.horizon = horizon;
    out.terminal = terminal;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (i > 0 && values[i] == out.values.back()) continue;
        out.times.push_back(times[i]);
        out.values.push_back(values[i]);
    }
    return out;
}

double d_mz(const MzPath& f, const MzPath& g) {
    const MzPath a = f.canonical();
    const MzPath b = g.canonical();
    if (a.horizon != b.horizon)
        throw std::invalid_argument("d_mz: horizons differ");

    double acc = 0.0;
    std::size_t i = 0, j = 0;
    double t = 0.0;
    while (t < a.horizon) {
        const double va = a.values[i];
        const double vb = b.values[j];
        double next = a.horizon;
        if (i + 1 < a.times.size()) next = std::min(next, a.times[i + 1]);
        if (j + 1 < b.times.size()) next = std::min(next, b.times[j + 1]);
        acc += (next - t) * std::min(1.0, std::fabs(va - vb));
        t = next;
        while (i + 1 < a.times.size() && a.times[i + 1] <= t) ++i;
        while (j + 1 < b.times.size() && b.times[j + 1] <= t) ++j;
    }
    return acc + std::fabs(a.terminal - b.terminal);
}

MzPath path_from_strategy(const ScenarioTree& tree, const GridStrategy& s,
                          int leaf_id) {
    if (!tree.is_leaf(leaf_id))
        throw std::invalid_argument("path_from_strategy: node is not terminal");
    if (s.gamma.size() != tree.nodes.size())
        throw std::invalid_argument("path_from_strategy: strategy does not match tree");
    const std::vector<int> walk = tree.path_from_root(leaf_id);
    MzPath out;
    out.horizon = tree.horizon;
    const double dt = tree.dt();
    for (int k = 0; k < tree.n_steps; ++k) {
        out.times.push_back(k * dt);
        out.values.push_back(s.gamma[static_cast<std::size_t>(walk[static_cast<std::size_t>(k)])]);
    }
    out.terminal = s.gamma[static_cast<std::size_t>(leaf_id)];
    return out;
}

namespace {

MzPath path_from_gammas(const std::vector<double>& gamma, double horizon) {
    MzPath out;
    out.horizon = horizon;
    const double dt = horizon / static_cast<double>(gamma.size());
    for (std::size_t k = 0; k < gamma.size(); ++k) {
        out.times.push_back(static_cast<double>(k) * dt);
        out.values.push_back(gamma[k]);
    }
    out.terminal = 0.0;
    return out;
}

}  // namespace

MzEstimate coupled_mz_distance(const LayerSolution& fine,
                               const LayerSolution& coarse,
                               std::uint64_t base_seed, int seeds,
                               double widen, int jobs) {
    fine.model.validate();
    coarse.model.validate();
    if (fine.model.n_steps != 2 * coarse.model.n_steps)
        throw std::invalid_argument("coupled_mz_distance: levels must double");
    if (std::fabs(fine.model.horizon - coarse.model.horizon) >
        1e-12 * std::max(1.0, fine.model.horizon))
        throw std::invalid_argument("coupled_mz_distance: horizons differ");
    if (seeds < 2)
        throw std::invalid_argument("coupled_mz_distance: need at least 2 seeds");
    if (widen < 0.0)
        throw std::invalid_argument("coupled_mz_distance: widen must be >= 0");

    const int nf = fine.model.n_steps;
    const int nc = coarse.model.n_steps;
    const double horizon = fine.model.horizon;
    std::vector<double> dist(static_cast<std::size_t>(seeds));

    auto worker = [&](int begin, int end) {
        std::vector<double> xi(static_cast<std::size_t>(nf));
        std::vector<int> cf(static_cast<std::size_t>(nf));
        std::vector<int> cc(static_cast<std::size_t>(nc));
        for (int s = begin; s < end; ++s) {
            GaussianStream gs(base_seed + static_cast<std::uint64_t>(s));
            for (int k = 0; k < nf; ++k) xi[static_cast<std::size_t>(k)] = gs.next();
            for (int k = 0; k < nf; ++k)
                cf[static_cast<std::size_t>(k)] = xi[static_cast<std::size_t>(k)] > 0.0 ? 0 : 1;
            for (int j = 0; j < nc; ++j) {
                const double sum = xi[static_cast<std::size_t>(2 * j)] +
                                   xi[static_cast<std::size_t>(2 * j + 1)];
                int up;
                if (sum > 0.0)
                    up = 0;
                else if (sum < 0.0)
                    up = 1;
                else
                    up = xi[static_cast<std::size_t>(2 * j + 1)] > 0.0 ? 0 : 1;
                cc[static_cast<std::size_t>(j)] = up;
            }
            const std::vector<double> gf = simulate_layer_path(fine, cf, widen);
            const std::vector<double> gc = simulate_layer_path(coarse, cc, widen);
            dist[static_cast<std::size_t>(s)] =
                d_mz(path_from_gammas(gf, horizon), path_from_gammas(gc, horizon));
        }
    };

    jobs = std::max(1, std::min(jobs, seeds));
    if (jobs == 1) {
        worker(0, seeds);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        const int chunk = (seeds + jobs - 1) / jobs;
        for (int t = 0; t < jobs; ++t) {
            const int b = t * chunk;
            const int e = std::min(seeds, b + chunk);
            if (b >= e) break;
            pool.emplace_back(worker, b, e);
        }
        for (auto& th : pool) th.join();
    }

    MzEstimate est;
    est.n = nf;
    est.seeds = seeds;
    double mean = 0.0;
    for (double d : dist) mean += d;
    mean /= seeds;
    double var = 0.0;
    for (double d : dist) var += (d - mean) * (d - mean);
    est.mean = mean;
    est.std_error = std::sqrt(var / (static_cast<double>(seeds) *
                                     (static_cast<double>(seeds) - 1.0)));
    return est;
}

}  // namespace tcostlab
