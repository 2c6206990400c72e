#include "tcostlab/friction.hpp"

#include <cassert>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace tcostlab {

void FrictionParams::validate() const {
    if (!(kappa > 0.0 && kappa < 1.0))
        throw std::invalid_argument("FrictionParams: kappa must be in (0,1)");
}

void GridStrategy::validate(const ScenarioTree& tree) const {
    if (gamma.size() != tree.nodes.size())
        throw std::invalid_argument("GridStrategy: one share count per node required");
    for (double g : gamma)
        if (!std::isfinite(g)) throw std::invalid_argument("GridStrategy: non-finite shares");
    for (int leaf : tree.leaves())
        if (gamma[leaf] != 0.0)
            throw std::invalid_argument("GridStrategy: leaf " + std::to_string(leaf) +
                                        " is not liquidated");
}

std::vector<JordanPath> jordan_decompose(const GridStrategy& s, const ScenarioTree& tree) {
    s.validate(tree);
    std::vector<JordanPath> out;
    for (int leaf : tree.leaves()) {
        JordanPath jp;
        jp.leaf = leaf;
        jp.nodes = tree.path_from_root(leaf);
        jp.pos.reserve(jp.nodes.size());
        jp.neg.reserve(jp.nodes.size());
        double prev = 0.0, pos = 0.0, neg = 0.0;
        for (int id : jp.nodes) {
            const double step = s.gamma[id] - prev;
            if (step > 0.0) pos += step; else neg -= step;
            jp.pos.push_back(pos);
            jp.neg.push_back(neg);
            prev = s.gamma[id];
        }
        out.push_back(std::move(jp));
    }
    return out;
}

WealthLedger liquidation_value(const ScenarioTree& tree, const GridStrategy& s,
                               const FrictionParams& params, double x) {
    if (!(x > 0.0)) throw std::invalid_argument("liquidation_value: x must be > 0");
    params.validate();
    s.validate(tree);
    const double k = params.kappa;
    const std::size_t n = tree.nodes.size();
    WealthLedger led;
    led.delta.resize(n);
    led.cash.resize(n);
    led.value.resize(n);
    led.pnl.resize(n);
    led.cost.resize(n);
    // node order is parent-before-child by construction of dense ids
    for (const auto& node : tree.nodes) {
        const int id = node.id;
        const double gp = id == 0 ? 0.0 : s.gamma[node.parent_id];
        const double cashp = id == 0 ? 0.0 : led.cash[node.parent_id];
        const double d = s.gamma[id] - gp;
        led.delta[id] = d;
        led.cash[id] = cashp - node.price * d - k * node.price * std::fabs(d);
        const double g = s.gamma[id];
        led.value[id] = led.cash[id] + (g >= 0.0 ? (1.0 - k) * node.price * g
                                                 : (1.0 + k) * node.price * g);
        const double pnlp = id == 0 ? 0.0 : led.pnl[node.parent_id];
        const double feep = id == 0 ? 0.0 : led.cost[node.parent_id] -
                                                k * tree.nodes[node.parent_id].price *
                                                    std::fabs(gp);
        const double dsp = id == 0 ? 0.0 : node.price - tree.nodes[node.parent_id].price;
        led.pnl[id] = pnlp + gp * dsp;
        led.cost[id] = feep + k * node.price * std::fabs(d) + k * node.price * std::fabs(g);
#ifndef NDEBUG
        assert(std::fabs(led.value[id] - (led.pnl[id] - led.cost[id])) <=
               1e-10 * (1.0 + std::fabs(led.value[id])));
#endif
    }
    return led;
}

AdmissibilityResult is_admissible(const WealthLedger& ledger, const ScenarioTree& tree, double x) {
    AdmissibilityResult r;
    // dense ids are already sorted by (time_index, id)
    for (const auto& node : tree.nodes) {
        if (x + ledger.value[node.id] < -1e-12 * x) {
            r.admissible = false;
            r.violating_node = node.id;
            return r;
        }
    }
    return r;
}

std::string strategy_to_json(const GridStrategy& s) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t id = 0; id < s.gamma.size(); ++id)
        j[std::to_string(id)] = s.gamma[id];
    return j.dump(2) + "\n";
}

GridStrategy strategy_from_json(const std::string& text, const ScenarioTree& tree) {
    const auto j = nlohmann::ordered_json::parse(text);
    GridStrategy s;
    s.gamma.assign(tree.nodes.size(), 0.0);
    std::vector<char> seen(tree.nodes.size(), 0);
    for (auto it = j.begin(); it != j.end(); ++it) {
        const int id = std::stoi(it.key());
        if (id < 0 || id >= static_cast<int>(tree.nodes.size()))
            throw std::invalid_argument("strategy_from_json: unknown node " + it.key());
        s.gamma[id] = it.value().get<double>();
        seen[id] = 1;
    }
    for (std::size_t id = 0; id < seen.size(); ++id)
        if (!seen[id])
            throw std::invalid_argument("strategy_from_json: missing node " + std::to_string(id));
    s.validate(tree);
    return s;
}

void save_strategy(const GridStrategy& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_strategy: cannot open " + path);
    out << strategy_to_json(s);
}

GridStrategy load_strategy(const std::string& path, const ScenarioTree& tree) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_strategy: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return strategy_from_json(ss.str(), tree);
}

void export_ledger_csv(const ScenarioTree& tree, const GridStrategy& s,
                       const WealthLedger& ledger, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_ledger_csv: cannot open " + path);
    out << "node_id,time_index,S,gamma,delta_gamma,cash,V\n";
    char buf[256];
    for (const auto& node : tree.nodes) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", node.id,
                      node.time_index, node.price, s.gamma[node.id], ledger.delta[node.id],
                      ledger.cash[node.id], ledger.value[node.id]);
        out << buf;
    }
}

} // namespace tcostlab
