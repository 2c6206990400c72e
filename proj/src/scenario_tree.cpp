#include "tcostlab/scenario_tree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace tcostlab {

using ordered_json = nlohmann::ordered_json;

std::vector<int> ScenarioTree::leaves() const {
    std::vector<int> out;
    for (const auto& n : nodes)
        if (is_leaf(n.id)) out.push_back(n.id);
    return out;
}

std::vector<int> ScenarioTree::path_from_root(int id) const {
    std::vector<int> out;
    for (int cur = id; cur >= 0; cur = nodes[cur].parent_id) out.push_back(cur);
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<std::vector<int>> ScenarioTree::layers() const {
    std::vector<std::vector<int>> out(n_steps + 1);
    for (const auto& n : nodes) out[n.time_index].push_back(n.id);
    return out;
}

std::vector<double> ScenarioTree::node_probabilities() const {
    std::vector<double> prob(nodes.size(), 0.0);
    prob[0] = 1.0;
    for (const auto& n : nodes)
        for (const auto& b : branches[n.id])
            prob[b.child_id] = prob[n.id] * b.p;
    return prob;
}

void ScenarioTree::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("ScenarioTree: " + msg); };
    if (n_steps < 1) fail("n_steps must be >= 1");
    if (!(horizon > 0.0)) fail("horizon must be > 0");
    if (nodes.empty()) fail("empty node set");
    if (branches.size() != nodes.size()) fail("branches/nodes size mismatch");
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id != static_cast<int>(i)) fail("node ids must be dense 0..N-1 in order");
    if (nodes[0].parent_id != -1 || nodes[0].time_index != 0) fail("root must be id 0 at time 0");
    for (const auto& n : nodes) {
        if (!(n.price > 0.0) || !std::isfinite(n.price)) fail("prices must be finite and > 0");
        if (n.id != 0) {
            if (n.parent_id < 0 || n.parent_id >= static_cast<int>(nodes.size()))
                fail("bad parent id at node " + std::to_string(n.id));
            if (n.time_index != nodes[n.parent_id].time_index + 1)
                fail("child time must be parent time + 1 at node " + std::to_string(n.id));
        }
        if (n.time_index < 0 || n.time_index > n_steps) fail("time index out of range");
    }
    std::vector<char> is_child(nodes.size(), 0);
    for (const auto& n : nodes) {
        const auto& bs = branches[n.id];
        if (bs.empty()) {
            if (n.time_index != n_steps)
                fail("leaf before horizon at node " + std::to_string(n.id));
            continue;
        }
        double sum = 0.0;
        for (const auto& b : bs) {
            if (b.child_id < 0 || b.child_id >= static_cast<int>(nodes.size()))
                fail("bad child id under node " + std::to_string(n.id));
            if (nodes[b.child_id].parent_id != n.id)
                fail("branch child does not point back to parent " + std::to_string(n.id));
            if (is_child[b.child_id]) fail("node reached by two branches");
            is_child[b.child_id] = 1;
            if (!(b.p > 0.0)) fail("branch probabilities must be > 0");
            sum += b.p;
        }
        if (std::fabs(sum - 1.0) > 1e-12)
            fail("branch probabilities at node " + std::to_string(n.id) + " sum to " + std::to_string(sum));
    }
    for (const auto& n : nodes)
        if (n.id != 0 && !is_child[n.id]) fail("orphan node " + std::to_string(n.id));
}

std::string to_json(const ScenarioTree& tree) {
    ordered_json j;
    j["n_steps"] = tree.n_steps;
    j["horizon"] = tree.horizon;
    j["nodes"] = ordered_json::array();
    for (const auto& n : tree.nodes) {
        ordered_json jn;
        jn["id"] = n.id;
        if (n.parent_id < 0) jn["parent_id"] = nullptr; else jn["parent_id"] = n.parent_id;
        jn["time_index"] = n.time_index;
        jn["price"] = n.price;
        j["nodes"].push_back(std::move(jn));
    }
    j["branches"] = ordered_json::array();
    for (const auto& n : tree.nodes) {
        if (tree.branches[n.id].empty()) continue;
        ordered_json jb;
        jb["node_id"] = n.id;
        jb["children"] = ordered_json::array();
        for (const auto& b : tree.branches[n.id])
            jb["children"].push_back(ordered_json{{"child_id", b.child_id}, {"p", b.p}});
        j["branches"].push_back(std::move(jb));
    }
    return j.dump(2) + "\n";
}

ScenarioTree tree_from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    ScenarioTree t;
    t.n_steps = j.at("n_steps").get<int>();
    t.horizon = j.at("horizon").get<double>();
    for (const auto& jn : j.at("nodes")) {
        TreeNode n;
        n.id = jn.at("id").get<int>();
        n.parent_id = jn.at("parent_id").is_null() ? -1 : jn.at("parent_id").get<int>();
        n.time_index = jn.at("time_index").get<int>();
        n.price = jn.at("price").get<double>();
        t.nodes.push_back(n);
    }
    t.branches.assign(t.nodes.size(), {});
    for (const auto& jb : j.at("branches")) {
        const int id = jb.at("node_id").get<int>();
        if (id < 0 || id >= static_cast<int>(t.nodes.size()))
            throw std::invalid_argument("tree_from_json: branch for unknown node");
        for (const auto& jc : jb.at("children"))
            t.branches[id].push_back({jc.at("child_id").get<int>(), jc.at("p").get<double>()});
    }
    t.validate();
    return t;
}

void save_tree(const ScenarioTree& tree, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_tree: cannot open " + path);
    out << to_json(tree);
}

ScenarioTree load_tree(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_tree: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return tree_from_json(ss.str());
}

std::optional<std::vector<LayerProfile>> homogeneous_layers(const ScenarioTree& tree) {
    const auto by_layer = tree.layers();
    std::vector<LayerProfile> out;
    out.reserve(tree.n_steps);
    for (int k = 0; k < tree.n_steps; ++k) {
        const auto& ids = by_layer[k];
        if (ids.empty()) return std::nullopt;
        LayerProfile ref;
        for (const auto& b : tree.children(ids[0])) {
            ref.ratios.push_back(tree.nodes[b.child_id].price / tree.nodes[ids[0]].price);
            ref.probs.push_back(b.p);
        }
        if (ref.ratios.empty()) return std::nullopt;
        for (std::size_t i = 1; i < ids.size(); ++i) {
            const auto& bs = tree.children(ids[i]);
            if (bs.size() != ref.ratios.size()) return std::nullopt;
            for (std::size_t c = 0; c < bs.size(); ++c) {
                const double r = tree.nodes[bs[c].child_id].price / tree.nodes[ids[i]].price;
                if (std::fabs(r - ref.ratios[c]) > 1e-13 * (1.0 + std::fabs(ref.ratios[c])))
                    return std::nullopt;
                if (std::fabs(bs[c].p - ref.probs[c]) > 1e-13) return std::nullopt;
            }
        }
        out.push_back(std::move(ref));
    }
    return out;
}

} // namespace tcostlab
