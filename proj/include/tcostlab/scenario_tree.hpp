#pragma once
// Explicit scenario trees: finite adapted market models with strictly positive
// prices and per-node branch probabilities.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tcostlab {

struct TreeNode {
    int id = 0;
    int parent_id = -1;      // -1 for the root
    int time_index = 0;
    double price = 0.0;      // > 0
};

struct Branch {
    int child_id = 0;
    double p = 0.0;          // conditional probability, > 0; sums to 1 per node
};

// Nodes are stored densely: nodes[id].id == id, root id 0.
// branches[id] lists the children of node id (empty exactly at leaves).
struct ScenarioTree {
    int n_steps = 0;
    double horizon = 0.0;
    std::vector<TreeNode> nodes;
    std::vector<std::vector<Branch>> branches;

    double dt() const { return horizon / n_steps; }
    bool is_leaf(int id) const { return branches[id].empty(); }
    std::size_t size() const { return nodes.size(); }
    const std::vector<Branch>& children(int id) const { return branches[id]; }

    // ids of all leaves, ascending
    std::vector<int> leaves() const;
    // node ids from root to `id` inclusive
    std::vector<int> path_from_root(int id) const;
    // ids grouped by time_index, each ascending
    std::vector<std::vector<int>> layers() const;
    // unconditional probability of reaching each node
    std::vector<double> node_probabilities() const;

    // Throws std::invalid_argument describing the first violated structural
    // invariant: dense ids, root at 0/time 0, child time = parent time + 1,
    // every leaf at time n_steps, prices > 0, probabilities > 0 summing to 1
    // within 1e-12 per node.
    void validate() const;
};

std::string to_json(const ScenarioTree& tree);
ScenarioTree tree_from_json(const std::string& text);

void save_tree(const ScenarioTree& tree, const std::string& path);
ScenarioTree load_tree(const std::string& path);

// True when every layer is structurally identical: all nodes of a layer carry
// the same child price ratios and branch probabilities (within 1e-13 relative).
// Such trees admit a layer-collapsed solve that matches the node-by-node one.
struct LayerProfile {
    std::vector<double> ratios;   // child price / node price, in branch order
    std::vector<double> probs;
};
std::optional<std::vector<LayerProfile>> homogeneous_layers(const ScenarioTree& tree);

} // namespace tcostlab
