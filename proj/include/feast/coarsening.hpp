#pragma once

#include <string>
#include <vector>

#include "feast/graph.hpp"
#include "feast/layers.hpp"
#include "feast/matrix.hpp"

namespace feast {

// One round of greedy pairing: every fine node belongs to exactly one
// cluster of 1 or 2 members.
struct Matching {
    std::vector<int> cluster_of;           // fine node -> cluster id
    std::vector<std::vector<int>> members; // cluster id -> ascending fine nodes

    int num_clusters() const { return static_cast<int>(members.size()); }

    friend bool operator==(const Matching& a, const Matching& b) {
        return a.cluster_of == b.cluster_of && a.members == b.members;
    }
};

// Pairs unmarked nodes in ascending index order, each with the unmarked
// neighbor maximizing w_ij (1/d_i + 1/d_j); ties break toward the lower
// neighbor index. Cluster edge weights are summed; collapsed intra-cluster
// weight moves onto the coarse node's self loop.
std::pair<Graph, Matching> graclus_step(const Graph& g);

// Multi-level coarsening with the node orderings that make width-2 pooling
// act on sibling pairs. Orderings map tree positions to node ids, -1 marking
// padding positions with no real node; position 2k and 2k+1 at one level are
// the children of position k above. The top level is unpadded.
struct CoarseningHierarchy {
    std::vector<Graph> levels;                 // levels[0] = input graph
    std::vector<Matching> matchings;           // between consecutive levels
    std::vector<std::vector<int>> orderings;   // per level, position -> node id or -1
    std::vector<std::vector<char>> fake_masks; // parallel to orderings
    std::vector<Graph> padded_graphs;          // per level, permuted + padding rows

    int num_levels() const { return static_cast<int>(matchings.size()); }
    int real_count(int level) const { return levels[level].n; }
    int padded_count(int level) const { return static_cast<int>(orderings[level].size()); }

    // Pooling pairs from `level` down to `level + 1`.
    PoolMap pool_map(int level) const;
};

CoarseningHierarchy build_hierarchy(const Graph& g, int levels);

// Permutes rows into tree order, zero-filling padding positions.
Matrix reorder_features(const Matrix& X, const std::vector<int>& ordering);

// Exact inverse of reorder_features on the real rows.
Matrix restore_features(const Matrix& X_padded, const std::vector<int>& ordering);

// JSON document with per-level node counts, orderings, fake masks, and
// matchings, for inspection and cross-implementation comparison.
std::string hierarchy_to_json(const CoarseningHierarchy& h);

} // namespace feast
