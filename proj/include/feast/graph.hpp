#pragma once

#include <vector>

#include "feast/mesh.hpp"

namespace feast {

// Undirected graph with self-inclusive sorted neighbor lists and per-edge
// nonnegative weights. The self entry is always present; its weight starts
// at 0 and only becomes positive through coarsening (collapsed intra-cluster
// edges). Degrees sum all incident weights including the self loop.
struct Graph {
    int n = 0;
    std::vector<std::vector<int>> neighbors; // sorted, includes i itself
    std::vector<std::vector<double>> weights; // parallel to neighbors

    static Graph with_nodes(int n);

    int degree_count(int i) const { return static_cast<int>(neighbors[i].size()); }
    double weighted_degree(int i) const;
    std::vector<double> weighted_degrees() const;

    // Position of j in neighbors[i], or -1.
    int find_neighbor(int i, int j) const;
    double edge_weight(int i, int j) const;

    // Inserts the undirected edge (i, j) with the given weight, or adds to
    // the existing weight when already present. i == j targets the self loop.
    void add_edge(int i, int j, double w = 1.0);

    friend bool operator==(const Graph& a, const Graph& b) {
        return a.n == b.n && a.neighbors == b.neighbors && a.weights == b.weights;
    }
};

// Checks all Graph invariants (self-inclusion, sortedness, no duplicates,
// index range, symmetry with matching weights). Throws ValueError.
void validate_graph(const Graph& g);

// 1-ring connectivity of a mesh: i is linked to every vertex sharing a face
// edge with it, plus itself. All edge weights 1.
Graph one_ring(const Mesh& mesh);

// Expands neighborhoods to everything within k hops (BFS). k = 1 returns an
// identical graph; k = 0 is rejected.
Graph ring_k(const Graph& g, int k);

// k-nearest-neighbor graph over points, symmetrized by union, self loop
// added. Distance ties break toward the lower index. Requires n >= k + 1.
Graph knn_graph(const std::vector<Vec3>& points, int k);

// Mean count of non-self neighbors.
double mean_neighbor_count(const Graph& g);

} // namespace feast
