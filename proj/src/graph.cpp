#include "feast/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>

#include "feast/errors.hpp"

namespace feast {

Graph Graph::with_nodes(int n) {
    Graph g;
    g.n = n;
    g.neighbors.resize(n);
    g.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        g.neighbors[i] = {i};
        g.weights[i] = {0.0};
    }
    return g;
}

double Graph::weighted_degree(int i) const {
    double d = 0.0;
    for (double w : weights[i]) d += w;
    return d;
}

std::vector<double> Graph::weighted_degrees() const {
    std::vector<double> d(n);
    for (int i = 0; i < n; ++i) d[i] = weighted_degree(i);
    return d;
}

int Graph::find_neighbor(int i, int j) const {
    const auto& nbr = neighbors[i];
    auto it = std::lower_bound(nbr.begin(), nbr.end(), j);
    if (it == nbr.end() || *it != j) return -1;
    return static_cast<int>(it - nbr.begin());
}

double Graph::edge_weight(int i, int j) const {
    const int pos = find_neighbor(i, j);
    return pos < 0 ? 0.0 : weights[i][pos];
}

void Graph::add_edge(int i, int j, double w) {
    auto insert_or_add = [&](int a, int b) {
        auto& nbr = neighbors[a];
        auto it = std::lower_bound(nbr.begin(), nbr.end(), b);
        const auto pos = it - nbr.begin();
        if (it != nbr.end() && *it == b) {
            weights[a][pos] += w;
        } else {
            nbr.insert(it, b);
            weights[a].insert(weights[a].begin() + pos, w);
        }
    };
    insert_or_add(i, j);
    if (i != j) insert_or_add(j, i);
}

void validate_graph(const Graph& g) {
    if (static_cast<int>(g.neighbors.size()) != g.n ||
        static_cast<int>(g.weights.size()) != g.n)
        throw ValueError("graph: adjacency size does not match n");
    for (int i = 0; i < g.n; ++i) {
        const auto& nbr = g.neighbors[i];
        if (nbr.size() != g.weights[i].size())
            throw ValueError("graph: weights not parallel to neighbors at node " + std::to_string(i));
        bool has_self = false;
        for (std::size_t k = 0; k < nbr.size(); ++k) {
            const int j = nbr[k];
            if (j < 0 || j >= g.n)
                throw ValueError("graph: neighbor index out of range at node " + std::to_string(i));
            if (k > 0 && nbr[k - 1] >= j)
                throw ValueError("graph: neighbor list not sorted/unique at node " + std::to_string(i));
            if (g.weights[i][k] < 0.0)
                throw ValueError("graph: negative edge weight at node " + std::to_string(i));
            if (j == i) has_self = true;
        }
        if (!has_self)
            throw ValueError("graph: node " + std::to_string(i) + " missing self loop");
    }
    for (int i = 0; i < g.n; ++i)
        for (std::size_t k = 0; k < g.neighbors[i].size(); ++k) {
            const int j = g.neighbors[i][k];
            if (j == i) continue;
            const int back = g.find_neighbor(j, i);
            if (back < 0)
                throw ValueError("graph: asymmetric edge (" + std::to_string(i) + ", " + std::to_string(j) + ")");
            if (g.weights[j][back] != g.weights[i][k])
                throw ValueError("graph: asymmetric weight on edge (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        }
}

Graph one_ring(const Mesh& mesh) {
    validate_mesh(mesh);
    const int n = mesh.num_vertices();
    std::vector<std::set<int>> adj(n);
    for (const auto& f : mesh.faces) {
        adj[f[0]].insert(f[1]);
        adj[f[0]].insert(f[2]);
        adj[f[1]].insert(f[0]);
        adj[f[1]].insert(f[2]);
        adj[f[2]].insert(f[0]);
        adj[f[2]].insert(f[1]);
    }
    Graph g = Graph::with_nodes(n);
    for (int i = 0; i < n; ++i)
        for (int j : adj[i])
            if (j > i) g.add_edge(i, j, 1.0);
    return g;
}

Graph ring_k(const Graph& g, int k) {
    if (k < 1) throw ValueError("ring_k: k must be >= 1");
    if (k == 1) return g;

    Graph out = Graph::with_nodes(g.n);
    std::vector<int> hop(g.n, -1);
    std::vector<int> touched;
    for (int i = 0; i < g.n; ++i) {
        // BFS to depth k.
        touched.clear();
        hop[i] = 0;
        touched.push_back(i);
        std::queue<int> frontier;
        frontier.push(i);
        while (!frontier.empty()) {
            const int u = frontier.front();
            frontier.pop();
            if (hop[u] == k) continue;
            for (int v : g.neighbors[u]) {
                if (hop[v] >= 0) continue;
                hop[v] = hop[u] + 1;
                touched.push_back(v);
                frontier.push(v);
            }
        }
        for (int v : touched) {
            if (v > i) out.add_edge(i, v, 1.0);
            hop[v] = -1;
        }
    }
    return out;
}

Graph knn_graph(const std::vector<Vec3>& points, int k) {
    const int n = static_cast<int>(points.size());
    if (k < 1) throw ValueError("knn_graph: k must be >= 1");
    if (n <= k) throw ValueError("knn_graph: need at least k + 1 points, got " + std::to_string(n));

    Graph g = Graph::with_nodes(n);
    std::vector<std::pair<double, int>> cand;
    cand.reserve(n - 1);
    for (int i = 0; i < n; ++i) {
        cand.clear();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const Vec3 d = points[j] - points[i];
            cand.push_back({d.dot(d), j});
        }
        // Ties break toward the lower index via the pair's second component.
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        for (int t = 0; t < k; ++t) {
            const int j = cand[t].second;
            if (g.find_neighbor(i, j) < 0) g.add_edge(i, j, 1.0);
        }
    }
    return g;
}

double mean_neighbor_count(const Graph& g) {
    if (g.n == 0) return 0.0;
    double total = 0.0;
    for (int i = 0; i < g.n; ++i) total += static_cast<double>(g.neighbors[i].size()) - 1.0;
    return total / g.n;
}

} // namespace feast
