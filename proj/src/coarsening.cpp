#include "feast/coarsening.hpp"

#include <algorithm>
#include <string>

#include "json.hpp"

#include "feast/errors.hpp"

namespace feast {

std::pair<Graph, Matching> graclus_step(const Graph& g) {
    validate_graph(g);
    const int n = g.n;
    const std::vector<double> deg = g.weighted_degrees();

    Matching matching;
    matching.cluster_of.assign(n, -1);
    std::vector<char> marked(n, 0);
    for (int i = 0; i < n; ++i) {
        if (marked[i]) continue;
        marked[i] = 1;
        int best = -1;
        double best_cut = -1.0;
        const auto& nbrs = g.neighbors[i];
        const auto& wts = g.weights[i];
        for (std::size_t a = 0; a < nbrs.size(); ++a) {
            const int j = nbrs[a];
            if (j == i || marked[j]) continue;
            const double cut = wts[a] * (1.0 / deg[i] + 1.0 / deg[j]);
            if (cut > best_cut) { // neighbors ascend, so ties keep the lower j
                best_cut = cut;
                best = j;
            }
        }
        const int cluster = matching.num_clusters();
        matching.cluster_of[i] = cluster;
        if (best >= 0) {
            marked[best] = 1;
            matching.cluster_of[best] = cluster;
            matching.members.push_back({i, best});
        } else {
            matching.members.push_back({i});
        }
    }

    Graph coarse = Graph::with_nodes(matching.num_clusters());
    for (int i = 0; i < n; ++i) {
        const auto& nbrs = g.neighbors[i];
        const auto& wts = g.weights[i];
        for (std::size_t a = 0; a < nbrs.size(); ++a) {
            const int j = nbrs[a];
            if (j < i || wts[a] == 0.0) continue;
            coarse.add_edge(matching.cluster_of[i], matching.cluster_of[j], wts[a]);
        }
    }
    return {std::move(coarse), std::move(matching)};
}

PoolMap CoarseningHierarchy::pool_map(int level) const {
    if (level < 0 || level >= num_levels())
        throw ValueError("pool map: level " + std::to_string(level) + " out of range");
    PoolMap pm;
    pm.num_coarse = padded_count(level + 1);
    pm.fine_is_fake = fake_masks[level];
    pm.coarse_is_fake = fake_masks[level + 1];
    pm.validate();
    return pm;
}

CoarseningHierarchy build_hierarchy(const Graph& g, int levels) {
    if (levels < 1) throw ValueError("build_hierarchy: levels must be >= 1");
    CoarseningHierarchy h;
    h.levels.push_back(g);
    for (int t = 0; t < levels; ++t) {
        if (h.levels[t].n < 2)
            throw ValueError("build_hierarchy: level " + std::to_string(t) +
                             " has fewer than 2 nodes, cannot coarsen further");
        auto [coarse, matching] = graclus_step(h.levels[t]);
        h.levels.push_back(std::move(coarse));
        h.matchings.push_back(std::move(matching));
    }

    // Orderings propagate top-down: the top level keeps node order, and each
    // position's children sit at twice its index.
    h.orderings.resize(levels + 1);
    auto& top = h.orderings[levels];
    top.resize(h.levels[levels].n);
    for (int k = 0; k < h.levels[levels].n; ++k) top[k] = k;
    for (int lvl = levels - 1; lvl >= 0; --lvl) {
        const auto& coarse_order = h.orderings[lvl + 1];
        const Matching& m = h.matchings[lvl];
        auto& order = h.orderings[lvl];
        order.assign(2 * coarse_order.size(), -1);
        for (std::size_t k = 0; k < coarse_order.size(); ++k) {
            const int c = coarse_order[k];
            if (c < 0) continue;
            const auto& kids = m.members[c];
            order[2 * k] = kids[0];
            if (kids.size() == 2) order[2 * k + 1] = kids[1];
        }
    }

    h.fake_masks.resize(levels + 1);
    for (int lvl = 0; lvl <= levels; ++lvl) {
        h.fake_masks[lvl].resize(h.orderings[lvl].size());
        for (std::size_t p = 0; p < h.orderings[lvl].size(); ++p)
            h.fake_masks[lvl][p] = h.orderings[lvl][p] < 0;
    }

    // Per-level conv graphs in tree order. Padding positions keep only their
    // self entry, so they stay isolated and zero-valued through a conv.
    h.padded_graphs.resize(levels + 1);
    for (int lvl = 0; lvl <= levels; ++lvl) {
        const Graph& src = h.levels[lvl];
        const auto& order = h.orderings[lvl];
        std::vector<int> pos_of(src.n, -1);
        for (std::size_t p = 0; p < order.size(); ++p)
            if (order[p] >= 0) pos_of[order[p]] = static_cast<int>(p);
        Graph padded = Graph::with_nodes(static_cast<int>(order.size()));
        for (int i = 0; i < src.n; ++i) {
            const auto& nbrs = src.neighbors[i];
            const auto& wts = src.weights[i];
            for (std::size_t a = 0; a < nbrs.size(); ++a) {
                const int j = nbrs[a];
                if (j < i || wts[a] == 0.0) continue;
                padded.add_edge(pos_of[i], pos_of[j], wts[a]);
            }
        }
        h.padded_graphs[lvl] = std::move(padded);
    }
    return h;
}

namespace {

int real_row_count(const std::vector<int>& ordering) {
    int n = 0;
    std::vector<char> seen;
    for (int id : ordering) {
        if (id < 0) continue;
        if (static_cast<std::size_t>(id) >= seen.size()) seen.resize(id + 1, 0);
        if (seen[id]) throw ValueError("ordering: duplicate node id");
        seen[id] = 1;
        ++n;
    }
    if (n != static_cast<int>(seen.size()))
        throw ValueError("ordering: real ids are not a contiguous 0-based range");
    return n;
}

} // namespace

Matrix reorder_features(const Matrix& X, const std::vector<int>& ordering) {
    const int n = real_row_count(ordering);
    if (X.rows() != n)
        throw ShapeError("reorder_features: " + std::to_string(X.rows()) + " rows for " +
                         std::to_string(n) + " real nodes");
    Matrix out(static_cast<int>(ordering.size()), X.cols());
    for (std::size_t p = 0; p < ordering.size(); ++p) {
        if (ordering[p] < 0) continue;
        const auto src = X.row(ordering[p]);
        auto dst = out.row(static_cast<int>(p));
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return out;
}

Matrix restore_features(const Matrix& X_padded, const std::vector<int>& ordering) {
    const int n = real_row_count(ordering);
    if (X_padded.rows() != static_cast<int>(ordering.size()))
        throw ShapeError("restore_features: row count does not match ordering length");
    Matrix out(n, X_padded.cols());
    for (std::size_t p = 0; p < ordering.size(); ++p) {
        if (ordering[p] < 0) continue;
        const auto src = X_padded.row(static_cast<int>(p));
        auto dst = out.row(ordering[p]);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return out;
}

std::string hierarchy_to_json(const CoarseningHierarchy& h) {
    nlohmann::json doc;
    doc["levels"] = nlohmann::json::array();
    for (std::size_t lvl = 0; lvl < h.levels.size(); ++lvl) {
        nlohmann::json entry;
        entry["nodes"] = h.levels[lvl].n;
        entry["padded"] = h.padded_count(static_cast<int>(lvl));
        entry["ordering"] = h.orderings[lvl];
        nlohmann::json mask = nlohmann::json::array();
        for (char f : h.fake_masks[lvl]) mask.push_back(static_cast<bool>(f));
        entry["fake_mask"] = std::move(mask);
        doc["levels"].push_back(std::move(entry));
    }
    doc["matchings"] = nlohmann::json::array();
    for (const Matching& m : h.matchings) {
        nlohmann::json entry;
        entry["cluster_of"] = m.cluster_of;
        entry["members"] = m.members;
        doc["matchings"].push_back(std::move(entry));
    }
    return doc.dump(2);
}

} // namespace feast
