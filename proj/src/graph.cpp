#include "canvass/graph.hpp"

#include <algorithm>
#include <cmath>

#include "canvass/rng.hpp"

namespace canvass {

namespace {

bool sorted_contains(const std::vector<int>& v, int x) {
    return std::binary_search(v.begin(), v.end(), x);
}

void sorted_insert(std::vector<int>& v, int x) {
    v.insert(std::lower_bound(v.begin(), v.end(), x), x);
}

void sorted_erase(std::vector<int>& v, int x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it != v.end() && *it == x) v.erase(it);
}

}  // namespace

int Graph::max_degree() const {
    int m = 0;
    for (const auto& a : adj_) m = std::max(m, static_cast<int>(a.size()));
    return m;
}

bool Graph::has_edge(int u, int v) const {
    if (adj_[u].size() > adj_[v].size()) std::swap(u, v);
    return sorted_contains(adj_[u], v);
}

void Graph::add_edge(int u, int v) {
    if (u == v) throw ValidationError("self-loop edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
    if (has_edge(u, v)) return;
    sorted_insert(adj_[u], v);
    sorted_insert(adj_[v], u);
    ++edges_;
}

void Graph::remove_edge(int u, int v) {
    if (!has_edge(u, v)) return;
    sorted_erase(adj_[u], v);
    sorted_erase(adj_[v], u);
    --edges_;
}

bool Graph::has_feature(int v, int bit) const {
    return sorted_contains(feat_[v], bit);
}

void Graph::set_feature(int v, int bit, bool on) {
    const bool present = has_feature(v, bit);
    if (on && !present) sorted_insert(feat_[v], bit);
    if (!on && present) sorted_erase(feat_[v], bit);
}

void Graph::flip_feature(int v, int bit) {
    set_feature(v, bit, !has_feature(v, bit));
}

void Graph::validate() const {
    long long half_entries = 0;
    for (int u = 0; u < n_; ++u) {
        int prev = -1;
        for (int v : adj_[u]) {
            if (v <= prev) throw ValidationError("neighbor list of node " + std::to_string(u) + " not strictly sorted");
            prev = v;
            if (v < 0 || v >= n_) throw ValidationError("neighbor id out of range at node " + std::to_string(u));
            if (v == u) throw ValidationError("self-loop at node " + std::to_string(u));
            if (!sorted_contains(adj_[v], u))
                throw ValidationError("asymmetric adjacency between " + std::to_string(u) + " and " + std::to_string(v));
        }
        half_entries += static_cast<long long>(adj_[u].size());
        prev = -1;
        for (int b : feat_[u]) {
            if (b <= prev) throw ValidationError("feature bits of node " + std::to_string(u) + " not strictly sorted");
            prev = b;
            if (b < 0 || b >= d_) throw ValidationError("feature bit out of range at node " + std::to_string(u));
        }
        if (labels_[u] != 0 && labels_[u] != 1)
            throw ValidationError("non-binary label at node " + std::to_string(u));
    }
    if (half_entries != 2 * edges_)
        throw ValidationError("edge count " + std::to_string(edges_) + " does not match adjacency entries");
}

Graph generate_sbm(const SbmParams& params) {
    if (params.block_size < 1) throw ValidationError("block_size must be >= 1");
    if (!(params.p_between >= 0.0 && params.p_between <= params.p_within && params.p_within <= 1.0))
        throw ValidationError("require 0 <= p_between <= p_within <= 1");
    const int n = 2 * params.block_size;
    Graph g(n, n);
    for (int v = 0; v < n; ++v) {
        g.set_label(v, v < params.block_size ? 0 : 1);
        g.set_feature(v, v, true);
    }
    Rng rng(params.seed);
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            const double p = g.label(u) == g.label(v) ? params.p_within : params.p_between;
            if (p > 0.0 && rng.bernoulli(p)) g.add_edge(u, v);
        }
    }
    return g;
}

Split split_nodes(const Graph& graph, const std::array<double, 3>& ratios, uint64_t seed) {
    const int n = graph.n();
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");
    if (n < 10) throw ValidationError("need at least 10 nodes to split");
    const int n_train = static_cast<int>(ratios[0] * n + 0.5);
    const int n_val = static_cast<int>(ratios[1] * n + 0.5);
    const int n_test = n - n_train - n_val;
    if (n_train < 1 || n_val < 1 || n_test < 1)
        throw ValidationError("split ratios leave an empty train/val/test set");

    Rng rng(seed);
    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = i;

    for (int attempt = 0; attempt < 100; ++attempt) {
        rng.shuffle(ids);
        Split s;
        s.train.assign(ids.begin(), ids.begin() + n_train);
        s.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
        s.test.assign(ids.begin() + n_train + n_val, ids.end());
        std::sort(s.train.begin(), s.train.end());
        std::sort(s.val.begin(), s.val.end());
        std::sort(s.test.begin(), s.test.end());
        bool has0 = false, has1 = false;
        for (int v : s.train) {
            if (graph.label(v) == 0) has0 = true;
            else has1 = true;
        }
        if (has0 && has1) return s;
    }
    throw ValidationError("train split missing a label class after 100 redraws");
}

Partition init_partition(const Graph& graph, const Split& split, const std::vector<int>& predicted) {
    if (static_cast<int>(predicted.size()) != graph.n())
        throw ValidationError("predicted label vector length mismatch");
    Partition p;
    for (int v : split.train)
        if (graph.label(v) == 0) p.attackers.push_back(v);
    for (int v : split.test)
        if (predicted[v] == 1) p.targets.push_back(v);
    if (p.attackers.empty()) throw ValidationError("no attackers: train set has no label-0 nodes");
    if (p.targets.empty()) throw ValidationError("no targets: no test node is predicted 1");
    return p;
}

}  // namespace canvass
