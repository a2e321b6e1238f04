#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace canvass {

/// Raised when an input file does not match the expected schema.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when file contents parse but violate a graph invariant.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Undirected binary graph over a 2-community node set. Adjacency is kept as
/// sorted neighbor lists, features as sorted set-bit indices per node.
class Graph {
public:
    Graph() = default;
    Graph(int n, int d) : n_(n), d_(d), adj_(n), feat_(n), labels_(n, 0) {}

    int n() const { return n_; }
    int d() const { return d_; }
    long long edge_count() const { return edges_; }

    const std::vector<int>& neighbors(int v) const { return adj_[v]; }
    const std::vector<int>& feature_bits(int v) const { return feat_[v]; }
    int label(int v) const { return labels_[v]; }
    void set_label(int v, int y) { labels_[v] = y; }
    const std::vector<int>& labels() const { return labels_; }

    int degree(int v) const { return static_cast<int>(adj_[v].size()); }
    int max_degree() const;

    bool has_edge(int u, int v) const;
    /// Inserts the undirected edge {u,v}. No-op if present. u != v required.
    void add_edge(int u, int v);
    void remove_edge(int u, int v);

    bool has_feature(int v, int bit) const;
    void set_feature(int v, int bit, bool on);
    void flip_feature(int v, int bit);

    /// Checks symmetry, zero diagonal, binary ranges, and the edge count.
    /// Throws ValidationError on the first violation.
    void validate() const;

private:
    int n_ = 0;
    int d_ = 0;
    std::vector<std::vector<int>> adj_;
    std::vector<std::vector<int>> feat_;
    std::vector<int> labels_;
    long long edges_ = 0;
};

/// Disjoint transductive node split.
struct Split {
    std::vector<int> train, val, test;
};

/// Attack-time node partition. `attackers` and `targets` stay sorted;
/// `converted` is ordered by conversion time and is always a subset of
/// `attackers`.
struct Partition {
    std::vector<int> attackers;
    std::vector<int> targets;
    std::vector<int> converted;
};

struct SbmParams {
    int block_size = 0;
    double p_within = 0.0;
    double p_between = 0.0;
    uint64_t seed = 0;
};

/// Two equal blocks; labels are the block id and features are the one-hot
/// node id (d = n). Deterministic per seed.
Graph generate_sbm(const SbmParams& params);

/// Uniform random split with the given train/val/test ratios. Redraws (up to
/// 100 times) if the train set misses a label class.
Split split_nodes(const Graph& graph, const std::array<double, 3>& ratios, uint64_t seed);

/// Attackers = train nodes with true label 0; targets = test nodes with
/// predicted label 1. Throws ValidationError if either side is empty.
Partition init_partition(const Graph& graph, const Split& split, const std::vector<int>& predicted);

enum class GraphFormat { json, edgelist };

struct Dataset {
    Graph graph;
    std::optional<Split> split;
};

/// Loads a dataset file. For the edge-list format, `features.csv` and
/// `labels.csv` are expected next to the edge file.
Dataset load_graph(const std::string& path, GraphFormat format);

/// Writes the canonical JSON document (optionally with a split).
void save_graph(const Graph& graph, const std::string& path, const Split* split = nullptr);

}  // namespace canvass
