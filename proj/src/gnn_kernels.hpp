#pragma once

// Shared forward/backward kernels behind the public gnn operations. The
// attack path needs three things the dense public API should not pay for:
// cached forward products, O(h) point queries into the input gradients, and
// hypothetical perturbation of the graph without copying it.

#include <array>
#include <cstdint>
#include <vector>

#include "canvass/gnn.hpp"
#include "canvass/graph.hpp"
#include "canvass/matrix.hpp"

namespace canvass::detail {

/// Iterates the closed neighborhood {v} + N(v) in ascending id order.
template <typename F>
inline void for_each_closed_neighbor(const Graph& g, int v, F&& f) {
    bool self_done = false;
    for (int u : g.neighbors(v)) {
        if (!self_done && v < u) {
            f(v);
            self_done = true;
        }
        f(u);
    }
    if (!self_done) f(v);
}

/// Forward products at one graph state. Field usage depends on the backbone:
/// gcn fills P1/P2/inv_sqrt_deg, sage fills Ps1/Pn1/M1/Pn2/M2. Z1/H1/O are
/// always filled.
struct GnnCache {
    Matrix Z1, H1, O;
    // gcn
    std::vector<double> inv_sqrt_deg;
    Matrix P1;  // X W1
    Matrix P2;  // H1 W2
    // sage
    Matrix Ps1, Pn1;  // X Wself1, X Wneigh1
    Matrix M1;        // neighbor mean of Pn1
    Matrix Pn2;       // H1 Wneigh2
    Matrix M2;        // neighbor mean of Pn2

    // per-bit weight-row norms, descending order; bounds feature-gradient
    // magnitudes for exact candidate pruning
    std::vector<double> w1_bit_norm;
    std::vector<int> w1_bit_order;
};

GnnCache build_cache(const ModelParams& model, const Graph& graph);

/// Row of X W for sparse features, written into out[h].
void feature_row_product(const Graph& g, const Matrix& W, int row_offset, int v, double* out, int h);

/// Backward state for one (model, graph, loss). Supports point queries of
/// dA and row queries of dX without materializing n x n.
struct GradContext {
    const ModelParams* model = nullptr;
    const Graph* graph = nullptr;
    const GnnCache* cache = nullptr;

    Matrix G_O;   // n x 2   dL/dO
    Matrix G_Z1;  // n x h   dL/dZ1
    std::vector<uint8_t> go_nz, gz_nz;
    // gcn: degree-term gradient, one value per row of dA.
    std::vector<double> gdeg;
    // sage: per-row constants <G_Z1_i, M1_i> and <G_O_i, M2_i>.
    std::vector<double> c1, c2;

    std::vector<uint8_t> dA_row_support;  // row i of dA may be nonzero
    std::vector<uint8_t> dX_row_support;  // row s of dX may be nonzero

    // reusable scratch for build_grad_into
    Matrix scratch2, scratchH;

    double dA(int i, int j) const;
    /// Writes d values into out.
    void dX_row(int s, double* out) const;

    /// dL/dZ1 pulled back to node s as one h-vector: for gcn the closed-
    /// neighborhood A_hat-weighted sum of G_Z1 rows, for sage the pair
    /// (self row, degree-scaled neighbor sum) written to self/neigh.
    /// Feature scores are then dot products against W1 rows.
    bool dX_pullback(int s, double* self_or_sum, double* neigh) const;
    double feature_score_from_pullback(const double* self_or_sum, const double* neigh, int bit) const;
};

GradContext build_grad(const ModelParams& model, const Graph& graph, const GnnCache& cache, const LossSpec& spec);

/// Same as build_grad but reuses the context's buffers across calls.
void build_grad_into(GradContext& ctx, const ModelParams& model, const Graph& graph, const GnnCache& cache,
                     const LossSpec& spec);

/// Builds G_O for the loss; attack_ce needs the cached logits.
void fill_loss_grad_rows(const LossSpec& spec, const GnnCache& cache, Matrix& G_O, std::vector<uint8_t>& go_nz);

/// Hypothetical edge insertions and feature flips layered over a constant
/// base graph, with node-local logit evaluation that matches a full forward
/// after real application bit for bit.
class Overlay {
public:
    void bind(const ModelParams& model, const Graph& graph, const GnnCache& cache);

    void add_edge(int u, int v);
    void flip_bit(int v, int bit);
    void clear();

    bool empty() const { return touched_.empty(); }

    /// Logits of node v under the overlay.
    std::array<double, 2> logits_at(int v);
    int predict_at(int v);

    const Graph& base() const { return *graph_; }

private:
    template <typename F>
    void for_each_merged_neighbor(int v, F&& f) const;
    template <typename F>
    void for_each_merged_closed(int v, F&& f) const;

    int degree(int v) const { return graph_->degree(v) + static_cast<int>(extra_[v].size()); }
    bool h1_clean(int v) const;
    const double* h1_row(int v);
    const double* feature_product_row(const Matrix& W, int row_offset, int v, Matrix& cache_slot, int slot);

    void touch(int v);

    const ModelParams* model_ = nullptr;
    const Graph* graph_ = nullptr;
    const GnnCache* cache_ = nullptr;

    std::vector<std::vector<int>> extra_;  // sorted added neighbors
    std::vector<std::vector<int>> flips_;  // sorted flipped bits
    std::vector<uint8_t> deg_dirty_, feat_dirty_;
    std::vector<int> touched_;

    // scratch rows for recomputation
    Matrix h1_buf_, p1_buf_, ps1_buf_, pn1_buf_;
    std::vector<double> msum_;
};

}  // namespace canvass::detail
