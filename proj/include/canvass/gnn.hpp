#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "canvass/graph.hpp"
#include "canvass/matrix.hpp"

namespace canvass {

enum class Backbone { gcn, sage };

std::string to_string(Backbone b);
Backbone backbone_from_string(const std::string& s);

struct TrainMeta {
    int epochs_run = 0;
    int best_epoch = 0;
    double best_val_acc = 0.0;
};

/// Two-layer GNN weights. For gcn, W1 is d x h and W2 is h x 2. For sage,
/// the self and neighbor-mean blocks are stacked, so W1 is 2d x h and W2 is
/// 2h x 2 (rows [0,d) self, [d,2d) neighbor; same pattern for W2).
struct ModelParams {
    Backbone backbone = Backbone::gcn;
    int d = 0;
    int hidden = 16;
    Matrix W1, W2;
    std::vector<double> b1, b2;
    TrainMeta meta;
};

struct TrainConfig {
    int hidden = 16;
    double lr = 1e-2;
    double weight_decay = 5e-4;
    int epochs = 200;
    int patience = 50;
    double dropout = 0.5;
};

/// Scalar losses the input-gradient engine differentiates.
///
/// attack_ce: cross-entropy of node's current label 1, i.e. -ln softmax_1(O_v).
///   Ascent on it pushes v toward class 0.
/// influence: CW-style margin summed over `targets` minus `node`, with `term`
///   selecting the full margin (O_w0 - O_w1) or one side of it.
struct LossSpec {
    enum class Kind { attack_ce, influence };
    enum class Term { margin, class0, neg_class1 };
    Kind kind = Kind::attack_ce;
    int node = -1;
    std::vector<int> targets;
    Term term = Term::margin;
    /// Treat the degree normalization (gcn) or the neighbor-mean denominator
    /// (sage) as a constant when differentiating. Default differentiates
    /// through it.
    bool freeze_normalization = false;

    static LossSpec attack(int v) {
        LossSpec s;
        s.kind = Kind::attack_ce;
        s.node = v;
        return s;
    }
    static LossSpec influence(std::vector<int> targets, int v, Term term = Term::margin) {
        LossSpec s;
        s.kind = Kind::influence;
        s.node = v;
        s.targets = std::move(targets);
        s.term = term;
        return s;
    }
};

struct InputGradients {
    Matrix dA;  // n x n, gradient w.r.t. the relaxed continuous adjacency
    Matrix dX;  // n x d
};

/// D^{-1/2} (A + I) D^{-1/2} as a dense matrix.
Matrix normalize_adjacency(const Graph& graph);

/// Logits, n x 2. Dropout disabled.
Matrix forward(const ModelParams& model, const Graph& graph);

/// Argmax per node; ties resolve to class 0.
std::vector<int> predict(const ModelParams& model, const Graph& graph);
std::vector<int> predict_from_logits(const Matrix& logits);

double accuracy(const std::vector<int>& predicted, const Graph& graph, const std::vector<int>& nodes);

using EpochObserver = std::function<void(int epoch, double loss, double train_acc, double val_acc)>;

/// Full-batch training with adaptive-moment updates, weight decay, dropout
/// after the hidden layer, and early stopping on validation accuracy.
/// Returns the best-validation snapshot. Deterministic per seed.
ModelParams train(const Graph& graph, const Split& split, const TrainConfig& config, Backbone backbone,
                  uint64_t seed, const EpochObserver& observer = {});

/// Analytic gradients of the loss w.r.t. the relaxed adjacency and features,
/// differentiated through the degree normalization (gcn) or the neighbor
/// mean (sage). Dense output; meant for small instances and oracles. The
/// attack path queries the same kernels without materializing n x n.
InputGradients input_gradients(const ModelParams& model, const Graph& graph, const LossSpec& spec);

/// Scalar loss value for `spec` at the graph's current state.
double loss_value(const ModelParams& model, const Graph& graph, const LossSpec& spec);

void save_model(const ModelParams& model, const std::string& path);
ModelParams load_model(const std::string& path);

}  // namespace canvass
