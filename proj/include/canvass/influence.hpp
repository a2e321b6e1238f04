#pragma once

#include <vector>

#include "canvass/gnn.hpp"
#include "canvass/graph.hpp"

namespace canvass {

enum class FeatureState { current, perturbed };

/// Reading of the influence loss. `margin` evaluates (logit_0 - logit_1) at
/// one designated feature state; `mixed` keeps the class-0 term at the
/// pre-flip features and the class-1 term at the post-flip features.
enum class InfluenceLossForm { margin, mixed };

struct InfluenceConfig {
    int k = 8;
    double alpha = 0.0;
    bool alpha_auto = true;
    InfluenceLossForm form = InfluenceLossForm::margin;
};

/// Sum over targets minus `v` of (logit_0 - logit_1). With
/// FeatureState::perturbed the top-k influential flips at v are applied
/// hypothetically before evaluating.
double influence_loss(const ModelParams& model, const Graph& graph, const std::vector<int>& targets, int v,
                      FeatureState state = FeatureState::current, int k = 0);

/// Flips the top-k positive-gradient bits of x_v toward higher influence
/// loss; fewer if fewer positive gradients exist. Returns the perturbed
/// graph; `flipped` (optional) receives the bit indices actually flipped.
Graph influential_feature_perturbations(const ModelParams& model, const Graph& graph,
                                        const std::vector<int>& targets, int v, int k,
                                        std::vector<int>* flipped = nullptr,
                                        InfluenceLossForm form = InfluenceLossForm::margin);

/// Look-ahead influence I(v): mean over remaining targets of the filtered,
/// symmetrized link gradients from v, computed after hypothetical
/// influential flips at v. The graph argument is the post-conversion state
/// and is not mutated.
double lookahead_influence(const ModelParams& model, const Graph& graph, const std::vector<int>& targets, int v,
                           int k, InfluenceLossForm form = InfluenceLossForm::margin);

namespace detail {

/// Bits the influential perturbation would flip at x_v, highest gradient
/// first. Mutates nothing.
std::vector<int> influential_flip_bits(const ModelParams& model, const Graph& graph,
                                       const std::vector<int>& targets, int v, int k, InfluenceLossForm form);

/// Driver-side variant: mutates `graph` temporarily (flips applied and
/// reverted), returns the influence and the flip set it used.
struct LookaheadResult {
    double influence = 0.0;
    std::vector<int> flips;
};
LookaheadResult lookahead_in_place(const ModelParams& model, Graph& graph, const std::vector<int>& targets,
                                   int v, int k, InfluenceLossForm form);

}  // namespace detail

}  // namespace canvass
