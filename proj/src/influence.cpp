#include "canvass/influence.hpp"

#include <algorithm>
#include <cmath>

#include "gnn_kernels.hpp"

namespace canvass {

namespace detail {

namespace {

std::vector<int> targets_without(const std::vector<int>& targets, int v) {
    std::vector<int> out;
    out.reserve(targets.size());
    for (int t : targets)
        if (t != v) out.push_back(t);
    return out;
}

/// Top-k flip bits from a feature-gradient row at x_v, score descending with
/// bit id as the tie break.
std::vector<int> pick_flip_bits(const Graph& g, int v, const std::vector<double>& grad, int k) {
    std::vector<std::pair<double, int>> scored;
    for (int b = 0; b < g.d(); ++b) {
        const double s = g.has_feature(v, b) ? -grad[b] : grad[b];
        if (s > 0.0) scored.push_back({s, b});
    }
    auto less = [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    };
    if (static_cast<int>(scored.size()) > k) {
        std::nth_element(scored.begin(), scored.begin() + k, scored.end(), less);
        scored.resize(k);
    }
    std::sort(scored.begin(), scored.end(), less);
    std::vector<int> bits;
    bits.reserve(scored.size());
    for (const auto& [s, b] : scored) bits.push_back(b);
    return bits;
}

}  // namespace

std::vector<int> influential_flip_bits(const ModelParams& model, const Graph& graph,
                                       const std::vector<int>& targets, int v, int k, InfluenceLossForm form) {
    if (k <= 0) return {};
    const std::vector<int> rest = targets_without(targets, v);
    if (rest.empty()) return {};
    const GnnCache cache = build_cache(model, graph);
    const auto term = form == InfluenceLossForm::margin ? LossSpec::Term::margin : LossSpec::Term::neg_class1;
    const GradContext ctx = build_grad(model, graph, cache, LossSpec::influence(rest, v, term));
    std::vector<double> row(graph.d(), 0.0);
    if (ctx.dX_row_support[v]) ctx.dX_row(v, row.data());
    return pick_flip_bits(graph, v, row, k);
}

LookaheadResult lookahead_in_place(const ModelParams& model, Graph& graph, const std::vector<int>& targets,
                                   int v, int k, InfluenceLossForm form) {
    LookaheadResult res;
    const std::vector<int> rest = targets_without(targets, v);
    if (rest.empty()) return res;

    res.flips = influential_flip_bits(model, graph, targets, v, k, form);

    // link gradients of the influence loss at the hypothetically flipped state
    double sum = 0.0;
    if (form == InfluenceLossForm::margin) {
        for (int b : res.flips) graph.flip_feature(v, b);
        const GnnCache cache = build_cache(model, graph);
        const GradContext ctx = build_grad(model, graph, cache, LossSpec::influence(rest, v, LossSpec::Term::margin));
        for (int t : rest) {
            if (graph.has_edge(v, t)) continue;
            const double s = 0.5 * (ctx.dA(v, t) + ctx.dA(t, v));
            if (s > 0.0) sum += s;
        }
        for (int b : res.flips) graph.flip_feature(v, b);
    } else {
        const GnnCache cache_pre = build_cache(model, graph);
        const GradContext ctx_pre =
            build_grad(model, graph, cache_pre, LossSpec::influence(rest, v, LossSpec::Term::class0));
        for (int b : res.flips) graph.flip_feature(v, b);
        const GnnCache cache_post = build_cache(model, graph);
        const GradContext ctx_post =
            build_grad(model, graph, cache_post, LossSpec::influence(rest, v, LossSpec::Term::neg_class1));
        for (int t : rest) {
            if (graph.has_edge(v, t)) continue;
            const double dvt = ctx_pre.dA(v, t) + ctx_post.dA(v, t);
            const double dtv = ctx_pre.dA(t, v) + ctx_post.dA(t, v);
            const double s = 0.5 * (dvt + dtv);
            if (s > 0.0) sum += s;
        }
        for (int b : res.flips) graph.flip_feature(v, b);
    }
    res.influence = sum / static_cast<double>(rest.size());
    return res;
}

}  // namespace detail

double influence_loss(const ModelParams& model, const Graph& graph, const std::vector<int>& targets, int v,
                      FeatureState state, int k) {
    LossSpec spec = LossSpec::influence(targets, v);
    if (state == FeatureState::current) return loss_value(model, graph, spec);
    Graph scratch = graph;
    for (int b : detail::influential_flip_bits(model, graph, targets, v, k, InfluenceLossForm::margin))
        scratch.flip_feature(v, b);
    return loss_value(model, scratch, spec);
}

Graph influential_feature_perturbations(const ModelParams& model, const Graph& graph,
                                        const std::vector<int>& targets, int v, int k, std::vector<int>* flipped,
                                        InfluenceLossForm form) {
    const std::vector<int> bits = detail::influential_flip_bits(model, graph, targets, v, k, form);
    Graph out = graph;
    for (int b : bits) out.flip_feature(v, b);
    if (flipped) *flipped = bits;
    return out;
}

double lookahead_influence(const ModelParams& model, const Graph& graph, const std::vector<int>& targets, int v,
                           int k, InfluenceLossForm form) {
    Graph scratch = graph;
    return detail::lookahead_in_place(model, scratch, targets, v, k, form).influence;
}

}  // namespace canvass
