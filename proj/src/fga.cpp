#include <algorithm>

#include "canvass/driver.hpp"
#include "gnn_kernels.hpp"
#include "parallel.hpp"

namespace canvass {

namespace {

/// One greedy link-insertion pass for a single target on its own graph copy.
/// Returns the insertion count, or -1 if the cap is reached first.
int fga_single(const ModelParams& model, Graph& g, const std::vector<int>& attackers,
               const std::vector<int>& targets, int v, int cap) {
    {
        const detail::GnnCache cache = detail::build_cache(model, g);
        if (cache.O.at(v, 1) <= cache.O.at(v, 0)) return 0;  // already predicted 0
    }
    for (int count = 1; count <= cap; ++count) {
        const detail::GnnCache cache = detail::build_cache(model, g);
        const detail::GradContext ctx = detail::build_grad(model, g, cache, LossSpec::attack(v));
        // best positive symmetrized link gradient over absent S x T pairs
        int best_s = -1, best_t = -1;
        double best_score = 0.0;
        for (int s : attackers) {
            const bool s_sup = ctx.dA_row_support[s];
            for (int t : targets) {
                if (!s_sup && !ctx.dA_row_support[t]) continue;
                if (g.has_edge(s, t)) continue;
                const double score = 0.5 * (ctx.dA(s, t) + ctx.dA(t, s));
                // ascending (s,t) iteration keeps the lowest pair on ties
                if (score > best_score) {
                    best_score = score;
                    best_s = s;
                    best_t = t;
                }
            }
        }
        if (best_s < 0) return -1;  // no positive-gradient insertion left
        g.add_edge(best_s, best_t);
        const detail::GnnCache after = detail::build_cache(model, g);
        if (after.O.at(v, 1) <= after.O.at(v, 0)) return count;
    }
    return -1;
}

}  // namespace

FgaResult run_fga_baseline(const ModelParams& model, const Graph& graph, const Partition& partition,
                           const std::vector<int>& targets_to_convert, const AttackConfig& cfg) {
    const int cap = cfg.budget_cap > 0 ? cfg.budget_cap : std::max(1, graph.max_degree());
    const int count = static_cast<int>(targets_to_convert.size());
    std::vector<int> budgets(count, -1);
    detail::parallel_for(count, cfg.threads, [&](int i) {
        Graph scratch = graph;
        budgets[i] = fga_single(model, scratch, partition.attackers, partition.targets, targets_to_convert[i], cap);
    });
    FgaResult res;
    for (int i = 0; i < count; ++i) {
        res.per_target.push_back({targets_to_convert[i], budgets[i]});
        if (budgets[i] < 0) {
            res.infinite = true;
            ++res.unconvertible_count;
        } else {
            res.total_budget += budgets[i];
        }
    }
    return res;
}

}  // namespace canvass
