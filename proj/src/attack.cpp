#include "canvass/attack.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "gnn_kernels.hpp"

namespace canvass {

CandidateSet enumerate_candidates(const Graph& graph, const Partition& partition, Scope scope) {
    if (partition.attackers.empty() || partition.targets.empty())
        throw ValidationError("candidate enumeration needs nonempty attacker and target sets");
    CandidateSet c;
    c.attackers = partition.attackers;
    c.targets = partition.targets;
    c.scope = scope;
    c.d = graph.d();
    if (scope != Scope::features_only) {
        long long existing = 0;
        for (int s : c.attackers) {
            const auto& t = c.targets;
            for (int u : graph.neighbors(s))
                if (std::binary_search(t.begin(), t.end(), u)) ++existing;
        }
        c.link_candidates = static_cast<long long>(c.attackers.size()) * c.targets.size() - existing;
    }
    if (scope != Scope::links_only) c.feature_candidates = static_cast<long long>(c.attackers.size()) * c.d;
    return c;
}

namespace {

/// score desc, links before features, then lexicographic ids. Total order on
/// distinct entries, so selection and sorting are deterministic.
bool entry_less(const PerturbationEntry& x, const PerturbationEntry& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.kind != y.kind) return x.kind == PerturbationEntry::Kind::link;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
}

/// Exact bounded top-k under entry_less: a size-k heap whose top is the
/// worst kept entry. Candidates scoring strictly below worst_score() can be
/// skipped without being materialized.
class TopK {
public:
    explicit TopK(size_t limit) : limit_(limit) {}

    bool full() const { return heap_.size() >= limit_; }
    double worst_score() const { return heap_.top().score; }

    void push(const PerturbationEntry& e) {
        if (heap_.size() < limit_) {
            heap_.push(e);
        } else if (entry_less(e, heap_.top())) {
            heap_.pop();
            heap_.push(e);
        }
    }

    std::vector<PerturbationEntry> extract_sorted() {
        std::vector<PerturbationEntry> out;
        out.reserve(heap_.size());
        while (!heap_.empty()) {
            out.push_back(heap_.top());
            heap_.pop();
        }
        std::reverse(out.begin(), out.end());
        return out;
    }

private:
    struct WorstOnTop {
        // priority_queue surfaces the comparator-greatest element; ordering
        // by "better-than" puts the worst kept entry on top
        bool operator()(const PerturbationEntry& a, const PerturbationEntry& b) const { return entry_less(a, b); }
    };
    std::priority_queue<PerturbationEntry, std::vector<PerturbationEntry>, WorstOnTop> heap_;
    size_t limit_;
};

RankedPerturbations rank_with_cache(const ModelParams& model, const Graph& graph, const detail::GnnCache& cache,
                                    const CandidateSet& cand, int v, size_t limit, detail::GradContext& ctx) {
    detail::build_grad_into(ctx, model, graph, cache, LossSpec::attack(v));
    const int h = model.hidden;
    const int d = cand.d;

    if (limit == 0) {
        // unbounded: enumerate everything (meant for small instances)
        std::vector<PerturbationEntry> entries;
        if (cand.scope != Scope::features_only) {
            for (int s : cand.attackers) {
                const bool s_sup = ctx.dA_row_support[s];
                for (int t : cand.targets) {
                    if (!s_sup && !ctx.dA_row_support[t]) continue;
                    if (graph.has_edge(s, t)) continue;
                    const double score = 0.5 * (ctx.dA(s, t) + ctx.dA(t, s));
                    if (score > 0.0) entries.push_back({PerturbationEntry::Kind::link, s, t, score});
                }
            }
        }
        if (cand.scope != Scope::links_only) {
            std::vector<double> row(d);
            for (int s : cand.attackers) {
                if (!ctx.dX_row_support[s]) continue;
                ctx.dX_row(s, row.data());
                for (int b = 0; b < d; ++b) {
                    const double score = graph.has_feature(s, b) ? -row[b] : row[b];
                    if (score > 0.0) entries.push_back({PerturbationEntry::Kind::feature, s, b, score});
                }
            }
        }
        std::sort(entries.begin(), entries.end(), entry_less);
        return RankedPerturbations{std::move(entries)};
    }

    TopK top(limit);
    const bool is_gcn = model.backbone == Backbone::gcn;
    auto has_grad_row = [&](int i) { return ctx.go_nz[i] || ctx.gz_nz[i]; };

    if (cand.scope != Scope::features_only) {
        std::vector<int> s_rest, t_rest;
        auto try_pair = [&](int s, int t) {
            if (graph.has_edge(s, t)) return;
            const double score = 0.5 * (ctx.dA(s, t) + ctx.dA(t, s));
            if (score > 0.0) top.push({PerturbationEntry::Kind::link, s, t, score});
        };
        // pairs with a gradient-row endpoint get exact O(h) queries
        for (int t : cand.targets)
            if (!has_grad_row(t)) t_rest.push_back(t);
        for (int s : cand.attackers) {
            if (has_grad_row(s)) {
                for (int t : cand.targets) try_pair(s, t);
            } else {
                s_rest.push_back(s);
                for (int t : cand.targets)
                    if (has_grad_row(t)) try_pair(s, t);
            }
        }
        // remaining pairs: for gcn the score is 0.5*(gdeg_s + gdeg_t), so the
        // top sums come out of a sorted-frontier heap without per-pair math;
        // for sage those scores are exactly zero and are filtered anyway
        if (is_gcn && !s_rest.empty() && !t_rest.empty()) {
            auto by_gdeg = [&](int x, int y) {
                if (ctx.gdeg[x] != ctx.gdeg[y]) return ctx.gdeg[x] > ctx.gdeg[y];
                return x < y;
            };
            std::sort(s_rest.begin(), s_rest.end(), by_gdeg);
            std::sort(t_rest.begin(), t_rest.end(), by_gdeg);
            struct Cell {
                double sum;
                int i, j;
            };
            auto cell_less = [](const Cell& a, const Cell& b) { return a.sum < b.sum; };
            std::priority_queue<Cell, std::vector<Cell>, decltype(cell_less)> frontier(cell_less);
            auto sum_at = [&](int i, int j) { return 0.5 * (ctx.gdeg[s_rest[i]] + ctx.gdeg[t_rest[j]]); };
            frontier.push({sum_at(0, 0), 0, 0});
            while (!frontier.empty()) {
                const Cell c = frontier.top();
                frontier.pop();
                if (c.sum <= 0.0) break;
                if (top.full() && c.sum < top.worst_score()) break;
                try_pair(s_rest[c.i], t_rest[c.j]);
                if (c.j + 1 < static_cast<int>(t_rest.size())) frontier.push({sum_at(c.i, c.j + 1), c.i, c.j + 1});
                if (c.j == 0 && c.i + 1 < static_cast<int>(s_rest.size()))
                    frontier.push({sum_at(c.i + 1, 0), c.i + 1, 0});
            }
        }
    }

    if (cand.scope != Scope::links_only) {
        // feature scores are dots of a per-attacker pullback against W1
        // rows; weight-row norms bound them, so most bits are skipped
        std::vector<int> supported;
        for (int s : cand.attackers)
            if (ctx.dX_row_support[s]) supported.push_back(s);
        Matrix pullbacks(static_cast<int>(supported.size()), 2 * h);
        std::vector<std::pair<double, int>> order;  // (norm, index into supported)
        for (size_t i = 0; i < supported.size(); ++i) {
            double* buf = pullbacks.row(static_cast<int>(i));
            if (!ctx.dX_pullback(supported[i], buf, buf + h)) continue;
            order.push_back({std::sqrt(dot(buf, buf, 2 * h)), static_cast<int>(i)});
        }
        std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        const double max_bit_norm = cache.w1_bit_norm.empty() ? 0.0 : cache.w1_bit_norm[cache.w1_bit_order[0]];
        for (const auto& [unorm, idx] : order) {
            if (top.full() && unorm * max_bit_norm < top.worst_score()) break;
            const int s = supported[idx];
            const double* buf = pullbacks.row(idx);
            for (int pos = 0; pos < d; ++pos) {
                const int b = cache.w1_bit_order[pos];
                if (top.full() && unorm * cache.w1_bit_norm[b] < top.worst_score()) break;
                const double raw = ctx.feature_score_from_pullback(buf, buf + h, b);
                const double score = graph.has_feature(s, b) ? -raw : raw;
                if (score > 0.0) top.push({PerturbationEntry::Kind::feature, s, b, score});
            }
        }
    }

    return RankedPerturbations{top.extract_sorted()};
}

}  // namespace

RankedPerturbations rank_for_target(const ModelParams& model, const Graph& graph, const CandidateSet& candidates,
                                    int v, size_t limit) {
    const detail::GnnCache cache = detail::build_cache(model, graph);
    detail::GradContext ctx;
    return rank_with_cache(model, graph, cache, candidates, v, limit, ctx);
}

namespace detail {

void apply_entries(Graph& graph, const std::vector<PerturbationEntry>& entries, int k) {
    for (int i = 0; i < k; ++i) {
        const auto& e = entries[i];
        if (e.kind == PerturbationEntry::Kind::link) graph.add_edge(e.a, e.b);
        else graph.flip_feature(e.a, e.b);
    }
}

void revert_entries(Graph& graph, const std::vector<PerturbationEntry>& entries, int k) {
    for (int i = k - 1; i >= 0; --i) {
        const auto& e = entries[i];
        if (e.kind == PerturbationEntry::Kind::link) graph.remove_edge(e.a, e.b);
        else graph.flip_feature(e.a, e.b);
    }
}

bool check_conversion_cached(const ModelParams& model, const Graph& graph, const GnnCache& cache,
                             const RankedPerturbations& ranked, int k, int v) {
    if (k > static_cast<int>(ranked.entries.size()))
        throw std::out_of_range("prefix length exceeds ranked entry count");
    Overlay ov;
    ov.bind(model, graph, cache);
    for (int i = 0; i < k; ++i) {
        const auto& e = ranked.entries[i];
        if (e.kind == PerturbationEntry::Kind::link) ov.add_edge(e.a, e.b);
        else ov.flip_bit(e.a, e.b);
    }
    return ov.predict_at(v) == 0;
}

TargetPlan plan_target(const ModelParams& model, const Graph& graph, const GnnCache& cache,
                       const CandidateSet& candidates, int v, int cap) {
    thread_local Overlay ov;
    thread_local GradContext ctx;

    TargetPlan plan;
    ov.bind(model, graph, cache);
    if (ov.predict_at(v) == 0) {  // already misclassified
        plan.budget = Budget::of(0);
        return plan;
    }
    plan.ranked = rank_with_cache(model, graph, cache, candidates, v, static_cast<size_t>(cap), ctx);
    const int avail = static_cast<int>(plan.ranked.entries.size());
    const int cap_eff = std::min(cap, avail);
    if (cap_eff == 0) {
        plan.budget = Budget::infinite();
        return plan;
    }

    auto converts = [&](int k) {
        ov.bind(model, graph, cache);
        for (int i = 0; i < k; ++i) {
            const auto& e = plan.ranked.entries[i];
            if (e.kind == PerturbationEntry::Kind::link) ov.add_edge(e.a, e.b);
            else ov.flip_bit(e.a, e.b);
        }
        return ov.predict_at(v) == 0;
    };

    // doubling phase, clamped at the cap
    int upper = std::max(1, std::min(graph.degree(v), cap_eff));
    while (!converts(upper)) {
        if (upper >= cap_eff) {
            plan.budget = Budget::infinite();
            return plan;
        }
        upper = std::min(2 * upper, cap_eff);
    }
    // bisection: `lower` never converts, `upper` always does
    int lower = 0;
    while (upper - lower > 1) {
        const int mid = (upper + lower) / 2;
        if (converts(mid)) upper = mid;
        else lower = mid;
    }
    plan.budget = Budget::of(upper);
    return plan;
}

}  // namespace detail

Graph apply_top_k(const Graph& graph, const CandidateSet&, const RankedPerturbations& ranked, int k) {
    if (k < 0 || k > static_cast<int>(ranked.entries.size()))
        throw std::out_of_range("apply_top_k: k=" + std::to_string(k) + " exceeds " +
                                std::to_string(ranked.entries.size()) + " ranked entries");
    Graph out = graph;
    detail::apply_entries(out, ranked.entries, k);
    return out;
}

bool check_conversion(const ModelParams& model, const Graph& graph, const CandidateSet&,
                      const RankedPerturbations& ranked, int k, int v) {
    const detail::GnnCache cache = detail::build_cache(model, graph);
    return detail::check_conversion_cached(model, graph, cache, ranked, k, v);
}

Budget min_budget(const ModelParams& model, const Graph& graph, const CandidateSet& candidates, int v, int cap) {
    const detail::GnnCache cache = detail::build_cache(model, graph);
    return detail::plan_target(model, graph, cache, candidates, v, cap).budget;
}

}  // namespace canvass
