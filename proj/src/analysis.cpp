#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include "canvass/harness.hpp"

namespace canvass {

std::map<int, long long> hop_distance_analysis(const AttackTrace& trace, const Graph& original,
                                               const std::vector<int>& initial_attackers) {
    Graph g = original;
    std::unordered_map<int, int> hop;
    for (int s : initial_attackers) hop[s] = 0;
    std::set<int> attackers(initial_attackers.begin(), initial_attackers.end());
    std::unordered_map<int, std::vector<int>> attack_sources;  // target -> inserted-link sources
    std::vector<int> converted;

    size_t pi = 0;
    for (const auto& step : trace.steps) {
        for (; pi < trace.perturbations.size() && trace.perturbations[pi].step == step.step; ++pi) {
            const auto& p = trace.perturbations[pi];
            if (p.kind == PerturbationRecord::Kind::link) {
                attack_sources[p.b].push_back(p.a);
                g.add_edge(p.a, p.b);
            } else {
                g.flip_feature(p.a, p.b);
            }
        }
        for (int x : step.conversions) {
            int best = std::numeric_limits<int>::max();
            const auto it = attack_sources.find(x);
            if (it != attack_sources.end()) {
                for (int s : it->second) {
                    const auto hs = hop.find(s);
                    if (hs != hop.end()) best = std::min(best, hs->second);
                }
            }
            if (best == std::numeric_limits<int>::max()) {
                // feature-only conversion: nearest attacker adjacent at
                // conversion time
                for (int nb : g.neighbors(x)) {
                    if (!attackers.count(nb)) continue;
                    const auto hs = hop.find(nb);
                    if (hs != hop.end()) best = std::min(best, hs->second);
                }
            }
            hop[x] = best == std::numeric_limits<int>::max() ? 1 : best + 1;
            attackers.insert(x);
            converted.push_back(x);
        }
        for (int x : step.backflips) {
            attackers.erase(x);
            converted.erase(std::find(converted.begin(), converted.end(), x));
        }
    }

    std::map<int, long long> hist;
    for (int x : converted) ++hist[hop[x]];
    return hist;
}

std::vector<AttackerRow> attacker_stats(const AttackTrace& trace, const Graph& original, const ModelParams& model) {
    const Matrix logits = forward(model, original);

    // every node that was ever an attacker
    std::set<int> nodes(trace.initial_attackers.begin(), trace.initial_attackers.end());
    for (const auto& s : trace.steps)
        for (int x : s.conversions) nodes.insert(x);

    std::unordered_map<int, AttackerRow> rows;
    for (int v : nodes) {
        AttackerRow r;
        r.node = v;
        r.degree = original.degree(v);
        r.margin = classification_margin(logits, v, original.label(v));
        rows[v] = r;
    }
    for (const auto& p : trace.perturbations) {
        auto it = rows.find(p.a);
        if (it == rows.end()) continue;
        if (p.kind == PerturbationRecord::Kind::influential) ++it->second.influential_flips;
        else ++it->second.attack_perturbations;
    }
    for (const auto& f : trace.influences) {
        auto it = rows.find(f.node);
        if (it == rows.end()) continue;
        it->second.influence = f.influence;  // the latest conversion wins
        it->second.has_influence = true;
    }

    std::vector<AttackerRow> out;
    out.reserve(rows.size());
    for (int v : nodes) out.push_back(rows[v]);
    return out;
}

}  // namespace canvass
