#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "canvass/gnn.hpp"
#include "canvass/graph.hpp"

namespace canvass {

enum class Scope { full, links_only, features_only };

/// Legal MBACC perturbations for the current partition: absent S-to-T links
/// and bit flips on attacker feature rows. Link masks and flip directions
/// are evaluated lazily against the graph handed to rank/apply.
struct CandidateSet {
    std::vector<int> attackers;  // sorted
    std::vector<int> targets;    // sorted
    Scope scope = Scope::full;
    int d = 0;
    long long link_candidates = 0;     // |S||T| - existing S->T edges
    long long feature_candidates = 0;  // |S| * d
};

CandidateSet enumerate_candidates(const Graph& graph, const Partition& partition, Scope scope);

struct PerturbationEntry {
    enum class Kind { link, feature };
    Kind kind = Kind::link;
    int a = -1;  // attacker node
    int b = -1;  // link: target node; feature: bit index
    double score = 0.0;
};

/// Entries sorted by score descending; ties break links-before-features then
/// by (a, b). Only strictly positive scores are kept.
struct RankedPerturbations {
    std::vector<PerturbationEntry> entries;
};

/// Scores every candidate with one gradient computation of the attack loss
/// at v (no recomputation between perturbations), merges links and features,
/// and sorts. `limit`, when nonzero, keeps only the top entries; the kept
/// prefix is identical to the full sort's prefix.
RankedPerturbations rank_for_target(const ModelParams& model, const Graph& graph, const CandidateSet& candidates,
                                    int v, size_t limit = 0);

/// Returns a copy of the graph with the first k entries applied. Throws
/// std::out_of_range if k exceeds the entry count.
Graph apply_top_k(const Graph& graph, const CandidateSet& candidates, const RankedPerturbations& ranked, int k);

/// True iff v is predicted 0 after hypothetically applying the top-k
/// entries. The graph is not mutated.
bool check_conversion(const ModelParams& model, const Graph& graph, const CandidateSet& candidates,
                      const RankedPerturbations& ranked, int k, int v);

/// Minimum prefix length of the ranked perturbations that converts a node,
/// or Unconvertible.
struct Budget {
    bool unconvertible = false;
    int value = 0;

    static Budget infinite() { return Budget{true, 0}; }
    static Budget of(int v) { return Budget{false, v}; }
    bool operator==(const Budget&) const = default;
};

/// Bisection search per the doubling-then-halving schedule. cap bounds the
/// probed prefix length; exceeding it yields Unconvertible.
Budget min_budget(const ModelParams& model, const Graph& graph, const CandidateSet& candidates, int v, int cap);

namespace detail {
struct GnnCache;

/// rank + min_budget sharing one forward cache; used by the attack drivers.
struct TargetPlan {
    Budget budget;
    RankedPerturbations ranked;
};
TargetPlan plan_target(const ModelParams& model, const Graph& graph, const GnnCache& cache,
                       const CandidateSet& candidates, int v, int cap);
bool check_conversion_cached(const ModelParams& model, const Graph& graph, const GnnCache& cache,
                             const RankedPerturbations& ranked, int k, int v);
void apply_entries(Graph& graph, const std::vector<PerturbationEntry>& entries, int k);
void revert_entries(Graph& graph, const std::vector<PerturbationEntry>& entries, int k);
}  // namespace detail

}  // namespace canvass
