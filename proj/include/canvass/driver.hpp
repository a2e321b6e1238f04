#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "canvass/attack.hpp"
#include "canvass/gnn.hpp"
#include "canvass/graph.hpp"
#include "canvass/influence.hpp"

namespace canvass {

enum class AttackVariant { mac_dynamic_ip, mac_fixed_ip, mac_no_ip, mac_lp, mac_fp, fga_baseline };

std::string to_string(AttackVariant v);
AttackVariant variant_from_string(const std::string& s);

struct AttackConfig {
    AttackVariant variant = AttackVariant::mac_dynamic_ip;
    int conversions_required = 150;
    InfluenceConfig influence;
    int stagnation_limit = 40;
    int budget_cap = 0;  // 0 -> max degree of the initial graph
    uint64_t seed = 0;
    int max_steps = 0;  // 0 -> unbounded; safety valve for harness runs
    int threads = 0;    // 0 -> hardware concurrency
};

enum class Outcome { converged, stagnated, exhausted };

std::string to_string(Outcome o);

struct PerturbationRecord {
    enum class Kind { link, feature, influential };
    int step = 0;
    Kind kind = Kind::link;
    int a = -1;
    int b = -1;
    double score = 0.0;
    long long cumulative_budget = 0;
};

struct InfluenceRecord {
    int step = 0;
    int node = -1;
    double influence = 0.0;
    int k_applied = 0;
    double alpha = 0.0;
};

struct StepRecord {
    int step = 0;
    int target = -1;
    long long step_budget = 0;
    int conversion_budget = 0;   // B(t)
    double influence = 0.0;      // I(t); 0 for variants that skip influence
    int influential_flips = 0;
    int targets_after = 0;
    int net_converted = 0;
    std::vector<int> conversions;  // nodes leaving T as predicted-0 this step
    std::vector<int> backflips;    // previously converted nodes re-entering T
    std::vector<int> new_targets;  // test nodes entering T for the first time
};

struct AttackTrace {
    AttackVariant variant = AttackVariant::mac_dynamic_ip;
    Backbone backbone = Backbone::gcn;
    uint64_t seed = 0;
    int n = 0, d = 0;
    int conversions_required = 0;
    int stagnation_limit = 0;
    int budget_cap = 0;
    int k = 0;
    double alpha = 0.0;
    std::vector<int> initial_attackers;
    std::vector<int> initial_targets;
    uint64_t original_graph_hash = 0;

    std::vector<StepRecord> steps;
    std::vector<PerturbationRecord> perturbations;
    std::vector<InfluenceRecord> influences;

    Outcome outcome = Outcome::converged;
    long long total_budget = 0;
    int gross_conversions = 0;
    int net_conversions = 0;
    uint64_t final_graph_hash = 0;
    double wall_time_ms = 0.0;
};

/// The multi-step attack loop. The graph and partition are taken by value
/// semantics (copied internally); the model is never modified.
AttackTrace run_mac(const ModelParams& model, const Graph& graph, const Split& split, const Partition& partition,
                    const AttackConfig& config);

struct FgaResult {
    bool infinite = false;  // some target exceeded the cap
    long long total_budget = 0;  // sum over converted targets
    int unconvertible_count = 0;
    std::vector<std::pair<int, int>> per_target;  // (node, budget); -1 budget = unconvertible
};

/// Single-step link-only baseline: each target is attacked independently on
/// the original graph, greedily inserting the best link and recomputing
/// gradients after every insertion.
FgaResult run_fga_baseline(const ModelParams& model, const Graph& graph, const Partition& partition,
                           const std::vector<int>& targets_to_convert, const AttackConfig& config);

/// Test nodes currently predicted 1.
std::vector<int> recompute_targets(const ModelParams& model, const Graph& graph, const Split& split);

}  // namespace canvass
