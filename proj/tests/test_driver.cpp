#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "canvass/driver.hpp"
#include "canvass/trace.hpp"
#include "oracles.hpp"

using namespace canvass;

namespace {

struct Pipeline {
    Graph graph;
    Split split;
    ModelParams model;
    Partition partition;
};

Pipeline small_sbm_pipeline(uint64_t seed, int block = 40, double p = 0.25, double q = 0.03) {
    Pipeline pl;
    pl.graph = generate_sbm({block, p, q, seed});
    pl.split = split_nodes(pl.graph, {0.2, 0.2, 0.6}, seed);
    TrainConfig cfg;
    cfg.epochs = 120;
    pl.model = train(pl.graph, pl.split, cfg, Backbone::gcn, seed);
    pl.partition = init_partition(pl.graph, pl.split, predict(pl.model, pl.graph));
    return pl;
}

AttackConfig quick_config(AttackVariant variant, int conversions, int k = 4) {
    AttackConfig cfg;
    cfg.variant = variant;
    cfg.conversions_required = conversions;
    cfg.influence.k = k;
    cfg.influence.alpha_auto = false;
    cfg.influence.alpha = 0.0;
    cfg.threads = 2;
    return cfg;
}

}  // namespace

TEST_CASE("zero required conversions yield an empty converged trace") {
    const Pipeline pl = small_sbm_pipeline(3);
    const AttackTrace t = run_mac(pl.model, pl.graph, pl.split, pl.partition, quick_config(AttackVariant::mac_dynamic_ip, 0));
    CHECK(t.outcome == Outcome::converged);
    CHECK(t.total_budget == 0);
    CHECK(t.steps.empty());
}

TEST_CASE("recompute_targets equals the initial partition right after training") {
    const Pipeline pl = small_sbm_pipeline(5);
    const std::vector<int> t = recompute_targets(pl.model, pl.graph, pl.split);
    CHECK(t == pl.partition.targets);
}

TEST_CASE("recompute_targets equals a per-node predict loop across an attack") {
    const Pipeline pl = small_sbm_pipeline(7);
    AttackConfig cfg = quick_config(AttackVariant::mac_no_ip, 10);
    const AttackTrace trace = run_mac(pl.model, pl.graph, pl.split, pl.partition, cfg);

    // replay step-by-step and compare the recomputed target sets
    Graph g = pl.graph;
    size_t pi = 0;
    for (const auto& step : trace.steps) {
        for (; pi < trace.perturbations.size() && trace.perturbations[pi].step == step.step; ++pi) {
            const auto& p = trace.perturbations[pi];
            if (p.kind == PerturbationRecord::Kind::link) g.add_edge(p.a, p.b);
            else g.flip_feature(p.a, p.b);
        }
        const auto preds = predict(pl.model, g);
        std::vector<int> expect;
        for (int v : pl.split.test)
            if (preds[v] == 1) expect.push_back(v);
        CHECK(recompute_targets(pl.model, g, pl.split) == expect);
    }
    // the converted node is absent from the recomputed set after its step
    REQUIRE(!trace.steps.empty());
    const auto& s0 = trace.steps.front();
    if (!s0.conversions.empty()) {
        Graph g1 = pl.graph;
        for (const auto& p : trace.perturbations) {
            if (p.step > s0.step) break;
            if (p.kind == PerturbationRecord::Kind::link) g1.add_edge(p.a, p.b);
            else g1.flip_feature(p.a, p.b);
        }
        const auto t1 = recompute_targets(pl.model, g1, pl.split);
        CHECK(!std::binary_search(t1.begin(), t1.end(), s0.conversions.front()));
    }
}

TEST_CASE("a one-link-convertible toy target is converted in the first step with budget 1") {
    // search small instances until one has a min budget of exactly 1
    for (uint64_t seed = 1; seed < 40; ++seed) {
        const Pipeline pl = small_sbm_pipeline(seed, 15, 0.35, 0.05);
        const CandidateSet cands = enumerate_candidates(pl.graph, pl.partition, Scope::full);
        const int cap = std::max(1, pl.graph.max_degree());
        int best = 1 << 20;
        for (int v : pl.partition.targets) {
            const Budget b = min_budget(pl.model, pl.graph, cands, v, cap);
            if (!b.unconvertible) best = std::min(best, b.value);
        }
        if (best != 1) continue;
        const AttackTrace t = run_mac(pl.model, pl.graph, pl.split, pl.partition, quick_config(AttackVariant::mac_no_ip, 1));
        REQUIRE(t.steps.size() == 1);
        CHECK(t.steps[0].conversion_budget == 1);
        CHECK(t.steps[0].net_converted >= 1);
        CHECK(t.outcome == Outcome::converged);
        return;
    }
    FAIL("no toy instance with unit budget found");
}

TEST_CASE("trace audit passes and replay reproduces the final graph for every variant") {
    const Pipeline pl = small_sbm_pipeline(11);
    for (AttackVariant variant : {AttackVariant::mac_dynamic_ip, AttackVariant::mac_fixed_ip, AttackVariant::mac_no_ip,
                                  AttackVariant::mac_lp, AttackVariant::mac_fp}) {
        AttackConfig cfg = quick_config(variant, 8);
        if (variant == AttackVariant::mac_dynamic_ip) cfg.influence.alpha_auto = true;
        const AttackTrace trace = run_mac(pl.model, pl.graph, pl.split, pl.partition, cfg);
        const AuditResult audit = audit_trace(trace, pl.graph);
        INFO(to_string(variant), ": ", audit.detail);
        CHECK(audit.ok);
        CHECK(graph_hash(replay_trace(trace, pl.graph)) == trace.final_graph_hash);
        CHECK(trace.total_budget == static_cast<long long>(trace.perturbations.size()));
        // legality: links span S x T, features stay on attacker rows (audit
        // checks this; double-check scopes here)
        for (const auto& p : trace.perturbations) {
            if (variant == AttackVariant::mac_lp) CHECK(p.kind == PerturbationRecord::Kind::link);
            if (variant == AttackVariant::mac_fp) CHECK(p.kind != PerturbationRecord::Kind::link);
        }
    }
}

TEST_CASE("trace files round trip through JSONL") {
    const Pipeline pl = small_sbm_pipeline(13);
    const AttackTrace trace =
        run_mac(pl.model, pl.graph, pl.split, pl.partition, quick_config(AttackVariant::mac_fixed_ip, 6));
    const auto path = (std::filesystem::temp_directory_path() / "canvass_trace.jsonl").string();
    write_trace(trace, path);
    const AttackTrace back = read_trace(path);
    CHECK(back.steps.size() == trace.steps.size());
    CHECK(back.perturbations.size() == trace.perturbations.size());
    CHECK(back.influences.size() == trace.influences.size());
    CHECK(back.total_budget == trace.total_budget);
    CHECK(back.final_graph_hash == trace.final_graph_hash);
    CHECK(back.initial_attackers == trace.initial_attackers);
    const AuditResult audit = audit_trace(back, pl.graph);
    CHECK(audit.ok);
}

TEST_CASE("fixed-IP step budgets are B(t) + k; dynamic never exceeds fixed on the same seed") {
    const Pipeline pl = small_sbm_pipeline(17);
    AttackConfig fixed = quick_config(AttackVariant::mac_fixed_ip, 10);
    const AttackTrace tf = run_mac(pl.model, pl.graph, pl.split, pl.partition, fixed);
    for (const auto& s : tf.steps) {
        CHECK(s.influential_flips == fixed.influence.k);
        CHECK(s.step_budget == s.conversion_budget + fixed.influence.k);
    }
    AttackConfig dyn = quick_config(AttackVariant::mac_dynamic_ip, 10);
    dyn.influence.alpha_auto = true;
    const AttackTrace td = run_mac(pl.model, pl.graph, pl.split, pl.partition, dyn);
    for (const auto& s : td.steps) {
        const bool applied = s.influential_flips > 0;
        if (applied) CHECK(s.influence > td.alpha);
        else CHECK(s.influence <= td.alpha);
    }
    if (td.outcome == Outcome::converged && tf.outcome == Outcome::converged)
        CHECK(td.total_budget <= tf.total_budget);
}

TEST_CASE("model parameters are untouched by attacks") {
    const Pipeline pl = small_sbm_pipeline(19);
    const ModelParams before = pl.model;
    run_mac(pl.model, pl.graph, pl.split, pl.partition, quick_config(AttackVariant::mac_dynamic_ip, 5));
    CHECK(pl.model.W1 == before.W1);
    CHECK(pl.model.W2 == before.W2);
    CHECK(pl.model.b1 == before.b1);
    CHECK(pl.model.b2 == before.b2);
}

TEST_CASE("net conversion accounting is conserved step to step") {
    const Pipeline pl = small_sbm_pipeline(23);
    const AttackTrace t =
        run_mac(pl.model, pl.graph, pl.split, pl.partition, quick_config(AttackVariant::mac_dynamic_ip, 15));
    int net = 0;
    std::set<int> targets(t.initial_targets.begin(), t.initial_targets.end());
    for (const auto& s : t.steps) {
        net += static_cast<int>(s.conversions.size()) - static_cast<int>(s.backflips.size());
        CHECK(s.net_converted == net);
        // |T| trajectory consistency
        for (int x : s.conversions) targets.erase(x);
        targets.erase(s.target);
        if (std::find(s.conversions.begin(), s.conversions.end(), s.target) == s.conversions.end())
            targets.insert(s.target);
        for (int x : s.backflips) targets.insert(x);
        for (int x : s.new_targets) targets.insert(x);
        CHECK(static_cast<int>(targets.size()) == s.targets_after);
    }
}

TEST_CASE("stagnation terminates a run that cannot improve") {
    const Pipeline pl = small_sbm_pipeline(29);
    AttackConfig cfg = quick_config(AttackVariant::mac_no_ip, 1 << 20);  // unreachable
    cfg.stagnation_limit = 5;
    const AttackTrace t = run_mac(pl.model, pl.graph, pl.split, pl.partition, cfg);
    CHECK((t.outcome == Outcome::stagnated || t.outcome == Outcome::exhausted));
    if (t.outcome == Outcome::stagnated) {
        // the last improvement is exactly stagnation_limit steps before the end
        int best = 0, best_step = 0;
        for (const auto& s : t.steps)
            if (s.net_converted > best) {
                best = s.net_converted;
                best_step = s.step;
            }
        CHECK(t.steps.back().step - best_step >= cfg.stagnation_limit);
    }
}

TEST_CASE("fga baseline: short-circuits, respects the cap, and uses only links") {
    const Pipeline pl = small_sbm_pipeline(31);
    AttackConfig cfg = quick_config(AttackVariant::fga_baseline, 0);
    // pick a handful of current targets plus one already-misclassified node
    std::vector<int> targets(pl.partition.targets.begin(),
                             pl.partition.targets.begin() + std::min<size_t>(5, pl.partition.targets.size()));
    int zero_node = -1;
    const auto preds = predict(pl.model, pl.graph);
    for (int v : pl.split.test)
        if (preds[v] == 0) zero_node = v;
    REQUIRE(zero_node >= 0);
    targets.push_back(zero_node);
    const FgaResult res = run_fga_baseline(pl.model, pl.graph, pl.partition, targets, cfg);
    REQUIRE(res.per_target.size() == targets.size());
    CHECK(res.per_target.back().second == 0);  // short-circuit
    const int cap = std::max(1, pl.graph.max_degree());
    for (const auto& [node, b] : res.per_target) {
        if (b >= 0) CHECK(b <= cap);
    }
    if (!res.infinite) CHECK(res.unconvertible_count == 0);
}
