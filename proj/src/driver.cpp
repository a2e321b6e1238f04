#include "canvass/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "canvass/trace.hpp"
#include "gnn_kernels.hpp"
#include "parallel.hpp"

namespace canvass {

std::string to_string(AttackVariant v) {
    switch (v) {
        case AttackVariant::mac_dynamic_ip: return "mac_dynamic_ip";
        case AttackVariant::mac_fixed_ip: return "mac_fixed_ip";
        case AttackVariant::mac_no_ip: return "mac_no_ip";
        case AttackVariant::mac_lp: return "mac_lp";
        case AttackVariant::mac_fp: return "mac_fp";
        case AttackVariant::fga_baseline: return "fga_baseline";
    }
    return "?";
}

AttackVariant variant_from_string(const std::string& s) {
    for (AttackVariant v : {AttackVariant::mac_dynamic_ip, AttackVariant::mac_fixed_ip, AttackVariant::mac_no_ip,
                            AttackVariant::mac_lp, AttackVariant::mac_fp, AttackVariant::fga_baseline})
        if (to_string(v) == s) return v;
    throw ValidationError("unknown attack variant '" + s + "'");
}

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::converged: return "converged";
        case Outcome::stagnated: return "stagnated";
        case Outcome::exhausted: return "exhausted";
    }
    return "?";
}

std::vector<int> recompute_targets(const ModelParams& model, const Graph& graph, const Split& split) {
    const std::vector<int> preds = predict(model, graph);
    std::vector<int> out;
    for (int v : split.test)
        if (preds[v] == 1) out.push_back(v);
    return out;
}

namespace {

Scope scope_for(AttackVariant v) {
    if (v == AttackVariant::mac_lp) return Scope::links_only;
    if (v == AttackVariant::mac_fp) return Scope::features_only;
    return Scope::full;
}

bool uses_influence(AttackVariant v) {
    return v == AttackVariant::mac_dynamic_ip || v == AttackVariant::mac_fixed_ip;
}

double lower_decile(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    return xs[std::min(xs.size() - 1, xs.size() / 10)];
}

void sorted_insert(std::vector<int>& v, int x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x) v.insert(it, x);
}

void sorted_erase(std::vector<int>& v, int x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it != v.end() && *it == x) v.erase(it);
}

AttackTrace run_mac_impl(const ModelParams& model, const Graph& original, const Split& split,
                         const Partition& initial, const AttackConfig& cfg, double resolved_alpha) {
    const auto t_start = std::chrono::steady_clock::now();
    Graph g = original;
    Partition part = initial;
    const Scope scope = scope_for(cfg.variant);
    const int cap = cfg.budget_cap > 0 ? cfg.budget_cap : std::max(1, original.max_degree());
    const int k = cfg.influence.k;

    AttackTrace trace;
    trace.variant = cfg.variant;
    trace.backbone = model.backbone;
    trace.seed = cfg.seed;
    trace.n = g.n();
    trace.d = g.d();
    trace.conversions_required = cfg.conversions_required;
    trace.stagnation_limit = cfg.stagnation_limit;
    trace.budget_cap = cap;
    trace.k = k;
    trace.alpha = resolved_alpha;
    trace.initial_attackers = part.attackers;
    trace.initial_targets = part.targets;
    trace.original_graph_hash = graph_hash(original);

    auto finish = [&](Outcome outcome) {
        trace.outcome = outcome;
        trace.final_graph_hash = graph_hash(g);
        trace.net_conversions = static_cast<int>(part.converted.size());
        trace.wall_time_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
        return trace;
    };

    if (part.targets.empty()) throw ValidationError("attack cannot start: empty target set");
    if (cfg.conversions_required <= 0) return finish(Outcome::converged);

    long long budget = 0;
    int best_net = 0;
    int last_improved_step = 0;
    int step = 0;

    while (true) {
        ++step;
        if (cfg.max_steps > 0 && step > cfg.max_steps) return finish(Outcome::stagnated);
        if (part.targets.empty()) return finish(Outcome::exhausted);

        const detail::GnnCache cache = detail::build_cache(model, g);
        const CandidateSet cands = enumerate_candidates(g, part, scope);

        // (a) per-target ranked perturbations and minimum budgets
        const int nt = static_cast<int>(part.targets.size());
        std::vector<detail::TargetPlan> plans(nt);
        detail::parallel_for(nt, cfg.threads, [&](int i) {
            plans[i] = detail::plan_target(model, g, cache, cands, part.targets[i], cap);
        });

        // (b) minimum-budget set M
        int best_budget = -1;
        for (int i = 0; i < nt; ++i) {
            if (plans[i].budget.unconvertible) continue;
            if (best_budget < 0 || plans[i].budget.value < best_budget) best_budget = plans[i].budget.value;
        }
        if (best_budget < 0) return finish(Outcome::exhausted);
        std::vector<int> min_set;  // indices into part.targets, ascending ids
        for (int i = 0; i < nt; ++i)
            if (!plans[i].budget.unconvertible && plans[i].budget.value == best_budget) min_set.push_back(i);

        // (c) look-ahead influence over M (skipped for No-IP/LP/FP)
        int chosen_idx = min_set.front();
        double chosen_influence = 0.0;
        std::vector<int> chosen_flips;
        if (uses_influence(cfg.variant)) {
            const int m = static_cast<int>(min_set.size());
            std::vector<detail::LookaheadResult> looks(m);
            detail::parallel_for(m, cfg.threads, [&](int i) {
                thread_local Graph scratch;
                scratch = g;
                const int v = part.targets[min_set[i]];
                const auto& entries = plans[min_set[i]].ranked.entries;
                detail::apply_entries(scratch, entries, best_budget);
                looks[i] = detail::lookahead_in_place(model, scratch, part.targets, v, k, cfg.influence.form);
            });
            int pick = 0;
            for (int i = 1; i < m; ++i)
                if (looks[i].influence > looks[pick].influence) pick = i;
            chosen_idx = min_set[pick];
            chosen_influence = looks[pick].influence;
            chosen_flips = std::move(looks[pick].flips);
        }
        const int t = part.targets[chosen_idx];

        // (d) commit the conversion perturbations
        const auto& entries = plans[chosen_idx].ranked.entries;
        for (int i = 0; i < best_budget; ++i) {
            const auto& e = entries[i];
            if (e.kind == PerturbationEntry::Kind::link) g.add_edge(e.a, e.b);
            else g.flip_feature(e.a, e.b);
            ++budget;
            trace.perturbations.push_back({step,
                                           e.kind == PerturbationEntry::Kind::link
                                               ? PerturbationRecord::Kind::link
                                               : PerturbationRecord::Kind::feature,
                                           e.a, e.b, e.score, budget});
        }

        // converted targets join the attacker set before any further
        // perturbation touches them
        sorted_erase(part.targets, t);
        sorted_insert(part.attackers, t);

        // (e) influential perturbations at the converted node
        int flips_applied = 0;
        const bool apply_ip = cfg.variant == AttackVariant::mac_fixed_ip ||
                              (cfg.variant == AttackVariant::mac_dynamic_ip && chosen_influence > resolved_alpha);
        if (apply_ip) {
            for (int b : chosen_flips) {
                g.flip_feature(t, b);
                ++budget;
                ++flips_applied;
                trace.perturbations.push_back({step, PerturbationRecord::Kind::influential, t, b, 0.0, budget});
            }
        }
        if (uses_influence(cfg.variant))
            trace.influences.push_back({step, t, chosen_influence, flips_applied, resolved_alpha});

        // (f) recompute the target set and reconcile conversions/backflips
        const std::vector<int> new_targets_all = recompute_targets(model, g, split);
        StepRecord rec;
        rec.step = step;
        rec.target = t;
        rec.conversion_budget = best_budget;
        rec.influence = chosen_influence;
        rec.influential_flips = flips_applied;
        rec.step_budget = best_budget + flips_applied;

        std::vector<int> converted_set = part.converted;  // sorted copy for membership checks
        std::sort(converted_set.begin(), converted_set.end());
        const bool t_holds = !std::binary_search(new_targets_all.begin(), new_targets_all.end(), t);
        if (t_holds) {
            part.converted.push_back(t);
            rec.conversions.push_back(t);
        } else {
            // the influential flips pushed t itself back across the boundary
            sorted_erase(part.attackers, t);
        }
        for (int x : part.targets) {
            if (!std::binary_search(new_targets_all.begin(), new_targets_all.end(), x)) {
                // collateral conversion: a target flipped to 0 without being chosen
                rec.conversions.push_back(x);
                part.converted.push_back(x);
                sorted_insert(part.attackers, x);
            }
        }
        for (int x : new_targets_all) {
            if (std::binary_search(converted_set.begin(), converted_set.end(), x)) {
                rec.backflips.push_back(x);
                sorted_erase(part.attackers, x);
                part.converted.erase(std::find(part.converted.begin(), part.converted.end(), x));
            }
        }
        {
            std::vector<int> t_new;
            std::vector<int> prev_targets = part.targets;  // sorted, before reassignment
            for (int x : new_targets_all) {
                if (std::binary_search(part.attackers.begin(), part.attackers.end(), x)) continue;
                t_new.push_back(x);
                const bool was_target = std::binary_search(prev_targets.begin(), prev_targets.end(), x) || x == t;
                const bool was_backflip = std::find(rec.backflips.begin(), rec.backflips.end(), x) != rec.backflips.end();
                if (!was_target && !was_backflip) rec.new_targets.push_back(x);
            }
            part.targets = std::move(t_new);
        }
        rec.targets_after = static_cast<int>(part.targets.size());
        rec.net_converted = static_cast<int>(part.converted.size());
        trace.steps.push_back(rec);
        trace.gross_conversions += static_cast<int>(rec.conversions.size());
        trace.total_budget = budget;

        // (g) termination
        const int net = rec.net_converted;
        if (net > best_net) {
            best_net = net;
            last_improved_step = step;
        }
        if (net >= cfg.conversions_required) return finish(Outcome::converged);
        if (step - last_improved_step >= cfg.stagnation_limit) return finish(Outcome::stagnated);
    }
}

}  // namespace

AttackTrace run_mac(const ModelParams& model, const Graph& graph, const Split& split, const Partition& partition,
                    const AttackConfig& cfg) {
    if (cfg.variant == AttackVariant::fga_baseline)
        throw ValidationError("run_mac drives MAC variants; use run_fga_baseline for the single-step baseline");
    double alpha = cfg.influence.alpha;
    if (cfg.variant == AttackVariant::mac_dynamic_ip && cfg.influence.alpha_auto) {
        // calibrate the threshold on the per-conversion influences of a
        // Fixed-IP run over the same instance; the lower decile prunes only
        // conversions whose influence falls clearly below the observed range
        AttackConfig cal = cfg;
        cal.variant = AttackVariant::mac_fixed_ip;
        cal.conversions_required = std::min(150, std::max(1, cfg.conversions_required));
        cal.influence.alpha_auto = false;
        const AttackTrace cal_trace = run_mac_impl(model, graph, split, partition, cal, 0.0);
        std::vector<double> vals;
        for (const auto& s : cal_trace.steps)
            if (!s.conversions.empty()) vals.push_back(s.influence);
        alpha = lower_decile(std::move(vals));
    }
    return run_mac_impl(model, graph, split, partition, cfg, alpha);
}

}  // namespace canvass
