#include "canvass/trace.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

namespace canvass {

using nlohmann::json;

uint64_t graph_hash(const Graph& g) {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t x) {
        for (int i = 0; i < 8; ++i) {
            h ^= (x >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    mix(static_cast<uint64_t>(g.n()));
    mix(static_cast<uint64_t>(g.d()));
    for (int u = 0; u < g.n(); ++u) {
        for (int v : g.neighbors(u))
            if (u < v) {
                mix(static_cast<uint64_t>(u));
                mix(static_cast<uint64_t>(v));
            }
        mix(0xfeedu);
        for (int b : g.feature_bits(u)) mix(static_cast<uint64_t>(b));
        mix(0xbeefu);
        mix(static_cast<uint64_t>(g.label(u)));
    }
    return h;
}

namespace {

std::string kind_name(PerturbationRecord::Kind k) {
    switch (k) {
        case PerturbationRecord::Kind::link: return "link";
        case PerturbationRecord::Kind::feature: return "feature";
        case PerturbationRecord::Kind::influential: return "influential";
    }
    return "?";
}

PerturbationRecord::Kind kind_from_name(const std::string& s) {
    if (s == "link") return PerturbationRecord::Kind::link;
    if (s == "feature") return PerturbationRecord::Kind::feature;
    if (s == "influential") return PerturbationRecord::Kind::influential;
    throw SchemaError("schema error: unknown perturbation kind '" + s + "'");
}

Outcome outcome_from_name(const std::string& s) {
    if (s == "converged") return Outcome::converged;
    if (s == "stagnated") return Outcome::stagnated;
    if (s == "exhausted") return Outcome::exhausted;
    throw SchemaError("schema error: unknown outcome '" + s + "'");
}

}  // namespace

void write_trace(const AttackTrace& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write " + path);
    json header = {{"type", "header"},
                   {"version", 1},
                   {"variant", to_string(t.variant)},
                   {"backbone", to_string(t.backbone)},
                   {"seed", t.seed},
                   {"n", t.n},
                   {"d", t.d},
                   {"conversions_required", t.conversions_required},
                   {"stagnation_limit", t.stagnation_limit},
                   {"cap", t.budget_cap},
                   {"k", t.k},
                   {"alpha", t.alpha},
                   {"initial_attackers", t.initial_attackers},
                   {"initial_targets", t.initial_targets},
                   {"original_graph_hash", t.original_graph_hash}};
    out << header.dump() << "\n";

    size_t pi = 0, ii = 0;
    for (const auto& s : t.steps) {
        while (pi < t.perturbations.size() && t.perturbations[pi].step == s.step) {
            const auto& p = t.perturbations[pi++];
            out << json{{"type", "perturbation"}, {"step", p.step},        {"kind", kind_name(p.kind)},
                        {"ids", {p.a, p.b}},      {"score", p.score},      {"cumulative_budget", p.cumulative_budget}}
                       .dump()
                << "\n";
        }
        while (ii < t.influences.size() && t.influences[ii].step == s.step) {
            const auto& f = t.influences[ii++];
            out << json{{"type", "influence"}, {"step", f.step},          {"node", f.node},
                        {"influence", f.influence}, {"k_applied", f.k_applied}, {"alpha", f.alpha}}
                       .dump()
                << "\n";
        }
        out << json{{"type", "step"},
                    {"step", s.step},
                    {"target", s.target},
                    {"step_budget", s.step_budget},
                    {"conversion_budget", s.conversion_budget},
                    {"influence", s.influence},
                    {"influential_flips", s.influential_flips},
                    {"targets_after", s.targets_after},
                    {"net_converted", s.net_converted},
                    {"conversions", s.conversions},
                    {"backflips", s.backflips},
                    {"new_targets", s.new_targets}}
                   .dump()
            << "\n";
    }
    out << json{{"type", "summary"},
                {"outcome", to_string(t.outcome)},
                {"total_budget", t.total_budget},
                {"conversions", t.gross_conversions},
                {"net_conversions", t.net_conversions},
                {"steps", t.steps.size()},
                {"wall_time_ms", t.wall_time_ms},
                {"final_graph_hash", t.final_graph_hash}}
               .dump()
        << "\n";
}

AttackTrace read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open " + path);
    AttackTrace t;
    std::string line;
    int lineno = 0;
    bool saw_header = false, saw_summary = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError("schema error: trace line " + std::to_string(lineno) + ": " + e.what());
        }
        const std::string type = rec.value("type", "");
        if (type == "header") {
            saw_header = true;
            t.variant = variant_from_string(rec.at("variant").get<std::string>());
            t.backbone = backbone_from_string(rec.at("backbone").get<std::string>());
            t.seed = rec.at("seed").get<uint64_t>();
            t.n = rec.at("n").get<int>();
            t.d = rec.at("d").get<int>();
            t.conversions_required = rec.at("conversions_required").get<int>();
            t.stagnation_limit = rec.at("stagnation_limit").get<int>();
            t.budget_cap = rec.at("cap").get<int>();
            t.k = rec.at("k").get<int>();
            t.alpha = rec.at("alpha").get<double>();
            t.initial_attackers = rec.at("initial_attackers").get<std::vector<int>>();
            t.initial_targets = rec.at("initial_targets").get<std::vector<int>>();
            t.original_graph_hash = rec.at("original_graph_hash").get<uint64_t>();
        } else if (type == "perturbation") {
            PerturbationRecord p;
            p.step = rec.at("step").get<int>();
            p.kind = kind_from_name(rec.at("kind").get<std::string>());
            p.a = rec.at("ids")[0].get<int>();
            p.b = rec.at("ids")[1].get<int>();
            p.score = rec.at("score").get<double>();
            p.cumulative_budget = rec.at("cumulative_budget").get<long long>();
            t.perturbations.push_back(p);
        } else if (type == "influence") {
            InfluenceRecord f;
            f.step = rec.at("step").get<int>();
            f.node = rec.at("node").get<int>();
            f.influence = rec.at("influence").get<double>();
            f.k_applied = rec.at("k_applied").get<int>();
            f.alpha = rec.at("alpha").get<double>();
            t.influences.push_back(f);
        } else if (type == "step") {
            StepRecord s;
            s.step = rec.at("step").get<int>();
            s.target = rec.at("target").get<int>();
            s.step_budget = rec.at("step_budget").get<long long>();
            s.conversion_budget = rec.at("conversion_budget").get<int>();
            s.influence = rec.at("influence").get<double>();
            s.influential_flips = rec.at("influential_flips").get<int>();
            s.targets_after = rec.at("targets_after").get<int>();
            s.net_converted = rec.at("net_converted").get<int>();
            s.conversions = rec.at("conversions").get<std::vector<int>>();
            s.backflips = rec.at("backflips").get<std::vector<int>>();
            s.new_targets = rec.at("new_targets").get<std::vector<int>>();
            t.steps.push_back(s);
            t.gross_conversions += static_cast<int>(s.conversions.size());
        } else if (type == "summary") {
            saw_summary = true;
            t.outcome = outcome_from_name(rec.at("outcome").get<std::string>());
            t.total_budget = rec.at("total_budget").get<long long>();
            t.net_conversions = rec.at("net_conversions").get<int>();
            t.wall_time_ms = rec.at("wall_time_ms").get<double>();
            t.final_graph_hash = rec.at("final_graph_hash").get<uint64_t>();
        } else {
            throw SchemaError("schema error: trace line " + std::to_string(lineno) + " has unknown type");
        }
    }
    if (!saw_header || !saw_summary) throw SchemaError("schema error: trace missing header or summary line");
    return t;
}

Graph replay_trace(const AttackTrace& t, const Graph& original) {
    Graph g = original;
    for (const auto& p : t.perturbations) {
        if (p.kind == PerturbationRecord::Kind::link) g.add_edge(p.a, p.b);
        else g.flip_feature(p.a, p.b);
    }
    return g;
}

AuditResult audit_trace(const AttackTrace& t, const Graph& original) {
    auto fail = [](std::string why) { return AuditResult{false, std::move(why)}; };

    if (graph_hash(original) != t.original_graph_hash) return fail("original graph hash mismatch");
    if (t.total_budget != static_cast<long long>(t.perturbations.size()))
        return fail("total_budget != perturbation count");

    // replay and hash
    {
        Graph g = original;
        for (const auto& p : t.perturbations) {
            if (p.kind == PerturbationRecord::Kind::link) {
                if (g.has_edge(p.a, p.b)) return fail("replay inserts an existing edge");
                g.add_edge(p.a, p.b);
            } else {
                g.flip_feature(p.a, p.b);
            }
        }
        if (graph_hash(g) != t.final_graph_hash) return fail("final graph hash mismatch after replay");
    }

    // legality against the reconstructed S/T evolution
    std::set<int> S(t.initial_attackers.begin(), t.initial_attackers.end());
    std::set<int> T(t.initial_targets.begin(), t.initial_targets.end());
    size_t pi = 0;
    long long cumulative = 0;
    int prev_net = 0;
    for (const auto& s : t.steps) {
        long long step_sum = 0;
        for (; pi < t.perturbations.size() && t.perturbations[pi].step == s.step; ++pi) {
            const auto& p = t.perturbations[pi];
            ++cumulative;
            ++step_sum;
            if (p.cumulative_budget != cumulative) return fail("cumulative budget mismatch at step " + std::to_string(s.step));
            switch (p.kind) {
                case PerturbationRecord::Kind::link:
                    if (!S.count(p.a)) return fail("link source not in S at step " + std::to_string(s.step));
                    if (!T.count(p.b)) return fail("link target not in T at step " + std::to_string(s.step));
                    break;
                case PerturbationRecord::Kind::feature:
                    if (!S.count(p.a)) return fail("feature flip outside S at step " + std::to_string(s.step));
                    break;
                case PerturbationRecord::Kind::influential:
                    // applied after the chosen target joined S
                    if (p.a != s.target) return fail("influential flip at a non-converted node");
                    break;
            }
        }
        if (step_sum != s.step_budget) return fail("step budget mismatch at step " + std::to_string(s.step));

        const int t_before = static_cast<int>(T.size());
        for (int x : s.conversions) {
            if (x != s.target && !T.count(x)) return fail("conversion of a non-target at step " + std::to_string(s.step));
            T.erase(x);
            S.insert(x);
        }
        // the chosen target leaves T even when its conversion failed to hold
        T.erase(s.target);
        if (std::find(s.conversions.begin(), s.conversions.end(), s.target) == s.conversions.end()) T.insert(s.target);
        for (int x : s.backflips) {
            if (!S.count(x)) return fail("backflip of a node not in S at step " + std::to_string(s.step));
            S.erase(x);
            T.insert(x);
        }
        for (int x : s.new_targets) T.insert(x);
        if (static_cast<int>(T.size()) != s.targets_after)
            return fail("target-count conservation violated at step " + std::to_string(s.step) + ": have " +
                        std::to_string(T.size()) + ", recorded " + std::to_string(s.targets_after));
        const int delta = s.net_converted - prev_net;
        const int expected = static_cast<int>(s.conversions.size()) - static_cast<int>(s.backflips.size());
        if (delta != expected) return fail("net conversion accounting violated at step " + std::to_string(s.step));
        prev_net = s.net_converted;
        (void)t_before;
    }
    if (pi != t.perturbations.size()) return fail("perturbation records outside any step");
    return AuditResult{};
}

}  // namespace canvass
