#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "canvass/harness.hpp"
#include "oracles.hpp"

using namespace canvass;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(const std::string& out = "") {
    ExperimentConfig cfg;
    cfg.dataset.is_sbm = true;
    cfg.dataset.sbm = {40, 0.25, 0.03, 0};
    cfg.split_ratios = {0.2, 0.2, 0.6};
    cfg.train.epochs = 100;
    cfg.attack.variant = AttackVariant::mac_dynamic_ip;
    cfg.attack.conversions_required = 8;
    cfg.attack.influence.k = 4;
    cfg.attack.threads = 2;
    cfg.trials = 2;
    cfg.base_seed = 5;
    cfg.out_dir = out;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("degenerate experiment: one trial, zero conversions") {
    ExperimentConfig cfg = small_config();
    cfg.trials = 1;
    cfg.attack.conversions_required = 0;
    const Report r = run_experiment(cfg);
    CHECK(r.converged_count == 1);
    CHECK(r.mean_budget == 0.0);
}

TEST_CASE("experiment runs trials, aggregates, and is replay-deterministic") {
    const auto dir1 = (fs::temp_directory_path() / "canvass_exp1").string();
    const auto dir2 = (fs::temp_directory_path() / "canvass_exp2").string();
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    const Report r1 = run_experiment(small_config(dir1));
    const std::string report_bytes = slurp(dir1 + "/report.json");
    const Report r2 = run_experiment(small_config(dir2));
    CHECK(r1.per_trial.size() == 2);
    CHECK(r1.converged_count == r2.converged_count);
    // identical report and trace bytes modulo the embedded paths and timing
    for (const auto name : {"/trial_0/dataset.json", "/trial_0/model.json", "/trial_1/dataset.json"})
        CHECK(slurp(dir1 + name) == slurp(dir2 + name));
    // re-running into the same directory reproduces the report byte for byte
    run_experiment(small_config(dir1));
    CHECK(slurp(dir1 + "/report.json") == report_bytes);
    // mean over converged trials only
    double sum = 0;
    int conv = 0;
    for (const auto& t : r1.per_trial)
        if (t.converged) {
            sum += static_cast<double>(t.budget);
            ++conv;
        }
    if (conv > 0) CHECK(r1.mean_budget == doctest::Approx(sum / conv));
    // every per-trial analysis table exists
    CHECK(fs::exists(dir1 + "/trial_0/hop_histogram.csv"));
    CHECK(fs::exists(dir1 + "/trial_0/attacker_stats.csv"));
    CHECK(fs::exists(dir1 + "/trial_0/attacks_vs_degree.csv"));
    CHECK(fs::exists(dir1 + "/trial_0/attacks_vs_margin.csv"));
    CHECK(fs::exists(dir1 + "/trial_0/attacks_vs_influence.csv"));
    CHECK(fs::exists(dir1 + "/trial_0/budget_vs_conversions.csv"));
    CHECK(fs::exists(dir1 + "/trial_0/conversions_vs_steps.csv"));
    CHECK(fs::exists(dir1 + "/report.json"));
    CHECK(fs::exists(dir1 + "/report.csv"));
}

TEST_CASE("hop analysis: direct conversions at hop 1, chains at hop 2") {
    // build a synthetic trace: s0 converts a (link s0->a), then a converts b
    Graph g(6, 2);
    g.set_label(0, 0);
    AttackTrace t;
    t.initial_attackers = {0};
    t.initial_targets = {2, 3};
    t.variant = AttackVariant::mac_no_ip;
    {
        StepRecord s;
        s.step = 1;
        s.target = 2;
        s.conversions = {2};
        s.step_budget = 1;
        s.net_converted = 1;
        s.targets_after = 1;
        t.steps.push_back(s);
        t.perturbations.push_back({1, PerturbationRecord::Kind::link, 0, 2, 1.0, 1});
    }
    {
        StepRecord s;
        s.step = 2;
        s.target = 3;
        s.conversions = {3};
        s.step_budget = 1;
        s.net_converted = 2;
        s.targets_after = 0;
        t.steps.push_back(s);
        t.perturbations.push_back({2, PerturbationRecord::Kind::link, 2, 3, 1.0, 2});
    }
    t.total_budget = 2;
    const auto hist = hop_distance_analysis(t, g, t.initial_attackers);
    CHECK(hist.at(1) == 1);
    CHECK(hist.at(2) == 1);
}

TEST_CASE("hop analysis: feature-only conversions inherit the adjacent attacker hop") {
    Graph g(4, 2);
    g.add_edge(0, 2);  // target 2 adjacent to initial attacker 0
    AttackTrace t;
    t.initial_attackers = {0, 1};
    t.initial_targets = {2};
    StepRecord s;
    s.step = 1;
    s.target = 2;
    s.conversions = {2};
    s.step_budget = 1;
    s.net_converted = 1;
    t.steps.push_back(s);
    t.perturbations.push_back({1, PerturbationRecord::Kind::feature, 0, 1, 1.0, 1});
    t.total_budget = 1;
    const auto hist = hop_distance_analysis(t, g, t.initial_attackers);
    CHECK(hist.at(1) == 1);
}

TEST_CASE("attacker stats: completeness, margin formula, histogram totals") {
    const Graph g = generate_sbm({40, 0.25, 0.03, 7});
    const Split s = split_nodes(g, {0.2, 0.2, 0.6}, 7);
    TrainConfig tc;
    tc.epochs = 100;
    const ModelParams model = train(g, s, tc, Backbone::gcn, 7);
    const Partition part = init_partition(g, s, predict(model, g));
    AttackConfig cfg;
    cfg.variant = AttackVariant::mac_fixed_ip;
    cfg.conversions_required = 6;
    cfg.influence.k = 4;
    cfg.influence.alpha_auto = false;
    cfg.threads = 2;
    const AttackTrace trace = run_mac(model, g, s, part, cfg);
    const auto rows = attacker_stats(trace, g, model);

    // every initial attacker is present, even with zero contributions
    for (int a : trace.initial_attackers)
        CHECK(std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.node == a; }) != rows.end());
    // contribution totals equal the perturbation record count
    long long total = 0;
    for (const auto& r : rows) total += r.attack_perturbations + r.influential_flips;
    CHECK(total == static_cast<long long>(trace.perturbations.size()));

    // margin of logits (2, 0) is sigmoid(2) - sigmoid(-2) ~ 0.762
    Matrix logits(1, 2);
    logits.at(0, 0) = 2.0;
    logits.at(0, 1) = 0.0;
    CHECK(classification_margin(logits, 0, 0) == doctest::Approx(0.7616).epsilon(1e-3));
    CHECK(classification_margin(logits, 0, 1) == doctest::Approx(-0.7616).epsilon(1e-3));
}

TEST_CASE("curves: budget-vs-conversions is non-decreasing") {
    const Graph g = generate_sbm({40, 0.25, 0.03, 9});
    const Split s = split_nodes(g, {0.2, 0.2, 0.6}, 9);
    TrainConfig tc;
    tc.epochs = 100;
    const ModelParams model = train(g, s, tc, Backbone::gcn, 9);
    const Partition part = init_partition(g, s, predict(model, g));
    AttackConfig cfg;
    cfg.variant = AttackVariant::mac_dynamic_ip;
    cfg.conversions_required = 8;
    cfg.influence.k = 4;
    cfg.influence.alpha_auto = true;
    cfg.threads = 2;
    const AttackTrace trace = run_mac(model, g, s, part, cfg);
    long long cum = 0;
    long long gross = 0;
    long long prev_cum = -1, prev_gross = -1;
    for (const auto& st : trace.steps) {
        cum += st.step_budget;
        gross += static_cast<long long>(st.conversions.size());
        CHECK(cum >= prev_cum);
        CHECK(gross >= prev_gross);
        prev_cum = cum;
        prev_gross = gross;
    }
    const auto dir = fs::temp_directory_path() / "canvass_curves";
    fs::create_directories(dir);
    write_curves_csv(trace, (dir / "b.csv").string(), (dir / "c.csv").string());
    CHECK(fs::exists(dir / "b.csv"));
}

TEST_CASE("fixed-IP runs: contributed attacks correlate positively with conversion-time influence") {
    // pooled over 3 seeds so sparse per-run contribution counts still rank
    std::vector<double> influences, contributions;
    for (uint64_t seed = 11; seed <= 13; ++seed) {
        const Graph g = generate_sbm({50, 0.25, 0.03, seed});
        const Split s = split_nodes(g, {0.2, 0.2, 0.6}, seed);
        TrainConfig tc;
        tc.epochs = 100;
        const ModelParams model = train(g, s, tc, Backbone::gcn, seed);
        const Partition part = init_partition(g, s, predict(model, g));
        AttackConfig cfg;
        cfg.variant = AttackVariant::mac_fixed_ip;
        cfg.conversions_required = 12;
        cfg.influence.k = 4;
        cfg.influence.alpha_auto = false;
        cfg.threads = 2;
        const AttackTrace trace = run_mac(model, g, s, part, cfg);
        for (const auto& row : attacker_stats(trace, g, model)) {
            if (!row.has_influence) continue;  // initial attackers have no conversion-time influence
            influences.push_back(row.influence);
            contributions.push_back(static_cast<double>(row.attack_perturbations));
        }
    }
    REQUIRE(influences.size() >= 10);
    CHECK(oracle::spearman(influences, contributions) > 0.0);
}

TEST_CASE("sweep curve: larger attacker sets do not need more budget, mostly") {
    int adjacent = 0, nonincreasing = 0;
    for (uint64_t seed = 21; seed <= 23; ++seed) {
        ExperimentConfig cfg = small_config();
        cfg.base_seed = seed;
        cfg.attack.conversions_required = 8;
        cfg.attack.influence.alpha_auto = false;
        // pick sizes within this seed's attacker pool
        const Graph g = generate_sbm({cfg.dataset.sbm.block_size, cfg.dataset.sbm.p_within,
                                      cfg.dataset.sbm.p_between, seed});
        const Split s = split_nodes(g, cfg.split_ratios, seed);
        int pool = 0;
        for (int v : s.train)
            if (g.label(v) == 0) ++pool;
        std::vector<int> sizes;
        for (int size : {2, 4, 6, 8, 10, 12})
            if (size <= pool) sizes.push_back(size);
        REQUIRE(sizes.size() >= 3);
        const auto points = attacker_set_size_sweep(cfg, sizes);
        for (size_t i = 1; i < points.size(); ++i) {
            ++adjacent;
            const long long prev = points[i - 1].converged ? points[i - 1].budget : (1LL << 40);
            const long long cur = points[i].converged ? points[i].budget : (1LL << 40);
            if (cur <= prev) ++nonincreasing;
        }
    }
    // near-monotone decay: at least 80% of adjacent pairs
    CHECK(nonincreasing * 100 >= adjacent * 80);
}

TEST_CASE("sweep: a small attacker set still converges on an easy instance") {
    ExperimentConfig cfg = small_config();
    cfg.attack.conversions_required = 6;
    cfg.attack.influence.alpha_auto = false;
    const auto points = attacker_set_size_sweep(cfg, {5});
    REQUIRE(points.size() == 1);
    CHECK(points[0].converged);
}

TEST_CASE("sweep: full attacker set reproduces the standard run's budget") {
    ExperimentConfig cfg = small_config();
    cfg.trials = 1;
    cfg.attack.conversions_required = 6;
    cfg.attack.influence.alpha_auto = false;

    // standard run
    const Graph g = generate_sbm({40, 0.25, 0.03, cfg.base_seed});
    const Split s = split_nodes(g, cfg.split_ratios, cfg.base_seed);
    const ModelParams model = train(g, s, cfg.train, cfg.backbone, cfg.base_seed);
    const Partition part = init_partition(g, s, predict(model, g));
    const AttackTrace trace = run_mac(model, g, s, part, cfg.attack);

    const auto points = attacker_set_size_sweep(cfg, {static_cast<int>(part.attackers.size())});
    REQUIRE(points.size() == 1);
    CHECK(points[0].converged == (trace.outcome == Outcome::converged));
    if (points[0].converged) CHECK(points[0].budget == trace.total_budget);

    CHECK_THROWS_AS(attacker_set_size_sweep(cfg, {static_cast<int>(part.attackers.size()) + 1}), ValidationError);
}
