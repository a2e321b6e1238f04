#include "canvass/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace canvass {

using nlohmann::json;
namespace fs = std::filesystem;

double classification_margin(const Matrix& logits, int v, int y) {
    const double o0 = logits.at(v, 0), o1 = logits.at(v, 1);
    const double m = std::max(o0, o1);
    const double e0 = std::exp(o0 - m), e1 = std::exp(o1 - m);
    const double p0 = e0 / (e0 + e1);
    const double p_correct = y == 0 ? p0 : 1.0 - p0;
    return p_correct - (1.0 - p_correct);
}

namespace {

struct TrialArtifacts {
    Graph graph;
    Split split;
    ModelParams model;
    Partition partition;
};

TrialArtifacts prepare_trial(const ExperimentConfig& cfg, uint64_t seed) {
    TrialArtifacts a;
    if (cfg.dataset.is_sbm) {
        SbmParams p = cfg.dataset.sbm;
        p.seed = cfg.regenerate_per_trial ? seed : cfg.base_seed;
        a.graph = generate_sbm(p);
        a.split = split_nodes(a.graph, cfg.split_ratios, seed);
    } else {
        Dataset ds = load_graph(cfg.dataset.path, cfg.dataset.format);
        a.graph = std::move(ds.graph);
        a.split = ds.split ? *ds.split : split_nodes(a.graph, cfg.split_ratios, seed);
    }
    a.model = train(a.graph, a.split, cfg.train, cfg.backbone, seed);
    a.partition = init_partition(a.graph, a.split, predict(a.model, a.graph));
    return a;
}

}  // namespace

Report run_experiment(const ExperimentConfig& cfg) {
    if (cfg.trials < 1) throw ValidationError("trials must be >= 1");
    Report report;
    report.dataset = cfg.dataset.name();
    report.variant = to_string(cfg.attack.variant);
    report.backbone = to_string(cfg.backbone);
    report.graph_mode = cfg.dataset.is_sbm && cfg.regenerate_per_trial ? "regenerated" : "fixed";
    report.trials = cfg.trials;

    const bool persist = !cfg.out_dir.empty();
    if (persist) fs::create_directories(cfg.out_dir);

    double acc_sum = 0.0;
    int acc_count = 0;
    long long budget_sum = 0;

    for (int trial = 0; trial < cfg.trials; ++trial) {
        TrialResult tr;
        tr.trial = trial;
        tr.seed = cfg.base_seed + static_cast<uint64_t>(trial);
        const std::string trial_dir = persist ? cfg.out_dir + "/trial_" + std::to_string(trial) : "";
        try {
            TrialArtifacts a = prepare_trial(cfg, tr.seed);
            tr.pre_attack_test_acc = accuracy(predict(a.model, a.graph), a.graph, a.split.test);
            acc_sum += tr.pre_attack_test_acc;
            ++acc_count;

            AttackConfig atk = cfg.attack;
            atk.seed = tr.seed;

            if (persist) {
                fs::create_directories(trial_dir);
                save_graph(a.graph, trial_dir + "/dataset.json", &a.split);
                save_model(a.model, trial_dir + "/model.json");
            }

            if (atk.variant == AttackVariant::fga_baseline) {
                // the baseline attacks the targets that dynamic MAC converts
                AttackConfig mac = atk;
                mac.variant = AttackVariant::mac_dynamic_ip;
                const AttackTrace mac_trace = run_mac(a.model, a.graph, a.split, a.partition, mac);
                std::vector<int> converted;
                {
                    std::vector<int> cur;
                    for (const auto& s : mac_trace.steps) {
                        for (int x : s.conversions) cur.push_back(x);
                        for (int x : s.backflips) cur.erase(std::find(cur.begin(), cur.end(), x));
                    }
                    converted = std::move(cur);
                }
                const FgaResult fga = run_fga_baseline(a.model, a.graph, a.partition, converted, atk);
                tr.outcome = fga.infinite ? Outcome::exhausted : Outcome::converged;
                tr.converged = !fga.infinite;
                tr.budget = fga.total_budget;
                tr.net_conversions = static_cast<int>(converted.size()) - fga.unconvertible_count;
                tr.steps = 0;
                if (persist) {
                    write_trace(mac_trace, trial_dir + "/trace.jsonl");
                    tr.trace_path = trial_dir + "/trace.jsonl";
                    json fj = {{"infinite", fga.infinite},
                               {"total_budget", fga.total_budget},
                               {"unconvertible", fga.unconvertible_count}};
                    json per = json::array();
                    for (const auto& [node, b] : fga.per_target) per.push_back({{"node", node}, {"budget", b}});
                    fj["per_target"] = per;
                    std::ofstream(trial_dir + "/fga.json") << fj.dump(2) << "\n";
                }
            } else {
                const AttackTrace trace = run_mac(a.model, a.graph, a.split, a.partition, atk);
                tr.outcome = trace.outcome;
                tr.converged = trace.outcome == Outcome::converged;
                tr.budget = trace.total_budget;
                tr.steps = static_cast<int>(trace.steps.size());
                tr.net_conversions = trace.net_conversions;
                if (persist) {
                    write_trace(trace, trial_dir + "/trace.jsonl");
                    tr.trace_path = trial_dir + "/trace.jsonl";
                    if (cfg.write_analysis) {
                        write_hop_csv(hop_distance_analysis(trace, a.graph, trace.initial_attackers),
                                      trial_dir + "/hop_histogram.csv");
                        const auto rows = attacker_stats(trace, a.graph, a.model);
                        write_attacker_csv(rows, trial_dir + "/attacker_stats.csv");
                        write_attacker_histograms(rows, trial_dir + "/attacks_vs_degree.csv",
                                                  trial_dir + "/attacks_vs_margin.csv",
                                                  trial_dir + "/attacks_vs_influence.csv");
                        write_curves_csv(trace, trial_dir + "/budget_vs_conversions.csv",
                                         trial_dir + "/conversions_vs_steps.csv");
                    }
                }
            }
            if (tr.converged) {
                budget_sum += tr.budget;
                ++report.converged_count;
            }
        } catch (const std::exception& e) {
            tr.failed = true;
            tr.error = e.what();
        }
        report.per_trial.push_back(std::move(tr));
    }

    if (report.converged_count > 0)
        report.mean_budget = static_cast<double>(budget_sum) / report.converged_count;
    if (acc_count > 0) report.mean_pre_attack_acc = acc_sum / acc_count;

    if (persist) {
        write_report_json(report, cfg.out_dir + "/report.json");
        std::ofstream csv(cfg.out_dir + "/report.csv");
        if (!csv) throw SchemaError("cannot write " + cfg.out_dir + "/report.csv");
        csv << "trial,seed,outcome,budget,pre_attack_test_acc,steps,net_conversions\n";
        for (const auto& t : report.per_trial) {
            csv << t.trial << "," << t.seed << ",";
            if (t.failed) csv << "failed,,";
            else {
                csv << to_string(t.outcome) << ",";
                if (t.converged) csv << t.budget;
                else csv << "inf";
                csv << ",";
            }
            csv << t.pre_attack_test_acc << "," << t.steps << "," << t.net_conversions << "\n";
        }
    }
    return report;
}

void write_report_json(const Report& r, const std::string& path) {
    json doc;
    doc["dataset"] = r.dataset;
    doc["variant"] = r.variant;
    doc["backbone"] = r.backbone;
    doc["graph_mode"] = r.graph_mode;
    doc["trials"] = r.trials;
    doc["converged_trials"] = r.converged_count;
    doc["nonconverged_trials"] = r.trials - r.converged_count;
    if (r.converged_count > 0) doc["mean_budget"] = r.mean_budget;
    else doc["mean_budget"] = "inf";
    doc["mean_pre_attack_test_acc"] = r.mean_pre_attack_acc;
    json arr = json::array();
    for (const auto& t : r.per_trial) {
        json tj = {{"trial", t.trial},
                   {"seed", t.seed},
                   {"pre_attack_test_acc", t.pre_attack_test_acc},
                   {"steps", t.steps},
                   {"net_conversions", t.net_conversions}};
        if (t.failed) {
            tj["failed"] = true;
            tj["error"] = t.error;
        } else {
            tj["outcome"] = to_string(t.outcome);
            if (t.converged) tj["budget"] = t.budget;
            else tj["budget"] = "inf";
        }
        if (!t.trace_path.empty()) tj["trace"] = t.trace_path;
        arr.push_back(tj);
    }
    doc["per_trial"] = arr;
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write " + path);
    out << doc.dump(2) << "\n";
}

std::vector<SweepPoint> attacker_set_size_sweep(const ExperimentConfig& cfg, const std::vector<int>& sizes) {
    TrialArtifacts a = prepare_trial(cfg, cfg.base_seed);
    const Matrix logits = forward(a.model, a.graph);
    // margin-descending candidate order
    std::vector<int> order = a.partition.attackers;
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        const double mx = classification_margin(logits, x, a.graph.label(x));
        const double my = classification_margin(logits, y, a.graph.label(y));
        if (mx != my) return mx > my;
        return x < y;
    });
    std::vector<SweepPoint> points;
    for (int size : sizes) {
        if (size < 1 || size > static_cast<int>(order.size()))
            throw ValidationError("sweep size " + std::to_string(size) + " exceeds the attacker pool " +
                                  std::to_string(order.size()));
        Partition part;
        part.attackers.assign(order.begin(), order.begin() + size);
        std::sort(part.attackers.begin(), part.attackers.end());
        part.targets = a.partition.targets;
        SweepPoint pt;
        pt.size = size;
        try {
            const AttackTrace trace = run_mac(a.model, a.graph, a.split, part, cfg.attack);
            pt.converged = trace.outcome == Outcome::converged;
            pt.budget = trace.total_budget;
        } catch (const std::exception&) {
            pt.converged = false;
        }
        points.push_back(pt);
    }
    return points;
}

void write_hop_csv(const std::map<int, long long>& hist, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write " + path);
    out << "hop,conversions\n";
    for (const auto& [hop, count] : hist) out << hop << "," << count << "\n";
}

void write_attacker_csv(const std::vector<AttackerRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write " + path);
    out << "node,attack_perturbations,influential_flips,degree,margin,influence\n";
    for (const auto& r : rows) {
        out << r.node << "," << r.attack_perturbations << "," << r.influential_flips << "," << r.degree << ","
            << r.margin << ",";
        if (r.has_influence) out << r.influence;
        out << "\n";
    }
}

void write_attacker_histograms(const std::vector<AttackerRow>& rows, const std::string& degree_path,
                               const std::string& margin_path, const std::string& influence_path) {
    {
        std::map<int, long long> by_degree;
        for (const auto& r : rows) by_degree[r.degree] += r.attack_perturbations;
        std::ofstream out(degree_path);
        if (!out) throw SchemaError("cannot write " + degree_path);
        out << "degree,attack_perturbations\n";
        for (const auto& [deg, count] : by_degree) out << deg << "," << count << "\n";
    }
    {
        // margin in [-1,1], 20 uniform bins
        std::vector<long long> bins(20, 0);
        for (const auto& r : rows) {
            int b = static_cast<int>((r.margin + 1.0) / 2.0 * 20.0);
            b = std::clamp(b, 0, 19);
            bins[b] += r.attack_perturbations;
        }
        std::ofstream out(margin_path);
        if (!out) throw SchemaError("cannot write " + margin_path);
        out << "margin_bin_low,margin_bin_high,attack_perturbations\n";
        for (int b = 0; b < 20; ++b)
            out << -1.0 + 0.1 * b << "," << -1.0 + 0.1 * (b + 1) << "," << bins[b] << "\n";
    }
    {
        // influence normalized to [0,1] over nodes that have one, 10 bins
        double max_infl = 0.0;
        for (const auto& r : rows)
            if (r.has_influence) max_infl = std::max(max_infl, r.influence);
        std::vector<long long> bins(10, 0);
        for (const auto& r : rows) {
            if (!r.has_influence) continue;
            const double x = max_infl > 0.0 ? r.influence / max_infl : 0.0;
            bins[std::clamp(static_cast<int>(x * 10.0), 0, 9)] += r.attack_perturbations;
        }
        std::ofstream out(influence_path);
        if (!out) throw SchemaError("cannot write " + influence_path);
        out << "influence_bin_low,influence_bin_high,attack_perturbations\n";
        for (int b = 0; b < 10; ++b) out << 0.1 * b << "," << 0.1 * (b + 1) << "," << bins[b] << "\n";
    }
}

void write_curves_csv(const AttackTrace& trace, const std::string& budget_path, const std::string& steps_path) {
    {
        std::ofstream out(budget_path);
        if (!out) throw SchemaError("cannot write " + budget_path);
        out << "net_converted,cumulative_budget\n";
        long long cum = 0;
        for (const auto& s : trace.steps) {
            cum += s.step_budget;
            out << s.net_converted << "," << cum << "\n";
        }
    }
    {
        std::ofstream out(steps_path);
        if (!out) throw SchemaError("cannot write " + steps_path);
        out << "step,net_converted,gross_converted\n";
        long long gross = 0;
        for (const auto& s : trace.steps) {
            gross += static_cast<long long>(s.conversions.size());
            out << s.step << "," << s.net_converted << "," << gross << "\n";
        }
    }
}

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write " + path);
    out << "attackers,budget\n";
    for (const auto& p : points) {
        out << p.size << ",";
        if (p.converged) out << p.budget;
        else out << "inf";
        out << "\n";
    }
}

}  // namespace canvass
