// canvass — proxy-GNN community canvassing attacks on 2-community graphs.
//
// Subcommands: generate-sbm, train, attack, experiment, analyze, sweep.
// Exit codes: 0 success, 2 attack non-convergence, 1 error.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "canvass/harness.hpp"
#include "canvass/trace.hpp"

using namespace canvass;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string dataset = "sbm";
    std::string backbone = "gcn";
    std::string variant = "mac_dynamic_ip";
    int conversions = 150;
    int k = -1;  // -1: per-dataset default
    std::string alpha = "auto";
    int trials = 5;
    uint64_t seed = 1;
    std::string out = "out";
};

void add_common_flags(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_path, "JSON config file; flags override its fields");
    cmd->add_option("--dataset", a.dataset, "dataset path or 'sbm'");
    cmd->add_option("--backbone", a.backbone)->check(CLI::IsMember({"gcn", "sage"}));
    cmd->add_option("--variant", a.variant)
        ->check(CLI::IsMember({"mac_dynamic_ip", "mac_fixed_ip", "mac_no_ip", "mac_lp", "mac_fp", "fga_baseline"}));
    cmd->add_option("--conversions", a.conversions, "targets to convert (C)");
    cmd->add_option("--k", a.k, "influential feature flips per conversion");
    cmd->add_option("--alpha", a.alpha, "influence threshold or 'auto'");
    cmd->add_option("--trials", a.trials);
    cmd->add_option("--seed", a.seed);
    cmd->add_option("--out", a.out, "output directory");
}

GraphFormat format_for(const std::string& path) {
    return path.size() >= 5 && path.substr(path.size() - 5) == ".json" ? GraphFormat::json : GraphFormat::edgelist;
}

/// Per-dataset default for the influential-flip count: 16 for generated SBM
/// graphs, 4 for polblogs-sized one-hot data, 8 otherwise.
int default_k(const DatasetSpec& ds) {
    if (ds.is_sbm) return 16;
    const std::string name = fs::path(ds.path).stem().string();
    if (name.find("polblogs") != std::string::npos) return 4;
    return 8;
}

ExperimentConfig build_config(const CommonArgs& a) {
    ExperimentConfig cfg;
    if (!a.config_path.empty()) {
        std::ifstream in(a.config_path);
        if (!in) throw ValidationError("cannot open config " + a.config_path);
        json doc;
        in >> doc;
        if (doc.contains("dataset")) {
            const auto& d = doc["dataset"];
            if (d.is_string()) {
                const std::string s = d.get<std::string>();
                if (s == "sbm") cfg.dataset.is_sbm = true;
                else {
                    cfg.dataset.is_sbm = false;
                    cfg.dataset.path = s;
                    cfg.dataset.format = format_for(s);
                }
            } else {
                cfg.dataset.is_sbm = true;
                cfg.dataset.sbm.block_size = d.value("block_size", 745);
                cfg.dataset.sbm.p_within = d.value("p_within", 0.02);
                cfg.dataset.sbm.p_between = d.value("p_between", 0.005);
            }
        }
        if (doc.contains("backbone")) cfg.backbone = backbone_from_string(doc["backbone"].get<std::string>());
        if (doc.contains("variant")) cfg.attack.variant = variant_from_string(doc["variant"].get<std::string>());
        if (doc.contains("conversions")) cfg.attack.conversions_required = doc["conversions"].get<int>();
        if (doc.contains("k")) cfg.attack.influence.k = doc["k"].get<int>();
        if (doc.contains("alpha")) {
            if (doc["alpha"].is_string()) cfg.attack.influence.alpha_auto = true;
            else {
                cfg.attack.influence.alpha_auto = false;
                cfg.attack.influence.alpha = doc["alpha"].get<double>();
            }
        }
        if (doc.contains("trials")) cfg.trials = doc["trials"].get<int>();
        if (doc.contains("seed")) cfg.base_seed = doc["seed"].get<uint64_t>();
        if (doc.contains("out")) cfg.out_dir = doc["out"].get<std::string>();
        if (doc.contains("stagnation_limit")) cfg.attack.stagnation_limit = doc["stagnation_limit"].get<int>();
        if (doc.contains("budget_cap")) cfg.attack.budget_cap = doc["budget_cap"].get<int>();
        if (doc.contains("train")) {
            const auto& t = doc["train"];
            cfg.train.hidden = t.value("hidden", cfg.train.hidden);
            cfg.train.lr = t.value("lr", cfg.train.lr);
            cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
            cfg.train.epochs = t.value("epochs", cfg.train.epochs);
            cfg.train.patience = t.value("patience", cfg.train.patience);
            cfg.train.dropout = t.value("dropout", cfg.train.dropout);
        }
        if (doc.contains("regenerate_per_trial")) cfg.regenerate_per_trial = doc["regenerate_per_trial"].get<bool>();
        if (doc.contains("influence_loss_form"))
            cfg.attack.influence.form = doc["influence_loss_form"].get<std::string>() == "mixed"
                                            ? InfluenceLossForm::mixed
                                            : InfluenceLossForm::margin;
    }
    // flag overrides
    if (a.dataset == "sbm") cfg.dataset.is_sbm = true;
    else {
        cfg.dataset.is_sbm = false;
        cfg.dataset.path = a.dataset;
        cfg.dataset.format = format_for(a.dataset);
    }
    cfg.backbone = backbone_from_string(a.backbone);
    cfg.attack.variant = variant_from_string(a.variant);
    cfg.attack.conversions_required = a.conversions;
    cfg.attack.influence.k = a.k >= 0 ? a.k : default_k(cfg.dataset);
    if (a.alpha == "auto") cfg.attack.influence.alpha_auto = true;
    else {
        cfg.attack.influence.alpha_auto = false;
        cfg.attack.influence.alpha = std::stod(a.alpha);
    }
    cfg.trials = a.trials;
    cfg.base_seed = a.seed;
    cfg.out_dir = a.out;
    return cfg;
}

int cmd_generate_sbm(const CommonArgs& a, int block_size, double p, double q) {
    SbmParams params{block_size, p, q, a.seed};
    const Graph g = generate_sbm(params);
    fs::create_directories(fs::path(a.out).parent_path().empty() ? "." : fs::path(a.out).parent_path().string());
    save_graph(g, a.out);
    std::cout << "wrote " << a.out << ": n=" << g.n() << " edges=" << g.edge_count() << " d=" << g.d()
              << " seed=" << a.seed << "\n";
    return 0;
}

int cmd_train(const CommonArgs& a) {
    ExperimentConfig cfg = build_config(a);
    Graph g;
    Split s;
    if (cfg.dataset.is_sbm) {
        cfg.dataset.sbm.seed = cfg.base_seed;
        g = generate_sbm(cfg.dataset.sbm);
        s = split_nodes(g, cfg.split_ratios, cfg.base_seed);
    } else {
        Dataset ds = load_graph(cfg.dataset.path, cfg.dataset.format);
        g = std::move(ds.graph);
        s = ds.split ? *ds.split : split_nodes(g, cfg.split_ratios, cfg.base_seed);
    }
    const ModelParams model = train(g, s, cfg.train, cfg.backbone, cfg.base_seed);
    const auto preds = predict(model, g);
    fs::create_directories(cfg.out_dir);
    save_model(model, cfg.out_dir + "/model.json");
    save_graph(g, cfg.out_dir + "/dataset.json", &s);
    std::cout << "test_accuracy=" << accuracy(preds, g, s.test) << " val_accuracy=" << model.meta.best_val_acc
              << " epochs=" << model.meta.epochs_run << "\n"
              << "wrote " << cfg.out_dir << "/model.json and dataset.json\n";
    return 0;
}

int cmd_attack(const CommonArgs& a) {
    ExperimentConfig cfg = build_config(a);
    cfg.trials = 1;
    const Report report = run_experiment(cfg);
    const auto& t = report.per_trial.at(0);
    if (t.failed) {
        std::cerr << "trial failed: " << t.error << "\n";
        return 1;
    }
    std::cout << "outcome=" << to_string(t.outcome) << " budget=" << t.budget
              << " net_conversions=" << t.net_conversions << " steps=" << t.steps
              << " pre_attack_test_acc=" << t.pre_attack_test_acc << "\n"
              << "trace: " << t.trace_path << "\n";
    return t.converged ? 0 : 2;
}

int cmd_experiment(const CommonArgs& a) {
    const ExperimentConfig cfg = build_config(a);
    const Report report = run_experiment(cfg);
    std::cout << "dataset=" << report.dataset << " variant=" << report.variant << " backbone=" << report.backbone
              << "\n"
              << "converged " << report.converged_count << "/" << report.trials;
    if (report.converged_count > 0) std::cout << " mean_budget=" << report.mean_budget;
    std::cout << " mean_pre_attack_acc=" << report.mean_pre_attack_acc << "\n"
              << "report: " << cfg.out_dir << "/report.json\n";
    return report.converged_count > 0 ? 0 : 2;
}

int cmd_analyze(const CommonArgs& a, const std::string& trace_path, const std::string& dataset_path,
                const std::string& model_path) {
    const AttackTrace trace = read_trace(trace_path);
    const Dataset ds = load_graph(dataset_path, format_for(dataset_path));
    const ModelParams model = load_model(model_path);
    const AuditResult audit = audit_trace(trace, ds.graph);
    if (!audit.ok) {
        std::cerr << "trace audit failed: " << audit.detail << "\n";
        return 1;
    }
    fs::create_directories(a.out);
    write_hop_csv(hop_distance_analysis(trace, ds.graph, trace.initial_attackers), a.out + "/hop_histogram.csv");
    const auto rows = attacker_stats(trace, ds.graph, model);
    write_attacker_csv(rows, a.out + "/attacker_stats.csv");
    write_attacker_histograms(rows, a.out + "/attacks_vs_degree.csv", a.out + "/attacks_vs_margin.csv",
                              a.out + "/attacks_vs_influence.csv");
    write_curves_csv(trace, a.out + "/budget_vs_conversions.csv", a.out + "/conversions_vs_steps.csv");
    std::cout << "audit ok; analysis tables in " << a.out << "\n";
    return 0;
}

int cmd_sweep(const CommonArgs& a, const std::string& sizes_arg) {
    const ExperimentConfig cfg = build_config(a);
    std::vector<int> sizes;
    std::stringstream ss(sizes_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) sizes.push_back(std::stoi(tok));
    const auto points = attacker_set_size_sweep(cfg, sizes);
    fs::create_directories(a.out);
    write_sweep_csv(points, a.out + "/budget_vs_attackers.csv");
    bool any = false;
    for (const auto& p : points) {
        std::cout << "attackers=" << p.size << " budget=";
        if (p.converged) {
            std::cout << p.budget;
            any = true;
        } else {
            std::cout << "inf";
        }
        std::cout << "\n";
    }
    std::cout << "curve: " << a.out << "/budget_vs_attackers.csv\n";
    return any ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"community canvassing attacks with a proxy GNN"};
    app.require_subcommand(1);

    CommonArgs args;
    int block_size = 745;
    double p_within = 0.02, p_between = 0.005;
    std::string trace_path, dataset_path, model_path, sizes_arg;

    auto* gen = app.add_subcommand("generate-sbm", "generate a 2-block SBM dataset file");
    add_common_flags(gen, args);
    gen->add_option("--block-size", block_size);
    gen->add_option("--p", p_within, "within-community edge probability");
    gen->add_option("--q", p_between, "between-community edge probability");

    auto* tr = app.add_subcommand("train", "train the proxy GNN and save the checkpoint");
    add_common_flags(tr, args);

    auto* atk = app.add_subcommand("attack", "single end-to-end attack run");
    add_common_flags(atk, args);

    auto* exp = app.add_subcommand("experiment", "multi-trial experiment with report");
    add_common_flags(exp, args);

    auto* ana = app.add_subcommand("analyze", "audit a trace and emit analysis tables");
    add_common_flags(ana, args);
    ana->add_option("--trace", trace_path)->required();
    ana->add_option("--graph", dataset_path, "dataset file the trace was produced on")->required();
    ana->add_option("--model", model_path)->required();

    auto* sw = app.add_subcommand("sweep", "budget vs initial attacker set size");
    add_common_flags(sw, args);
    sw->add_option("--sizes", sizes_arg, "comma-separated attacker set sizes")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate_sbm(args, block_size, p_within, p_between);
        if (tr->parsed()) return cmd_train(args);
        if (atk->parsed()) return cmd_attack(args);
        if (exp->parsed()) return cmd_experiment(args);
        if (ana->parsed()) return cmd_analyze(args, trace_path, dataset_path, model_path);
        if (sw->parsed()) return cmd_sweep(args, sizes_arg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
