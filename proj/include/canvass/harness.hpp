#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "canvass/driver.hpp"
#include "canvass/gnn.hpp"
#include "canvass/graph.hpp"
#include "canvass/trace.hpp"

namespace canvass {

struct DatasetSpec {
    bool is_sbm = true;
    SbmParams sbm{745, 0.02, 0.005, 0};
    std::string path;
    GraphFormat format = GraphFormat::json;

    std::string name() const { return is_sbm ? "sbm" : path; }
};

struct ExperimentConfig {
    DatasetSpec dataset;
    Backbone backbone = Backbone::gcn;
    TrainConfig train;
    AttackConfig attack;
    std::array<double, 3> split_ratios{0.1, 0.1, 0.8};
    int trials = 5;
    uint64_t base_seed = 1;
    std::string out_dir;
    /// SBM graphs are regenerated per trial by default; set false to keep one
    /// graph and vary only split/training seeds.
    bool regenerate_per_trial = true;
    bool write_analysis = true;
};

struct TrialResult {
    int trial = 0;
    uint64_t seed = 0;
    bool failed = false;
    std::string error;
    Outcome outcome = Outcome::converged;
    bool converged = false;
    long long budget = 0;
    double pre_attack_test_acc = 0.0;
    int steps = 0;
    int net_conversions = 0;
    std::string trace_path;
};

struct Report {
    std::string dataset;
    std::string variant;
    std::string backbone;
    std::string graph_mode;  // "regenerated" or "fixed"
    int trials = 0;
    int converged_count = 0;
    double mean_budget = 0.0;  // arithmetic mean over converged trials
    double mean_pre_attack_acc = 0.0;
    std::vector<TrialResult> per_trial;
};

/// Runs `trials` seeded end-to-end pipelines (generate/load -> split ->
/// train -> partition -> attack), persists per-trial artifacts under
/// out_dir/trial_<i>/, and writes report.json plus plot-ready CSV tables.
Report run_experiment(const ExperimentConfig& config);

void write_report_json(const Report& report, const std::string& path);

/// Conversion counts by hop distance from the initial attacker set over the
/// subgraph spanned by the attack's link insertions.
std::map<int, long long> hop_distance_analysis(const AttackTrace& trace, const Graph& original,
                                               const std::vector<int>& initial_attackers);

struct AttackerRow {
    int node = -1;
    long long attack_perturbations = 0;  // link insertions + attack feature flips
    long long influential_flips = 0;
    int degree = 0;        // pre-attack
    double margin = 0.0;   // pre-attack classification margin
    double influence = 0.0;
    bool has_influence = false;  // converted by a variant that records influence
};

/// One row per node that was ever an attacker (initial set plus conversions),
/// including zero-contribution nodes.
std::vector<AttackerRow> attacker_stats(const AttackTrace& trace, const Graph& original, const ModelParams& model);

struct SweepPoint {
    int size = 0;
    bool converged = false;
    long long budget = 0;
};

/// Budget as a function of the initial attacker set size; candidates are
/// ordered by classification margin descending before truncation.
std::vector<SweepPoint> attacker_set_size_sweep(const ExperimentConfig& config, const std::vector<int>& sizes);

/// Classification margin: probability of the correct class minus the
/// incorrect one.
double classification_margin(const Matrix& logits, int node, int true_label);

void write_hop_csv(const std::map<int, long long>& hist, const std::string& path);
void write_attacker_csv(const std::vector<AttackerRow>& rows, const std::string& path);
/// Binned attack-count histograms against degree, margin, and normalized
/// influence, one CSV each.
void write_attacker_histograms(const std::vector<AttackerRow>& rows, const std::string& degree_path,
                               const std::string& margin_path, const std::string& influence_path);
void write_curves_csv(const AttackTrace& trace, const std::string& budget_path, const std::string& steps_path);
void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path);

}  // namespace canvass
