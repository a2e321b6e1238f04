#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "canvass/attack.hpp"
#include "canvass/driver.hpp"
#include "canvass/gnn.hpp"
#include "canvass/graph.hpp"
#include "canvass/harness.hpp"
#include "canvass/influence.hpp"
#include "canvass/trace.hpp"

namespace py = pybind11;
using namespace canvass;

PYBIND11_MODULE(_core, m) {
    m.doc() = "community canvassing attacks on 2-community graphs with a proxy GNN";

    py::register_exception<SchemaError>(m, "SchemaError");
    py::register_exception<ValidationError>(m, "ValidationError");

    py::class_<Graph>(m, "Graph")
        .def(py::init<int, int>(), py::arg("n"), py::arg("d"))
        .def_property_readonly("n", &Graph::n)
        .def_property_readonly("d", &Graph::d)
        .def_property_readonly("edge_count", &Graph::edge_count)
        .def("neighbors", &Graph::neighbors, py::return_value_policy::copy)
        .def("feature_bits", &Graph::feature_bits, py::return_value_policy::copy)
        .def("label", &Graph::label)
        .def("set_label", &Graph::set_label)
        .def("degree", &Graph::degree)
        .def("max_degree", &Graph::max_degree)
        .def("has_edge", &Graph::has_edge)
        .def("add_edge", &Graph::add_edge)
        .def("has_feature", &Graph::has_feature)
        .def("set_feature", &Graph::set_feature)
        .def("flip_feature", &Graph::flip_feature)
        .def("validate", &Graph::validate);

    py::class_<Split>(m, "Split")
        .def(py::init<>())
        .def_readwrite("train", &Split::train)
        .def_readwrite("val", &Split::val)
        .def_readwrite("test", &Split::test);

    py::class_<Partition>(m, "Partition")
        .def(py::init<>())
        .def_readwrite("attackers", &Partition::attackers)
        .def_readwrite("targets", &Partition::targets)
        .def_readwrite("converted", &Partition::converted);

    py::class_<SbmParams>(m, "SbmParams")
        .def(py::init([](int block_size, double p_within, double p_between, uint64_t seed) {
                 return SbmParams{block_size, p_within, p_between, seed};
             }),
             py::arg("block_size"), py::arg("p_within"), py::arg("p_between"), py::arg("seed") = 0)
        .def_readwrite("block_size", &SbmParams::block_size)
        .def_readwrite("p_within", &SbmParams::p_within)
        .def_readwrite("p_between", &SbmParams::p_between)
        .def_readwrite("seed", &SbmParams::seed);

    m.def("generate_sbm", &generate_sbm, py::arg("params"));
    m.def(
        "split_nodes",
        [](const Graph& g, double train, double val, double test, uint64_t seed) {
            return split_nodes(g, {train, val, test}, seed);
        },
        py::arg("graph"), py::arg("train") = 0.1, py::arg("val") = 0.1, py::arg("test") = 0.8, py::arg("seed") = 0);
    m.def("init_partition", &init_partition, py::arg("graph"), py::arg("split"), py::arg("predicted"));
    m.def(
        "load_graph",
        [](const std::string& path, const std::string& format) {
            const Dataset ds = load_graph(path, format == "json" ? GraphFormat::json : GraphFormat::edgelist);
            return py::make_tuple(ds.graph, ds.split ? py::cast(*ds.split) : py::none());
        },
        py::arg("path"), py::arg("format") = "json");
    m.def(
        "save_graph",
        [](const Graph& g, const std::string& path, const Split* split) { save_graph(g, path, split); },
        py::arg("graph"), py::arg("path"), py::arg("split") = nullptr);

    py::enum_<Backbone>(m, "Backbone").value("gcn", Backbone::gcn).value("sage", Backbone::sage);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("hidden", &TrainConfig::hidden)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("patience", &TrainConfig::patience)
        .def_readwrite("dropout", &TrainConfig::dropout);

    py::class_<ModelParams>(m, "ModelParams")
        .def_property_readonly("backbone", [](const ModelParams& p) { return p.backbone; })
        .def_property_readonly("hidden", [](const ModelParams& p) { return p.hidden; })
        .def_property_readonly("epochs_run", [](const ModelParams& p) { return p.meta.epochs_run; })
        .def_property_readonly("best_val_acc", [](const ModelParams& p) { return p.meta.best_val_acc; });

    m.def(
        "train",
        [](const Graph& g, const Split& s, const TrainConfig& cfg, Backbone b, uint64_t seed) {
            return train(g, s, cfg, b, seed);
        },
        py::arg("graph"), py::arg("split"), py::arg("config") = TrainConfig{}, py::arg("backbone") = Backbone::gcn,
        py::arg("seed") = 0);
    m.def("predict", &predict, py::arg("model"), py::arg("graph"));
    m.def(
        "logits",
        [](const ModelParams& p, const Graph& g) {
            const Matrix O = forward(p, g);
            std::vector<std::pair<double, double>> out(O.rows());
            for (int i = 0; i < O.rows(); ++i) out[i] = {O.at(i, 0), O.at(i, 1)};
            return out;
        },
        py::arg("model"), py::arg("graph"));
    m.def("accuracy", &accuracy, py::arg("predicted"), py::arg("graph"), py::arg("nodes"));
    m.def("save_model", &save_model);
    m.def("load_model", &load_model);

    py::enum_<Scope>(m, "Scope")
        .value("full", Scope::full)
        .value("links_only", Scope::links_only)
        .value("features_only", Scope::features_only);

    py::class_<Budget>(m, "Budget")
        .def_readonly("unconvertible", &Budget::unconvertible)
        .def_readonly("value", &Budget::value)
        .def("__repr__", [](const Budget& b) {
            return b.unconvertible ? std::string("Budget(unconvertible)") : "Budget(" + std::to_string(b.value) + ")";
        });

    py::enum_<InfluenceLossForm>(m, "InfluenceLossForm")
        .value("margin", InfluenceLossForm::margin)
        .value("mixed", InfluenceLossForm::mixed);
    py::enum_<FeatureState>(m, "FeatureState")
        .value("current", FeatureState::current)
        .value("perturbed", FeatureState::perturbed);

    m.def(
        "min_budget",
        [](const ModelParams& model, const Graph& g, const Partition& part, int v, int cap, Scope scope) {
            const CandidateSet cands = enumerate_candidates(g, part, scope);
            return min_budget(model, g, cands, v, cap);
        },
        py::arg("model"), py::arg("graph"), py::arg("partition"), py::arg("node"), py::arg("cap"),
        py::arg("scope") = Scope::full);
    m.def("lookahead_influence", &lookahead_influence, py::arg("model"), py::arg("graph"), py::arg("targets"),
          py::arg("node"), py::arg("k"), py::arg("form") = InfluenceLossForm::margin);
    m.def("influence_loss", &influence_loss, py::arg("model"), py::arg("graph"), py::arg("targets"), py::arg("node"),
          py::arg("state") = FeatureState::current, py::arg("k") = 0);

    py::enum_<AttackVariant>(m, "AttackVariant")
        .value("mac_dynamic_ip", AttackVariant::mac_dynamic_ip)
        .value("mac_fixed_ip", AttackVariant::mac_fixed_ip)
        .value("mac_no_ip", AttackVariant::mac_no_ip)
        .value("mac_lp", AttackVariant::mac_lp)
        .value("mac_fp", AttackVariant::mac_fp)
        .value("fga_baseline", AttackVariant::fga_baseline);

    py::enum_<Outcome>(m, "Outcome")
        .value("converged", Outcome::converged)
        .value("stagnated", Outcome::stagnated)
        .value("exhausted", Outcome::exhausted);

    py::class_<InfluenceConfig>(m, "InfluenceConfig")
        .def(py::init<>())
        .def_readwrite("k", &InfluenceConfig::k)
        .def_readwrite("alpha", &InfluenceConfig::alpha)
        .def_readwrite("alpha_auto", &InfluenceConfig::alpha_auto)
        .def_readwrite("form", &InfluenceConfig::form);

    py::class_<AttackConfig>(m, "AttackConfig")
        .def(py::init<>())
        .def_readwrite("variant", &AttackConfig::variant)
        .def_readwrite("conversions_required", &AttackConfig::conversions_required)
        .def_readwrite("influence", &AttackConfig::influence)
        .def_readwrite("stagnation_limit", &AttackConfig::stagnation_limit)
        .def_readwrite("budget_cap", &AttackConfig::budget_cap)
        .def_readwrite("seed", &AttackConfig::seed)
        .def_readwrite("max_steps", &AttackConfig::max_steps)
        .def_readwrite("threads", &AttackConfig::threads);

    py::class_<StepRecord>(m, "StepRecord")
        .def_readonly("step", &StepRecord::step)
        .def_readonly("target", &StepRecord::target)
        .def_readonly("step_budget", &StepRecord::step_budget)
        .def_readonly("conversion_budget", &StepRecord::conversion_budget)
        .def_readonly("influence", &StepRecord::influence)
        .def_readonly("influential_flips", &StepRecord::influential_flips)
        .def_readonly("targets_after", &StepRecord::targets_after)
        .def_readonly("net_converted", &StepRecord::net_converted)
        .def_readonly("conversions", &StepRecord::conversions)
        .def_readonly("backflips", &StepRecord::backflips);

    py::class_<AttackTrace>(m, "AttackTrace")
        .def_readonly("outcome", &AttackTrace::outcome)
        .def_readonly("total_budget", &AttackTrace::total_budget)
        .def_readonly("net_conversions", &AttackTrace::net_conversions)
        .def_readonly("gross_conversions", &AttackTrace::gross_conversions)
        .def_readonly("alpha", &AttackTrace::alpha)
        .def_readonly("steps", &AttackTrace::steps)
        .def_readonly("initial_attackers", &AttackTrace::initial_attackers)
        .def_readonly("initial_targets", &AttackTrace::initial_targets);

    m.def("run_mac", &run_mac, py::arg("model"), py::arg("graph"), py::arg("split"), py::arg("partition"),
          py::arg("config"), py::call_guard<py::gil_scoped_release>());

    py::class_<FgaResult>(m, "FgaResult")
        .def_readonly("infinite", &FgaResult::infinite)
        .def_readonly("total_budget", &FgaResult::total_budget)
        .def_readonly("unconvertible_count", &FgaResult::unconvertible_count)
        .def_readonly("per_target", &FgaResult::per_target);

    m.def("run_fga_baseline", &run_fga_baseline, py::arg("model"), py::arg("graph"), py::arg("partition"),
          py::arg("targets"), py::arg("config"), py::call_guard<py::gil_scoped_release>());
    m.def("recompute_targets", &recompute_targets, py::arg("model"), py::arg("graph"), py::arg("split"));

    m.def("write_trace", &write_trace, py::arg("trace"), py::arg("path"));
    m.def("read_trace", &read_trace, py::arg("path"));
    m.def("graph_hash", &graph_hash, py::arg("graph"));
    m.def(
        "audit_trace",
        [](const AttackTrace& t, const Graph& g) {
            const AuditResult r = audit_trace(t, g);
            return py::make_tuple(r.ok, r.detail);
        },
        py::arg("trace"), py::arg("original"));
}
