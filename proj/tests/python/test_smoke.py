"""End-to-end smoke tests for the python bindings."""

import pytest

canvass = pytest.importorskip("canvass")


@pytest.fixture(scope="module")
def pipeline():
    g = canvass.generate_sbm(canvass.SbmParams(40, 0.25, 0.03, seed=3))
    split = canvass.split_nodes(g, 0.2, 0.2, 0.6, seed=3)
    cfg = canvass.TrainConfig()
    cfg.epochs = 100
    model = canvass.train(g, split, cfg, canvass.Backbone.gcn, seed=3)
    part = canvass.init_partition(g, split, canvass.predict(model, g))
    return g, split, model, part


def test_sbm_shape_and_determinism():
    a = canvass.generate_sbm(canvass.SbmParams(30, 0.3, 0.05, seed=7))
    b = canvass.generate_sbm(canvass.SbmParams(30, 0.3, 0.05, seed=7))
    assert a.n == 60 and a.d == 60
    assert canvass.graph_hash(a) == canvass.graph_hash(b)
    a.validate()


def test_training_learns_the_communities(pipeline):
    g, split, model, _ = pipeline
    acc = canvass.accuracy(canvass.predict(model, g), g, split.test)
    assert acc >= 0.9
    assert model.best_val_acc >= 0.9


def test_partition_sides(pipeline):
    g, split, model, part = pipeline
    preds = canvass.predict(model, g)
    assert all(g.label(v) == 0 for v in part.attackers)
    assert all(preds[v] == 1 for v in part.targets)


def test_mac_attack_and_trace_audit(pipeline, tmp_path):
    g, split, model, part = pipeline
    cfg = canvass.AttackConfig()
    cfg.variant = canvass.AttackVariant.mac_dynamic_ip
    cfg.conversions_required = 6
    cfg.influence.k = 4
    cfg.threads = 2
    trace = canvass.run_mac(model, g, split, part, cfg)
    assert trace.outcome == canvass.Outcome.converged
    assert trace.net_conversions >= 6
    assert trace.total_budget > 0
    ok, detail = canvass.audit_trace(trace, g)
    assert ok, detail

    path = str(tmp_path / "trace.jsonl")
    canvass.write_trace(trace, path)
    back = canvass.read_trace(path)
    assert back.total_budget == trace.total_budget
    ok, detail = canvass.audit_trace(back, g)
    assert ok, detail


def test_min_budget_short_circuit(pipeline):
    g, split, model, part = pipeline
    preds = canvass.predict(model, g)
    zero_nodes = [v for v in split.test if preds[v] == 0]
    if not zero_nodes:
        pytest.skip("no predicted-0 test node in this instance")
    b = canvass.min_budget(model, g, part, zero_nodes[0], cap=10)
    assert not b.unconvertible and b.value == 0


def test_graph_io_roundtrip(pipeline, tmp_path):
    g, split, _, _ = pipeline
    path = str(tmp_path / "ds.json")
    canvass.save_graph(g, path, split)
    g2, split2 = canvass.load_graph(path)
    assert canvass.graph_hash(g2) == canvass.graph_hash(g)
    assert split2.train == split.train
