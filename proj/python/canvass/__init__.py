"""Community canvassing attacks on 2-community graphs with a proxy GNN.

Thin wrapper over the C++ core. The heavy operations (SBM generation,
training, the multi-step MAC attack, the FGA baseline) live in
``canvass._core``.
"""

from ._core import (
    AttackConfig,
    AttackTrace,
    AttackVariant,
    Backbone,
    Budget,
    FeatureState,
    FgaResult,
    Graph,
    InfluenceConfig,
    InfluenceLossForm,
    ModelParams,
    Outcome,
    Partition,
    SbmParams,
    SchemaError,
    Scope,
    Split,
    StepRecord,
    TrainConfig,
    ValidationError,
    accuracy,
    audit_trace,
    generate_sbm,
    graph_hash,
    influence_loss,
    init_partition,
    load_graph,
    load_model,
    logits,
    lookahead_influence,
    min_budget,
    predict,
    read_trace,
    recompute_targets,
    run_fga_baseline,
    run_mac,
    save_graph,
    save_model,
    split_nodes,
    train,
    write_trace,
)

__all__ = [
    "AttackConfig",
    "AttackTrace",
    "AttackVariant",
    "Backbone",
    "Budget",
    "FeatureState",
    "FgaResult",
    "Graph",
    "InfluenceConfig",
    "InfluenceLossForm",
    "ModelParams",
    "Outcome",
    "Partition",
    "SbmParams",
    "SchemaError",
    "Scope",
    "Split",
    "StepRecord",
    "TrainConfig",
    "ValidationError",
    "accuracy",
    "audit_trace",
    "generate_sbm",
    "graph_hash",
    "influence_loss",
    "init_partition",
    "load_graph",
    "load_model",
    "logits",
    "lookahead_influence",
    "min_budget",
    "predict",
    "read_trace",
    "recompute_targets",
    "run_fga_baseline",
    "run_mac",
    "save_graph",
    "save_model",
    "split_nodes",
    "train",
    "write_trace",
]
