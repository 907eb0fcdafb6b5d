"""Federated model-recombination simulator (C++ core with Python bindings)."""

from ._core import (
    ArchitectureSpec,
    ClientShard,
    Dataset,
    FedmrError,
    HeterogeneityReport,
    LayerBlock,
    LayerRange,
    LayeredModel,
    Lemma1Report,
    LocalTrainConfig,
    PartitionMode,
    PartitionSpec,
    RecombinationPlan,
    RunConfig,
    SecureConfig,
    Strategy,
    aggregate_mean,
    check_lemma1,
    client_update,
    evaluate,
    expected_overhead,
    final_global,
    forward,
    heterogeneity_report,
    init_model,
    load_model,
    make_blobs,
    model_debug_json,
    pairwise_cosine_mean,
    partition,
    per_layer_groups,
    plan_from_json,
    recombine,
    run,
    sample_clients,
    sample_plan,
    save_model,
    secure_round,
    segment_groups,
    sq_distance_sum,
    sum_models,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
