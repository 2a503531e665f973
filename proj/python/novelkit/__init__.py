"""Novel category discovery on embedding data.

Thin wrapper around the compiled core: ranking-statistics pseudo-labels,
dual-head joint/incremental/clustering training, constrained k-means,
Hungarian-matched clustering accuracy, Silhouette, and class-count
estimation.
"""

from novelkit._core import (
    ClusterOutcome,
    DualHeadModel,
    EmbeddingDataset,
    ProbeSplit,
    TrainSchedule,
    bce_loss,
    ce_loss,
    clustering_acc,
    constrained_lloyd,
    cosine_labels,
    estimate_class_count,
    extend_incremental,
    fit_novel_class_map,
    forward,
    hungarian,
    init_model,
    kmeans_batch_labels,
    kmeanspp_init,
    lloyd,
    load_dataset,
    load_model,
    mse_consistency,
    mutual_nn_labels,
    old_new_all_accuracy,
    rampup,
    rank_stats_labels,
    save_dataset,
    save_model,
    silhouette,
    soft_rank_labels,
    split_probe,
    synth_mixture,
    topk_set,
    train_clustering,
    train_incremental,
    train_joint,
)

__all__ = [
    "ClusterOutcome",
    "DualHeadModel",
    "EmbeddingDataset",
    "ProbeSplit",
    "TrainSchedule",
    "bce_loss",
    "ce_loss",
    "clustering_acc",
    "constrained_lloyd",
    "cosine_labels",
    "estimate_class_count",
    "extend_incremental",
    "fit_novel_class_map",
    "forward",
    "hungarian",
    "init_model",
    "kmeans_batch_labels",
    "kmeanspp_init",
    "lloyd",
    "load_dataset",
    "load_model",
    "mse_consistency",
    "mutual_nn_labels",
    "old_new_all_accuracy",
    "rampup",
    "rank_stats_labels",
    "save_dataset",
    "save_model",
    "silhouette",
    "soft_rank_labels",
    "split_probe",
    "synth_mixture",
    "topk_set",
    "train_clustering",
    "train_incremental",
    "train_joint",
]
