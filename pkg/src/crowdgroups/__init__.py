"""Social-group detection in pedestrian trajectories.

Pairwise social features (proxemics, trajectory shape, directed causality,
path heat maps) feed a learned correlation-clustering affinity; the weights
are trained with structured max-margin learning against a group-aware
clustering loss.
"""

from .errors import (
    ConfigError,
    CrowdGroupsError,
    DataError,
    DegenerateProjectionError,
    TrajectoryParseError,
)
from .features import (
    FEATURE_NAMES,
    FeatureConfigs,
    GrangerConfig,
    HeatmapConfig,
    HeatmapGrid,
    PairFeatures,
    ProxemicsConfig,
    WindowedScene,
    build_scene,
    dtw_shape_distance,
    f_cdf,
    gmm_eval,
    granger_causality_area,
    granger_distance,
    heatmap_build,
    heatmap_distance,
    proxemic_distance,
    window_grid,
    write_features_csv,
)
from .harness import (
    RunConfig,
    evaluate_predictions,
    load_run_config,
    read_config_file,
    run_experiment,
    write_config_file,
)
from .learning import (
    LOSSES,
    Model,
    TrainConfig,
    TrainingExample,
    bcfw_train,
    compatibility,
    joint_feature_map,
    loss_augmented_oracle,
    make_training_examples,
    online_predict_train,
    predict,
    primal_objective,
    sequential_train,
)
from .losses import (
    ForestScore,
    gmitre_loss,
    gmitre_score,
    mitre_loss,
    mitre_score,
    pairwise_loss,
    positive_pairwise_metric,
)
from .partitioning import (
    EXHAUSTIVE_MEMBER_LIMIT,
    AffinityMatrix,
    MergeStep,
    MergeTrace,
    Partition,
    affinity,
    exhaustive_cc,
    greedy_cc,
    iter_partition_labels,
    partition_score,
)
from .synth import SynthSpec, synth_generate, write_dataset
from .trajectories import (
    Dataset,
    GroundTruthLabels,
    Homography,
    SceneStats,
    TimeWindow,
    Trajectory,
    apply_homography,
    load_dataset,
    load_ground_truth,
    load_homography,
    load_trajectories,
    parse_descriptor,
    restrict_labels,
    scene_stats,
    slice_windows,
    window_ground_truth,
)

__version__ = "0.1.0"

__all__ = [
    "AffinityMatrix",
    "ConfigError",
    "CrowdGroupsError",
    "DataError",
    "Dataset",
    "DegenerateProjectionError",
    "EXHAUSTIVE_MEMBER_LIMIT",
    "FEATURE_NAMES",
    "FeatureConfigs",
    "ForestScore",
    "GrangerConfig",
    "GroundTruthLabels",
    "HeatmapConfig",
    "HeatmapGrid",
    "Homography",
    "LOSSES",
    "MergeStep",
    "MergeTrace",
    "Model",
    "PairFeatures",
    "Partition",
    "ProxemicsConfig",
    "RunConfig",
    "SceneStats",
    "SynthSpec",
    "TimeWindow",
    "TrainConfig",
    "TrainingExample",
    "Trajectory",
    "TrajectoryParseError",
    "WindowedScene",
    "affinity",
    "apply_homography",
    "bcfw_train",
    "build_scene",
    "compatibility",
    "dtw_shape_distance",
    "evaluate_predictions",
    "exhaustive_cc",
    "f_cdf",
    "gmitre_loss",
    "gmitre_score",
    "gmm_eval",
    "granger_causality_area",
    "granger_distance",
    "greedy_cc",
    "heatmap_build",
    "heatmap_distance",
    "iter_partition_labels",
    "joint_feature_map",
    "load_dataset",
    "load_ground_truth",
    "load_homography",
    "load_run_config",
    "load_trajectories",
    "loss_augmented_oracle",
    "make_training_examples",
    "mitre_loss",
    "mitre_score",
    "online_predict_train",
    "pairwise_loss",
    "parse_descriptor",
    "partition_score",
    "positive_pairwise_metric",
    "predict",
    "primal_objective",
    "proxemic_distance",
    "read_config_file",
    "restrict_labels",
    "run_experiment",
    "scene_stats",
    "sequential_train",
    "slice_windows",
    "synth_generate",
    "window_grid",
    "window_ground_truth",
    "write_config_file",
    "write_dataset",
    "write_features_csv",
]
