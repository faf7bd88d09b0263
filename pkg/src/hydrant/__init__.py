"""Prunable Hydra, Quant and Hydrant time series classifiers."""

from .data import (
    DatasetError,
    SyntheticSpec,
    TimeSeriesDataset,
    generate_synthetic,
    load_dataset,
    save_dataset,
    split_folds,
)
from .hydra import HydraConfig, HydraTransform, hydra_fit, hydra_prune, hydra_transform
from .pruning import (
    BoundReport,
    PruneDecision,
    PrunedPipeline,
    SetImportance,
    mean_set_importance,
    pruning_error_bound,
    select_top_sets,
    sorted_tail_bound,
    train_pipeline,
    train_pruned,
)
from .quant import QuantConfig, QuantTransform, quant_fit, quant_prune, quant_transform
from .ridge import RidgeModel, ridge_fit, ridge_predict, ridge_scores
from .trees import TreeConfig, TreeEnsemble, trees_fit, trees_predict, trees_predict_proba

__version__ = "0.1.0"
