"""Team-gender classifiers and their evaluation protocol."""
from .dataset import FEMALE, MALE, LabeledDataset
from .evaluation import (
    DEFAULT_GRIDS,
    EvalReport,
    Metrics,
    PairedMatchReport,
    grid_search_5fold,
    group_folds,
    leave_one_team_out_cv,
    metrics,
    paired_match_eval,
    roc_curve,
    split_tune_eval,
)
from .models import (
    AdaBoostM1Model,
    BaselineModel,
    DecisionTreeModel,
    LogisticModel,
    RandomForestModel,
    TrainedModel,
    Tree,
    TreeEnsemble,
    grow_cart,
    train_adaboost_m1,
    train_baseline,
    train_decision_tree,
    train_logistic,
    train_model,
    train_random_forest,
)
from .serialize import load_model, model_from_record, model_to_record, save_model


def baseline_classifier(train_labels, seed: int = 0, feature_names=None) -> BaselineModel:
    """Random predictor that draws class 1 with the training prior."""
    return train_baseline(train_labels, seed, feature_names)


__all__ = [
    "FEMALE", "MALE", "LabeledDataset", "DEFAULT_GRIDS", "EvalReport", "Metrics", "PairedMatchReport",
    "grid_search_5fold", "group_folds", "leave_one_team_out_cv", "metrics", "paired_match_eval",
    "roc_curve", "split_tune_eval", "AdaBoostM1Model", "BaselineModel", "DecisionTreeModel",
    "LogisticModel", "RandomForestModel", "TrainedModel", "Tree", "TreeEnsemble", "grow_cart",
    "train_adaboost_m1", "train_baseline", "train_decision_tree", "train_logistic", "train_model",
    "train_random_forest", "baseline_classifier", "load_model", "model_from_record",
    "model_to_record", "save_model",
]
