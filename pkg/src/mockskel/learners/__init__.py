"""Symbolic learners over nominal single-target datasets."""

from .base import (
    C45Params,
    EncodedDataset,
    LearnerParams,
    PartParams,
    RipperParams,
    added_errors,
    entropy,
    gain_ratio,
)
from .c45 import train_c45, train_c45_encoded
from .model import (
    DecisionTree,
    Leaf,
    Model,
    Rule,
    RuleList,
    Split,
    classify,
    leaf_count,
    model_size,
    render_model,
    render_rules,
    render_tree,
)
from .part import train_part, train_part_encoded
from .ripper import train_ripper, train_ripper_encoded

#: learner registry: name -> (train on PreparedDataset, train on encoded rows)
LEARNERS = {
    "c45": (train_c45, train_c45_encoded),
    "ripper": (train_ripper, train_ripper_encoded),
    "part": (train_part, train_part_encoded),
}

LEARNER_ORDER = ("c45", "ripper", "part")


def params_for(name: str, params: LearnerParams):
    return {"c45": params.c45, "ripper": params.ripper, "part": params.part}[name]


def train(name: str, dataset, params: LearnerParams = LearnerParams()):
    """Train one learner by name on a prepared dataset."""
    if name not in LEARNERS:
        raise ValueError(f"unknown learner {name!r} (expected one of {sorted(LEARNERS)})")
    return LEARNERS[name][0](dataset, params_for(name, params))


def train_encoded(name: str, enc, rows, params: LearnerParams = LearnerParams()):
    if name not in LEARNERS:
        raise ValueError(f"unknown learner {name!r} (expected one of {sorted(LEARNERS)})")
    return LEARNERS[name][1](enc, rows, params_for(name, params))


__all__ = [
    "C45Params",
    "DecisionTree",
    "EncodedDataset",
    "LEARNERS",
    "LEARNER_ORDER",
    "Leaf",
    "LearnerParams",
    "Model",
    "PartParams",
    "RipperParams",
    "Rule",
    "RuleList",
    "Split",
    "added_errors",
    "classify",
    "entropy",
    "gain_ratio",
    "leaf_count",
    "model_size",
    "params_for",
    "render_model",
    "render_rules",
    "render_tree",
    "train",
    "train_c45",
    "train_c45_encoded",
    "train_encoded",
    "train_part",
    "train_part_encoded",
    "train_ripper",
    "train_ripper_encoded",
]
