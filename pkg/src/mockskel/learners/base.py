"""Shared learner machinery: parameters, integer encoding of nominal
datasets, entropy / gain ratio, and the pessimistic error estimate used
for pruning."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable

import numpy as np

from ..errors import DegenerateDatasetError, UnknownAttributeError
from ..features import Role
from ..prep import PreparedDataset


@dataclass(frozen=True)
class C45Params:
    confidence_factor: float = 0.25
    min_leaf_instances: int = 2


@dataclass(frozen=True)
class RipperParams:
    #: data is split fold-style for growing/pruning: (folds-1)/folds grows
    folds_split: int = 3
    min_rule_coverage: int = 2
    optimization_runs: int = 2
    seed: int = 1


@dataclass(frozen=True)
class PartParams:
    confidence_factor: float = 0.25
    min_leaf_instances: int = 2


@dataclass(frozen=True)
class LearnerParams:
    c45: C45Params = C45Params()
    ripper: RipperParams = RipperParams()
    part: PartParams = PartParams()


class EncodedDataset:
    """Integer-encoded view of a prepared dataset for the learner cores.

    Column j of ``X`` holds indices into ``domains[j]``; ``y`` holds
    indices into ``target_domain``.
    """

    def __init__(self, prepared: PreparedDataset):
        table = prepared.table
        inputs = [a for a in table.schema if a.role is Role.INPUT]
        target = table.attribute(prepared.target)
        self.target_name = target.name
        self.target_domain: tuple[str, ...] = target.domain
        self.names: tuple[str, ...] = tuple(a.name for a in inputs)
        self.domains: tuple[tuple[str, ...], ...] = tuple(a.domain for a in inputs)
        n = len(table.instances)
        d = len(inputs)
        self.X = np.zeros((n, d), dtype=np.int32)
        self.y = np.zeros(n, dtype=np.int32)
        col_of = {a.name: table.index_of(a.name) for a in inputs}
        y_col = table.index_of(target.name)
        value_index = [
            {v: i for i, v in enumerate(a.domain)} for a in inputs
        ]
        y_index = {v: i for i, v in enumerate(target.domain)}
        for r, inst in enumerate(table.instances):
            for j, attr in enumerate(inputs):
                self.X[r, j] = value_index[j][inst.values[col_of[attr.name]]]
            self.y[r] = y_index[inst.values[y_col]]

    @property
    def n_instances(self) -> int:
        return len(self.y)

    @property
    def n_classes(self) -> int:
        return len(self.target_domain)

    def all_rows(self) -> np.ndarray:
        return np.arange(self.n_instances, dtype=np.intp)

    def total_conditions(self) -> int:
        return sum(len(d) for d in self.domains)


def entropy(class_counts: Iterable[float]) -> float:
    """Shannon entropy in bits of a class-count multiset."""
    counts = [c for c in class_counts]
    if any(c < 0 for c in counts):
        raise ValueError("class counts must be non-negative")
    total = float(sum(counts))
    if total <= 0:
        raise ValueError("entropy of an empty class-count set is undefined")
    result = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            result -= p * math.log2(p)
    return result


def _xlogx_sum(counts: np.ndarray) -> float:
    positive = counts[counts > 0].astype(np.float64)
    return float((positive * np.log2(positive)).sum())


def _entropy_np(counts: np.ndarray) -> float:
    total = float(counts.sum())
    if total <= 0:
        return 0.0
    return math.log2(total) - _xlogx_sum(counts) / total


def contingency(enc: EncodedDataset, rows: np.ndarray, attr_index: int) -> np.ndarray:
    """(domain size x class count) contingency table over ``rows``."""
    m = len(enc.domains[attr_index])
    k = enc.n_classes
    values = enc.X[rows, attr_index].astype(np.int64)
    return np.bincount(values * k + enc.y[rows], minlength=m * k).reshape(m, k)


def branch_entropies(cont: np.ndarray) -> np.ndarray:
    """Per-branch class entropy of a contingency table (0 for empty branches)."""
    sizes = cont.sum(axis=1).astype(np.float64)
    out = np.zeros(len(sizes))
    nonzero = sizes > 0
    cell_terms = np.where(cont > 0, cont * np.log2(np.maximum(cont, 1)), 0.0).sum(axis=1)
    out[nonzero] = np.log2(sizes[nonzero]) - cell_terms[nonzero] / sizes[nonzero]
    return out


def gain_and_ratio(cont: np.ndarray) -> tuple[float, float]:
    """Information gain and gain ratio from a contingency table.

    Ratio is 0 when the split information is 0 (single-valued attribute).
    Uses the identity H(p) = log2(N) - sum(c*log2(c))/N per partition.
    """
    branch_sizes = cont.sum(axis=1)
    total = float(branch_sizes.sum())
    if total <= 0:
        return 0.0, 0.0
    log_total = math.log2(total)
    s_cells = _xlogx_sum(cont)
    s_branches = _xlogx_sum(branch_sizes)
    before = log_total - _xlogx_sum(cont.sum(axis=0)) / total
    after = (s_branches - s_cells) / total
    gain = before - after
    split_info = log_total - s_branches / total
    if split_info <= 0.0:
        return gain, 0.0
    return gain, gain / split_info


def gain_ratio(dataset: PreparedDataset, attribute: str, target: str | None = None) -> float:
    """Gain ratio of an input attribute with respect to the dataset's target."""
    if target is not None and target != dataset.target:
        raise UnknownAttributeError(
            f"dataset is projected for target {dataset.target!r}, not {target!r}"
        )
    enc = EncodedDataset(dataset)
    if enc.n_instances == 0:
        raise DegenerateDatasetError("no instances")
    try:
        idx = enc.names.index(attribute)
    except ValueError:
        raise UnknownAttributeError(f"no input attribute named {attribute!r}") from None
    _, ratio = gain_and_ratio(contingency(enc, enc.all_rows(), idx))
    return ratio


def added_errors(n: float, e: float, cf: float) -> float:
    """Pessimistic upper-bound correction on ``e`` observed errors in
    ``n`` instances at confidence ``cf`` (the classic C4.5 estimate)."""
    if n <= 0:
        return 0.0
    cf = min(cf, 0.5)
    if e < 1:
        base = n * (1 - cf ** (1.0 / n))
        if e == 0:
            return base
        return base + e * (added_errors(n, 1.0, cf) - base)
    if e + 0.5 >= n:
        return max(n - e, 0.0)
    z = NormalDist().inv_cdf(1 - cf)
    f = (e + 0.5) / n
    r = (f + z * z / (2 * n) + z * math.sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (
        1 + z * z / n
    )
    return r * n - e


def class_counts(enc: EncodedDataset, rows: np.ndarray) -> np.ndarray:
    return np.bincount(enc.y[rows], minlength=enc.n_classes)


def majority_class(counts: np.ndarray) -> int:
    # argmax takes the first maximum: ties break to the lower class index
    return int(np.argmax(counts))
