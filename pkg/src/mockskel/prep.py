"""Dataset preparation: nominal coercion, target pruning, per-target projection.

Learning happens on one single-target dataset per surviving response
feature; targets that cannot discriminate (one distinct value) or cannot
generalize (almost one distinct value per instance) are removed and the
removal is recorded so skeleton consumers can see why a field carries no
model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .errors import PrunedTargetError, UnknownTargetError
from .features import Attribute, Instance, InstanceTable, Role, nominal_sort

REASON_UNARY = "unary"
REASON_HIGH_CARDINALITY = "high-cardinality"
REASON_SINGLE_VALUED_INPUT = "single-valued-input"


@dataclass(frozen=True)
class PrepConfig:
    max_target_cardinality: int = 32
    max_target_distinct_ratio: float = 0.5
    drop_single_valued_inputs: bool = True

    def __post_init__(self):
        if self.max_target_cardinality < 2:
            raise ValueError("max_target_cardinality must be >= 2")
        if not 0.0 < self.max_target_distinct_ratio <= 1.0:
            raise ValueError("max_target_distinct_ratio must be in (0, 1]")

    def cardinality_limit(self, n_instances: int) -> float:
        return min(self.max_target_cardinality, self.max_target_distinct_ratio * n_instances)


@dataclass(frozen=True)
class Removal:
    attribute: str
    role: Role
    reason: str
    distinct_count: int
    #: the single observed value for unary attributes (serveable default)
    value: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "role": self.role.value,
            "reason": self.reason,
            "distinctCount": self.distinct_count,
        }


def removal_report_json(removals: tuple[Removal, ...]) -> str:
    return json.dumps([r.to_json_dict() for r in removals], indent=2)


@dataclass(frozen=True)
class PreparedDataset:
    """All input attributes plus exactly one target attribute."""

    table: InstanceTable
    target: str
    provenance: tuple[Removal, ...] = ()

    def __post_init__(self):
        attr = self.table.attribute(self.target)
        if attr.role is not Role.TARGET:
            raise UnknownTargetError(f"{self.target!r} is not a target attribute")

    @property
    def target_attribute(self) -> Attribute:
        return self.table.attribute(self.target)

    @property
    def input_attributes(self) -> tuple[Attribute, ...]:
        return self.table.inputs()

    def __len__(self) -> int:
        return len(self.table.instances)


def coerce_to_nominal(table: InstanceTable) -> InstanceTable:
    """Recompute every attribute's domain as the finite set of observed
    value strings (numeric-looking values become nominal literals)."""
    schema = tuple(
        replace(attr, domain=nominal_sort(inst.values[i] for inst in table.instances))
        for i, attr in enumerate(table.schema)
    )
    return InstanceTable(schema=schema, instances=table.instances)


def prune_targets(
    table: InstanceTable, config: PrepConfig = PrepConfig()
) -> tuple[InstanceTable, tuple[Removal, ...]]:
    """Drop unary and high-cardinality targets (and, when configured,
    single-valued inputs).  Returns the reduced table and the removal
    report."""
    n = len(table.instances)
    limit = config.cardinality_limit(n)
    removals: list[Removal] = []
    kept: list[int] = []
    for i, attr in enumerate(table.schema):
        distinct = len(attr.domain)
        if attr.role is Role.TARGET:
            if distinct <= 1:
                removals.append(
                    Removal(attr.name, attr.role, REASON_UNARY, distinct,
                            value=attr.domain[0] if attr.domain else None)
                )
                continue
            if distinct > limit:
                removals.append(Removal(attr.name, attr.role, REASON_HIGH_CARDINALITY, distinct))
                continue
        else:
            if config.drop_single_valued_inputs and distinct <= 1:
                removals.append(
                    Removal(attr.name, attr.role, REASON_SINGLE_VALUED_INPUT, distinct,
                            value=attr.domain[0] if attr.domain else None)
                )
                continue
        kept.append(i)

    schema = tuple(table.schema[i] for i in kept)
    instances = tuple(
        Instance(values=tuple(inst.values[i] for i in kept), transaction_id=inst.transaction_id)
        for inst in table.instances
    )
    return InstanceTable(schema=schema, instances=instances), tuple(removals)


def project_for_target(
    table: InstanceTable,
    target: str,
    removals: tuple[Removal, ...] = (),
) -> PreparedDataset:
    """Restrict a pruned table to its inputs plus the named target."""
    for removal in removals:
        if removal.attribute == target:
            raise PrunedTargetError(f"target {target!r} was removed ({removal.reason})")
    names = {a.name: a for a in table.schema}
    if target not in names or names[target].role is not Role.TARGET:
        raise UnknownTargetError(f"{target!r} is not a target attribute of this table")
    keep = [i for i, a in enumerate(table.schema) if a.role is Role.INPUT or a.name == target]
    schema = tuple(table.schema[i] for i in keep)
    instances = tuple(
        Instance(values=tuple(inst.values[i] for i in keep), transaction_id=inst.transaction_id)
        for inst in table.instances
    )
    return PreparedDataset(
        table=InstanceTable(schema=schema, instances=instances),
        target=target,
        provenance=removals,
    )


def prepare_all(
    table: InstanceTable, config: PrepConfig = PrepConfig()
) -> tuple[list[PreparedDataset], tuple[Removal, ...]]:
    """Coerce, prune, and project one dataset per surviving target."""
    coerced = coerce_to_nominal(table)
    pruned, removals = prune_targets(coerced, config)
    datasets = [
        project_for_target(pruned, attr.name, removals) for attr in pruned.targets()
    ]
    return datasets, removals
