"""Variable declarations: kind, block membership and marginal choice."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .errors import InvalidInput


class Kind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    DISCRETE = "discrete"
    ORDINAL = "ordinal"


class Block(str, Enum):
    COORDINATE = "coordinate"
    FEATURE = "feature"
    INDICATOR = "indicator"


class MarginalKind(str, Enum):
    EMPIRICAL = "empirical"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class VariableSpec:
    """Declaration of one instance component.

    Parameters
    ----------
    name : str
        Unique component name (e.g. ``"age"``, ``"v12.y"``, ``"f3"``).
    kind : Kind
        Statistical type of the component.
    block : Block
        Which section of the instance vector the component lives in.
    marginal : MarginalKind
        Marginal model fitted for the component. Only continuous components
        may use the Gaussian marginal.
    ordinal_levels : tuple of float, optional
        Ordered admissible values for non-continuous kinds. When omitted, the
        attained training values define admissibility.
    labels : tuple of str, optional
        Display names for the ordinal_levels, in the same order (e.g.
        ``("female", "male")`` for levels ``(0, 1)``). Purely cosmetic: values
        are always stored numerically, but assignment parsers accept labels.
    """

    name: str
    kind: Kind
    block: Block
    marginal: MarginalKind = MarginalKind.EMPIRICAL
    ordinal_levels: tuple[float, ...] | None = field(default=None)
    labels: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        kind = Kind(self.kind)
        block = Block(self.block)
        marginal = MarginalKind(self.marginal)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "block", block)
        object.__setattr__(self, "marginal", marginal)
        if self.ordinal_levels is not None:
            levels = tuple(float(v) for v in self.ordinal_levels)
            if sorted(levels) != list(levels) or len(set(levels)) != len(levels):
                raise InvalidInput(f"{self.name}: ordinal_levels must be strictly increasing")
            object.__setattr__(self, "ordinal_levels", levels)
        if kind is not Kind.CONTINUOUS and marginal is not MarginalKind.EMPIRICAL:
            raise InvalidInput(f"{self.name}: non-continuous kinds require the empirical marginal")
        if kind is Kind.BINARY and self.ordinal_levels is not None and len(self.ordinal_levels) != 2:
            raise InvalidInput(f"{self.name}: binary variables have exactly 2 admissible values")
        if kind is Kind.ORDINAL and self.ordinal_levels is not None and len(self.ordinal_levels) < 2:
            raise InvalidInput(f"{self.name}: ordinal variables need at least 2 levels")
        if self.labels is not None:
            labels = tuple(str(v) for v in self.labels)
            if self.ordinal_levels is None or len(labels) != len(self.ordinal_levels):
                raise InvalidInput(f"{self.name}: labels must pair 1:1 with ordinal_levels")
            if len(set(labels)) != len(labels):
                raise InvalidInput(f"{self.name}: labels must be distinct")
            object.__setattr__(self, "labels", labels)

    @property
    def is_continuous(self) -> bool:
        return self.kind is Kind.CONTINUOUS

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "kind": self.kind.value,
            "block": self.block.value,
            "marginal": self.marginal.value,
        }
        if self.ordinal_levels is not None:
            d["ordinal_levels"] = list(self.ordinal_levels)
        if self.labels is not None:
            d["labels"] = list(self.labels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VariableSpec":
        levels = d.get("ordinal_levels")
        labels = d.get("labels")
        return cls(
            name=d["name"],
            kind=Kind(d["kind"]),
            block=Block(d["block"]),
            marginal=MarginalKind(d["marginal"]),
            ordinal_levels=tuple(levels) if levels is not None else None,
            labels=tuple(labels) if labels is not None else None,
        )


def check_unique_names(specs: Sequence[VariableSpec]) -> None:
    seen = set()
    for s in specs:
        if s.name in seen:
            raise InvalidInput(f"duplicate variable name {s.name!r}")
        seen.add(s.name)
