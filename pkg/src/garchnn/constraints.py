"""
Smooth maps from unconstrained raw vectors to admissible model parameters.

Three transforms are supported:

``softplus``
    strictly positive values (intercepts).
``simplex``
    a group of non-negative values whose weighted sum stays below one, via a
    softmax with an implicit zero logit.  A member with ``scale=2`` receives
    twice its share, which expresses ``alpha + lambda/2 + beta < 1``.
``unit``
    values in ``[0, 1)`` via the logistic function.

``identity`` leaves a value unconstrained (gate weights).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from garchnn import autograd as ad

__all__ = ["ConstrainedParam", "Parameterization"]

_TRANSFORMS = ("softplus", "simplex", "unit", "identity")
# keeps inverse transforms finite when a value sits on its boundary
_EDGE = 1e-12


@dataclass(frozen=True)
class ConstrainedParam:
    name: str
    transform: str
    group: str | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.transform not in _TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.transform == "simplex" and self.group is None:
            raise ValueError("simplex parameters need a group name")


class Parameterization:
    """Ordered collection of constrained parameters.

    Examples
    --------
    >>> p = Parameterization([ConstrainedParam("omega", "softplus"),
    ...                       ConstrainedParam("alpha", "simplex", "ab"),
    ...                       ConstrainedParam("beta", "simplex", "ab")])
    >>> vals = p.to_constrained(p.to_raw({"omega": 0.1, "alpha": 0.2, "beta": 0.7}))
    >>> round(vals["beta"], 12)
    0.7
    """

    def __init__(self, params: Sequence[ConstrainedParam]):
        self.params = tuple(params)
        self.names = tuple(p.name for p in self.params)
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate parameter names")
        groups: dict[str, list[int]] = {}
        for i, p in enumerate(self.params):
            if p.transform == "simplex":
                groups.setdefault(p.group, []).append(i)
        self._groups = groups

    def __len__(self) -> int:
        return len(self.params)

    def to_constrained(self, raw: Sequence) -> dict:
        """Map raw values (floats or tape variables) to constrained values."""
        if len(raw) != len(self.params):
            raise ValueError(f"expected {len(self.params)} raw values, got {len(raw)}")
        out: dict = {}
        for p, r in zip(self.params, raw):
            if p.transform == "softplus":
                out[p.name] = ad.softplus(r)
            elif p.transform == "unit":
                out[p.name] = ad.sigmoid(r)
            elif p.transform == "identity":
                out[p.name] = r
        for members in self._groups.values():
            rs = [raw[i] for i in members]
            shift = max(0.0, max(ad.value_of(r) for r in rs))
            exps = [ad.exp(r - shift) if shift else ad.exp(r) for r in rs]
            denom = ad.vsum([math.exp(-shift)] + exps)
            for i, e in zip(members, exps):
                p = self.params[i]
                share = e / denom
                out[p.name] = share * p.scale if p.scale != 1.0 else share
        return {name: out[name] for name in self.names}

    def to_raw(self, values: Mapping[str, float]) -> np.ndarray:
        """Inverse of :meth:`to_constrained` for float values."""
        raw = np.zeros(len(self.params))
        for i, p in enumerate(self.params):
            v = float(values[p.name])
            if p.transform == "softplus":
                if v <= 0:
                    raise ValueError(f"{p.name} must be positive, got {v}")
                raw[i] = v + math.log(-math.expm1(-v)) if v > 30 else math.log(math.expm1(v))
            elif p.transform == "unit":
                if not 0.0 <= v < 1.0:
                    raise ValueError(f"{p.name} must lie in [0, 1), got {v}")
                v = min(max(v, _EDGE), 1.0 - _EDGE)
                raw[i] = math.log(v) - math.log1p(-v)
            elif p.transform == "identity":
                raw[i] = v
        for group, members in self._groups.items():
            shares = [float(values[self.params[i].name]) / self.params[i].scale for i in members]
            if any(s < 0 for s in shares):
                raise ValueError(f"simplex group {group!r} needs non-negative values")
            rest = 1.0 - sum(shares)
            if rest <= 0:
                raise ValueError(f"simplex group {group!r} must sum to < 1, got {1 - rest}")
            for i, s in zip(members, shares):
                raw[i] = math.log(max(s, _EDGE)) - math.log(rest)
        return raw
