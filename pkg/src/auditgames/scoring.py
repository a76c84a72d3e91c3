"""Score functions over reported types.

Four variants: linear, piecewise-linear over axis-aligned cells, logistic and
tabulated.  The logistic form is ``1 / (exp(w . a + bias) + 1)``, which is
*decreasing* in ``w . a``; :func:`logistic_to_linear` carries the resulting
comparison direction explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from auditgames.typespace import AgentType, Box, TypeSpace


@dataclass(frozen=True)
class LinearScore:
    w_x: tuple[float, ...]
    w_z: tuple[float, ...]
    bias: float = 0.0

    kind = "linear"
    monotone = 1

    def __post_init__(self):
        object.__setattr__(self, "w_x", tuple(float(v) for v in self.w_x))
        object.__setattr__(self, "w_z", tuple(float(v) for v in self.w_z))
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def weights(self) -> tuple[float, ...]:
        return self.w_x + self.w_z

    def linear_part(self, vector: Sequence[float]) -> float:
        return math.fsum(w * v for w, v in zip(self.weights, vector)) + self.bias

    def __call__(self, a: AgentType) -> float:
        _check_dims(self, a)
        return self.linear_part(a.vector)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ np.asarray(self.weights) + self.bias


@dataclass(frozen=True)
class LogisticScore(LinearScore):
    kind = "logistic"
    monotone = -1

    def __call__(self, a: AgentType) -> float:
        _check_dims(self, a)
        return float(expit(-self.linear_part(a.vector)))

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return expit(-super().evaluate(points))


def _check_dims(f, a: AgentType):
    if len(a.x) != len(f.w_x) or len(a.z) != len(f.w_z):
        raise ValueError("dimension mismatch between score weights and type")


@dataclass(frozen=True)
class PiecewiseLinearScore:
    """Linear on each cell of a rectangular partition.

    Cells are half-open ``[lo, hi)`` except on the partition's global upper
    boundary; a boundary point goes to the lexicographically-first cell that
    contains it.
    """

    cells: tuple[tuple[Box, LinearScore], ...]

    kind = "piecewise-linear"
    monotone = 1
    _upper: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        cells = tuple(sorted(self.cells, key=lambda c: (c[0].lo, c[0].hi)))
        if not cells:
            raise ValueError("piecewise-linear score needs at least one cell")
        object.__setattr__(self, "cells", cells)
        dim = cells[0][0].dim
        upper = tuple(max(c[0].hi[j] for c in cells) for j in range(dim))
        object.__setattr__(self, "_upper", upper)

    def cell_index(self, vector: Sequence[float]) -> int:
        for i, (box, _) in enumerate(self.cells):
            if all(
                lo <= v < hi or (v == hi and (hi == up or lo == hi))
                for lo, v, hi, up in zip(box.lo, vector, box.hi, self._upper)
            ):
                return i
        raise ValueError(f"point {tuple(vector)} is not covered by any cell")

    def piece(self, vector: Sequence[float]) -> LinearScore:
        return self.cells[self.cell_index(vector)][1]

    def __call__(self, a: AgentType) -> float:
        return self.piece(a.vector).linear_part(a.vector)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.array([self.piece(p).linear_part(p) for p in np.asarray(points, dtype=float)])

    def validate(self, space: TypeSpace) -> None:
        """Check the cells are disjoint and cover ``space``."""
        cuts = []
        for j, dm in enumerate(space.domains):
            if dm.is_lattice:
                cuts.append([(v, v) for v in dm.lattice])
                continue
            pts = sorted({dm.lo, dm.hi, *(b.lo[j] for b, _ in self.cells), *(b.hi[j] for b, _ in self.cells)})
            pts = [p for p in pts if dm.lo <= p <= dm.hi]
            cuts.append(list(zip(pts[:-1], pts[1:])) or [(dm.lo, dm.hi)])
        import itertools

        for combo in itertools.product(*cuts):
            mid = tuple((a + b) / 2 for a, b in combo)
            owners = [i for i, (box, _) in enumerate(self.cells)
                      if all(lo <= v <= hi if lo == hi or a == b else lo < v < hi
                             for lo, v, hi, (a, b) in zip(box.lo, mid, box.hi, combo))]
            if not owners:
                raise ValueError(f"cells do not cover the point {mid}")
            if len(owners) > 1 and not all(any(a == b for a, b in combo) for _ in owners):
                raise ValueError(f"cells overlap at {mid}")


@dataclass(frozen=True)
class TableScore:
    values: tuple[tuple[AgentType, float], ...]

    kind = "table"
    _lookup: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        items = self.values.items() if isinstance(self.values, Mapping) else self.values
        items = tuple((a, float(v)) for a, v in items)
        object.__setattr__(self, "values", items)
        object.__setattr__(self, "_lookup", dict(items))

    def __call__(self, a: AgentType) -> float:
        try:
            return self._lookup[a]
        except KeyError:
            raise KeyError(f"{a} is missing from the score table") from None

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        d = len(self.values[0][0].x)
        return np.array([self(AgentType.from_vector(p, d)) for p in np.asarray(points, dtype=float)])

    def covers(self, types) -> bool:
        return all(a in self._lookup for a in types)


ScoreFunction = LinearScore | LogisticScore | PiecewiseLinearScore | TableScore


def score(f: ScoreFunction, a: AgentType) -> float:
    return f(a)


@dataclass(frozen=True)
class ScoreExtremes:
    x_min: tuple[float, ...]
    x_max: tuple[float, ...]
    z_min: tuple[float, ...]
    z_max: tuple[float, ...]
    f_min: float
    f_max: float


def _endpoint(dom, w: float, high: bool) -> float:
    # zero weight picks the lower endpoint (lexicographic tie-break)
    if w == 0:
        return dom.lo
    return dom.hi if (w > 0) == high else dom.lo


def score_extremes(f: ScoreFunction, space: TypeSpace, mode: str = "analytic", support=None) -> ScoreExtremes:
    """Coordinatewise extremal known/self parts and the extreme scores.

    ``mode="analytic"`` handles linear and logistic scorers by endpoint
    selection on weight sign.  ``mode="scan"`` scans ``support`` (a list of
    types, e.g. from :func:`enumerate_types`); ``mode="cells"`` scans the
    corners of each piecewise-linear cell.
    """
    if mode == "scan":
        pts = list(support if support is not None else getattr(f, "_lookup", {}).keys())
        if not pts:
            raise ValueError("scan mode needs a non-empty support")
        vals = [f(a) for a in pts]
        lo_i = min(range(len(pts)), key=lambda i: (vals[i], pts[i]))
        hi_i = max(range(len(pts)), key=lambda i: (vals[i], [-v for v in pts[i].vector]))
        return ScoreExtremes(pts[lo_i].x, pts[hi_i].x, pts[lo_i].z, pts[hi_i].z, vals[lo_i], vals[hi_i])
    if mode == "cells":
        if not isinstance(f, PiecewiseLinearScore):
            raise ValueError("cells mode needs a piecewise-linear score")
        best_lo = best_hi = None
        for box, part in f.cells:
            for high in (False, True):
                v = tuple(
                    (b if (w > 0) == high else a) if w != 0 else a
                    for w, a, b in zip(part.weights, box.lo, box.hi)
                )
                val = part.linear_part(v)
                if not high and (best_lo is None or val < best_lo[0]):
                    best_lo = (val, v)
                if high and (best_hi is None or val > best_hi[0]):
                    best_hi = (val, v)
        d = space.d
        return ScoreExtremes(best_lo[1][:d], best_hi[1][:d], best_lo[1][d:], best_hi[1][d:], best_lo[0], best_hi[0])
    if mode != "analytic" or not isinstance(f, LinearScore):
        raise ValueError(f"score_extremes({mode!r}) supports linear and logistic scorers; use mode='scan' or 'cells'")
    # the logistic form decreases in w . a, so its maximizer minimizes w . a
    up = f.monotone > 0
    x_max = tuple(_endpoint(dm, w, up) for dm, w in zip(space.known, f.w_x))
    x_min = tuple(_endpoint(dm, w, not up) for dm, w in zip(space.known, f.w_x))
    z_max = tuple(_endpoint(dm, w, up) for dm, w in zip(space.self_reported, f.w_z))
    z_min = tuple(_endpoint(dm, w, not up) for dm, w in zip(space.self_reported, f.w_z))
    return ScoreExtremes(x_min, x_max, z_min, z_max, f(AgentType(x_min, z_min)), f(AgentType(x_max, z_max)))


@dataclass(frozen=True)
class ReducedThreshold:
    """A linear scorer plus a threshold and the comparison that allocates."""

    score: LinearScore
    theta: float
    direction: str


def logistic_to_linear(f: LogisticScore, theta: float) -> ReducedThreshold:
    """Reduce ``f(a) >= theta`` to ``w . a + bias <= log(1/theta - 1)``."""
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if not isinstance(f, LogisticScore):
        raise TypeError("logistic_to_linear needs a logistic score")
    return ReducedThreshold(LinearScore(f.w_x, f.w_z, f.bias), math.log(1.0 / theta - 1.0), "<=")
