"""Grid decomposition of the type space.

Each axis is cut at every zero-box face and piecewise-linear cell face.
Inside one grid cell the set of active zero boxes and the scorer's linear
piece are constant, which reduces minimum-type search, suspicious-set mass,
score tails and z-dependence checks to finitely many box/halfspace queries.

Lattice axes are cut into runs of consecutive values that share the same
zero-box and cell membership, so a large integer axis with no faces stays a
single segment.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

from auditgames.geometry import Halfspace
from auditgames.scoring import LinearScore, LogisticScore, PiecewiseLinearScore
from auditgames.typespace import AgentType, Box, Prior, density, enumerate_types

MAX_GRID_CELLS = 1 << 16


@dataclass(frozen=True)
class Segment:
    lo: float
    hi: float

    @property
    def rep(self) -> float:
        return (self.lo + self.hi) / 2 if self.lo != self.hi else self.lo


def _cell_member(box: Box, j: int, v: float, upper: float) -> bool:
    lo, hi = box.lo[j], box.hi[j]
    return lo <= v < hi or (v == hi and (hi == upper or lo == hi))


def axis_segments(prior: Prior, f, j: int) -> list[Segment]:
    dom = prior.space.domains[j]
    cells = f.cells if isinstance(f, PiecewiseLinearScore) else ()
    if dom.is_lattice:
        out: list[Segment] = []
        prev = None
        for v in dom.lattice:
            sig = (tuple(b.lo[j] <= v <= b.hi[j] for b in prior.zero_boxes),
                   tuple(_cell_member(b, j, v, f._upper[j]) for b, _ in cells))
            if out and sig == prev:
                out[-1] = Segment(out[-1].lo, v)
            else:
                out.append(Segment(v, v))
            prev = sig
        return out
    if dom.degenerate:
        return [Segment(dom.lo, dom.lo)]
    cuts = {dom.lo, dom.hi}
    for b in prior.zero_boxes:
        cuts.update((b.lo[j], b.hi[j]))
    for b, _ in cells:
        cuts.update((b.lo[j], b.hi[j]))
    pts = sorted(p for p in cuts if dom.lo <= p <= dom.hi)
    return [Segment(a, b) for a, b in zip(pts[:-1], pts[1:])]


class Grid:
    def __init__(self, prior: Prior, f):
        self.prior = prior
        self.f = f
        self.d = prior.space.d
        self.axes = [axis_segments(prior, f, j) for j in range(prior.space.dim)]
        for part in (self.axes[: self.d], self.axes[self.d:]):
            if math.prod(len(a) for a in part) > MAX_GRID_CELLS:
                raise ValueError("grid decomposition exceeds its cell cap")

    def x_cells(self):
        return itertools.product(*self.axes[: self.d])

    def z_cells(self):
        return itertools.product(*self.axes[self.d:])

    def piece(self, rep: Sequence[float]) -> LinearScore:
        return self.f.piece(rep) if isinstance(self.f, PiecewiseLinearScore) else self.f

    def active_for_x(self, xseg: Sequence[Segment]) -> list[Box]:
        """Zero boxes whose known part contains the whole x-cell."""
        d = self.d
        return [b for b in self.prior.zero_boxes
                if all(b.lo[j] <= s.lo and s.hi <= b.hi[j] for j, s in enumerate(xseg[:d]))]

    def active_at_x(self, x: Sequence[float]) -> list[Box]:
        return [b for b in self.prior.zero_boxes if all(b.lo[j] <= v <= b.hi[j] for j, v in enumerate(x))]

    def open_z(self, active: Sequence[Box]):
        """z-cells not covered by any of the ``active`` zero boxes."""
        d = self.d
        for zseg in self.z_cells():
            if not any(all(b.lo[d + j] <= s.lo and s.hi <= b.hi[d + j] for j, s in enumerate(zseg))
                       for b in active):
                yield zseg

    def z_minima(self, x_rep: Sequence[float], active: Sequence[Box]):
        """For each open z-cell: ``(piece, corner, min of w_z . z + bias)``."""
        out = []
        for zseg in self.open_z(active):
            part = self.piece(tuple(x_rep) + tuple(s.rep for s in zseg))
            corner = tuple(s.hi if w < 0 else s.lo for w, s in zip(part.w_z, zseg))
            mu = math.fsum(w * v for w, v in zip(part.w_z, corner)) + part.bias
            out.append((part, corner, mu, zseg))
        return out


def _box(segs: Sequence[Segment]) -> Box:
    return Box(tuple(s.lo for s in segs), tuple(s.hi for s in segs))


def full_z_segments(prior: Prior) -> list[Segment]:
    return [Segment(dm.lo, dm.hi) for dm in prior.space.self_reported]


def min_oriented(prior: Prior, g, x: Sequence[float]) -> tuple[float, tuple[float, ...]]:
    """Infimum over supported z of ``g(x, z)`` and the z attaining it.

    The infimum is taken over the closure of each open cell, so the returned
    z may sit on a zero-box face when the minimum is not attained.
    """
    grid = Grid(prior, g)
    cands = grid.z_minima(x, grid.active_at_x(x))
    if not cands:
        raise ValueError(f"no supported self-report for known part {tuple(x)}")
    best = min(cands, key=lambda c: (c[0].linear_part(tuple(x) + c[1]), c[1]))
    return best[0].linear_part(tuple(x) + best[1]), best[1]


def suspicious_mass(prior: Prior, g, theta: float) -> tuple[float, float]:
    """``P(g(a) >= theta and min_z g(x, z) < theta)`` for linear or
    piecewise-linear ``g``; returns ``(mass, abserr)``.

    Uses ``P(U) = P(G) - P(sure-truth)``: on each x-cell, sure-truth is the
    intersection over open z-cells of ``w_x . x >= theta - mu`` and it implies
    membership in ``G``.
    """
    grid = Grid(prior, g)
    zfull = full_z_segments(prior)
    total, err = [], 0.0
    if isinstance(g, PiecewiseLinearScore):
        for xseg in grid.x_cells():
            active = grid.active_for_x(xseg)
            for zseg in grid.open_z(active):
                part = grid.piece(tuple(s.rep for s in xseg) + tuple(s.rep for s in zseg))
                m, e = prior.region_mass(_box(xseg + zseg), [Halfspace(part.weights, theta - part.bias)])
                total.append(m)
                err += e
    else:
        whole = prior.space.bounds
        m, e = prior.region_mass(whole, [Halfspace(g.weights, theta - g.bias)])
        total.append(m)
        err += e
    for xseg in grid.x_cells():
        cands = grid.z_minima(tuple(s.rep for s in xseg), grid.active_for_x(xseg))
        if not cands:
            continue
        bound: dict[tuple[float, ...], float] = {}
        for part, _, mu, _ in cands:
            key = part.w_x
            bound[key] = max(bound.get(key, -math.inf), theta - mu)
        halfspaces = []
        feasible = True
        for w_x, t in bound.items():
            if all(w == 0 for w in w_x):
                if 0 < t:
                    feasible = False
                continue
            halfspaces.append(Halfspace(w_x + (0.0,) * prior.space.s, t))
        if not feasible:
            continue
        m, e = prior.region_mass(_box(tuple(xseg) + tuple(zfull)), halfspaces)
        total.append(-m)
        err += e
    return min(1.0, max(0.0, math.fsum(total))), err


def _linear_tail_halfspace(f, v: float, strict: bool):
    """Halfspace equivalent to ``f(a) >= v`` (``> v`` when strict), or a
    boolean when the event is certain / impossible."""
    if isinstance(f, LogisticScore):
        if v <= 0:
            return True
        if v >= 1:
            return False
        t = math.log(1.0 / v - 1.0)
        # logistic >= v  <=>  w . a + bias <= t
        return Halfspace(tuple(-w for w in f.weights), f.bias - t, strict)
    return Halfspace(f.weights, v - f.bias, strict)


def supported_types(prior: Prior) -> list[AgentType]:
    cached = prior.__dict__.get("_support_cache")
    if cached is None:
        cached = [(a, density(prior, a)) for a in enumerate_types(prior.space, prior)]
        object.__setattr__(prior, "_support_cache", cached)
    return cached


def score_tail(prior: Prior, f, v: float, strict: bool = False) -> float:
    """``P_{a ~ D}(f(a) >= v)`` (or ``> v``)."""
    if prior.is_enumerable:
        pairs = supported_types(prior)
        total = math.fsum(p for a, p in pairs if (f(a) > v if strict else f(a) >= v))
        mass = math.fsum(p for _, p in pairs)
        return min(1.0, total / mass)
    if isinstance(f, PiecewiseLinearScore):
        grid = Grid(prior, f)
        total = []
        for cell in itertools.product(*grid.axes):
            part = grid.piece(tuple(s.rep for s in cell))
            total.append(prior.region_mass(_box(cell), [_linear_tail_halfspace(part, v, strict)])[0])
        return min(1.0, max(0.0, math.fsum(total)))
    if isinstance(f, LinearScore):
        h = _linear_tail_halfspace(f, v, strict)
        if h is True:
            return 1.0
        if h is False:
            return 0.0
        return prior.region_mass(prior.space.bounds, [h])[0]
    raise ValueError(f"cannot compute score tails for {f.kind} scores on a continuous prior")


def z_dependent(prior: Prior, f) -> bool:
    """Whether some supported known part has two supported self-reports
    with different scores."""
    if prior.is_enumerable:
        by_x: dict = {}
        for a, _ in supported_types(prior):
            by_x.setdefault(a.x, set()).add(f(a))
        return any(len(v) > 1 for v in by_x.values())
    if not isinstance(f, (LinearScore, PiecewiseLinearScore)):
        raise ValueError(f"cannot inspect {f.kind} scores on a continuous prior")
    grid = Grid(prior, f)
    for xseg in grid.x_cells():
        cands = grid.z_minima(tuple(s.rep for s in xseg), grid.active_for_x(xseg))
        if not cands:
            continue
        for part, _, _, zseg in cands:
            if any(w != 0 and s.lo != s.hi for w, s in zip(part.w_z, zseg)):
                return True
        vertices = list(itertools.product(*({s.lo, s.hi} for s in xseg)))
        for x in vertices:
            vals = {part.linear_part(x + corner) for part, corner, _, _ in cands}
            if len(vals) > 1:
                return True
    return False
