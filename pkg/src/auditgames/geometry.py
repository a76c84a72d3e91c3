"""Box-halfspace probability kernels.

Uniform coordinates use the exact inclusion-exclusion formula for the volume
of a cube cut by a halfspace, evaluated in rational arithmetic.  Other
continuous marginals go through nested adaptive quadrature, with the
innermost coordinate integrated in closed form through its CDF.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from scipy import integrate

QUAD_TOLERANCE = 1e-10
QUAD_LIMIT = 200
MAX_EXACT_DIM = 16
MAX_DISCRETE_COMBINATIONS = 1 << 16


@dataclass(frozen=True)
class Halfspace:
    """The set ``{a : w . a >= t}`` (``> t`` when ``strict``)."""

    w: tuple[float, ...]
    t: float
    strict: bool = False

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(float(v) for v in self.w))
        object.__setattr__(self, "t", float(self.t))

    def value(self, point: Sequence[float]) -> float:
        return math.fsum(wi * pi for wi, pi in zip(self.w, point))

    def satisfied(self, point: Sequence[float]) -> bool:
        v = self.value(point)
        return v > self.t if self.strict else v >= self.t

    def complement(self) -> "Halfspace":
        return Halfspace(tuple(-v for v in self.w), -self.t, not self.strict)


def _cube_cdf(a: list[Fraction], s: Fraction) -> Fraction:
    """P(sum a_i U_i <= s) for U uniform on the unit cube and all a_i > 0."""
    if s <= 0:
        return Fraction(0)
    if s >= sum(a):
        return Fraction(1)
    dim = len(a)
    acc = Fraction(0)

    # subsets whose weight sum reaches s contribute nothing, nor do their supersets
    def walk(start: int, partial: Fraction, parity: int):
        nonlocal acc
        r = s - partial
        acc += (r ** dim) if parity == 0 else -(r ** dim)
        for i in range(start, dim):
            if partial + a[i] < s:
                walk(i + 1, partial + a[i], parity ^ 1)

    walk(0, Fraction(0), 0)
    denom = math.factorial(dim) * math.prod(a)
    return acc / denom


def uniform_halfspace_fraction(w: Sequence[float], t: float, lo: Sequence[float], hi: Sequence[float],
                               strict: bool = False) -> float:
    """Fraction of the box ``[lo, hi]`` with ``w . a >= t`` (uniform measure).

    The box is mapped affinely onto the unit cube; coordinates with negative
    weight are reflected so every weight is positive.
    """
    free: list[Fraction] = []
    offset = Fraction(0)
    for wi, a, b in zip(w, lo, hi):
        wi, a, b = Fraction(wi), Fraction(a), Fraction(b)
        offset += wi * a
        span = wi * (b - a)
        if span > 0:
            free.append(span)
        elif span < 0:
            offset += span
            free.append(-span)
    if len(free) > MAX_EXACT_DIM:
        raise ValueError(f"exact volume limited to {MAX_EXACT_DIM} free coordinates")
    tau = Fraction(t) - offset
    if not free:
        return 1.0 if (0 > tau if strict else 0 >= tau) else 0.0
    return float(1 - _cube_cdf(free, tau))


def _interval_from(halfspaces, j, fixed, lo, hi):
    """Feasible interval for coordinate ``j`` given the others in ``fixed``."""
    a, b = lo, hi
    for h in halfspaces:
        rest = h.t - math.fsum(h.w[k] * v for k, v in fixed.items())
        wj = h.w[j]
        if wj > 0:
            a = max(a, rest / wj)
        elif wj < 0:
            b = min(b, rest / wj)
        elif (0 <= rest) if h.strict else (0 < rest):
            return None
    return (a, b) if a <= b else None


def _continuous_mass(marginals, lo, hi, dims, halfspaces) -> tuple[float, float]:
    """Mass of the continuous coordinates ``dims`` under ``halfspaces``.

    Every halfspace here has already absorbed the fixed discrete coordinates.
    """
    active = [j for j in dims if any(h.w[j] != 0 for h in halfspaces)]
    factor = math.prod(marginals[j].interval(lo[j], hi[j]) for j in dims if j not in active)
    if factor == 0:
        return 0.0, 0.0
    if not active:
        ok = all((0 > h.t) if h.strict else (0 >= h.t) for h in halfspaces)
        return (factor, 0.0) if ok else (0.0, 0.0)
    if len(halfspaces) == 1 and all(getattr(marginals[j], "uniform", False) for j in active):
        h = halfspaces[0]
        sub_lo = [max(lo[j], marginals[j].lo) for j in active]
        sub_hi = [min(hi[j], marginals[j].hi) for j in active]
        box_mass = math.prod(marginals[j].interval(lo[j], hi[j]) for j in active)
        if box_mass == 0:
            return 0.0, 0.0
        frac = uniform_halfspace_fraction([h.w[j] for j in active], h.t, sub_lo, sub_hi, h.strict)
        return factor * box_mass * frac, 0.0

    last, outer = active[-1], active[:-1]
    errors = [0.0]

    def inner(fixed):
        iv = _interval_from(halfspaces, last, fixed, lo[last], hi[last])
        return 0.0 if iv is None else marginals[last].interval(*iv)

    def integrate_from(level, fixed):
        if level == len(outer):
            return inner(fixed)
        j = outer[level]

        def integrand(v):
            return marginals[j].pdf(v) * integrate_from(level + 1, {**fixed, j: v})

        a, b = max(lo[j], marginals[j].lo), min(hi[j], marginals[j].hi)
        if a >= b:
            return 0.0
        val, err = integrate.quad(integrand, a, b, epsabs=QUAD_TOLERANCE, epsrel=0.0, limit=QUAD_LIMIT)
        errors[0] = max(errors[0], err) if level > 0 else errors[0] + err
        return val

    value = integrate_from(0, {})
    return factor * value, factor * errors[0]


def product_region_mass(marginals, box, halfspaces=()) -> tuple[float, float]:
    """Mass of ``box`` intersected with ``halfspaces`` under a product measure.

    Lattice coordinates are summed over; the continuous remainder goes to
    :func:`_continuous_mass`.  Returns ``(mass, abserr)``.
    """
    halfspaces = tuple(halfspaces)
    lo, hi = box.lo, box.hi
    discrete = [j for j, m in enumerate(marginals) if m.discrete]
    continuous = [j for j, m in enumerate(marginals) if not m.discrete]
    choices = []
    for j in discrete:
        vals = [(v, p) for v, p in zip(marginals[j].values, marginals[j].probs) if lo[j] <= v <= hi[j] and p > 0]
        if not vals:
            return 0.0, 0.0
        choices.append(vals)
    if math.prod(len(c) for c in choices) > MAX_DISCRETE_COMBINATIONS:
        raise ValueError("too many lattice combinations in region")
    cont_err = sum(marginals[j].cdf_error for j in continuous)
    total, err = [], 0.0
    for combo in itertools.product(*choices):
        weight = math.prod(p for _, p in combo)
        reduced = []
        for h in halfspaces:
            shift = math.fsum(h.w[j] * v for j, (v, _) in zip(discrete, combo))
            reduced.append(Halfspace(h.w, h.t - shift, h.strict))
        zeroed = [Halfspace(tuple(0.0 if j in discrete else wj for j, wj in enumerate(h.w)), h.t, h.strict)
                  for h in reduced]
        m, e = _continuous_mass(marginals, lo, hi, continuous, zeroed)
        total.append(weight * m)
        err += weight * (e + cont_err)
    return math.fsum(total), err
