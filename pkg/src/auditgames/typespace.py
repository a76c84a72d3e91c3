"""Feature domains, agent types and the common prior over types.

A type space is ``I^d x I^s``: ``d`` known features followed by ``s``
self-reported ones.  Every point is addressed as a flat vector ``x + z`` of
length ``d + s``; boxes and halfspaces use the same coordinate order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from auditgames import geometry

MAX_ZERO_BOXES = 16
DEFAULT_ENUMERATION_CAP = 1 << 16
DEFAULT_REJECTION_RETRIES = 1000
MASS_TOLERANCE = 1e-9


@dataclass(frozen=True)
class FeatureDomain:
    lo: float
    hi: float
    kind: str = "continuous"

    def __post_init__(self):
        if self.kind not in ("continuous", "integer"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if not self.lo <= self.hi:
            raise ValueError(f"domain lo={self.lo} exceeds hi={self.hi}")
        if self.kind == "integer" and (self.lo != int(self.lo) or self.hi != int(self.hi)):
            raise ValueError("integer-lattice domains need integer bounds")
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))

    @property
    def is_lattice(self) -> bool:
        return self.kind == "integer"

    @property
    def lattice(self) -> tuple[float, ...]:
        if not self.is_lattice:
            raise ValueError("continuous domain has no lattice")
        return tuple(float(v) for v in range(int(self.lo), int(self.hi) + 1))

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    def contains(self, v: float) -> bool:
        if not self.lo <= v <= self.hi:
            return False
        return not self.is_lattice or float(v).is_integer()


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box ``[lo_1, hi_1] x ... x [lo_D, hi_D]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi):
            raise ValueError("box bounds have different lengths")
        for a, b in zip(lo, hi):
            if a > b:
                raise ValueError(f"malformed box: lo {a} > hi {b}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, point: Sequence[float]) -> bool:
        return all(a <= p <= b for a, p, b in zip(self.lo, point, self.hi))

    def contains_box(self, other: "Box") -> bool:
        return all(a <= c and d <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def intersect(self, other: "Box") -> "Box | None":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if any(a > b for a, b in zip(lo, hi)):
            return None
        return Box(lo, hi)

    @property
    def center(self) -> tuple[float, ...]:
        return tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))


@dataclass(frozen=True, order=True)
class AgentType:
    """A true or reported type ``(x, z)``."""

    x: tuple[float, ...]
    z: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "z", tuple(float(v) for v in self.z))

    @property
    def vector(self) -> tuple[float, ...]:
        return self.x + self.z

    def with_z(self, z: Sequence[float]) -> "AgentType":
        return AgentType(self.x, tuple(z))

    @classmethod
    def from_vector(cls, v: Sequence[float], d: int) -> "AgentType":
        v = tuple(v)
        return cls(v[:d], v[d:])

    def __repr__(self):
        fmt = lambda t: ", ".join(f"{v:g}" for v in t)
        return f"AgentType(x=({fmt(self.x)}), z=({fmt(self.z)}))"


@dataclass(frozen=True)
class TypeSpace:
    known: tuple[FeatureDomain, ...]
    self_reported: tuple[FeatureDomain, ...]

    def __post_init__(self):
        object.__setattr__(self, "known", tuple(self.known))
        object.__setattr__(self, "self_reported", tuple(self.self_reported))
        if len(self.self_reported) < 1:
            raise ValueError("a type space needs at least one self-reported feature")

    @property
    def d(self) -> int:
        return len(self.known)

    @property
    def s(self) -> int:
        return len(self.self_reported)

    @property
    def dim(self) -> int:
        return self.d + self.s

    @property
    def domains(self) -> tuple[FeatureDomain, ...]:
        return self.known + self.self_reported

    @property
    def bounds(self) -> Box:
        return Box(tuple(dm.lo for dm in self.domains), tuple(dm.hi for dm in self.domains))

    @property
    def is_enumerable(self) -> bool:
        return all(dm.is_lattice for dm in self.domains)

    @property
    def lattice_size(self) -> int:
        if not self.is_enumerable:
            raise ValueError("non-enumerable space")
        return math.prod(len(dm.lattice) for dm in self.domains)

    def contains(self, a: AgentType) -> bool:
        return (
            len(a.x) == self.d
            and len(a.z) == self.s
            and all(dm.contains(v) for dm, v in zip(self.domains, a.vector))
        )

    def check(self, a: AgentType) -> None:
        if len(a.x) != self.d or len(a.z) != self.s:
            raise ValueError(
                f"dimension mismatch: type has ({len(a.x)}, {len(a.z)}), space has ({self.d}, {self.s})"
            )

    def z_lattice(self) -> list[tuple[float, ...]]:
        """All self-reported parts of an enumerable space, lexicographic."""
        doms = self.self_reported
        if not all(dm.is_lattice for dm in doms):
            raise ValueError("non-enumerable space")
        return list(itertools.product(*(dm.lattice for dm in doms)))


# --------------------------------------------------------------------------
# one-dimensional marginals


class Marginal:
    """Distribution of one coordinate, restricted to its domain."""

    discrete = False
    cdf_error = 0.0

    def interval(self, a: float, b: float) -> float:
        """P(a <= X <= b)."""
        raise NotImplementedError

    def pdf(self, v: float) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class UniformMarginal(Marginal):
    lo: float
    hi: float

    uniform = True

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("uniform marginal needs lo < hi")

    def interval(self, a, b):
        a, b = max(a, self.lo), min(b, self.hi)
        return 0.0 if a >= b else (b - a) / (self.hi - self.lo)

    def pdf(self, v):
        return 1.0 / (self.hi - self.lo) if self.lo <= v <= self.hi else 0.0

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class ScipyMarginal(Marginal):
    """A truncated scipy distribution on ``[lo, hi]``.

    ``cdf_error`` is the stated absolute error of the CDF routine; it is
    propagated into the error bound of every probability computed from it.
    """

    name: str
    params: tuple[tuple[str, float], ...]
    lo: float
    hi: float
    cdf_error: float = 0.0
    _dist: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"{self.name} marginal needs lo < hi")
        p = dict(self.params)
        if self.name == "truncnorm":
            mu, sigma = p["mu"], p["sigma"]
            if sigma <= 0:
                raise ValueError("sigma must be positive")
            dist = stats.truncnorm((self.lo - mu) / sigma, (self.hi - mu) / sigma, loc=mu, scale=sigma)
        elif self.name == "truncexpon":
            rate = p["rate"]
            if rate <= 0:
                raise ValueError("rate must be positive")
            dist = stats.truncexpon((self.hi - self.lo) * rate, loc=self.lo, scale=1.0 / rate)
        else:
            raise ValueError(f"unsupported marginal {self.name!r}")
        object.__setattr__(self, "_dist", dist)

    def interval(self, a, b):
        a, b = max(a, self.lo), min(b, self.hi)
        if a >= b:
            return 0.0
        if a == self.lo and b == self.hi:
            return 1.0
        return float(max(0.0, self._dist.cdf(b) - self._dist.cdf(a)))

    def pdf(self, v):
        return float(self._dist.pdf(v)) if self.lo <= v <= self.hi else 0.0

    def sample(self, rng, size):
        return np.asarray(self._dist.ppf(rng.uniform(0.0, 1.0, size)), dtype=float)


@dataclass(frozen=True)
class LatticeMarginal(Marginal):
    values: tuple[float, ...]
    probs: tuple[float, ...]

    discrete = True

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise ValueError("lattice marginal needs matching non-empty values/probs")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > MASS_TOLERANCE:
            raise ValueError("lattice marginal masses must be nonnegative and sum to 1")

    @classmethod
    def uniform(cls, domain: FeatureDomain) -> "LatticeMarginal":
        vals = domain.lattice
        return cls(vals, tuple(1.0 / len(vals) for _ in vals))

    def mass(self, v: float) -> float:
        for val, p in zip(self.values, self.probs):
            if val == v:
                return p
        return 0.0

    def interval(self, a, b):
        return math.fsum(p for v, p in zip(self.values, self.probs) if a <= v <= b)

    def pdf(self, v):
        return self.mass(v)

    def sample(self, rng, size):
        return rng.choice(np.asarray(self.values, dtype=float), size=size, p=np.asarray(self.probs))


# --------------------------------------------------------------------------
# prior


def _signed_intersections(boxes: Sequence[Box]) -> tuple[tuple[int, Box], ...]:
    """Inclusion-exclusion terms for the union of ``boxes``.

    Returns ``(sign, box)`` pairs with ``measure(union) = sum sign * measure(box)``.
    Subsets with an empty intersection are pruned along with their supersets.
    """
    out: list[tuple[int, Box]] = []

    def walk(start: int, current: Box | None, size: int):
        for i in range(start, len(boxes)):
            inter = boxes[i] if current is None else current.intersect(boxes[i])
            if inter is None:
                continue
            out.append((1 if (size + 1) % 2 else -1, inter))
            walk(i + 1, inter, size + 1)

    walk(0, None, 0)
    return tuple(out)


@dataclass(frozen=True)
class Prior:
    """Common prior ``D`` over agent types.

    ``kind`` is ``"discrete-table"`` (explicit mass table over a lattice
    space), ``"uniform-box"`` (uniform on every coordinate) or ``"product"``
    (independent per-coordinate marginals).  ``zero_boxes`` mark closed
    regions of zero density; box-based priors are renormalized over the
    remaining support.
    """

    space: TypeSpace
    kind: str
    table: tuple[tuple[AgentType, float], ...] = ()
    marginals: tuple[Marginal, ...] = ()
    zero_boxes: tuple[Box, ...] = ()
    _masses: dict = field(default=None, compare=False, repr=False)
    _signed: tuple = field(default=(), compare=False, repr=False)
    _support_mass: float = field(default=1.0, compare=False, repr=False)

    def __post_init__(self):
        zb = tuple(self.zero_boxes)
        object.__setattr__(self, "zero_boxes", zb)
        if len(zb) > MAX_ZERO_BOXES:
            raise ValueError(f"at most {MAX_ZERO_BOXES} zero boxes are supported, got {len(zb)}")
        for b in zb:
            if b.dim != self.space.dim:
                raise ValueError("zero box dimension does not match the type space")
        if self.kind == "discrete-table":
            self._init_table()
        elif self.kind in ("uniform-box", "product"):
            self._init_product()
        else:
            raise ValueError(f"unknown prior kind {self.kind!r}")

    def _init_table(self):
        if not self.space.is_enumerable:
            raise ValueError("discrete-table priors need an integer-lattice space")
        masses: dict[AgentType, float] = {}
        for a, p in self.table:
            self.space.check(a)
            if not self.space.contains(a):
                raise ValueError(f"{a} lies outside the type space")
            if p < 0:
                raise ValueError("negative probability in prior table")
            if p > 0 and any(b.contains(a.vector) for b in self.zero_boxes):
                raise ValueError(f"{a} has positive mass inside a zero box")
            masses[a] = masses.get(a, 0.0) + float(p)
        total = math.fsum(masses.values())
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"prior table sums to {total}, expected 1")
        object.__setattr__(self, "_masses", masses)

    def _init_product(self):
        doms = self.space.domains
        if self.kind == "uniform-box":
            margs = tuple(
                LatticeMarginal.uniform(dm) if dm.is_lattice
                else (UniformMarginal(dm.lo, dm.hi) if not dm.degenerate else LatticeMarginal((dm.lo,), (1.0,)))
                for dm in doms
            )
            object.__setattr__(self, "marginals", margs)
        if len(self.marginals) != len(doms):
            raise ValueError("need one marginal per coordinate")
        for dm, m in zip(doms, self.marginals):
            if dm.is_lattice != m.discrete and not dm.degenerate:
                raise ValueError("marginal kind does not match its domain kind")
        signed = _signed_intersections(self.zero_boxes)
        object.__setattr__(self, "_signed", signed)
        zero = math.fsum(sign * self._base_box_mass(b) for sign, b in signed)
        support = 1.0 - zero
        if support <= MASS_TOLERANCE:
            raise ValueError("zero boxes cover the whole type space")
        object.__setattr__(self, "_support_mass", support)

    # -- factories ---------------------------------------------------------

    @classmethod
    def discrete_table(cls, space, table: Mapping[AgentType, float] | Iterable, zero_boxes=()) -> "Prior":
        items = table.items() if isinstance(table, Mapping) else table
        return cls(space, "discrete-table", table=tuple(items), zero_boxes=tuple(zero_boxes))

    @classmethod
    def uniform_box(cls, space, zero_boxes=()) -> "Prior":
        return cls(space, "uniform-box", zero_boxes=tuple(zero_boxes))

    @classmethod
    def product(cls, space, marginals, zero_boxes=()) -> "Prior":
        return cls(space, "product", marginals=tuple(marginals), zero_boxes=tuple(zero_boxes))

    # -- basic queries -----------------------------------------------------

    @property
    def is_table(self) -> bool:
        return self.kind == "discrete-table"

    @property
    def is_enumerable(self) -> bool:
        return self.space.is_enumerable

    @property
    def support_mass(self) -> float:
        """Base-measure mass outside the zero boxes (the renormalizer)."""
        return self._support_mass

    @property
    def cdf_error(self) -> float:
        return math.fsum(m.cdf_error for m in self.marginals)

    def in_zero_box(self, point: Sequence[float]) -> bool:
        return any(b.contains(point) for b in self.zero_boxes)

    def _base_box_mass(self, box: Box) -> float:
        return math.prod(m.interval(a, b) for m, a, b in zip(self.marginals, box.lo, box.hi))

    def base_region_mass(self, box: Box, halfspaces=()) -> tuple[float, float]:
        """Unnormalized product-measure mass of ``box`` cut by ``halfspaces``.

        Zero boxes are ignored here.  Returns ``(mass, abserr)``.
        """
        return geometry.product_region_mass(self.marginals, box, halfspaces)

    def region_mass(self, box: Box, halfspaces=()) -> tuple[float, float]:
        """P(a in box and a satisfies every halfspace), with its abs. error."""
        if box.dim != self.space.dim:
            raise ValueError("box dimension does not match the type space")
        if self.is_table:
            total = math.fsum(
                p for a, p in self._masses.items()
                if box.contains(a.vector) and all(h.satisfied(a.vector) for h in halfspaces)
            )
            return total, 0.0
        mass, err = self.base_region_mass(box, halfspaces)
        for sign, zb in self._signed:
            inter = box.intersect(zb)
            if inter is None:
                continue
            m, e = self.base_region_mass(inter, halfspaces)
            mass -= sign * m
            err += e
        value = mass / self._support_mass
        return min(1.0, max(0.0, value)), err / self._support_mass


def density(prior: Prior, a: AgentType) -> float:
    """Density (or mass, on lattice coordinates) of type ``a`` under ``prior``."""
    prior.space.check(a)
    if not prior.space.contains(a):
        return 0.0
    if prior.in_zero_box(a.vector):
        return 0.0
    if prior.is_table:
        return prior._masses.get(a, 0.0)
    return math.prod(m.pdf(v) for m, v in zip(prior.marginals, a.vector)) / prior.support_mass


def interval_probability(prior: Prior, box: Box) -> float:
    """P(a in box) under ``prior``."""
    return prior.region_mass(box)[0]


def sample_array(prior: Prior, count: int, seed: int | np.random.SeedSequence,
                 max_retries: int = DEFAULT_REJECTION_RETRIES) -> np.ndarray:
    """``count`` i.i.d. draws as a ``(count, d + s)`` array."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    rng = np.random.default_rng(seed)
    dim = prior.space.dim
    if count == 0:
        return np.empty((0, dim))
    if prior.is_table:
        items = [(a, p) for a, p in sorted(prior._masses.items()) if p > 0]
        pts = np.array([a.vector for a, _ in items], dtype=float)
        probs = np.array([p for _, p in items])
        idx = rng.choice(len(items), size=count, p=probs / probs.sum())
        return pts[idx]
    out = np.empty((0, dim))
    need = count
    for _ in range(max_retries):
        draw = np.column_stack([m.sample(rng, need) for m in prior.marginals])
        if prior.zero_boxes:
            bad = np.zeros(len(draw), dtype=bool)
            for b in prior.zero_boxes:
                bad |= np.all((draw >= np.array(b.lo)) & (draw <= np.array(b.hi)), axis=1)
            draw = draw[~bad]
        out = np.vstack([out, draw])
        need = count - len(out)
        if need <= 0:
            return out[:count]
    raise RuntimeError("rejection sampling exceeded its retry cap")


def sample_types(prior: Prior, count: int, seed: int) -> list[AgentType]:
    """``count`` i.i.d. draws from ``prior``; deterministic given ``seed``."""
    d = prior.space.d
    return [AgentType.from_vector(row, d) for row in sample_array(prior, count, seed)]


def enumerate_types(space: TypeSpace, prior: Prior, cap: int = DEFAULT_ENUMERATION_CAP) -> list[AgentType]:
    """All supported types of a lattice space, in lexicographic order."""
    if not space.is_enumerable:
        raise ValueError("non-enumerable space")
    if space.lattice_size > cap:
        raise ValueError(f"lattice size {space.lattice_size} exceeds cap {cap}")
    out = []
    for v in itertools.product(*(dm.lattice for dm in space.domains)):
        a = AgentType.from_vector(v, space.d)
        if density(prior, a) > 0:
            out.append(a)
    return out
