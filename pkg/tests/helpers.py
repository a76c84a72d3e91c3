"""Instance builders shared across the test modules."""

from __future__ import annotations

import itertools

import numpy as np

from auditgames import (
    AgentType,
    FeatureDomain,
    InstanceSpec,
    LinearScore,
    Prior,
    TableScore,
    ThresholdRule,
    TopKRule,
    TypeSpace,
)

UNIT = FeatureDomain(0.0, 1.0)
BIT = FeatureDomain(0, 1, "integer")


def unit_square() -> TypeSpace:
    return TypeSpace((UNIT,), (UNIT,))


def binary_space(d: int = 1, s: int = 1) -> TypeSpace:
    return TypeSpace((BIT,) * d, (BIT,) * s)


def binary_types(space: TypeSpace) -> list[AgentType]:
    return [AgentType.from_vector(v, space.d) for v in itertools.product((0.0, 1.0), repeat=space.dim)]


def x_plus_z(theta: float = 1.0, n: int = 2, B: float = 1, c: float = 0.0) -> InstanceSpec:
    space = unit_square()
    return InstanceSpec(space, Prior.uniform_box(space), LinearScore((1,), (1,)), ThresholdRule(theta), n, B, c)


def x_plus_z_topk(n: int = 3, k: int = 2, B: float = 1, c: float = 0.0, tie_rule: str = "worst-case") -> InstanceSpec:
    space = unit_square()
    return InstanceSpec(space, Prior.uniform_box(space), LinearScore((1,), (1,)), TopKRule(k, tie_rule), n, B, c)


def and_instance(n: int = 2, B: float = 1, c: float = 0.0, masses=None, allocation=None) -> InstanceSpec:
    """Binary (x, z), score x AND z, threshold 1/2 by default."""
    space = binary_space()
    types = binary_types(space)
    masses = masses or {a: 0.25 for a in types}
    f = TableScore({a: float(a.x[0] and a.z[0]) for a in types})
    return InstanceSpec(space, Prior.discrete_table(space, masses), f, allocation or ThresholdRule(0.5), n, B, c)


def random_table_prior(space: TypeSpace, rng: np.random.Generator, zero_prob: float = 0.2) -> Prior:
    """Random masses with some types forced to zero (at least one kept)."""
    types = binary_types(space)
    while True:
        w = rng.random(len(types)) * (rng.random(len(types)) >= zero_prob)
        if w.sum() > 0:
            break
    w = w / w.sum()
    return Prior.discrete_table(space, dict(zip(types, w.tolist())))


def random_binary_threshold(rng: np.random.Generator, max_n: int = 4, Bs=(1, 2), cs=(0.0, 0.5, 2.0)) -> InstanceSpec:
    """A random enumerable threshold instance over binary features, d + s <= 3."""
    while True:
        s = int(rng.integers(1, 3))
        d = int(rng.integers(0, 4 - s))
        space = binary_space(d, s)
        prior = random_table_prior(space, rng)
        types = binary_types(space)
        f = TableScore({a: float(rng.integers(0, 4)) for a in types})
        n = int(rng.integers(2, max_n + 1))
        B = float(rng.choice(Bs))
        c = float(rng.choice(cs))
        theta = float(rng.choice([0.5, 1.5, 2.5]))
        try:
            return InstanceSpec(space, prior, f, ThresholdRule(theta), n, B, c)
        except ValueError:
            continue


def random_binary_topk(rng: np.random.Generator, tie_rule: str = "worst-case") -> InstanceSpec:
    while True:
        s = int(rng.integers(1, 3))
        d = int(rng.integers(0, 4 - s))
        space = binary_space(d, s)
        prior = random_table_prior(space, rng)
        types = binary_types(space)
        f = TableScore({a: float(rng.integers(0, 3)) for a in types})
        n = int(rng.integers(2, 4))
        k = int(rng.integers(1, n + 1))
        B = float(rng.choice([0.5, 1.0, 2.0]))
        c = float(rng.choice([0.0, 0.5]))
        try:
            return InstanceSpec(space, prior, f, TopKRule(k, tie_rule), n, B, c)
        except ValueError:
            continue
