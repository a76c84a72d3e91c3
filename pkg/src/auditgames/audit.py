"""Report classification, audit policies and single-round simulation."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from auditgames.allocation import rank_order, topk_membership
from auditgames.instance import InstanceSpec, negate
from auditgames.regions import min_oriented
from auditgames.scoring import LinearScore, PiecewiseLinearScore
from auditgames.typespace import AgentType, Prior, density

SURE_TRUTH = "sure-truth"
SURE_LIE = "sure-lie"
SUSPICIOUS = "suspicious"

BUDGET_SLACK = 1e-12


class ScoreAtomWarning(UserWarning):
    """Score comparison and allocation-probability comparison disagree."""


def _lattice_minimum(prior: Prior, f, x, sign: int):
    best = None
    axes = [dm.lattice if dm.is_lattice else (dm.lo,) for dm in prior.space.self_reported]
    for z in itertools.product(*axes):
        a = AgentType(x, z)
        if density(prior, a) <= 0:
            continue
        key = (sign * f(a), z)
        if best is None or key < best:
            best = key
    if best is None:
        raise ValueError(f"no supported self-report for known part {tuple(x)}")
    return best


LATTICE_SCAN_CAP = 1 << 12


def _minimum(prior: Prior, f, x, sign: int) -> tuple[float, tuple[float, ...]]:
    """Infimum of ``sign * f(x, .)`` over supported z, and its minimizer."""
    x = tuple(float(v) for v in x)
    if len(x) != prior.space.d:
        raise ValueError("dimension mismatch between known part and type space")
    z_doms = prior.space.self_reported
    if all(dm.is_lattice or dm.degenerate for dm in z_doms) and \
            math.prod(len(dm.lattice) if dm.is_lattice else 1 for dm in z_doms) <= LATTICE_SCAN_CAP:
        return _lattice_minimum(prior, f, x, sign)
    if isinstance(f, PiecewiseLinearScore):
        return min_oriented(prior, negate(f, sign), x)
    if not isinstance(f, LinearScore):
        raise ValueError(f"minimum type needs a linear or piecewise-linear score on continuous z, got {f.kind}")
    g = negate(LinearScore(f.w_x, f.w_z, f.bias), sign * f.monotone)
    _, z = min_oriented(prior, g, x)
    return sign * f(AgentType(x, z)), z


def minimum_type(prior: Prior, f, x: Sequence[float], direction: str = ">=") -> AgentType:
    """Supported report for known part ``x`` with the lowest allocation score.

    ``direction="<="`` means lower scores are allocated, so the returned type
    maximizes ``f`` instead.  Ties go to the lexicographically smallest z.
    """
    sign = 1 if direction == ">=" else -1
    _, z = _minimum(prior, f, x, sign)
    return AgentType(tuple(x), z)


def _min_allocation_score(instance: InstanceSpec, x) -> float:
    """Infimum of the oriented score over supported reports with known part x."""
    return _minimum(instance.prior, instance.score, x, instance.orientation())[0]


def classify_report(instance: InstanceSpec, report: AgentType) -> str:
    instance.space.check(report)
    if density(instance.prior, report) <= 0:
        return SURE_LIE
    f = instance.score
    sign = instance.orientation()
    low = _min_allocation_score(instance, report.x)
    if instance.is_threshold:
        rule = instance.allocation
        theta = sign * rule.theta
        return SUSPICIOUS if sign * f(report) >= theta and low < theta else SURE_TRUTH
    own = f(report)
    if own > low:
        if instance.prior.is_enumerable:
            from auditgames.allocation import prob_in_top_k

            if prob_in_top_k(instance, own) == prob_in_top_k(instance, low):
                warnings.warn(
                    f"report {report} outscores its minimum type but has the same top-k probability",
                    ScoreAtomWarning, stacklevel=2)
        return SUSPICIOUS
    return SURE_TRUTH


# -- policies ----------------------------------------------------------------


class _Classifier:
    """Per-instance memo of report classes (reports repeat across profiles)."""

    def __init__(self, instance: InstanceSpec):
        self.instance = instance
        self.memo: dict[AgentType, str] = {}

    def __call__(self, a: AgentType) -> str:
        tag = self.memo.get(a)
        if tag is None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ScoreAtomWarning)
                tag = classify_report(self.instance, a)
            self.memo[a] = tag
        return tag


def _classifier(instance: InstanceSpec) -> _Classifier:
    c = instance.__dict__.get("_classifier")
    if c is None:
        c = _Classifier(instance)
        object.__setattr__(instance, "_classifier", c)
    return c


def uniform_policy(instance: InstanceSpec, profile: Sequence[AgentType]) -> list[float]:
    if not instance.is_threshold:
        raise ValueError("UNIFORM is defined for threshold instances")
    tags = [_classifier(instance)(a) for a in profile]
    g = sum(t == SUSPICIOUS for t in tags)
    share = min(instance.B / g, 1.0) if g else 0.0
    return [1.0 if t == SURE_LIE else share if t == SUSPICIOUS else 0.0 for t in tags]


def uniform_k_policy(instance: InstanceSpec, profile: Sequence[AgentType], seed=None,
                     order: Sequence[int] | None = None) -> list[float]:
    if not instance.is_topk:
        raise ValueError("UNIFORM-K is defined for top-k instances")
    k = instance.allocation.k
    if order is None:
        order = rank_order([instance.score(a) for a in profile], instance.allocation.tie_rule, seed)
    share = min(1.0, instance.B / k)
    top = set(order[:k])
    out = []
    for i, a in enumerate(profile):
        if density(instance.prior, a) <= 0:
            out.append(1.0)
        else:
            out.append(share if i in top else 0.0)
    return out


@dataclass
class UniformPolicy:
    symmetric = True
    name = "uniform"

    def __call__(self, instance, profile, order=None):
        return uniform_policy(instance, profile)


@dataclass
class UniformKPolicy:
    seed: int | None = None
    symmetric = True
    name = "uniform-k"

    def __call__(self, instance, profile, order=None):
        return uniform_k_policy(instance, profile, self.seed, order)


@dataclass
class TablePolicy:
    """Explicit per-profile audit vectors, with ``fallback`` elsewhere."""

    table: dict = field(default_factory=dict)
    fallback: object = None
    symmetric = False
    name = "table"

    def __call__(self, instance, profile, order=None):
        key = tuple(profile)
        if key in self.table:
            return list(self.table[key])
        if self.fallback is None:
            raise KeyError(f"profile {key} missing from policy table")
        return self.fallback(instance, profile, order)


def check_budget(instance: InstanceSpec, profile, phi) -> None:
    """Raise unless ``phi`` is a feasible audit vector for ``profile``."""
    if any(not 0.0 <= p <= 1.0 for p in phi):
        raise ValueError("audit probabilities must lie in [0, 1]")
    spend = math.fsum(p for a, p in zip(profile, phi) if density(instance.prior, a) > 0)
    if spend > instance.B + BUDGET_SLACK:
        raise ValueError(f"audit vector spends {spend} over budget {instance.B}")


# -- simulation --------------------------------------------------------------


def systematic_sample(phi: Sequence[float], rng: np.random.Generator) -> list[bool]:
    """Dependent 0/1 draws with ``P(i drawn) = phi[i]`` and a realized count
    of ``floor(sum phi)`` or ``ceil(sum phi)``."""
    u = rng.random()
    out, acc = [], 0.0
    for p in phi:
        nxt = acc + p
        out.append(math.floor(nxt - u) > math.floor(acc - u))
        acc = nxt
    return out


@dataclass(frozen=True)
class RoundOutcome:
    audited: tuple[bool, ...]
    caught: tuple[bool, ...]
    allocated: tuple[bool, ...]
    utilities: tuple[float, ...]


def simulate_round(instance: InstanceSpec, true_types: Sequence[AgentType], reports: Sequence[AgentType],
                   policy, seed=None) -> RoundOutcome:
    n = instance.n
    if len(true_types) != n or len(reports) != n:
        raise ValueError(f"expected {n} true types and reports")
    for t, r in zip(true_types, reports):
        if t.x != r.x:
            raise ValueError("reports must keep the known part of the true type")
    ss = np.random.SeedSequence(seed)
    tie_seed, audit_seed = ss.spawn(2)
    scores = [instance.score(r) for r in reports]
    order = None
    if instance.is_topk:
        tie_int = int(tie_seed.generate_state(1)[0])
        order = rank_order(scores, instance.allocation.tie_rule, tie_int)
    phi = policy(instance, list(reports), order)
    audited = systematic_sample(phi, np.random.default_rng(audit_seed))
    caught = [a and t.z != r.z for a, t, r in zip(audited, true_types, reports)]
    if instance.is_threshold:
        allocated = [instance.passes(r) and not c for r, c in zip(reports, caught)]
    else:
        remaining = [i for i in order if not caught[i]]
        chosen = set(remaining[: instance.allocation.k])
        allocated = [i in chosen for i in range(n)]
    utilities = [float(a) * (1 - cg) - instance.c * cg for a, cg in zip(allocated, caught)]
    return RoundOutcome(tuple(audited), tuple(caught), tuple(allocated), tuple(utilities))


__all__ = [
    "SURE_TRUTH", "SURE_LIE", "SUSPICIOUS", "ScoreAtomWarning", "minimum_type", "classify_report",
    "uniform_policy", "uniform_k_policy", "UniformPolicy", "UniformKPolicy", "TablePolicy",
    "check_budget", "systematic_sample", "RoundOutcome", "simulate_round", "topk_membership",
]
