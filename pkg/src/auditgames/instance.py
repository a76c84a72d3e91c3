"""A complete game instance: type space, prior, scorer, allocation, (n, B, c)."""

from __future__ import annotations

import math
from dataclasses import dataclass

from auditgames.allocation import AllocationRule, ThresholdRule, TopKRule
from auditgames.scoring import (
    LinearScore,
    LogisticScore,
    PiecewiseLinearScore,
    ScoreFunction,
    TableScore,
    logistic_to_linear,
)
from auditgames.typespace import AgentType, Prior, TypeSpace, enumerate_types


@dataclass(frozen=True)
class InstanceSpec:
    space: TypeSpace
    prior: Prior
    score: ScoreFunction
    allocation: AllocationRule
    n: int
    B: float
    c: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        if not self.B >= 0 or math.isinf(self.B):
            raise ValueError("budget B must be a finite nonnegative number")
        if not self.c >= 0 or math.isinf(self.c):
            raise ValueError("fine c must be a finite nonnegative number")
        if self.prior.space != self.space:
            raise ValueError("prior is defined over a different type space")
        if isinstance(self.allocation, TopKRule) and self.allocation.k > self.n:
            raise ValueError(f"k={self.allocation.k} exceeds n={self.n}")
        f = self.score
        if isinstance(f, LinearScore):
            if len(f.w_x) != self.space.d or len(f.w_z) != self.space.s:
                raise ValueError("score weights do not match the type space dimensions")
        elif isinstance(f, PiecewiseLinearScore):
            f.validate(self.space)
        elif isinstance(f, TableScore):
            if not self.space.is_enumerable:
                raise ValueError("table scores need an enumerable type space")
            if not f.covers(self.support):
                raise ValueError("score table does not cover every supported type")

    @property
    def is_threshold(self) -> bool:
        return isinstance(self.allocation, ThresholdRule)

    @property
    def is_topk(self) -> bool:
        return isinstance(self.allocation, TopKRule)

    @property
    def support(self) -> list[AgentType]:
        cached = self.__dict__.get("_support")
        if cached is None:
            cached = enumerate_types(self.space, self.prior)
            object.__setattr__(self, "_support", cached)
        return cached

    def passes(self, a: AgentType) -> bool:
        """Whether report ``a`` clears the threshold."""
        if not self.is_threshold:
            raise ValueError("passes() is defined for threshold instances")
        return self.allocation.passes(self.score(a))

    def orientation(self) -> int:
        """+1 when larger scores help an agent, -1 otherwise."""
        if self.is_threshold and self.allocation.direction == "<=":
            return -1
        return 1

    def oriented_linear(self):
        """``(g, theta)`` with ``g`` linear (or piecewise linear) such that a
        report is allocated iff ``g(a) >= theta``.

        Logistic scorers pass through :func:`logistic_to_linear`.
        """
        if not self.is_threshold:
            raise ValueError("oriented_linear() is defined for threshold instances")
        rule, f = self.allocation, self.score
        if isinstance(f, LogisticScore):
            if not 0.0 < rule.theta < 1.0:
                raise ValueError("logistic thresholds must lie in (0, 1)")
            red = logistic_to_linear(f, rule.theta)
            sign = -1 if rule.direction == ">=" else 1
            return negate(red.score, sign), sign * red.theta
        if isinstance(f, (LinearScore, PiecewiseLinearScore)):
            sign = 1 if rule.direction == ">=" else -1
            return negate(f, sign), sign * rule.theta
        raise ValueError(f"no linear form for {f.kind} scores")


def negate(f, sign: int):
    """``sign * f`` for linear and piecewise-linear scorers."""
    if sign == 1:
        return f
    if isinstance(f, PiecewiseLinearScore):
        return PiecewiseLinearScore(tuple((box, negate(part, -1)) for box, part in f.cells))
    return LinearScore(tuple(-w for w in f.w_x), tuple(-w for w in f.w_z), -f.bias)
