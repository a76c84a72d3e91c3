"""JSON run configuration: schema, validation and instance construction."""

from __future__ import annotations

import hashlib
import json
import math
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from auditgames.allocation import TIE_RULES, ThresholdRule, TopKRule
from auditgames.instance import InstanceSpec
from auditgames.scoring import LinearScore, LogisticScore, PiecewiseLinearScore, TableScore
from auditgames.typespace import (
    AgentType,
    Box,
    FeatureDomain,
    LatticeMarginal,
    Prior,
    ScipyMarginal,
    TypeSpace,
    UniformMarginal,
)

SCHEMA = "auditgames/1"
DEFAULT_SWEEP_CAP = 10_000


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DomainCfg(_Model):
    lo: float
    hi: float
    kind: Literal["continuous", "integer"] = "continuous"


class SpaceCfg(_Model):
    known: list[DomainCfg] = []
    self_reported: list[DomainCfg] = Field(min_length=1)


class TypeCfg(_Model):
    x: list[float] = []
    z: list[float]

    def build(self) -> AgentType:
        return AgentType(tuple(self.x), tuple(self.z))


class MassCfg(TypeCfg):
    p: float = Field(ge=0)


class ValueCfg(TypeCfg):
    value: float


class BoxCfg(_Model):
    lo: list[float]
    hi: list[float]

    def build(self) -> Box:
        return Box(tuple(self.lo), tuple(self.hi))


class MarginalCfg(_Model):
    kind: Literal["uniform", "truncnorm", "truncexpon", "lattice"]
    mu: float | None = None
    sigma: float | None = None
    rate: float | None = None
    values: list[float] | None = None
    probs: list[float] | None = None
    cdf_error: float = Field(default=0.0, ge=0)


class PriorCfg(_Model):
    kind: Literal["uniform-box", "discrete-table", "product"]
    table: list[MassCfg] = []
    marginals: list[MarginalCfg] = []
    zero_boxes: list[BoxCfg] = []


class LinearCfg(_Model):
    kind: Literal["linear", "logistic"]
    w_x: list[float] = []
    w_z: list[float]
    bias: float = 0.0


class CellCfg(BoxCfg):
    w_x: list[float] = []
    w_z: list[float]
    bias: float = 0.0


class PiecewiseCfg(_Model):
    kind: Literal["piecewise-linear"]
    cells: list[CellCfg] = Field(min_length=1)


class TableScoreCfg(_Model):
    kind: Literal["table"]
    values: list[ValueCfg] = Field(min_length=1)


ScoreCfg = Annotated[Union[LinearCfg, PiecewiseCfg, TableScoreCfg], Field(discriminator="kind")]


class ThresholdCfg(_Model):
    kind: Literal["threshold"]
    theta: float | Literal["all"]
    direction: Literal[">=", "<="] = ">="


class TopKCfg(_Model):
    kind: Literal["top-k"]
    k: int = Field(ge=1)
    tie_rule: Literal["worst-case", "uniform-random", "best-case"] = "worst-case"


AllocationCfg = Annotated[Union[ThresholdCfg, TopKCfg], Field(discriminator="kind")]


class RangeCfg(_Model):
    start: float
    stop: float
    step: float = Field(gt=0)

    def values(self) -> list[float]:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [self.start + i * self.step for i in range(max(0, count))]


class SweepCfg(_Model):
    command: Literal["epsilon-exact", "epsilon-mc", "epsilon-topk", "epsilon-dsic", "epsilon-oracle"] = "epsilon-exact"
    grid: dict[Literal["n", "B", "c", "theta", "k"], RangeCfg]
    cap: int = Field(default=DEFAULT_SWEEP_CAP, ge=1)


class ParamsCfg(_Model):
    samples: int | None = Field(default=None, ge=1)
    seed: int | None = Field(default=None, ge=0, lt=2**64)
    trials: int | None = Field(default=None, ge=1)
    delta: float | None = Field(default=None, gt=0, lt=1)
    magnitude: float = Field(default=0.5, gt=0, le=1)
    gamma: float = Field(default=0.0, ge=0)
    policy: Literal["uniform", "skewed"] = "uniform"
    reports: list[TypeCfg] = []
    true_types: list[TypeCfg] = []


class RunConfig(_Model):
    schema_: Literal["auditgames/1"] = Field(default=SCHEMA, alias="schema")
    space: SpaceCfg
    prior: PriorCfg
    score: ScoreCfg
    allocation: AllocationCfg
    n: int = Field(ge=1)
    B: float = Field(ge=0)
    c: float = Field(ge=0)
    params: ParamsCfg = ParamsCfg()
    sweep: SweepCfg | None = None

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @field_validator("B", "c")
    @classmethod
    def _finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v

    @model_validator(mode="after")
    def _instance_valid(self):
        self.build()
        return self

    # -- construction --------------------------------------------------------

    def build_space(self) -> TypeSpace:
        return TypeSpace(tuple(FeatureDomain(d.lo, d.hi, d.kind) for d in self.space.known),
                         tuple(FeatureDomain(d.lo, d.hi, d.kind) for d in self.space.self_reported))

    def build_prior(self, space: TypeSpace) -> Prior:
        p = self.prior
        zero = tuple(b.build() for b in p.zero_boxes)
        if p.kind == "uniform-box":
            return Prior.uniform_box(space, zero)
        if p.kind == "discrete-table":
            return Prior.discrete_table(space, [(m.build(), m.p) for m in p.table], zero)
        margs = []
        for dom, m in zip(space.domains, p.marginals):
            if m.kind == "uniform":
                margs.append(UniformMarginal(dom.lo, dom.hi))
            elif m.kind == "lattice":
                if m.values is None or m.probs is None:
                    raise ValueError("lattice marginals need values and probs")
                margs.append(LatticeMarginal(tuple(m.values), tuple(m.probs)))
            elif m.kind == "truncnorm":
                margs.append(ScipyMarginal("truncnorm", (("mu", m.mu), ("sigma", m.sigma)), dom.lo, dom.hi, m.cdf_error))
            else:
                margs.append(ScipyMarginal("truncexpon", (("rate", m.rate),), dom.lo, dom.hi, m.cdf_error))
        return Prior.product(space, margs, zero)

    def build_score(self):
        s = self.score
        if isinstance(s, LinearCfg):
            cls = LinearScore if s.kind == "linear" else LogisticScore
            return cls(tuple(s.w_x), tuple(s.w_z), s.bias)
        if isinstance(s, PiecewiseCfg):
            return PiecewiseLinearScore(tuple((c.build(), LinearScore(tuple(c.w_x), tuple(c.w_z), c.bias))
                                              for c in s.cells))
        return TableScore(tuple((v.build(), v.value) for v in s.values))

    def build_allocation(self):
        a = self.allocation
        if isinstance(a, ThresholdCfg):
            return ThresholdRule(-math.inf if a.theta == "all" else a.theta, a.direction)
        return TopKRule(a.k, a.tie_rule)

    def build(self, **overrides) -> InstanceSpec:
        """The validated instance, with optional ``n``/``B``/``c``/``theta``/``k`` overrides."""
        space = self.build_space()
        alloc = self.build_allocation()
        if "theta" in overrides:
            if not isinstance(alloc, ThresholdRule):
                raise ValueError("theta sweeps need a threshold allocation")
            alloc = ThresholdRule(overrides["theta"], alloc.direction)
        if "k" in overrides:
            if not isinstance(alloc, TopKRule):
                raise ValueError("k sweeps need a top-k allocation")
            alloc = TopKRule(int(overrides["k"]), alloc.tie_rule)
        return InstanceSpec(
            space, self.build_prior(space), self.build_score(), alloc,
            int(overrides.get("n", self.n)), float(overrides.get("B", self.B)), float(overrides.get("c", self.c)),
        )


def _canonical(v):
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            return repr(v)
        return format(v, ".17g")
    if isinstance(v, dict):
        return {k: _canonical(v[k]) for k in sorted(v)}
    if isinstance(v, list):
        return [_canonical(u) for u in v]
    return v


def canonical_json(cfg: RunConfig) -> str:
    """Sorted keys, floats at 17 significant digits; run parameters excluded."""
    data = cfg.model_dump(by_alias=True, exclude={"params", "sweep"})
    return json.dumps(_canonical(data), sort_keys=True, separators=(",", ":"))


def fingerprint(cfg: RunConfig) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return RunConfig.model_validate(json.load(fh))


__all__ = ["SCHEMA", "RunConfig", "load_config", "canonical_json", "fingerprint", "TIE_RULES"]
