"""Command-line runner: ``auditgames <command> --config run.json``.

Exit status 0 on success, 1 on a computation error (a JSON error object is
written to stderr) and 2 when the configuration does not validate.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from concurrent.futures import ThreadPoolExecutor

from pydantic import ValidationError

from auditgames.audit import UniformKPolicy, UniformPolicy, classify_report, simulate_round
from auditgames.config import RunConfig, fingerprint, load_config
from auditgames.oracle import oracle_dsic_epsilon, oracle_epsilon, perturbation_optimality_check, skewed_policy
from auditgames.typespace import sample_types
from auditgames.verification import (
    DEFAULT_DELTA,
    epsilon_dsic_topk,
    epsilon_exact_threshold,
    epsilon_mc_threshold,
    epsilon_uniform_k,
    needs_audit,
    worker_count,
)

COMMANDS = ("classify", "epsilon-exact", "epsilon-mc", "epsilon-topk", "epsilon-dsic", "epsilon-oracle",
            "optimality-check", "simulate", "sweep", "needs-audit")
DEFAULT_SAMPLES = 100_000
DEFAULT_TRIALS = 500


class ConfigError(Exception):
    pass


def _settings(cfg: RunConfig, args) -> dict:
    p = cfg.params
    pick = lambda flag, value, default: flag if flag is not None else (value if value is not None else default)  # noqa: E731
    return {
        "samples": pick(args.samples, p.samples, DEFAULT_SAMPLES),
        "seed": pick(args.seed, p.seed, 0),
        "trials": pick(args.trials, p.trials, DEFAULT_TRIALS),
        "delta": pick(args.delta, p.delta, DEFAULT_DELTA),
    }


def _policy(cfg: RunConfig, instance, seed=None):
    if instance.is_topk:
        return UniformKPolicy(seed)
    return skewed_policy(instance) if cfg.params.policy == "skewed" else UniformPolicy()


def _epsilon(command: str, cfg: RunConfig, instance, opts: dict) -> dict:
    if command == "epsilon-exact":
        est = epsilon_exact_threshold(instance, gamma=cfg.params.gamma)
    elif command == "epsilon-mc":
        est = epsilon_mc_threshold(instance, opts["samples"], opts["seed"], opts["delta"])
    elif command == "epsilon-topk":
        est = epsilon_uniform_k(instance)
    elif command == "epsilon-dsic":
        est = epsilon_dsic_topk(instance)
    else:
        policy = _policy(cfg, instance, opts["seed"])
        est = oracle_epsilon(instance, policy)
        out = est.to_dict()
        out["policy"] = getattr(policy, "name", "table") if cfg.params.policy == "uniform" else "skewed"
        out["dsic_epsilon"] = oracle_dsic_epsilon(instance, policy).epsilon if instance.is_topk else None
        return {k: v for k, v in out.items() if v is not None}
    return est.to_dict()


def _type_dict(a) -> dict:
    return {"x": list(a.x), "z": list(a.z)}


def _run(command: str, cfg: RunConfig, args) -> tuple[dict | list, str | None]:
    opts = _settings(cfg, args)
    instance = cfg.build()
    if command.startswith("epsilon-"):
        return _epsilon(command, cfg, instance, opts), None
    if command == "needs-audit":
        return {"needs_audit": needs_audit(instance.score, instance.space, instance.prior)}, None
    if command == "classify":
        reports = [r.build() for r in cfg.params.reports]
        if not reports:
            if not instance.space.is_enumerable:
                raise ValueError("classify needs params.reports on a continuous space")
            reports = instance.support
        return {"reports": [dict(_type_dict(r), **{"class": classify_report(instance, r)}) for r in reports]}, None
    if command == "optimality-check":
        res = perturbation_optimality_check(instance, _policy(cfg, instance), opts["trials"],
                                            cfg.params.magnitude, opts["seed"])
        res.update(epsilon=res["baseline_epsilon"], raw_max_gain=res["baseline_epsilon"], method="oracle")
        return res, None
    if command == "simulate":
        truth = [t.build() for t in cfg.params.true_types]
        if not truth:
            truth = sample_types(instance.prior, instance.n, opts["seed"])
        reports = [r.build() for r in cfg.params.reports] or list(truth)
        out = simulate_round(instance, truth, reports, _policy(cfg, instance, opts["seed"]), opts["seed"])
        return {
            "seed": opts["seed"],
            "true_types": [_type_dict(t) for t in truth],
            "reports": [_type_dict(r) for r in reports],
            "audited": list(out.audited),
            "caught": list(out.caught),
            "allocated": list(out.allocated),
            "utilities": list(out.utilities),
        }, None
    if command == "sweep":
        return _sweep(cfg, opts), "csv"
    raise ValueError(f"unknown command {command!r}")


def _sweep(cfg: RunConfig, opts: dict) -> list[dict]:
    if cfg.sweep is None:
        raise ConfigError("sweep needs a 'sweep' section in the config")
    keys = sorted(cfg.sweep.grid)
    axes = [cfg.sweep.grid[k].values() for k in keys]
    total = 1
    for a in axes:
        total *= len(a)
    if total > cfg.sweep.cap:
        raise ConfigError(f"sweep grid has {total} points, above the cap {cfg.sweep.cap}")
    points = [dict(zip(keys, combo)) for combo in itertools.product(*axes)]

    def one(point):
        try:
            inst = cfg.build(**point)
        except ValueError as exc:
            return dict(point, error=str(exc))
        est = _epsilon(cfg.sweep.command, cfg, inst, opts)
        return dict(point, **{k: est.get(k) for k in ("epsilon", "raw_max_gain", "method", "error_bound", "p_U")})

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        return list(pool.map(one, points))


def _render(result, fmt: str) -> str:
    if fmt == "csv":
        rows = result if isinstance(result, list) else [result]
        cols: list[str] = []
        for r in rows:
            cols.extend(k for k in r if k not in cols)
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: ("" if r.get(k) is None else json.dumps(r[k]) if isinstance(r.get(k), (list, dict)) else r.get(k))
                             for k in cols})
        return buf.getvalue()
    return json.dumps(result, sort_keys=True, indent=2) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="auditgames", description="Verify and simulate audit policies.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="path to a JSON run configuration")
    p.add_argument("--out", help="write the result here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), help="output format (sweep defaults to csv)")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--delta", type=float)
    return p


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")
    return code


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(2, "config", str(exc))
    except ValidationError as exc:
        return _fail(2, "config", str(exc))
    if args.seed is not None and not 0 <= args.seed < 2**64:
        return _fail(2, "config", "seed must be a 64-bit unsigned integer")
    try:
        result, natural = _run(args.command, cfg, args)
    except ConfigError as exc:
        return _fail(2, "config", str(exc))
    except (ValueError, KeyError, RuntimeError, ArithmeticError) as exc:
        return _fail(1, "computation", str(exc))
    if isinstance(result, dict):
        result["fingerprint"] = fingerprint(cfg)
    else:
        fp = fingerprint(cfg)
        result = [dict(r, fingerprint=fp) for r in result]
    text = _render(result, args.format or natural or "json")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
