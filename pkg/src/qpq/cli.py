"""Command-line scenario runner.

    qpq run config.yaml [--out report.json] [--format json|csv] [--timing]
    qpq bounds EPS M D [D ...]
    qpq selftest

Exit codes: 0 every applicable comparison holds, 1 a bound is violated,
2 the configuration is invalid, 3 the Hilbert space would exceed the guard.
"""
import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .attacks import data_privacy_violation, purified_database_attack, sequential_extraction_attack
from .bounds import (
    IMPOSSIBILITY_THRESHOLD,
    bound_table,
    extraction_success_bound,
    impossibility_verdict,
    step_failure_bound,
)
from .hilbert import MAX_DIM, DimensionError
from .protocol import DatabaseSpec, SpecError, estimate_correctness, honest_run, user_privacy_gap
from .suite import run_all

SCENARIOS = ("honest", "specific-attack", "generic-attack", "bounds-sweep", "lemma-suite")
FORMAT_VERSION = 1
SLACK = 1e-8

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_DIMENSION = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    n: Optional[int] = None
    multiplicities: Optional[tuple] = None
    mode: str = "purified"
    entries: Optional[tuple] = None
    i: int = 1
    j: Optional[int] = None
    m: Optional[int] = None
    p: float = 0.0
    r: int = 1
    out: Optional[str] = None
    format: int = FORMAT_VERSION
    eps_max: float = 2 * IMPOSSIBILITY_THRESHOLD
    points: int = 1001

    def database(self):
        return DatabaseSpec.from_multiplicities(self.multiplicities, mode=self.mode, entries=self.entries)


_INT_FIELDS = ("n", "i", "j", "m", "r", "format", "points")
_FLOAT_FIELDS = ("p", "eps_max")
_NEEDS_DATABASE = ("honest", "specific-attack", "generic-attack")


def _field_error(name, message):
    return ConfigError(f"field {name!r}: {message}")


def _as_int(name, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise _field_error(name, f"expected an integer, got {value!r}")
    return value


def parse_config(data):
    """Validate a mapping and fill defaults."""
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown field(s) {unknown}; valid fields are {sorted(known)}")
    if "scenario" not in data:
        raise _field_error("scenario", f"missing; choose one of {list(SCENARIOS)}")
    if data["scenario"] not in SCENARIOS:
        raise _field_error("scenario", f"unknown scenario {data['scenario']!r}; choose one of {list(SCENARIOS)}")
    vals = dict(data)
    for name in _INT_FIELDS:
        if vals.get(name) is not None:
            vals[name] = _as_int(name, vals[name])
    for name in _FLOAT_FIELDS:
        if vals.get(name) is not None:
            v = vals[name]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise _field_error(name, f"expected a number, got {v!r}")
            vals[name] = float(v)
    for name in ("multiplicities", "entries"):
        if vals.get(name) is not None:
            if not isinstance(vals[name], list):
                raise _field_error(name, "expected a list")
            vals[name] = tuple(_as_int(f"{name}[{k}]", v) for k, v in enumerate(vals[name]))
    cfg = ScenarioConfig(**vals)

    if cfg.format != FORMAT_VERSION:
        raise _field_error("format", f"unsupported version {cfg.format}; this tool writes {FORMAT_VERSION}")
    mults = cfg.multiplicities
    if mults is None and cfg.scenario == "bounds-sweep":
        mults = (2,) * (cfg.n or 2)
    if mults is not None:
        if any(k < 1 for k in mults):
            raise _field_error("multiplicities", "every multiplicity must be at least 1")
        if cfg.n is None:
            cfg = _replace(cfg, n=len(mults))
        elif cfg.n != len(mults):
            raise _field_error("multiplicities", f"has {len(mults)} entries but n = {cfg.n}")
        cfg = _replace(cfg, multiplicities=mults)
    if cfg.scenario in _NEEDS_DATABASE:
        if mults is None:
            raise _field_error("multiplicities", f"required by scenario {cfg.scenario!r}")
        try:
            cfg.database()
        except SpecError as exc:
            raise _field_error("mode" if "mode" in str(exc) else "entries", str(exc)) from None
        _check_query("i", cfg.i, cfg.n)
    if not 0.0 <= cfg.p <= 1.0:
        raise _field_error("p", "noise parameter must lie in [0, 1]")
    if cfg.r < 1:
        raise _field_error("r", "need at least one repetition")
    if cfg.scenario == "specific-attack":
        j = cfg.j if cfg.j is not None else (2 if cfg.i != 2 else 1)
        _check_query("j", j, cfg.n)
        if j == cfg.i:
            raise _field_error("j", "must differ from i")
        cfg = _replace(cfg, j=j)
    if cfg.scenario in ("generic-attack", "bounds-sweep"):
        m = cfg.m if cfg.m is not None else cfg.n
        if m is None or m < 2 or (cfg.scenario == "generic-attack" and m > cfg.n):
            raise _field_error("m", f"need 2 <= m <= n, got {m}")
        cfg = _replace(cfg, m=m)
    if cfg.scenario == "generic-attack" and cfg.mode == "classical":
        raise _field_error("mode", "the extraction attack needs random entries (purified or uniform)")
    if cfg.scenario == "bounds-sweep":
        if not 0.0 <= cfg.eps_max <= 1.0:
            raise _field_error("eps_max", "must lie in [0, 1]")
        if cfg.points < 2:
            raise _field_error("points", "need at least two grid points")
    return cfg


def _replace(cfg, **changes):
    return ScenarioConfig(**{**asdict(cfg), **changes})


def _check_query(name, q, n):
    if not 1 <= q <= n:
        raise _field_error(name, f"query index must lie in 1..{n}, got {q}")


def load_config(path):
    """Read a YAML or JSON file (JSON is valid YAML) into a validated config."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{path}: parse error at {where}: {exc.problem}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from None
    return parse_config(data)


def required_dimension(cfg):
    """Largest joint Hilbert dimension the scenario will allocate."""
    if cfg.scenario not in _NEEDS_DATABASE:
        return 1
    spec = cfg.database()
    bob = spec.query_dim**2 * spec.answer_dim**2
    data = math.prod(spec.multiplicities)
    alice = data * data if (cfg.scenario != "honest" or cfg.mode == "purified") else data
    env = spec.answer_dim**4 if (cfg.scenario == "generic-attack" and cfg.p > 0) else 1
    return bob * alice * env


# --- records -------------------------------------------------------------------


def comparison(name, measured, bound, relation, source, applicable=True, slack=SLACK):
    """A measured-vs-bound row; margin is positive when the relation holds."""
    if relation == ">=":
        margin = measured - bound
    elif relation == "<=":
        margin = bound - measured
    elif relation == "==":
        margin = -abs(measured - bound)
    else:
        raise ValueError(relation)
    return {
        "type": "comparison",
        "name": name,
        "measured": measured,
        "bound": bound,
        "relation": relation,
        "margin": margin,
        "holds": margin >= -slack,
        "applicable": applicable,
        "source": source,
    }


def _honest(cfg):
    spec = cfg.database()
    t = honest_run(spec, cfg.i, cfg.p, cfg.r)
    recs = [
        {
            "type": "transcript",
            "query": cfg.i,
            "repetitions": cfg.r,
            "noise": cfg.p,
            "branches": len(t.branches),
            "accept_probability": t.accept_probability(),
            "accept_per_repetition": [t.accept_probability(k) for k in range(cfg.r)],
            "answer_distributions": [t.answer_distribution(k) for k in range(cfg.r)],
            "epsilon": estimate_correctness(t),
        }
    ]
    if cfg.p == 0:
        recs.append(comparison("honest_accept", t.accept_probability(), 1.0, "==", "honest runs always pass", slack=1e-9))
        recs.append(comparison("honest_correct", estimate_correctness(t), 0.0, "==", "noiseless runs are exact", slack=1e-9))
    if spec.n >= 2:
        gap = user_privacy_gap(spec, "honest", cfg.p, cfg.r)
        recs.append(comparison("honest_owner_view", gap, 0.0, "<=", "owner's state independent of the query", slack=1e-9))
    return recs


def _specific(cfg):
    spec = cfg.database()
    rep = purified_database_attack(spec, cfg.i, cfg.j, cfg.r)
    summary = {"type": "specific-attack", **asdict(rep)}
    recs = [summary]
    recs.append(comparison("owner_distance", rep.measured_distance, rep.bound, ">=", "D(rho_A^i, rho_A^j) >= 1 - 1/max(|X_i|, |X_j|)", slack=1e-9))
    recs.append(comparison("helstrom_formula", rep.helstrom_success, 0.5 + rep.measured_distance / 2, "==", "P = 1/2 + D/2", slack=1e-9))
    recs.append(comparison("helstrom_success", rep.helstrom_success, 0.5 + rep.bound / 2, ">=", "P >= 1/2 + (1 - 1/max(|X_i|, |X_j|))/2", slack=1e-9))
    for k, acc in enumerate(rep.accept_per_repetition):
        recs.append(comparison(f"accept_undetected[{k + 1}]", acc, rep.honest_accept_probability, "==", "attacked accept = honest accept", slack=1e-9))
    return recs


def _generic(cfg):
    spec = cfg.database()
    rep = sequential_extraction_attack(spec, cfg.m, cfg.p)
    summary = {"type": "generic-attack", **{k: v for k, v in asdict(rep).items() if k != "per_coin"}}
    summary["premise_holds"] = rep.premise_holds
    recs = [summary]
    recs.append(
        {
            "type": "premise",
            "name": "owner_view_gap",
            "measured": rep.user_privacy_gap,
            "required": 2 * rep.epsilon,
            "holds": rep.premise_holds,
            "note": "extraction bounds assume the owner's view is 2 eps-close across queries",
        }
    )
    sources = {
        "overall_success": "success >= 1 - 2 m^2 sqrt(eps)",
        "step_failure": "eps_l <= l (3 sqrt(eps) + eps)",
        "chain_damage": "D_l <= (l - 1)(3 sqrt(eps) + eps)",
        "uhlmann_distance": "D <= 2 sqrt(eps)",
    }
    for name, measured, bound, ok in rep.comparisons():
        base = name.split("[")[0]
        relation = ">=" if base == "overall_success" else "<="
        recs.append(comparison(name, measured, bound, relation, sources[base], applicable=rep.premise_holds))
    for a, b in sorted(rep.pair_success):
        v = data_privacy_violation(rep, spec, a, b)
        recs.append(
            {
                "type": "data-privacy",
                "entries": [a, b],
                "pair_success": v.pair_success,
                "threshold": v.threshold,
                "margin": v.margin,
                "violated": v.violated,
            }
        )
    return recs


def _sweep(cfg):
    recs = []
    grid = np.linspace(0.0, cfg.eps_max, cfg.points)
    prev = None
    for eps in grid:
        eps = float(eps)
        verdict = impossibility_verdict(eps, cfg.n, cfg.multiplicities)
        recs.append(
            {
                "type": "bound",
                "epsilon": eps,
                "extraction_success": extraction_success_bound(cfg.m, eps),
                "step_failure_last": step_failure_bound(cfg.m, eps),
                "verdict": verdict.status,
            }
        )
        if prev is not None and prev != verdict.status:
            recs.append({"type": "verdict-flip", "epsilon": eps, "from": prev, "to": verdict.status})
        prev = verdict.status
    return recs


def _suite_records(checks):
    return [
        {
            "type": "comparison",
            "name": c.name,
            "measured": c.measured,
            "bound": c.bound,
            "relation": c.relation,
            "margin": c.measured - c.bound if c.relation != "<=" else c.bound - c.measured,
            "holds": bool(c.holds),
            "applicable": True,
            "source": c.source,
        }
        for c in checks
    ]


def _lemma_suite(cfg):
    return _suite_records(run_all())


_RUNNERS = {
    "honest": _honest,
    "specific-attack": _specific,
    "generic-attack": _generic,
    "bounds-sweep": _sweep,
    "lemma-suite": _lemma_suite,
}


def run_scenario(cfg, timing=False):
    """Build the report dict for ``cfg``; raises DimensionError past the guard."""
    dim = required_dimension(cfg)
    if dim > MAX_DIM:
        raise DimensionError(f"scenario needs dimension {dim} > {MAX_DIM}")
    start = time.perf_counter()
    records = _RUNNERS[cfg.scenario](cfg)
    elapsed = (time.perf_counter() - start) * 1000.0
    return {
        "config": asdict(cfg),
        "records": records,
        "version": __version__,
        "duration_ms": round(elapsed, 3) if timing else None,
    }


def report_status(report):
    bad = [r for r in report["records"] if r.get("type") == "comparison" and r["applicable"] and not r["holds"]]
    return EXIT_VIOLATION if bad else EXIT_OK


# --- serialization -------------------------------------------------------------


def _clean(obj):
    """Plain JSON types with floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {_key(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        x = float(f"{x:.12g}")
        return 0.0 if x == 0 else x
    return obj


def _key(k):
    if isinstance(k, tuple):
        return ",".join(str(v) for v in k)
    return str(k)


def to_json(report):
    return json.dumps(_clean(report), indent=2) + "\n"


def _flatten(obj, prefix=""):
    out = {}
    for k, v in obj.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and v and all(not isinstance(x, (dict, list)) for x in v.values()):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (dict, list)):
            out[key] = json.dumps(v, separators=(",", ":"))
        else:
            out[key] = "" if v is None else v
    return out


def to_csv(report):
    clean = _clean(report)
    rows = [_flatten(r) for r in clean["records"]]
    columns = []
    for row in rows:
        for k in row:
            if k not in columns:
                columns.append(k)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _emit(report, fmt, out):
    text = to_json(report) if fmt == "json" else to_csv(report)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parser():
    ap = argparse.ArgumentParser(prog="qpq", description="Quantum private query simulator and bound checker.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute a scenario config")
    run.add_argument("config")
    bnd = sub.add_parser("bounds", help="evaluate every bound at one point")
    bnd.add_argument("epsilon", type=float)
    bnd.add_argument("m", type=int)
    bnd.add_argument("d", type=int, nargs="+", help="valid-answer multiplicities")
    sub.add_parser("selftest", help="run the randomized property suite")
    for p in (run, bnd, sub.choices["selftest"]):
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--timing", action="store_true", help="record wall-clock duration (breaks byte-identical output)")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            out = args.out or cfg.out
            report = run_scenario(cfg, timing=args.timing)
        elif args.command == "bounds":
            if not 0.0 <= args.epsilon <= 1.0 or args.m < 2 or any(d < 1 for d in args.d):
                raise ConfigError("need 0 <= epsilon <= 1, m >= 2 and positive multiplicities")
            start = time.perf_counter()
            records = [{"type": "bound", **asdict(b)} for b in bound_table(args.epsilon, args.m, args.d)]
            v = impossibility_verdict(args.epsilon, len(args.d), args.d)
            records.append({"type": "verdict", "status": v.status, "reason": v.reason})
            elapsed = (time.perf_counter() - start) * 1000.0
            config = {"epsilon": args.epsilon, "m": args.m, "multiplicities": args.d}
            report = {"config": config, "records": records, "version": __version__, "duration_ms": round(elapsed, 3) if args.timing else None}
            out = args.out
        else:
            start = time.perf_counter()
            records = _suite_records(run_all())
            elapsed = (time.perf_counter() - start) * 1000.0
            report = {"config": {"scenario": "lemma-suite"}, "records": records, "version": __version__, "duration_ms": round(elapsed, 3) if args.timing else None}
            out = args.out
    except (ConfigError, SpecError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DimensionError as exc:
        print(f"dimension guard: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    _emit(report, args.format, out)
    return report_status(report)


if __name__ == "__main__":
    sys.exit(main())
