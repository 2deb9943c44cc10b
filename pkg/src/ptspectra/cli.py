"""Command-line front end: ``ptspectra run config.json``, ``ptspectra verify``, ``ptspectra catalog --list``."""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from pathlib import Path

import jsonschema
import numpy as np

from . import discretize, io
from .discretize import BasisSpec, Grid, build, convergence_gap, perturbation_operator
from .eigensolve import eig, reality_verdict
from .errors import ConfigError, PTSpectraError
from .perturbation import coefficient_drift, rspe_coefficients, rspe_reality_check, track_branches
from .potentials import OperatorFamily, PotentialSpec, available, catalog, confinement_audit, parity_audit, theorem22_applicable
from .stability import (Contour, numerical_range_boundary, resolvent_bound_audit, spectral_projection,
                        stability_check)
from .verification import CRITERIA, verify_all

TASKS = ("spectrum", "track", "rspe", "project", "stability", "numrange", "verify", "audit")

_COMPLEX = {"oneOf": [{"type": "number"},
                      {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_DISCRETIZATION = {
    "oneOf": [
        {"type": "null"},
        {"type": "object", "required": ["type", "half_width", "n_points"], "additionalProperties": False,
         "properties": {"type": {"const": "grid"}, "half_width": _POSITIVE,
                        "n_points": {"type": "integer", "minimum": 3}}},
        {"type": "object", "required": ["type", "n_modes"], "additionalProperties": False,
         "properties": {"type": {"const": "basis"}, "n_modes": {"type": "integer", "minimum": 1},
                        "omega": _POSITIVE}},
    ]
}

SCHEMA = {
    "type": "object",
    "required": ["task"],
    "additionalProperties": False,
    "properties": {
        "task": {"enum": list(TASKS)},
        "family": {"oneOf": [{"type": "string"}, {"type": "object"}]},
        "discretization": _DISCRETIZATION,
        "reference": _DISCRETIZATION,
        "epsilon": {"oneOf": [
            {"type": "number"},
            {"type": "object", "required": ["max", "steps"], "additionalProperties": False,
             "properties": {"max": _POSITIVE, "steps": {"type": "integer", "minimum": 1}}},
            {"type": "object", "required": ["values"], "additionalProperties": False,
             "properties": {"values": {"type": "array", "items": {"type": "number"}, "minItems": 1}}},
        ]},
        "epsilons": {"type": "array", "items": _POSITIVE, "minItems": 1},
        "k": {"type": "integer", "minimum": 1},
        "order": {"type": "integer", "minimum": 1},
        "E": _COMPLEX,
        "r": _POSITIVE,
        "n_nodes": {"type": "integer", "minimum": 8},
        "tol": _POSITIVE,
        "n_angles": {"type": "integer", "minimum": 8},
        "restriction": {"type": "array", "prefixItems": [{"enum": ["abs", "plus", "minus"]}, {"type": "number"}],
                        "minItems": 2, "maxItems": 2},
        "samples": {"type": "integer", "minimum": 1},
        "x_max": _POSITIVE,
        "criteria": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": len(CRITERIA)}},
        "seed": {"type": "integer"},
        "prefix": {"type": "string", "minLength": 1},
    },
    "allOf": [
        {"if": {"properties": {"task": {"not": {"const": "verify"}}}}, "then": {"required": ["family"]}},
        {"if": {"properties": {"task": {"enum": ["project", "stability"]}}}, "then": {"required": ["E", "r"]}},
        {"if": {"properties": {"task": {"const": "rspe"}}}, "then": {"required": ["E", "order"]}},
        {"if": {"properties": {"task": {"const": "stability"}}}, "then": {"required": ["epsilons"]}},
    ],
}


def _complex(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _path(err) -> str:
    return "$" + "".join(f"[{p!r}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def validate_config(cfg) -> dict:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(f"{_path(e)}: {e.message}" for e in errors))
    eps = cfg.get("epsilon")
    if isinstance(eps, dict) and "values" in eps:
        v = eps["values"]
        if cfg["task"] == "track" and (v[0] != 0 or any(b <= a for a, b in zip(v, v[1:]))):
            raise ConfigError("$.epsilon.values: must start at 0 and increase strictly")
    return cfg


def load_config(path) -> dict:
    raw = Path(path).read_bytes()
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        byte = len(raw.decode("utf-8", errors="replace")[: exc.pos].encode("utf-8"))
        raise ConfigError(f"{path}: malformed JSON at byte {byte} (line {exc.lineno}, column {exc.colno}): "
                          f"{exc.msg}") from None
    return validate_config(cfg)


def resolve_family(spec) -> OperatorFamily:
    if isinstance(spec, str):
        return catalog(spec)
    if "catalog" in spec and len(spec) <= 2:
        return catalog(spec["catalog"], **spec.get("params", {}))
    return OperatorFamily.from_dict(spec)


def resolve_discretization(d):
    if d is None:
        return None
    if d["type"] == "grid":
        return Grid(float(d["half_width"]), int(d["n_points"]))
    return BasisSpec(int(d["n_modes"]), float(d.get("omega", 1.0)))


def epsilon_grid(cfg) -> np.ndarray:
    eps = cfg.get("epsilon", 0.0)
    if isinstance(eps, (int, float)):
        return np.array([float(eps)])
    if "values" in eps:
        return np.array(eps["values"], dtype=float)
    return np.linspace(0.0, float(eps["max"]), int(eps["steps"]) + 1)


def _out(out_dir: Path, cfg, name: str) -> Path:
    return out_dir / f"{cfg.get('prefix', cfg['task'])}_{name}"


def _task_spectrum(cfg, family, disc, out_dir, threads, seed):
    eps = float(epsilon_grid(cfg)[-1])
    ref = resolve_discretization(cfg.get("reference"))
    op = build(family, eps, disc)
    spec = eig(op, left=True)
    err = spec.roundoff_errors()
    gap = None
    if ref is not None:
        cg = convergence_gap(family, eps, (disc, ref), cfg.get("k", 5))
        gap = cg.error_scale
        err = err + gap
    rv = reality_verdict(spec.values, err)
    path = io.write_spectrum(_out(out_dir, cfg, "spectrum.csv"), spec, rv.verdicts, err)
    return {"files": [path.name], "epsilon": eps, "size": spec.size,
            "verdicts": {"real": rv.n_real, "conjugate_pairs": rv.n_pairs, "undecided": rv.n_undecided},
            "error_scale": {"convergence_gap": gap, "roundoff": "condition * max(residual, n u ||H||)"}}


def _task_track(cfg, family, disc, out_dir, threads, seed):
    grid = epsilon_grid(cfg)
    ref = resolve_discretization(cfg.get("reference"))
    tr = track_branches(family, grid, disc, k=cfg.get("k", 5), reference=ref, workers=threads)
    path = io.write_branches(_out(out_dir, cfg, "branches.csv"), tr)
    return {"files": [path.name], "epsilon_j": [b.epsilon_j for b in tr],
            "closure_ok": all(tr.closure_ok), "entrants": {str(k): v for k, v in tr.entrants.items()},
            "error_scale": {"reference": cfg.get("reference"), "roundoff": "condition-weighted"}}


def _task_rspe(cfg, family, disc, out_dir, threads, seed):
    order = int(cfg["order"])
    E = _complex(cfg["E"])
    series = rspe_coefficients(build(family, 0.0, disc), perturbation_operator(family, disc), E, order)
    ref_d = resolve_discretization(cfg.get("reference"))
    ref = None
    if ref_d is not None:
        ref = rspe_coefficients(build(family, 0.0, ref_d), perturbation_operator(family, ref_d), E, order)
    tol = cfg.get("tol")
    if tol is None:
        tol = 10.0 * coefficient_drift(series, ref) if ref is not None else 1e-8
    check = rspe_reality_check(series, tol, ref)
    path = io.write_rspe(_out(out_dir, cfg, "rspe.json"), series, check)
    return {"files": [path.name], "verdict": check.verdict, "tol": check.tol, "drift": check.drift,
            "order": series.order}


def _task_project(cfg, family, disc, out_dir, threads, seed):
    eps = float(epsilon_grid(cfg)[-1])
    op = build(family, eps, disc)
    res = spectral_projection(op.matrix, Contour(_complex(cfg["E"]), float(cfg["r"]), cfg.get("n_nodes", 64)),
                              workers=threads)
    out = {"epsilon": eps, "rank": res.rank, "idempotency_defect": res.idempotency_defect,
           "quadrature_estimate": res.quadrature_estimate, "n_nodes": res.n_nodes,
           "singular_values": res.singular_values[: max(res.rank + 2, 4)]}
    path = io.write_json(_out(out_dir, cfg, "projection.json"), out)
    return {"files": [path.name], "rank": res.rank, "idempotency_defect": res.idempotency_defect}


def _task_stability(cfg, family, disc, out_dir, threads, seed):
    rep = stability_check(family, _complex(cfg["E"]), float(cfg["r"]), cfg["epsilons"], disc,
                          n_nodes=cfg.get("n_nodes", 64), workers=threads)
    path = io.write_stability(_out(out_dir, cfg, "stability.csv"), rep)
    return {"files": [path.name], "verdict": rep.verdict, "trend_ratio": rep.trend_ratio,
            "trend_tolerance": rep.trend_tolerance, "rank0": rep.rank0}


def _task_numrange(cfg, family, disc, out_dir, threads, seed):
    eps = float(epsilon_grid(cfg)[-1])
    op = build(family, eps, disc)
    restriction = tuple(cfg["restriction"]) if "restriction" in cfg else None
    b = numerical_range_boundary(op, n_angles=cfg.get("n_angles", 64), restriction=restriction)
    path = io.write_numrange(_out(out_dir, cfg, "numrange.csv"), b)
    return {"files": [path.name], "n_points": len(b.points)}


def _task_audit(cfg, family, disc, out_dir, threads, seed):
    eps = float(epsilon_grid(cfg)[-1])
    rng = np.random.default_rng(seed)
    out = {}
    if not family.is_matrix:
        out["parity_V"] = parity_audit(family.V, cfg.get("samples", 100)).__dict__
        out["parity_W"] = parity_audit(family.W, cfg.get("samples", 100)).__dict__
        conf = confinement_audit(family, eps, cfg.get("x_max", 10.0))
        out["confinement"] = {"min_value": conf.min_value, "argmin": conf.argmin, "growth": conf.growth}
        if family.V.is_monomial:
            # p^2 + V+ + i V-: V- plays the role of the odd polynomial gW
            V = PotentialSpec(family.V.even_terms, ())
            W = PotentialSpec((), family.V.odd_terms)
            out["theorem22"] = theorem22_applicable(V, W).__dict__
    op = build(family, eps, disc)
    out["pt_residual"] = discretize.pt_residual(op.matrix, op.parity)
    scale = max(1.0, float(np.max(np.abs(np.diag(op.matrix)))))
    z = -rng.uniform(0.01, 1.0, 20) * scale + 1j * rng.uniform(-1.0, 1.0, 20) * scale
    audit = resolvent_bound_audit(op, z)
    out["resolvent_audit"] = {"passed": audit.passed, "checked": audit.n_checked,
                              "skipped": audit.n_skipped, "slack": audit.slack}
    path = io.write_json(_out(out_dir, cfg, "audit.json"), out)
    return {"files": [path.name], "pt_residual": out["pt_residual"], "resolvent_audit_passed": audit.passed}


def _task_verify(cfg, family, disc, out_dir, threads, seed):
    results = verify_all(cfg.get("criteria"), emit=lambda s: print(s, file=sys.stderr))
    rows = [{"criterion": r.number, "name": r.name, "passed": r.passed, "measured": r.measured,
             "tolerance": r.tolerance, "budget_s": r.budget} for r in results]
    path = io.write_json(_out(out_dir, cfg, "verify.json"), rows)
    return {"files": [path.name], "passed": all(r.passed for r in results), "n": len(results)}


_DISPATCH = {
    "spectrum": _task_spectrum, "track": _task_track, "rspe": _task_rspe, "project": _task_project,
    "stability": _task_stability, "numrange": _task_numrange, "audit": _task_audit, "verify": _task_verify,
}


def run(cfg: dict, out_dir, threads: int = 1, seed: int = 0) -> dict:
    """Execute one config; files go to ``out_dir``. Returns the run report (without timings)."""
    cfg = validate_config(cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = int(cfg.get("seed", seed))
    family = resolve_family(cfg["family"]) if "family" in cfg else None
    disc = resolve_discretization(cfg.get("discretization"))
    result = _DISPATCH[cfg["task"]](cfg, family, disc, out_dir, threads, seed)
    report = {"inputs": cfg, "seed": seed, "task": cfg["task"], "outputs": result}
    io.write_json(_out(out_dir, cfg, "report.json"), report)
    return report


def _global_options(p, suppress):
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--out-dir", help="directory for result files (default: cwd)", **(kw or {"default": "."}))
    p.add_argument("--threads", type=int, help="workers for per-eps and per-node solves", **(kw or {"default": 1}))
    p.add_argument("--seed", type=int, help="seed for randomized audit sampling", **(kw or {"default": 0}))


def _parser():
    p = argparse.ArgumentParser(prog="ptspectra", description=__doc__)
    _global_options(p, False)
    # the same flags are accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, True)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run a JSON config")
    r.add_argument("config")
    v = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    v.add_argument("--only", type=lambda s: [int(x) for x in s.split(",") if x.strip()], default=None,
                   metavar="N,N,...", help="criterion numbers to run (empty string: none)")
    c = sub.add_parser("catalog", parents=[common], help="list scenario families")
    c.add_argument("--list", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    if args.command == "catalog":
        for name in available():
            print(f"{name}: {catalog(name).description}")
        return 0
    if args.command == "verify":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            results = verify_all(args.only, emit=print)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        failed = [r.number for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
              + (f"; failed: {failed}" if failed else ""))
        return 1 if failed else 0
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config)
        report = run(cfg, args.out_dir, threads=args.threads, seed=args.seed)
    except (PTSpectraError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(io._clean(report["outputs"]), sort_keys=True))
    print(f"wall time {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
