"""Command-line front end.

Subcommands: validate | bound | analyze | relax | report. Every run writes
a machine-readable JSON report (deterministic apart from the timestamp
inside "meta") and prints a short human summary.

Exit codes: 0 success, 1 rule violation or extraction failure, 2 malformed
input, 3 internal solver disagreement, 4 relaxation stall.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bound import GAP_RTOL, instance_from_invariants, solve_dual, solve_primal
from .errors import (
    DegeneracyError,
    ExtractionError,
    InputError,
    RuleViolationError,
    StallError,
    TanfieldError,
)
from .field import (
    analyze,
    corner_cut,
    load_field,
    save_field,
)
from .invariants import invariants_from_json, invariants_to_json, validate
from .polytope import builtin_shape, load_polytope
from .relax import RelaxConfig, SeedSpec, relax, seed_field
from .reportio import sha256_bytes, sha256_text, write_report

EXIT_OK = 0
EXIT_RULES = 1
EXIT_INPUT = 2
EXIT_GAP = 3
EXIT_STALL = 4


def _read_shape(arg: str):
    if arg.startswith("builtin:"):
        name = arg[len("builtin:"):]
        return builtin_shape(name), sha256_text(name)
    try:
        text = Path(arg).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read shape file {arg}: {exc}") from exc
    return load_polytope(text), sha256_text(text)


def _read_invariants(path: str, P):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read invariant file {path}: {exc}") from exc
    return invariants_from_json(text, P), sha256_text(text)


def _parse_s(arg: str) -> np.ndarray:
    try:
        parts = [float(t) for t in arg.split(",")]
    except ValueError as exc:
        raise InputError(f"--s expects X,Y,Z: {exc}") from exc
    if len(parts) != 3:
        raise InputError("--s expects exactly three components")
    return np.asarray(parts)


def _meta(args, hashes: dict[str, str]) -> dict:
    return {
        "tool": "tanfield",
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "inputs": hashes,
        "seed": int(getattr(args, "seed", 0) or 0),
    }


def _finding_dict(f) -> dict:
    return {
        "rule": f.rule,
        "subject_kind": f.subject[0],
        "subject_index": f.subject[1],
        "lhs": f.lhs,
        "rhs": f.rhs,
        "message": f.message,
    }


def _write(args, name: str, report: dict) -> Path:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}_report.json"
    write_report(path, report)
    return path


def cmd_validate(args) -> int:
    P, shape_hash = _read_shape(args.shape)
    inv, inv_hash = _read_invariants(args.invariants, P)
    report = validate(P, inv)
    doc = {
        "meta": _meta(args, {"shape": shape_hash, "invariants": inv_hash}),
        "validate": {
            "passed": report.passed,
            "findings": [_finding_dict(f) for f in report.findings],
        },
    }
    _write(args, "validate", doc)
    if report.passed:
        print("validate: PASS")
        return EXIT_OK
    for f in report.findings:
        print(f"validate: FAIL [{f.rule}] {f.message}")
    return EXIT_RULES


def _bound_fragment(inst, primal, dual) -> dict:
    gap = abs(primal.value - dual.value)
    return {
        "bound": 8.0 * np.pi * float(inst.omega @ dual.xi),
        "xi": [float(x) for x in dual.xi],
        "plan": [
            {"from": int(i), "to": int(j), "mass": float(m)} for i, j, m in dual.plan
        ],
        "duality_gap": gap,
        "primal_value": primal.value,
        "dual_value": dual.value,
        "omega": [float(w) for w in inst.omega],
    }


def cmd_bound(args) -> int:
    P, shape_hash = _read_shape(args.shape)
    inv, inv_hash = _read_invariants(args.invariants, P)
    if args.s is not None:
        inv = type(inv)(edge_orient=inv.edge_orient, kinks=inv.kinks,
                        wraps=inv.wraps, s=_parse_s(args.s) / np.linalg.norm(_parse_s(args.s)))
    report = validate(P, inv)
    if not report.passed:
        for f in report.findings:
            print(f"bound: FAIL [{f.rule}] {f.message}")
        return EXIT_RULES
    inst = instance_from_invariants(P, inv)
    primal = solve_primal(inst)
    dual = solve_dual(inst)
    frag = _bound_fragment(inst, primal, dual)
    doc = {
        "meta": _meta(args, {"shape": shape_hash, "invariants": inv_hash}),
        "s_override": args.s,
        "bound": frag,
    }
    _write(args, "bound", doc)
    print(f"omega: {np.array2string(inst.omega, precision=6)}")
    print(f"bound: {frag['bound']:.12g}  (duality gap {frag['duality_gap']:.3e})")
    tol = args.tolerance if args.tolerance is not None else GAP_RTOL
    if frag["duality_gap"] > tol * (1.0 + abs(frag["bound"])):
        print("bound: FAIL solver disagreement")
        return EXIT_GAP
    return EXIT_OK


def cmd_analyze(args) -> int:
    P, shape_hash = _read_shape(args.shape)
    try:
        blob_hash = sha256_bytes(Path(args.field).read_bytes())
    except OSError as exc:
        raise InputError(f"cannot read field file {args.field}: {exc}") from exc
    f = load_field(args.field, polytope=P)
    offset, res = _parse_surfaces(args.surfaces)
    surfaces = {a: corner_cut(P, a, offset_frac=offset, resolution=res)
                for a in range(P.num_vertices)}
    s = _parse_s(args.s) if args.s is not None else None
    rep = analyze(f, P, surfaces, s=s, seed=args.seed)

    bound_frag = None
    margin = None
    if rep.validation.passed:
        inst = instance_from_invariants(P, rep.invariants)
        primal = solve_primal(inst)
        dual = solve_dual(inst)
        bound_frag = _bound_fragment(inst, primal, dual)
        margin = rep.energy - bound_frag["bound"]

    doc = {
        "meta": _meta(args, {"shape": shape_hash, "field": blob_hash}),
        "analyze": {
            "energy": rep.energy,
            "excluded_volume": rep.excluded_volume,
            "omega_measured": [float(w) for w in rep.omega_measured],
            "wraps": [int(w) for w in rep.wraps],
            "kinks": [
                {"vertex": a, "face": c, "k": int(k)}
                for (a, c), k in sorted(rep.kinks.items())
            ],
            "invariants": invariants_to_json(rep.invariants, P),
            "validation_passed": rep.validation.passed,
            "findings": [_finding_dict(x) for x in rep.validation.findings],
            "max_inequality_violation": rep.inequality.max_violation,
            "tangency_worst": rep.tangency.worst,
            "bound": bound_frag,
            "margin": margin,
        },
    }
    _write(args, "analyze", doc)
    print(f"energy: {rep.energy:.12g}")
    print(f"omega measured: {np.array2string(rep.omega_measured, precision=6)}")
    if margin is not None:
        print(f"bound: {bound_frag['bound']:.12g}  margin: {margin:.12g}")
    else:
        print("bound: skipped (invariant validation failed)")
        for x in rep.validation.findings:
            print(f"analyze: FAIL [{x.rule}] {x.message}")
        return EXIT_RULES
    return EXIT_OK


def _parse_surfaces(arg: str) -> tuple[float, int]:
    parts = arg.split(":")
    if parts[0] != "corner-cut" or len(parts) != 3:
        raise InputError("surfaces spec must look like corner-cut:OFFSET:RESOLUTION")
    try:
        return float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise InputError(f"malformed surfaces spec: {exc}") from exc


def _parse_ansatz(arg: str) -> SeedSpec:
    head, _, rest = arg.partition(":")
    params: dict[str, str] = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            if not val:
                raise InputError(f"ansatz parameter {item!r} must look like key=value")
            params[key] = val
    try:
        if head == "constant":
            d = tuple(float(x) for x in params.get("direction", "1,0,0").split(";"))
            if "direction" in params:
                d = tuple(float(x) for x in params["direction"].split(";"))
            return SeedSpec(kind="constant", direction=d)
        if head == "corner-radial":
            return SeedSpec(kind="corner-radial", vertex=int(params.get("vertex", 0)))
        if head == "edge-rotation":
            return SeedSpec(kind="edge-rotation", face=int(params.get("face", 0)),
                            vertex=int(params.get("vertex", 0)),
                            k=int(params.get("k", 1)))
    except ValueError as exc:
        raise InputError(f"malformed ansatz parameters: {exc}") from exc
    raise InputError(f"unknown ansatz {head!r}")


def cmd_relax(args) -> int:
    P, shape_hash = _read_shape(args.shape)
    spec = _parse_ansatz(args.ansatz)
    cfg = RelaxConfig(tau=args.tau, max_iters=args.max_iters, seed=spec)
    f0 = seed_field(P, spec, resolution=args.resolution)
    seed_report = _try_analyze(f0, P, args.seed)
    result = relax(f0, P, cfg)
    final_report = _try_analyze(result.field, P, args.seed)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_field(result.field, out_dir / "relaxed_field.json")
    trace_lines = [
        f"{p.iteration},{format(p.energy, '.17g')},{format(p.residual, '.17g')}"
        for p in result.trace
    ]
    (out_dir / "trace.csv").write_text("\n".join(trace_lines) + "\n", encoding="utf-8")

    flagged, flag_reason = _class_change(seed_report, final_report)
    sandwich = None
    if final_report is not None and final_report.get("bound") is not None:
        sandwich = {
            "energy": final_report["energy"],
            "bound": final_report["bound"],
            "margin": final_report["energy"] - final_report["bound"],
            "passed": final_report["energy"] >= final_report["bound"] * 0.95,
        }

    doc = {
        "meta": _meta(args, {"shape": shape_hash, "ansatz": sha256_text(args.ansatz)}),
        "relax": {
            "converged": result.converged,
            "iterations": result.iterations,
            "final_tau": result.final_tau,
            "halvings": result.halvings,
            "initial_energy": result.trace[0].energy,
            "final_energy": result.trace[-1].energy,
            "seed_invariants": None if seed_report is None else seed_report["invariants"],
            "final_invariants": None if final_report is None else final_report["invariants"],
            "class_change_flagged": flagged,
            "flag_reason": flag_reason,
            "sandwich": sandwich,
        },
    }
    _write(args, "relax", doc)
    print(f"relax: {result.iterations} iterations, energy "
          f"{result.trace[0].energy:.6g} -> {result.trace[-1].energy:.6g}, "
          f"halvings {result.halvings}")
    if flagged:
        print(f"relax: FLAG homotopy data changed or unreadable ({flag_reason})")
    if sandwich is not None:
        verdict = "PASS" if sandwich["passed"] else "FAIL"
        print(f"sandwich: energy {sandwich['energy']:.6g} >= bound "
              f"{sandwich['bound']:.6g} - 5%: {verdict}")
    return EXIT_OK


def _try_analyze(f, P, seed):
    try:
        rep = analyze(f, P, seed=seed)
    except TanfieldError:
        return None
    frag = None
    if rep.validation.passed:
        inst = instance_from_invariants(P, rep.invariants)
        dual = solve_dual(inst)
        frag = 8.0 * np.pi * float(inst.omega @ dual.xi)
    return {
        "energy": rep.energy,
        "invariants": invariants_to_json(rep.invariants, P),
        "bound": frag,
    }


def _class_change(seed_report, final_report) -> tuple[bool, str | None]:
    if seed_report is None or final_report is None:
        which = "seed" if seed_report is None else "relaxed"
        return True, f"invariant extraction failed on the {which} field"
    a = seed_report["invariants"]
    b = final_report["invariants"]
    for key in ("edge_orient", "kinks", "wraps"):
        if a[key] != b[key]:
            return True, f"{key} changed during relaxation"
    return False, None


def cmd_report(args) -> int:
    stages = []
    hashes = {}
    overall = True
    for path in args.inputs:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read report {path}: {exc}") from exc
        import json as _json
        try:
            data = _json.loads(text)
        except _json.JSONDecodeError as exc:
            raise InputError(f"malformed report {path}: {exc}") from exc
        data.pop("meta", None)
        stages.append({"source": Path(path).name, "content": data})
        hashes[Path(path).name] = sha256_text(text)
        if "validate" in data:
            overall &= bool(data["validate"]["passed"])
        if "relax" in data and data["relax"].get("sandwich"):
            overall &= bool(data["relax"]["sandwich"]["passed"])
    doc = {
        "meta": _meta(args, hashes),
        "stages": stages,
        "overall_pass": overall,
    }
    _write(args, "combined", doc)
    print(f"report: {len(stages)} stages, overall {'PASS' if overall else 'FAIL'}")
    return EXIT_OK if overall else EXIT_RULES


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="tanfield",
        description="Energy bounds and field analysis for tangent unit-vector "
                    "fields on convex polyhedra.",
    )
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=".", help="directory for reports")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for the generic-direction sampler")
        p.add_argument("--tolerance", type=float, default=None,
                       help="override the duality-gap tolerance")

    v = sub.add_parser("validate", help="check invariant sum rules")
    v.add_argument("--shape", required=True, help="PATH or builtin:NAME")
    v.add_argument("--invariants", required=True)
    common(v)
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("bound", help="evaluate the energy lower bound")
    b.add_argument("--shape", required=True)
    b.add_argument("--invariants", required=True)
    b.add_argument("--s", default=None, help="override reference direction X,Y,Z")
    common(b)
    b.set_defaults(func=cmd_bound)

    a = sub.add_parser("analyze", help="analyze a sampled field file")
    a.add_argument("--shape", required=True)
    a.add_argument("--field", required=True)
    a.add_argument("--surfaces", default="corner-cut:0.25:16")
    a.add_argument("--s", default=None)
    common(a)
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("relax", help="relax a seeded field on a box")
    r.add_argument("--shape", required=True)
    r.add_argument("--ansatz", required=True,
                   help="constant[:direction=X;Y;Z] | corner-radial[:vertex=A] | "
                        "edge-rotation[:face=C,k=K,vertex=A]")
    r.add_argument("--resolution", type=int, default=16)
    r.add_argument("--tau", type=float, default=0.2)
    r.add_argument("--max-iters", type=int, default=2000)
    common(r)
    r.set_defaults(func=cmd_relax)

    m = sub.add_parser("report", help="bundle stage reports into one document")
    m.add_argument("inputs", nargs="+")
    common(m)
    m.set_defaults(func=cmd_report)

    return top


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StallError as exc:
        print(f"error: relaxation stalled: {exc}", file=sys.stderr)
        return EXIT_STALL
    except (ExtractionError, DegeneracyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RULES
    except RuleViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GAP if "gap" in str(exc) else EXIT_RULES


if __name__ == "__main__":
    sys.exit(main())
