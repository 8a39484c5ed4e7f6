"""The ``lab`` command line: validate, schedule, field, run, report.

Exit codes: 0 success with all verdicts passing, 1 configuration or
resolution errors, 2 scientific-verdict failure (so CI can tell an
engineering failure from a negative result).  Outputs are written atomically
and timestamps live in a separate meta file, keeping report.json
byte-identical across reruns with the same seed.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import presets
from .errors import ShearLabError, ValidationError
from .eulerian import ScalarField, StepPolicy, evolve
from .experiments import SCENARIOS, ExperimentConfig, run_lemma_scaling
from .field import build_field, eval_velocity, field_norm_report
from .geometry import initial_datum_from_schedule, sample_initial_datum
from .gridio import atomic_json, atomic_text, write_grid, write_ledger_csv, write_xy_csv
from .params import (ParameterSet, derive_schedule, load_config,
                     parameter_set_from_dict, search_exponents,
                     validate_constraints)

PRESETS = {
    "spectral": presets.spectral_preset,
    "flow": presets.flow_preset,
    "lemma_scaling": presets.lemma_scaling_preset,
    "parity": presets.parity_preset,
    "feynman_kac": presets.feynman_kac_preset,
}


def _apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    for item in overrides or []:
        if "=" not in item:
            raise ValidationError(f"override {item!r} is not dotted.key=value")
        key, value = item.split("=", 1)
        parts = key.split(".")
        node = cfg
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        try:
            node[parts[-1]] = json.loads(value)
        except json.JSONDecodeError:
            node[parts[-1]] = value
    return cfg


def _resolve_params(args) -> tuple[ParameterSet, "CascadeSchedule"]:
    if args.config:
        cfg = _apply_overrides(load_config(args.config), args.override)
        ps = parameter_set_from_dict(cfg)
        q_max = int(cfg.get("schedule", {}).get("q_max",
                                                len(ps.desk.ratios) if ps.desk else 2))
        return ps, derive_schedule(ps, q_max)
    name = args.preset or "spectral"
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; valid: {sorted(PRESETS)}")
    ps, sched = PRESETS[name]()
    for item in args.override or []:
        if item.startswith("schedule.q_max="):
            q_max = int(item.split("=", 1)[1])
            sched = derive_schedule(ps, q_max)
        else:
            raise ValidationError(f"preset runs only support schedule.q_max overrides, got {item!r}")
    return ps, sched


def cmd_validate(args) -> int:
    if args.search:
        alpha, beta = (Fraction(x) for x in args.search.split(","))
        ps, rep = search_exponents(alpha, beta)
        print(rep.as_table())
        print(f"found epsilon={ps.epsilon} delta={ps.delta} m={ps.m}")
        if args.out:
            atomic_text(Path(args.out) / "constraints.json", rep.to_json())
        return 0
    ps, _ = _resolve_params(args)
    rep = validate_constraints(ps)
    print(rep.as_table())
    if args.out:
        atomic_text(Path(args.out) / "constraints.json", rep.to_json())
    return 0 if rep.passed else 2


def cmd_schedule(args) -> int:
    ps, sched = _resolve_params(args)
    summary = sched.summary()
    print(json.dumps(summary, indent=2))
    if args.out:
        atomic_json(Path(args.out) / "schedule.json", summary)
    return 0


def cmd_field(args) -> int:
    ps, sched = _resolve_params(args)
    f = build_field(sched, args.extension)
    if args.action == "norms":
        rep = field_norm_report(f, p=args.p, alpha=args.alpha)
        out = json.dumps(rep, indent=2, default=float)
        print(out)
        if args.out:
            atomic_text(Path(args.out) / "field_norms.json", out)
        return 0
    # dump: sampled snapshot at a time
    t = args.time if args.time is not None else float(1 - sched.T[0]) / 2
    n = args.n
    y = np.arange(n) / n
    u1, u2 = eval_velocity(f, t, y[None, :].repeat(n, 0), y[:, None].repeat(n, 1))
    outdir = Path(args.out or ".")
    write_grid(outdir / f"u1_t{t:.6f}.f64", ScalarField(u1, t))
    write_grid(outdir / f"u2_t{t:.6f}.f64", ScalarField(u2, t))
    print(f"wrote u1/u2 snapshots at t={t} to {outdir}")
    return 0


def cmd_run(args) -> int:
    if args.scenario == "lemma_scaling":
        res = run_lemma_scaling()
        outdir = Path(args.out or "out_lemma")
        atomic_json(outdir / "report.json", res)
        write_xy_csv(outdir / "sup-vs-sigma.csv", res["sigmas"], res["sup"],
                     ("sigma", "sup"))
        ok = abs(res["slope"] + 1.0) <= 0.1
        print(f"slope = {res['slope']:.4f} (target -1 +- 0.1)")
        return 0 if ok else 2
    if args.scenario not in SCENARIOS:
        raise ValidationError(
            f"unknown scenario {args.scenario!r}; valid: {sorted(SCENARIOS)} or lemma_scaling")
    cfg = ExperimentConfig(scenario=args.scenario, grid_n=args.n,
                           seed=args.seed, out_dir=args.out)
    report = SCENARIOS[args.scenario](cfg)
    outdir = Path(args.out or f"out_{args.scenario}")
    atomic_json(outdir / "report.json", report.as_dict())
    atomic_json(outdir / "meta.json", {"written_at": time.time(),
                                       "argv": sys.argv[1:]})
    _emit_plot_data(report, outdir)
    for v in report.verdicts:
        mark = "pass" if v.passed else "FAIL"
        print(f"{v.name:<40} measured={v.measured:.6g} {v.op} {v.threshold:.6g}  {mark}")
    print(f"report -> {outdir/'report.json'}")
    return 0 if report.passed else 2


def _emit_plot_data(report, outdir: Path) -> None:
    if report.scenario == "theorem_A":
        pts = [(s["kappa"], s["diss_window"]) for s in report.sweeps if "kappa" in s]
        if pts:
            write_xy_csv(outdir / "dissipation-vs-kappa.csv",
                         [p[0] for p in pts], [p[1] for p in pts],
                         ("kappa", "window_dissipation"))
    if report.scenario == "theorem_C":
        pts = [(s["sigma"], s["pairing"]) for s in report.sweeps if "sigma" in s]
        if pts:
            write_xy_csv(outdir / "pairing-vs-sigma.csv",
                         [p[0] for p in pts], [p[1] for p in pts],
                         ("sigma", "pairing"))
    if report.scenario in ("theorem_B", "regularity"):
        pts = [(s.get("kappa", 0.0), s.get("norm_end", s.get("lp_time_norm", 0.0)))
               for s in report.sweeps if "kappa" in s]
        if pts:
            write_xy_csv(outdir / "norm-vs-kappa.csv",
                         [p[0] for p in pts], [p[1] for p in pts],
                         ("kappa", "norm"))


def cmd_report(args) -> int:
    path = Path(args.path)
    if path.is_dir():
        path = path / "report.json"
    with open(path, "r", encoding="utf-8") as fh:
        rep = json.load(fh)
    print(f"scenario: {rep.get('scenario')}  passed: {rep.get('passed')}")
    for v in rep.get("verdicts", []):
        mark = "pass" if v["passed"] else "FAIL"
        print(f"  {v['name']:<40} {v['measured']:.6g} {v['op']} {v['threshold']:.6g}  {mark}")
    return 0 if rep.get("passed", False) else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lab",
        description="cascade shear-flow laboratory on the 2-torus")
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (see README schema)")
    common.add_argument("--preset", help=f"named preset: {sorted(PRESETS)}")
    common.add_argument("--override", action="append", metavar="dotted.key=value",
                        help="config override, applied after the file parse")
    common.add_argument("--out", help="output directory")

    p = sub.add_parser("validate", parents=[common],
                       help="exact-rational constraint report")
    p.add_argument("--search", metavar="alpha,beta",
                   help="search exponents for a regularity pair instead")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("schedule", parents=[common], help="derived cascade schedule")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("field", parents=[common], help="field snapshots / norms")
    p.add_argument("action", choices=["dump", "norms"])
    p.add_argument("--extension", default="forward_only",
                   choices=["forward_only", "reflect", "reflect_with_swap"])
    p.add_argument("--time", type=float, default=None)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("run", parents=[common], help="run a scenario")
    p.add_argument("scenario")
    p.add_argument("--n", type=int, default=1024, help="grid size")
    p.add_argument("--seed", type=int, default=2024)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="pretty-print a report.json")
    p.add_argument("path")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ShearLabError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
