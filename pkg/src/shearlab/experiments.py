"""Scenario drivers: the three dichotomy demonstrations and the regularity study.

Each driver assembles parameters, field and solvers, runs the sweep and
returns a RunReport whose verdicts are pure functions of measured numbers
and configured thresholds (each verdict entry carries both).  Desk
thresholds are quantitative surrogates for asymptotic statements; every
report spells the surrogate next to its threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .convolve import ConvolvedField, KernelSpec, default_kernel, lemma_scaling_scan
from .errors import ContractViolation, ValidationError
from .eulerian import (EnergyLedger, ScalarField, StepPolicy, evolve,
                       holder_seminorm, lp_time_norm, weak_pairing)
from .field import VelocityFieldSpec, build_field
from .geometry import (initial_datum_from_schedule, level_sets, membership,
                       sample_initial_datum)
from .lagrangian import flow_lipschitz_estimate
from .params import (CascadeSchedule, DiffusivitySequences, ParameterSet,
                     diffusivity_sequences, goal_inequalities)
from . import presets


@dataclass
class ExperimentConfig:
    scenario: str  # theorem_A | theorem_B | theorem_C | regularity
    grid_n: int = 1024
    n_mc: int = 20000
    seed: int = 2024
    q_values: Optional[list[int]] = None
    out_dir: Optional[str] = None
    pairing_grid: int = 384
    dissipate_target: float = 5.0


@dataclass
class Verdict:
    name: str
    measured: float
    threshold: float
    op: str  # '>=' or '<='
    passed: bool
    note: str = ""

    def as_dict(self):
        return {"name": self.name, "measured": self.measured,
                "threshold": self.threshold, "op": self.op,
                "passed": self.passed, "note": self.note}


def _check(name, measured, op, threshold, note="") -> Verdict:
    ok = measured >= threshold if op == ">=" else measured <= threshold
    return Verdict(name, float(measured), float(threshold), op, bool(ok), note)


@dataclass
class RunReport:
    scenario: str
    config: dict
    sweeps: list = dfield(default_factory=list)
    verdicts: list = dfield(default_factory=list)
    passed: bool = True

    def add_verdict(self, v: Verdict):
        self.verdicts.append(v)
        self.passed = self.passed and v.passed

    def as_dict(self) -> dict:
        return {"scenario": self.scenario, "config": self.config,
                "sweeps": self.sweeps, "passed": self.passed,
                "verdicts": [v.as_dict() for v in self.verdicts]}


# ---------------------------------------------------------------------------
# Theorem A surrogate: anomalous dissipation in the idle window


def run_theorem_A(cfg: ExperimentConfig) -> RunReport:
    """Sweep dissipative diffusivities; verdict per sweep point.

    'anomalous' requires at least half the initial energy to dissipate
    inside the stage's idle window with pre-window loss at most a tenth --
    the desk surrogate of the asymptotic half-energy window dissipation.
    """
    ps, sched = presets.spectral_preset()
    f = build_field(sched, "forward_only")
    seqs = diffusivity_sequences(ps, sched, dissipate_target=cfg.dissipate_target)
    datum = initial_datum_from_schedule(sched)
    theta0 = ScalarField(sample_initial_datum(datum, cfg.grid_n))
    e0 = theta0.l2_sq()
    qs = cfg.q_values or [q for q in range(sched.q_max) if sched.has_window(q)]
    report = RunReport("theorem_A", {"grid_n": cfg.grid_n, "E0": e0,
                                     "kappa_tilde": seqs.kappa_tilde})
    policy = StepPolicy(keep_fields=True)
    for q in qs:
        kappa = seqs.kappa_tilde[q]
        groups = goal_inequalities(sched, kappa, q)
        t_win_lo = float(1 - sched.T[q])
        t_win_hi = t_win_lo + sched.tbar_f[q]
        cps, led = evolve(theta0, f, kappa, 1e-12, 1.0, policy)
        diss_window = led.dissipated_between(t_win_lo, t_win_hi)
        pre_loss = e0 - _l2_at(led, t_win_lo)
        pairing = None
        for t, th in cps:
            if th is not None and abs(t - t_win_lo) < 1e-12:
                pairing = weak_pairing(th, level_sets(sched, q)["A"])[0]
        entry = {"q": q, "kappa": kappa, "groups": groups.as_dict(),
                 "diss_window": diss_window, "pre_window_loss": pre_loss,
                 "diss_total": led.diss_cum[-1], "final_l2_sq": led.l2_sq[-1],
                 "pairing_A_q": pairing,
                 "ledger": _ledger_summary(led)}
        report.sweeps.append(entry)
        eligible = groups.close_flows <= 1e-2 and groups.dissipate >= 5.0
        if eligible:
            report.add_verdict(_check(
                f"anomalous_window_dissipation_q{q}", diss_window, ">=", 0.5 * e0,
                "window dissipation >= half the initial energy"))
            report.add_verdict(_check(
                f"pre_window_loss_q{q}", pre_loss, "<=", 0.1 * e0,
                "loss before the window at most a tenth of the energy"))
        else:
            entry["note"] = "goal groups outside the anomalous regime; recorded only"
    return report


def _l2_at(led: EnergyLedger, t: float) -> float:
    ts = np.asarray(led.times)
    i = int(np.searchsorted(ts, t - 1e-12))
    i = min(i, len(led.l2_sq) - 1)
    return led.l2_sq[i]


def _ledger_summary(led: EnergyLedger) -> dict:
    return {"balance_defect": led.balance_defect(),
            "balance_defect_quad": led.balance_defect_quad(),
            "final_diss": led.diss_cum[-1], "n_records": len(led.times)}


# ---------------------------------------------------------------------------
# Theorem B surrogate: two limit points of the vanishing-diffusivity family


def run_theorem_B(cfg: ExperimentConfig) -> RunReport:
    """Identical inputs except kappa: the small-kappa branch conserves and
    reconstructs the initial pairing, the dissipative branch loses at least
    half the norm."""
    ps, sched = presets.spectral_preset()
    f = build_field(sched, "reflect")
    seqs = diffusivity_sequences(ps, sched, dissipate_target=cfg.dissipate_target)
    datum = initial_datum_from_schedule(sched)
    theta0 = ScalarField(sample_initial_datum(datum, cfg.grid_n))
    e0 = theta0.l2_sq()
    norm0 = math.sqrt(e0)
    A0 = level_sets(sched, 0)["A"]
    pairing0 = weak_pairing(theta0, A0)[0]
    qs = cfg.q_values or [q for q in range(sched.q_max) if sched.has_window(q)]
    report = RunReport("theorem_B", {"grid_n": cfg.grid_n, "E0": e0,
                                     "pairing0": pairing0})
    policy = StepPolicy(keep_fields=True,
                        checkpoint_times=[2.0 - 1e-9])
    for q in qs:
        for branch, kappa in (("conservative", seqs.kappa[q]),
                              ("dissipative", seqs.kappa_tilde[q])):
            cps, led = evolve(theta0, f, kappa, 1e-12, 2.0 - 1e-9, policy)
            th_end = cps[-1][1]
            norm_end = math.sqrt(max(led.l2_sq[-1], 0.0))
            pairing_end = weak_pairing(th_end, A0)[0]
            entry = {"q": q, "branch": branch, "kappa": kappa,
                     "norm_end": norm_end, "norm0": norm0,
                     "pairing_end": pairing_end,
                     "groups": goal_inequalities(sched, kappa, q).as_dict(),
                     "ledger": _ledger_summary(led)}
            report.sweeps.append(entry)
            if branch == "conservative":
                report.add_verdict(_check(
                    f"conserved_norm_q{q}", norm_end, ">=", 0.9 * norm0,
                    "round trip keeps at least 90% of the L2 norm"))
                report.add_verdict(_check(
                    f"pairing_reconstructed_q{q}",
                    abs(pairing_end - pairing0), "<=", 0.1 * abs(pairing0),
                    "final pairing within 10% of the initial one"))
            else:
                report.add_verdict(_check(
                    f"dissipated_norm_q{q}", norm_end, "<=", 0.5 * norm0,
                    "dissipative branch ends at half the norm or less"))
    return report


# ---------------------------------------------------------------------------
# Theorem C surrogate: parity alternation under convolved transport


def _r2_points(n: int) -> np.ndarray:
    """R2 low-discrepancy sequence: uniform quadrature nodes on the torus
    that never resonate with the dyadic profile lattices (a midpoint grid
    does, parking a fixed fraction of nodes exactly on profile jumps)."""
    g = 1.32471795724474602596  # plastic constant
    a = np.array([1.0 / g, 1.0 / g**2])
    i = np.arange(1, n + 1, dtype=float)[:, None]
    return (0.5 + i * a[None, :]) % 1.0


def pairing_against_A0(cf: ConvolvedField, sched: CascadeSchedule,
                       datum_value: Callable, t_end: float, n_grid: int) -> float:
    """<theta_sigma(t_end), 1_{A_0}> by backward characteristics over
    low-discrepancy quadrature nodes (n_grid^2 of them)."""
    A0 = level_sets(sched, 0)["A"]
    pts = _r2_points(n_grid * n_grid)
    mask = membership(A0, pts[:, 0], pts[:, 1])
    pts = pts[mask]
    back = cf.advect(pts, t_end, 1e-12)
    vals = datum_value(back[:, 0], back[:, 1])
    return float(vals.sum()) / (n_grid * n_grid)


def run_theorem_C(cfg: ExperimentConfig, kernel: Optional[KernelSpec] = None,
                  sensitivity: bool = True) -> RunReport:
    """Pure transport with the sigma-convolved swap field: the pairing
    against A_0 alternates in sign with the blocked stage's parity."""
    ps, sched = presets.parity_preset()
    f = build_field(sched, "reflect_with_swap")
    kernel = kernel or default_kernel()
    datum = initial_datum_from_schedule(sched)
    sigmas = [sched.a_f[q] / 64.0 for q in range(sched.q_max + 1)]
    t_end = 1.0 + sched.T_f[0] + 0.5 * (1.0 - sched.T_f[0])
    report = RunReport("theorem_C", {
        "sigmas": sigmas, "t_end": t_end, "kernel_c1": kernel.c1_bound,
        "pairing_grid": cfg.pairing_grid})
    pairings = []
    for q, sigma in enumerate(sigmas):
        cf = ConvolvedField(f, kernel, sigma)
        p = pairing_against_A0(cf, sched, datum.value, t_end, cfg.pairing_grid)
        pairings.append(p)
        report.sweeps.append({"q": q, "sigma": sigma, "pairing": p})
        want = 1.0 if q % 2 == 0 else -1.0
        report.add_verdict(_check(
            f"pairing_magnitude_q{q}", abs(p), ">=", 0.2,
            "pairing magnitude at least 0.2"))
        report.add_verdict(_check(
            f"pairing_sign_q{q}", p * want, ">=", 0.0,
            f"sign {'+' if want > 0 else '-'} for blocked stage parity"))
    if sensitivity:
        # stability of the alternation under a finer pairing grid
        q_check = 1
        cf = ConvolvedField(f, kernel, sigmas[q_check])
        p2 = pairing_against_A0(cf, sched, datum.value, t_end,
                                2 * cfg.pairing_grid)
        report.sweeps.append({"sensitivity_q": q_check, "pairing_fine_grid": p2,
                              "pairing_base": pairings[q_check]})
        report.add_verdict(_check(
            "sensitivity_sign_stable", p2 * pairings[q_check], ">=", 0.0,
            "sign unchanged when the pairing grid is doubled"))
    return report


# ---------------------------------------------------------------------------
# Regularity study


def run_regularity(cfg: ExperimentConfig, beta: float = 0.25) -> RunReport:
    """Uniform-in-diffusivity surrogate: the time-integrated Hoelder norm of
    the scalar stays within 1.5x of its transport-only value, and the
    per-stage flow Lipschitz factors respect the shear bound."""
    ps, sched = presets.spectral_preset()
    f = build_field(sched, "forward_only")
    seqs = diffusivity_sequences(ps, sched, dissipate_target=cfg.dissipate_target)
    datum = initial_datum_from_schedule(sched)
    theta0 = ScalarField(sample_initial_datum(datum, cfg.grid_n))
    kappas = {"zero": 0.0, "kappa_1": seqs.kappa[1], "kappa_tilde_1": seqs.kappa_tilde[1]}
    report = RunReport("regularity", {"beta": beta, "p_circ": float(ps.p_circ),
                                      "kappas": kappas})
    values = {}
    policy = StepPolicy(keep_fields=True)
    for name, kappa in kappas.items():
        cps, led = evolve(theta0, f, kappa, 1e-12, 1.0, policy)
        norm = lp_time_norm(cps, float(ps.p_circ), beta)
        values[name] = norm["value"]
        report.sweeps.append({"kappa_name": name, "kappa": kappa,
                              "lp_time_norm": norm["value"],
                              "cbeta_checkpoints": norm["cbeta_norms"]})
    base = values["zero"]
    worst = max(values.values())
    report.add_verdict(_check("uniform_in_diffusivity", worst, "<=", 1.5 * base,
                              "max over kappa within 1.5x of the kappa=0 norm"))
    # flow regularity against the shear bound, on the grid-free preset
    _, flow_sched = presets.flow_preset()
    ff = build_field(flow_sched, "forward_only")
    for q in range(flow_sched.q_max):
        est = flow_lipschitz_estimate(ff, seqs.kappa[min(1, len(seqs.kappa) - 1)],
                                      q, n_omega=256, seed=cfg.seed)
        report.sweeps.append({"flow_lipschitz_stage": q, **est})
        for slot in est["slots"]:
            report.add_verdict(_check(
                f"flow_lipschitz_q{q}_slot{slot['slot']}", slot["measured"],
                "<=", slot["bound"], "per-slot 3 + int ||grad u|| bound"))
        report.add_verdict(_check(
            f"flow_lipschitz_stage{q}_product", est["stage_measured"], "<=",
            est["stage_bound"], "composed factor below the product bound"))
    return report


# ---------------------------------------------------------------------------
# Lemma scaling experiment (exposed for the CLI and acceptance)


def run_lemma_scaling(n_sigmas: int = 9) -> dict:
    ps, sched = presets.lemma_scaling_preset()
    f = build_field(sched, "reflect_with_swap")
    k = default_kernel()
    sigmas = np.geomspace(4 * sched.a_f[1], sched.a_f[0] / 4.0, n_sigmas)
    res = lemma_scaling_scan(f, k, 0, sigmas)
    res["kernel_c1"] = k.c1_bound
    return res


SCENARIOS = {
    "theorem_A": run_theorem_A,
    "theorem_B": run_theorem_B,
    "theorem_C": run_theorem_C,
    "regularity": run_regularity,
}
