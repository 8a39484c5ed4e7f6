"""Deterministic and stochastic flows of the cascade field.

The shear structure makes both flows exactly integrable in the transverse
direction: within a slot the transverse coordinate is untouched by the drift
(pure Brownian for kappa > 0), and the parallel coordinate accumulates the
cutoff-weighted profile along the transverse path.  Deterministic slot maps
are therefore exact compositions; stochastic slots use exact Gaussian
transverse increments and a midpoint quadrature of the drift along the
Brownian path.

All randomness flows through counter-based streams (see rng): identical
(seed, configuration) reruns give bitwise identical trajectories regardless
of how the ensemble is partitioned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractViolation, ValidationError
from .field import VelocityFieldSpec, slot_mass_between, time_segments
from .geometry import SetDescriptor, membership
from .rng import gaussian_pair, uniform_points

_AXIS_OF = {"h": 0, "v": 1}  # displaced component index (x1 for 'h', x2 for 'v')


@dataclass
class ParticleEnsemble:
    """Positions on the torus plus the random-stream bookkeeping.

    ``counter`` is the next unused RNG counter; every advance consumes
    counters deterministically, so trajectories are reproducible and
    partition-independent.  ``drift`` accumulates the vector integral of the
    velocity along each path (the window-displacement statistic).
    """

    positions: np.ndarray
    kappa: float
    time: float
    seed: int
    counter: int = 0
    drift: Optional[np.ndarray] = None

    @classmethod
    def uniform(cls, n: int, kappa: float, seed: int, time: float = 0.0):
        pts = uniform_points(seed ^ 0xA5A5, np.arange(n, dtype=np.uint64), 0)
        return cls(pts.astype(float), kappa, time, seed)

    @classmethod
    def at_points(cls, pts: np.ndarray, kappa: float, seed: int, time: float = 0.0):
        pts = np.atleast_2d(np.asarray(pts, dtype=float)) % 1.0
        return cls(pts.copy(), kappa, time, seed)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def reset_drift(self) -> None:
        self.drift = np.zeros_like(self.positions)


@dataclass
class SdePolicy:
    """Substep control for stochastic advances.

    mass_fraction bounds the displacement mass per substep; the transverse
    resolution cap (moll_scale^2 / 8 kappa) refines this up to max_substeps.
    Weak (distributional) accuracy is what the estimates need, so the
    defaults are coarser than the spectral solver's.
    """

    mass_fraction: float = 0.05
    max_substeps: int = 256
    track_drift: bool = False


def flow_deterministic(f: VelocityFieldSpec, x, t0: float, t1: float) -> np.ndarray:
    """Exact deterministic flow map from t0 to t1 (t1 < t0 runs backward).

    Within each slot the transverse coordinate is constant, so the update is
    the exact displacement (cutoff mass over the crossed part) * profile;
    positions are exact up to the profile interpolation error (~1e-12).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float)).copy() % 1.0
    backward = t1 < t0
    a, b = (t1, t0) if backward else (t0, t1)
    segs = time_segments(f, a, b)
    if backward:
        segs = segs[::-1]
    for sa, sb, active in segs:
        if active is None:
            continue
        slot, side, sign = active
        m = sign * slot_mass_between(slot, side, sa, sb)
        if backward:
            m = -m
        axis = _AXIS_OF[slot.orientation]
        perp = x[:, 1 - axis]
        x[:, axis] = (x[:, axis] + m * slot.profile.value(perp)) % 1.0
    return x


def sde_advance(ens: ParticleEnsemble, f: VelocityFieldSpec, t1: float,
                policy: Optional[SdePolicy] = None) -> ParticleEnsemble:
    """Advance the ensemble from its current time to t1 (forward only).

    Idle stretches take one exact Gaussian step; active slots substep with
    exact transverse increments (two half-steps, so the drift quadrature
    samples the true Brownian midpoint) and midpoint drift.
    """
    policy = policy or SdePolicy()
    if t1 <= ens.time:
        raise ContractViolation("sde_advance is forward in time")
    if policy.track_drift and ens.drift is None:
        ens.reset_drift()
    _sde_run(ens, f, ens.time, t1, policy, reverse=False)
    ens.time = t1
    return ens


def backward_paths(f: VelocityFieldSpec, x, t: float, kappa: float, n: int,
                   seed: int, policy: Optional[SdePolicy] = None,
                   t_end: float = 0.0) -> np.ndarray:
    """Endpoints at time ``t_end`` of n backward stochastic paths from (t, x).

    Realized as forward integration of the time-reversed field with fresh
    Brownian increments; only weak (distributional) quantities should be read
    off, which is all the Feynman-Kac representation needs.
    """
    policy = policy or SdePolicy()
    x = np.asarray(x, dtype=float)
    pts = np.repeat(x[None, :], n, axis=0) if x.ndim == 1 else x.copy()
    ens = ParticleEnsemble.at_points(pts, kappa, seed, time=t_end)
    _sde_run(ens, f, t_end, t, policy, reverse=True)
    return ens.positions


def _sde_run(ens: ParticleEnsemble, f: VelocityFieldSpec, t0: float, t1: float,
             policy: SdePolicy, reverse: bool) -> None:
    """Shared SDE driver on [t0, t1]; reverse=True integrates the reversed
    field (tau -> -u(t1 - (tau - t0)))."""
    kappa = ens.kappa
    ids = np.arange(ens.n, dtype=np.uint64)
    segs = time_segments(f, t0, t1)
    if reverse:
        segs = segs[::-1]
    for sa, sb, active in segs:
        seg_len = sb - sa
        if active is None:
            if kappa > 0.0 and seg_len > 0:
                g = gaussian_pair(ens.seed, ids, np.uint64(ens.counter))
                ens.counter += 1
                ens.positions += math.sqrt(2.0 * kappa * seg_len) * g
                ens.positions %= 1.0
            continue
        slot, side, sign = active
        eff_sign = -sign if reverse else sign
        axis = _AXIS_OF[slot.orientation]
        peak = slot.cutoff.bump.amplitude
        n_sub = max(1, math.ceil(seg_len * peak
                                 / (policy.mass_fraction * slot.cutoff.full_mass())))
        if kappa > 0:
            dt_cap = slot.profile.moll.scale ** 2 / (8.0 * kappa)
            n_sub = max(n_sub, math.ceil(seg_len / dt_cap))
        n_sub = min(n_sub, policy.max_substeps)
        edges = np.linspace(sa, sb, n_sub + 1)
        if reverse:
            edges = edges[::-1]
        for i in range(n_sub):
            ta, tb = (edges[i + 1], edges[i]) if reverse else (edges[i], edges[i + 1])
            m = eff_sign * slot_mass_between(slot, side, ta, tb)
            dt = tb - ta
            if kappa > 0.0:
                g1 = gaussian_pair(ens.seed, ids, np.uint64(ens.counter))
                g2 = gaussian_pair(ens.seed, ids, np.uint64(ens.counter + 1))
                ens.counter += 2
                half = math.sqrt(kappa * dt)  # = sqrt(2 kappa (dt/2))
                ens.positions[:, 1 - axis] = (ens.positions[:, 1 - axis]
                                              + half * g1[:, 0]) % 1.0
                drift = m * slot.profile.value(ens.positions[:, 1 - axis])
                ens.positions[:, axis] = (ens.positions[:, axis] + drift
                                          + math.sqrt(2.0 * kappa * dt) * g1[:, 1]) % 1.0
                ens.positions[:, 1 - axis] = (ens.positions[:, 1 - axis]
                                              + half * g2[:, 0]) % 1.0
            else:
                drift = m * slot.profile.value(ens.positions[:, 1 - axis])
                ens.positions[:, axis] = (ens.positions[:, axis] + drift) % 1.0
            if ens.drift is not None:
                ens.drift[:, axis] += drift


def feynman_kac_estimate(f: VelocityFieldSpec, theta_in: Callable, x, t: float,
                         kappa: float, n: int, seed: int,
                         policy: Optional[SdePolicy] = None) -> tuple[float, float]:
    """Monte Carlo value of the scalar at (t, x): mean of theta_in over
    backward-path endpoints, with its standard error."""
    if n < 100:
        raise ContractViolation("need at least 100 paths")
    ends = backward_paths(f, np.asarray(x, dtype=float), t, kappa, n, seed, policy)
    vals = theta_in(ends[:, 0], ends[:, 1])
    est = float(np.mean(vals))
    return est, float(np.std(vals, ddof=1) / math.sqrt(n))


def occupancy_statistics(ens: ParticleEnsemble,
                         sets: dict[str, SetDescriptor]) -> dict[str, dict]:
    """Fraction of particles inside each set, with the 3-sigma binomial band."""
    out = {}
    for name, desc in sets.items():
        inside = membership(desc, ens.positions[:, 0], ens.positions[:, 1])
        frac = float(inside.mean())
        out[name] = {"fraction": frac,
                     "sigma3": 3.0 * math.sqrt(max(frac * (1 - frac), 1e-12) / ens.n)}
    return out


def window_displacement_stat(f: VelocityFieldSpec, n: int, q: int, kappa: float,
                             seed: int, threshold: float,
                             policy: Optional[SdePolicy] = None) -> dict:
    """Distribution of |int u(s, X_s) ds| over the window [1-T_q, 1+T_q].

    Reports the full-window statistic and the two sub-window statistics
    (before/after the singular time) without asserting which threshold
    constant is sharp.
    """
    sched = f.schedule
    if not (0 <= q < sched.q_max):
        raise ContractViolation("q out of range")
    policy = policy or SdePolicy(track_drift=True)
    policy.track_drift = True
    t_lo, t_hi = float(1 - sched.T[q]), float(1 + sched.T[q])
    ens = ParticleEnsemble.uniform(n, kappa, seed, time=t_lo)
    ens.reset_drift()
    sde_advance(ens, f, 1.0, policy)
    drift_first = ens.drift.copy()
    if f.extension != "forward_only":
        sde_advance(ens, f, t_hi, policy)
    drift_second = ens.drift - drift_first
    total = np.hypot(ens.drift[:, 0], ens.drift[:, 1])
    first = np.hypot(drift_first[:, 0], drift_first[:, 1])
    second = np.hypot(drift_second[:, 0], drift_second[:, 1])
    return {
        "fraction_below": float((total <= threshold).mean()),
        "fraction_below_sub": {
            "first": float((first <= threshold / 3.0).mean()),
            "second": float((second <= threshold / 3.0).mean()),
        },
        "median": float(np.median(total)),
        "p90": float(np.quantile(total, 0.9)),
        "threshold": threshold,
    }


def flow_lipschitz_estimate(f: VelocityFieldSpec, kappa: float, q: int,
                            n_omega: int, seed: int, h: float = 1e-4) -> dict:
    """Per-slot and per-stage Lipschitz ratios of the backward stochastic flow.

    For each active slot of stage q, probe pairs separated by h in the
    transverse coordinate share one Brownian path; the measured ratio
    max |X(x+h) - X(x)| / h is compared against 3 + int ||grad u|| dt.
    Composed over the stage, the bound is the product of the slot bounds.
    """
    sched = f.schedule
    slots = [s for s in f.slots if s.q == q]
    out = {"slots": [], "stage_measured": 1.0, "stage_bound": 1.0}
    rngids = np.arange(n_omega, dtype=np.uint64)
    for slot in slots:
        axis = _AXIS_OF[slot.orientation]
        base = uniform_points(seed ^ (slot.index * 1337 + q), rngids, 1).astype(float)
        xa = base.copy()
        xb = base.copy()
        xb[:, 1 - axis] = (xb[:, 1 - axis] + h) % 1.0
        ra = _slot_backward(slot, xa, kappa, seed, n_sub=64)
        rb = _slot_backward(slot, xb, kappa, seed, n_sub=64)
        diff = rb - ra
        diff -= np.rint(diff)
        ratios = np.hypot(diff[:, 0], diff[:, 1]) / h
        grad_l1 = slot.cutoff.full_mass() * slot.profile.grad_sup()
        bound = 3.0 + grad_l1
        out["slots"].append({"q": q, "slot": slot.index,
                             "measured": float(ratios.max()), "bound": bound})
        out["stage_bound"] *= bound
    # composed over the stage: push the same probe pairs through both slots
    base = uniform_points(seed ^ 0xBEEF, rngids, 2).astype(float)
    for axis_off in (0, 1):
        xa = base.copy()
        xb = base.copy()
        xb[:, axis_off] = (xb[:, axis_off] + h) % 1.0
        for slot in slots:
            xa = _slot_backward(slot, xa, kappa, seed + 7, n_sub=64)
            xb = _slot_backward(slot, xb, kappa, seed + 7, n_sub=64)
        diff = xb - xa
        diff -= np.rint(diff)
        ratios = np.hypot(diff[:, 0], diff[:, 1]) / h
        out["stage_measured"] = max(out["stage_measured"], float(ratios.max()))
    return out


def _slot_backward(slot, x: np.ndarray, kappa: float, seed: int,
                   n_sub: int) -> np.ndarray:
    """Backward stochastic flow across one slot (shared noise per seed)."""
    x = x.copy()
    axis = _AXIS_OF[slot.orientation]
    ids = np.arange(x.shape[0], dtype=np.uint64)
    edges = np.linspace(slot.t_hi, slot.t_lo, n_sub + 1)
    dt = (slot.t_hi - slot.t_lo) / n_sub
    for i in range(n_sub):
        m = -slot.cutoff.mass_between(edges[i + 1], edges[i])
        if kappa > 0.0:
            g1 = gaussian_pair(seed, ids, np.uint64(2 * i))
            g2 = gaussian_pair(seed, ids, np.uint64(2 * i + 1))
            half = math.sqrt(kappa * dt)
            x[:, 1 - axis] = (x[:, 1 - axis] + half * g1[:, 0]) % 1.0
            x[:, axis] = (x[:, axis] + m * slot.profile.value(x[:, 1 - axis])
                          + math.sqrt(2.0 * kappa * dt) * g1[:, 1]) % 1.0
            x[:, 1 - axis] = (x[:, 1 - axis] + half * g2[:, 0]) % 1.0
        else:
            x[:, axis] = (x[:, axis] + m * slot.profile.value(x[:, 1 - axis])) % 1.0
    return x


def brownian_sup_frequency(c: float, kappa: float, T: float, n: int, seed: int,
                           n_steps: int = 512) -> dict:
    """Empirical frequency of sup_{[0,T]} sqrt(2 kappa) |W_t| <= c per axis.

    Compared against the reflection bound 1 - 2 exp(-c^2/(2 kappa T)); the
    discrete sup slightly undershoots the continuous one, which only makes
    the test conservative... the bound must still hold within 3 MC sigma.
    """
    ids = np.arange(n, dtype=np.uint64)
    dt = T / n_steps
    w = np.zeros(n)
    sup = np.zeros(n)
    for i in range(n_steps):
        g = gaussian_pair(seed, ids, np.uint64(i))[:, 0]
        w += math.sqrt(dt) * g
        sup = np.maximum(sup, np.abs(w))
    ok = math.sqrt(2.0 * kappa) * sup <= c
    freq = float(ok.mean())
    bound = 1.0 - 2.0 * math.exp(-c * c / (2.0 * kappa * T))
    sigma = math.sqrt(max(freq * (1 - freq), 1e-12) / n)
    return {"frequency": freq, "bound": bound, "sigma_mc": sigma,
            "passes": freq >= bound - 3.0 * sigma}
