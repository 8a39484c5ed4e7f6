"""The cascade velocity field: shear profiles, time cutoffs, assembly.

Every stage q of the cascade acts on the interval ``I_q = (1-T_q, 1-T_{q+1}]``
through an idle window and three slots:

* slot 0 (window, length tbar_q) and slot 1: the field vanishes;
* slot 2: a horizontal shear whose 1D profile alternates sign at the fine
  scale ``a_{q+1}`` and flips across coarse strips of height ``a_q``; its
  time-integrated displacement on plateaus is exactly ``+- a_q / 2``;
* slot 3: a vertical shear with values in {0, amplitude}; displacement 0 or
  ``a_{q+1}``.

For t in (1,2) the field is the exact reflection ``u(t,x) = -u(2-t,x)``;
in swap mode an extra horizontal shear (exactly ``2 a_{q+1}``-periodic,
displacement ``+- a_q``) rides in the mirrored slot 1, where the reflected
field vanishes.  All profiles are mollified at the stage's kernel scale, so
the field is smooth away from t=1 and locally constant on the restricted
chessboard sets.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field as dfield
from fractions import Fraction
from typing import Callable, Iterable, Literal, Optional

import numpy as np

from .errors import (ContractViolation, DegenerateFieldError, SingularTimeError,
                     ValidationError)
from .geometry import square_wave
from .kernels import FlatTopBump, MollifierSpec, mollify_lattice_profile
from .params import CascadeSchedule

Extension = Literal["forward_only", "reflect", "reflect_with_swap"]


@dataclass(frozen=True)
class Profile1D:
    """A 1D shear profile: piecewise constant on the fine lattice, mollified.

    ``kind`` fixes the closed form:
      mix_h: amplitude * strip_sign(y) * W(y / (2 a_fine)), strips of height
             a_coarse; anti-periodic under y -> y + a_coarse.
      mix_v: amplitude * (1 +- W)/2 with the branch flipping across strips
             offset by half a coarse cell; values in {0, amplitude}.
      swap:  amplitude * W, exactly 2 a_fine periodic.
    """

    kind: str
    a_coarse: float
    a_fine: float
    amplitude: float
    moll: MollifierSpec

    def __post_init__(self):
        if self.kind not in ("mix_h", "mix_v", "swap"):
            raise ValidationError(f"unknown profile kind {self.kind}")

    def raw(self, y):
        y = np.asarray(y, dtype=float)
        w = square_wave(y / (2.0 * self.a_fine))
        if self.kind == "mix_h":
            strip = np.where(np.floor(y / self.a_coarse) % 2 == 0, 1.0, -1.0)
            return self.amplitude * strip * w
        if self.kind == "swap":
            return self.amplitude * w
        branch = np.floor(y / self.a_coarse + 0.5) % 2 == 0
        return self.amplitude * np.where(branch, 0.5 * (1.0 + w), 0.5 * (1.0 - w))

    def value(self, y):
        """Mollified profile (exact plateaus, kernel-CDF collars)."""
        return mollify_lattice_profile(np.asarray(y, dtype=float) % 1.0,
                                       self.a_fine, self.raw, self.moll)

    def in_collar(self, y) -> np.ndarray:
        """True where y lies within the mollification collar of a jump."""
        y = np.asarray(y, dtype=float) % 1.0
        d = np.round(y / self.a_fine) * self.a_fine
        return np.abs(y - d) < self.moll.support_radius

    def jump_period(self) -> float:
        return self.a_fine

    def structure_period(self) -> float:
        return 2.0 * self.a_coarse

    def sup_bound(self) -> float:
        return self.amplitude

    def grad_sup(self, n: int = 4096) -> float:
        """Measured sup of |d/dy| over one fine period plus collar."""
        y = np.linspace(-2 * self.moll.support_radius,
                        self.a_fine + 2 * self.moll.support_radius, n)
        v = self.value(y % 1.0)
        return float(np.abs(np.diff(v) / np.diff(y)).max())


@dataclass(frozen=True)
class TimeCutoff:
    """Nonnegative smooth bump supported in the 1/6-restricted slot.

    Exact mass (closed form of the flat-top shape); C^k norms are measured
    on a fine grid by ``measured_ck``.  The paper-shaped budgets are
    ``a_q^(-2 k gamma)``-like for the mixing slots and one power less for the
    swap slot; the desk analogue records measured values against
    ``(1/t_q)^k`` references.
    """

    t_lo: float
    t_hi: float
    mass: float
    k_max: int = 2

    def __post_init__(self):
        if self.t_hi <= self.t_lo:
            raise ValidationError("empty cutoff support")

    @property
    def bump(self) -> FlatTopBump:
        length = self.t_hi - self.t_lo
        return FlatTopBump(center=0.5 * (self.t_lo + self.t_hi),
                           half_width=length / 3.0, mass=self.mass)

    def __call__(self, t):
        return self.bump(np.asarray(t, dtype=float))

    def mass_between(self, ta: float, tb: float) -> float:
        """Exact integral of the cutoff over [ta, tb] (piecewise polynomial)."""
        if tb <= ta:
            return 0.0
        b = self.bump
        c, hw, r = b.center, b.half_width, b.rise
        brk = sorted({c - hw, c - hw + r * hw, c + hw - r * hw, c + hw,
                      max(ta, c - hw), min(tb, c + hw)})
        lo = max(ta, c - hw)
        hi = min(tb, c + hw)
        if hi <= lo:
            # full-support requests must return the exact mass
            return 0.0
        gn, gw = np.polynomial.legendre.leggauss(8)
        total = 0.0
        pieces = [x for x in brk if lo <= x <= hi]
        for p0, p1 in zip(pieces[:-1], pieces[1:]):
            if p1 <= p0:
                continue
            mid, half = 0.5 * (p0 + p1), 0.5 * (p1 - p0)
            total += float(np.dot(gw, b(mid + half * gn)) * half)
        return total

    def full_mass(self) -> float:
        return self.mass

    def measured_ck(self, k: int) -> float:
        return self.bump.measure_ck(k)


@dataclass(frozen=True)
class Slot:
    """One concrete active slot of the forward field (I-side)."""

    q: int
    index: int  # 2, 3 (mixing) or 1 (swap, J-side only)
    t_lo: float
    t_hi: float
    cutoff: TimeCutoff
    profile: Profile1D
    orientation: str  # 'h': u = (f(x2), 0);  'v': u = (0, f(x1))

    def displacement_target(self) -> float:
        return self.cutoff.full_mass() * self.profile.amplitude


@dataclass
class VelocityFieldSpec:
    """The assembled cascade field plus its extension past t=1.

    Only forward (I-side) slots and swap slots are stored; for t in (1,2) the
    non-swap part is evaluated as ``-u(2-t, x)``, which makes the reflection
    identity exact by construction.
    """

    schedule: CascadeSchedule
    extension: Extension
    slots: list[Slot]
    swap_slots: list[Slot]

    def __post_init__(self):
        self._starts = [s.t_lo for s in self.slots]
        self._swap_starts = [s.t_lo for s in self.swap_slots]

    # -- slot lookup --------------------------------------------------------
    def forward_slot_at(self, t: float) -> Optional[Slot]:
        i = bisect.bisect_right(self._starts, t) - 1
        if i >= 0 and t <= self.slots[i].t_hi:
            return self.slots[i]
        return None

    def swap_slot_at(self, t: float) -> Optional[Slot]:
        i = bisect.bisect_right(self._swap_starts, t) - 1
        if i >= 0 and t <= self.swap_slots[i].t_hi:
            return self.swap_slots[i]
        return None

    def concrete_slots(self) -> list[tuple]:
        """All active slots over (0,2) as (t_lo, t_hi, slot, side, sign).

        side 'I' slots evaluate as sign * eta(t) * profile; side 'J' slots as
        sign * eta(2-t) * profile.  Swap slots appear only in swap mode.
        """
        out = []
        for s in self.slots:
            out.append((s.t_lo, s.t_hi, s, "I", 1.0))
        if self.extension in ("reflect", "reflect_with_swap"):
            for s in self.slots:
                out.append((2.0 - s.t_hi, 2.0 - s.t_lo, s, "J", -1.0))
        if self.extension == "reflect_with_swap":
            for s in self.swap_slots:
                out.append((s.t_lo, s.t_hi, s, "S", 1.0))
        return sorted(out, key=lambda r: r[0])

    def time_horizon(self) -> float:
        return 1.0 if self.extension == "forward_only" else 2.0


def build_field(sched: CascadeSchedule, extension: Extension = "forward_only",
                ) -> VelocityFieldSpec:
    """Assemble the cascade field from a desk schedule.

    Raises DegenerateFieldError for an empty cascade and ValidationError for
    strict-mode schedules (validation-only; their scales cannot be floated).
    """
    if sched.q_max < 1:
        raise DegenerateFieldError("cascade has no stages (q_max = 0)")
    if sched.mode == "paper_strict":
        raise ValidationError("paper_strict schedules are validation-only; "
                              "build fields from desk schedules")
    slots: list[Slot] = []
    swap_slots: list[Slot] = []
    for q in range(sched.q_max):
        a_c, a_f = sched.a_f[q], sched.a_f[q + 1]
        t_q = sched.t_f[q]
        moll = MollifierSpec(sched.moll_scale_f[q + 1])
        mass = 0.5 * t_q
        b = [float(x) for x in sched.stage_breaks(q)]
        # slot 2: horizontal mixing shear, displacement +- a_q/2
        prof_h = Profile1D("mix_h", a_c, a_f, amplitude=0.5 * a_c / mass, moll=moll)
        cut2 = TimeCutoff(b[2] + t_q / 6.0, b[3] - t_q / 6.0, mass)
        slots.append(Slot(q, 2, b[2], b[3], cut2, prof_h, "h"))
        # slot 3: vertical mixing shear, displacement 0 or a_{q+1}
        prof_v = Profile1D("mix_v", a_c, a_f, amplitude=a_f / mass, moll=moll)
        cut3 = TimeCutoff(b[3] + t_q / 6.0, b[4] - t_q / 6.0, mass)
        slots.append(Slot(q, 3, b[3], b[4], cut3, prof_v, "v"))
        if extension == "reflect_with_swap":
            # swap slot rides in J_{q,1} = 2 - I_{q,1}; displacement +- a_q
            j_lo, j_hi = 2.0 - b[2], 2.0 - b[1]
            prof_s = Profile1D("swap", a_c, a_f, amplitude=a_c / mass, moll=moll)
            cut1 = TimeCutoff(j_lo + t_q / 6.0, j_hi - t_q / 6.0, mass)
            swap_slots.append(Slot(q, 1, j_lo, j_hi, cut1, prof_s, "h"))
    return VelocityFieldSpec(schedule=sched, extension=extension,
                             slots=slots, swap_slots=swap_slots)


def eval_velocity(f: VelocityFieldSpec, t: float, x1, x2):
    """Velocity (u1, u2) at time t, vectorized over positions.

    t = 1 raises SingularTimeError; idle times return zeros.  For t > 1 the
    non-swap part is computed as the exact reflection -u(2-t,x).
    """
    if t == 1.0:
        raise SingularTimeError("the velocity field is undefined at t = 1")
    if not (0.0 < t < 2.0):
        raise ContractViolation(f"time {t} outside (0,2)")
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    u1 = np.zeros(np.broadcast(x1, x2).shape)
    u2 = np.zeros_like(u1)
    if t > 1.0 and f.extension == "forward_only":
        raise ContractViolation("forward_only field is defined for t in (0,1)")
    sign, tt = (1.0, t) if t < 1.0 else (-1.0, 2.0 - t)
    slot = f.forward_slot_at(tt)
    if slot is not None:
        eta = float(slot.cutoff(tt))
        if eta != 0.0:
            if slot.orientation == "h":
                u1 = u1 + sign * eta * slot.profile.value(x2)
            else:
                u2 = u2 + sign * eta * slot.profile.value(x1)
    if t > 1.0 and f.extension == "reflect_with_swap":
        sw = f.swap_slot_at(t)
        if sw is not None:
            eta = float(sw.cutoff(t))
            if eta != 0.0:
                u1 = u1 + eta * sw.profile.value(x2)
    return u1, u2


def slot_displacement(f: VelocityFieldSpec, q: int, which: str, x_perp):
    """Exact time-integrated displacement of a slot at transverse coordinate.

    which: 'mix_h' (slot 2), 'mix_v' (slot 3) or 'swap'.  Returns
    ``(value, in_collar)``: on the good region the value is exactly
    +-a_q/2, {0, a_{q+1}} or +-a_q respectively; inside a mollification
    collar the value interpolates and the flag warns.
    """
    if which == "swap":
        cands = [s for s in f.swap_slots if s.q == q]
        if not cands:
            raise ContractViolation(f"no swap slot at stage {q} (extension={f.extension})")
        slot = cands[0]
    else:
        idx = 2 if which == "mix_h" else 3
        cands = [s for s in f.slots if s.q == q and s.index == idx]
        if not cands:
            raise ContractViolation(f"no slot {which} at stage {q}")
        slot = cands[0]
    disp = slot.cutoff.full_mass() * slot.profile.value(x_perp)
    return disp, slot.profile.in_collar(x_perp)


def slot_mass_between(slot: Slot, side: str, ta: float, tb: float) -> float:
    """Cutoff mass of a concrete slot over [ta, tb] (side 'J' is mirrored)."""
    if side in ("I", "S"):
        return slot.cutoff.mass_between(ta, tb)
    return slot.cutoff.mass_between(2.0 - tb, 2.0 - ta)


def time_segments(f: VelocityFieldSpec, t0: float, t1: float) -> list[tuple]:
    """Chop [t0,t1] into maximal idle / single-slot segments.

    Yields (a, b, active) with active None or (slot, side, sign).
    """
    events = {t0, t1}
    slots = []
    for lo, hi, slot, side, sign in f.concrete_slots():
        if hi <= t0 or lo >= t1:
            continue
        events.add(max(lo, t0))
        events.add(min(hi, t1))
        slots.append((lo, hi, slot, side, sign))
    cuts = sorted(events)
    segs = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 0:
            continue
        mid = 0.5 * (a + b)
        active = None
        for lo, hi, slot, side, sign in slots:
            if lo < mid < hi:
                active = (slot, side, sign)
                break
        segs.append((a, b, active))
    return segs


# ---------------------------------------------------------------------------
# Norm reporting


def field_norm_report(f: VelocityFieldSpec, p: float = 2.0, alpha: float = 0.5,
                      ) -> dict:
    """Per-slot sup/Lipschitz norms and the L^p-in-time C^alpha aggregate.

    The C^alpha norm is interpolated, ||u||_C^a <= sup^(1-a) * lip^a, and the
    time integral uses the exact cutoff masses.  The per-stage contributions
    are listed so their decay (the convergence test for the aggregate) can be
    inspected; the flag ``aggregate_diverging`` is set when contributions
    grow with the stage.
    """
    per_slot = []
    stage_contrib: dict[int, float] = {}
    for s in f.slots:
        sup_eta = s.cutoff.bump.amplitude
        sup = sup_eta * s.profile.sup_bound()
        lip = sup_eta * s.profile.grad_sup()
        calpha = sup ** (1 - alpha) * max(lip, sup) ** alpha
        # int eta^p dt over the slot, exact for the flat-top shape
        tgrid = np.linspace(s.t_lo, s.t_hi, 2049)
        eta_p = np.trapezoid(s.cutoff(tgrid) ** p, tgrid)
        contrib = eta_p * (s.profile.sup_bound() ** (1 - alpha)
                           * max(s.profile.grad_sup(), s.profile.sup_bound()) ** alpha) ** p
        per_slot.append({"q": s.q, "slot": s.index, "sup": sup, "lip": lip,
                         "c_alpha": calpha, "lp_contrib": contrib})
        stage_contrib[s.q] = stage_contrib.get(s.q, 0.0) + 2 * contrib  # I and J sides
    contribs = [stage_contrib[q] for q in sorted(stage_contrib)]
    diverging = any(b > a for a, b in zip(contribs, contribs[1:]))
    total = sum(contribs)
    return {
        "per_slot": per_slot,
        "stage_lp_contributions": contribs,
        "lp_calpha_partial": total ** (1.0 / p),
        "aggregate_diverging": diverging,
        "p": p, "alpha": alpha,
    }


def strict_lp_exponent_test(ps, alpha: Fraction) -> bool:
    """Exact-rational convergence test for ||u||_{L^p C^alpha} in strict mode:
    gamma/p + 1 - gamma - alpha (1 + eps delta)(1 + delta) > 0."""
    inv_p = ps.inv_p()
    lhs = ps.gamma * inv_p + 1 - ps.gamma - alpha * (1 + ps.epsilon * ps.delta) * (1 + ps.delta)
    return lhs > 0
