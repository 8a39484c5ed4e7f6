"""Cascade parameters: exact-rational constraint system and schedule derivation.

Two modes share one schedule structure:

* ``paper_strict`` -- exponents are exact rationals and every scale is an
  exact power ``a0**e`` of the base scale.  The base scale itself is
  astronomically small (its float image underflows), so all constraint
  verdicts are computed in the exponent domain (log-domain rational
  comparison on the common base) and never touch floating point.
* ``desk`` -- scales are explicit dyadic rationals with integer stage ratios
  in 4N, small enough to put on a grid.  Paper constraints that the desk
  preset relaxes are reported as such instead of enforced.

Times: each cascade stage q occupies ``I_q = (1 - T_q, 1 - T_{q+1}]``, split
into an idle window of length ``tbar_q`` (zero off the lacunary subsequence
q in mN) followed by three slots of length ``t_q``.  The mirrored intervals
``J_q = 2 - I_q`` tile the other side of the singular time.  Schedules are
truncated: T at the deepest stage is exactly zero, so the intervals tile
``(0, 2) \\ {1}`` with no gap, and the analytic tail the infinite schedule
would have added is reported as a bound instead.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, lcm
from typing import Optional, Sequence

from .errors import ScheduleError, ValidationError

Frac = Fraction

ONE = Fraction(1)


def safe_float(x) -> float:
    """float(x) that degrades to 0.0 / inf instead of raising for huge rationals."""
    if isinstance(x, PowerValue):
        return x.as_float()
    try:
        return float(x)
    except OverflowError:
        if isinstance(x, Fraction):
            bits = x.numerator.bit_length() - x.denominator.bit_length()
            return float("inf") if bits > 0 else 0.0
        raise


def _repr_exact(x) -> str:
    """Short exact-ish representation that never stringifies huge integers."""
    if isinstance(x, PowerValue):
        return f"{x.coef}*({x.base})**({x.exponent})"
    if isinstance(x, Fraction):
        if x.numerator.bit_length() < 256 and x.denominator.bit_length() < 256:
            return str(x)
        bits = x.numerator.bit_length() - x.denominator.bit_length()
        return f"~2**{bits}"
    return str(x)


def _as_frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    raise ValidationError(f"cannot interpret {x!r} as an exact rational")


@dataclass(frozen=True)
class PowerValue:
    """Exact value ``coef * base**exponent`` with rational base in (0,1).

    Strict-mode scales underflow any float, so values of this common-base form
    are kept in the log domain and compared through their exponents: for
    base < 1 and equal coefficients, ``base**e1 <= base**e2  iff  e1 >= e2``.
    """

    base: Fraction
    exponent: Fraction
    coef: Fraction = ONE

    def __post_init__(self):
        if not (0 < self.base < 1):
            raise ValidationError("PowerValue base must lie in (0,1)")
        if self.coef <= 0:
            raise ValidationError("PowerValue coefficient must be positive")

    def pow(self, r) -> "PowerValue":
        if self.coef != 1:
            raise ValidationError("pow only supported for coefficient-free values")
        return PowerValue(self.base, self.exponent * _as_frac(r))

    def scaled(self, c) -> "PowerValue":
        return PowerValue(self.base, self.exponent, self.coef * _as_frac(c))

    def mul(self, other: "PowerValue") -> "PowerValue":
        if other.base != self.base:
            raise ValidationError("PowerValue product requires a common base")
        return PowerValue(self.base, self.exponent + other.exponent,
                          self.coef * other.coef)

    def le(self, other: "PowerValue") -> bool:
        if other.base != self.base:
            raise ValidationError("PowerValue comparison requires a common base")
        if self.coef == other.coef:
            return self.exponent >= other.exponent
        # coef1 * b^e1 <= coef2 * b^e2  iff  b^(e1-e2) <= coef2/coef1; decide
        # by integer powers when cheap, else by logs (margins here are huge).
        de = self.exponent - other.exponent
        ratio = other.coef / self.coef
        if abs(de.numerator) < 4096 and de.denominator < 64:
            return self.base**de.numerator <= ratio**de.denominator
        import math

        return float(de) * math.log(float(self.base)) <= math.log(float(ratio))

    def materialize(self) -> Fraction:
        """Exact Fraction; requires an integer exponent (may be a huge rational)."""
        e = self.exponent
        if e.denominator != 1:
            raise ValidationError(
                f"cannot materialize {self.base}**{e}: exponent is not an integer"
            )
        return self.coef * self.base ** int(e)

    def as_float(self) -> float:
        import math

        try:
            return float(self.coef) * math.exp(
                float(self.exponent) * math.log(float(self.base)))
        except OverflowError:
            return 0.0

    def __float__(self) -> float:
        return self.as_float()


@dataclass
class ParameterSet:
    """Exponents of the construction plus the base scale.

    ``p`` is the time integrability of the velocity field (None means
    infinity), ``p_circ`` the time integrability of the scalar; they are tied
    by the Yaglom relation 1/p + 2/p_circ = 1.  ``alpha``/``beta`` are the
    spatial Hoelder exponents of field and scalar, ``epsilon``/``delta`` the
    small construction exponents, ``gamma`` the time-scaling exponent, ``m``
    the lacunarity of the idle windows and ``a0`` the base spatial scale.
    """

    p: Optional[Fraction]
    p_circ: Fraction
    alpha: Fraction
    beta: Fraction
    epsilon: Fraction
    delta: Fraction
    gamma: Fraction
    m: int
    a0: PowerValue | Fraction
    mode: str = "paper_strict"  # or "desk"
    desk: Optional["DeskSpec"] = None

    def inv_p(self) -> Fraction:
        return Fraction(0) if self.p is None else 1 / self.p

    def a0_power(self, e) -> PowerValue:
        if isinstance(self.a0, PowerValue):
            return self.a0.pow(e)
        return PowerValue(self.a0, _as_frac(e))


@dataclass
class DeskSpec:
    """Explicit dyadic cascade data for grid-scale runs.

    ``ratios[q] = a_q / a_{q+1}`` must be integer multiples of 4 so each
    chessboard refines the previous one.  ``t``/``tbar`` are the slot and idle
    window lengths, ``moll_scale[q]`` the spatial mollification scale of the
    stage-q kernel (the desk stand-in for the strict a_q^{1+eps*delta}), and
    ``restriction_factor`` scales the good-set restriction (paper constant:
    5/2 of the mollification scale, i.e. 5 a_q^{1+eps*delta} against a kernel
    of support radius twice the scale).
    """

    a0: Fraction
    ratios: list[int]
    t: list[Fraction]
    tbar: list[Fraction]
    moll_scale: list[Fraction]
    restriction_factor: Fraction = Fraction(5, 2)

    def __post_init__(self):
        self.a0 = _as_frac(self.a0)
        self.t = [_as_frac(x) for x in self.t]
        self.tbar = [_as_frac(x) for x in self.tbar]
        self.moll_scale = [_as_frac(x) for x in self.moll_scale]
        self.restriction_factor = _as_frac(self.restriction_factor)


@dataclass
class ConstraintEntry:
    name: str
    satisfied: bool
    enforced: bool
    margin: Optional[Fraction]
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "satisfied": self.satisfied,
            "enforced": self.enforced,
            "margin": None if self.margin is None else str(self.margin),
            "margin_float": None if self.margin is None else float(self.margin),
            "detail": self.detail,
        }


@dataclass
class ConstraintReport:
    mode: str
    entries: list[ConstraintEntry] = field(default_factory=list)

    def add(self, name, satisfied, margin=None, enforced=True, detail=""):
        self.entries.append(ConstraintEntry(name, bool(satisfied), enforced, margin, detail))

    @property
    def passed(self) -> bool:
        return all(e.satisfied for e in self.entries if e.enforced)

    def relaxed(self) -> list[str]:
        return [e.name for e in self.entries if not e.enforced]

    def __getitem__(self, name: str) -> ConstraintEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def as_table(self) -> str:
        rows = [f"{'constraint':<28} {'status':<8} {'enforced':<9} margin"]
        for e in self.entries:
            status = "pass" if e.satisfied else "FAIL"
            m = "-" if e.margin is None else f"{float(e.margin):.6g}"
            rows.append(f"{e.name:<28} {status:<8} {str(e.enforced):<9} {m}")
        return "\n".join(rows)

    def to_json(self) -> str:
        return json.dumps(
            {"mode": self.mode, "passed": self.passed,
             "entries": [e.as_dict() for e in self.entries]},
            indent=2,
        )


def gamma_formula(p_circ: Fraction, beta: Fraction, epsilon: Fraction,
                  delta: Fraction) -> Fraction:
    """Time-scaling exponent tied to the scalar regularity target."""
    return (p_circ * beta * (1 + 3 * epsilon * (1 + delta)) * (1 + delta)
            / (1 - delta) + delta / 8)


def _structural_check(ps: ParameterSet, rep: ConstraintReport) -> None:
    inv_p = ps.inv_p()
    if ps.p is not None and ps.p < 2:
        raise ValidationError("p must satisfy p >= 2")
    if not (2 <= ps.p_circ <= 4):
        raise ValidationError("p_circ must lie in [2, 4]")
    if not (0 <= ps.alpha <= 1):
        raise ValidationError("alpha must lie in [0, 1]")
    if not (0 <= ps.beta <= Fraction(1, 2)):
        raise ValidationError("beta must lie in [0, 1/2]")
    if not (0 < ps.epsilon <= Fraction(1, 4)):
        raise ValidationError("epsilon must lie in (0, 1/4]")
    if not (0 < ps.delta <= Fraction(1, 4)):
        raise ValidationError("delta must lie in (0, 1/4]")
    if ps.gamma <= 0:
        raise ValidationError("gamma must be positive")
    if ps.m < 1:
        raise ValidationError("m must be a positive integer")

    rep.add("yaglom_exact", inv_p + 2 / ps.p_circ == 1,
            margin=1 - inv_p - 2 / ps.p_circ,
            detail="1/p + 2/p_circ = 1 (exact)")
    rep.add("supercritical", ps.alpha + 2 * ps.beta < 1,
            margin=1 - ps.alpha - 2 * ps.beta,
            detail="alpha + 2*beta < 1")


def validate_constraints(ps: ParameterSet) -> ConstraintReport:
    """Check the full constraint system; exact rationals only, no floats.

    In ``paper_strict`` mode every inequality is enforced.  In ``desk`` mode
    the structural inequalities are enforced and the strict smallness
    conditions are evaluated where meaningful but reported as relaxed.
    """
    rep = ConstraintReport(mode=ps.mode)
    _structural_check(ps, rep)
    strict = ps.mode == "paper_strict"
    e, d = ps.epsilon, ps.delta

    f1 = (1 + 3 * e * (1 + d)) * (1 + d) / (1 - d)
    lhs_a = 1 - 2 * ps.beta * f1 - ps.alpha * (1 + e * d) * (1 + d) - d / 8
    rep.add("holder_budget_7a", lhs_a > 0, margin=lhs_a, enforced=strict,
            detail="1 - 2b(1+3e(1+d))(1+d)/(1-d) - a(1+ed)(1+d) - d/8 > 0")

    lhs_b = ps.p_circ * ps.beta * f1 + d / 8
    rep.add("time_budget_7b", lhs_b < 2, margin=2 - lhs_b, enforced=strict,
            detail="p_circ*b*(1+3e(1+d))(1+d)/(1-d) + d/8 < 2")

    rep.add("eps_cube_7c", e <= d**3 / 50, margin=d**3 / 50 - e, enforced=strict,
            detail="epsilon <= delta^3 / 50")

    g = gamma_formula(ps.p_circ, ps.beta, e, d)
    rep.add("gamma_formula", ps.gamma == g, margin=ps.gamma - g, enforced=strict,
            detail="gamma matches the time-scaling formula")

    m_need = Fraction(16) / d**2
    rep.add("window_lacunarity_m", ps.m - 1 >= m_need,
            margin=Fraction(ps.m - 1) - m_need, enforced=strict,
            detail="m - 1 >= 16/delta^2")
    # Derived variant used downstream (gamma >= d/8 >= 2/(d(m-1))); recorded
    # separately, never a substitute for the stated constraint above.
    rep.add("window_lacunarity_derived",
            ps.gamma >= d / 8 and d * (ps.m - 1) * (d / 8) >= 2,
            margin=None, enforced=False,
            detail="gamma >= delta/8 and delta^2 (m-1) >= 16 (derived form)")

    # Base-scale smallness: a0^(e d / 8) <= 1/20.
    if isinstance(ps.a0, PowerValue):
        if ps.a0.base != Fraction(1, 20):
            raise ValidationError("strict a0 must be expressed on base 1/20")
        ok = ps.a0.exponent * e * d / 8 >= 1
        margin = ps.a0.exponent * e * d / 8 - 1
        rep.add("a0_smallness", ok, margin=margin, enforced=strict,
                detail="a0^(eps*delta/8) <= 1/20, exponent-domain")
    else:
        a0 = ps.a0
        if not (0 < a0 < 1):
            raise ValidationError("a0 must lie in (0,1)")
        ed8 = e * d / 8
        # a0^(n/m) <= 1/20  iff  a0^n <= (1/20)^m  (integer powers, exact)
        n, mden = ed8.numerator, ed8.denominator
        ok = a0**n <= Fraction(1, 20) ** mden
        rep.add("a0_smallness", ok, margin=None, enforced=strict,
                detail="a0^(eps*delta/8) <= 1/20, integer-power comparison")

    if strict and isinstance(ps.a0, Fraction):
        raise ValidationError(
            "paper_strict a0 must be a PowerValue (its float/fraction form is "
            "astronomically small); use make_strict_parameters")
    if ps.mode == "desk" and ps.desk is None:
        raise ValidationError("desk mode requires a DeskSpec in field 'desk'")
    return rep


def infeasibility_certificate(alpha: Fraction, beta: Fraction) -> Optional[str]:
    """A proof that no (epsilon, delta) can satisfy the budget when a+2b >= 1.

    Both correction factors in the Hoelder budget are > 1 for any positive
    epsilon, delta, so its left side is < 1 - alpha - 2*beta - delta/8 < 0.
    """
    if alpha + 2 * beta < 1:
        return None
    return (
        f"alpha + 2*beta = {alpha + 2 * beta} >= 1: for every epsilon, delta > 0 "
        "the factors (1+3e(1+d))(1+d)/(1-d) and (1+ed)(1+d) both exceed 1, hence "
        "the Hoelder budget is bounded above by 1 - alpha - 2*beta - delta/8 < 0; "
        "constraint 7a fails for every choice."
    )


def search_exponents(alpha, beta, p=None, p_circ=None, k_max: int = 12):
    """Exact dyadic grid search for (epsilon, delta) satisfying the system.

    Scans delta in {2^-2 .. 2^-k_max} and for each takes the largest dyadic
    epsilon below delta^3/50, then checks the full system exactly.  Returns a
    ParameterSet in paper_strict mode, or raises ValidationError carrying the
    infeasibility certificate when alpha + 2*beta >= 1.
    """
    alpha, beta = _as_frac(alpha), _as_frac(beta)
    cert = infeasibility_certificate(alpha, beta)
    if cert is not None:
        raise ValidationError(cert)
    if p_circ is None and p is None:
        p_circ = Fraction(2)
    elif p_circ is None:
        p = _as_frac(p)
        p_circ = 2 / (1 - 1 / p)
    p_circ = _as_frac(p_circ)
    if p is None and p_circ != 2:
        p = 1 / (1 - 2 / p_circ)  # Yaglom conjugate; p_circ == 2 keeps p = inf
    p = None if p is None else _as_frac(p)

    for k in range(2, k_max + 1):
        d = Fraction(1, 2**k)
        cap = d**3 / 50
        j = 2
        while Fraction(1, 2**j) > cap:
            j += 1
        e = Fraction(1, 2**j)
        ps = make_strict_parameters(alpha=alpha, beta=beta, p=p, p_circ=p_circ,
                                    epsilon=e, delta=d)
        rep = validate_constraints(ps)
        if rep.passed:
            return ps, rep
    raise ValidationError(
        f"no (epsilon, delta) on the dyadic grid up to 2^-{k_max} satisfies the "
        f"system for alpha={alpha}, beta={beta}")


def make_strict_parameters(alpha, beta, p, p_circ, epsilon, delta,
                           q_max_hint: int = 4) -> ParameterSet:
    """Assemble a paper_strict ParameterSet with derived gamma, m, a0.

    a0 is taken as (1/20)**K with K the smallest admissible integer that (a)
    meets the smallness condition K >= 8/(eps*delta) and (b) keeps the
    schedule exponents integral up to q_max_hint stages, so the schedule can
    be materialized with exact Fractions on demand.
    """
    alpha, beta = _as_frac(alpha), _as_frac(beta)
    p = None if p is None else _as_frac(p)
    p_circ, epsilon, delta = _as_frac(p_circ), _as_frac(epsilon), _as_frac(delta)
    gamma = gamma_formula(p_circ, beta, epsilon, delta)
    m = int(ceil(16 / (delta * delta))) + 1
    need = [Fraction(1)]
    opd = 1 + delta
    for q in range(q_max_hint + 2):
        eq = opd**q
        need += [eq, gamma * eq, (gamma - gamma * delta) * eq]
    denom_lcm = lcm(*[x.denominator for x in need])
    k0 = ceil(Fraction(8) / (epsilon * delta))
    K = ((k0 + denom_lcm - 1) // denom_lcm) * denom_lcm
    a0 = PowerValue(Fraction(1, 20), Fraction(K))
    return ParameterSet(p=p, p_circ=p_circ, alpha=alpha, beta=beta,
                        epsilon=epsilon, delta=delta, gamma=gamma, m=m, a0=a0,
                        mode="paper_strict")


# ---------------------------------------------------------------------------
# Schedules


@dataclass
class CascadeSchedule:
    """Derived cascade data: scales, frequencies, times and interval endpoints.

    Arrays ``a``/``lam``/``moll_scale``/``restriction`` have length
    ``q_max + 1`` (levels 0..q_max); ``t``/``tbar`` have length ``q_max``
    (stages 0..q_max-1, stage q moving scale a_q to a_{q+1}); ``T`` has
    length ``q_max + 1`` with ``T[q_max] == 0`` exactly (truncation).  All
    entries are exact rationals; ``*_f`` mirrors are float conveniences.
    """

    mode: str
    q_max: int
    m: int
    a: list[Fraction]
    lam: list[Fraction]
    t: list[Fraction]
    tbar: list[Fraction]
    T: list[Fraction]
    moll_scale: list[Fraction]
    restriction: list[Fraction]
    tail_bound: Optional[Fraction]
    tail_detail: str = ""

    def __post_init__(self):
        self.a_f = [safe_float(x) for x in self.a]
        self.lam_f = [safe_float(x) for x in self.lam]
        self.t_f = [safe_float(x) for x in self.t]
        self.tbar_f = [safe_float(x) for x in self.tbar]
        self.T_f = [safe_float(x) for x in self.T]
        self.moll_scale_f = [safe_float(x) for x in self.moll_scale]
        self.restriction_f = [safe_float(x) for x in self.restriction]

    # interval endpoints -----------------------------------------------------
    def stage_breaks(self, q: int) -> list[Fraction]:
        """Endpoints [b0..b4] of I_q: window then three slots."""
        b0 = 1 - self.T[q]
        b1 = b0 + self.tbar[q]
        return [b0, b1, b1 + self.t[q], b1 + 2 * self.t[q], b1 + 3 * self.t[q]]

    def interval_I(self, q: int, i: int) -> tuple[Fraction, Fraction]:
        b = self.stage_breaks(q)
        return (b[i], b[i + 1])

    def interval_J(self, q: int, i: int) -> tuple[Fraction, Fraction]:
        lo, hi = self.interval_I(q, i)
        return (2 - hi, 2 - lo)

    def has_window(self, q: int) -> bool:
        return self.tbar[q] > 0

    def tiling_defect(self) -> Fraction:
        """2 minus the total length of all intervals on both sides of t=1."""
        total = 2 * ((1 - self.T[0]) + sum(self.tbar) + 3 * sum(self.t))
        return 2 - total

    def summary(self) -> dict:
        return {
            "mode": self.mode, "q_max": self.q_max, "m": self.m,
            "a": [_repr_exact(x) for x in self.a],
            "lambda": [_repr_exact(x) for x in self.lam],
            "t": [_repr_exact(x) for x in self.t],
            "tbar": [_repr_exact(x) for x in self.tbar],
            "T": [_repr_exact(x) for x in self.T],
            "moll_scale": [_repr_exact(x) for x in self.moll_scale],
            "restriction": [_repr_exact(x) for x in self.restriction],
            "tiling_defect": _repr_exact(self.tiling_defect()),
            "tail_bound": None if self.tail_bound is None else safe_float(self.tail_bound),
            "tail_detail": self.tail_detail,
        }


def derive_schedule(ps: ParameterSet, q_max: int) -> CascadeSchedule:
    """Build the stage schedule for levels 0..q_max (stages 0..q_max-1).

    Strict mode materializes exact powers of a0 (huge rationals); desk mode
    validates the explicit dyadic data.  Raises ScheduleError when the
    schedule does not fit before t=1.
    """
    if q_max < 1:
        raise ScheduleError("q_max must be at least 1 (one cascade stage)")
    if ps.mode == "paper_strict":
        sched = _derive_strict(ps, q_max)
    else:
        sched = _derive_desk(ps, q_max)
    _check_schedule_invariants(sched)
    return sched


def _derive_strict(ps: ParameterSet, q_max: int) -> CascadeSchedule:
    opd = 1 + ps.delta
    exps = [opd**q for q in range(q_max + 1)]
    a = [ps.a0_power(e).materialize() for e in exps]
    lam = [1 / (2 * aq) for aq in a]
    t = [ps.a0_power(ps.gamma * exps[q]).materialize() for q in range(q_max)]
    tbar = [
        ps.a0_power((ps.gamma - ps.gamma * ps.delta) * exps[q]).materialize()
        if q % ps.m == 0 else Fraction(0)
        for q in range(q_max)
    ]
    T = _accumulate_T(t, tbar)
    if T[0] >= 1:
        raise ScheduleError("cascade does not fit before t=1 (T_0 >= 1)")
    # analytic tail the untruncated schedule would add: sum_{j>q_max-1} of
    # (tbar_j + 3 t_j) <= 2*(tbar + 3t) at level q_max (superexponential decay)
    t_next = ps.a0_power(ps.gamma * opd**q_max).materialize()
    tbar_next = (ps.a0_power((ps.gamma - ps.gamma * ps.delta) * opd**q_max).materialize()
                 if q_max % ps.m == 0 else Fraction(0))
    tail = 2 * (tbar_next + 3 * t_next)
    # paper collar scale a_q^(1+eps*delta) and restriction 5 a_q^(1+eps*delta);
    # kept symbolic (their exponents sit outside the integrality basis of a0,
    # and strict schedules are validated, never simulated)
    moll = [ps.a0_power((1 + ps.epsilon * ps.delta) * exps[q])
            for q in range(q_max + 1)]
    restr = [s.scaled(5) for s in moll]
    return CascadeSchedule(
        mode="paper_strict", q_max=q_max, m=ps.m, a=a, lam=lam, t=t, tbar=tbar,
        T=T, moll_scale=moll, restriction=restr, tail_bound=tail,
        tail_detail="2*(tbar+3t) at level q_max; bounds the dropped series tail")


def _derive_desk(ps: ParameterSet, q_max: int) -> CascadeSchedule:
    spec = ps.desk
    if spec is None:
        raise ValidationError("desk mode requires a DeskSpec")
    if len(spec.ratios) < q_max or len(spec.t) < q_max or len(spec.tbar) < q_max:
        raise ScheduleError(f"DeskSpec arrays too short for q_max={q_max}")
    if len(spec.moll_scale) < q_max + 1:
        raise ScheduleError("DeskSpec.moll_scale must cover levels 0..q_max")
    a = [spec.a0]
    for q in range(q_max):
        r = spec.ratios[q]
        if r % 4 != 0 or r <= 0:
            raise ScheduleError(f"stage ratio a_{q}/a_{q+1} = {r} is not a positive multiple of 4")
        a.append(a[-1] / r)
    lam = [1 / (2 * aq) for aq in a]
    t = list(spec.t[:q_max])
    tbar = []
    for q in range(q_max):
        tb = spec.tbar[q]
        if q % ps.m == 0:
            if tb <= 0:
                raise ScheduleError(f"stage {q} is on the m-lattice but tbar_{q} <= 0")
        elif tb != 0:
            raise ScheduleError(f"stage {q} is off the m-lattice but tbar_{q} != 0")
        tbar.append(tb)
    T = _accumulate_T(t, tbar)
    if T[0] >= 1:
        raise ScheduleError("cascade does not fit before t=1 (T_0 >= 1)")
    moll = list(spec.moll_scale[: q_max + 1])
    for q, s in enumerate(moll):
        if not (0 < s):
            raise ScheduleError(f"moll_scale[{q}] must be positive")
        if 2 * s > a[q] / 2:
            raise ScheduleError(
                f"moll_scale[{q}]={s}: kernel support radius 2s exceeds half the "
                f"cell side a_{q}={a[q]}")
    restr = [spec.restriction_factor * s for s in moll]
    return CascadeSchedule(
        mode="desk", q_max=q_max, m=ps.m, a=a, lam=lam, t=t, tbar=tbar, T=T,
        moll_scale=moll, restriction=restr, tail_bound=Fraction(0),
        tail_detail="desk cascade is finite by design; no dropped tail")


def _accumulate_T(t: Sequence[Fraction], tbar: Sequence[Fraction]) -> list[Fraction]:
    q_max = len(t)
    T = [Fraction(0)] * (q_max + 1)
    for q in range(q_max - 1, -1, -1):
        T[q] = T[q + 1] + tbar[q] + 3 * t[q]
    return T


def _check_schedule_invariants(s: CascadeSchedule) -> None:
    for q in range(s.q_max):
        if not s.a[q + 1] < s.a[q]:
            raise ScheduleError("a_q must be strictly decreasing")
        ratio = s.a[q] / s.a[q + 1]
        if ratio.denominator != 1 or ratio.numerator % 4 != 0:
            raise ScheduleError(f"a_{q}/a_{q+1} = {ratio} is not an integer multiple of 4")
    for q in range(s.q_max + 1):
        if s.lam[q] * 2 * s.a[q] != 1:
            raise ScheduleError("lambda_q != 1/(2 a_q)")
    for q in range(s.q_max - 1):
        if not s.t[q + 1] < s.t[q]:
            raise ScheduleError("t_q must be strictly decreasing")
        if not s.T[q + 1] < s.T[q]:
            raise ScheduleError("T_q must be strictly decreasing")
    if s.T[s.q_max] != 0:
        raise ScheduleError("truncated schedule must end with T[q_max] == 0")
    if s.tiling_defect() != 2 - 2 * 1:  # total interval length == 2 exactly
        raise ScheduleError(f"interval tiling defect {s.tiling_defect()} != 0")


# ---------------------------------------------------------------------------
# Diffusivity / convolution sequences


@dataclass
class DiffusivitySequences:
    """kappa_tilde (dissipative), kappa (conservative), sigma (convolution).

    Strict mode: exact paper powers of a0, carried as PowerValue (floats
    underflow).  Desk mode: floats tuned from the dimensionless goal groups,
    with the tuning targets recorded.
    """

    mode: str
    kappa_tilde: list
    kappa: list
    sigma: list
    detail: dict = field(default_factory=dict)


def diffusivity_sequences(ps: ParameterSet, sched: CascadeSchedule,
                          dissipate_target: float = 5.0,
                          survive_target: float = 5e-4,
                          sigma_ratio: Fraction = Fraction(1, 32),
                          ) -> DiffusivitySequences:
    """Derive the per-level diffusivity and convolution-scale sequences.

    In strict mode these are the exact paper powers
    kappa_tilde_q = a_q^(2 - gamma/(1+delta) + 4 eps), kappa_q = a_q^(2+3eps),
    sigma_q = a_q^(1+gamma), and the two exponent inequalities that make the
    dissipative choice work are checked exactly.  In desk mode the analogues
    are tuned: kappa_tilde_q from the 'dissipate' group, kappa_q from the
    'survive' group at the deepest frequency, sigma_q as a fixed fraction of
    a_q.
    """
    if ps.mode == "paper_strict":
        opd = 1 + ps.delta
        ek_t = 2 - ps.gamma / opd + 4 * ps.epsilon
        kt = [ps.a0_power(ek_t * opd**q) for q in range(sched.q_max + 1)]
        kc = [ps.a0_power((2 + 3 * ps.epsilon) * opd**q) for q in range(sched.q_max + 1)]
        sg = [ps.a0_power((1 + ps.gamma) * opd**q) for q in range(sched.q_max + 1)]
        checks = strict_dissipative_exponent_checks(ps, sched.q_max)
        if not all(v for v, _ in checks.values()):
            bad = [k for k, (v, _) in checks.items() if not v]
            raise ValidationError(f"strict diffusivity exponent checks failed: {bad}")
        return DiffusivitySequences("paper_strict", kt, kc, sg,
                                    detail={"exponent_checks": {k: m for k, (_, m) in checks.items()}})

    lam = sched.lam_f
    kt, kc = [], []
    kc0 = survive_target / (lam[sched.q_max] ** 2 * sched.T_f[0])
    for q in range(sched.q_max):
        tb = sched.tbar_f[q]
        if tb > 0:
            kt.append(dissipate_target / (lam[q] ** 2 * tb))
        else:
            # off-window stages: scale down continuing the trend
            kt.append(kt[-1] * (lam[q - 1] ** 2 / lam[q] ** 2) if kt else 0.0)
        kc.append(kc0 * sched.a_f[q] / sched.a_f[0])
    sg = [float(sched.a[q] * sigma_ratio) for q in range(sched.q_max + 1)]
    seqs = DiffusivitySequences(
        "desk", kt, kc, sg,
        detail={"dissipate_target": dissipate_target,
                "survive_target": survive_target,
                "sigma_ratio": str(sigma_ratio)})
    for name, xs in [("kappa_tilde", kt), ("kappa", kc), ("sigma", sg)]:
        if any(b >= a for a, b in zip(xs, xs[1:])):
            raise ValidationError(f"desk {name} sequence is not strictly decreasing: {xs}")
    return seqs


def strict_dissipative_exponent_checks(ps: ParameterSet, q_max: int) -> dict:
    """Exact exponent-domain checks of the two dissipative-choice inequalities.

    For values a0^x with a0 < 1, 'value <= value' is 'exponent >= exponent'.
    Checks, for all j <= q <= q_max:
      sqrt(kappa_tilde_q * a_{j-1}^gamma) <= a_j^(1+2eps)
      sqrt(kappa_tilde_q * a_q^(gamma - gamma delta)) >= a_q^(1 - eps/2)
    Returns {name: (ok, worst margin as Fraction exponent difference)}.
    """
    opd = 1 + ps.delta
    ek = 2 - ps.gamma / opd + 4 * ps.epsilon
    first_ok, first_margin = True, None
    second_ok, second_margin = True, None
    for q in range(q_max + 1):
        eq = opd**q
        for j in range(1, q + 1):
            lhs = (ek * eq + ps.gamma * opd ** (j - 1)) / 2
            rhs = (1 + 2 * ps.epsilon) * opd**j
            marg = lhs - rhs  # >= 0 required
            if first_margin is None or marg < first_margin:
                first_margin = marg
            if marg < 0:
                first_ok = False
        lhs2 = (ek * eq + (ps.gamma - ps.gamma * ps.delta) * eq) / 2
        rhs2 = (1 - ps.epsilon / 2) * eq
        marg2 = rhs2 - lhs2  # value >=: exponent <=
        if second_margin is None or marg2 < second_margin:
            second_margin = marg2
        if marg2 < 0:
            second_ok = False
    return {"ad_first": (first_ok, first_margin),
            "ad_second": (second_ok, second_margin)}


# ---------------------------------------------------------------------------
# Dimensionless goal groups


@dataclass
class DimensionlessGroups:
    close_flows: float
    dissipate: float
    ito_tanaka: float
    survive: float

    def as_dict(self) -> dict:
        return {"close_flows": self.close_flows, "dissipate": self.dissipate,
                "ito_tanaka": self.ito_tanaka, "survive": self.survive}


def goal_inequalities(sched: CascadeSchedule, kappa: float, q: int) -> DimensionlessGroups:
    """The four dimensionless groups steering the experiments at stage q.

    close_flows = k lam_q^2 (T_{q-1} - T_q)   (want << 1 to track the flow)
    dissipate   = k lam_q^2 tbar_q            (want >> 1 to kill the window)
    ito_tanaka  = k (T_q - T_{q+1}) lam_{q+1}^2  (want >> 1 for drift cancel)
    survive     = k lam_q^2 T_q               (want << 1 to conserve)

    T_{-1} is taken as 1 (the dead lead-in (0, 1-T_0] has length 1 - T_0).
    """
    if not (0 <= q < sched.q_max):
        raise ValidationError(f"goal_inequalities requires 0 <= q < q_max, got {q}")
    kappa = float(kappa)
    lam_q = sched.lam_f[q]
    lam_q1 = sched.lam_f[q + 1]
    T_prev = 1.0 if q == 0 else sched.T_f[q - 1]
    return DimensionlessGroups(
        close_flows=kappa * lam_q**2 * (T_prev - sched.T_f[q]),
        dissipate=kappa * lam_q**2 * sched.tbar_f[q],
        ito_tanaka=kappa * (sched.T_f[q] - sched.T_f[q + 1]) * lam_q1**2,
        survive=kappa * lam_q**2 * sched.T_f[q],
    )


# ---------------------------------------------------------------------------
# Config file support (JSON; schema documented in README)


def parameter_set_from_dict(cfg: dict) -> ParameterSet:
    """Build a ParameterSet from a parsed config dict (see README schema)."""
    par = cfg.get("parameters", {})
    mode = par.get("mode", "desk")
    if mode == "paper_strict":
        ps = make_strict_parameters(
            alpha=par.get("alpha", 0), beta=par.get("beta", 0),
            p=par.get("p"), p_circ=par.get("p_circ", 2),
            epsilon=par["epsilon"], delta=par["delta"])
        return ps
    desk_cfg = cfg.get("schedule", {})
    spec = DeskSpec(
        a0=desk_cfg["a0"], ratios=[int(r) for r in desk_cfg["ratios"]],
        t=desk_cfg["t"], tbar=desk_cfg["tbar"],
        moll_scale=desk_cfg["moll_scale"],
        restriction_factor=desk_cfg.get("restriction_factor", Fraction(5, 2)))
    gamma = _as_frac(par.get("gamma", Fraction(1, 2)))
    return ParameterSet(
        p=None if par.get("p") in (None, "inf") else _as_frac(par["p"]),
        p_circ=_as_frac(par.get("p_circ", 2)),
        alpha=_as_frac(par.get("alpha", 0)), beta=_as_frac(par.get("beta", 0)),
        epsilon=_as_frac(par.get("epsilon", Fraction(1, 64))),
        delta=_as_frac(par.get("delta", Fraction(1, 8))),
        gamma=gamma, m=int(par.get("m", 1)),
        a0=_as_frac(desk_cfg["a0"]), mode="desk", desk=spec)


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
