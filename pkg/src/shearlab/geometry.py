"""Chessboard functions, restricted chessboard sets and the initial datum.

Conventions.  The even chessboard function of side ``1/(2 lam)`` equals +1 on
cells whose index parity matches, with half-open cells so the value is
defined pointwise everywhere.  As a product of 1D square waves,
``theta(x) = W(lam x1) W(lam x2)`` with ``W = +1`` on ``[0, 1/2)``,
``-1`` on ``[1/2, 1)``.  The eps-restriction of a chessboard set keeps the
points of each cell at distance more than eps from the opposite-colored
cells, i.e. shrinks every cell by eps on all four sides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .errors import ResolutionError, ValidationError
from .kernels import MollifierSpec, mollify_lattice_profile
from .params import CascadeSchedule


def square_wave(y):
    """W(y): +1 on [0,1/2) mod 1, -1 on [1/2,1) mod 1 (vectorized)."""
    y = np.asarray(y, dtype=float)
    return np.where(np.floor(2.0 * y) % 2 == 0, 1.0, -1.0)


@dataclass(frozen=True)
class ChessboardSpec:
    """Chessboard function of side 1/(2 lam); parity 'odd' negates."""

    lam: int
    parity: str = "even"

    def __post_init__(self):
        if self.lam < 1:
            raise ValidationError("chessboard frequency lam must be a positive integer")
        if self.parity not in ("even", "odd"):
            raise ValidationError("parity must be 'even' or 'odd'")

    @property
    def side(self) -> Fraction:
        return Fraction(1, 2 * self.lam)

    @property
    def sign(self) -> int:
        return 1 if self.parity == "even" else -1

    def value(self, x1, x2):
        """Pointwise values in {-1, +1}; vectorized over numpy inputs."""
        v = square_wave(np.asarray(x1, dtype=float) * self.lam) * square_wave(
            np.asarray(x2, dtype=float) * self.lam)
        return self.sign * v

    def value_exact(self, x1: Fraction, x2: Fraction) -> int:
        """Exact-rational single-point evaluation (boundary-safe)."""
        c1 = math.floor(2 * self.lam * (x1 % 1))
        c2 = math.floor(2 * self.lam * (x2 % 1))
        return self.sign * (1 if (c1 + c2) % 2 == 0 else -1)


def chessboard_value(spec: ChessboardSpec, x) -> int:
    """Value of the chessboard at a single point (exact if given Fractions)."""
    x1, x2 = x
    if isinstance(x1, Fraction) or isinstance(x2, Fraction):
        return spec.value_exact(Fraction(x1), Fraction(x2))
    return int(spec.value(x1, x2))


@dataclass(frozen=True)
class SetDescriptor:
    """eps-restriction of an even (A) or odd (B) chessboard set.

    ``base='A'`` selects the cells where the even chessboard equals +1,
    ``base='B'`` the complementary cells.  ``restriction`` shrinks each cell
    by that amount on every side; at ``restriction >= side/2`` the set is
    empty (area 0, not an error).
    """

    lam: int
    base: str = "A"
    restriction: Fraction | float = Fraction(0)

    def __post_init__(self):
        if self.base not in ("A", "B"):
            raise ValidationError("base must be 'A' or 'B'")
        if self.restriction < 0:
            raise ValidationError("restriction must be >= 0")

    @property
    def side(self) -> Fraction:
        return Fraction(1, 2 * self.lam)

    @property
    def color(self) -> int:
        return 1 if self.base == "A" else -1

    def spec(self) -> ChessboardSpec:
        return ChessboardSpec(self.lam, "even")


def membership(desc: SetDescriptor, x1, x2) -> np.ndarray:
    """Vectorized membership test of the restricted set."""
    lam = desc.lam
    s = 1.0 / (2.0 * lam)
    eps = float(desc.restriction)
    x1 = np.asarray(x1, dtype=float) % 1.0
    x2 = np.asarray(x2, dtype=float) % 1.0
    c1 = np.floor(x1 / s)
    c2 = np.floor(x2 / s)
    color_ok = ((c1 + c2) % 2 == 0) if desc.base == "A" else ((c1 + c2) % 2 == 1)
    u1 = x1 - c1 * s
    u2 = x2 - c2 * s
    inside = (np.minimum(u1, s - u1) > eps) & (np.minimum(u2, s - u2) > eps)
    return color_ok & inside


def measure(desc: SetDescriptor) -> Fraction | float:
    """Exact area: (number of colored cells) * (side - 2 eps)_+^2.

    Returns a Fraction when the restriction is exact, a float otherwise.
    """
    eps = desc.restriction
    if isinstance(eps, Fraction):
        core = desc.side - 2 * eps
        if core <= 0:
            return Fraction(0)
        return 2 * Fraction(desc.lam) ** 2 * core**2
    core = float(desc.side) - 2.0 * float(eps)
    if core <= 0:
        return 0.0
    return 2.0 * desc.lam**2 * core * core


def level_sets(sched: CascadeSchedule, q: int,
               restriction: Optional[Fraction] = None) -> dict:
    """The restricted even/odd sets A_q, B_q (and good set G_q = A_q | B_q).

    The default restriction is the schedule's per-level value (the desk
    stand-in for the paper constant 5 a_q^(1+eps delta)); pass another value
    for diagnostics.
    """
    lam = sched.lam[q]
    if lam.denominator != 1:
        raise ValidationError(f"level {q} frequency {lam} is not an integer")
    eps = sched.restriction[q] if restriction is None else restriction
    A = SetDescriptor(int(lam), "A", eps)
    B = SetDescriptor(int(lam), "B", eps)
    return {"A": A, "B": B}


def good_set_membership(sched: CascadeSchedule, q: int, x1, x2,
                        restriction: Optional[Fraction] = None) -> np.ndarray:
    sets = level_sets(sched, q, restriction)
    return membership(sets["A"], x1, x2) | membership(sets["B"], x1, x2)


# ---------------------------------------------------------------------------
# Initial datum


@dataclass(frozen=True)
class InitialDatumSpec:
    """Smoothed even chessboard of side a_0: the exact product of two 1D
    mollified square waves (tensor-product kernel at scale ``moll_scale``)."""

    lam0: int
    moll_scale: float

    def __post_init__(self):
        if self.lam0 < 1:
            raise ValidationError("lam0 must be a positive integer")
        spacing = 1.0 / (2.0 * self.lam0)
        if 2.0 * self.moll_scale > 0.5 * spacing:
            raise ValidationError(
                f"mollification scale {self.moll_scale} too coarse for side {spacing}")

    @property
    def side(self) -> float:
        return 1.0 / (2.0 * self.lam0)

    def profile(self, y) -> np.ndarray:
        """The 1D factor: mollified square wave W(lam0 * y)."""
        spec = MollifierSpec(self.moll_scale)
        return mollify_lattice_profile(
            np.asarray(y, dtype=float), self.side,
            lambda z: square_wave(self.lam0 * z), spec)

    def value(self, x1, x2) -> np.ndarray:
        return self.profile(x1) * self.profile(x2)


def sample_initial_datum(spec: InitialDatumSpec, n: int) -> np.ndarray:
    """Sample the initial datum on the n x n grid x = (j/n, i/n).

    Row-major convention: ``out[i, j] = theta(x1 = j/n, x2 = i/n)``.
    Raises ResolutionError when the grid cannot resolve the mollification
    collar (fewer than 4 points per kernel scale).
    """
    if n * spec.moll_scale < 4.0:
        raise ResolutionError(
            f"grid {n} under-resolves mollification scale {spec.moll_scale}: "
            f"need n >= {math.ceil(4.0 / spec.moll_scale)}")
    y = np.arange(n) / n
    f = spec.profile(y)
    return np.outer(f, f)


def initial_datum_from_schedule(sched: CascadeSchedule) -> InitialDatumSpec:
    lam0 = sched.lam[0]
    if lam0.denominator != 1:
        raise ValidationError("lambda_0 must be an integer to build the datum")
    return InitialDatumSpec(int(lam0), sched.moll_scale_f[0])
