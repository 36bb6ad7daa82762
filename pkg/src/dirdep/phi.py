"""Convex functions used to compare conditional distribution functions.

A :class:`ConvexFunction` wraps one of the built-in families

* ``abs^p:P``  -- ``|x|**p`` with ``p >= 1``
* ``expsgn:C`` -- ``exp(c*x) - 1``
* ``expabs:C`` -- ``exp(|c*x|) - 1``

or an arbitrary user callable.  Besides pointwise evaluation it knows how to
average itself along a straight line, ``int_0^1 f(d0 + t*(d1 - d0)) dt``,
which is all that is needed to integrate ``f`` against the difference of two
piecewise-linear conditional CDFs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

__all__ = [
    "ConvexFunction",
    "ConvexityError",
    "DomainError",
    "NotZeroAtZero",
    "NotConvex",
    "NotStrictlyConvexAtZero",
    "Certificate",
    "abs_pow",
    "exp_signed",
    "exp_abs",
    "custom",
    "parse_phi",
    "gauss_legendre",
    "SIMULATION_PHIS",
]

ABS_POW = "abs^p"
EXP_SIGNED = "expsgn"
EXP_ABS = "expabs"
CUSTOM = "custom"

# slack for CDF differences that leave [-1, 1] through rounding
_DOMAIN_SLACK = 1e-12


class DomainError(ValueError):
    """Argument outside the declared domain of the function."""


class ConvexityError(ValueError):
    """Base class for failed admissibility checks."""


class NotZeroAtZero(ConvexityError):
    pass


class NotConvex(ConvexityError):
    def __init__(self, message, witness):
        super().__init__(message)
        self.witness = witness


class NotStrictlyConvexAtZero(ConvexityError):
    pass


@dataclass(frozen=True)
class Certificate:
    """Outcome of :meth:`ConvexFunction.validate`."""

    descriptor: str
    value_at_zero: float
    max_midpoint_violation: float
    min_curvature_at_zero: float


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _fmt(x: float) -> str:
    return format(x, "g") if float(x) != int(x) else str(int(x))


def _parse_number(text: str) -> float:
    return float(Fraction(text.strip()))


@dataclass(frozen=True)
class ConvexFunction:
    """A convex function ``phi`` with ``phi(0) = 0``.

    Parameters
    ----------
    kind : str
        One of ``"abs^p"``, ``"expsgn"``, ``"expabs"`` or ``"custom"``.
    param : float
        Exponent ``p`` or rate ``c`` of the built-in families.
    evaluator : callable, optional
        Only for ``kind="custom"``.  Should accept numpy arrays; scalar-only
        callables are vectorised automatically.
    bounded : bool
        ``True`` restricts the domain to ``[-1, 1]`` (use as phi on CDF
        differences), ``False`` allows the whole real line (use as psi on
        differences of conditional means).
    quad_order : int
        Gauss-Legendre order used by :meth:`segment_integral` for custom
        evaluators.
    """

    kind: str
    param: float = float("nan")
    evaluator: Callable | None = field(default=None, compare=False, repr=False)
    name: str | None = None
    bounded: bool = True
    quad_order: int = 16

    def __post_init__(self):
        if self.kind == ABS_POW:
            if not self.param >= 1.0:
                raise ValueError(f"abs^p needs p >= 1, got {self.param}")
        elif self.kind in (EXP_SIGNED, EXP_ABS):
            if self.param == 0.0 or not np.isfinite(self.param):
                raise ValueError(f"{self.kind} needs a finite non-zero rate, got {self.param}")
        elif self.kind == CUSTOM:
            if self.evaluator is None:
                raise ValueError("custom convex function needs an evaluator")
        else:
            raise ValueError(f"unknown convex function kind {self.kind!r}")
        if self.quad_order < 1:
            raise ValueError("quad_order must be positive")

    # ------------------------------------------------------------------ #
    @property
    def descriptor(self) -> str:
        if self.kind == CUSTOM:
            return f"custom:{self.name or 'f'}"
        return f"{self.kind}:{_fmt(self.param)}"

    def __str__(self):
        return self.descriptor

    def as_psi(self) -> "ConvexFunction":
        """Same function on the unbounded domain."""
        return ConvexFunction(self.kind, self.param, self.evaluator, self.name,
                              bounded=False, quad_order=self.quad_order)

    # ------------------------------------------------------------------ #
    def _check_domain(self, x):
        if self.bounded and np.any(np.abs(x) > 1.0 + _DOMAIN_SLACK):
            raise DomainError(f"{self.descriptor} is defined on [-1, 1]")
        if np.any(~np.isfinite(x)):
            raise DomainError("non-finite argument")

    def _raw(self, x: np.ndarray) -> np.ndarray:
        if self.kind == ABS_POW:
            return np.abs(x) ** self.param
        if self.kind == EXP_SIGNED:
            return np.expm1(self.param * x)
        if self.kind == EXP_ABS:
            return np.expm1(np.abs(self.param * x))
        try:
            out = np.asarray(self.evaluator(x), dtype=float)
        except TypeError:
            # scalar-only callable
            out = None
        if out is None or out.shape != np.shape(x):
            out = np.vectorize(self.evaluator, otypes=[float])(x)
        return out

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        self._check_domain(xa)
        out = self._raw(xa)
        return float(out) if np.ndim(out) == 0 else out

    eval = __call__

    # ------------------------------------------------------------------ #
    def validate(self, grid_points: int = 401, span: float = 1.0) -> Certificate:
        """Numerically certify ``phi(0)=0``, convexity and strict convexity at 0.

        Midpoint convexity is checked for every pair of grid points whose
        midpoint is again a grid point.  Raises a :class:`ConvexityError`
        subclass naming the first failed check.
        """
        f0 = float(self._raw(np.zeros(1))[0])
        if abs(f0) > 1e-14:
            raise NotZeroAtZero(f"{self.descriptor}: phi(0) = {f0!r}")

        grid = np.linspace(-span, span, grid_points)
        vals = self._raw(grid)
        i, k = np.meshgrid(np.arange(grid_points), np.arange(grid_points), indexing="ij")
        mask = ((i + k) % 2 == 0) & (i < k)
        i, k = i[mask], k[mask]
        gap = vals[(i + k) // 2] - 0.5 * (vals[i] + vals[k])
        worst = int(np.argmax(gap))
        if gap[worst] > 1e-12:
            a, b = grid[i[worst]], grid[k[worst]]
            raise NotConvex(
                f"{self.descriptor}: midpoint convexity fails on [{a:g}, {b:g}]",
                witness=(float(a), float((a + b) / 2), float(b)),
            )

        eps = np.array([1e-3, 1e-2, 1e-1]) * span
        curv = 0.5 * (self._raw(-eps) + self._raw(eps)) - f0
        if np.any(curv <= 1e-15):
            raise NotStrictlyConvexAtZero(f"{self.descriptor} is not strictly convex at 0")
        return Certificate(self.descriptor, f0, float(max(gap.max(), 0.0)), float(curv.min()))

    def is_symmetric(self) -> bool:
        return self.kind in (ABS_POW, EXP_ABS)

    # ------------------------------------------------------------------ #
    def segment_integral(self, d0, d1):
        """Average of ``phi`` along the segment from ``d0`` to ``d1``.

        Returns ``int_0^1 phi(d0 + t*(d1 - d0)) dt``.  Built-in kinds use
        closed forms; custom evaluators use Gauss-Legendre quadrature split
        at the zero crossing of the path.  Broadcasts over arrays.
        """
        a = np.asarray(d0, dtype=float)
        b = np.asarray(d1, dtype=float)
        self._check_domain(a)
        self._check_domain(b)
        if self.kind == ABS_POW:
            out = _abs_pow_segment(a, b, self.param)
        elif self.kind == EXP_SIGNED:
            out = _exp_segment(a, b, self.param)
        elif self.kind == EXP_ABS:
            out = _exp_abs_segment(a, b, abs(self.param))
        else:
            out = _quadrature_segment(self._raw, a, b, self.quad_order)
        return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------- #
# closed-form segment averages

def _abs_pow_segment(d0, d1, p):
    d0, d1 = np.broadcast_arrays(d0, d1)
    a0, a1 = np.abs(d0), np.abs(d1)
    lo, hi = np.minimum(a0, a1), np.maximum(a0, a1)
    q = p + 1.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        cross = d0 * d1 < 0
        # path through zero: two monotone pieces
        out_cross = (a0**q + a1**q) / (q * (a0 + a1))
        # same sign; far apart -> direct difference quotient
        out_far = (hi**q - lo**q) / (q * (hi - lo))
        # close together -> lo**q * ((hi/lo)**q - 1) without cancellation
        out_near = lo**q * np.expm1(q * np.log1p((hi - lo) / lo)) / (q * (hi - lo))
    near = (lo > 1e-3 * hi) & (hi > lo)
    out = np.where(near, out_near, out_far)
    out = np.where(hi == lo, hi**p, out)
    out = np.where(cross, out_cross, out)
    return out


def _expm1_over_x_minus_1(x):
    """``expm1(x)/x - 1`` accurate near zero."""
    small = np.abs(x) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        big = np.expm1(x) / x - 1.0
    series = x / 2.0 + x * x / 6.0
    return np.where(small, series, big)


def _exp_segment(d0, d1, c):
    # int_0^1 exp(c(d0 + t D)) dt - 1 = expm1(c d0) g + (g - 1),  g = expm1(cD)/(cD)
    d0, d1 = np.broadcast_arrays(d0, d1)
    h = _expm1_over_x_minus_1(c * (d1 - d0))
    return np.expm1(c * d0) * (1.0 + h) + h


def _exp_abs_segment(d0, d1, c):
    d0, d1 = np.broadcast_arrays(d0, d1)
    a0, a1 = np.abs(d0), np.abs(d1)
    cross = d0 * d1 < 0
    same = _exp_segment(a0, a1, c)
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = a0 / (a0 + a1)
    zero = np.zeros_like(a0)
    split = t0 * _exp_segment(a0, zero, c) + (1.0 - t0) * _exp_segment(zero, a1, c)
    return np.where(cross, split, same)


def _quadrature_segment(f, d0, d1, order):
    d0, d1 = np.broadcast_arrays(d0, d1)
    nodes, weights = gauss_legendre(order)
    delta = d1 - d0
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.where(d0 * d1 < 0, d0 / (d0 - d1), 1.0)
    t0 = t0[..., None]
    # piece [0, t0] and piece [t0, 1]
    t_left = t0 * nodes
    t_right = t0 + (1.0 - t0) * nodes
    x_left = d0[..., None] + t_left * delta[..., None]
    x_right = d0[..., None] + t_right * delta[..., None]
    left = (f(x_left) * weights).sum(axis=-1) * t0[..., 0]
    right = (f(x_right) * weights).sum(axis=-1) * (1.0 - t0[..., 0])
    return left + right


# ---------------------------------------------------------------------- #
# constructors

def abs_pow(p: float, **kw) -> ConvexFunction:
    return ConvexFunction(ABS_POW, float(p), **kw)


def exp_signed(c: float, **kw) -> ConvexFunction:
    return ConvexFunction(EXP_SIGNED, float(c), **kw)


def exp_abs(c: float, **kw) -> ConvexFunction:
    return ConvexFunction(EXP_ABS, float(c), **kw)


def custom(fn: Callable, name: str = "f", **kw) -> ConvexFunction:
    return ConvexFunction(CUSTOM, evaluator=fn, name=name, **kw)


_PARSERS = {ABS_POW: abs_pow, EXP_SIGNED: exp_signed, EXP_ABS: exp_abs}


def parse_phi(text: str, quad_order: int = 16) -> ConvexFunction:
    """Parse a descriptor such as ``abs^p:2`` or ``expsgn:1/5``."""
    kind, sep, arg = text.strip().partition(":")
    if not sep or kind not in _PARSERS:
        raise ValueError(
            f"bad convex function descriptor {text!r}; expected abs^p:P, expsgn:C or expabs:C"
        )
    try:
        value = _parse_number(arg)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"bad parameter in {text!r}") from None
    return _PARSERS[kind](value, quad_order=quad_order)


#: the nine functions of the simulation study
SIMULATION_PHIS = (
    [abs_pow(p) for p in (1, 2, 3)]
    + [exp_signed(c) for c in (0.2, 1, 5)]
    + [exp_abs(c) for c in (0.2, 1, 5)]
)
