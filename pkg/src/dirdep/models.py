"""Analytic bivariate copula families with exact samplers.

Descriptors (used by the CLI and config files)::

    indep  como  counter  mo:A,B  fgm:T  frechet:A
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .checkerboard import aggregate
from .measures import lambda_phi
from .phi import ABS_POW, ConvexFunction

__all__ = [
    "CopulaModel",
    "independence",
    "comonotone",
    "countermonotone",
    "marshall_olkin",
    "fgm",
    "frechet",
    "parse_model",
    "MO_GRID",
    "TrueValue",
    "closed_form_lambda1",
    "true_lambda",
]

INDEPENDENCE = "indep"
COMONOTONE = "como"
COUNTERMONOTONE = "counter"
MARSHALL_OLKIN = "mo"
FGM = "fgm"
FRECHET = "frechet"


def _fmt(x: float) -> str:
    return format(x, "g")


@dataclass(frozen=True)
class CopulaModel:
    kind: str
    params: tuple = ()

    def __post_init__(self):
        p = self.params
        if self.kind in (INDEPENDENCE, COMONOTONE, COUNTERMONOTONE):
            if p:
                raise ValueError(f"{self.kind} takes no parameters")
        elif self.kind == MARSHALL_OLKIN:
            if len(p) != 2 or not all(0.0 <= x <= 1.0 for x in p):
                raise ValueError(f"Marshall-Olkin needs alpha, beta in [0, 1], got {p}")
        elif self.kind == FGM:
            if len(p) != 1 or not -1.0 <= p[0] <= 1.0:
                raise ValueError(f"FGM needs theta in [-1, 1], got {p}")
        elif self.kind == FRECHET:
            if len(p) != 1 or not 0.0 <= p[0] <= 1.0:
                raise ValueError(f"Frechet needs alpha in [0, 1], got {p}")
        else:
            raise ValueError(f"unknown copula family {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(x) for x in p))

    @property
    def descriptor(self) -> str:
        if not self.params:
            return self.kind
        return f"{self.kind}:{','.join(_fmt(x) for x in self.params)}"

    def __str__(self):
        return self.descriptor

    # ------------------------------------------------------------------ #
    def cdf(self, u, v):
        """Copula ``C(u, v)``; broadcasts over arrays."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind == INDEPENDENCE:
            out = u * v
        elif self.kind == COMONOTONE:
            out = np.minimum(u, v)
        elif self.kind == COUNTERMONOTONE:
            out = np.maximum(u + v - 1.0, 0.0)
        elif self.kind == MARSHALL_OLKIN:
            a, b = self.params
            out = np.where(u**a >= v**b, u ** (1.0 - a) * v, u * v ** (1.0 - b))
        elif self.kind == FGM:
            (t,) = self.params
            out = u * v + t * u * (1.0 - u) * v * (1.0 - v)
        else:
            (a,) = self.params
            out = a * np.minimum(u, v) + (1.0 - a) * u * v
        return float(out) if out.ndim == 0 else out

    def sample(self, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``n`` pairs with uniform margins; deterministic in ``seed``."""
        if n < 1:
            raise ValueError("n must be positive")
        rng = np.random.default_rng(seed)
        if self.kind == INDEPENDENCE:
            return rng.random(n), rng.random(n)
        if self.kind == COMONOTONE:
            u = rng.random(n)
            return u, u.copy()
        if self.kind == COUNTERMONOTONE:
            u = rng.random(n)
            return u, 1.0 - u
        if self.kind == MARSHALL_OLKIN:
            return _sample_mo(rng, n, *self.params)
        if self.kind == FGM:
            (t,) = self.params
            u, w = rng.random(n), rng.random(n)
            # invert the conditional CDF v + a v (1 - v) = w, a = t (1 - 2u)
            a = t * (1.0 - 2.0 * u)
            v = 2.0 * w / ((1.0 + a) + np.sqrt((1.0 + a) ** 2 - 4.0 * a * w))
            return u, v
        (a,) = self.params
        u, v, pick = rng.random(n), rng.random(n), rng.random(n)
        v = np.where(pick < a, u, v)
        return u, v


def _max_shock(r, t, a):
    """``max(r**(1/(1-a)), t**(1/a))`` with the limits at ``a`` in {0, 1}."""
    if a == 0.0:
        return r
    if a == 1.0:
        return t
    return np.maximum(r ** (1.0 / (1.0 - a)), t ** (1.0 / a))


def _sample_mo(rng, n, a, b):
    r, s, t = rng.random(n), rng.random(n), rng.random(n)
    return _max_shock(r, t, a), _max_shock(s, t, b)


# ---------------------------------------------------------------------- #

def independence() -> CopulaModel:
    return CopulaModel(INDEPENDENCE)


def comonotone() -> CopulaModel:
    return CopulaModel(COMONOTONE)


def countermonotone() -> CopulaModel:
    return CopulaModel(COUNTERMONOTONE)


def marshall_olkin(alpha: float, beta: float) -> CopulaModel:
    return CopulaModel(MARSHALL_OLKIN, (alpha, beta))


def fgm(theta: float) -> CopulaModel:
    return CopulaModel(FGM, (theta,))


def frechet(alpha: float) -> CopulaModel:
    return CopulaModel(FRECHET, (alpha,))


def parse_model(text: str) -> CopulaModel:
    kind, _, arg = text.strip().partition(":")
    try:
        params = tuple(float(Fraction(x)) for x in arg.split(",")) if arg else ()
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"bad copula descriptor {text!r}") from None
    try:
        return CopulaModel(kind, params)
    except ValueError as exc:
        raise ValueError(f"bad copula descriptor {text!r}: {exc}") from None


#: parameter grid of the simulation study
MO_GRID = tuple(marshall_olkin(a, b) for a, b in [(1, 0), (1, 1), (0.2, 0.7), (0.3, 1)])


# ---------------------------------------------------------------------- #
# ground truth

@dataclass(frozen=True)
class TrueValue:
    value: float
    error_bound: float
    N: int
    converged: bool
    closed_form: float | None = None


def closed_form_lambda1(model: CopulaModel) -> float | None:
    """Known ``Lambda_1`` values: ``|theta|/3`` for FGM, ``alpha`` for Frechet."""
    if model.kind == FGM:
        return abs(model.params[0]) / 3.0
    if model.kind == FRECHET:
        return model.params[0]
    if model.kind == INDEPENDENCE:
        return 0.0
    return None


def true_lambda(model: CopulaModel, f: ConvexFunction, N_fine: int = 2048) -> TrueValue:
    """``Lambda_phi`` of the model from its fine checkerboard approximation.

    The error bound is the change between resolutions ``N_fine/2`` and
    ``N_fine``; ``converged`` is false when it exceeds ``1e-2``.
    """
    if N_fine < 128 or N_fine & (N_fine - 1):
        raise ValueError(f"N_fine must be a power of two >= 128, got {N_fine}")
    fine = lambda_phi(aggregate(model, N_fine), f).value
    coarse = lambda_phi(aggregate(model, N_fine // 2), f).value
    err = abs(fine - coarse)
    closed = None
    if f.kind == ABS_POW and f.param == 1.0:
        closed = closed_form_lambda1(model)
    return TrueValue(fine, err, N_fine, err <= 1e-2, closed)
