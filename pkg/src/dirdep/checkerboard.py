"""Checkerboard copulas: construction, conditional CDFs and text I/O.

A checkerboard copula of resolution ``N`` spreads a probability mass
uniformly over each cell ``((i-1)/N, i/N] x ((j-1)/N, j/N]``.  It is stored
as its ``N x N`` mass matrix; rows index the x-stripes, columns the y-stripes
(both 0-based here).  Within an x-stripe the conditional distribution of the
second coordinate is piecewise linear with breakpoints ``j/N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import PseudoSample

__all__ = [
    "CheckerboardError",
    "CheckerboardCopula",
    "StripeCdf",
    "resolution",
    "ecbc",
    "aggregate",
    "stripe_cdf",
    "random_checkerboard",
    "save_checkerboard",
    "load_checkerboard",
]

TOTAL_TOL = 1e-12
MARGIN_TOL = 1e-9


class CheckerboardError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CheckerboardCopula:
    """Cell masses of a checkerboard copula.

    ``mass[i, j]`` is the probability of the cell in x-stripe ``i`` and
    y-stripe ``j``.  Construction validates non-negativity, total mass and
    uniform margins; the stored array is read-only.
    """

    mass: np.ndarray

    def __post_init__(self):
        m = np.array(self.mass, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise CheckerboardError(f"mass must be a square matrix, got shape {m.shape}")
        N = m.shape[0]
        if not np.all(np.isfinite(m)):
            raise CheckerboardError("mass contains non-finite entries")
        if m.min() < 0:
            raise CheckerboardError(f"negative cell mass {m.min():.3g}")
        if abs(m.sum() - 1.0) > TOTAL_TOL:
            raise CheckerboardError(f"total mass {m.sum()!r} differs from 1")
        rows = np.abs(m.sum(axis=1) - 1.0 / N).max()
        cols = np.abs(m.sum(axis=0) - 1.0 / N).max()
        if max(rows, cols) > MARGIN_TOL:
            raise CheckerboardError(
                f"margins are not uniform (row dev {rows:.2e}, column dev {cols:.2e})"
            )
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    @property
    def N(self) -> int:
        return int(self.mass.shape[0])

    def cdf_table(self) -> np.ndarray:
        """``F[i, j]``: conditional CDF of stripe ``i`` at ``j/N``, shape ``(N, N+1)``."""
        N = self.N
        F = np.zeros((N, N + 1))
        np.cumsum(self.mass, axis=1, out=F[:, 1:])
        F *= N
        return F

    def __eq__(self, other):
        if not isinstance(other, CheckerboardCopula):
            return NotImplemented
        return np.array_equal(self.mass, other.mass)

    __hash__ = None

    def coarsen(self) -> "CheckerboardCopula":
        """Sum 2x2 blocks (``N`` must be even)."""
        N = self.N
        if N % 2:
            raise CheckerboardError("coarsen needs an even resolution")
        m = self.mass.reshape(N // 2, 2, N // 2, 2).sum(axis=(1, 3))
        return CheckerboardCopula(m)


@dataclass(frozen=True, eq=False)
class StripeCdf:
    """Conditional CDF of the second coordinate given an x-stripe."""

    index: int
    values: np.ndarray  # F(j/N), j = 0..N

    @property
    def breakpoints(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.values.size)

    def __call__(self, v):
        N = self.values.size - 1
        v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0)
        j = np.minimum(np.floor(v * N).astype(int), N - 1)
        frac = v * N - j
        out = self.values[j] + frac * (self.values[j + 1] - self.values[j])
        return float(out) if out.ndim == 0 else out


def resolution(n: int, s: float = 0.5) -> int:
    """Grid resolution ``max(2, floor(n**s))``."""
    if n < 2:
        raise ValueError(f"sample size must be at least 2, got {n}")
    if not 0 < s <= 1:
        raise ValueError(f"exponent s must lie in (0, 1], got {s}")
    # relative nudge so that e.g. 1000**(1/3) = 9.999... floors to 10
    N = int(math.floor(n ** s * (1 + 1e-12)))
    return max(2, N)


def _stripe_weights(doubled_ranks: np.ndarray, n: int, N: int):
    """Split each rank interval across the ``N`` stripes.

    A point of rank ``r`` owns ``((r-1)/n, r/n]``.  A mid-rank shared by a
    tie block of size ``k`` owns the whole block, with density ``1/k``, so
    the margins stay uniform.  Works in integer units of ``1/(2nN)`` so the
    split is exact.  Returns ``(stripe, fraction)`` arrays of shape
    ``(n, width)``; unused slots carry fraction 0.
    """
    r2 = doubled_ranks.astype(np.int64)
    _, inverse, counts = np.unique(r2, return_inverse=True, return_counts=True)
    k = counts[inverse][:, None]
    r2 = r2[:, None]
    lo = (r2 - k - 1) * N
    hi = (r2 + k - 1) * N
    width = min(N, int(k.max()) * N // n + 2)
    a = lo // (2 * n) + np.arange(width)
    ov = np.minimum(hi, (a + 1) * 2 * n) - np.maximum(lo, a * 2 * n)
    valid = (ov > 0) & (a >= 0) & (a < N)
    frac = np.where(valid, ov, 0) / (2 * N * k)
    return np.clip(a, 0, N - 1), frac


def ecbc(pseudo: PseudoSample, N: int) -> CheckerboardCopula:
    """Empirical checkerboard copula of resolution ``N``.

    Equals the ``N``-checkerboard of the bilinearly interpolated empirical
    copula: each observation carries mass ``1/n`` spread uniformly over its
    rank cell ``((R-1)/n, R/n] x ((S-1)/n, S/n]``, and that square is split
    fractionally across the ``N x N`` grid.  Under mid-ranks a tied
    observation is spread over its whole tie block instead.
    """
    n = pseudo.n
    if n == 0:
        raise CheckerboardError("empty pseudo-sample")
    if N < 2:
        raise CheckerboardError(f"resolution must be at least 2, got {N}")
    # accumulate in rank order so the result does not depend on row order
    order = np.lexsort((pseudo.v, pseudo.u))
    sx, fx = _stripe_weights(np.rint(2 * pseudo.u[order] * n), n, N)
    sy, fy = _stripe_weights(np.rint(2 * pseudo.v[order] * n), n, N)
    cells = sx[:, :, None] * N + sy[:, None, :]
    w = fx[:, :, None] * fy[:, None, :] / n
    mass = np.bincount(cells.ravel(), weights=w.ravel(), minlength=N * N)
    return CheckerboardCopula(mass.reshape(N, N))


def aggregate(model, N: int) -> CheckerboardCopula:
    """``N``-checkerboard approximation of an analytic copula.

    ``model`` needs a vectorised ``cdf(u, v)`` method.
    """
    if N < 1:
        raise CheckerboardError(f"resolution must be positive, got {N}")
    g = np.arange(N + 1) / N
    U, V = np.meshgrid(g, g, indexing="ij")
    C = np.asarray(model.cdf(U, V), dtype=float)
    lower = np.maximum(U + V - 1.0, 0.0)
    upper = np.minimum(U, V)
    if np.any(C < lower - 1e-12) or np.any(C > upper + 1e-12):
        raise CheckerboardError(f"{model} violates the Frechet-Hoeffding bounds")
    mass = C[1:, 1:] - C[:-1, 1:] - C[1:, :-1] + C[:-1, :-1]
    if mass.min() < -1e-12:
        raise CheckerboardError(f"{model} assigns negative mass {mass.min():.3g}")
    mass = np.maximum(mass, 0.0)
    return CheckerboardCopula(mass)


def stripe_cdf(cb: CheckerboardCopula, i: int) -> StripeCdf:
    """Conditional CDF for x-stripe ``i`` (0-based)."""
    if not 0 <= i < cb.N:
        raise IndexError(f"stripe index {i} out of range 0..{cb.N - 1}")
    vals = np.concatenate([[0.0], np.cumsum(cb.mass[i]) * cb.N])
    vals.setflags(write=False)
    return StripeCdf(i, vals)


def random_checkerboard(N: int, rng: np.random.Generator, n_perm: int = 3) -> CheckerboardCopula:
    """Random doubly stochastic checkerboard.

    A Dirichlet mixture of the uniform matrix, ``n_perm`` random permutation
    matrices and one smooth random positive matrix balanced by Sinkhorn
    iterations.
    """
    parts = [np.full((N, N), 1.0 / N)]
    for _ in range(n_perm):
        P = np.zeros((N, N))
        P[np.arange(N), rng.permutation(N)] = 1.0
        parts.append(P)
    S = rng.random((N, N)) + 0.05
    for _ in range(500):
        S /= S.sum(axis=1, keepdims=True)
        S /= S.sum(axis=0, keepdims=True)
    parts.append(S)
    w = rng.dirichlet(np.ones(len(parts)))
    mass = sum(wi * Pi for wi, Pi in zip(w, parts)) / N
    return CheckerboardCopula(mass)


def save_checkerboard(cb: CheckerboardCopula, path) -> None:
    """Write ``N`` on the first line, then ``N`` rows of masses."""
    lines = [str(cb.N)]
    lines += [" ".join(f"{x:.17g}" for x in row) for row in cb.mass]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkerboard(path) -> CheckerboardCopula:
    text = Path(path).read_text(encoding="utf-8").split("\n")
    lines = [ln for ln in text if ln.strip()]
    try:
        N = int(lines[0])
        rows = [[float(x) for x in ln.split()] for ln in lines[1:]]
    except (IndexError, ValueError) as exc:
        raise CheckerboardError(f"malformed checkerboard file {path}: {exc}") from exc
    if len(rows) != N or any(len(r) != N for r in rows):
        raise CheckerboardError(f"{path}: expected {N} rows of {N} values")
    return CheckerboardCopula(np.array(rows))
