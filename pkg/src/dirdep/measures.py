"""Dependence measures evaluated exactly on checkerboard copulas.

On a checkerboard of resolution ``N`` the conditional CDFs ``F_i`` are
piecewise linear with breakpoints ``j/N`` and constant across each x-stripe,
so the triple integral defining ``Lambda_phi`` collapses to

    (1/N^3) * sum_{i,k} sum_j  avg_{t in [0,1]} phi(d_ik(j-1) + t (d_ik(j) - d_ik(j-1)))

with ``d_ik(j) = F_i(j/N) - F_k(j/N)``.  The segment averages are available
in closed form for the built-in convex functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .checkerboard import CheckerboardCopula, ecbc, resolution, stripe_cdf
from .ingest import BivariateSample, TiePolicy, to_pseudo
from .phi import ABS_POW, ConvexFunction, abs_pow, gauss_legendre

__all__ = [
    "NormalizerNotPositive",
    "MeasureResult",
    "alpha_phi",
    "alpha_phi_monte_carlo",
    "alpha_phi_stratified",
    "lambda_phi",
    "lambda_phi_oracle",
    "chatterjee_xi",
    "zeta1",
    "lambda_psi",
    "estimate",
]

# blocks of the generic path hold at most this many segment evaluations
_BLOCK_BUDGET = 2_000_000
# near-ties of conditional CDF values closer than this are treated as ties
_TIE_TOL = 1e-13


class NormalizerNotPositive(ArithmeticError):
    """The normalising constant vanishes: degenerate response or bad phi."""


@dataclass(frozen=True)
class MeasureResult:
    value: float
    numerator: float
    normalizer: float
    N: int
    phi_descriptor: str

    CSV_HEADER = "phi,N,numerator,normalizer,value"

    def csv_row(self) -> str:
        return f"{self.phi_descriptor},{self.N},{self.numerator!r},{self.normalizer!r},{self.value!r}"


def _check_normalizer(alpha: float, what: str) -> float:
    if not alpha > 0.0:
        raise NormalizerNotPositive(f"normalizing constant of {what} is {alpha!r} <= 0")
    return alpha


def alpha_phi(f: ConvexFunction) -> float:
    """Normalising constant ``(phi(1) + phi(-1)) / 6``.

    The integrand ``phi(1{y1<=y} - 1{y2<=y})`` is ``phi(1)`` on
    ``{u1 <= v < u2}``, ``phi(-1)`` on the mirrored set and zero elsewhere;
    both sets have Lebesgue measure 1/6.
    """
    return _check_normalizer((f(1.0) + f(-1.0)) / 6.0, f.descriptor)


# ---------------------------------------------------------------------- #
# exact evaluation on checkerboards

def _pairsum_generic(F: np.ndarray, f: ConvexFunction) -> float:
    N = F.shape[0]
    cost = N * N * (N + 1) * (1 if f.kind != "custom" else 2 * f.quad_order)
    block = max(1, int(_BLOCK_BUDGET * N // max(cost, 1)))
    partial = []
    for start in range(0, N, block):
        d = F[start:start + block, None, :] - F[None, :, :]
        np.clip(d, -1.0, 1.0, out=d)
        partial.append(float(f.segment_integral(d[..., :-1], d[..., 1:]).sum()))
    return math.fsum(partial)


def _pairsum_sq(F: np.ndarray) -> float:
    # sum_{i,k} avg (d0 + t (d1-d0))^2 = (d0^2 + d0 d1 + d1^2)/3 via centred moments
    N = F.shape[0]
    C = F - F.mean(axis=0)
    sq = 2.0 * N * (C * C).sum(axis=0)
    cross = 2.0 * N * (C[:, :-1] * C[:, 1:]).sum(axis=0)
    seg = (sq[:-1] + cross + sq[1:]) / 3.0
    return math.fsum(seg)


def _abs_node_sums(F: np.ndarray) -> np.ndarray:
    """``sum_{i,k} |F_i(t) - F_k(t)|`` at every breakpoint, by sorting."""
    N = F.shape[0]
    S = np.sort(F, axis=0)
    coef = 2.0 * np.arange(N) - (N - 1)
    return 2.0 * (coef[:, None] * S).sum(axis=0)


def _crossing_correction(a: np.ndarray, b: np.ndarray) -> float:
    """``sum |d0||d1|/(|d0|+|d1|)`` over ordered pairs whose difference changes sign."""
    order = np.lexsort((b, a))
    a, b = a[order], b[order]
    # after sorting by a, stripe p can only cross q > p up to the last
    # position whose b lies below b[p]; the suffix minimum finds it
    suffix_min = np.minimum.accumulate(b[::-1])[::-1]
    last = np.searchsorted(suffix_min, b, side="left") - 1
    span = np.maximum(last - np.arange(a.size), 0)
    if not span.any():
        return 0.0
    p = np.repeat(np.arange(a.size), span)
    q = p + 1 + (np.arange(p.size) - np.repeat(np.cumsum(span) - span, span))
    d0, d1 = a[p] - a[q], b[p] - b[q]
    cross = d0 * d1 < 0
    a0, a1 = np.abs(d0[cross]), np.abs(d1[cross])
    return 2.0 * float((a0 * a1 / (a0 + a1)).sum())


def _pairsum_abs(F: np.ndarray) -> float:
    # On a segment, avg|d| = (|d0| + |d1|)/2 unless the path changes sign, in
    # which case |d0||d1|/(|d0|+|d1|) must be subtracted.  Sign changes only
    # occur between stripes whose order differs at the two ends.
    N = F.shape[0]
    nodes = _abs_node_sums(F)
    total = [0.5 * (nodes[:-1] + nodes[1:]).sum()]
    for j in range(N):
        a, b = F[:, j], F[:, j + 1]
        key = np.floor(a / _TIE_TOL).astype(np.int64)
        bs = b[np.lexsort((b, key))]
        if not np.any(np.maximum.accumulate(bs) - bs > _TIE_TOL):
            continue
        total.append(-_crossing_correction(a, b))
    return math.fsum(total)


def _fast_kind(f: ConvexFunction):
    if f.kind == ABS_POW and f.param in (1.0, 2.0):
        return int(f.param)
    return None


def lambda_phi(cb: CheckerboardCopula, f: ConvexFunction, fast: bool | None = None) -> MeasureResult:
    """``Lambda_phi`` of a checkerboard copula, exact up to rounding.

    Parameters
    ----------
    fast : bool or None
        ``None`` uses the sorting/moment shortcut for ``abs^p:1`` and
        ``abs^p:2`` when available; ``False`` forces the generic
        ``O(N^3)`` summation; ``True`` demands the shortcut.
    """
    alpha = alpha_phi(f)
    F = cb.cdf_table()
    N = cb.N
    kind = _fast_kind(f)
    if fast and kind is None:
        raise ValueError(f"no fast path for {f.descriptor}")
    if fast is False or kind is None:
        raw = _pairsum_generic(F, f)
    elif kind == 1:
        raw = _pairsum_abs(F)
    else:
        raw = _pairsum_sq(F)
    numerator = raw / N**3
    return MeasureResult(numerator / alpha, numerator, alpha, N, f.descriptor)


def lambda_phi_oracle(cb: CheckerboardCopula, f: ConvexFunction, grid: int = 800,
                      v_exact: bool = False) -> float:
    """Brute-force ``Lambda_phi`` by a midpoint rule on a lattice of ``(u1, u2, v)``.

    The ``u`` lattice uses ``grid`` rounded up to a multiple of ``N`` points
    so that it never straddles a stripe boundary.  Points sharing a stripe
    give identical integrands, so the ``u``-sums are accumulated per stripe
    with lattice counts as weights.  With ``v_exact`` the ``v``-integral is
    done per segment by order-64 Gauss-Legendre split at sign changes
    instead of the midpoint rule.
    """
    if grid < 100:
        raise ValueError("grid must be at least 100")
    N = cb.N
    g_u = -(-grid // N) * N
    u_mid = (np.arange(g_u) + 0.5) / g_u
    stripe = np.minimum((u_mid * N).astype(int), N - 1)
    w = np.bincount(stripe, minlength=N) / g_u
    cdfs = [stripe_cdf(cb, i) for i in range(N)]

    if not v_exact:
        v_mid = (np.arange(grid) + 0.5) / grid
        K = np.array([c(v_mid) for c in cdfs])          # (N, grid)
        inner = np.empty((N, N))
        for i in range(N):
            d = np.clip(K[i] - K, -1.0, 1.0)
            inner[i] = f(d).mean(axis=1)
    else:
        nodes, weights = gauss_legendre(64)
        vals = np.array([c.values for c in cdfs])        # (N, N+1)
        inner = np.empty((N, N))
        for i in range(N):
            d0 = np.clip(vals[i, :-1] - vals[:, :-1], -1.0, 1.0)
            d1 = np.clip(vals[i, 1:] - vals[:, 1:], -1.0, 1.0)
            seg = np.zeros_like(d0)
            cross = d0 * d1 < 0
            root = np.where(cross, d0 / np.where(cross, d0 - d1, 1.0), 1.0)
            for lo, hi in ((np.zeros_like(root), root), (root, np.ones_like(root))):
                t = lo[..., None] + (hi - lo)[..., None] * nodes
                x = d0[..., None] + t * (d1 - d0)[..., None]
                seg += (hi - lo) * (f(x) @ weights)
            inner[i] = seg.sum(axis=1) / N
    return float(w @ inner @ w) / alpha_phi(f)


def chatterjee_xi(cb: CheckerboardCopula) -> float:
    """Chatterjee's coefficient ``6 * mean_i int F_i^2 - 2`` of a checkerboard."""
    N = cb.N
    total = 0.0
    for i in range(N):
        vals = stripe_cdf(cb, i).values
        a, b = vals[:-1], vals[1:]
        total += float(((a * a + a * b + b * b) / 3.0).sum()) / N
    return 6.0 * total / N - 2.0


def zeta1(cb: CheckerboardCopula, constant: float = 3.0) -> float:
    """L1 distance between conditional and unconditional CDFs, times ``constant``."""
    N = cb.N
    grid = np.arange(N + 1) / N
    F = cb.cdf_table()
    d = F - grid
    d0, d1 = d[:, :-1], d[:, 1:]
    seg = abs_pow(1).segment_integral(np.clip(d0, -1, 1), np.clip(d1, -1, 1))
    return constant * float(seg.sum()) / N**2


# ---------------------------------------------------------------------- #
# sample-level entry points

def _pairwise_mean(values: np.ndarray, weights: np.ndarray, psi: ConvexFunction) -> float:
    """``sum_{j,l} w_j w_l psi(values_j - values_l)`` for weights summing to 1."""
    if psi.kind == ABS_POW and psi.param == 2.0:
        mu = weights @ values
        return 2.0 * float(weights @ (values - mu) ** 2)
    if psi.kind == ABS_POW and psi.param == 1.0:
        order = np.argsort(values, kind="stable")
        x, w = values[order], weights[order]
        below = np.cumsum(w) - w
        above = 1.0 - below - w
        return 2.0 * float((w * x * (below - above)).sum())
    n = values.size
    block = max(1, _BLOCK_BUDGET // n)
    parts = []
    for start in range(0, n, block):
        d = values[start:start + block, None] - values[None, :]
        parts.append(float(weights[start:start + block] @ psi(d) @ weights))
    return math.fsum(parts)


def lambda_psi(sample: BivariateSample, g: ConvexFunction, N: int) -> MeasureResult:
    """Plug-in ``Lambda_psi`` from stripe means of ``y``.

    Observations are split into ``N`` x-rank stripes (stripe ``i`` holds
    ranks in ``((i-1)n/N, in/N]``); ``psi`` of differences of stripe means is
    averaged with stripe-count weights and divided by the average of
    ``psi(y_j - y_l)`` over all pairs.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    psi = g if not g.bounded else g.as_psi()
    n = sample.n
    ranks = np.empty(n, dtype=np.int64)
    ranks[np.argsort(sample.xs, kind="stable")] = np.arange(1, n + 1)
    stripe = (ranks * N - 1) // n
    counts = np.bincount(stripe, minlength=N)
    sums = np.bincount(stripe, weights=sample.ys, minlength=N)
    used = counts > 0
    means = sums[used] / counts[used]
    weights = counts[used] / n
    numerator = _pairwise_mean(means, weights, psi)
    normalizer = _pairwise_mean(sample.ys, np.full(n, 1.0 / n), psi)
    if not normalizer > 0.0:
        raise NormalizerNotPositive(f"normalizing constant of {psi.descriptor} is {normalizer!r}")
    return MeasureResult(numerator / normalizer, numerator, normalizer, N, psi.descriptor)


def estimate(sample: BivariateSample, f: ConvexFunction, s: float = 0.5, seed: int = 0,
             tie_policy=TiePolicy.SEEDED_JITTER, fast: bool | None = None) -> MeasureResult:
    """Checkerboard estimate of ``Lambda_phi(Y|X)`` from a sample.

    Ranks the sample, builds the empirical checkerboard at resolution
    ``max(2, floor(n**s))`` and evaluates ``Lambda_phi`` on it exactly.
    A constant ``y`` raises :class:`NormalizerNotPositive`.
    """
    if np.ptp(sample.ys) == 0.0:
        raise NormalizerNotPositive("y is constant; its distribution is a single point")
    pseudo = to_pseudo(sample, tie_policy, seed)
    cb = ecbc(pseudo, resolution(sample.n, s))
    return lambda_phi(cb, f, fast=fast)


# ---------------------------------------------------------------------- #
# Monte Carlo evaluation of the normalising constant

def alpha_phi_monte_carlo(f: ConvexFunction, draws: int = 10_000_000, seed: int = 0,
                          chunk: int = 1_000_000) -> float:
    """Plain Monte Carlo of ``E phi(1{Y1<=Y} - 1{Y2<=Y})`` with iid uniform ``Y``'s."""
    rng = np.random.default_rng(seed)
    total = []
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        y1, y2, y = rng.random(m), rng.random(m), rng.random(m)
        d = (y1 <= y).astype(float) - (y2 <= y).astype(float)
        total.append(float(f(d).sum()))
        done += m
    return math.fsum(total) / draws


def alpha_phi_stratified(f: ConvexFunction, draws: int = 10_000_000, seed: int = 0) -> float:
    """Stratified Monte Carlo of the same quantity.

    ``(Y1, Y2)`` are drawn once per cell of a jittered ``m x m`` grid with
    ``m = floor(sqrt(draws))``; for given ``(y1, y2)`` the ``Y``-integral
    is an interval probability and is evaluated directly.
    """
    m = int(math.isqrt(draws))
    rng = np.random.default_rng(seed)
    f_pos, f_neg = f(1.0), f(-1.0)
    total = []
    base = np.arange(m)
    for row in range(m):
        y1 = (row + rng.random(m)) / m
        y2 = (base + rng.random(m)) / m
        # P(y1 <= Y < y2) phi(1) + P(y2 <= Y < y1) phi(-1)
        gap = y2 - y1
        total.append(float((np.where(gap > 0, gap * f_pos, -gap * f_neg)).sum()))
    return math.fsum(total) / (m * m)
