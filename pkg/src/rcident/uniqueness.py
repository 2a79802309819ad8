"""Finite-scale checks of sets of uniqueness.

A point cloud ``V`` is a set of uniqueness for polynomials of degree ``d``
exactly when the monomial design matrix on ``V`` has full column rank; a
rank deficiency comes with a nullspace vector, i.e. a nonzero polynomial
vanishing on ``V``.  For analytic and quasi-analytic classes the relevant
conditions are growth conditions on the counting function
``N(r) = |V ∩ (-r, r)|``, which are evaluated on sampled radii and
classified by their trend over the largest decade of radii.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement, product
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DataError, PreconditionError
from .momentseq import LogConvexSequence, trace_function

RANK_RTOL = 1e-10
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# Monomials
# ---------------------------------------------------------------------------


def monomial_exponents(p: int, d: int, homogeneous: bool = False) -> list[tuple]:
    """Exponent tuples of the monomials in ``p`` variables, graded-lex order.

    Degrees run ``0..d`` (or only ``d`` when ``homogeneous``); within a degree
    exponents are sorted lexicographically in decreasing order, so that for
    ``p = 2, d = 2`` the order is ``1, Z1, Z2, Z1^2, Z1 Z2, Z2^2``.
    """
    out = []
    degrees = [d] if homogeneous else range(d + 1)
    for k in degrees:
        block = []
        for combo in combinations_with_replacement(range(p), k):
            e = [0] * p
            for i in combo:
                e[i] += 1
            block.append(tuple(e))
        block.sort(reverse=True)
        out.extend(block)
    return out


def monomial_label(e: Sequence[int], names: Optional[Sequence[str]] = None) -> str:
    names = names or [f"Z{i + 1}" for i in range(len(e))]
    parts = [n if k == 1 else f"{n}^{k}" for n, k in zip(names, e) if k]
    return "*".join(parts) if parts else "1"


def monomial_matrix(points: np.ndarray, exponents: Sequence[tuple]) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    E = np.asarray(exponents, dtype=int).reshape(len(exponents), -1)
    return np.prod(pts[:, None, :] ** E[None, :, :], axis=2)


# ---------------------------------------------------------------------------
# Support sets
# ---------------------------------------------------------------------------


def _frac_sequence(n: int) -> np.ndarray:
    """Deterministic low-discrepancy fractions in (0, 1) avoiding 0 and 1/2."""
    return np.mod((np.arange(n) + 1) * GOLDEN, 1.0)


@dataclass(frozen=True)
class SupportSet:
    """Finite point cloud in ``R^p`` (rows of ``points``)."""

    points: np.ndarray
    generator: str = "points"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2:
            raise DataError("points must form a 2-d array")
        if pts.size == 0 or pts.shape[0] < 1:
            raise PreconditionError("empty support")
        if not np.all(np.isfinite(pts)):
            raise DataError("support points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def p(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    # generators -----------------------------------------------------------

    @classmethod
    def from_points(cls, pts) -> "SupportSet":
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        return cls(pts)

    @classmethod
    def grid(cls, axes: Sequence[Sequence[float]]) -> "SupportSet":
        pts = np.array(list(product(*[list(map(float, a)) for a in axes])))
        return cls(pts, "grid", {"axes": [list(map(float, a)) for a in axes]})

    @classmethod
    def fan(cls, slopes: Sequence[float], budget: int, start: float = 1.0, step: float = 1.0) -> "SupportSet":
        """Points ``(x, s x)`` on the rays of the given slopes.

        Enumeration cycles through the slopes, moving one ``step`` further out
        after each full cycle: point ``i`` lies on slope ``slopes[i % S]`` at
        abscissa ``start + (i // S) * step``.
        """
        S = len(slopes)
        if S == 0 or budget < 1:
            raise PreconditionError("fan needs slopes and a positive budget")
        pts = []
        for i in range(budget):
            x = start + (i // S) * step
            pts.append((x, float(slopes[i % S]) * x))
        return cls(np.array(pts), "fan", {"slopes": list(map(float, slopes)), "budget": budget,
                                          "start": start, "step": step})

    @classmethod
    def staircase(cls, lo: float, hi: float, budget: int) -> "SupportSet":
        """Points ``(x, ceil(x))`` with ``x`` from a golden-ratio sequence in ``(lo, hi)``."""
        x = lo + (hi - lo) * _frac_sequence(budget)
        return cls(np.column_stack([x, np.ceil(x)]), "staircase", {"range": [lo, hi], "budget": budget})

    @classmethod
    def geometric(cls, ratio: float, count: int) -> "SupportSet":
        """One-dimensional points ``ratio**k`` for ``k = 1..count``."""
        k = np.arange(1, count + 1, dtype=float)
        return cls((ratio**k)[:, None], "geometric", {"ratio": ratio, "count": count})

    @classmethod
    def parabola(cls, xs: Sequence[float]) -> "SupportSet":
        x = np.asarray(xs, dtype=float)
        return cls(np.column_stack([x, x**2]), "parabola", {"x": x.tolist()})

    @classmethod
    def custom(cls, fn: Callable[[int], np.ndarray], budget: int) -> "SupportSet":
        return cls(np.asarray(fn(budget), dtype=float), "custom", {"budget": budget})

    @classmethod
    def from_config(cls, desc: dict) -> "SupportSet":
        kind = desc.get("generator", "points")
        if kind == "points":
            return cls.from_points(desc["points"])
        if kind == "grid":
            return cls.grid(desc["axes"])
        if kind == "fan":
            return cls.fan(desc["slopes"], int(desc["budget"]), desc.get("start", 1.0), desc.get("step", 1.0))
        if kind == "staircase":
            lo, hi = desc["range"]
            return cls.staircase(lo, hi, int(desc["budget"]))
        if kind == "geometric":
            return cls.geometric(desc["ratio"], int(desc["count"]))
        if kind == "parabola":
            return cls.parabola(desc["x"])
        raise DataError(f"unknown support generator {kind!r}")

    @classmethod
    def from_csv(cls, path) -> "SupportSet":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        try:
            data = [[float(v) for v in r] for r in rows]
        except ValueError:
            data = [[float(v) for v in r] for r in rows[1:]]
        return cls.from_points(np.array(data))

    def has_accumulation_point(self, tol: float = 1e-6, bound: float = 1e6) -> bool:
        """Structural proxy: a bounded cluster of distinct points exists.

        True when some pair of distinct realized points within ``|x| <= bound``
        lies closer than ``tol``.
        """
        pts = self.points[np.all(np.abs(self.points) <= bound, axis=1)]
        pts = np.unique(pts, axis=0)
        if pts.shape[0] < 2:
            return False
        if pts.shape[1] == 1:
            return bool(np.min(np.diff(np.sort(pts[:, 0]))) < tol)
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        d[np.diag_indices_from(d)] = np.inf
        return bool(d.min() < tol)


# ---------------------------------------------------------------------------
# Polynomial uniqueness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankResult:
    full_rank: bool
    rank: int
    n_columns: int
    exponents: tuple
    witness: Optional[np.ndarray]
    singular_values: np.ndarray

    def witness_terms(self) -> list:
        if self.witness is None:
            return []
        return [(monomial_label(e), float(c)) for e, c in zip(self.exponents, self.witness)]

    def to_dict(self) -> dict:
        return {"full_rank": self.full_rank, "rank": self.rank, "n_columns": self.n_columns,
                "monomial_order": [monomial_label(e) for e in self.exponents],
                "witness": None if self.witness is None else [float(c) for c in self.witness]}


def scaled_rank(A: np.ndarray, rtol: float = RANK_RTOL):
    """Rank after unit-norm column scaling, plus SVD pieces and the scales."""
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    As = A / norms
    U, s, Vt = np.linalg.svd(As, full_matrices=True)
    rank = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    return rank, s, Vt, norms


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v) > 1e-12 * np.abs(v).max()))
    return v if v[k] > 0 else -v


def polynomial_uniqueness_rank(V: SupportSet, d: int, rtol: float = RANK_RTOL,
                               homogeneous: bool = False) -> RankResult:
    """Numerical rank of the degree-``d`` monomial design on ``V``.

    When the rank is deficient the witness is a unit-norm coefficient vector
    (graded-lex order) of a polynomial vanishing on ``V``.  Coefficients are
    mapped back from the scaled columns before normalization, so the witness
    applies to unscaled monomials.
    """
    if len(V) < 1:
        raise PreconditionError("empty support")
    exps = monomial_exponents(V.p, d, homogeneous)
    A = monomial_matrix(V.points, exps)
    rank, s, Vt, norms = scaled_rank(A, rtol)
    ncol = len(exps)
    witness = None
    if rank < ncol:
        w = Vt[-1] / norms
        w = _canonical_sign(w / np.linalg.norm(w))
        witness = w
    return RankResult(rank == ncol, rank, ncol, tuple(exps), witness, s)


def witness_cosine(witness: np.ndarray, exponents: Sequence[tuple], target: dict) -> float:
    """Absolute cosine between a witness and a target ``{exponent: coef}``."""
    t = np.array([target.get(tuple(e), 0.0) for e in exponents], dtype=float)
    return float(abs(witness @ t) / (np.linalg.norm(witness) * np.linalg.norm(t)))


# ---------------------------------------------------------------------------
# Counting function and growth conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountingProfile:
    """Counts ``N(r) = |V ∩ (-r, r)|`` at increasing radii.

    Counts are integer-valued but stored as floats so that synthetic profiles
    such as ``exp(r**2)`` remain representable.
    """

    radii: np.ndarray
    counts: np.ndarray
    exclude_zero: bool = False

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        c = np.asarray(self.counts, dtype=float)
        if r.shape != c.shape or r.ndim != 1:
            raise DataError("radii and counts must be 1-d arrays of equal length")
        if np.any(np.diff(r) <= 0) or np.any(r <= 0):
            raise DataError("radii must be positive and increasing")
        if np.any(np.diff(c) < 0):
            raise DataError("counts must be non-decreasing")
        if np.any(c != np.floor(c)):
            raise DataError("counts must be integer-valued")
        r.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "counts", c)

    @classmethod
    def synthetic(cls, radii, count_fn: Callable[[np.ndarray], np.ndarray]) -> "CountingProfile":
        r = np.asarray(radii, dtype=float)
        return cls(r, np.floor(np.maximum.accumulate(count_fn(r))))


def counting_function(V: SupportSet, radii, exclude_zero: bool = False, axis: int = 0) -> CountingProfile:
    """Exact counts by sorting and binary search on the declared 1-d slice."""
    if V.p != 1 and axis is None:
        raise PreconditionError("counting needs a one-dimensional slice")
    x = np.sort(np.asarray(V.points[:, axis], dtype=float))
    if exclude_zero:
        x = x[x != 0]
    xs = x.tolist()
    counts = []
    for r in np.asarray(radii, dtype=float):
        lo = bisect.bisect_right(xs, -r)
        hi = bisect.bisect_left(xs, r)
        counts.append(max(hi - lo, 0))
    return CountingProfile(np.asarray(radii, dtype=float), np.array(counts, dtype=float), exclude_zero)


def iterated_log(t: float, n: int) -> float:
    """``log`` applied ``n`` times; ``-inf`` once the argument leaves the domain."""
    v = float(t)
    for _ in range(n):
        if v <= 0:
            return float("-inf")
        v = math.log(v)
    return v


@dataclass(frozen=True)
class GrowthResult:
    condition: str
    passed: bool
    statistic: np.ndarray
    final_value: float
    trend_slope: float
    detail: dict = field(default_factory=dict)


def _largest_decade(radii: np.ndarray) -> np.ndarray:
    return radii >= radii[-1] / 10.0


def _check_profile(profile: CountingProfile):
    r = profile.radii
    if r.size < 8 or r[-1] / r[0] < 100.0 * (1 - 1e-12):
        raise PreconditionError("profile needs >= 8 radii spanning two decades")


def growth_condition_check(profile: CountingProfile, condition: str, m_envelope: Optional[Callable] = None,
                           t_grid: Sequence[float] = (0.5, 1.0, 2.0), alpha_grid=None, n: int = 1,
                           threshold: float = 1.0, slope_tol: float = 0.1,
                           log_envelope: Optional[Callable] = None) -> GrowthResult:
    """Evaluate a limsup growth statistic on the sampled radii.

    ``E1``: ``S_t(r) = max_alpha log(alpha) N(r) / log m(alpha t r)``; passes
    when for every ``t`` the statistic at the largest radius exceeds 1 and
    does not decrease over the largest decade.  ``log_envelope`` may be
    given instead of ``m_envelope`` when ``m`` overflows.
    ``E2``: ``log N(r) / r``; ``E4a``: ``log^{*(n+1)} N(r) / r``.  Both pass
    when the statistic grows over the largest decade (log-log slope above
    ``slope_tol``) and exceeds ``threshold`` at the largest radius.
    """
    _check_profile(profile)
    r, N = profile.radii, profile.counts
    win = _largest_decade(r)
    if condition == "E1":
        if m_envelope is None and log_envelope is None:
            raise PreconditionError("E1 needs an envelope m(r)")
        logm_fn = log_envelope if log_envelope is not None else (lambda x: math.log(m_envelope(x)))
        alphas = np.geomspace(1.01, 20.0, 120) if alpha_grid is None else np.asarray(alpha_grid, dtype=float)
        probe = np.geomspace(r[0] * alphas[0] * min(t_grid), r[-1] * alphas[-1] * max(t_grid), 64)
        if np.any(np.diff([logm_fn(x) for x in probe]) <= 0):
            raise PreconditionError("envelope m must be increasing")
        stats, ok = [], True
        for t in t_grid:
            logm = np.array([[logm_fn(a * t * x) for a in alphas] for x in r])
            with np.errstate(divide="ignore", invalid="ignore"):
                S = np.max(np.log(alphas)[None, :] * N[:, None] / np.where(logm > 0, logm, np.nan), axis=1)
            S = np.nan_to_num(S, nan=0.0)
            slope = _trend_slope(r[win], S[win])
            ok &= bool(S[-1] > 1.0 and slope >= -slope_tol)
            stats.append(S)
        stat = np.min(np.vstack(stats), axis=0)
        return GrowthResult("E1", ok, stat, float(stat[-1]), _trend_slope(r[win], stat[win]),
                            {"t_grid": list(map(float, t_grid))})
    if condition == "E2":
        with np.errstate(divide="ignore"):
            stat = np.log(np.maximum(N, 0)) / r
    elif condition == "E4a":
        stat = np.array([iterated_log(c, n + 1) for c in N]) / r
    else:
        raise PreconditionError(f"unknown condition {condition!r}")
    slope = _trend_slope(r[win], stat[win])
    passed = bool(np.isfinite(stat[-1]) and stat[-1] > threshold and slope > slope_tol)
    return GrowthResult(condition, passed, stat, float(stat[-1]), slope, {"n": n})


def _trend_slope(r: np.ndarray, s: np.ndarray) -> float:
    """Slope of ``log s`` against ``log r`` (``-inf`` if ``s`` is not positive)."""
    if np.any(~(s > 0)) or np.any(~np.isfinite(s)):
        return float("-inf")
    if r.size < 2:
        return 0.0
    return float(np.polyfit(np.log(r), np.log(s), 1)[0])


# ---------------------------------------------------------------------------
# Quasi-analytic uniqueness (Hirschman-type condition)
# ---------------------------------------------------------------------------


def _trace_pieces(M: LogConvexSequence):
    """Breakpoints and active orders of the trace function of a log-convex M.

    For log-convex ``M`` the increment ``x - log(M_m/M_{m-1})`` is decreasing
    in ``m``, so the maximizer is the last order whose log-ratio does not
    exceed ``x``.  Returns ``(breaks, orders, offsets)`` with
    ``M(x) = orders[i] * x - offsets[i]`` on ``[breaks[i], breaks[i+1])``.
    """
    lm = M.log_M
    fin = np.isfinite(lm)
    K = int(np.flatnonzero(fin).max())
    lr = np.diff(lm[: K + 1])  # lr[m-1] = log M_m - log M_{m-1}
    lr_run = np.maximum.accumulate(lr)
    orders = np.arange(1, K + 1)
    breaks = np.concatenate([[-np.inf], lr_run[1:]])
    return breaks, orders, lm[1 : K + 1]


def _trace_fast(M: LogConvexSequence, x: np.ndarray) -> np.ndarray:
    breaks, orders, offs = _trace_pieces(M)
    i = np.searchsorted(breaks, x, side="right") - 1
    return orders[i] * x - offs[i]


def hirschman_integral(M: LogConvexSequence, upper_count: float) -> float:
    """``int_1^N M(log u) du/u^2 = int_0^{log N} M(x) e^{-x} dx`` in closed form.

    The trace function is piecewise linear, so each piece is integrated
    exactly: ``int (m x - a) e^{-x} dx = -(m x - a + m) e^{-x}``.
    """
    if upper_count <= 1:
        return 0.0
    X = math.log(upper_count)
    breaks, orders, offs = _trace_pieces(M)
    lo = np.maximum(breaks, 0.0)
    hi = np.append(breaks[1:], np.inf)
    hi = np.minimum(hi, X)
    keep = hi > lo
    lo, hi, m, a = lo[keep], hi[keep], orders[keep].astype(float), offs[keep]
    F = lambda x: -(m * x - a + m) * np.exp(-x)
    return float(np.sum(F(hi) - F(lo)))


@dataclass(frozen=True)
class HirschmanResult:
    passed: bool
    values: np.ndarray
    max_value: float
    threshold: float
    infinite_trace: bool = False


def hirschman_condition(profile: CountingProfile, M: LogConvexSequence, b: float) -> HirschmanResult:
    """``max_r (1/r) int_1^{N(r)} M(log u)/u^2 du`` against ``pi b / 2``.

    When the trace function is infinite inside the integration range (the
    table ends before the maximizer is reached) the result is an automatic
    pass carrying ``infinite_trace=True``.
    """
    if not M.normalized:
        raise PreconditionError("M must be normalized")
    if b <= 0:
        raise PreconditionError("b must be positive")
    thr = math.pi * b / 2.0
    if M.is_log_convex():
        vals, flag = [], False
        for r, N in zip(profile.radii, profile.counts):
            if N > 1 and trace_function(M, math.log(N)) == np.inf:
                flag = True
            vals.append(hirschman_integral(M, N) / r)
    else:
        from scipy import integrate

        vals, flag = [], False
        for r, N in zip(profile.radii, profile.counts):
            if N <= 1:
                vals.append(0.0)
                continue
            X = math.log(N)
            if trace_function(M, X) == np.inf:
                flag = True
            g = lambda x: trace_function(M, x) * math.exp(-x)
            v = integrate.quad(g, 0.0, X, epsrel=1e-8, limit=400)[0]
            vals.append(v / r)
    vals = np.asarray(vals)
    if flag:
        return HirschmanResult(True, vals, float(vals.max()), thr, True)
    return HirschmanResult(bool(vals.max() > thr), vals, float(vals.max()), thr)


# ---------------------------------------------------------------------------
# Jensen bound
# ---------------------------------------------------------------------------


def jensen_zero_bound(m_envelope: Callable, alpha: float, r: float, C: float = 1.0, k: int = 0,
                      g0: float = 1.0) -> int:
    """Ceiling of ``log(C m(alpha r) (alpha r)^{-k} / |g(0)|) / log(alpha)``.

    An entire function of the growth class with more zeros than this in
    ``(-r, r)`` must vanish identically.  Negative bounds are clipped to 0.
    """
    if alpha <= 1 or r <= 0:
        raise PreconditionError("need alpha > 1 and r > 0")
    mv = m_envelope(alpha * r)
    if not mv > 0 or C <= 0 or g0 == 0:
        raise PreconditionError("envelope, C and |g(0)| must be positive")
    val = (math.log(C) + math.log(mv) - k * math.log(alpha * r) - math.log(abs(g0))) / math.log(alpha)
    # guard against 28.999999999 / 29.000000001 style round-off
    rv = round(val)
    if abs(val - rv) < 1e-12 * max(1.0, abs(val)):
        val = rv
    return max(0, int(math.ceil(val)))
