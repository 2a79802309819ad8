"""Characteristic functions sampled on symmetric uniform grids."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DataError, NumericalFailure, PreconditionError

ZERO_THRESHOLD = 1e-6


@dataclass(frozen=True)
class CharFnGrid:
    """Complex values of a characteristic function on an increasing grid."""

    t: np.ndarray
    values: np.ndarray
    provenance: str = "population_closed_form"

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).ravel()
        v = np.asarray(self.values, dtype=complex).ravel()
        if t.shape != v.shape:
            raise DataError("t and values must have equal length")
        if t.size and np.any(np.diff(t) <= 0):
            raise DataError("grid must be increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def symmetric(cls, t_max: float, step: float, fn, provenance: str = "population_closed_form"):
        n = int(round(t_max / step))
        t = np.arange(-n, n + 1) * step
        return cls(t, fn(t), provenance)

    @property
    def step(self) -> float:
        d = np.diff(self.t)
        return float(d.mean())

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        d = np.diff(self.t)
        return bool(np.all(np.abs(d - d.mean()) <= rtol * abs(d.mean())))

    def zero_index(self) -> int:
        k = int(np.argmin(np.abs(self.t)))
        if abs(self.t[k]) > 1e-12 * max(1.0, self.step):
            raise PreconditionError("grid does not contain t = 0")
        return k

    def check(self, tol0: float = 1e-12, tol_herm: float = 1e-10) -> None:
        """Raise unless ``phi(0) = 1`` and ``phi(-t) = conj(phi(t))``."""
        k = self.zero_index()
        if abs(self.values[k] - 1.0) > tol0:
            raise DataError("phi(0) must equal 1")
        if not np.allclose(self.t, -self.t[::-1], atol=1e-12 * max(1.0, abs(self.t).max())):
            raise DataError("grid must be symmetric")
        if np.max(np.abs(self.values - np.conj(self.values[::-1]))) > tol_herm:
            raise DataError("values are not Hermitian")

    def at(self, s) -> np.ndarray:
        """Values at arbitrary points: exact on grid nodes, cubic spline elsewhere."""
        s = np.asarray(s, dtype=float)
        h = self.step
        pos = (s - self.t[0]) / h
        k = np.rint(pos).astype(int)
        on = (np.abs(pos - k) < 1e-9) & (k >= 0) & (k < self.t.size)
        out = np.empty(s.shape, dtype=complex)
        out[on] = self.values[k[on]]
        if np.any(~on):
            if np.any((s[~on] < self.t[0]) | (s[~on] > self.t[-1])):
                raise PreconditionError("evaluation outside the grid")
            re = CubicSpline(self.t, self.values.real)
            im = CubicSpline(self.t, self.values.imag)
            out[~on] = re(s[~on]) + 1j * im(s[~on])
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "re", "im"])
            for a, v in zip(self.t, self.values):
                w.writerow([repr(float(a)), repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def from_csv(cls, path, provenance: str = "file") -> "CharFnGrid":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        t = [float(r["t"]) for r in rows]
        v = [complex(float(r["re"]), float(r["im"])) for r in rows]
        return cls(np.array(t), np.array(v), provenance)


def ecf(sample, t_max: float = 5.0, step: float = 1e-2) -> CharFnGrid:
    """Empirical characteristic function ``mean(exp(i t Y))`` on a symmetric grid."""
    y = np.asarray(sample, dtype=float).ravel()
    if y.size == 0:
        raise PreconditionError("empty sample")
    n = int(round(t_max / step))
    k = np.arange(0, n + 1) * step
    half = np.array([np.mean(np.exp(1j * tk * y)) for tk in k])
    vals = np.concatenate([np.conj(half[:0:-1]), half])
    t = np.concatenate([-k[:0:-1], k])
    return CharFnGrid(t, vals, f"empirical({y.size})")


def find_zeros(values: np.ndarray, threshold: float = ZERO_THRESHOLD):
    """Indices with ``|v| < threshold``; raises if two are adjacent."""
    z = np.flatnonzero(np.abs(values) < threshold)
    if z.size > 1 and np.any(np.diff(z) == 1):
        raise NumericalFailure("denominator vanishes on a non-isolated region")
    return z


def _interp_at(values: np.ndarray, k: int, bad: np.ndarray) -> complex:
    """Cubic (or lower-order) Lagrange interpolation at index ``k`` from good neighbours."""
    n = values.size
    cand = [o for o in (-2, -1, 1, 2) if 0 <= k + o < n and not bad[k + o]]
    left = [o for o in cand if o < 0]
    right = [o for o in cand if o > 0]
    if not left or not right:
        cand = [o for o in (-3, -2, -1, 1, 2, 3) if 0 <= k + o < n and not bad[k + o]]
        if len(cand) < 2:
            raise NumericalFailure("cannot interpolate across zero at the grid edge")
        cand = sorted(cand, key=abs)[:3]
    xs = np.array(cand, dtype=float)
    ys = values[k + np.array(cand)]
    out = 0j
    for i, xi in enumerate(xs):
        li = np.prod([(0 - xj) / (xi - xj) for j, xj in enumerate(xs) if j != i])
        out += li * ys[i]
    return out


def divide_with_zeros(num: np.ndarray, den: np.ndarray, threshold: float = ZERO_THRESHOLD):
    """``num / den`` with isolated zeros of ``den`` crossed by continuity.

    At grid points where ``|den| < threshold`` the ratio is interpolated from
    the flanking grid points (cubic Lagrange on up to four neighbours).
    Returns ``(ratio, zero_indices)``.
    """
    num = np.asarray(num, dtype=complex)
    den = np.asarray(den, dtype=complex)
    z = find_zeros(den, threshold)
    bad = np.zeros(den.size, dtype=bool)
    bad[z] = True
    out = np.empty(den.size, dtype=complex)
    out[~bad] = num[~bad] / den[~bad]
    for k in z:
        out[k] = _interp_at(out, k, bad)
    return out, z


def hermitian_renormalize(g: CharFnGrid) -> CharFnGrid:
    """Average ``phi(t)`` with ``conj(phi(-t))`` and pin ``phi(0) = 1``."""
    v = 0.5 * (g.values + np.conj(g.values[::-1]))
    k = g.zero_index()
    v[k] = 1.0
    return CharFnGrid(g.t, v, g.provenance)


# ---------------------------------------------------------------------------
# Moments from derivatives at 0
# ---------------------------------------------------------------------------


def _central_weights(k: int) -> tuple:
    """Offsets and weights of the minimal centered stencil for ``f^{(k)}(0)``."""
    m = (k + 1) // 2
    off = np.arange(-m, m + 1, dtype=float)
    V = np.vander(off, increasing=True).T
    rhs = np.zeros(off.size)
    rhs[k] = math.factorial(k)
    w = np.linalg.solve(V, rhs)
    return off.astype(int), w


def derivative_at_zero(g: CharFnGrid, k: int, base_step: Optional[float] = None, levels: int = 3) -> complex:
    """``phi^{(k)}(0)`` by centered differences with Richardson extrapolation.

    The stencil spacing starts at the grid multiple nearest to
    ``(eps 2^k)^(1/(k+2 levels))`` and is doubled ``levels - 1`` times; the
    leading error terms ``H^2, H^4, ...`` are eliminated by Richardson.
    Levels whose stencil leaves the grid are dropped.
    """
    if k == 0:
        return complex(g.values[g.zero_index()])
    if not g.is_uniform():
        raise PreconditionError("derivatives need a uniform grid")
    h = g.step
    i0 = g.zero_index()
    off, w = _central_weights(k)
    target = base_step or (2.2e-16 * 2.0**k) ** (1.0 / (k + 2 * levels))
    s0 = max(1, int(round(target / h)))
    D = []
    for lev in range(levels):
        s = s0 * 2**lev
        idx = i0 + off * s
        if idx.min() < 0 or idx.max() >= g.t.size:
            break
        D.append(np.dot(w, g.values[idx]) / (s * h) ** k)
    if not D:
        raise NumericalFailure(f"grid too short for derivative of order {k}")
    # Richardson on H^2 expansions with ratio 2
    for j in range(1, len(D)):
        f = 4.0**j
        D = [(f * D[i] - D[i + 1]) / (f - 1) for i in range(len(D) - 1)]
    return complex(D[0])


def cf_moments(g: CharFnGrid, order: int = 4, **kw) -> np.ndarray:
    """Moments ``E[X^k] = phi^{(k)}(0) / i^k`` for ``k = 0..order`` (``order <= 8``)."""
    if order > 8:
        raise PreconditionError("moment orders above 8 are not supported")
    out = np.empty(order + 1)
    for k in range(order + 1):
        out[k] = (derivative_at_zero(g, k, **kw) / (1j) ** k).real
    return out
