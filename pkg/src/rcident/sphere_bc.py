"""Binary choice with random coefficients on the circle and the 2-sphere.

``Y = 1{Gamma' S >= 0}`` with ``S`` the regressors lifted to the upper
hemisphere.  The choice probability is ``T f(s) + 1/2`` where ``T`` is the
hemispherical transform of the coefficient density ``f``.  ``T`` acts on
degree-``n`` harmonics by a scalar which vanishes for even ``n >= 2``, so
only the odd part of ``f`` is seen; under antipodal exclusion
(``f(u) f(-u) = 0``) the density is ``2 f_odd 1{f_odd > 0}``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import eval_legendre, gammaln

from .errors import DataError, NumericalFailure, PreconditionError
from .rng import make_rng

AMPLIFICATION_LIMIT = 1e12


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SphereGrid:
    """Quadrature nodes on ``S^1`` (uniform angles) or ``S^2`` (Gauss-Legendre x uniform).

    For ``p = 2`` nodes are ordered colatitude-major: node ``i * n_phi + k``
    has ``cos(colatitude) = x_i`` and longitude ``2 pi k / n_phi``.
    """

    p: int
    nodes: np.ndarray
    weights: np.ndarray
    shape: tuple
    cos_theta: Optional[np.ndarray] = None

    @classmethod
    def circle(cls, n: int) -> "SphereGrid":
        if n < 2:
            raise PreconditionError("need at least 2 nodes")
        a = 2 * np.pi * np.arange(n) / n
        return cls(1, np.stack([np.cos(a), np.sin(a)], axis=1), np.full(n, 2 * np.pi / n), (n,))

    @classmethod
    def sphere(cls, n_theta: int, n_phi: Optional[int] = None) -> "SphereGrid":
        n_phi = n_phi or 2 * n_theta
        x, w = np.polynomial.legendre.leggauss(n_theta)
        x, w = x[::-1], w[::-1]  # north to south
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        st = np.sqrt(1 - x**2)
        nodes = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)), np.outer(x, np.ones(n_phi))], axis=2)
        weights = np.outer(w, np.full(n_phi, 2 * np.pi / n_phi))
        return cls(2, nodes.reshape(-1, 3), weights.ravel(), (n_theta, n_phi), x)

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def area(self) -> float:
        return 2 * np.pi if self.p == 1 else 4 * np.pi

    def angles(self) -> np.ndarray:
        return np.arctan2(self.nodes[:, 1], self.nodes[:, 0])

    def antipode(self) -> np.ndarray:
        """Index of ``-u`` for every node; requires an even longitude count."""
        if self.p == 1:
            n = self.shape[0]
            if n % 2:
                raise PreconditionError("antipodal pairing needs an even node count")
            return (np.arange(n) + n // 2) % n
        nt, nph = self.shape
        if nph % 2:
            raise PreconditionError("antipodal pairing needs an even longitude count")
        i, k = np.divmod(np.arange(self.size), nph)
        return (nt - 1 - i) * nph + (k + nph // 2) % nph

    def max_degree(self) -> int:
        """Largest degree whose projection is computed exactly for band-limited data."""
        if self.p == 1:
            return (self.shape[0] - 1) // 2
        return min(self.shape[0] - 1, (self.shape[1] - 1) // 2)


@dataclass(frozen=True)
class SphericalDensity:
    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size != self.grid.size:
            raise DataError("one value per node required")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: SphereGrid, f: Callable) -> "SphericalDensity":
        return cls(grid, f(grid.nodes))

    def mass(self) -> float:
        return float(np.dot(self.grid.weights, self.values))

    def l1(self) -> float:
        return float(np.dot(self.grid.weights, np.abs(self.values)))

    def antipodal_overlap(self) -> float:
        """``max_u min(f(u), f(-u))`` over paired nodes."""
        a = self.grid.antipode()
        return float(np.max(np.minimum(self.values, self.values[a])))

    def validate(self, tol_neg: float = 1e-10, tol_mass: float = 1e-8) -> None:
        if self.values.min() < -tol_neg:
            raise DataError("density takes negative values")
        if abs(self.mass() - 1.0) > tol_mass:
            raise DataError("density mass differs from 1")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node"] + [f"u{i}" for i in range(self.grid.p + 1)] + ["weight", "value"])
            for i in range(self.grid.size):
                w.writerow([i] + [repr(float(c)) for c in self.grid.nodes[i]]
                           + [repr(float(self.grid.weights[i])), repr(float(self.values[i]))])


def lift_regressors(x) -> np.ndarray:
    """``(1, x) / |(1, x)|``; rows map into the open upper hemisphere."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    S = np.concatenate([np.ones((X.shape[0], 1)), X], axis=1)
    S = S / np.linalg.norm(S, axis=1, keepdims=True)
    return S[0] if single else S


# ---------------------------------------------------------------------------
# Eigenvalues
# ---------------------------------------------------------------------------


def eigenvalue_lambda(m: int, p: int) -> float:
    """Eigenvalue of the hemispherical transform on degree ``2m + 1`` harmonics of ``S^p``.

    ``(-1)^m 2 pi^{p/2} (1 3 ... (2m-1)) / (Gamma(p/2) p (p+2) ... (p+2m))``,
    evaluated in log space.
    """
    if m < 0 or p < 1:
        raise PreconditionError("need m >= 0 and p >= 1")
    log = math.log(2) + 0.5 * p * math.log(math.pi) - gammaln(0.5 * p)
    log += sum(math.log(2 * i - 1) for i in range(1, m + 1))
    log -= sum(math.log(p + 2 * i) for i in range(0, m + 1))
    return (-1) ** m * math.exp(log)


def degree_eigenvalue(n: int, p: int) -> float:
    """Eigenvalue on degree ``n``: 0 for even ``n >= 2``; constants map to 0 as well."""
    if n % 2 == 0:
        return 0.0
    return eigenvalue_lambda((n - 1) // 2, p)


# ---------------------------------------------------------------------------
# Harmonic projections
# ---------------------------------------------------------------------------


def _normalized_legendre(L: int, x: np.ndarray) -> np.ndarray:
    """``P[l, m, i]``: orthonormal associated Legendre functions (no Condon-Shortley sign).

    ``P[l, m](cos t) exp(i m phi)`` are orthonormal on ``S^2`` for ``0 <= m <= l``.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1 - x * x, 0.0, None))
    P = np.zeros((L + 1, L + 1, x.size))
    P[0, 0] = 1.0 / math.sqrt(4 * math.pi)
    for m in range(1, L + 1):
        P[m, m] = math.sqrt((2 * m + 1) / (2 * m)) * s * P[m - 1, m - 1]
    for m in range(0, L):
        P[m + 1, m] = math.sqrt(2 * m + 3) * x * P[m, m]
    for m in range(0, L + 1):
        for l in range(m + 2, L + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    return P


class HarmonicAnalyzer:
    """Projections ``Q_n`` onto degree-``n`` harmonics for data on a :class:`SphereGrid`."""

    def __init__(self, grid: SphereGrid, max_degree: int):
        if max_degree > grid.max_degree():
            raise PreconditionError(f"grid resolves degrees up to {grid.max_degree()}, not {max_degree}")
        self.grid = grid
        self.L = max_degree
        if grid.p == 2:
            self._P = _normalized_legendre(max_degree, grid.cos_theta)

    def _fourier(self, v: np.ndarray) -> np.ndarray:
        g = self.grid
        if g.p == 1:
            return np.fft.fft(v) / g.shape[0]
        nt, nph = g.shape
        return np.fft.fft(v.reshape(nt, nph), axis=1) * (2 * np.pi / nph)

    def project_all(self, v: np.ndarray, degrees: Sequence[int]) -> dict:
        """``{n: Q_n v on the grid}``."""
        g = self.grid
        v = np.asarray(v, dtype=float).ravel()
        F = self._fourier(v)
        out = {}
        if g.p == 1:
            n = g.shape[0]
            k = np.arange(n)
            for d in degrees:
                if d > self.L:
                    raise PreconditionError(f"degree {d} is not resolved")
                if d == 0:
                    out[d] = np.full(n, F[0].real)
                else:
                    out[d] = 2 * np.real(F[d] * np.exp(2j * np.pi * d * k / n))
            return out
        nt, nph = g.shape
        w = np.polynomial.legendre.leggauss(nt)[1][::-1]
        phase = np.exp(2j * np.pi * np.outer(np.arange(self.L + 1), np.arange(nph)) / nph)
        for d in degrees:
            if d > self.L:
                raise PreconditionError(f"degree {d} is not resolved")
            comp = np.zeros((nt, nph))
            for m in range(d + 1):
                a = np.sum(w * self._P[d, m] * F[:, m])
                term = np.outer(self._P[d, m], a * phase[m])
                comp += term.real if m == 0 else 2 * term.real
            out[d] = comp.ravel()
        return out

    def project(self, v: np.ndarray, degree: int) -> np.ndarray:
        return self.project_all(v, [degree])[degree]


def zonal_projection(grid: SphereGrid, v: np.ndarray, degree: int) -> np.ndarray:
    """Direct kernel quadrature ``sum_k w_k q_n(u, y_k) v(y_k)``.

    ``q_n = (2n+1)/(4 pi) P_n(u'y)`` on ``S^2`` and ``cos(n angle)/pi``
    (``1/(2 pi)`` for ``n = 0``) on ``S^1``.  Quadratic cost; a cross-check
    for :class:`HarmonicAnalyzer`.
    """
    if degree > grid.max_degree():
        raise PreconditionError("degree is not resolved by the grid")
    C = np.clip(grid.nodes @ grid.nodes.T, -1.0, 1.0)
    if grid.p == 2:
        K = (2 * degree + 1) / (4 * np.pi) * eval_legendre(degree, C)
    else:
        K = np.cos(degree * np.arccos(C)) / (np.pi if degree else 2 * np.pi)
    return K @ (grid.weights * np.asarray(v, dtype=float))


@dataclass(frozen=True)
class HarmonicSpectrum:
    degrees: np.ndarray
    l1: np.ndarray
    l2: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["degree", "l1_norm", "l2_norm"])
            for d, a, b in zip(self.degrees, self.l1, self.l2):
                w.writerow([int(d), repr(float(a)), repr(float(b))])


def _norms(grid: SphereGrid, v: np.ndarray) -> tuple:
    return float(np.dot(grid.weights, np.abs(v))), float(math.sqrt(np.dot(grid.weights, v * v)))


def project_harmonic(f: SphericalDensity, degree: int):
    """Degree-``degree`` component of ``f`` on its grid with its L1 and L2 norms."""
    comp = HarmonicAnalyzer(f.grid, degree).project(f.values, degree)
    l1, l2 = _norms(f.grid, comp)
    return comp, l1, l2


def harmonic_spectrum(f: SphericalDensity, max_degree: int) -> HarmonicSpectrum:
    H = HarmonicAnalyzer(f.grid, max_degree)
    comps = H.project_all(f.values, range(max_degree + 1))
    l1 = np.array([_norms(f.grid, comps[d])[0] for d in range(max_degree + 1)])
    l2 = np.array([_norms(f.grid, comps[d])[1] for d in range(max_degree + 1)])
    return HarmonicSpectrum(np.arange(max_degree + 1), l1, l2)


# ---------------------------------------------------------------------------
# Forward transform
# ---------------------------------------------------------------------------


def _frame(s: np.ndarray):
    """Orthonormal vectors completing ``s`` in ``R^3``."""
    a = np.array([1.0, 0.0, 0.0]) if abs(s[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = a - np.dot(a, s) * s
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(s, e1)


def hemispherical_forward(f: Callable, s_points, p: int, n_radial: int = 64, n_angular: int = 128,
                          breaks: Sequence[float] = (), mass: Optional[float] = None) -> np.ndarray:
    """``T f(s) = int 1{u's >= 0} f(u) dsigma(u) - mass / 2`` by quadrature on each hemisphere.

    ``f`` maps an ``(n, p+1)`` array of unit vectors to values.  On the
    circle the half arc around ``s`` is split at the absolute angles in
    ``breaks`` (non-smooth points of ``f``) and integrated with composite
    Gauss-Legendre.  On the sphere the cap is parametrized by
    ``cos(angle to s)`` (Gauss-Legendre on ``[0, 1]``) and azimuth
    (uniform).  ``mass`` defaults to the quadrature of ``f`` over the sphere.
    """
    S = np.atleast_2d(np.asarray(s_points, dtype=float))
    if S.shape[1] != p + 1:
        raise PreconditionError("points have the wrong dimension")
    if p == 1:
        x, w = np.polynomial.legendre.leggauss(n_radial)
        out = np.empty(S.shape[0])
        br = np.mod(np.asarray(breaks, dtype=float), 2 * np.pi)
        for i, s in enumerate(S):
            phi = math.atan2(s[1], s[0])
            lo, hi = phi - np.pi / 2, phi + np.pi / 2
            cuts = [lo, hi]
            for b in br:
                for shift in (-2 * np.pi, 0.0, 2 * np.pi):
                    if lo < b + shift < hi:
                        cuts.append(b + shift)
            cuts = np.sort(cuts)
            a = 0.5 * (cuts[1:] + cuts[:-1])
            h = 0.5 * np.diff(cuts)
            ang = (a[:, None] + h[:, None] * x[None, :]).ravel()
            ww = (h[:, None] * w[None, :]).ravel()
            out[i] = np.dot(ww, f(np.stack([np.cos(ang), np.sin(ang)], axis=1)))
        if mass is None:
            mass = float(np.dot(SphereGrid.circle(4096).weights, f(SphereGrid.circle(4096).nodes)))
        return out - 0.5 * mass
    if p != 2:
        raise PreconditionError("only p in {1, 2} is supported")
    x, w = np.polynomial.legendre.leggauss(n_radial)
    x, w = 0.5 * (x + 1), 0.5 * w
    az = 2 * np.pi * np.arange(n_angular) / n_angular
    st = np.sqrt(1 - x * x)
    cw = np.outer(w, np.full(n_angular, 2 * np.pi / n_angular)).ravel()
    out = np.empty(S.shape[0])
    for i, s in enumerate(S):
        s = s / np.linalg.norm(s)
        e1, e2 = _frame(s)
        U = (np.outer(st, np.cos(az))[..., None] * e1 + np.outer(st, np.sin(az))[..., None] * e2
             + np.outer(x, np.ones(n_angular))[..., None] * s).reshape(-1, 3)
        out[i] = np.dot(cw, f(U))
    if mass is None:
        g = SphereGrid.sphere(max(n_radial, 32))
        mass = float(np.dot(g.weights, f(g.nodes)))
    return out - 0.5 * mass


def spectral_forward(f: SphericalDensity, max_degree: int) -> np.ndarray:
    """``T f`` on the grid of ``f`` via ``sum_n lambda_n Q_n f`` over odd ``n <= max_degree``."""
    H = HarmonicAnalyzer(f.grid, max_degree)
    odd = list(range(1, max_degree + 1, 2))
    comps = H.project_all(f.values, odd)
    return sum(degree_eigenvalue(n, f.grid.p) * comps[n] for n in odd)


# ---------------------------------------------------------------------------
# Inversion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InversionResult:
    density: SphericalDensity
    odd_part: np.ndarray
    renormalization: float
    lambdas: dict
    truncation: int
    degenerate: bool
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {"truncation": self.truncation, "renormalization": self.renormalization,
                "degenerate": self.degenerate, "warnings": list(self.warnings),
                "lambdas": {str(k): v for k, v in sorted(self.lambdas.items())}}


def invert_hemispherical(g: np.ndarray, grid: SphereGrid, M: int,
                         amplification_limit: float = AMPLIFICATION_LIMIT) -> InversionResult:
    """Density from choice probabilities ``g(s) = P(Y = 1 | S = s)`` on a full-sphere grid.

    ``f_odd = sum_{m <= M} Q_{2m+1}(g - 1/2) / lambda(2m+1, p)`` and
    ``f = 2 f_odd 1{f_odd > 0}``, renormalized to mass 1 with the factor
    reported.  Degrees whose amplified norm exceeds ``amplification_limit``
    end the sum early.
    """
    g = np.asarray(g, dtype=float).ravel()
    if g.size != grid.size:
        raise DataError("one probability per node required")
    if g.min() < -1e-12 or g.max() > 1 + 1e-12:
        raise DataError("probabilities must lie in [0, 1]")
    if grid.p == 1 and grid.size < 4 * (2 * M + 1):
        raise PreconditionError("circle grid needs at least 4 (2M + 1) nodes")
    top = 2 * M + 1
    H = HarmonicAnalyzer(grid, top)
    h = g - 0.5
    comps = H.project_all(h, range(1, top + 1, 2))
    fodd = np.zeros(grid.size)
    lambdas = {}
    notes = []
    trunc = M
    for m in range(M + 1):
        lam = eigenvalue_lambda(m, grid.p)
        lambdas[2 * m + 1] = lam
        amp = _norms(grid, comps[2 * m + 1])[0] / abs(lam)
        if amp > amplification_limit:
            trunc = m - 1
            notes.append(f"truncated at m = {trunc}: amplification {amp:.3g}")
            warnings.warn(notes[-1])
            break
        fodd += comps[2 * m + 1] / lam
    f = 2 * fodd * (fodd > 0)
    mass = float(np.dot(grid.weights, f))
    degenerate = not mass > 1e-12
    if degenerate:
        notes.append("no odd information: recovered density vanishes")
        factor = 0.0
    else:
        factor = 1.0 / mass
        f = f * factor
    return InversionResult(SphericalDensity(grid, f), fodd, factor, lambdas, trunc, degenerate, tuple(notes))


def relative_l1_error(f: SphericalDensity, ref: np.ndarray) -> float:
    ref = np.asarray(ref, dtype=float)
    return float(np.dot(f.grid.weights, np.abs(f.values - ref)) / np.dot(f.grid.weights, np.abs(ref)))


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayResult:
    statistic: float
    threshold: float
    passed: bool
    window: tuple


def decay_check(odd_norms, epsilon: float, zero_tol: float = 1e-14) -> DecayResult:
    """Tail maximum of ``|Q_{2m+1} f|_1^{1/m}`` over ``m in [M/2, M]`` against ``1/(1 + 2 eps)``.

    ``odd_norms[m]`` is the L1 norm of the degree ``2m + 1`` component;
    norms below ``zero_tol`` times the largest one count as exact zeros.
    """
    a = np.asarray(odd_norms, dtype=float)
    M = a.size - 1
    if M < 2:
        raise PreconditionError("need norms up to m >= 2")
    if epsilon <= 0:
        raise PreconditionError("epsilon must be positive")
    lo = max(1, M // 2)
    scale = max(a.max(), 1e-300)
    stats = [a[m] ** (1.0 / m) for m in range(lo, M + 1) if a[m] > zero_tol * scale]
    stat = max(stats) if stats else 0.0
    thr = 1.0 / (1.0 + 2.0 * epsilon)
    return DecayResult(float(stat), thr, bool(stat < thr), (lo, M))


def odd_spectrum(f: SphericalDensity, M: int) -> np.ndarray:
    """L1 norms of ``Q_{2m+1} f`` for ``m = 0..M``."""
    H = HarmonicAnalyzer(f.grid, 2 * M + 1)
    comps = H.project_all(f.values, range(1, 2 * M + 2, 2))
    return np.array([_norms(f.grid, comps[2 * m + 1])[0] for m in range(M + 1)])


def laplacian_power(f: SphericalDensity, k: int, max_degree: int) -> np.ndarray:
    """``sum_n zeta_n^k Q_n f`` with ``zeta_n = -n (n + p - 1)``."""
    if k < 0:
        raise PreconditionError("k must be >= 0")
    p = f.grid.p
    if k and k * math.log(max_degree * (max_degree + p - 1) or 1) > 700:
        raise NumericalFailure("Laplacian power overflows")
    H = HarmonicAnalyzer(f.grid, max_degree)
    comps = H.project_all(f.values, range(max_degree + 1))
    return sum((-n * (n + p - 1)) ** k * comps[n] for n in range(max_degree + 1))


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def simulate_binary(gamma_sampler: Callable, x_sampler: Callable, n: int, seed: int):
    """``Y = 1{Gamma' S >= 0}`` with ``S = lift(X)``; samplers take ``(rng, n)``."""
    G = np.atleast_2d(gamma_sampler(make_rng(seed, 0), n))
    X = np.asarray(x_sampler(make_rng(seed, 1), n), dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    S = lift_regressors(X)
    if G.shape != S.shape:
        raise PreconditionError("coefficient and lifted regressor dimensions differ")
    y = (np.einsum("ij,ij->i", G, S) >= 0).astype(np.int8)
    return y, X


# ---------------------------------------------------------------------------
# Test densities satisfying antipodal exclusion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CapPowerDensity:
    """``f(u) = c (u'n)_+^k``: supported on the hemisphere around ``n``."""

    p: int
    power: int
    direction: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.direction, dtype=float).ravel()
        if n.size != self.p + 1 or not np.linalg.norm(n) > 0:
            raise DataError("direction must be a nonzero vector in R^{p+1}")
        if self.power < 1:
            raise DataError("power must be >= 1")
        object.__setattr__(self, "direction", n / np.linalg.norm(n))

    @property
    def constant(self) -> float:
        k = self.power
        if self.p == 1:
            # int_{-pi/2}^{pi/2} cos^k = sqrt(pi) Gamma((k+1)/2) / Gamma(k/2 + 1)
            return math.exp(gammaln(0.5 * k + 1) - gammaln(0.5 * (k + 1))) / math.sqrt(math.pi)
        return (k + 1) / (2 * math.pi)

    def __call__(self, U) -> np.ndarray:
        return self.constant * np.clip(np.asarray(U) @ self.direction, 0.0, None) ** self.power

    def breaks(self) -> list:
        """Absolute angles of the support edges on the circle."""
        if self.p != 1:
            return []
        a = math.atan2(self.direction[1], self.direction[0])
        return [a - math.pi / 2, a + math.pi / 2]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.p == 1:
            a0 = math.atan2(self.direction[1], self.direction[0])
            out = np.empty(0)
            while out.size < n:
                th = rng.uniform(-math.pi / 2, math.pi / 2, 2 * n)
                keep = rng.uniform(size=2 * n) <= np.cos(th) ** self.power
                out = np.concatenate([out, th[keep]])
            a = a0 + out[:n]
            return np.stack([np.cos(a), np.sin(a)], axis=1)
        x = rng.uniform(size=n) ** (1.0 / (self.power + 1))
        az = rng.uniform(0, 2 * math.pi, n)
        e1, e2 = _frame(self.direction)
        st = np.sqrt(1 - x * x)
        return (st * np.cos(az))[:, None] * e1 + (st * np.sin(az))[:, None] * e2 + x[:, None] * self.direction

    def forward(self, grid: SphereGrid, n_radial: int = 32, n_angular: int = 64) -> np.ndarray:
        """Choice probabilities ``T f + 1/2`` at the grid nodes."""
        return hemispherical_forward(self, grid.nodes, self.p, n_radial, n_angular, self.breaks(), mass=1.0) + 0.5
