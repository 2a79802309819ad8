"""Perturbed complex exponentials ``f_j(z) = exp(i pi lambda_j z / T)``.

Frequencies are ``lambda_j = j + c r^{-|j|}`` with ``c = 1/5`` and ``r > 1``.
Exact checks carry ``r`` symbolically (sums of the frequencies are an
integer plus a Laurent polynomial in ``r``); numerical work uses a float
value of ``r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import IllConditionedError, PreconditionError

KADEC_BOUND = Fraction(1, 4)
COND_LIMIT = 1e12


def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class ExponentSystem:
    """Frequencies ``lambda_j`` for ``j`` in a finite symmetric set without 0.

    ``r`` is treated as transcendental in exact checks.  ``coefficient`` is
    the size of the perturbation (``1/5``); 0 gives integer frequencies.
    """

    r: float = math.e
    T: float = 1.0
    J: tuple = tuple(j for j in range(-25, 26) if j)
    coefficient: Fraction = Fraction(1, 5)

    def __post_init__(self):
        if not self.r > 1:
            raise PreconditionError("r must exceed 1")
        if not self.T > 0:
            raise PreconditionError("T must be positive")
        J = tuple(sorted(int(j) for j in self.J))
        if not J or 0 in J or len(set(J)) != len(J):
            raise PreconditionError("J must be a nonempty set of nonzero integers")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "coefficient", _as_fraction(self.coefficient))

    @classmethod
    def symmetric(cls, n: int, r: float = math.e, T: float = 1.0, coefficient=Fraction(1, 5)):
        """``J = {-n..-1, 1..n}``."""
        return cls(r, T, tuple(j for j in range(-n, n + 1) if j), coefficient)

    def exact(self, j: int) -> tuple:
        """``(integer part, coefficient, exponent of r)``."""
        return (j, self.coefficient, -abs(j))

    @property
    def lambdas(self) -> np.ndarray:
        c = float(self.coefficient)
        return np.array([j + c * self.r ** (-abs(j)) for j in self.J])

    def basis(self, z) -> np.ndarray:
        """Matrix ``f_j(z_i)``, shape ``(len(z), len(J))``."""
        z = np.asarray(z, dtype=float)
        return np.exp(1j * np.pi * np.multiply.outer(z, self.lambdas) / self.T)

    def is_increasing(self) -> bool:
        return bool(np.all(np.diff(self.lambdas) > 0))


@dataclass(frozen=True)
class KadecResult:
    deviation_coefficient: Fraction  # sup |lambda_j - j| = coefficient / r
    deviation: float
    passed: bool

    def to_dict(self) -> dict:
        return {"deviation": f"{self.deviation_coefficient}/r", "value": self.deviation, "passed": self.passed}


def kadec_check(sys: ExponentSystem) -> KadecResult:
    """Compare ``sup_j |lambda_j - j| = c / r`` with ``1/4`` exactly.

    The supremum is over all nonzero ``j`` (attained at ``|j| = 1``); the
    comparison ``c / r < 1/4`` is decided in rational arithmetic on the exact
    binary value of ``r``.
    """
    r = _as_fraction(sys.r)
    if r <= 1:
        raise PreconditionError("r must exceed 1")
    dev = sys.coefficient / r
    return KadecResult(sys.coefficient, float(dev), dev < KADEC_BOUND)


@dataclass(frozen=True)
class IndependenceResult:
    independent: bool
    witness: Optional[tuple]
    explored_bound: int
    complete: bool
    n_checked: int


def _combination_value(sys: ExponentSystem, counts: dict):
    integer = 0
    laurent: dict = {}
    for j, b in counts.items():
        integer += b * j
        e = -abs(j)
        laurent[e] = laurent.get(e, Fraction(0)) + b * sys.coefficient
    return integer, {e: c for e, c in laurent.items() if c != 0}


def exponent_independence(sys: ExponentSystem, B: int, budget: int = 2_000_000) -> IndependenceResult:
    """Search ``b`` in ``N_0^{|J|}`` with ``1 <= |b|_1 <= B`` for ``sum b_j lambda_j = 0``.

    Each sum is ``integer + sum_e q_e r^e`` with rational ``q_e``; since ``r``
    is treated as transcendental it vanishes iff every part vanishes.  Stops
    after ``budget`` combinations and reports the fully explored bound.
    """
    if B < 1:
        raise PreconditionError("B must be >= 1")
    n = 0
    for total in range(1, B + 1):
        for combo in combinations_with_replacement(sys.J, total):
            n += 1
            if n > budget:
                return IndependenceResult(True, None, total - 1, False, n - 1)
            counts: dict = {}
            for j in combo:
                counts[j] = counts.get(j, 0) + 1
            integer, laurent = _combination_value(sys, counts)
            if integer == 0 and not laurent:
                witness = tuple(counts.get(j, 0) for j in sys.J)
                return IndependenceResult(False, witness, total, True, n)
    return IndependenceResult(True, None, B, True, n)


@dataclass(frozen=True)
class GramResult:
    gram: np.ndarray
    min_eig: float
    max_eig: float
    condition: float


def gram_matrix(sys: ExponentSystem) -> np.ndarray:
    """``<f_j, f_k>`` on ``L^2(-T, T)``: ``2T sinc(pi (lambda_j - lambda_k))``."""
    lam = sys.lambdas
    d = np.pi * (lam[:, None] - lam[None, :])
    G = 2 * sys.T * np.sinc(d / np.pi)
    np.fill_diagonal(G, 2 * sys.T)
    return G


def gram_frame_bounds(sys: ExponentSystem) -> GramResult:
    """Extreme eigenvalues of the truncated Gram matrix (estimates, not certified bounds)."""
    G = gram_matrix(sys)
    ev = np.linalg.eigvalsh(G)
    return GramResult(G, float(ev[0]), float(ev[-1]), float(ev[-1] / ev[0]) if ev[0] > 0 else math.inf)


def _quadrature(sys: ExponentSystem, nodes_per_unit: int = 8, order: int = 16):
    """Composite Gauss-Legendre on ``[-T, T]`` resolving the fastest oscillation."""
    lam_max = float(np.abs(sys.lambdas).max())
    total = max(order, int(math.ceil(nodes_per_unit * math.pi * lam_max * 2)))
    panels = max(1, int(math.ceil(total / order)))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(-sys.T, sys.T, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    z = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wz = (half[:, None] * w[None, :]).ravel()
    return z, wz


@dataclass(frozen=True)
class Expansion:
    coefficients: np.ndarray
    residual: float
    condition: float


def biorthogonal_expand(sys: ExponentSystem, g: Callable, nodes_per_unit: int = 8,
                        cond_limit: float = COND_LIMIT) -> Expansion:
    """Coefficients ``gamma`` with ``Gram gamma = (<g, f_j>)_j`` and the L2 residual."""
    G = gram_matrix(sys)
    cond = float(np.linalg.cond(G))
    if not cond < cond_limit:
        raise IllConditionedError(f"Gram condition number {cond:.3g} exceeds {cond_limit:.0e}")
    z, wz = _quadrature(sys, nodes_per_unit)
    F = sys.basis(z)
    gv = np.asarray(g(z), dtype=complex)
    b = F.conj().T @ (wz * gv)
    gamma = np.linalg.solve(G, b)
    r = gv - F @ gamma
    res = float(math.sqrt(np.sum(wz * np.abs(r) ** 2)))
    return Expansion(gamma, res, cond)


@dataclass(frozen=True)
class SNLSummary:
    x: np.ndarray
    values: np.ndarray  # (n_x, n_atoms), complex
    mean: np.ndarray
    variance: np.ndarray
    quantiles: dict
    max_imag: float


def _weighted_quantile(v: np.ndarray, w: np.ndarray, q: float) -> float:
    order = np.argsort(v, kind="stable")
    cw = np.cumsum(w[order])
    k = int(np.searchsorted(cw, q * cw[-1] - 1e-12))
    return float(v[order][min(k, v.size - 1)])


def snl_forward_extrapolate(sys: ExponentSystem, thetas: Sequence, weights, coefficients: Callable,
                            x, probs: Sequence[float] = (0.1, 0.25, 0.5, 0.75, 0.9)) -> SNLSummary:
    """Evaluate ``Y = gamma_0(theta) + sum_j gamma_j(theta) f_j(x)`` per atom.

    ``coefficients(theta)`` returns a mapping ``{0: gamma_0, j: gamma_j}``;
    missing ``j`` count as 0.  ``x`` may lie outside ``[-T, T]``.
    Summaries use the real part of ``Y``; the largest imaginary part is
    reported.
    """
    w = np.asarray(weights, dtype=float)
    if len(thetas) != w.size:
        raise PreconditionError("one weight per atom required")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    F = sys.basis(x)
    vals = np.empty((x.size, len(thetas)), dtype=complex)
    for a, th in enumerate(thetas):
        c = coefficients(th)
        g = np.array([c.get(j, 0.0) for j in sys.J], dtype=complex)
        vals[:, a] = c.get(0, 0.0) + F @ g
    re = vals.real
    mean = re @ w
    var = (re - mean[:, None]) ** 2 @ w
    qs = {float(q): np.array([_weighted_quantile(re[i], w, q) for i in range(x.size)]) for q in probs}
    return SNLSummary(x, vals, mean, var, qs, float(np.abs(vals.imag).max()))
