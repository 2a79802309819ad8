"""Linear random-coefficients model ``Y = alpha + beta' X``.

Forward simulation and population moments, the per-degree moment system
(the conditional moment ``E[Y^k | X = x]`` is a polynomial of degree ``k``
in ``x`` whose coefficients are multinomial multiples of the mixed moments
of ``Gamma = (alpha, beta)``), recovery from characteristic functions when
the coefficients are independent, the observationally equivalent
counterexample built from a polynomial vanishing on the support, and
finite moment-problem reconstruction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .cfgrid import CharFnGrid, cf_moments, divide_with_zeros
from .errors import DataError, NumericalFailure, PreconditionError
from .rng import make_rng
from .uniqueness import RANK_RTOL, SupportSet, monomial_exponents, scaled_rank

RESIDUAL_RTOL = 1e-8


# ---------------------------------------------------------------------------
# Multi-indices and small polynomial helpers
# ---------------------------------------------------------------------------


def multinomial(k: int, j: Sequence[int]) -> int:
    out = math.factorial(k)
    for a in j:
        out //= math.factorial(a)
    return out


def homogeneous_indices(dim: int, k: int) -> list[tuple]:
    """Multi-indices in ``dim`` slots with ``|j| = k`` (graded-lex order)."""
    return monomial_exponents(dim, k, homogeneous=True)


def all_indices(dim: int, K: int) -> list[tuple]:
    return monomial_exponents(dim, K)


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0.0) + ca * cb
    return out


def _poly_pow(a: dict, k: int, dim: int) -> dict:
    out = {tuple([0] * dim): 1.0}
    for _ in range(k):
        out = _poly_mul(out, a)
    return out


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RCModel:
    """Discrete coefficient law: rows of ``atoms`` are ``(alpha, beta_1..beta_p)``."""

    atoms: np.ndarray
    weights: np.ndarray
    support_box: Optional[np.ndarray] = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if A.shape[0] != w.size:
            raise DataError("one weight per atom required")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DataError("weights must be positive and sum to 1")
        if not np.all(np.isfinite(A)):
            raise DataError("atoms must be finite")
        if self.support_box is not None:
            box = np.asarray(self.support_box, dtype=float)
            if box.shape != (A.shape[1], 2):
                raise DataError("support box needs one interval per coordinate")
            if np.any(A < box[:, 0] - 1e-12) or np.any(A > box[:, 1] + 1e-12):
                raise DataError("atoms must lie inside the support box")
            object.__setattr__(self, "support_box", box)
        A.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", A)
        object.__setattr__(self, "weights", w)

    @property
    def p(self) -> int:
        return self.atoms.shape[1] - 1

    def index_values(self, x: np.ndarray) -> np.ndarray:
        """``alpha + beta' x`` for every (point, atom) pair."""
        X = np.atleast_2d(np.asarray(x, dtype=float))
        return self.atoms[:, 0][None, :] + X @ self.atoms[:, 1:].T


@dataclass(frozen=True)
class ConditionalMomentTable:
    points: SupportSet
    values: np.ndarray  # shape (n_points, K+1), column 0 is 1

    @property
    def K(self) -> int:
        return self.values.shape[1] - 1


@dataclass(frozen=True)
class MixedMomentSet:
    """Mixed moments ``E[Gamma^m]`` for multi-indices ``|m| <= K``."""

    dim: int
    K: int
    entries: dict

    def __post_init__(self):
        if abs(self.entries.get(tuple([0] * self.dim), 1.0) - 1.0) > 1e-8:
            raise DataError("s(0) must equal 1")

    def __getitem__(self, m) -> float:
        return self.entries[tuple(m)]

    def indices(self) -> list[tuple]:
        return [m for m in all_indices(self.dim, self.K) if m in self.entries]

    def vector(self, order: Optional[Sequence[tuple]] = None) -> np.ndarray:
        order = order or self.indices()
        return np.array([self.entries[m] for m in order])

    @classmethod
    def from_atoms(cls, atoms, weights, K: int) -> "MixedMomentSet":
        A = np.atleast_2d(np.asarray(atoms, dtype=float))
        w = np.asarray(weights, dtype=float)
        dim = A.shape[1]
        ent = {m: float(np.sum(w * np.prod(A ** np.asarray(m)[None, :], axis=1))) for m in all_indices(dim, K)}
        return cls(dim, K, ent)

    def max_relative_error(self, other: "MixedMomentSet") -> float:
        errs = []
        for m in self.indices():
            a, b = self.entries[m], other.entries[m]
            errs.append(abs(a - b) / max(abs(b), 1.0))
        return float(max(errs))

    def to_rows(self) -> list:
        return [{"index": list(m), "value": float(self.entries[m])} for m in self.indices()]


# ---------------------------------------------------------------------------
# Forward model
# ---------------------------------------------------------------------------


def simulate_linear(model: RCModel, x_points: SupportSet, n: int, seed: int):
    """Draw ``n`` units per support point; returns ``(x, y)`` arrays.

    Rows are ordered point by point.  Coefficients are drawn independently of
    ``x`` from the atom list with a counter-based generator, so results are
    reproducible bit for bit given the seed.
    """
    if n < 1:
        raise PreconditionError("n must be >= 1")
    rng = make_rng(seed)
    X = x_points.points
    idx = rng.choice(model.weights.size, size=(X.shape[0], n), p=model.weights)
    G = model.atoms[idx]  # (n_pts, n, p+1)
    y = G[..., 0] + np.einsum("inp,ip->in", G[..., 1:], X)
    return np.repeat(X, n, axis=0), y.ravel()


def conditional_moments(model: RCModel, x_points: SupportSet, K: int) -> ConditionalMomentTable:
    """Exact ``E[(alpha + beta' x)^k]`` for ``k = 0..K`` by atom enumeration."""
    if not isinstance(model, RCModel):
        raise PreconditionError("closed-form conditional moments need a discrete law")
    if x_points.p != model.p:
        raise PreconditionError("support dimension does not match the model")
    idx = model.index_values(x_points.points)  # (n_pts, n_atoms)
    vals = np.stack([idx**k @ model.weights for k in range(K + 1)], axis=1)
    return ConditionalMomentTable(x_points, vals)


def index_moment_design(k: int, x_points, p: Optional[int] = None):
    """Design for degree ``k``: column ``j`` is ``multinomial(k; j) x^{j[1:]}``.

    Returns ``(matrix, indices)`` with multi-indices over ``p + 1`` slots in
    graded-lex order.
    """
    if k < 1:
        raise PreconditionError("k must be >= 1")
    X = x_points.points if isinstance(x_points, SupportSet) else np.atleast_2d(np.asarray(x_points, dtype=float))
    p = X.shape[1] if p is None else p
    J = homogeneous_indices(p + 1, k)
    coef = np.array([multinomial(k, j) for j in J], dtype=float)
    E = np.array([j[1:] for j in J], dtype=int)
    mono = np.prod(X[:, None, :] ** E[None, :, :], axis=2)
    return mono * coef[None, :], J


@dataclass(frozen=True)
class DegreeReport:
    degree: int
    rank: int
    n_unknowns: int
    residual: float
    identified: bool
    nullspace: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {"degree": self.degree, "rank": self.rank, "n_unknowns": self.n_unknowns,
                "residual": self.residual, "identified": self.identified,
                "nullspace": None if self.nullspace is None else [float(v) for v in self.nullspace]}


def solve_scaled(A: np.ndarray, b: np.ndarray, rtol: float = RANK_RTOL):
    """Least squares with unit-norm column scaling and a relative rank cut.

    Returns ``(x, rank, relative residual, nullspace vector or None)``; the
    minimum-norm solution is returned when the system is rank deficient.
    """
    rank, s, Vt, norms = scaled_rank(A, rtol)
    As = A / norms
    U, sv, Vt2 = np.linalg.svd(As, full_matrices=False)
    keep = sv > rtol * sv[0] if sv.size and sv[0] > 0 else np.zeros_like(sv, dtype=bool)
    coef = (U[:, keep].T @ b) / sv[keep]
    xs = Vt2[keep].T @ coef
    x = xs / norms
    res = float(np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300))
    null = None
    if rank < A.shape[1]:
        v = Vt[-1] / norms
        null = v / np.linalg.norm(v)
    return x, rank, res, null


def recover_mixed_moments(table: ConditionalMomentTable, rtol: float = RANK_RTOL,
                          residual_tol: float = RESIDUAL_RTOL):
    """Solve the per-degree systems for the mixed moments of ``Gamma``.

    Returns ``(MixedMomentSet, [DegreeReport])``.  A degree is identified
    when its design has full column rank and the relative residual is below
    ``residual_tol``; otherwise the minimum-norm solution is kept and the
    report carries a nullspace vector.
    """
    X = table.points.points
    p = X.shape[1]
    entries = {tuple([0] * (p + 1)): 1.0}
    reports = []
    for k in range(1, table.K + 1):
        A, J = index_moment_design(k, X, p)
        x, rank, res, null = solve_scaled(A, table.values[:, k], rtol)
        ok = rank == len(J) and res <= residual_tol
        reports.append(DegreeReport(k, rank, len(J), res, ok, null))
        for j, v in zip(J, x):
            entries[j] = float(v)
    return MixedMomentSet(p + 1, table.K, entries), reports


# ---------------------------------------------------------------------------
# Reparametrization
# ---------------------------------------------------------------------------


def affine_reparametrize(points: SupportSet, M, xbar, K: int = 0):
    """Points ``M (x - xbar)`` and the induced linear map on mixed moments.

    The coefficients transform to ``(alpha + beta' xbar, M^{-T} beta)`` so
    that the index is unchanged.  Returns ``(new SupportSet, pullback)``
    where ``pullback(MixedMomentSet) -> MixedMomentSet`` and
    ``pullback.matrices[k]`` is the degree-``k`` matrix acting on moment
    vectors in graded-lex order.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    p = points.p
    if M.shape != (p, p):
        raise PreconditionError("M must be p x p")
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise PreconditionError("singular reparametrization matrix")
    new_pts = (points.points - xbar[None, :]) @ M.T
    L = np.zeros((p + 1, p + 1))
    L[0, 0] = 1.0
    L[0, 1:] = xbar
    L[1:, 1:] = np.linalg.inv(M).T
    dim = p + 1
    forms = []
    for i in range(dim):
        forms.append({tuple(int(a == c) for a in range(dim)): L[i, c] for c in range(dim) if L[i, c] != 0})
    matrices = {}
    for k in range(1, K + 1):
        J = homogeneous_indices(dim, k)
        pos = {j: n for n, j in enumerate(J)}
        T = np.zeros((len(J), len(J)))
        for r, m in enumerate(J):
            poly = {tuple([0] * dim): 1.0}
            for i in range(dim):
                if m[i]:
                    poly = _poly_mul(poly, _poly_pow(forms[i], m[i], dim))
            for e, c in poly.items():
                T[r, pos[e]] += c
        matrices[k] = T

    def pullback(ms: MixedMomentSet) -> MixedMomentSet:
        ent = {tuple([0] * dim): 1.0}
        for k in range(1, min(K, ms.K) + 1):
            J = homogeneous_indices(dim, k)
            v = matrices[k] @ np.array([ms.entries[j] for j in J])
            ent.update({j: float(x) for j, x in zip(J, v)})
        return MixedMomentSet(dim, min(K, ms.K), ent)

    pullback.matrices = matrices
    pullback.transform = L
    return SupportSet(new_pts), pullback


# ---------------------------------------------------------------------------
# Characteristic-function routes
# ---------------------------------------------------------------------------


def partial_fourier_slice(model: RCModel, t: float, xi) -> np.ndarray:
    """``xi -> sum_a w_a exp(i (t alpha_a + xi' beta_a))`` at the rows of ``xi``."""
    Xi = np.atleast_2d(np.asarray(xi, dtype=float))
    ph = t * model.atoms[:, 0][None, :] + Xi @ model.atoms[:, 1:].T
    return np.exp(1j * ph) @ model.weights


@dataclass(frozen=True)
class MarginalRecovery:
    alpha: CharFnGrid
    betas: tuple
    t0: float
    moments: dict = field(default_factory=dict)
    zeros: tuple = ()


def independent_marginals_recover(cfs: Sequence[CharFnGrid], points, mode: str = "full_grid",
                                  threshold: float = 1e-6, t0_threshold: float = 1e-4,
                                  moment_order: int = 4) -> MarginalRecovery:
    """Recover ``phi_alpha`` and each ``phi_beta_j`` from conditional CFs.

    ``cfs[0]`` is the CF of ``Y`` given ``x = 0``; ``cfs[j]`` the CF given the
    ``j``-th point, and the points form an upper-triangular matrix with
    nonzero diagonal (``points[j][i] = 0`` for ``i > j``).  The CF of
    ``beta_j`` is returned on the grid ``t * points[j][j]``; off-diagonal
    factors are evaluated by cubic interpolation of already recovered CFs.

    ``"near_zero"``: divisions restricted to ``(-t0, t0)`` where the denominator
    stays above ``t0_threshold``; moments of each ``beta_j`` are extracted at
    0.  ``"full_grid"``: divisions on the full grid, crossing isolated zeros by
    continuity.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    p = P.shape[0]
    if P.shape != (p, p):
        raise PreconditionError("need p points in R^p")
    for j in range(p):
        if abs(P[j, j]) < 1e-12 or np.any(np.abs(P[j, j + 1:]) > 0):
            raise PreconditionError("points must form an upper-triangular matrix with nonzero diagonal")
    t = cfs[0].t
    for c in cfs:
        if not np.array_equal(c.t, t):
            raise PreconditionError("grids must be aligned")
    phi_a = cfs[0]
    betas: list[CharFnGrid] = []
    t0 = float(t.max())
    zeros: list = []
    moments: dict = {}
    for j in range(p):
        den = phi_a.values.copy()
        for i in range(j):
            den = den * betas[i].at(t * P[j, i])
        if mode == "near_zero":
            ok = np.abs(den) > t0_threshold
            r = _symmetric_radius(t, ok)
            t0 = min(t0, r)
            inside = np.abs(t) < r
            vals = np.full(t.shape, np.nan + 0j)
            vals[inside] = cfs[j + 1].values[inside] / den[inside]
            g = CharFnGrid(t[inside] * P[j, j], vals[inside], "recovered") if P[j, j] > 0 else \
                CharFnGrid((t[inside] * P[j, j])[::-1], vals[inside][::-1], "recovered")
            betas.append(g)
            moments[j + 1] = cf_moments(g, moment_order)
        elif mode == "full_grid":
            vals, z = divide_with_zeros(cfs[j + 1].values, den, threshold)
            zeros.append([float(t[k]) for k in z])
            s = t * P[j, j]
            order = np.argsort(s)
            betas.append(CharFnGrid(s[order], vals[order], "recovered"))
        else:
            raise PreconditionError(f"unknown mode {mode!r}")
    if mode == "near_zero":
        moments[0] = cf_moments(CharFnGrid(t[np.abs(t) < t0], phi_a.values[np.abs(t) < t0]), moment_order)
    return MarginalRecovery(phi_a, tuple(betas), t0, moments, tuple(map(tuple, zeros)))


def _symmetric_radius(t: np.ndarray, ok: np.ndarray) -> float:
    """Largest ``r`` such that ``ok`` holds at every grid point with ``|t| < r``."""
    bad = np.abs(t[~ok])
    return float(bad.min()) if bad.size else float(np.abs(t).max()) + 1e-12


# ---------------------------------------------------------------------------
# Counterexample
# ---------------------------------------------------------------------------


def _pmul(a: list, b: list) -> list:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _padd(a: list, b: list) -> list:
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]


def _pder(a: list) -> list:
    return [i * a[i] for i in range(1, len(a))] or [0]


def bump_derivative_polys(n_max: int) -> list:
    """Exact derivatives of ``b(g) = g exp(-1/(1 - g^2))`` on ``|g| < 1``.

    ``b^{(n)}(g) = P_n(g) / u^{2n} * exp(-1/u)`` with ``u = 1 - g^2``; the
    integer polynomials ``P_n`` (ascending coefficients) follow from
    ``P_{n+1} = u (P_n' u + 4 n g P_n) - 2 g P_n``.
    """
    u = [1, 0, -1]
    P = [[0, 1]]
    for n in range(n_max):
        Pn = P[-1]
        a = 2 * n
        inner = _padd(_pmul(_pder(Pn), u), _pmul([0, 2 * a], Pn))
        P.append(_padd(_pmul(u, inner), _pmul([0, -2], Pn)))
    return P


def bump_derivative(g: np.ndarray, n: int, polys: Optional[list] = None) -> np.ndarray:
    polys = polys or bump_derivative_polys(n)
    g = np.asarray(g, dtype=float)
    out = np.zeros_like(g)
    inside = np.abs(g) < 1
    gi = g[inside]
    u = 1.0 - gi * gi
    Pn = np.polynomial.polynomial.polyval(gi, np.array(polys[n], dtype=float))
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        out[inside] = Pn * np.exp(-1.0 / u - 2 * n * np.log(u))
    return out


def bump_derivative_fd(g: np.ndarray, n: int, step: float = 1e-3) -> np.ndarray:
    """Nested central differences of the bump factor (cross-check oracle)."""
    g = np.asarray(g, dtype=float)
    if n == 0:
        return bump_derivative(g, 0)
    return (bump_derivative_fd(g + step, n - 1, step) - bump_derivative_fd(g - step, n - 1, step)) / (2 * step)


def homogenize(P: dict, p: int) -> dict:
    """Homogeneous ``Q(Z0, Z1..Zp) = Z0^k P(Z/Z0)`` with ``Q(1, x) = P(x)``."""
    k = max(sum(e) for e in P)
    return {(k - sum(e),) + tuple(e): float(c) for e, c in P.items() if c != 0}


@dataclass(frozen=True)
class Counterexample:
    """Base uniform law on ``[-1,1]^{p+1}`` and its perturbation ``base + c h/|h|_inf``.

    ``h = Q(d/dg) q`` is stored as a list of separable terms
    ``coef * prod_j b^{(e_j)}(g_j)`` so that moments reduce to 1-d integrals.
    """

    Q: dict
    dim: int
    c: float
    h_sup: float
    terms: tuple
    nodes: np.ndarray
    weights_1d: np.ndarray
    h_integral: float
    min_density: float
    tv_distance: float
    polys: tuple = ()

    def h(self, G: np.ndarray) -> np.ndarray:
        G = np.atleast_2d(G)
        out = np.zeros(G.shape[0])
        for coef, e in self.terms:
            term = np.full(G.shape[0], coef)
            for j, n in enumerate(e):
                term = term * bump_derivative(G[:, j], n, list(self.polys))
            out += term
        return out

    def base_density(self, G: np.ndarray) -> np.ndarray:
        G = np.atleast_2d(G)
        inside = np.all(np.abs(G) <= 1, axis=1)
        return np.where(inside, 0.5**self.dim, 0.0)

    def perturbed_density(self, G: np.ndarray) -> np.ndarray:
        return self.base_density(G) + self.c * self.h(G) / self.h_sup

    def _moments_1d(self, max_power: int):
        """``[n][a] = int g^a b^{(n)}(g) dg`` and uniform moments ``[a]``."""
        g, w = self.nodes, self.weights_1d
        nmax = max(max(e) for _, e in self.terms)
        pw = np.vstack([g**a for a in range(max_power + 1)])
        bump = {n: pw @ (w * bump_derivative(g, n, list(self.polys))) for n in range(nmax + 1)}
        unif = np.array([0.5 * (1 - (-1) ** (a + 1)) / (a + 1) for a in range(max_power + 1)])
        return bump, unif

    def index_moments(self, x_values, K: int):
        """Conditional moments ``E[(g_0 + g_1 x_1 + ...)^k]`` under both laws.

        ``x_values`` rows are regressor vectors (length ``dim - 1``).
        Returns arrays ``(base, perturbed)`` of shape ``(n_x, K + 1)``.
        """
        X = np.atleast_2d(np.asarray(x_values, dtype=float))
        if X.shape[1] == 1 and self.dim > 2:
            X = np.column_stack([X[:, 0] ** (i + 1) for i in range(self.dim - 1)])
        bump, unif = self._moments_1d(K)
        base = np.ones((X.shape[0], K + 1))
        pert = np.ones((X.shape[0], K + 1))
        for k in range(1, K + 1):
            J = homogeneous_indices(self.dim, k)
            coefs = np.array([multinomial(k, j) for j in J], dtype=float)
            vx = np.column_stack([np.ones(X.shape[0]), X])
            mono = np.prod(vx[:, None, :] ** np.asarray(J)[None, :, :], axis=2) * coefs
            mb = np.array([np.prod([unif[a] for a in j]) for j in J])
            mh = np.zeros(len(J))
            for coef, e in self.terms:
                mh += coef * np.array([np.prod([bump[e[i]][j[i]] for i in range(self.dim)]) for j in J])
            base[:, k] = mono @ mb
            pert[:, k] = mono @ (mb + self.c * mh / self.h_sup)
        return base, pert


def build_counterexample(Q: dict, p: Optional[int] = None, n_grid: int = 101, n_quad: int = 2001,
                         method: str = "exact") -> Counterexample:
    """Observationally equivalent pair of laws for a polynomial vanishing on the support.

    ``Q`` maps exponent tuples to coefficients.  Tuples of length ``p + 1``
    must be homogeneous; tuples of length ``p`` are read as a polynomial in
    the regressors and homogenized first.  Derivatives of the bump factors
    are exact (``method="exact"``) or nested finite differences with step
    ``1e-3`` (``method="fd"``).  The sup norm of ``h`` and the total
    variation distance are evaluated on an ``n_grid``-point tensor grid;
    1-d integrals use the trapezoid rule on ``n_quad`` nodes, which is
    spectrally accurate for these compactly supported smooth factors.
    """
    lens = {len(e) for e in Q}
    if len(lens) != 1:
        raise PreconditionError("inconsistent exponent lengths")
    L = lens.pop()
    if p is not None and L == p:
        Q = homogenize(Q, p)
        L = p + 1
    degs = {sum(e) for e, c in Q.items() if c != 0}
    if len(degs) != 1:
        raise PreconditionError("Q must be homogeneous")
    k = degs.pop()
    if k < 1:
        raise PreconditionError("Q must have degree >= 1")
    dim = L
    terms = tuple((float(c), tuple(e)) for e, c in sorted(Q.items(), reverse=True) if c != 0)
    nmax = max(max(e) for _, e in terms)
    polys = bump_derivative_polys(max(nmax, 1))
    nodes = np.linspace(-1.0, 1.0, n_quad)
    w1 = np.full(n_quad, nodes[1] - nodes[0])
    w1[[0, -1]] *= 0.5

    deriv = (lambda g, n: bump_derivative(g, n, polys)) if method == "exact" else bump_derivative_fd
    # sup and L1 of h on the tensor grid
    gg = np.linspace(-1.0, 1.0, n_grid)
    hv = np.zeros((n_grid,) * dim)
    for coef, e in terms:
        term = np.array(coef)
        for n in e:
            term = np.multiply.outer(term, deriv(gg, n))
        hv = hv + term
    h_sup = float(np.max(np.abs(hv)))
    if h_sup == 0:
        raise NumericalFailure("perturbation vanishes on the grid")
    cell = (gg[1] - gg[0]) ** dim
    base = 0.5**dim
    c = base
    tw = np.ones(n_grid)
    tw[[0, -1]] = 0.5
    W = tw
    for _ in range(dim - 1):
        W = np.multiply.outer(W, tw)
    l1 = float(np.sum(W * np.abs(hv)) * cell)
    tv = 0.5 * c * l1 / h_sup
    min_dens = float(base + c * hv.min() / h_sup)
    # integral of h from separable 1-d integrals
    integ = 0.0
    for coef, e in terms:
        integ += coef * np.prod([np.sum(w1 * deriv(nodes, n)) for n in e])
    return Counterexample(Q, dim, c, h_sup, terms, nodes, w1, float(integ), min_dens, tv, tuple(polys))


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Reconstruction:
    weights: np.ndarray
    grid: np.ndarray
    residual: float
    feasible: bool
    unique: bool
    rank: int


def reconstruct_distribution(moments: MixedMomentSet, grid, tol: float = 1e-8,
                             indices: Optional[Sequence[tuple]] = None) -> Reconstruction:
    """Nonnegative weights on ``grid`` matching the given mixed moments.

    Solves ``min |A w - s|`` over the simplex with NNLS on the system
    augmented by a heavily weighted row enforcing ``sum w = 1``.
    Uniqueness is assessed with a linear program: the solution is flagged
    non-unique when another feasible weight vector can move mass onto grid
    points outside its support, or when its support columns are dependent.
    """
    G = np.atleast_2d(np.asarray(grid, dtype=float))
    if G.shape[0] == 1 and moments.dim == 1:
        G = G.T
    if G.shape[1] != moments.dim:
        raise PreconditionError("grid dimension does not match the moments")
    idx = list(indices) if indices is not None else [m for m in moments.indices() if sum(m) > 0]
    A = np.prod(G[None, :, :] ** np.asarray(idx)[:, None, :], axis=2)
    s = np.array([moments.entries[m] for m in idx])
    scale = np.maximum(np.abs(A).max(axis=1), 1.0)
    As, ss = A / scale[:, None], s / scale
    lam = 1e4
    Aug = np.vstack([As, lam * np.ones(G.shape[0])])
    bug = np.concatenate([ss, [lam]])
    w, _ = optimize.nnls(Aug, bug, maxiter=50 * G.shape[0])
    res = float(np.linalg.norm(As @ w - ss) + abs(w.sum() - 1.0))
    feasible = res <= tol * max(1.0, np.linalg.norm(ss))
    rank, *_ = scaled_rank(np.vstack([A, np.ones(G.shape[0])]))
    supp = w > 1e-10
    unique = True
    if feasible:
        Afull = np.vstack([A, np.ones(G.shape[0])])
        r_supp, *_ = scaled_rank(Afull[:, supp]) if supp.any() else (0,)
        if r_supp < supp.sum():
            unique = False
        elif (~supp).any():
            lp = optimize.linprog(-(~supp).astype(float), A_eq=np.vstack([As, np.ones(G.shape[0])]),
                                  b_eq=np.concatenate([As @ w, [1.0]]), bounds=(0, None), method="highs")
            if lp.status == 0 and -lp.fun > 1e-7:
                unique = False
    return Reconstruction(w, G, res, bool(feasible), unique, rank)


def reconstruction_cf(rec: Reconstruction, t: np.ndarray, axis: int = 0) -> np.ndarray:
    return np.exp(1j * np.outer(t, rec.grid[:, axis])) @ rec.weights
