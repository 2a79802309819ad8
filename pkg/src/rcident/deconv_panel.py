"""Characteristic-function deconvolution and polynomial panel recovery.

Covers the two-sample ratio, the repeated-measurement model
``Y_t = delta + eps_t`` (Kotlarski), the ``T``-period polynomial panel
``Y_t = alpha + sum_j beta_j X_t^j + eps_t`` with its Vandermonde change of
variables, and the reduction of a monotone single-index panel to binary
choice.

The Kotlarski route marches a ratio of joint characteristic function
values outward from 0 on the grid, so it needs the joint CF of
``(Y1, Y2)`` on a thin band ``psi(t - s, s)`` for ``s`` equal to one and two
grid steps (see :class:`JointBand`).  Without the band only ``|phi_eps1|^2``
is available from the three marginal CFs; the fallback then assumes a
symmetric ``eps1``, extracts moments near 0 and extends globally through a
finite moment-problem reconstruction, which is much less accurate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations, product
from typing import Callable, Optional, Sequence

import numpy as np

from .cfgrid import (ZERO_THRESHOLD, CharFnGrid, _interp_at, cf_moments, derivative_at_zero,
                     divide_with_zeros, ecf, hermitian_renormalize)
from .errors import DataError, NumericalFailure, PreconditionError
from .laws import DiscreteLaw, ScalarLaw
from .rc_linear import (RESIDUAL_RTOL, DegreeReport, MixedMomentSet, _poly_mul, _poly_pow,
                        homogeneous_indices, reconstruct_distribution, reconstruction_cf, solve_scaled)
from .rng import make_rng
from .uniqueness import RANK_RTOL

T0_THRESHOLD = 1e-4
MEAN_TOL = 1e-6
VANDERMONDE_TOL = 1e-12


# ---------------------------------------------------------------------------
# Two-sample deconvolution
# ---------------------------------------------------------------------------


def _aligned(*grids: CharFnGrid) -> np.ndarray:
    t = grids[0].t
    for g in grids[1:]:
        if g.t.shape != t.shape or np.max(np.abs(g.t - t)) > 1e-12 * max(1.0, np.abs(t).max()):
            raise PreconditionError("characteristic function grids are not aligned")
    return t


def two_sample_deconvolution(phi_error: CharFnGrid, phi_sum: CharFnGrid,
                             threshold: float = ZERO_THRESHOLD) -> CharFnGrid:
    """``phi_signal = phi_sum / phi_error`` with isolated zeros crossed by continuity."""
    t = _aligned(phi_error, phi_sum)
    ratio, _ = divide_with_zeros(phi_sum.values, phi_error.values, threshold)
    return hermitian_renormalize(CharFnGrid(t, ratio, "recovered"))


# ---------------------------------------------------------------------------
# Kotlarski
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JointBand:
    """Joint CF ``psi(t1, t2) = E exp(i t1 Y1 + i t2 Y2)`` near the axis.

    ``one[n] = psi((n-1) h, h)`` and ``two[n] = psi((n-2) h, 2h)`` for grid
    points ``t_n = n h``, ``n = 0..N``; entries that refer to negative first
    arguments are unused.
    """

    step: float
    one: np.ndarray
    two: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.one, dtype=complex)
        b = np.asarray(self.two, dtype=complex)
        if a.shape != b.shape:
            raise DataError("band arrays must have equal length")
        object.__setattr__(self, "one", a)
        object.__setattr__(self, "two", b)

    @classmethod
    def from_joint_cf(cls, psi: Callable, step: float, n: int) -> "JointBand":
        t = np.arange(n + 1) * step
        return cls(step, psi(t - step, np.full_like(t, step)), psi(t - 2 * step, np.full_like(t, 2 * step)))

    @classmethod
    def from_sample(cls, y1, y2, step: float, n: int) -> "JointBand":
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)

        def psi(a, b):
            return np.array([np.mean(np.exp(1j * (u * y1 + v * y2))) for u, v in zip(a, b)])

        return cls.from_joint_cf(psi, step, n)


def population_joint_band(phi_delta: Callable, phi_e1: Callable, phi_e2: Callable,
                          step: float, n: int) -> JointBand:
    """Band of ``phi_delta(t1 + t2) phi_e1(t1) phi_e2(t2)`` from closed forms."""
    return JointBand.from_joint_cf(lambda a, b: phi_delta(a + b) * phi_e1(a) * phi_e2(b), step, n)


@dataclass(frozen=True)
class KotlarskiResult:
    phi_delta: CharFnGrid
    phi_e1: CharFnGrid
    phi_e2: CharFnGrid
    t0: float
    zeros: dict
    moments_e1: Optional[np.ndarray]
    mean_e1: float
    method: str
    residuals: dict

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "t0": self.t0,
            "zeros": {k: [float(x) for x in v] for k, v in sorted(self.zeros.items())},
            "moments_e1": None if self.moments_e1 is None else [float(x) for x in self.moments_e1],
            "mean_e1": self.mean_e1,
            "residuals": {k: float(v) for k, v in sorted(self.residuals.items())},
        }


def symmetric_radius(t: np.ndarray, ok: np.ndarray) -> float:
    """Largest ``r`` such that every grid point with ``|t| < r`` satisfies ``ok``."""
    bad = np.abs(t[~ok])
    if bad.size == 0:
        return float(np.abs(t).max())
    return float(bad.min())


def _march(phi_y1: CharFnGrid, phi_y2: CharFnGrid, band: JointBand, threshold: float):
    """Ratio march on ``t >= 0``: returns ``Q_n = phi_e1(nh) / phi_e1(h)^n`` and holes."""
    i0 = phi_y1.zero_index()
    N = phi_y1.t.size - 1 - i0
    if band.one.size < N + 1:
        raise PreconditionError("joint band shorter than the grid")
    if abs(band.step - phi_y1.step) > 1e-12 * phi_y1.step:
        raise PreconditionError("joint band step differs from the grid step")
    y1 = phi_y1.values[i0:]
    y2 = phi_y2.values[i0:]
    if min(abs(y1[1]), abs(y1[2]), abs(band.one[2])) < threshold:
        raise NumericalFailure("characteristic functions vanish next to 0")
    # R1(n) = phi(nh) / (phi((n-1)h) phi(h)),  R2(n) = phi(nh) / (phi((n-2)h) phi(2h))
    c1 = y2[1] / y1[1]
    c2 = y2[2] / y1[2]
    Q = np.ones(N + 1, dtype=complex)
    hole = np.zeros(N + 1, dtype=bool)
    r12 = y1[2] * c1 / band.one[2]
    for n in range(2, N + 1):
        if abs(band.one[n]) >= threshold and not hole[n - 1]:
            Q[n] = Q[n - 1] * y1[n] * c1 / band.one[n]
        elif abs(band.two[n]) >= threshold and not hole[n - 2]:
            Q[n] = Q[n - 2] * y1[n] * c2 / band.two[n] * r12
        else:
            hole[n] = True
    holes = np.flatnonzero(hole)
    if holes.size > 1 and np.any(np.diff(holes) == 1):
        raise NumericalFailure("joint characteristic function vanishes on a non-isolated region")
    for n in holes:
        Q[n] = _interp_at(Q, int(n), hole)
    return Q, holes


def _one_sided_derivative(f: np.ndarray, h: float, order: int = 6) -> complex:
    off = np.arange(order + 1, dtype=float)
    V = np.vander(off, increasing=True).T
    rhs = np.zeros(order + 1)
    rhs[1] = 1.0
    w = np.linalg.solve(V, rhs)
    return complex(np.dot(w, f[: order + 1]) / h)


def kotlarski_recover(phi_y1: CharFnGrid, phi_y2: CharFnGrid, phi_diff: CharFnGrid,
                      joint_band: Optional[JointBand] = None, threshold: float = ZERO_THRESHOLD,
                      t0_threshold: float = T0_THRESHOLD, moment_order: int = 4,
                      mean_tol: float = MEAN_TOL, support_grid=None) -> KotlarskiResult:
    """Recover the CFs of ``delta``, ``eps1`` and ``eps2`` in ``Y_t = delta + eps_t``.

    Inputs are the CFs of ``Y1``, ``Y2`` and ``Y2 - Y1`` on one symmetric
    uniform grid.  ``eps1`` is normalized to mean zero.

    With ``joint_band`` the CF of ``eps1`` is determined on the whole grid
    up to a factor ``exp(a t)`` by the march of :func:`_march`; ``a`` is fixed
    by the mean-zero normalization from a one-sided derivative of
    ``log Q`` at 0.  Without it, ``eps1`` is assumed symmetric: ``|phi_eps1|``
    is read off on ``(-t0, t0)``, its moments are extracted at 0 and a
    nonnegative reconstruction on ``support_grid`` supplies the global CF.

    ``phi_delta = phi_Y1 / phi_eps1`` and ``phi_eps2(t) = phi_diff(t) /
    phi_eps1(-t)`` follow by division with isolated zeros of ``phi_eps1``
    crossed by continuity.
    """
    t = _aligned(phi_y1, phi_y2, phi_diff)
    for g in (phi_y1, phi_y2, phi_diff):
        g.check(tol0=1e-10, tol_herm=1e-8)
    if not phi_y1.is_uniform():
        raise PreconditionError("grid must be uniform")
    h = phi_y1.step
    ok = (np.abs(phi_y1.values) > t0_threshold) & (np.abs(phi_y2.values) > t0_threshold) & \
         (np.abs(phi_diff.values) > t0_threshold)
    t0 = symmetric_radius(t, ok)
    zeros: dict = {}
    if joint_band is not None:
        Q, holes = _march(phi_y1, phi_y2, joint_band, threshold)
        zeros["joint_band"] = [float(n * h) for n in holes]
        logQ = np.log(Q[:7])
        a = -_one_sided_derivative(logQ, h)
        pos = Q * np.exp(a * np.arange(Q.size) * h)
        vals = np.concatenate([np.conj(pos[:0:-1]), pos])
        method = "joint_band"
        mom_grid = None
    else:
        inside = np.abs(t) < t0
        if inside.sum() < 9:
            raise NumericalFailure("no usable neighbourhood of 0 for the symmetric fallback")
        mod2 = (phi_diff.values[inside] * phi_y1.values[inside] / phi_y2.values[inside]).real
        local = CharFnGrid(t[inside], np.sqrt(np.clip(mod2, 0.0, None)), "recovered")
        mom = cf_moments(local, min(8, max(moment_order, 4)))
        if support_grid is None:
            sd = math.sqrt(max(mom[2], 1e-12))
            support_grid = np.linspace(-6 * sd, 6 * sd, 241)
        K = mom.size - 1
        ms = MixedMomentSet(1, K, {(k,): float(mom[k]) for k in range(K + 1)})
        rec = reconstruct_distribution(ms, np.asarray(support_grid, dtype=float)[:, None], tol=1e-4)
        vals = reconstruction_cf(rec, t)
        method = "symmetric_moment_extension"
        mom_grid = rec
    phi_e1 = CharFnGrid(t, vals, "recovered")
    delta, z1 = divide_with_zeros(phi_y1.values, phi_e1.values, threshold)
    e2, z2 = divide_with_zeros(phi_diff.values, np.conj(phi_e1.values), threshold)
    zeros["phi_e1"] = [float(t[k]) for k in z1]
    phi_delta = CharFnGrid(t, delta, "recovered")
    phi_e2 = CharFnGrid(t, e2, "recovered")
    mean = derivative_at_zero(phi_e1, 1).imag if joint_band is not None else 0.0
    if abs(mean) > mean_tol:
        raise NumericalFailure(f"recovered eps1 has mean {mean:.3g} after normalization")
    try:
        moments = cf_moments(phi_e1, min(moment_order, 8))
    except NumericalFailure:
        moments = None
    residuals = {
        "y1_identity": float(np.max(np.abs(phi_y1.values - delta * phi_e1.values))),
        "diff_identity": float(np.max(np.abs(phi_diff.values - e2 * np.conj(phi_e1.values)))),
    }
    if mom_grid is not None:
        residuals["reconstruction"] = mom_grid.residual
    return KotlarskiResult(phi_delta, phi_e1, phi_e2, float(t0), zeros, moments, float(mean), method, residuals)


def kotlarski_population_inputs(delta, e1, e2, t_max: float = 5.0, step: float = 1e-2):
    """Population inputs for ``Y_t = delta + eps_t`` from laws with closed-form CFs.

    Returns ``(phi_y1, phi_y2, phi_diff, band)``.
    """
    def y1(s):
        return delta.cf(s) * e1.cf(s)

    def y2(s):
        return delta.cf(s) * e2.cf(s)

    def d(s):
        return e2.cf(s) * e1.cf(-np.asarray(s))

    g1 = CharFnGrid.symmetric(t_max, step, y1)
    g2 = CharFnGrid.symmetric(t_max, step, y2)
    gd = CharFnGrid.symmetric(t_max, step, d)
    band = population_joint_band(delta.cf, e1.cf, e2.cf, step, int(round(t_max / step)))
    return g1, g2, gd, band


def refinement_check(delta, e1, e2, steps: Sequence[float] = (1e-2, 5e-3), t_max: float = 5.0):
    """Sup error of recovered ``phi_delta`` against its closed form for each step."""
    out = []
    for h in steps:
        g1, g2, gd, band = kotlarski_population_inputs(delta, e1, e2, t_max, h)
        res = kotlarski_recover(g1, g2, gd, band)
        out.append(float(np.max(np.abs(res.phi_delta.values - delta.cf(res.phi_delta.t)))))
    return out


# ---------------------------------------------------------------------------
# Vandermonde change of variables
# ---------------------------------------------------------------------------


def _elementary_symmetric(vals: Sequence[float], r: int) -> float:
    if r == 0:
        return 1.0
    return float(sum(math.prod(c) for c in combinations(vals, r)))


def vandermonde(x) -> np.ndarray:
    """Rows ``(1, x_t, ..., x_t^{T-1})``."""
    x = np.asarray(x, dtype=float).ravel()
    return np.vander(x, increasing=True)


def check_regular_point(x, tol: float = VANDERMONDE_TOL) -> None:
    x = np.asarray(x, dtype=float).ravel()
    if np.any(np.abs(x) <= tol):
        raise PreconditionError("degenerate point: a coordinate is zero")
    d = np.abs(x[:, None] - x[None, :])
    if x.size > 1 and np.min(d[~np.eye(x.size, dtype=bool)]) <= tol:
        raise PreconditionError("degenerate point: repeated coordinates")


def inverse_vandermonde_entries(x) -> np.ndarray:
    """Closed form ``b[j, k]`` (0-based) with ``b[j, k] = (V(x)^{-1})[k, j]``.

    ``b_jk = (-1)^{k+1} e_{T-k}(x without x_j) / prod_{m != j} (x_m - x_j)``
    for 1-based ``k``, where ``e_r`` is the elementary symmetric polynomial;
    for ``k = T`` this reduces to ``(-1)^{T+1} / prod (x_m - x_j)``.
    """
    x = np.asarray(x, dtype=float).ravel()
    T = x.size
    b = np.empty((T, T))
    for j in range(T):
        others = [x[m] for m in range(T) if m != j]
        den = math.prod(xm - x[j] for xm in others)
        for k in range(1, T + 1):
            b[j, k - 1] = (-1) ** (k + 1) * _elementary_symmetric(others, T - k) / den
    return b


@dataclass(frozen=True)
class ThetaResult:
    theta: float
    vandermonde: np.ndarray
    b: np.ndarray
    direct_theta: float
    condition: float
    agreement: float


def theta_change_of_variables(v, x, tol: float = VANDERMONDE_TOL) -> ThetaResult:
    """``Theta(v, x) = sum_k v_k sum_j b_jk(x) x_j^T`` with a direct-solve cross-check.

    The direct route solves ``V(x)^T s = v`` and returns ``s' x^T``; the
    agreement between the two is reported, and a mismatch beyond ``tol``
    times the condition number raises.
    """
    v = np.asarray(v, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if v.shape != x.shape:
        raise PreconditionError("v and x must have the same length")
    check_regular_point(x, tol)
    T = x.size
    V = vandermonde(x)
    b = inverse_vandermonde_entries(x)
    xT = x**T
    theta = float(sum(v[k] * np.dot(b[:, k], xT) for k in range(T)))
    s = np.linalg.solve(V.T, v)
    direct = float(np.dot(s, xT))
    cond = float(np.linalg.cond(V))
    agree = abs(theta - direct)
    scale = max(1.0, abs(direct))
    if agree > tol * cond * scale * 10:
        raise NumericalFailure(f"closed-form and direct Theta disagree by {agree:.3g}")
    return ThetaResult(theta, V, b, direct, cond, agree)


# ---------------------------------------------------------------------------
# Panel model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PanelModel:
    """``Y_t = alpha + sum_{j=1}^T beta_j X_t^j + eps_t`` for ``t = 1..T``.

    ``atoms`` rows are ``(alpha, beta_1..beta_T)``; ``errors`` holds one
    :class:`ScalarLaw` per period; ``stayer`` is the common regressor value
    used for the error-recovery step.
    """

    atoms: np.ndarray
    weights: np.ndarray
    errors: tuple
    stayer: float = 1.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        T = A.shape[1] - 1
        if T < 1 or A.shape[0] != w.size:
            raise DataError("atoms must have T+1 columns and one weight per row")
        if np.any(w <= 0) or abs(w.sum() - 1) > 1e-12:
            raise DataError("weights must be positive and sum to 1")
        errs = tuple(ScalarLaw.from_dict(e) for e in self.errors)
        if len(errs) != T:
            raise DataError("one error law per period required")
        m = errs[0].moments(1)
        if m is None or abs(m[1]) > 1e-12:
            raise DataError("eps_1 must have mean zero")
        object.__setattr__(self, "atoms", A)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "errors", errs)

    @property
    def T(self) -> int:
        return self.atoms.shape[1] - 1

    def index(self, x) -> np.ndarray:
        """Index values, shape ``(n_points, T, n_atoms)``, for period regressors ``x``."""
        X = np.atleast_2d(np.asarray(x, dtype=float))
        powers = X[:, :, None] ** np.arange(self.T + 1)[None, None, :]
        return powers @ self.atoms.T

    def delta_law(self) -> DiscreteLaw:
        """Law of ``alpha + sum beta_k r^k`` at the stayer value ``r``."""
        r = self.stayer
        vals = self.atoms @ (r ** np.arange(self.T + 1))
        return DiscreteLaw(vals, self.weights)


def simulate_panel(model: PanelModel, x_points, n: int, seed: int):
    """Draw ``n`` units per row of ``x_points``; returns ``(unit, period, y, x)`` rows."""
    X = np.atleast_2d(np.asarray(x_points, dtype=float))
    if X.shape[1] != model.T:
        raise PreconditionError("regressor rows need one value per period")
    rng = make_rng(seed)
    P = X.shape[0]
    a = rng.choice(model.weights.size, size=(P, n), p=model.weights)
    idx = model.index(X)  # (P, T, atoms)
    Y = np.empty((P, n, model.T))
    for t in range(model.T):
        eps = model.errors[t].sample(make_rng(seed, 1, t), P * n).reshape(P, n)
        Y[:, :, t] = np.take_along_axis(idx[:, t, :], a, axis=1) + eps
    rows = []
    unit = 0
    for i in range(P):
        for u in range(n):
            for t in range(model.T):
                rows.append((unit, t + 1, float(Y[i, u, t]), float(X[i, t])))
            unit += 1
    return rows


def write_panel_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "period", "y", "x"])
        for r in rows:
            w.writerow([r[0], r[1], repr(r[2]), repr(r[3])])


def read_panel_csv(path, T: Optional[int] = None):
    """Load a panel CSV; returns ``(units, Y, X)`` arrays with one row per unit."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["unit", "period", "y", "x"]:
            raise DataError("panel CSV header must be unit,period,y,x")
        data: dict = {}
        for line, r in enumerate(reader, start=2):
            try:
                u, t, y, x = int(r["unit"]), int(r["period"]), float(r["y"]), float(r["x"])
            except (TypeError, ValueError) as e:
                raise DataError(f"malformed row at line {line}") from e
            data.setdefault(u, {})[t] = (y, x)
    if not data:
        return np.zeros(0, dtype=int), np.zeros((0, T or 0)), np.zeros((0, T or 0))
    T = T or max(max(d) for d in data.values())
    units = sorted(data)
    Y = np.empty((len(units), T))
    X = np.empty((len(units), T))
    for i, u in enumerate(units):
        for t in range(1, T + 1):
            if t not in data[u]:
                raise DataError(f"unit {u} is missing period {t}")
            Y[i, t - 1], X[i, t - 1] = data[u][t]
    return np.array(units), Y, X


# ---------------------------------------------------------------------------
# Error recovery at stayers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StayerInputs:
    """CFs at the stayer point: periods ``Y_t`` and differences ``Y_t - Y_1``."""

    periods: tuple
    diffs: tuple  # diffs[t-2] for t = 2..T
    bands: tuple  # joint bands of (Y_1, Y_t)


def stayer_population_inputs(model: PanelModel, t_max: float = 5.0, step: float = 1e-2) -> StayerInputs:
    delta = model.delta_law()
    per, diffs, bands = [], [], []
    for t in range(model.T):
        e = model.errors[t]
        per.append(CharFnGrid.symmetric(t_max, step, lambda s, e=e: delta.cf(s) * e.cf(s)))
    e1 = model.errors[0]
    for t in range(1, model.T):
        e = model.errors[t]
        diffs.append(CharFnGrid.symmetric(t_max, step, lambda s, e=e: e.cf(s) * e1.cf(-s)))
        bands.append(population_joint_band(delta.cf, e1.cf, e.cf, step, int(round(t_max / step))))
    return StayerInputs(tuple(per), tuple(diffs), tuple(bands))


@dataclass(frozen=True)
class PanelErrorRecovery:
    phi_delta: CharFnGrid
    phi_eps: tuple
    t0: float
    pairs: tuple


def panel_epsilon_recover(inputs: StayerInputs, **kw) -> PanelErrorRecovery:
    """Apply :func:`kotlarski_recover` to the period pairs ``(1, t)`` at the stayer point."""
    T = len(inputs.periods)
    if T < 2:
        raise PreconditionError("need at least two periods")
    if len(inputs.diffs) != T - 1:
        raise PreconditionError("one difference CF per later period required")
    bands = inputs.bands if inputs.bands else (None,) * (T - 1)
    results = [kotlarski_recover(inputs.periods[0], inputs.periods[t], inputs.diffs[t - 1], bands[t - 1], **kw)
               for t in range(1, T)]
    eps = (results[0].phi_e1,) + tuple(r.phi_e2 for r in results)
    return PanelErrorRecovery(results[0].phi_delta, eps, min(r.t0 for r in results), tuple(results))


# ---------------------------------------------------------------------------
# Panel moments
# ---------------------------------------------------------------------------


def panel_orders(T: int, K: int, cross_period: bool = True) -> list[tuple]:
    """Orders ``k`` with ``1 <= |k| <= K``; single-period only when ``cross_period`` is false."""
    out = []
    for d in range(1, K + 1):
        for k in homogeneous_indices(T, d):
            if cross_period or sum(1 for a in k if a) == 1:
                out.append(k)
    return out


@dataclass(frozen=True)
class PanelMomentTable:
    """``E[prod_t Y_t^{k_t} | X = x]`` at rows of ``points`` for each order in ``orders``."""

    points: np.ndarray
    orders: tuple
    values: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.points, dtype=float))
        V = np.atleast_2d(np.asarray(self.values, dtype=float))
        if V.shape != (P.shape[0], len(self.orders)):
            raise DataError("values must be (n_points, n_orders)")
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "values", V)
        object.__setattr__(self, "orders", tuple(tuple(int(a) for a in k) for k in self.orders))

    @property
    def T(self) -> int:
        return self.points.shape[1]


def _binom_prod(k, a) -> int:
    return math.prod(math.comb(x, y) for x, y in zip(k, a))


def _sub_orders(k):
    return product(*[range(x + 1) for x in k])


def panel_conditional_moments(model: PanelModel, points, K: int, cross_period: bool = True) -> PanelMomentTable:
    """Population ``E[prod Y_t^{k_t} | X = x]`` from the atoms and the error moments."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    orders = panel_orders(model.T, K, cross_period)
    em = [e.moments(K) for e in model.errors]
    if any(m is None for m in em):
        raise PreconditionError("panel moments need error laws with finite moments")
    idx = model.index(P)  # (n, T, atoms)
    vals = np.zeros((P.shape[0], len(orders)))
    for c, k in enumerate(orders):
        for a in _sub_orders(k):
            coef = _binom_prod(k, a) * math.prod(em[t][k[t] - a[t]] for t in range(model.T))
            if coef == 0:
                continue
            vals[:, c] += coef * (np.prod(idx ** np.asarray(a)[None, :, None], axis=1) @ model.weights)
    return PanelMomentTable(P, orders, vals)


def _deconvolve_errors(table: PanelMomentTable, eps_moments) -> dict:
    """Index moments ``E[prod I_t^{a_t} | x]`` from observed moments, by increasing order."""
    T = table.T
    em = [np.asarray(m, dtype=float) for m in eps_moments]
    if len(em) != T:
        raise PreconditionError("one error-moment vector per period required")
    col = {k: c for c, k in enumerate(table.orders)}
    zero = tuple([0] * T)
    out = {zero: np.ones(table.points.shape[0])}
    for k in sorted(table.orders, key=lambda k: (sum(k), k)):
        acc = table.values[:, col[k]].copy()
        for a in _sub_orders(k):
            if a == k:
                continue
            if a not in out:
                raise PreconditionError(f"order {a} needed to deconvolve {k} is missing")
            if any(k[t] - a[t] >= em[t].size for t in range(T)):
                raise PreconditionError("error moments of insufficient order")
            acc -= _binom_prod(k, a) * math.prod(em[t][k[t] - a[t]] for t in range(T)) * out[a]
        out[k] = acc
    return out


def panel_design(points, orders: Sequence[tuple], degree: int):
    """Design rows ``(x, k)`` for ``|k| = degree`` against mixed moments of ``(alpha, beta)``."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    T = P.shape[1]
    dim = T + 1
    J = homogeneous_indices(dim, degree)
    pos = {j: n for n, j in enumerate(J)}
    ks = [k for k in orders if sum(k) == degree]
    A = np.zeros((P.shape[0] * len(ks), len(J)))
    r = 0
    for x in P:
        forms = [{tuple(int(c == i) for c in range(dim)): float(x[t] ** i) for i in range(dim)} for t in range(T)]
        for k in ks:
            poly = {tuple([0] * dim): 1.0}
            for t in range(T):
                if k[t]:
                    poly = _poly_mul(poly, _poly_pow(forms[t], k[t], dim))
            for e, c in poly.items():
                A[r, pos[e]] += c
            r += 1
    return A, J, ks


def panel_moment_recover(table: PanelMomentTable, eps_moments, K: Optional[int] = None,
                         rtol: float = RANK_RTOL, residual_tol: float = RESIDUAL_RTOL):
    """Mixed moments of ``(alpha, beta_1..beta_T)`` from joint conditional moments.

    Errors are removed order by order through the multinomial relation, then
    each degree is solved by scaled least squares over all ``(x, k)`` rows.
    Returns ``(MixedMomentSet, [DegreeReport])``; a rank-deficient degree is
    reported unidentified with a nullspace vector.
    """
    T = table.T
    K = K or max(sum(k) for k in table.orders)
    idx = _deconvolve_errors(table, eps_moments)
    dim = T + 1
    entries = {tuple([0] * dim): 1.0}
    reports = []
    for d in range(1, K + 1):
        A, J, ks = panel_design(table.points, table.orders, d)
        if not ks:
            raise PreconditionError(f"no orders of degree {d}")
        b = np.concatenate([[idx[k][i] for k in ks] for i in range(table.points.shape[0])])
        x, rank, res, null = solve_scaled(A, b, rtol)
        ok = rank == len(J) and res <= residual_tol
        reports.append(DegreeReport(d, rank, len(J), res, ok, null))
        entries.update({j: float(v) for j, v in zip(J, x)})
    return MixedMomentSet(dim, K, entries), reports


# ---------------------------------------------------------------------------
# Single-index reduction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinaryDataset:
    y: np.ndarray
    dx: np.ndarray
    stayers: int
    ties: int
    degenerate: bool
    noise_cf: Optional[CharFnGrid] = None

    def directions(self) -> np.ndarray:
        """Unit directions of ``X2 - X1`` for non-stayers."""
        n = np.linalg.norm(self.dx, axis=1)
        return self.dx[n > 0] / n[n > 0, None]


def simulate_single_index(gamma: np.ndarray, x1: np.ndarray, x2: np.ndarray, link: Callable = None,
                          noise: Optional[Sequence] = None, seed: int = 0):
    """``Z_t = link(Gamma' X_t) (+ noise_t)`` for per-unit coefficients ``gamma``."""
    link = link or (lambda u: u)
    g = np.asarray(gamma, dtype=float)
    z1 = link(np.einsum("ij,ij->i", g, x1))
    z2 = link(np.einsum("ij,ij->i", g, x2))
    if noise is not None:
        z1 = z1 + ScalarLaw.from_dict(noise[0]).sample(make_rng(seed, 2, 1), z1.size)
        z2 = z2 + ScalarLaw.from_dict(noise[1]).sample(make_rng(seed, 2, 2), z2.size)
    return z1, z2


def single_index_reduce(y1, y2, x1, x2, noise: bool = False, t_max: float = 5.0,
                        step: float = 1e-2) -> BinaryDataset:
    """Indicators ``1{Y2 >= Y1}`` paired with ``X2 - X1``.

    Units with ``X2 = X1`` are stayers.  When ``noise`` is declared the
    empirical CF of ``Y2 - Y1`` over stayers is reported (the CF of the
    noise difference); an empty stayer set is then an error.
    """
    y1 = np.asarray(y1, dtype=float).ravel()
    y2 = np.asarray(y2, dtype=float).ravel()
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    if x1.shape != x2.shape or x1.shape[0] != y1.size or y2.size != y1.size:
        raise DataError("panel arrays have inconsistent shapes")
    dx = x2 - x1
    stay = np.all(dx == 0, axis=1)
    y = (y2 >= y1).astype(np.int8)
    ties = int(np.sum(y2 == y1))
    ncf = None
    if noise:
        if not stay.any():
            raise PreconditionError("noise recovery needs stayers")
        ncf = ecf(y2[stay] - y1[stay], t_max, step)
    return BinaryDataset(y, dx, int(stay.sum()), ties, bool(stay.all()), ncf)
