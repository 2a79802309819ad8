"""Moment sequences and finite-order determinacy diagnostics.

Every asymptotic condition (divergent series, bounded limsup) is replaced by
an evidence-graded proxy computed from the last half of the available
orders: a fitted growth exponent for the Carleman series, and a log-log
trend slope for each ratio test.  All moment arithmetic is done on
``log|s(m)|`` so that factorial-scale sequences never overflow.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import DataError, InsufficientOrderError, PreconditionError

SUPPORT_CLASSES = ("real_line", "half_line", "compact")

GAMMA_CUTOFF = 1.0
GAMMA_TOL = 0.05
SLOPE_TOL = 0.1
QUAD_RTOL = 1e-8

DETERMINATE = "determinate_evidence"
INDETERMINATE = "indeterminate_evidence"
INCONCLUSIVE = "inconclusive"


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentSequence:
    """Finite table of moments ``s(0..K)`` stored in log-space.

    ``log_values[m] = log|s(m)|`` (``-inf`` for a zero moment) and ``signs``
    carries the sign.  ``log_abs_values`` optionally holds the absolute
    moments ``E|X|^m``; when absent, the absolute moments of half-line and
    compact families coincide with ``values`` and for the real line only
    even orders are known.
    """

    log_values: np.ndarray
    signs: np.ndarray
    support_class: str = "real_line"
    bound: Optional[float] = None
    log_abs_values: Optional[np.ndarray] = None
    name: str = "custom"

    def __post_init__(self):
        lv = np.asarray(self.log_values, dtype=float)
        sg = np.asarray(self.signs, dtype=float)
        object.__setattr__(self, "log_values", lv)
        object.__setattr__(self, "signs", sg)
        if self.log_abs_values is not None:
            object.__setattr__(self, "log_abs_values", np.asarray(self.log_abs_values, dtype=float))
        lv.setflags(write=False)
        sg.setflags(write=False)
        if self.support_class not in SUPPORT_CLASSES:
            raise DataError(f"unknown support class {self.support_class!r}")
        if lv.ndim != 1 or lv.shape != sg.shape:
            raise DataError("log_values and signs must be 1-d arrays of equal length")
        if lv.size < 3:
            raise InsufficientOrderError("a moment sequence needs K >= 2")
        if np.any(np.isnan(lv)) or np.any(lv == np.inf):
            raise DataError("non-finite moment entries")
        if sg[0] <= 0 or not np.isfinite(lv[0]):
            raise DataError("s(0) must be positive (total mass)")
        if self.support_class == "half_line" and np.any(sg < 0):
            raise DataError("half-line moments must be nonnegative")
        if self.support_class == "real_line" and np.any(sg[0::2] < 0):
            raise DataError("even-order moments must be nonnegative")
        if self.support_class == "compact" and (self.bound is None or self.bound <= 0):
            raise DataError("compact support requires a positive bound")
        if self.support_class == "half_line":
            bad = self.cauchy_schwarz_violations()
            if bad:
                raise DataError(f"Cauchy-Schwarz violated at orders {bad}")

    @property
    def K(self) -> int:
        return self.log_values.size - 1

    @property
    def values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.signs * np.exp(self.log_values)

    def absolute_log(self, m: int) -> float:
        """``log E|X|^m`` when known, else ``nan``."""
        if self.log_abs_values is not None:
            return float(self.log_abs_values[m])
        if self.support_class != "real_line" or m % 2 == 0:
            return float(self.log_values[m])
        return float("nan")

    def normalized_log(self) -> np.ndarray:
        """log moments of the probability measure ``mu / s(0)``."""
        return self.log_values - self.log_values[0]

    def cauchy_schwarz_violations(self, rtol: float = 1e-10) -> list[int]:
        lv = self.log_values
        out = []
        for m in range(1, lv.size - 1):
            a, b, c = lv[m - 1], lv[m], lv[m + 1]
            if not (np.isfinite(a) and np.isfinite(b) and np.isfinite(c)):
                continue
            if 2 * b > a + c + rtol * max(1.0, abs(a) + abs(c)):
                out.append(m)
        return out

    @classmethod
    def from_values(cls, values, support_class="real_line", absolute_values=None, bound=None, name="custom"):
        v = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise DataError("non-finite moment entries")
        with np.errstate(divide="ignore"):
            lv = np.log(np.abs(v))
            la = None if absolute_values is None else np.log(np.abs(np.asarray(absolute_values, dtype=float)))
        return cls(lv, np.sign(v), support_class, bound, la, name)

    @classmethod
    def from_log(cls, log_values, support_class="half_line", log_abs_values=None, bound=None, name="custom"):
        lv = np.asarray(log_values, dtype=float)
        return cls(lv, np.ones_like(lv), support_class, bound, log_abs_values, name)


@dataclass(frozen=True)
class LogConvexSequence:
    """Positive sequence ``M[0..K]`` (entries may be ``+inf``) kept in log-space."""

    log_M: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        lm = np.asarray(self.log_M, dtype=float)
        lm.setflags(write=False)
        object.__setattr__(self, "log_M", lm)
        if np.any(np.isnan(lm)) or np.any(lm == -np.inf):
            raise DataError("entries must be positive")
        if self.normalized and abs(lm[0]) > 1e-12:
            raise DataError("normalized sequence requires M[0] = 1")

    @property
    def K(self) -> int:
        return self.log_M.size - 1

    @property
    def M(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_M)

    def is_log_convex(self, rtol: float = 1e-12) -> bool:
        lm = self.log_M
        fin = np.isfinite(lm)
        for m in range(1, lm.size - 1):
            if fin[m - 1] and fin[m] and fin[m + 1]:
                if 2 * lm[m] > lm[m - 1] + lm[m + 1] + rtol * (1 + abs(lm[m])):
                    return False
        return True

    @classmethod
    def from_values(cls, M, normalized=None):
        M = np.asarray(M, dtype=float)
        if np.any(~(M > 0)):
            raise DataError("zero or negative entries")
        lm = np.log(M)
        if normalized is None:
            normalized = abs(lm[0]) <= 1e-12
        return cls(lm, normalized)


@dataclass(frozen=True)
class Criterion:
    name: str
    value: float
    slope: float
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "value": _jsonable(self.value), "slope": _jsonable(self.slope),
                "passed": bool(self.passed), "note": self.note}


@dataclass(frozen=True)
class CarlemanResult:
    hamburger_partial: float
    stieltjes_partial: float
    stieltjes_root_partial: float
    divergence_class: str
    growth_exponent: float
    form: str


@dataclass(frozen=True)
class DeterminacyReport:
    verdict: str
    criteria: tuple = field(default_factory=tuple)
    growth_exponent: float = float("nan")

    def criterion(self, name: str) -> Criterion:
        for c in self.criteria:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "growth_exponent": _jsonable(self.growth_exponent),
                "criteria": [c.to_dict() for c in self.criteria]}


def _jsonable(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


# ---------------------------------------------------------------------------
# Named families
# ---------------------------------------------------------------------------


def _orders(K):
    return np.arange(K + 1, dtype=float)


def normal_moments(K: int = 40, sigma: float = 1.0) -> MomentSequence:
    m = _orders(K)
    lv = np.full(K + 1, -np.inf)
    even = m[0::2]
    lv[0::2] = gammaln(even + 1) - 0.5 * even * math.log(2) - gammaln(even / 2 + 1) + even * math.log(sigma)
    signs = np.zeros(K + 1)
    signs[0::2] = 1.0
    la = 0.5 * m * math.log(2) + gammaln((m + 1) / 2) - 0.5 * math.log(math.pi) + m * math.log(sigma)
    return MomentSequence(lv, signs, "real_line", None, la, "normal")


def abs_normal_power_moments(r: float, K: int = 40) -> MomentSequence:
    """Moments of ``|N|^r`` for a standard normal ``N`` (a half-line law)."""
    m = _orders(K)
    lv = 0.5 * r * m * math.log(2) + gammaln((r * m + 1) / 2) - 0.5 * math.log(math.pi)
    return MomentSequence.from_log(lv, "half_line", name=f"abs_normal_power({r})")


def lognormal_moments(K: int = 40, mu: float = 0.0, sigma: float = 1.0) -> MomentSequence:
    m = _orders(K)
    return MomentSequence.from_log(m * mu + 0.5 * m**2 * sigma**2, "half_line", name="lognormal")


def gamma_moments(shape: float, rate: float = 1.0, K: int = 40) -> MomentSequence:
    m = _orders(K)
    lv = gammaln(shape + m) - gammaln(shape) - m * math.log(rate)
    return MomentSequence.from_log(lv, "half_line", name=f"gamma({shape},{rate})")


def chi2_moments(k: float, K: int = 40) -> MomentSequence:
    s = gamma_moments(k / 2.0, 0.5, K)
    return MomentSequence.from_log(s.log_values, "half_line", name=f"chi2({k})")


def factorial_moments(K: int = 40, multiple: int = 1) -> MomentSequence:
    """``s(m) = (multiple*m)!``; ``multiple=1`` is the exponential law."""
    m = _orders(K)
    return MomentSequence.from_log(gammaln(multiple * m + 1), "half_line", name=f"factorial({multiple})")


def growth_moments(alpha: float, K: int = 40) -> MomentSequence:
    """Custom growth ``s(m) = exp(m**alpha)`` (``s(0) = 1``)."""
    m = _orders(K)
    lv = m**alpha
    lv[0] = 0.0
    return MomentSequence.from_log(lv, "half_line", name=f"growth({alpha})")


FAMILIES = {
    "normal": normal_moments,
    "lognormal": lognormal_moments,
    "chi2": chi2_moments,
    "gamma": gamma_moments,
    "factorial": factorial_moments,
    "growth": growth_moments,
    "abs_normal_power": abs_normal_power_moments,
}


def family(name: str, **params) -> MomentSequence:
    try:
        fn = FAMILIES[name]
    except KeyError:
        raise DataError(f"unknown moment family {name!r}") from None
    return fn(**params)


def _density(log_f: Callable, dlog_f: Callable, cutoffs: tuple) -> dict:
    def f(x):
        return math.exp(log_f(x))

    def f_prime(x):
        return f(x) * dlog_f(x)

    return {"f": f, "f_prime": f_prime, "log_f": log_f, "dlog_f": dlog_f, "integration_cutoffs": cutoffs}


def density_family(name: str, cutoffs: tuple = (1.0, 1e4), **params) -> dict:
    """Closed-form densities for the Krein and Lin checks.

    ``normal(sigma)`` on the real line; ``lognormal(mu, sigma)``,
    ``abs_normal_power(r)`` (law of ``|N|^r``), ``gamma(shape, rate)`` and
    ``chi2(k)`` on the half line.  Returns the dict accepted by
    :func:`determinacy_report`.
    """
    if name == "normal":
        s = float(params.get("sigma", 1.0))
        c = -math.log(s * math.sqrt(2 * math.pi))
        return _density(lambda x: c - x * x / (2 * s * s), lambda x: -x / (s * s), cutoffs)
    if name == "lognormal":
        mu, s = float(params.get("mu", 0.0)), float(params.get("sigma", 1.0))
        c = -math.log(s * math.sqrt(2 * math.pi))
        return _density(lambda x: c - math.log(x) - (math.log(x) - mu) ** 2 / (2 * s * s),
                        lambda x: -1.0 / x - (math.log(x) - mu) / (s * s * x), cutoffs)
    if name == "abs_normal_power":
        r = float(params["r"])
        c = math.log(2.0 / r) - 0.5 * math.log(2 * math.pi)
        return _density(lambda x: c - x ** (2 / r) / 2 + (1 / r - 1) * math.log(x),
                        lambda x: -(1 / r) * x ** (2 / r - 1) + (1 / r - 1) / x, cutoffs)
    if name in ("gamma", "chi2"):
        if name == "chi2":
            a, b = float(params["k"]) / 2, 0.5
        else:
            a, b = float(params["shape"]), float(params.get("rate", 1.0))
        c = a * math.log(b) - math.lgamma(a)
        return _density(lambda x: c + (a - 1) * math.log(x) - b * x, lambda x: (a - 1) / x - b, cutoffs)
    raise DataError(f"unknown density family {name!r}")


def read_moments_csv(path, support_class: str = "real_line", bound=None) -> MomentSequence:
    """Load a table with columns ``order, value`` and optional ``absolute_value``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "order" not in rows[0] or "value" not in rows[0]:
        raise DataError("moment CSV needs columns order,value")
    parsed = []
    has_abs = "absolute_value" in rows[0] and all(r.get("absolute_value") not in (None, "") for r in rows)
    for line, r in enumerate(rows, start=2):
        try:
            parsed.append((int(r["order"]), float(r["value"]), float(r["absolute_value"]) if has_abs else None))
        except (TypeError, ValueError):
            raise DataError(f"{path}: line {line} is not numeric") from None
    parsed.sort(key=lambda t: t[0])
    if [t[0] for t in parsed] != list(range(len(parsed))):
        raise DataError("moment orders must be 0..K without gaps")
    vals = [t[1] for t in parsed]
    absv = [t[2] for t in parsed] if has_abs else None
    return MomentSequence.from_values(vals, support_class, absv, bound)


def write_moments_csv(path, s: MomentSequence) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["order", "value", "absolute_value"])
        for m in range(s.K + 1):
            a = s.absolute_log(m)
            w.writerow([m, repr(float(s.values[m])), "" if math.isnan(a) else repr(math.exp(a))])


# ---------------------------------------------------------------------------
# Carleman sums and growth exponent
# ---------------------------------------------------------------------------


def _tail(n: int) -> slice:
    return slice(n // 2, n)


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    lx = np.log(x)
    if np.any(~np.isfinite(y)):
        return float("nan")
    return float(np.polyfit(lx, y, 1)[0])


def _root_series(s: MomentSequence, form: str):
    """Return ``(m, log of the m-th root term)`` for the requested form.

    ``hamburger``: ``log s(2m)^{1/(2m)}`` for ``m = 1..K//2``.
    ``stieltjes``: ``log s(m)^{1/(2m)}`` for ``m = 1..K``.
    """
    if form == "hamburger":
        m = np.arange(1, s.K // 2 + 1, dtype=float)
        logs = np.array([s.absolute_log(int(2 * k)) for k in m]) - s.log_values[0]
        return m, logs / (2 * m)
    if form == "stieltjes":
        m = np.arange(1, s.K + 1, dtype=float)
        logs = np.array([s.absolute_log(int(k)) for k in m]) - s.log_values[0]
        return m, logs / (2 * m)
    raise ValueError(form)


def growth_exponent(s: MomentSequence, form: str) -> float:
    """Fitted ``gamma`` in ``root(m) ~ m**gamma`` over the last half of orders."""
    m, y = _root_series(s, form)
    if np.any(y[_tail(y.size)] == -np.inf):
        return float("-inf")
    win = _tail(m.size)
    if m[win].size < 2:
        raise InsufficientOrderError("window too short for an exponent fit")
    return _loglog_slope(m[win], y[win])


def _series_sum(log_terms: np.ndarray) -> float:
    """``sum exp(-t)``; a ``-inf`` root (zero moment) contributes ``+inf``."""
    if np.any(log_terms == -np.inf):
        return float("inf")
    return float(np.sum(np.exp(-log_terms)))


def carleman_sums(s: MomentSequence, gamma_tol: float = GAMMA_TOL) -> CarlemanResult:
    """Partial Carleman sums and a divergence class from the growth exponent.

    The class is ``divergent`` when the fitted exponent is at most
    ``1 + gamma_tol`` and ``convergent`` otherwise.  Real-line and compact
    laws are classified with the even-order (Hamburger) roots, half-line laws
    with the ``s(m)^{1/(2m)}`` (Stieltjes) roots.
    """
    if s.K < 6:
        raise InsufficientOrderError("carleman_sums needs K >= 6")
    ln = s.normalized_log()
    m_h, y_h = _root_series(s, "hamburger")
    ham = _series_sum(y_h)
    m_all = np.arange(1, s.K + 1)
    la = np.array([s.absolute_log(int(k)) for k in m_all]) - s.log_values[0]
    if np.any(np.isnan(la)):
        la = np.where(np.isnan(la), ln[1:], la)
    st = _series_sum(la / m_all)
    st_root = _series_sum(la / (2 * m_all))
    form = "stieltjes" if s.support_class == "half_line" else "hamburger"
    gamma = growth_exponent(s, form)
    if s.support_class == "compact" or gamma <= GAMMA_CUTOFF + gamma_tol:
        cls = "divergent"
    else:
        cls = "convergent"
    return CarlemanResult(ham, st, st_root, cls, gamma, form)


# ---------------------------------------------------------------------------
# Ratio tests
# ---------------------------------------------------------------------------


def _trend(m: np.ndarray, logq: np.ndarray, slope_tol: float, name: str, note: str = "") -> Criterion:
    win = _tail(m.size)
    mm, lq = m[win], logq[win]
    if np.any(np.isnan(lq)):
        return Criterion(name, float("nan"), float("nan"), False, "unavailable")
    if np.any(lq == np.inf):
        return Criterion(name, float("inf"), float("inf"), False, note)
    finite = np.isfinite(lq)
    if not np.any(finite):
        return Criterion(name, 0.0, float("-inf"), True, note)
    slope = _loglog_slope(mm[finite], lq[finite]) if finite.sum() >= 2 else 0.0
    with np.errstate(over="ignore"):
        val = float(np.exp(np.max(lq[finite])))
    return Criterion(name, val, slope, bool(slope <= slope_tol), note)


def growth_ratio_tests(s: MomentSequence, slope_tol: float = SLOPE_TOL) -> list[Criterion]:
    """Tail behaviour of the classical ratio and root tests.

    Each entry reports the maximum of the tested quantity over the last half
    of the available orders, the slope of its logarithm against ``log m``
    and a pass flag (``slope <= slope_tol``, i.e. no polynomial growth).
    """
    if s.K < 6:
        raise InsufficientOrderError("growth_ratio_tests needs K >= 6")
    K = s.K
    lab = np.array([s.absolute_log(k) for k in range(K + 1)]) - s.log_values[0]
    out = []

    if s.support_class == "half_line":
        m = np.arange(1, K, dtype=float)
        lq = lab[2:] - lab[1:-1] - 2 * np.log(m)
        out.append(_trend(m, lq, slope_tol, "hardy", "s(m+1)/(m^2 s(m))"))
    else:
        m = np.arange(1, K // 2, dtype=float)
        ev = lab[0::2]
        lq = ev[2 : m.size + 2] - ev[1 : m.size + 1] - 2 * np.log(m)
        out.append(_trend(m, lq, slope_tol, "hardy", "s(2m+2)/(m^2 s(2m))"))

    m = np.arange(1, K + 1, dtype=float)
    out.append(_trend(m, lab[1:] / (2 * m) - np.log(m), slope_tol, "hardy_root", "s(m)^(1/2m)/m"))

    m = np.arange(1, K // 2 + 1, dtype=float)
    ev = lab[2 : 2 * m.size + 1 : 2]
    out.append(_trend(m, ev / (2 * m) - np.log(2 * m), slope_tol, "cramer_root", "s(2m)^(1/2m)/(2m)"))
    out.append(_trend(m, (ev - gammaln(2 * m + 1)) / m, slope_tol, "cramer_factorial", "(s(2m)/(2m)!)^(1/m)"))
    return out


def _sufficient(names_passed: dict, support_class: str) -> bool:
    keys = ["carleman", "hardy", "cramer_root", "cramer_factorial"]
    if support_class == "half_line":
        keys.append("hardy_root")
    return any(names_passed.get(k, False) for k in keys)


# ---------------------------------------------------------------------------
# Density criteria
# ---------------------------------------------------------------------------


def _tail_power_fit(g: Callable, a: float, b: float, n: int = 24):
    """Fit ``g(x) ~ C x**p`` on a geometric grid over ``[a, b]``."""
    x = np.geomspace(a, b, n)
    y = np.array([g(t) for t in x])
    if np.any(~(y > 0)):
        return None
    p, lc = np.polyfit(np.log(x), np.log(y), 1)
    return float(p), float(math.exp(lc))


def _integral_with_tail(g: Callable, lo: float, hi: float, rtol: float, tail_tol: float):
    """``int_lo^inf g``: adaptive quadrature on ``[lo, hi]`` plus power-law tail."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info = integrate.quad(g, lo, hi, epsrel=rtol, epsabs=0.0, limit=500, full_output=1)[:3]
    ok = err <= max(rtol * abs(val), 1e-12) * 100
    fit = _tail_power_fit(g, hi / 8.0, hi)
    if fit is None:
        return val, float("nan"), ok, "tail integrand not positive"
    p, c = fit
    if p >= -1.0 - tail_tol:
        return float("inf"), p, ok, ""
    return val + c * hi ** (p + 1) / (-(p + 1)), p, ok, ""


def krein_lin_density_tests(
    f: Callable,
    f_prime: Callable,
    support_class: str = "real_line",
    integration_cutoffs: tuple = (1.0, 30.0),
    log_f: Optional[Callable] = None,
    rtol: float = QUAD_RTOL,
    tail_tol: float = GAMMA_TOL,
    dlog_f: Optional[Callable] = None,
) -> DeterminacyReport:
    """Krein integral and Lin monotonicity for a density.

    ``integration_cutoffs = (x0, R)``: quadrature runs up to ``R`` (both
    tails for the real line) and the remainder is extrapolated from a
    power-law fit of the integrand on ``[R/8, R]``.  ``x0`` is the start of
    the half-line integral and of the tail grid for the Lin check.  Pass
    ``log_f`` to avoid underflow of ``-log f`` far in the tail, and
    ``dlog_f = f'/f`` for the same reason in the Lin check.
    """
    x0, R = map(float, integration_cutoffs)
    if not (0 < x0 < R and np.isfinite(R)):
        raise PreconditionError("cutoffs must satisfy 0 < x0 < R < inf")
    lf = log_f if log_f is not None else (lambda x: math.log(f(x)))

    tail = np.geomspace(x0, R, 64)
    pts = tail if support_class == "half_line" else np.concatenate([tail, -tail])
    fv = np.array([f(x) for x in pts])
    if log_f is None and np.any(~(fv > 0)):
        raise PreconditionError("density must be positive on the tail sample")

    if support_class == "half_line":
        g = lambda x: -lf(x * x) / (1 + x * x)
        krein, p, ok, note = _integral_with_tail(g, x0, R, rtol, tail_tol)
        p_used = p
    else:
        gp = lambda x: -lf(x) / (1 + x * x)
        gn = lambda x: -lf(-x) / (1 + x * x)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            mid, err = integrate.quad(gp, -x0, x0, epsrel=rtol, epsabs=0.0, limit=500)
        kp, pp, okp, n1 = _integral_with_tail(gp, x0, R, rtol, tail_tol)
        kn, pn, okn, n2 = _integral_with_tail(gn, x0, R, rtol, tail_tol)
        krein = mid + kp + kn
        ok, p_used, note = okp and okn, max(pp, pn), n1 or n2

    finite = bool(np.isfinite(krein))
    if not ok or (np.isnan(krein)):
        krein_c = Criterion("krein", krein, p_used, False, "quadrature did not converge " + note)
        verdict = INCONCLUSIVE
    else:
        krein_c = Criterion("krein", krein, p_used, finite, "finite integral" if finite else "divergent integral")

    # Lin: f decreasing and -x f'/f increasing on the tail
    lin_ok = True
    for sgn in ((1.0,) if support_class == "half_line" else (1.0, -1.0)):
        xs = sgn * tail
        if dlog_f is not None:
            slope = np.array([dlog_f(x) for x in xs])
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                slope = np.array([f_prime(x) for x in xs]) / np.array([f(x) for x in xs])
        h = -xs * slope
        if not np.all(np.isfinite(h)) or np.any(sgn * slope > 0):
            lin_ok = False
            continue
        d = np.diff(h)
        lin_ok &= bool(np.all(d >= -1e-9 * np.maximum(1.0, np.abs(h[1:]))))
    lin_c = Criterion("lin", float("nan"), float("nan"), lin_ok, "-x f'/f increasing on tail")

    if not ok:
        verdict = INCONCLUSIVE
    elif finite:
        verdict = INDETERMINATE
    elif lin_ok:
        verdict = DETERMINATE
    else:
        verdict = INCONCLUSIVE
    return DeterminacyReport(verdict, (krein_c, lin_c))


# ---------------------------------------------------------------------------
# Trace function and convex regularization
# ---------------------------------------------------------------------------


def trace_function(M: LogConvexSequence, x: float) -> float:
    """``sup_{1<=m<=K} (m x - log M[m])``, or ``+inf`` when visibly unbounded.

    The value is declared infinite when the maximum sits at ``m = K`` and the
    increments over the last half of the orders are positive and
    non-decreasing.
    """
    if not M.normalized:
        raise PreconditionError("trace_function needs a normalized sequence")
    m = np.arange(1, M.K + 1, dtype=float)
    lm = M.log_M[1:]
    vals = m * x - lm
    fin = np.isfinite(vals)
    if not np.any(fin):
        return float("-inf")
    k = int(np.argmax(np.where(fin, vals, -np.inf)))
    if k == m.size - 1 and np.all(fin):
        inc = np.diff(np.concatenate([[0.0], vals]))[_tail(m.size)]
        if np.all(inc > 0) and np.all(np.diff(inc) >= -1e-12 * np.maximum(1.0, np.abs(inc[1:]))):
            return float("inf")
    return float(vals[k])


def convex_regularization(M) -> LogConvexSequence:
    """Largest log-convex minorant ``exp(sup_{x>=0} (m x - M(x)))``.

    Computed exactly: the concave piecewise-linear objective in ``x`` attains
    its supremum at ``x = 0`` or at a breakpoint ``(a_j - a_i)/(j - i)``.
    """
    if not isinstance(M, LogConvexSequence):
        M = LogConvexSequence.from_values(M)
    a = M.log_M
    idx = np.flatnonzero(np.isfinite(a))
    j = idx.astype(float)
    aj = a[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        br = (aj[None, :] - aj[:, None]) / (j[None, :] - j[:, None])
    xs = np.unique(np.concatenate([[0.0], br[np.isfinite(br) & (br >= 0)]]))
    trace = np.max(xs[:, None] * j[None, :] - aj[None, :], axis=1)
    m = np.arange(M.K + 1, dtype=float)
    out = np.max(m[:, None] * xs[None, :] - trace[None, :], axis=1)
    # beyond the last finite entry the regularization is unbounded
    out[m > idx.max()] = np.inf
    out = np.minimum(out, np.where(np.isfinite(a), a, np.inf))
    # entries below M[0] pull the (nondecreasing) minorant below 1 at m = 0
    return LogConvexSequence(out, M.normalized and abs(out[0]) <= 1e-12)


# ---------------------------------------------------------------------------
# Quasi-analytic weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QAWResult:
    passed: bool
    convex: bool
    divergent: bool
    min_second_difference: float
    increment_slope: float
    note: str = ""


def qaw_check(W: Optional[Callable], half_line: bool = False, grid=None, c: float = 0.0,
              log_W: Optional[Callable] = None) -> QAWResult:
    """Convexity of ``log W(e^x)`` and divergence of ``int log W(s)/(1+s^2)``.

    ``grid`` holds positive tail abscissae (default ``geomspace(10, 1e6)``).
    Divergence is judged from the partial integrals over consecutive grid
    cells: the increments of a divergent integral decay slower than any
    power, so the log-log slope of increment/cell-length-ratio stays above
    ``-0.5``.  With ``half_line=True`` the weight on the half line is read as
    ``W(sqrt(.))`` of a weight on the line, i.e. ``s -> W(s**2)`` is tested.
    """
    g = np.geomspace(10.0, 1e6, 60) if grid is None else np.sort(np.asarray(grid, dtype=float))
    if g.size < 8 or np.any(g <= 0):
        return QAWResult(False, False, False, float("nan"), float("nan"), "grid too short for tail fit")
    lw = log_W if log_W is not None else (lambda s: math.log(W(s)))
    lwt = (lambda s: lw(s * s)) if half_line else lw
    logW = np.array([lwt(s) for s in g])
    if np.any(~np.isfinite(logW)) or (c > 0 and np.any(logW < math.log(c))):
        raise PreconditionError("weight must be finite and >= c on the grid")
    t = np.log(g)
    d2 = np.diff(logW, 2) / (np.diff(t)[1:] * np.diff(t)[:-1])
    scale = np.maximum(1.0, np.abs(logW[1:-1]))
    convex = bool(np.all(d2 >= -1e-8 * scale))
    h = logW / (1 + g**2)
    inc = 0.5 * (h[1:] + h[:-1]) * np.diff(g)
    if np.all(inc <= 0):
        return QAWResult(False, convex, False, float(d2.min()), float("-inf"), "log W vanishes on tail")
    tail = _tail(inc.size)
    ii, gg = inc[tail], g[1:][tail]
    if np.any(ii <= 0):
        return QAWResult(False, convex, False, float(d2.min()), float("nan"), "non-positive increments")
    # normalize by the log-length of each cell so uneven grids are comparable
    dl = np.diff(t)[tail]
    slope = _loglog_slope(gg, np.log(ii / dl))
    divergent = bool(slope > -0.5)
    return QAWResult(convex and divergent, convex, divergent, float(d2.min()), slope)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def determinacy_report(s: MomentSequence, density=None, slope_tol: float = SLOPE_TOL) -> DeterminacyReport:
    """Combine moment criteria with optional density criteria.

    ``density`` is a dict with keys ``f``, ``f_prime`` and optionally
    ``log_f`` and ``integration_cutoffs``; its support class is taken from
    ``s``.  A finite Krein integral gives indeterminate evidence; any
    sufficient moment criterion gives determinate evidence; conflicting or
    absent evidence is inconclusive.
    """
    car = carleman_sums(s)
    crit = [Criterion(
        "carleman_stieltjes" if car.form == "stieltjes" else "carleman_hamburger",
        car.stieltjes_root_partial if car.form == "stieltjes" else car.hamburger_partial,
        car.growth_exponent, car.divergence_class == "divergent", f"gamma={car.growth_exponent:.4f}")]
    crit += growth_ratio_tests(s, slope_tol)
    passed = {("carleman" if c.name.startswith("carleman") else c.name): c.passed for c in crit}
    det = _sufficient(passed, s.support_class)
    indet = False
    if density is not None:
        dens = krein_lin_density_tests(
            density["f"], density["f_prime"], "half_line" if s.support_class == "half_line" else "real_line",
            density.get("integration_cutoffs", (1.0, 30.0)), density.get("log_f"),
            dlog_f=density.get("dlog_f"))
        crit += list(dens.criteria)
        indet = dens.verdict == INDETERMINATE
        det = det or dens.verdict == DETERMINATE
    if indet and not det:
        verdict = INDETERMINATE
    elif det and not indet:
        verdict = DETERMINATE
    else:
        verdict = INCONCLUSIVE
    return DeterminacyReport(verdict, tuple(crit), car.growth_exponent)


def multivariate_determinacy(marginals: Sequence[MomentSequence], affine=None, q: int = 0) -> DeterminacyReport:
    """Axis-wise Carleman check after an affine change of coordinates.

    ``affine = (A, b)``; the marginals are those of the transformed vector.
    Axes ``0..q-1`` use the even-order roots, the others the half-line roots.
    The verdict is determinate only when every axis passes.
    """
    d = len(marginals)
    if affine is not None:
        A = np.atleast_2d(np.asarray(affine[0], dtype=float))
        if A.shape != (d, d):
            raise PreconditionError("affine matrix must be square with one row per marginal")
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= 1e-12 * sv[0]:
            raise PreconditionError("singular affine map")
    if not 0 <= q <= d:
        raise PreconditionError("q must lie in 0..dimension")
    crit, gammas, ok = [], [], True
    for k, s in enumerate(marginals):
        form = "hamburger" if k < q else "stieltjes"
        if form == "stieltjes" and s.support_class == "real_line":
            raise PreconditionError(f"axis {k} needs half-line support for the Stieltjes form")
        gam = growth_exponent(s, form)
        passed = s.support_class == "compact" or gam <= GAMMA_CUTOFF + GAMMA_TOL
        ok &= passed
        gammas.append(gam)
        crit.append(Criterion(f"carleman_{form}[{k}]", gam, gam, passed))
    return DeterminacyReport(DETERMINATE if ok else INCONCLUSIVE, tuple(crit), max(gammas))
