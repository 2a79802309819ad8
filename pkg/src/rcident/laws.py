"""Scalar laws with closed-form characteristic functions.

Used as error and signal laws in deconvolution and panel simulations.
Laws without finite moments report ``None`` for moments beyond what exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError, PreconditionError


def _sinc(x):
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


@dataclass(frozen=True)
class ScalarLaw:
    """A named scalar law: ``kind`` plus parameters."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DataError(f"unknown law {self.kind!r}; known: {sorted(_KINDS)}")
        for k in self.params:
            if k not in _KINDS[self.kind]:
                raise DataError(f"law {self.kind!r} has no parameter {k!r}")

    def _p(self, name):
        return float(self.params.get(name, _KINDS[self.kind][name]))

    def cf(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = self.kind
        if k == "degenerate":
            return np.exp(1j * t * self._p("loc"))
        if k == "uniform":
            a, b = self._p("low"), self._p("high")
            c, h = 0.5 * (a + b), 0.5 * (b - a)
            return np.exp(1j * t * c) * _sinc(h * t)
        if k == "normal":
            m, s = self._p("loc"), self._p("scale")
            return np.exp(1j * t * m - 0.5 * (s * t) ** 2)
        if k == "laplace":
            m, s = self._p("loc"), self._p("scale")
            return np.exp(1j * t * m) / (1.0 + (s * t) ** 2)
        if k == "cauchy":
            m, s = self._p("loc"), self._p("scale")
            return np.exp(1j * t * m - s * np.abs(t))
        if k == "triangular_cf":
            s = self._p("scale")
            return np.clip(1.0 - np.abs(t) / s, 0.0, None).astype(complex)
        raise AssertionError(k)

    def moments(self, K: int) -> Optional[np.ndarray]:
        """Raw moments ``E[X^k]``, ``k = 0..K``; ``None`` if some do not exist."""
        k = self.kind
        if k in ("cauchy", "triangular_cf"):
            return None if K >= 1 else np.ones(1)
        out = np.zeros(K + 1)
        if k == "degenerate":
            c = self._p("loc")
            return np.array([c**j for j in range(K + 1)])
        if k == "uniform":
            a, b = self._p("low"), self._p("high")
            for j in range(K + 1):
                out[j] = (b ** (j + 1) - a ** (j + 1)) / ((j + 1) * (b - a))
            return out
        # centered moments of a location-scale law, then binomial shift
        m, s = self._p("loc"), self._p("scale")
        central = np.zeros(K + 1)
        for j in range(0, K + 1, 2):
            if k == "normal":
                central[j] = s**j * _double_factorial(j - 1)
            else:
                central[j] = s**j * math.factorial(j)
        for j in range(K + 1):
            out[j] = sum(math.comb(j, i) * central[i] * m ** (j - i) for i in range(j + 1))
        return out

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        k = self.kind
        if k == "degenerate":
            return np.full(n, self._p("loc"))
        if k == "uniform":
            return rng.uniform(self._p("low"), self._p("high"), n)
        if k == "normal":
            return rng.normal(self._p("loc"), self._p("scale"), n)
        if k == "laplace":
            return rng.laplace(self._p("loc"), self._p("scale"), n)
        if k == "cauchy":
            return self._p("loc") + self._p("scale") * rng.standard_cauchy(n)
        if k == "triangular_cf":
            # density s (1 - cos(x/s)) / (pi x^2), rejection from Cauchy(scale s) with bound 4
            s = self._p("scale")
            out = np.empty(0)
            while out.size < n:
                x = rng.standard_cauchy(2 * n)
                u = rng.uniform(size=2 * n)
                with np.errstate(invalid="ignore", divide="ignore"):
                    f = np.where(np.abs(x) < 1e-8, 0.5, (1 - np.cos(x)) / np.maximum(x * x, 1e-300)) / math.pi
                g = 1.0 / (math.pi * (1 + x * x))
                out = np.concatenate([out, x[u * 4 * g <= f]])
            return s * out[:n]
        raise AssertionError(k)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": {k: float(v) for k, v in sorted(self.params.items())}}

    @classmethod
    def from_dict(cls, d) -> "ScalarLaw":
        if isinstance(d, ScalarLaw):
            return d
        if isinstance(d, str):
            return cls(d)
        try:
            return cls(d["kind"], dict(d.get("params", {})))
        except (KeyError, TypeError) as e:
            raise DataError(f"malformed law description {d!r}") from e


def _double_factorial(n: int) -> int:
    return 1 if n <= 0 else n * _double_factorial(n - 2)


_KINDS = {
    "degenerate": {"loc": 0.0},
    "uniform": {"low": -1.0, "high": 1.0},
    "normal": {"loc": 0.0, "scale": 1.0},
    "laplace": {"loc": 0.0, "scale": 1.0},
    "cauchy": {"loc": 0.0, "scale": 1.0},
    "triangular_cf": {"scale": 1.0},
}


@dataclass(frozen=True)
class DiscreteLaw:
    """Finite mixture of point masses on the real line."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if a.shape != w.shape or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise PreconditionError("weights must be nonnegative, one per atom, summing to 1")
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)

    def cf(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.exp(1j * np.multiply.outer(t, self.atoms)) @ self.weights

    def moments(self, K: int) -> np.ndarray:
        return np.array([np.dot(self.weights, self.atoms**k) for k in range(K + 1)])
