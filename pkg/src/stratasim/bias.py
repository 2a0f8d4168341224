"""Probability weighting and perceived feature weights.

Agents read the classifier's weight vector as a probability vector and
distort it through a weighting function ``p``. Perceived weights are built
rank-dependently from cumulative sums::

    w_j = p(theta_1 + ... + theta_j) - p(theta_1 + ... + theta_{j-1})

so they telescope to ``p(1) - p(0) = 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Sequence

import numpy as np

SIMPLEX_TOL = 1e-9


def prelec(z, gamma: float):
    """Prelec weighting ``exp(-(-ln z)^gamma)``.

    Accepts a scalar or an array. ``p(0) = 0`` by continuity and
    ``p(1) = 1`` exactly.
    """
    if not gamma > 0 or not math.isfinite(gamma):
        raise ValueError(f"gamma must be a positive finite real, got {gamma!r}")
    arr = np.asarray(z, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("prelec is defined on [0, 1]")
    out = np.zeros_like(arr)
    pos = arr > 0.0
    out[pos] = np.exp(-((-np.log(arr[pos])) ** gamma))
    out[arr == 1.0] = 1.0
    if out.ndim == 0:
        return float(out)
    return out


class WeightingFunction:
    """Base class for monotone maps of [0, 1] onto [0, 1]."""

    def __call__(self, z):
        raise NotImplementedError

    @property
    def is_identity(self) -> bool:
        return False


@dataclass(frozen=True)
class Prelec(WeightingFunction):
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0 or not math.isfinite(self.gamma):
            raise ValueError(f"Prelec gamma must be > 0, got {self.gamma!r}")

    def __call__(self, z):
        return prelec(z, self.gamma)

    @property
    def is_identity(self) -> bool:
        return self.gamma == 1.0

    def max_ratio_bound(self) -> float:
        """Upper bound of ``z / p(z)`` over (0, 1] for ``gamma < 1``.

        Equals ``exp(gamma^(gamma/(1-gamma)) - gamma^(1/(1-gamma)))``,
        attained at ``z* = exp(-gamma^(1/(1-gamma)))``.
        """
        g = self.gamma
        if g >= 1.0:
            raise ValueError("bound only defined for gamma < 1")
        return math.exp(g ** (g / (1.0 - g)) - g ** (1.0 / (1.0 - g)))

    def overinvestment_factor(self) -> float:
        """Reciprocal of :meth:`max_ratio_bound`; ``e^-0.25`` at gamma = 0.5."""
        return 1.0 / self.max_ratio_bound()


@dataclass(frozen=True)
class Identity(WeightingFunction):
    def __call__(self, z):
        arr = np.asarray(z, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("weighting functions are defined on [0, 1]")
        return float(arr) if arr.ndim == 0 else arr.copy()

    @property
    def is_identity(self) -> bool:
        return True


@dataclass(frozen=True)
class Tabulated(WeightingFunction):
    """Piecewise-linear weighting through measured breakpoints."""

    z: tuple[float, ...]
    p: tuple[float, ...]

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if z.ndim != 1 or z.shape != p.shape or z.size < 2:
            raise ValueError("need at least two matching breakpoints")
        if np.any(np.diff(z) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(p) < 0):
            raise ValueError("tabulated values must be nondecreasing")
        if z[0] != 0.0 or z[-1] != 1.0 or p[0] != 0.0 or p[-1] != 1.0:
            raise ValueError("table must map 0 -> 0 and 1 -> 1")

    def __call__(self, z):
        arr = np.asarray(z, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("weighting functions are defined on [0, 1]")
        out = np.interp(arr, self.z, self.p)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def is_identity(self) -> bool:
        return bool(np.allclose(self.z, self.p, rtol=0, atol=0))

    @classmethod
    def from_csv(cls, path: str | PathLike) -> "Tabulated":
        """Load a table with header ``z,p``."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["z", "p"]:
                raise ValueError(f"{path}: expected header 'z,p', got {header!r}")
            zs, ps = [], []
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 2 columns")
                zs.append(float(row[0]))
                ps.append(float(row[1]))
        return cls(tuple(zs), tuple(ps))


def _check_simplex(theta: np.ndarray) -> None:
    if theta.ndim != 1 or theta.size == 0:
        raise ValueError("theta must be a non-empty vector")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    if np.any(theta < 0.0):
        raise ValueError("theta components must be nonnegative")
    if abs(theta.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"theta must sum to 1 (got {theta.sum()!r})")


@dataclass(frozen=True)
class PerceivedWeights:
    w: np.ndarray
    source_theta: np.ndarray
    weighting: WeightingFunction = field(repr=False)


def perceived_weights(
    theta: Sequence[float], wf: WeightingFunction, sort_descending: bool = False
) -> PerceivedWeights:
    """Rank-dependent perceived weights of ``theta`` under ``wf``.

    The cumulative sums follow the index order of ``theta``. With
    ``sort_descending`` the cumulation runs from the largest weight down
    and the result is mapped back to the original feature order.
    """
    theta = np.asarray(theta, dtype=float)
    _check_simplex(theta)
    if wf.is_identity:
        return PerceivedWeights(w=theta.copy(), source_theta=theta, weighting=wf)
    order = np.argsort(-theta, kind="stable") if sort_descending else np.arange(theta.size)
    cum = np.concatenate(([0.0], np.cumsum(theta[order])))
    # last cumulative sum is 1 by construction; pin it against rounding
    cum[-1] = 1.0
    cum = np.clip(cum, 0.0, 1.0)
    diffs = np.diff(np.asarray(wf(cum), dtype=float))
    w = np.empty_like(diffs)
    w[order] = diffs
    return PerceivedWeights(w=w, source_theta=theta, weighting=wf)


def sigma(theta: Sequence[float], w: Sequence[float]) -> float:
    """Misperception intensity ``theta.w / |w|^2``."""
    theta = np.asarray(theta, dtype=float)
    w = np.asarray(w, dtype=float)
    ww = float(w @ w)
    if ww == 0.0:
        raise ZeroDivisionError("perceived weights have zero norm")
    return float(theta @ w) / ww


@dataclass(frozen=True)
class NormComparison:
    theta_norm: float
    w_norm: float
    equal: bool


def compare_norms(theta: Sequence[float], w: Sequence[float], tol: float = 1e-3) -> NormComparison:
    """Report both Euclidean norms and whether they agree within ``tol``."""
    tn = float(np.linalg.norm(np.asarray(theta, dtype=float)))
    wn = float(np.linalg.norm(np.asarray(w, dtype=float)))
    return NormComparison(tn, wn, abs(tn - wn) <= tol)


def parse_bias(spec: str) -> WeightingFunction:
    """Parse ``identity``, ``prelec:<gamma>`` or ``table:<csv path>``."""
    spec = spec.strip()
    kind, _, arg = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "identity":
        return Identity()
    if kind == "prelec":
        return Prelec(float(arg))
    if kind == "table":
        return Tabulated.from_csv(arg.strip())
    raise ValueError(f"unknown bias spec {spec!r}")
