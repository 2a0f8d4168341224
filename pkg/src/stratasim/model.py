"""Linear threshold classifiers ``h(x) = 1(theta.x >= theta0)``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bias import SIMPLEX_TOL


@dataclass(frozen=True, eq=False)
class Classifier:
    """Feature weights on the simplex plus an acceptance threshold.

    Use :meth:`from_weights` for unnormalized nonnegative weights; the
    threshold is rescaled with them so decisions are unchanged.
    """

    theta: np.ndarray
    theta0: float

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 1 or theta.size == 0:
            raise ValueError("theta must be a non-empty vector")
        if not np.all(np.isfinite(theta)) or np.any(theta < 0.0):
            raise ValueError("theta components must be finite and nonnegative")
        if abs(theta.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"theta must sum to 1, got {theta.sum()!r}; use Classifier.from_weights")
        if not np.isfinite(self.theta0):
            raise ValueError("theta0 must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "theta0", float(self.theta0))

    @classmethod
    def from_weights(cls, weights: Sequence[float], theta0: float) -> "Classifier":
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0.0) or not w.sum() > 0.0:
            raise ValueError("weights must be nonnegative with a positive sum")
        total = w.sum()
        return cls(w / total, theta0 / total)

    @property
    def dim(self) -> int:
        return self.theta.size

    def __eq__(self, other):
        if not isinstance(other, Classifier):
            return NotImplemented
        return self.theta0 == other.theta0 and np.array_equal(self.theta, other.theta)

    def __hash__(self):
        return hash((self.theta.tobytes(), self.theta0))

    def __repr__(self):
        return f"Classifier(theta={self.theta.tolist()}, theta0={self.theta0!r})"

    def to_string(self) -> str:
        theta = ",".join(repr(float(t)) for t in self.theta)
        return f"theta={theta};theta0={self.theta0!r}"

    @classmethod
    def parse(cls, text: str) -> "Classifier":
        """Inverse of :meth:`to_string`; weights are normalized if needed."""
        fields = {}
        for part in text.split(";"):
            if not part.strip():
                continue
            key, sep, value = part.partition("=")
            if not sep:
                raise ValueError(f"malformed classifier field {part!r}")
            fields[key.strip()] = value.strip()
        if set(fields) != {"theta", "theta0"}:
            raise ValueError(f"classifier needs exactly theta and theta0, got {sorted(fields)}")
        weights = [float(v) for v in fields["theta"].split(",")]
        theta0 = float(fields["theta0"])
        if abs(sum(weights) - 1.0) <= SIMPLEX_TOL:
            return cls(np.asarray(weights), theta0)
        return cls.from_weights(weights, theta0)


def _as_features(x, c: Classifier) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != c.dim:
        raise ValueError(f"feature dimension {x.shape[-1]} does not match classifier dimension {c.dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    return x


def score(x, c: Classifier):
    """``theta.x`` for one vector or a stack of row vectors."""
    x = _as_features(x, c)
    s = x @ c.theta
    return float(s) if np.ndim(s) == 0 else s


def classify(x, c: Classifier, tol: float = 0.0):
    """1 iff ``theta.x >= theta0 - tol``; the boundary itself is accepted."""
    s = score(x, c)
    out = np.asarray(s) >= c.theta0 - tol
    return int(out) if out.ndim == 0 else out.astype(int)


def signed_distance(x0, theta, theta0: float):
    """``(theta0 - theta.x0) / |theta|``: positive below the boundary."""
    theta = np.asarray(theta, dtype=float)
    norm = float(np.linalg.norm(theta))
    if norm == 0.0:
        raise ValueError("theta has zero norm")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape[-1] != theta.size:
        raise ValueError("dimension mismatch")
    d = (theta0 - x0 @ theta) / norm
    return float(d) if np.ndim(d) == 0 else d
