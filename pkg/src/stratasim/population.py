"""Labeled agent populations: Gaussian mixtures, sigmoid-labeled scores, CSV.

Random streams come from ``numpy.random.SeedSequence(seed)``. The Gaussian
sampler spawns one child stream per label (label 1 first, label 0 second),
so changing one label's size never shifts the other label's draws.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._io import write_csv

PSD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Population:
    X: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=int)
        if X.ndim != 2:
            raise ValueError("X must be a 2-D array (agents x features)")
        if y.shape != (X.shape[0],):
            raise ValueError("need exactly one label per agent")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        if np.any((y != 0) & (y != 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.X.shape[0]

    def __iter__(self):
        for x, y in zip(self.X, self.y):
            yield LabeledAgent(x, int(y))

    def __eq__(self, other):
        if not isinstance(other, Population):
            return NotImplemented
        return np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def label_counts(self) -> tuple[int, int]:
        """``(#label 0, #label 1)``."""
        n1 = int(self.y.sum())
        return len(self) - n1, n1

    def subset(self, mask) -> "Population":
        return Population(self.X[mask], self.y[mask], dict(self.meta))


@dataclass(frozen=True)
class LabeledAgent:
    x0: np.ndarray
    y: int


def _matrix(m, d: int, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (d, d):
        raise ValueError(f"{name} must be {d}x{d}")
    if not np.allclose(m, m.T, atol=PSD_TOL):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(m).min() < -PSD_TOL * max(1.0, np.abs(m).max()):
        raise ValueError(f"{name} is not positive semi-definite")
    return m


@dataclass(frozen=True, eq=False)
class GaussianScenario:
    """Two labeled Gaussian components; features are multiplied by ``scale``."""

    mu1: Sequence[float]
    mu0: Sequence[float]
    sigma1: Sequence[Sequence[float]]
    sigma0: Sequence[Sequence[float]]
    n1: int = 10_000
    n0: int = 10_000
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        mu1 = np.asarray(self.mu1, dtype=float)
        mu0 = np.asarray(self.mu0, dtype=float)
        if mu1.ndim != 1 or mu1.shape != mu0.shape:
            raise ValueError("means must be vectors of equal length")
        d = mu1.size
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "sigma1", _matrix(self.sigma1, d, "sigma1"))
        object.__setattr__(self, "sigma0", _matrix(self.sigma0, d, "sigma0"))
        if self.n1 < 0 or self.n0 < 0:
            raise ValueError("label counts must be nonnegative")


def _factor(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _draw(rng: np.random.Generator, mu: np.ndarray, cov: np.ndarray, n: int) -> np.ndarray:
    z = rng.standard_normal((n, mu.size))
    return mu + z @ _factor(cov).T


def sample_gaussian(s: GaussianScenario) -> Population:
    """Label-1 rows first, then label-0 rows; deterministic given ``s.seed``."""
    rng1, rng0 = (np.random.default_rng(c) for c in np.random.SeedSequence(s.seed).spawn(2))
    X1 = _draw(rng1, s.mu1, s.sigma1, s.n1)
    X0 = _draw(rng0, s.mu0, s.sigma0, s.n0)
    X = np.vstack([X1, X0]) * s.scale
    y = np.concatenate([np.ones(s.n1, dtype=int), np.zeros(s.n0, dtype=int)])
    meta = {"source": "gaussian", "seed": s.seed, "n1": s.n1, "n0": s.n0, "scale": s.scale}
    return Population(X.reshape(-1, s.mu1.size), y, meta)


@dataclass(frozen=True)
class SigmoidScenario:
    """Two-feature generator with score-based sigmoid labels.

    Feature 1 is ``Normal(mean1, std1)`` minus a discrete spike; feature 2 is
    ``offset2 - Gamma(shape, scale)``. The label-1 probability is
    ``1 / (1 + exp(-slope * (score / score_div - midpoint)))``.
    """

    n: int = 150
    mean1: float = 700.0
    std1: float = 200.0
    spike_values: tuple = (0.0, 20.0, 50.0, 100.0)
    spike_probs: tuple = (0.6, 0.2, 0.1, 0.1)
    offset2: float = 1500.0
    gamma_shape: float = 4.0
    gamma_scale: float = 100.0
    slope: float = 0.8
    midpoint: float = 80.0
    score_div: float = 10.0

    def __post_init__(self):
        p = np.asarray(self.spike_probs, dtype=float)
        if len(self.spike_values) != p.size or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("spike probabilities must be a distribution over the spike values")
        if self.n < 0:
            raise ValueError("n must be nonnegative")


def approval_probability(score, slope: float = 0.8, midpoint: float = 80.0, score_div: float = 10.0):
    z = slope * (np.asarray(score, dtype=float) / score_div - midpoint)
    # tanh form avoids overflow and gives exactly 0.5 at the midpoint
    out = 0.5 * (1.0 + np.tanh(0.5 * z))
    return float(out) if np.ndim(out) == 0 else out


def spike_inverse_cdf(u, values, probs) -> np.ndarray:
    """Map uniforms on [0, 1) to spike values by cumulative probability."""
    cdf = np.cumsum(np.asarray(probs, dtype=float))
    idx = np.searchsorted(cdf, np.asarray(u, dtype=float), side="right")
    return np.asarray(values, dtype=float)[np.minimum(idx, len(values) - 1)]


def sample_sigmoid_labeled(spec: SigmoidScenario | None = None, weights=(0.65, 0.35), seed: int = 0) -> Population:
    """Draw features, score them with ``weights`` and sample labels.

    One generator is consumed in a fixed order: feature-1 normals, spike
    uniforms, feature-2 gammas, label uniforms.
    """
    spec = SigmoidScenario() if spec is None else spec
    w = np.asarray(weights, dtype=float)
    if w.shape != (2,):
        raise ValueError("the sigmoid generator has two features")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = spec.n
    f1 = rng.normal(spec.mean1, spec.std1, n) - spike_inverse_cdf(rng.random(n), spec.spike_values, spec.spike_probs)
    f2 = spec.offset2 - rng.gamma(spec.gamma_shape, spec.gamma_scale, n)
    X = np.column_stack([f1, f2])
    prob = approval_probability(X @ w, spec.slope, spec.midpoint, spec.score_div)
    y = (rng.random(n) < prob).astype(int)
    meta = {"source": "sigmoid", "seed": seed, "weights": tuple(w.tolist())}
    return Population(X.reshape(n, 2), y, meta)


class CsvFormatError(ValueError):
    def __init__(self, path, row: int | None, message: str):
        self.path = str(path)
        self.row = row
        where = f"{path}" if row is None else f"{path}: row {row}"
        super().__init__(f"{where}: {message}")


def load_csv(path) -> Population:
    """Read ``x1,...,xn,y``; rows are numbered from 1 after the header."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvFormatError(path, None, "empty file, expected header x1,...,xn,y")
        header = [h.strip() for h in header]
        if len(header) < 2 or header[-1] != "y":
            raise CsvFormatError(path, None, "missing label column 'y'")
        n = len(header) - 1
        if header[:-1] != [f"x{i + 1}" for i in range(n)]:
            raise CsvFormatError(path, None, f"feature columns must be x1..x{n}")
        X, y = [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != n + 1:
                raise CsvFormatError(path, row_no, f"expected {n + 1} fields, got {len(row)}")
            try:
                feats = [float(v) for v in row[:-1]]
            except ValueError:
                raise CsvFormatError(path, row_no, "non-numeric feature") from None
            label = row[-1].strip()
            if label not in ("0", "1"):
                raise CsvFormatError(path, row_no, f"label must be 0 or 1, got {label!r}")
            if not np.all(np.isfinite(feats)):
                raise CsvFormatError(path, row_no, "features must be finite")
            X.append(feats)
            y.append(int(label))
    X = np.asarray(X, dtype=float).reshape(len(y), n)
    return Population(X, np.asarray(y, dtype=int), {"source": "csv", "path": str(path)})


def save_csv(pop: Population, path) -> None:
    header = [f"x{i + 1}" for i in range(pop.dim)] + ["y"]
    write_csv(path, header, ([*x, int(y)] for x, y in zip(pop.X, pop.y)))
