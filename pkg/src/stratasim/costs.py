"""Cost families for moving from ``x0`` to ``x`` and their budget semantics.

Each analytic family also knows its cheapest way of raising a linear score
``v.x`` by a gap ``g`` (:class:`Crossing`); the closed-form best responses
and the band geometry are both built from that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Classifier

# relative slack on budget comparisons so exactly-affordable moves stay affordable
AFFORD_RTOL = 1e-12

DEFAULT_TIERS = ((4.0, 5.0), (4.0, 2.5), (math.inf, 1.0))


@dataclass(frozen=True)
class Crossing:
    """Cost-minimal displacement per unit of score gap.

    Closing a gap ``g > 0`` moves the agent by ``g * step`` and costs
    ``scale * g**power`` in budget units.
    """

    step: np.ndarray
    scale: float
    power: float

    def cost(self, gap):
        gap = np.asarray(gap, dtype=float)
        out = self.scale * np.maximum(gap, 0.0) ** self.power
        return float(out) if out.ndim == 0 else out

    def reach(self, budget: float) -> float:
        """Largest gap closable within ``budget``."""
        if math.isinf(budget):
            return math.inf
        return (budget / self.scale) ** (1.0 / self.power)


def within_budget(cost, budget: float):
    return np.asarray(cost) <= budget * (1.0 + AFFORD_RTOL) + 1e-15


def _positive_vector(c, name: str) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)) or np.any(c <= 0):
        raise ValueError(f"{name} coefficients must be positive and finite")
    return c


class CostModel:
    analytic = True

    def cost(self, x, x0) -> float:
        raise NotImplementedError

    def budget_cost(self, x, x0) -> float:
        """The quantity compared against the budget ``B``."""
        return self.cost(x, x0)

    def budget_costs(self, D) -> np.ndarray:
        """:meth:`budget_cost` for each row of displacements ``D``."""
        D = np.atleast_2d(np.asarray(D, dtype=float))
        zero = np.zeros(D.shape[1])
        return np.array([self.budget_cost(d, zero) for d in D])

    def crossing(self, weights) -> Crossing:
        raise NotImplementedError

    def check_dim(self, n: int) -> None:
        pass


def _diff(x, x0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if x.shape != x0.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x0.shape}")
    return x - x0


@dataclass(frozen=True)
class Norm2(CostModel):
    """``|x - x0|^2``; the budget is compared with the plain distance by default."""

    budget_mode: str = "distance"

    def __post_init__(self):
        if self.budget_mode not in ("distance", "squared"):
            raise ValueError("norm2_budget must be 'distance' or 'squared'")

    def cost(self, x, x0) -> float:
        d = _diff(x, x0)
        return float(d @ d)

    def budget_cost(self, x, x0) -> float:
        d = _diff(x, x0)
        sq = float(d @ d)
        return math.sqrt(sq) if self.budget_mode == "distance" else sq

    def budget_costs(self, D) -> np.ndarray:
        sq = np.einsum("ij,ij->i", D, D)
        return np.sqrt(sq) if self.budget_mode == "distance" else sq

    def crossing(self, weights) -> Crossing:
        w = np.asarray(weights, dtype=float)
        ww = float(w @ w)
        if self.budget_mode == "distance":
            return Crossing(w / ww, 1.0 / math.sqrt(ww), 1.0)
        return Crossing(w / ww, 1.0 / ww, 2.0)


@dataclass(frozen=True)
class QuadraticDiagonal(CostModel):
    c: tuple

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(_positive_vector(self.c, "quadratic").tolist()))

    def check_dim(self, n: int) -> None:
        if len(self.c) != n:
            raise ValueError(f"quadratic cost has {len(self.c)} coefficients for {n} features")

    def cost(self, x, x0) -> float:
        d = _diff(x, x0)
        self.check_dim(d.size)
        return float(np.asarray(self.c) @ (d * d))

    def budget_costs(self, D) -> np.ndarray:
        return (D * D) @ np.asarray(self.c)

    def crossing(self, weights) -> Crossing:
        w = np.asarray(weights, dtype=float)
        self.check_dim(w.size)
        c = np.asarray(self.c)
        s = float(np.sum(w * w / c))
        return Crossing((w / c) / s, 1.0 / s, 2.0)


@dataclass(frozen=True)
class WeightedManhattan(CostModel):
    c: tuple

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(_positive_vector(self.c, "manhattan").tolist()))

    def check_dim(self, n: int) -> None:
        if len(self.c) != n:
            raise ValueError(f"manhattan cost has {len(self.c)} coefficients for {n} features")

    def cost(self, x, x0) -> float:
        d = _diff(x, x0)
        self.check_dim(d.size)
        return float(np.asarray(self.c) @ np.abs(d))

    def budget_costs(self, D) -> np.ndarray:
        return np.abs(D) @ np.asarray(self.c)

    def best_feature(self, weights) -> int:
        """``argmin_i c_i / w_i``, lowest index on ties; zero weights never win."""
        w = np.asarray(weights, dtype=float)
        self.check_dim(w.size)
        c = np.asarray(self.c)
        with np.errstate(divide="ignore"):
            ratio = np.where(w > 0, c / np.where(w > 0, w, 1.0), np.inf)
        return int(np.argmin(ratio))

    def crossing(self, weights) -> Crossing:
        w = np.asarray(weights, dtype=float)
        k = self.best_feature(w)
        step = np.zeros_like(w)
        step[k] = 1.0 / w[k]
        return Crossing(step, self.c[k] / w[k], 1.0)


def _validate_tiers(tiers) -> tuple:
    tiers = tuple((float(h), float(r)) for h, r in tiers)
    if not tiers:
        raise ValueError("piecewise cost needs at least one tier")
    for h, r in tiers:
        if not h > 0 or not r > 0 or math.isnan(h) or not math.isfinite(r):
            raise ValueError(f"invalid tier ({h}, {r}): hours and rate must be positive")
    rates = [r for _, r in tiers]
    if any(b >= a for a, b in zip(rates, rates[1:])):
        raise ValueError("tier rates (points per hour) must be strictly decreasing")
    if any(math.isinf(h) for h, _ in tiers[:-1]):
        raise ValueError("only the last tier may be unbounded")
    return tiers


def points_for_hours(hours: float, tiers) -> float:
    """Improvement points earned by spending ``hours`` on one feature."""
    if hours < 0:
        raise ValueError("hours must be nonnegative")
    points, left = 0.0, hours
    for h, r in tiers:
        used = min(left, h)
        points += used * r
        left -= used
        if left <= 0:
            break
    if left > 1e-12:
        raise ValueError("hours exceed the total tier capacity")
    return points


def hours_for_points(points: float, tiers) -> float:
    """Hours needed for ``points`` of improvement (inverse of :func:`points_for_hours`)."""
    if points < 0:
        raise ValueError("piecewise costs model nonnegative improvements only")
    hours, left = 0.0, points
    for h, r in tiers:
        cap = h * r
        used = min(left, cap)
        hours += used / r
        left -= used
        if left <= 0:
            break
    if left > 1e-9:
        raise ValueError(f"improvement of {points} points exceeds the attainable total")
    return hours


@dataclass(frozen=True)
class PiecewiseLinear(CostModel):
    """Hours-based cost with diminishing points per hour.

    ``tiers`` is shared by all features unless ``per_feature`` supplies one
    tier list per feature. Costs and budgets are in hours.
    """

    tiers: tuple = DEFAULT_TIERS
    per_feature: tuple | None = None

    analytic = False

    def __post_init__(self):
        object.__setattr__(self, "tiers", _validate_tiers(self.tiers))
        if self.per_feature is not None:
            object.__setattr__(self, "per_feature", tuple(_validate_tiers(t) for t in self.per_feature))

    def tiers_for(self, i: int) -> tuple:
        if self.per_feature is not None:
            return self.per_feature[i]
        return self.tiers

    def check_dim(self, n: int) -> None:
        if self.per_feature is not None and len(self.per_feature) != n:
            raise ValueError(f"piecewise cost has {len(self.per_feature)} tier lists for {n} features")

    def cost(self, x, x0) -> float:
        d = _diff(x, x0)
        self.check_dim(d.size)
        if np.any(d < -1e-12):
            raise ValueError("piecewise costs model nonnegative improvements only")
        return float(sum(hours_for_points(max(float(di), 0.0), self.tiers_for(i)) for i, di in enumerate(d)))

    def crossing(self, weights) -> Crossing:
        raise TypeError("piecewise-linear costs have no closed-form crossing")


def cost(x, x0, m: CostModel) -> float:
    return m.cost(x, x0)


def affordable(x0, c: Classifier, m: CostModel, B: float) -> bool:
    """Whether ``x0`` can reach ``theta.x >= theta0`` within budget ``B``."""
    if B < 0:
        raise ValueError("budget must be nonnegative")
    x0 = np.asarray(x0, dtype=float)
    gap = c.theta0 - float(x0 @ c.theta)
    if gap <= 0:
        return True
    if isinstance(m, PiecewiseLinear):
        from .response import best_response_piecewise

        best = best_response_piecewise(x0, c, m, B)
        return float(best.x_post @ c.theta) >= c.theta0
    return bool(within_budget(m.crossing(c.theta).cost(gap), B))


def parse_cost(spec: str, norm2_budget: str = "distance") -> CostModel:
    """Parse ``norm2``, ``quad:c1,c2``, ``manhattan:c1,c2`` or ``piecewise:<tiers>``.

    Piecewise tiers are ``hours@rate`` items separated by ``/``, e.g.
    ``piecewise:4@5/4@2.5/inf@1``; ``piecewise`` alone uses the defaults.
    """
    spec = spec.strip()
    kind, _, arg = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "norm2":
        return Norm2(norm2_budget)
    if kind in ("quad", "quadratic"):
        return QuadraticDiagonal(tuple(float(v) for v in arg.split(",")))
    if kind == "manhattan":
        return WeightedManhattan(tuple(float(v) for v in arg.split(",")))
    if kind == "piecewise":
        if not arg.strip():
            return PiecewiseLinear()
        tiers = []
        for item in arg.split("/"):
            h, sep, r = item.partition("@")
            if not sep:
                raise ValueError(f"malformed tier {item!r}; expected hours@rate")
            tiers.append((float(h), float(r)))
        return PiecewiseLinear(tuple(tiers))
    raise ValueError(f"unknown cost spec {spec!r}")
