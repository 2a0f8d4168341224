"""Agent best responses to a (possibly misperceived) linear classifier.

Analytic cost families reduce to one rule: an agent strictly below the
target boundary whose cheapest crossing fits the budget moves by
``gap * step`` and lands exactly on the boundary; everyone else stays put.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .bias import WeightingFunction, perceived_weights
from .costs import CostModel, Norm2, PiecewiseLinear, points_for_hours, within_budget
from .model import Classifier

# acceptance slack after a move; responses land on the boundary up to rounding
BOUNDARY_RTOL = 1e-9


def boundary_tol(theta0: float) -> float:
    return BOUNDARY_RTOL * max(1.0, abs(theta0))


@dataclass(frozen=True)
class AgentParams:
    """Budget and cost model shared by a population.

    ``reward`` defaults to infinity: any affordable crossing is taken. A
    finite reward additionally requires ``reward >= cost(x_post, x0)``.
    """

    budget: float
    cost_model: CostModel = Norm2()
    reward: float = math.inf

    def __post_init__(self):
        if not self.budget >= 0:
            raise ValueError("budget must be nonnegative")
        if not self.reward > 0:
            raise ValueError("reward must be positive")


@dataclass(frozen=True, eq=False)
class ResponseOutcome:
    x0: np.ndarray
    x_post: np.ndarray
    delta: np.ndarray
    cost_incurred: float
    acted: bool
    accepted_true: bool
    accepted_perceived: bool
    allocation: np.ndarray | None = None  # hours per feature (piecewise only)


def _outcome(x0, x_post, cost_incurred, acted, true_c, target_c, allocation=None) -> ResponseOutcome:
    s_true = float(x_post @ true_c.theta)
    s_target = float(x_post @ target_c.theta)
    # only movers get the landing slack; untouched points are judged exactly
    tol_true = boundary_tol(true_c.theta0) if acted else 0.0
    tol_target = boundary_tol(target_c.theta0) if acted else 0.0
    return ResponseOutcome(
        x0=x0,
        x_post=x_post,
        delta=x_post - x0,
        cost_incurred=float(cost_incurred),
        acted=bool(acted),
        accepted_true=s_true >= true_c.theta0 - tol_true,
        accepted_perceived=s_target >= target_c.theta0 - tol_target,
        allocation=allocation,
    )


def _analytic(x0, target: Classifier, model: CostModel, budget: float, reward: float = math.inf,
              true_c: Classifier | None = None) -> ResponseOutcome:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != target.theta.shape:
        raise ValueError("dimension mismatch between x0 and classifier")
    model.check_dim(x0.size)
    true_c = target if true_c is None else true_c
    gap = target.theta0 - float(x0 @ target.theta)
    if gap > 0:
        cr = model.crossing(target.theta)
        spend = cr.cost(gap)
        if within_budget(spend, budget):
            x_post = x0 + gap * cr.step
            if math.isinf(reward) or reward >= model.cost(x_post, x0):
                return _outcome(x0, x_post, spend, True, true_c, target)
    return _outcome(x0, x0.copy(), 0.0, False, true_c, target)


def best_response_norm2(x0, c: Classifier, p: AgentParams) -> ResponseOutcome:
    """Euclidean projection onto ``theta.x = theta0`` when ``0 < d <= B``."""
    if not isinstance(p.cost_model, Norm2):
        raise TypeError("best_response_norm2 needs a Norm2 cost model")
    return _analytic(x0, c, p.cost_model, p.budget, p.reward)


def best_response_quadratic(x0, c: Classifier, cost, B: float) -> ResponseOutcome:
    return _analytic(x0, c, cost, B)


def best_response_manhattan(x0, c: Classifier, cost, B: float) -> ResponseOutcome:
    """Move only along the best bang-for-buck feature ``argmin c_i/theta_i``."""
    return _analytic(x0, c, cost, B)


def greedy_allocation(weights, cost: PiecewiseLinear, hours: float) -> np.ndarray:
    """Spend ``hours`` tier by tier on the highest ``weight * rate`` feature.

    Ties go to the lowest feature index. The whole budget is spent unless
    every feature runs out of finite tiers.
    """
    w = np.asarray(weights, dtype=float)
    n = w.size
    cost.check_dim(n)
    alloc = np.zeros(n)
    tier = [0] * n
    used = [0.0] * n
    left = float(hours)
    while left > 0:
        best, best_gain = -1, -math.inf
        for i in range(n):
            tiers = cost.tiers_for(i)
            if tier[i] >= len(tiers):
                continue
            gain = w[i] * tiers[tier[i]][1]
            if gain > best_gain:
                best, best_gain = i, gain
        if best < 0:
            break
        cap, _ = cost.tiers_for(best)[tier[best]]
        take = min(left, cap - used[best])
        alloc[best] += take
        used[best] += take
        left -= take
        if used[best] >= cap:
            tier[best] += 1
            used[best] = 0.0
    return alloc


def _points(alloc: np.ndarray, cost: PiecewiseLinear) -> np.ndarray:
    return np.array([points_for_hours(float(h), cost.tiers_for(i)) for i, h in enumerate(alloc)])


def best_response_piecewise(x0, c: Classifier, cost: PiecewiseLinear, B_hours: float,
                            true_c: Classifier | None = None) -> ResponseOutcome:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != c.theta.shape:
        raise ValueError("dimension mismatch between x0 and classifier")
    alloc = greedy_allocation(c.theta, cost, B_hours)
    x_post = x0 + _points(alloc, cost)
    spent = float(alloc.sum())
    return _outcome(x0, x_post, spent, spent > 0, c if true_c is None else true_c, c, allocation=alloc)


def integer_allocations(n: int, hours: int) -> Iterable[tuple[int, ...]]:
    """All ways of splitting ``hours`` whole hours across ``n`` features."""
    for cuts in itertools.combinations(range(hours + n - 1), n - 1):
        bounds = (-1,) + cuts + (hours + n - 1,)
        yield tuple(b - a - 1 for a, b in zip(bounds, bounds[1:]))


def exhaustive_piecewise(x0, c: Classifier, cost: PiecewiseLinear, hours: int):
    """Best integer-hour allocation by enumeration: ``(allocation, score)``.

    Returns every optimal allocation as well, in enumeration order.
    """
    x0 = np.asarray(x0, dtype=float)
    best_score, best = -math.inf, []
    for alloc in integer_allocations(x0.size, int(hours)):
        s = float((x0 + _points(np.asarray(alloc, dtype=float), cost)) @ c.theta)
        if s > best_score + 1e-9:
            best_score, best = s, [alloc]
        elif abs(s - best_score) <= 1e-9:
            best.append(alloc)
    return best, best_score


def _nested_convex_min(f, k: int, radius: float, resolution: int, tol: float):
    """Minimise a convex ``f`` over the box [-radius, radius]^k one coordinate at a time.

    Each coordinate is sampled on a grid and the bracket shrinks to the two
    cells around the grid minimum, which always contains a minimiser of a
    convex function, kinks included. Inner coordinates are solved for a whole
    batch of outer prefixes at once.
    """
    frac = np.linspace(0.0, 1.0, resolution)

    def solve(prefix):
        m = prefix.shape[0]
        rows = np.arange(m)
        lo, hi = np.full(m, -radius), np.full(m, radius)
        while True:
            ts = lo[:, None] + (hi - lo)[:, None] * frac
            cand = np.column_stack([np.repeat(prefix, resolution, axis=0), ts.reshape(-1)])
            if cand.shape[1] == k:
                vals, tails = f(cand), np.zeros((cand.shape[0], 0))
            else:
                vals, tails = solve(cand)
            vals = vals.reshape(m, resolution)
            i = np.argmin(vals, axis=1)
            width = (hi - lo) / (resolution - 1)
            if width.max() < tol:
                pick = rows * resolution + i
                return vals[rows, i], np.column_stack([ts[rows, i], tails[pick]])
            centre = ts[rows, i]
            lo, hi = centre - width, centre + width

    return solve(np.zeros((1, 0)))[1][0]


def oracle_best_response(x0, c: Classifier, m: CostModel, B: float, grid_resolution: int = 21) -> ResponseOutcome:
    """Brute-force best response for small dimensions.

    Analytic costs: nested bracketing search for the cheapest point of the
    boundary hyperplane, valid for any convex cost. Piecewise costs:
    enumeration of whole-hour allocations. Uses only the model's budget cost
    and never the closed forms.
    """
    if grid_resolution < 5:
        raise ValueError("grid_resolution must be at least 5 for the bracket to shrink")
    x0 = np.asarray(x0, dtype=float)
    if isinstance(m, PiecewiseLinear):
        if float(B) != int(B):
            raise ValueError("piecewise oracle needs a whole number of hours")
        allocs, _ = exhaustive_piecewise(x0, c, m, int(B))
        alloc = np.asarray(allocs[0], dtype=float)
        x_post = x0 + _points(alloc, m)
        return _outcome(x0, x_post, alloc.sum(), alloc.sum() > 0, c, c, allocation=alloc)

    theta = c.theta
    gap = c.theta0 - float(x0 @ theta)
    if gap <= 0:
        return _outcome(x0, x0.copy(), 0.0, False, c, c)
    n = x0.size
    proj = x0 + gap * theta / float(theta @ theta)
    if n == 1:
        best = proj
    else:
        basis = np.linalg.svd(theta[None, :])[2][1:]  # orthonormal basis of the hyperplane
        coeffs = np.asarray(getattr(m, "c", (1.0,)), dtype=float)
        scale = float(np.linalg.norm(proj - x0))
        # every point of the plane farther out than this costs more than proj
        radius = math.sqrt(n) * (coeffs.max() / coeffs.min()) * scale + 1e-12
        t = _nested_convex_min(lambda T: m.budget_costs(proj + T @ basis - x0), n - 1, radius,
                               grid_resolution, 1e-13 * (1.0 + scale))
        best = proj + t @ basis
    spend = m.budget_cost(best, x0)
    if within_budget(spend, B):
        return _outcome(x0, best, spend, True, c, c)
    return _outcome(x0, x0.copy(), 0.0, False, c, c)


def perceived_classifier(true_c: Classifier, bias: WeightingFunction, sort_descending: bool = False) -> Classifier:
    w = perceived_weights(true_c.theta, bias, sort_descending).w
    return Classifier(w, true_c.theta0)


def respond(x0, true_classifier: Classifier, bias: WeightingFunction, params: AgentParams,
            sort_descending: bool = False) -> ResponseOutcome:
    """Best response to the perceived rule ``(w(theta), theta0)``.

    ``accepted_true`` is judged against the deployed rule and
    ``accepted_perceived`` against the perceived one.
    """
    target = perceived_classifier(true_classifier, bias, sort_descending)
    m = params.cost_model
    if isinstance(m, PiecewiseLinear):
        return best_response_piecewise(x0, target, m, params.budget, true_c=true_classifier)
    return _analytic(x0, target, m, params.budget, params.reward, true_c=true_classifier)


@dataclass(frozen=True, eq=False)
class BatchResponse:
    """Column-wise responses of a whole population."""

    x_post: np.ndarray
    cost: np.ndarray
    acted: np.ndarray
    accepted_true: np.ndarray
    accepted_perceived: np.ndarray

    def __len__(self):
        return len(self.acted)

    def outcomes(self, X0: np.ndarray) -> list[ResponseOutcome]:
        return [
            ResponseOutcome(
                x0=X0[i], x_post=self.x_post[i], delta=self.x_post[i] - X0[i],
                cost_incurred=float(self.cost[i]), acted=bool(self.acted[i]),
                accepted_true=bool(self.accepted_true[i]),
                accepted_perceived=bool(self.accepted_perceived[i]),
            )
            for i in range(len(self))
        ]


# cost(g * step) = g**degree * cost(step) for the analytic families
_HOMOGENEITY = {"Norm2": 2.0, "QuadraticDiagonal": 2.0, "WeightedManhattan": 1.0}


def objective_terms(m: CostModel, cr) -> tuple[float, float]:
    """``(cost of one unit step, degree)`` so the objective cost of gap g is ``unit * g**degree``."""
    return m.cost(cr.step, np.zeros_like(cr.step)), _HOMOGENEITY[type(m).__name__]


def respond_batch(X0, true_c: Classifier, target_w, params: AgentParams) -> BatchResponse:
    """Vectorized analytic response of every row of ``X0`` to ``(target_w, theta0)``."""
    X0 = np.asarray(X0, dtype=float)
    if X0.ndim != 2 or X0.shape[1] != true_c.dim:
        raise ValueError("X0 must be an (n, d) array matching the classifier")
    m = params.cost_model
    if not m.analytic:
        raise TypeError("respond_batch handles analytic cost families only")
    m.check_dim(true_c.dim)
    w = np.asarray(target_w, dtype=float)
    theta0 = true_c.theta0
    gap = theta0 - X0 @ w
    cr = m.crossing(w)
    spend = np.where(gap > 0, cr.cost(np.maximum(gap, 0.0)), 0.0)
    act = action_mask(gap, cr, params.budget, params.reward, *objective_terms(m, cr))
    moved = np.where(act, gap, 0.0)
    x_post = X0 + moved[:, None] * cr.step[None, :]
    tol = np.where(act, boundary_tol(theta0), 0.0)
    return BatchResponse(
        x_post=x_post,
        cost=np.where(act, spend, 0.0),
        acted=act,
        accepted_true=x_post @ true_c.theta >= theta0 - tol,
        accepted_perceived=x_post @ w >= theta0 - tol,
    )


def respond_population(pop, true_classifier: Classifier, bias: WeightingFunction, params: AgentParams,
                       sort_descending: bool = False) -> list[ResponseOutcome]:
    """Elementwise :func:`respond`, order-stable with the input."""
    X0 = np.asarray(getattr(pop, "X", pop), dtype=float)
    if X0.size == 0:
        return []
    if X0.ndim == 1:
        X0 = X0[None, :]
    if isinstance(params.cost_model, PiecewiseLinear):
        return [respond(x, true_classifier, bias, params, sort_descending) for x in X0]
    target = perceived_classifier(true_classifier, bias, sort_descending)
    return respond_batch(X0, true_classifier, target.theta, params).outcomes(X0)


def action_mask(gap, crossing, budget: float, reward: float = math.inf, objective_unit: float = 0.0,
                degree: float = 1.0):
    """Which agents act: strictly below the target boundary with an affordable crossing."""
    gap = np.asarray(gap, dtype=float)
    pos = np.maximum(gap, 0.0)
    act = (gap > 0) & within_budget(crossing.cost(pos), budget)
    if not math.isinf(reward):
        act &= pos**degree * objective_unit <= reward
    return act


def acceptance_after_response(true_scores, target_scores, theta0, crossing, transfer: float,
                              budget: float, reward: float = math.inf, objective_unit: float = 0.0,
                              degree: float = 1.0) -> np.ndarray:
    """Deployed-rule acceptance after analytic responses, without moving points.

    ``true_scores``/``target_scores`` are pre-response scores under the
    deployed and the perceived weights and ``transfer = theta . step`` is the
    deployed score gained per unit of perceived gap closed. ``theta0`` may
    be an array, giving a ``(len(theta0), n)`` boolean matrix.
    """
    t0 = np.asarray(theta0, dtype=float)
    col = t0[..., None] if t0.ndim else t0
    gap = col - target_scores
    act = action_mask(gap, crossing, budget, reward, objective_unit, degree)
    post = true_scores + np.where(act, gap, 0.0) * transfer
    tol = np.where(act, BOUNDARY_RTOL * np.maximum(1.0, np.abs(col)), 0.0)
    return post >= col - tol
