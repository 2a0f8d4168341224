"""Firm-side losses, deployment search, loss-comparison checks and welfare.

Losses are ``-u_plus * TP + u_minus * FP`` computed from integer counts, so
every comparison between grid points is deterministic. Lower is better.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .analysis import set_masks
from .bias import Identity, WeightingFunction, perceived_weights
from .costs import CostModel, Norm2, PiecewiseLinear
from .model import Classifier
from .population import Population
from .response import (
    AgentParams,
    acceptance_after_response,
    objective_terms,
    perceived_classifier,
    respond,
    respond_batch,
)


@dataclass(frozen=True)
class LossSpec:
    u_plus: float = 1.0
    u_minus: float = 1.0

    def __post_init__(self):
        if not (self.u_plus > 0 and self.u_minus > 0):
            raise ValueError("u_plus and u_minus must be positive")


@dataclass(frozen=True)
class LossValue:
    total: float
    mean: float
    tp: int = 0
    fp: int = 0


def _loss_from_counts(tp, fp, n: int, ls: LossSpec):
    total = -ls.u_plus * np.asarray(tp, dtype=float) + ls.u_minus * np.asarray(fp, dtype=float)
    mean = total / n if n else np.zeros_like(total)
    return total, mean


def _as_xy(pop) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(pop, Population):
        return pop.X, pop.y
    pairs = list(pop)
    if not pairs:
        return np.zeros((0, 0)), np.zeros(0, dtype=int)
    X = np.asarray([p[0] for p in pairs], dtype=float)
    y = np.asarray([p[1] for p in pairs], dtype=int)
    return X, y


def loss_from_acceptance(accepted, y, ls: LossSpec) -> LossValue:
    accepted = np.asarray(accepted, dtype=bool)
    y = np.asarray(y)
    tp = int(np.count_nonzero(accepted & (y == 1)))
    fp = int(np.count_nonzero(accepted & (y == 0)))
    total, mean = _loss_from_counts(tp, fp, len(y), ls)
    return LossValue(float(total), float(mean), tp, fp)


def empirical_loss(pop_post, c: Classifier, ls: LossSpec = LossSpec()) -> LossValue:
    """Loss of deploying ``c`` on already-moved features (no further response)."""
    X, y = _as_xy(pop_post)
    if len(y) == 0:
        return LossValue(0.0, 0.0)
    return loss_from_acceptance(X @ c.theta >= c.theta0, y, ls)


class ModeKind(str, enum.Enum):
    OBLIVIOUS = "oblivious"
    AWARE_RATIONAL = "aware_rational"
    AWARE_BIASED = "aware_biased"


@dataclass(frozen=True)
class DeploymentMode:
    """How the firm models responses when choosing its classifier.

    Oblivious optimizes against unmoved features; the aware modes optimize
    against rational (identity) or biased responses.
    """

    kind: ModeKind
    bias: WeightingFunction | None = None

    @classmethod
    def oblivious(cls) -> "DeploymentMode":
        return cls(ModeKind.OBLIVIOUS)

    @classmethod
    def aware_rational(cls) -> "DeploymentMode":
        return cls(ModeKind.AWARE_RATIONAL, Identity())

    @classmethod
    def aware_biased(cls, bias: WeightingFunction) -> "DeploymentMode":
        return cls(ModeKind.AWARE_BIASED, bias)

    @classmethod
    def parse(cls, name: str, bias: WeightingFunction | None = None) -> "DeploymentMode":
        kind = ModeKind(name.strip().lower())
        if kind is ModeKind.OBLIVIOUS:
            return cls.oblivious()
        if kind is ModeKind.AWARE_RATIONAL:
            return cls.aware_rational()
        if bias is None:
            raise ValueError("aware_biased mode needs a bias")
        return cls.aware_biased(bias)

    @property
    def response_bias(self) -> WeightingFunction | None:
        return None if self.kind is ModeKind.OBLIVIOUS else self.bias


class Scorer:
    """Deployed-rule acceptance for one weight vector and many thresholds.

    ``bias=None`` means no response at all. Analytic costs are scored
    without moving points; piecewise costs fall back to per-agent solving.
    """

    def __init__(self, X, theta, bias: WeightingFunction | None, params: AgentParams | None,
                 sort_descending: bool = False):
        self.X = np.asarray(X, dtype=float)
        self.theta = np.asarray(theta, dtype=float)
        self.bias = bias
        self.params = params
        self.sort_descending = sort_descending
        self.s_true = self.X @ self.theta
        if bias is None:
            return
        if params is None:
            raise ValueError("responding agents need AgentParams")
        self.w = perceived_weights(self.theta, bias, sort_descending).w
        m = params.cost_model
        self.analytic = m.analytic
        if self.analytic:
            m.check_dim(self.theta.size)
            self.cr = m.crossing(self.w)
            self.s_target = self.X @ self.w
            self.transfer = float(self.theta @ self.cr.step)
            self.unit, self.degree = objective_terms(m, self.cr)

    def accepted(self, theta0s) -> np.ndarray:
        t0 = np.atleast_1d(np.asarray(theta0s, dtype=float))
        if self.bias is None:
            return self.s_true[None, :] >= t0[:, None]
        if self.analytic:
            p = self.params
            return acceptance_after_response(
                self.s_true, self.s_target, t0, self.cr, self.transfer, p.budget, p.reward, self.unit, self.degree
            )
        rows = []
        for t in t0:
            c = Classifier(self.theta, float(t))
            rows.append([respond(x, c, self.bias, self.params, self.sort_descending).accepted_true for x in self.X])
        return np.asarray(rows, dtype=bool).reshape(len(t0), len(self.X))


def losses_for_thresholds(scorer: Scorer, y, theta0s, ls: LossSpec) -> np.ndarray:
    """Mean loss for every threshold in ``theta0s``."""
    acc = scorer.accepted(theta0s)
    y = np.asarray(y)
    tp = acc[:, y == 1].sum(axis=1)
    fp = acc[:, y == 0].sum(axis=1)
    return _loss_from_counts(tp, fp, len(y), ls)[1]


def loss_under_response(pop_pre, deployed: Classifier, bias: WeightingFunction | None, params: AgentParams | None,
                        ls: LossSpec = LossSpec(), sort_descending: bool = False) -> LossValue:
    """Loss of ``deployed`` after agents respond to ``(w(theta), theta0)``.

    ``bias=None`` evaluates unmoved features (a non-strategic population).
    """
    X, y = _as_xy(pop_pre)
    if len(y) == 0:
        return LossValue(0.0, 0.0)
    acc = Scorer(X, deployed.theta, bias, params, sort_descending).accepted([deployed.theta0])[0]
    return loss_from_acceptance(acc, y, ls)


@dataclass(frozen=True)
class SearchSpec:
    """Grid for the deployment search.

    2-D: ``theta_1`` runs over ``theta_steps`` evenly spaced values in [0, 1].
    ``theta0`` runs over ``theta0_steps`` values, by default spanning the
    observed pre-response scores of the weight vector being tried.
    """

    theta_steps: int = 181
    theta0_min: float | None = None
    theta0_max: float | None = None
    theta0_steps: int = 201
    refine: bool = True
    max_sweeps: int = 5

    def __post_init__(self):
        if self.theta_steps < 1 or self.theta0_steps < 1:
            raise ValueError("empty search grid")
        if (self.theta0_min is None) != (self.theta0_max is None):
            raise ValueError("set both theta0_min and theta0_max or neither")
        if self.theta0_min is not None and self.theta0_max < self.theta0_min:
            raise ValueError("theta0_max must be >= theta0_min")

    def theta0_grid(self, scores: np.ndarray) -> np.ndarray:
        if self.theta0_min is not None:
            lo, hi = self.theta0_min, self.theta0_max
        elif scores.size:
            lo, hi = float(scores.min()), float(scores.max())
        else:
            lo = hi = 0.0
        return np.linspace(lo, hi, self.theta0_steps)


@dataclass(frozen=True, eq=False)
class GridPoint:
    theta: np.ndarray
    theta0: float
    loss: float


@dataclass(frozen=True, eq=False)
class OptimizeResult:
    classifier: Classifier
    loss: LossValue
    mode: DeploymentMode
    grid: list = field(repr=False, default_factory=list)


def _thread_count() -> int:
    raw = os.environ.get("STRATASIM_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"STRATASIM_THREADS must be an integer, got {raw!r}") from None


def _better(a: GridPoint, b: GridPoint | None) -> bool:
    """Lower loss, then smaller theta0, then lexicographically smaller theta."""
    if b is None:
        return True
    if a.loss != b.loss:
        return a.loss < b.loss
    if a.theta0 != b.theta0:
        return a.theta0 < b.theta0
    return tuple(a.theta) < tuple(b.theta)


class _Evaluator:
    def __init__(self, X, y, mode: DeploymentMode, ls: LossSpec, params, sort_descending):
        self.X, self.y, self.ls, self.params = X, y, ls, params
        self.bias = mode.response_bias
        self.sort_descending = sort_descending

    def scorer(self, theta) -> Scorer:
        return Scorer(self.X, theta, self.bias, self.params, self.sort_descending)

    def points(self, theta, theta0s) -> list[GridPoint]:
        theta = np.asarray(theta, dtype=float)
        losses = losses_for_thresholds(self.scorer(theta), self.y, theta0s, self.ls)
        return [GridPoint(theta, float(t), float(l)) for t, l in zip(theta0s, losses)]


def _best(points: Iterable[GridPoint]) -> GridPoint | None:
    best = None
    for p in points:
        if _better(p, best):
            best = p
    return best


def _map(fn, items: list, threads: int) -> list:
    if threads <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _simplex2(t1: float) -> np.ndarray:
    t1 = min(max(float(t1), 0.0), 1.0)
    return np.array([t1, 1.0 - t1])


def optimize_threshold(pop_pre, mode: DeploymentMode, ls: LossSpec = LossSpec(), search: SearchSpec = SearchSpec(),
                       params: AgentParams | None = None, extra_candidates: Sequence[Classifier] = (),
                       sort_descending: bool = False, keep_grid: bool = False) -> OptimizeResult:
    """Grid minimizer of the mode's loss, refined once at half steps.

    ``extra_candidates`` are evaluated alongside the grid, which lets two
    searches share points (e.g. the rational optimum inside the biased
    search). Ties: smallest ``theta0``, then smallest ``theta``.
    """
    X, y = _as_xy(pop_pre)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("cannot optimize over an empty population")
    if mode.kind is not ModeKind.OBLIVIOUS and params is None:
        raise ValueError("aware modes need AgentParams")
    ev = _Evaluator(X, y, mode, ls, params, sort_descending)
    threads = _thread_count()
    grid: list[GridPoint] = []
    d = X.shape[1]

    if d == 1:
        thetas = [np.array([1.0])]
    elif d == 2:
        thetas = [_simplex2(t) for t in np.linspace(0.0, 1.0, search.theta_steps)]
    else:
        thetas = []

    def eval_theta(theta):
        theta = np.asarray(theta, dtype=float)
        return ev.points(theta, search.theta0_grid(X @ theta))

    if d <= 2:
        for pts in _map(eval_theta, thetas, threads):
            grid.extend(pts)
        best = _best(grid)
    else:
        best = _coordinate_descent(ev, X, search, grid, threads)

    for c in extra_candidates:
        if c.dim != d:
            raise ValueError("extra candidate dimension mismatch")
        p = ev.points(c.theta, [c.theta0])[0]
        grid.append(p)
        if _better(p, best):
            best = p

    if search.refine and best is not None:
        best = _refine(ev, X, search, best, grid)

    clf = Classifier(best.theta, best.theta0)
    loss = loss_under_response(Population(X, y), clf, mode.response_bias, params, ls,
                               sort_descending)
    return OptimizeResult(clf, loss, mode, grid if keep_grid else [])


def _theta0_step(X, theta, search: SearchSpec) -> float:
    g = search.theta0_grid(X @ theta)
    return float(g[1] - g[0]) if g.size > 1 else 0.0


def _refine(ev: _Evaluator, X, search: SearchSpec, best: GridPoint, grid: list) -> GridPoint:
    """One pass over the half-step neighbours of ``best``."""
    d = X.shape[1]
    thetas = [best.theta]
    if d == 2 and search.theta_steps > 1:
        h = 0.5 / (search.theta_steps - 1)
        for t1 in (best.theta[0] - h, best.theta[0] + h):
            if 0.0 <= t1 <= 1.0:
                thetas.append(_simplex2(t1))
    elif d > 2 and search.theta_steps > 1:
        h = 0.5 / (search.theta_steps - 1)
        for i in range(d):
            for sgn in (-1.0, 1.0):
                cand = _shift_coordinate(best.theta, i, best.theta[i] + sgn * h)
                if cand is not None:
                    thetas.append(cand)
    k = 0.5 * _theta0_step(X, best.theta, search)
    t0s = [best.theta0 - k, best.theta0, best.theta0 + k] if k > 0 else [best.theta0]
    for theta in thetas:
        for p in ev.points(theta, t0s):
            grid.append(p)
            if _better(p, best):
                best = p
    return best


def _shift_coordinate(theta: np.ndarray, i: int, value: float) -> np.ndarray | None:
    """Set ``theta[i] = value`` and rescale the others to keep the simplex."""
    if not 0.0 <= value <= 1.0:
        return None
    rest = np.delete(theta, i)
    total = rest.sum()
    rest = rest / total * (1.0 - value) if total > 0 else np.full(rest.size, (1.0 - value) / rest.size)
    out = np.insert(rest, i, value)
    out = np.clip(out, 0.0, None)
    return out / out.sum()


def _coordinate_descent(ev: _Evaluator, X, search: SearchSpec, grid: list, threads: int) -> GridPoint:
    d = X.shape[1]
    theta = np.full(d, 1.0 / d)
    best = _best(ev.points(theta, search.theta0_grid(X @ theta)))
    grid.append(best)
    values = np.linspace(0.0, 1.0, search.theta_steps)
    for _ in range(search.max_sweeps):
        improved = False
        for i in range(d):
            cands = [c for c in (_shift_coordinate(best.theta, i, v) for v in values) if c is not None]
            results = _map(lambda th: ev.points(th, search.theta0_grid(X @ th)), cands, threads)
            for pts in results:
                grid.extend(pts)
                p = _best(pts)
                if p.loss < best.loss:
                    best = p
                    improved = True
        if not improved:
            break
    return best


def loss_on_grid(pop_pre, mode: DeploymentMode, ls: LossSpec, search: SearchSpec, params: AgentParams | None,
                 sort_descending: bool = False) -> list[GridPoint]:
    """Every raw 2-D grid point with its loss (no refinement)."""
    res = optimize_threshold(pop_pre, mode, ls, SearchSpec(search.theta_steps, search.theta0_min, search.theta0_max,
                                                           search.theta0_steps, refine=False), params,
                             sort_descending=sort_descending, keep_grid=True)
    return res.grid


@dataclass(frozen=True)
class Prop2Record:
    side: str
    lhs: float
    rhs: float
    lhs_se: float
    rhs_se: float
    holds: bool
    ordering_observed: bool


@dataclass(frozen=True)
class Prop2Report:
    records: tuple[Prop2Record, ...]
    loss_rational_nb: float  # rational agents, rational-optimal deployment
    loss_biased_nb: float  # biased agents, rational-optimal deployment
    loss_biased_b: float  # biased agents, bias-aware deployment
    counts: dict

    def side(self, name: str) -> Prop2Record:
        return next(r for r in self.records if r.side == name)


def _mean_se(z: np.ndarray) -> tuple[float, float]:
    n = z.size
    if n == 0:
        return 0.0, 0.0
    se = float(z.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(z.mean()), se


def prop2_condition_check(pop, nb_c: Classifier, b_c: Classifier, bias: WeightingFunction, B: float,
                          ls: LossSpec = LossSpec(), cost: CostModel | None = None,
                          sort_descending: bool = False) -> Prop2Report:
    """Empirical versions of the three loss-comparison conditions.

    Sides (a) and (b) weigh qualified against unqualified mass in ``S``:
    (a) ``u_plus * mass1(S) <= u_minus * mass0(S)`` predicts that biased
    responses lower the loss at the rational deployment, (b) the reverse
    predicts they raise it. Side (c) compares the per-agent loss mass of
    ``T1`` with that of ``T2`` and predicts
    ``L_rational(nb) <= L_biased(b) <= L_biased(nb)``.
    Masses are per-capita means with standard errors.
    """
    cost = Norm2() if cost is None else cost
    X, y = _as_xy(pop)
    params = AgentParams(B, cost)
    masks = set_masks(X, nb_c, b_c, bias, B, cost, "cost", sort_descending)
    y1 = (y == 1).astype(float)
    y0 = (y == 0).astype(float)
    per_agent = -ls.u_plus * y1 + ls.u_minus * y0

    l_nb = loss_under_response(Population(X, y), nb_c, Identity(), params, ls).mean
    l_wnb = loss_under_response(Population(X, y), nb_c, bias, params, ls, sort_descending).mean
    l_wb = loss_under_response(Population(X, y), b_c, bias, params, ls, sort_descending).mean

    s = masks["S"]
    q_mass, q_se = _mean_se(ls.u_plus * y1 * s)
    u_mass, u_se = _mean_se(ls.u_minus * y0 * s)
    t1, t1_se = _mean_se(per_agent * masks["T1"])
    t2, t2_se = _mean_se(per_agent * masks["T2"])
    recs = (
        Prop2Record("a", q_mass, u_mass, q_se, u_se, q_mass <= u_mass, l_wb <= l_wnb <= l_nb),
        Prop2Record("b", u_mass, q_mass, u_se, q_se, u_mass <= q_mass, max(l_nb, l_wb) <= l_wnb),
        Prop2Record("c", t1, t2, t1_se, t2_se, t1 <= t2, l_nb <= l_wb <= l_wnb),
    )
    counts = {k: int(np.count_nonzero(v)) for k, v in masks.items()}
    counts["S_label1"] = int(np.count_nonzero(s & (y == 1)))
    counts["S_label0"] = int(np.count_nonzero(s & (y == 0)))
    return Prop2Report(recs, l_nb, l_wnb, l_wb, counts)


class WelfareTag(str, enum.Enum):
    GREEN = "green"
    RED = "red"
    NEUTRAL = "neutral"


@dataclass(frozen=True, eq=False)
class WelfareReport:
    utility_rational_by_label: tuple[float, float]  # (label 0, label 1)
    utility_biased_by_label: tuple[float, float]
    delta: np.ndarray  # biased minus rational, per agent
    tags: np.ndarray
    counts: dict
    reward: float

    @property
    def total_utility_by_label(self) -> tuple[float, float]:
        return self.utility_biased_by_label


WELFARE_TOL = 1e-12


def agent_utility(accepted, cost, reward: float) -> np.ndarray:
    return reward * np.asarray(accepted, dtype=float) - np.asarray(cost, dtype=float)


def welfare(pop_pre, deployed: Classifier, bias: WeightingFunction, params: AgentParams,
            deployed_biased: Classifier | None = None, reward: float | None = None,
            sort_descending: bool = False) -> WelfareReport:
    """Per-agent utility ``r * accepted - cost``: rational vs biased.

    Rational agents face ``deployed``; biased agents face
    ``deployed_biased`` (defaults to the same classifier). With the default
    unbounded reward the utility needs a finite ``r``: pass ``reward`` or
    the budget is used, the most any agent is willing to spend.
    """
    X, y = _as_xy(pop_pre)
    if reward is None:
        reward = params.reward if math.isfinite(params.reward) else params.budget
    b_c = deployed if deployed_biased is None else deployed_biased
    rational = _batch(X, deployed, Identity(), params, sort_descending)
    biased = _batch(X, b_c, bias, params, sort_descending)
    u_r = agent_utility(rational[0], rational[1], reward)
    u_b = agent_utility(biased[0], biased[1], reward)
    delta = u_b - u_r
    tags = np.full(len(y), WelfareTag.NEUTRAL, dtype=object)
    tags[delta > WELFARE_TOL] = WelfareTag.GREEN
    tags[delta < -WELFARE_TOL] = WelfareTag.RED
    by = lambda u: (float(u[y == 0].sum()), float(u[y == 1].sum()))  # noqa: E731
    counts = {t: int(np.count_nonzero(tags == t)) for t in WelfareTag}
    return WelfareReport(by(u_r), by(u_b), delta, tags, counts, float(reward))


def _batch(X, c: Classifier, bias, params: AgentParams, sort_descending):
    if len(X) == 0:
        return np.zeros(0, dtype=bool), np.zeros(0)
    if isinstance(params.cost_model, PiecewiseLinear):
        outs = [respond(x, c, bias, params, sort_descending) for x in X]
        return np.array([o.accepted_true for o in outs]), np.array([o.cost_incurred for o in outs])
    w = perceived_classifier(c, bias, sort_descending).theta
    r = respond_batch(X, c, w, params)
    return r.accepted_true, r.cost


def minimum_crossing_cost(X, c: Classifier, cost: CostModel) -> np.ndarray:
    """Cheapest budget-unit cost for each row to reach acceptance (0 if accepted)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    gap = np.maximum(c.theta0 - X @ c.theta, 0.0)
    if cost.analytic:
        return np.asarray(cost.crossing(c.theta).cost(gap), dtype=float).reshape(len(X))
    raise TypeError("social burden needs an analytic cost family")


def social_burden(pop_qualified, c: Classifier, cost: CostModel | None = None) -> float:
    """Mean minimum cost to acceptance over label-1 agents."""
    cost = Norm2() if cost is None else cost
    if isinstance(pop_qualified, Population):
        X = pop_qualified.X[pop_qualified.y == 1]
    else:
        X = np.asarray(pop_qualified, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
    if len(X) == 0:
        return 0.0
    return float(minimum_crossing_cost(X, c, cost).mean())


# one-dimensional warm-up: h(x) = 1(x >= tau), agents perceive the threshold as p(tau)


def perceived_threshold(tau: float, bias: WeightingFunction) -> float:
    return float(bias(min(max(tau, 0.0), 1.0)))


def respond_1d(x, tau: float, bias: WeightingFunction | None, budget: float = math.inf) -> np.ndarray:
    """Agents below the perceived threshold who can afford it move up to it.

    ``bias=None`` leaves features unchanged.
    """
    x = np.asarray(x, dtype=float)
    if bias is None:
        return x.copy()
    target = perceived_threshold(tau, bias)
    gap = target - x
    move = (gap > 0) & (gap <= budget * (1.0 + 1e-12) + 1e-15)
    return np.where(move, target, x)


def loss_1d(x, y, tau: float, bias: WeightingFunction | None, ls: LossSpec = LossSpec(),
            budget: float = math.inf) -> float:
    post = respond_1d(x, tau, bias, budget)
    return loss_from_acceptance(post >= tau, y, ls).mean


def optimize_threshold_1d(x, y, bias: WeightingFunction | None, ls: LossSpec = LossSpec(), taus=None,
                          budget: float = math.inf) -> tuple[float, float]:
    """Grid minimizer over ``tau`` in [0, 1]; ties go to the smallest ``tau``."""
    taus = np.linspace(0.0, 1.0, 1001) if taus is None else np.asarray(taus, dtype=float)
    if taus.size == 0:
        raise ValueError("empty threshold grid")
    best_tau, best = None, math.inf
    for t in taus:
        val = loss_1d(x, y, float(t), bias, ls, budget)
        if val < best:
            best_tau, best = float(t), val
    return best_tau, best
