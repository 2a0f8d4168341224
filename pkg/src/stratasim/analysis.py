"""Where biased and rational responses disagree, and why.

Band membership is always judged with the cost family in force: an agent
is in the band of ``(v, theta0)`` when it sits strictly below ``v.x =
theta0`` and the cheapest crossing fits the budget.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .bias import Identity, Prelec, WeightingFunction, sigma
from .costs import CostModel, Norm2, within_budget
from .model import Classifier, signed_distance
from .response import AgentParams, boundary_tol, perceived_classifier, respond, respond_batch

EQUAL_TOL = 1e-9


class Region(str, enum.Enum):
    ACCEPTED = "accepted"
    UNREACHABLE = "unreachable"
    R1_BELIEVE_ACCEPTED = "r1_believe_accepted"
    R2_FUTILE_EFFORT = "r2_futile_effort"
    R3_UNDERSHOOT = "r3_undershoot"
    R4_OVERSHOOT = "r4_overshoot"
    R5_NEEDLESS_EFFORT = "r5_needless_effort"
    R6_BELIEVE_UNREACHABLE = "r6_believe_unreachable"
    AGREE_ACT = "agree_act"

    def __str__(self):
        return self.value


DISCREPANT = frozenset(
    {
        Region.R1_BELIEVE_ACCEPTED,
        Region.R2_FUTILE_EFFORT,
        Region.R3_UNDERSHOOT,
        Region.R4_OVERSHOOT,
        Region.R5_NEEDLESS_EFFORT,
        Region.R6_BELIEVE_UNREACHABLE,
    }
)


def _require_analytic(cost: CostModel) -> None:
    if not cost.analytic:
        raise TypeError(f"{type(cost).__name__} has no band geometry; use an analytic cost family")


def band_masks(X, weights, theta0: float, cost: CostModel, B: float):
    """``(accepted, in_band, unreachable)`` boolean arrays for rows of ``X``."""
    _require_analytic(cost)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    w = np.asarray(weights, dtype=float)
    gap = theta0 - X @ w
    accepted = gap <= 0
    spend = cost.crossing(w).cost(np.maximum(gap, 0.0))
    band = ~accepted & within_budget(spend, B)
    return accepted, band, ~accepted & ~band


def classify_regions(X, true_c: Classifier, bias: WeightingFunction, cost: CostModel, B: float,
                     sort_descending: bool = False) -> np.ndarray:
    """Region tag for every row of ``X`` (object array of :class:`Region`)."""
    _require_analytic(cost)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    w = perceived_classifier(true_c, bias, sort_descending).theta
    t_acc, t_band, t_out = band_masks(X, true_c.theta, true_c.theta0, cost, B)
    p_acc, p_band, p_out = band_masks(X, w, true_c.theta0, cost, B)
    params = AgentParams(B, cost)
    biased = respond_batch(X, true_c, w, params)
    rational = respond_batch(X, true_c, true_c.theta, params)

    out = np.empty(len(X), dtype=object)
    out[:] = Region.UNREACHABLE
    out[t_acc & ~p_band] = Region.ACCEPTED
    out[t_out & ~p_band] = Region.UNREACHABLE
    out[t_band & p_acc] = Region.R1_BELIEVE_ACCEPTED
    out[t_band & p_out] = Region.R6_BELIEVE_UNREACHABLE
    out[p_band & t_out] = Region.R2_FUTILE_EFFORT
    out[p_band & t_acc] = Region.R5_NEEDLESS_EFFORT
    both = t_band & p_band
    under = both & ~biased.accepted_true
    over = both & biased.accepted_true & (biased.cost > rational.cost + EQUAL_TOL)
    out[both] = Region.AGREE_ACT
    out[under] = Region.R3_UNDERSHOOT
    out[over] = Region.R4_OVERSHOOT
    return out


def classify_region(x0, true_c: Classifier, bias: WeightingFunction, cost: CostModel, B: float,
                    sort_descending: bool = False) -> Region:
    return classify_regions(np.asarray(x0, dtype=float)[None, :], true_c, bias, cost, B, sort_descending)[0]


def region_counts(tags) -> dict[Region, int]:
    counts = {r: 0 for r in Region}
    for t in tags:
        counts[Region(t)] += 1
    return counts


def in_H(x0, theta, theta0: float, w, tol: float | None = None):
    """``(1 - sigma) theta0 <= (theta - sigma w).x`` for one point or rows.

    The left-minus-right difference equals the deployed score gap left after
    a projection onto the perceived boundary, so the same slack as response
    acceptance applies (``tol`` defaults to the boundary tolerance).
    """
    theta = np.asarray(theta, dtype=float)
    w = np.asarray(w, dtype=float)
    s = sigma(theta, w)
    lhs = (1.0 - s) * theta0
    rhs = np.asarray(x0, dtype=float) @ (theta - s * w)
    tol = boundary_tol(theta0) if tol is None else tol
    out = lhs <= rhs + tol
    return bool(out) if np.ndim(out) == 0 else out


def crosses_after_move(X, theta, theta0: float, w, cost: CostModel):
    """Whether moving onto the perceived boundary lands in the true acceptance region.

    Under Euclidean costs this is :func:`in_H`; other families move along
    their own cheapest direction, so the deployed score gained per unit of
    perceived gap is ``theta . step`` instead of ``sigma``.
    """
    if isinstance(cost, Norm2):
        return in_H(X, theta, theta0, w)
    _require_analytic(cost)
    X = np.asarray(X, dtype=float)
    theta = np.asarray(theta, dtype=float)
    step = cost.crossing(w).step
    post = X @ theta + (theta0 - X @ np.asarray(w, dtype=float)) * float(theta @ step)
    out = post >= theta0 - boundary_tol(theta0)
    return bool(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SetMembership:
    in_A: bool
    in_H: bool
    in_S: bool
    in_T1: bool
    in_T2: bool


def _score_band(X, weights, theta0, B):
    s = X @ np.asarray(weights, dtype=float)
    return (theta0 - B <= s) & (s < theta0)


def set_masks(X, nb_c: Classifier, b_c: Classifier, bias: WeightingFunction, B: float,
              cost: CostModel | None = None, band: str = "cost", sort_descending: bool = False) -> dict:
    """Vectorized membership in ``A, H, S, T1, T2`` for rows of ``X``.

    ``band="cost"`` builds ``A`` from the cost family's affordability band
    (what the responses actually do); ``band="score"`` uses the raw score
    window ``theta0 - B <= theta.x < theta0``.
    ``S`` excludes from ``A`` the agents that cross despite the bias,
    i.e. those also in the perceived band and in ``H``. ``H`` follows the
    cost family's crossing direction (see :func:`crosses_after_move`).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cost = Norm2() if cost is None else cost
    if band not in ("cost", "score"):
        raise ValueError("band must be 'cost' or 'score'")

    def A(weights, theta0):
        if band == "score":
            return _score_band(X, weights, theta0, B)
        return band_masks(X, weights, theta0, cost, B)[1]

    w_nb = perceived_classifier(nb_c, bias, sort_descending).theta
    w_b = perceived_classifier(b_c, bias, sort_descending).theta
    a_nb = A(nb_c.theta, nb_c.theta0)
    h_nb = crosses_after_move(X, nb_c.theta, nb_c.theta0, w_nb, cost)
    s = a_nb & ~(A(w_nb, nb_c.theta0) & h_nb)
    y_nb = X @ nb_c.theta >= nb_c.theta0
    y_b = X @ b_c.theta >= b_c.theta0
    t1 = (y_nb | a_nb) & ~y_b
    t2 = (crosses_after_move(X, b_c.theta, b_c.theta0, w_b, cost) & A(w_b, b_c.theta0)) | ((y_b & ~y_nb) & ~a_nb)
    return {"A": a_nb, "H": h_nb, "S": s, "T1": t1, "T2": t2}


def set_memberships(x0, nb_c: Classifier, b_c: Classifier, bias: WeightingFunction, B: float,
                    cost: CostModel | None = None, band: str = "cost") -> SetMembership:
    m = set_masks(np.asarray(x0, dtype=float)[None, :], nb_c, b_c, bias, B, cost, band)
    return SetMembership(*(bool(m[k][0]) for k in ("A", "H", "S", "T1", "T2")))


def xi(x, theta: float, w_theta: float, theta0: float):
    """Sign function separating joint over- from joint under-investment in 2-D.

    ``theta`` and ``w_theta`` are first-feature weights; the second feature
    gets the complement.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ValueError("xi is defined for two features only")
    tt = theta**2 + (1.0 - theta) ** 2
    ww = w_theta**2 + (1.0 - w_theta) ** 2
    a1 = theta / tt - w_theta / ww
    a2 = (1.0 - theta) / tt - (1.0 - w_theta) / ww
    c = (1.0 / tt - 1.0 / ww) * theta0
    out = a1 * x[..., 0] + a2 * x[..., 1] - c
    return float(out) if np.ndim(out) == 0 else out


class Verdict(str, enum.Enum):
    UNDER = "under"
    OVER = "over"
    EQUAL = "equal"


@dataclass(frozen=True)
class FeatureInvestment:
    delta_rational: float
    delta_biased: float
    verdict: Verdict


@dataclass(frozen=True)
class InvestmentReport:
    features: tuple[FeatureInvestment, ...]
    d_true: float
    d_perceived: float
    premise_under: tuple[bool, ...]  # closer perceived boundary and w_i < theta_i
    premise_over: tuple[bool, ...]  # farther perceived boundary and w_i > theta_i
    premise_prelec_max: bool | None  # None unless the bias is Prelec with gamma < 1
    max_feature: int


def prelec_max_premise(d_true: float, d_perceived: float, theta, w, gamma: float) -> bool:
    """Distance-ratio premise for over-investment in the top-weighted feature."""
    k = int(np.argmax(theta))
    factor = 1.0 / Prelec(gamma).max_ratio_bound()
    return bool(d_true <= factor * d_perceived and w[k] < theta[k])


def investment_report(x0, true_c: Classifier, bias: WeightingFunction, cost: CostModel, B: float,
                      sort_descending: bool = False) -> InvestmentReport:
    """Per-feature comparison of rational and biased moves with premise flags."""
    _require_analytic(cost)
    x0 = np.asarray(x0, dtype=float)
    params = AgentParams(B, cost)
    rat = respond(x0, true_c, Identity(), params)
    bia = respond(x0, true_c, bias, params, sort_descending)
    w = perceived_classifier(true_c, bias, sort_descending).theta
    theta = true_c.theta
    d_t = signed_distance(x0, theta, true_c.theta0)
    d_p = signed_distance(x0, w, true_c.theta0)
    feats = []
    for dn, db in zip(rat.delta, bia.delta):
        if db < dn - EQUAL_TOL:
            v = Verdict.UNDER
        elif db > dn + EQUAL_TOL:
            v = Verdict.OVER
        else:
            v = Verdict.EQUAL
        feats.append(FeatureInvestment(float(dn), float(db), v))
    prem3 = None
    if isinstance(bias, Prelec) and bias.gamma < 1.0:
        prem3 = prelec_max_premise(d_t, d_p, theta, w, bias.gamma)
    return InvestmentReport(
        features=tuple(feats),
        d_true=d_t,
        d_perceived=d_p,
        premise_under=tuple(bool(d_p <= d_t and wi < ti) for wi, ti in zip(w, theta)),
        premise_over=tuple(bool(d_t <= d_p and ti < wi) for wi, ti in zip(w, theta)),
        premise_prelec_max=prem3,
        max_feature=int(np.argmax(theta)),
    )


def investment_deltas(X, true_c: Classifier, w, cost: CostModel, B: float):
    """Rational and biased displacement arrays for rows of ``X``."""
    params = AgentParams(B, cost)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    rat = respond_batch(X, true_c, true_c.theta, params)
    bia = respond_batch(X, true_c, w, params)
    return rat.x_post - X, bia.x_post - X
