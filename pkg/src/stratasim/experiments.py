"""End-to-end experiment drivers used by the CLI and the acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bias import Identity, Prelec, perceived_weights
from .costs import CostModel, Norm2, PiecewiseLinear, parse_cost
from .firm import (
    DeploymentMode,
    LossSpec,
    Prop2Report,
    SearchSpec,
    loss_under_response,
    optimize_threshold,
    prop2_condition_check,
)
from .model import Classifier
from .population import GaussianScenario, Population, sample_gaussian
from .response import AgentParams, exhaustive_piecewise, greedy_allocation, perceived_classifier, respond_batch

# two Gaussian components per scenario, features multiplied by the scale afterwards
EXAMPLE1_SCENARIOS = {
    1: dict(mu1=(2.0, 4.0), mu0=(2.0, 3.0), sigma1=((0.5, 0.0), (0.0, 0.5)), sigma0=((1.0, 0.5), (0.5, 1.0))),
    2: dict(mu1=(3.0, 5.0), mu0=(2.0, 3.0), sigma1=((0.5, 0.0), (0.0, 0.5)), sigma0=((1.0, 0.5), (0.5, 1.0))),
    3: dict(mu1=(4.0, 4.0), mu0=(2.0, 3.0), sigma1=((1.0, 0.0), (0.0, 1.0)), sigma0=((3.0, 0.0), (0.0, 1.0))),
}


def example1_population(k: int, seed: int = 0, n_per_label: int = 10_000, scale: float = 10.0) -> Population:
    """Scenario ``k`` drawn from its own child of ``SeedSequence(seed)``."""
    child = np.random.SeedSequence(seed).spawn(3)[k - 1]
    sub_seed = int(child.generate_state(1, dtype=np.uint64)[0])
    scen = GaussianScenario(**EXAMPLE1_SCENARIOS[k], n1=n_per_label, n0=n_per_label, scale=scale, seed=sub_seed)
    pop = sample_gaussian(scen)
    pop.meta.update({"scenario": k, "run_seed": seed})
    return pop


@dataclass
class DeploymentLoss:
    deployment: str  # which classifier is deployed
    response: str  # how agents respond: none, rational, biased
    classifier: Classifier
    loss: float
    tp: int
    fp: int


@dataclass
class ScenarioResult:
    scenario: int
    population: Population
    budget: float
    losses: list[DeploymentLoss]
    prop2: Prop2Report
    nb: Classifier
    b: Classifier

    def loss(self, deployment: str, response: str) -> float:
        return next(l.loss for l in self.losses if l.deployment == deployment and l.response == response)


@dataclass
class Example1Result:
    seed: int
    gamma: float
    scenarios: dict[int, ScenarioResult] = field(default_factory=dict)

    def checks(self) -> dict[str, bool]:
        s1, s2, s3 = (self.scenarios[k] for k in (1, 2, 3))
        l_nb = s3.loss("nb", "rational")
        l_b = s3.loss("b", "biased")
        l_wnb = s3.loss("nb", "biased")
        return {
            "scenario1_biased_worse": s1.loss("nb", "biased") > s1.loss("nb", "rational"),
            "scenario2_biased_better": s2.loss("nb", "biased") < s2.loss("nb", "rational"),
            "scenario3_ordering": l_nb <= l_b <= l_wnb,
        }


def _record(name, resp, pop, c, bias, params, ls) -> DeploymentLoss:
    lv = loss_under_response(pop, c, bias, params, ls)
    return DeploymentLoss(name, resp, c, lv.mean, lv.tp, lv.fp)


def run_example1(seed: int = 0, n_per_label: int = 10_000, scale: float = 10.0, gamma: float = 0.5,
                 budget_12: float = 5.0, budget_3: float = 10.0, oblivious_fit: str = "scenario2",
                 search: SearchSpec = SearchSpec(), ls: LossSpec = LossSpec(), cost: CostModel | None = None,
                 scenarios=(1, 2, 3)) -> Example1Result:
    """Oblivious comparisons in scenarios 1-2, aware deployments in scenario 3.

    Scenarios 1 and 2 share one fixed classifier: the non-strategic loss
    minimizer of scenario 2 (``oblivious_fit="scenario2"``), or each
    scenario's own minimizer (``"own"``).
    """
    cost = Norm2() if cost is None else cost
    bias = Prelec(gamma)
    pops = {k: example1_population(k, seed, n_per_label, scale) for k in (1, 2, 3)}
    res = Example1Result(seed, gamma)
    shared = None
    if oblivious_fit == "scenario2" and ({1, 2} & set(scenarios)):
        shared = optimize_threshold(pops[2], DeploymentMode.oblivious(), ls, search).classifier
    for k in scenarios:
        pop = pops[k]
        if k in (1, 2):
            B = budget_12
            params = AgentParams(B, cost)
            c = shared if shared is not None else optimize_threshold(pop, DeploymentMode.oblivious(), ls, search).classifier
            losses = [
                _record("nb", "none", pop, c, None, params, ls),
                _record("nb", "rational", pop, c, Identity(), params, ls),
                _record("nb", "biased", pop, c, bias, params, ls),
            ]
            res.scenarios[k] = ScenarioResult(k, pop, B, losses, prop2_condition_check(pop, c, c, bias, B, ls, cost), c, c)
        else:
            B = budget_3
            params = AgentParams(B, cost)
            nb = optimize_threshold(pop, DeploymentMode.aware_rational(), ls, search, params).classifier
            b = optimize_threshold(pop, DeploymentMode.aware_biased(bias), ls, search, params,
                                   extra_candidates=[nb]).classifier
            losses = [
                _record("nb", "rational", pop, nb, Identity(), params, ls),
                _record("nb", "biased", pop, nb, bias, params, ls),
                _record("b", "biased", pop, b, bias, params, ls),
                _record("b", "rational", pop, b, Identity(), params, ls),
            ]
            res.scenarios[k] = ScenarioResult(k, pop, B, losses, prop2_condition_check(pop, nb, b, bias, B, ls, cost), nb, b)
    return res


def scenario_panels(sr: ScenarioResult, gamma: float, cost: CostModel | None = None):
    """Pre-response, rational and biased post-response points for one scenario."""
    cost = Norm2() if cost is None else cost
    params = AgentParams(sr.budget, cost)
    X = sr.population.X
    rational = respond_batch(X, sr.nb, sr.nb.theta, params).x_post
    w_b = perceived_classifier(sr.b, Prelec(gamma)).theta
    biased = respond_batch(X, sr.b, w_b, params).x_post
    return [("pre", X, sr.nb), ("rational", rational, sr.nb), ("biased", biased, sr.b)]


@dataclass
class StudyScenario:
    name: str
    weights: tuple
    x0: tuple
    theta0: float | None = None


@dataclass
class StudyRow:
    scenario: str
    allocation: np.ndarray
    objective: float
    oracle_objective: float
    oracle_allocations: list
    biased_allocation: np.ndarray
    biased_objective: float
    max_hours_optimal: float  # largest per-feature hours among all optimal allocations


def study_scenarios(cfg=None) -> list[StudyScenario]:
    from .config import StudyConfig

    cfg = StudyConfig() if cfg is None else cfg
    return [
        StudyScenario("2_unbalanced", cfg.weights_2u, cfg.x0_2, cfg.theta0_2),
        StudyScenario("2_balanced", cfg.weights_2b, cfg.x0_2, cfg.theta0_2),
        StudyScenario("4_unbalanced", cfg.weights_4u, cfg.x0_4),
        StudyScenario("4_balanced", cfg.weights_4b, cfg.x0_4),
    ]


def _objective(theta, x0, alloc, cost: PiecewiseLinear) -> float:
    from .costs import points_for_hours

    pts = np.array([points_for_hours(float(h), cost.tiers_for(i)) for i, h in enumerate(alloc)])
    return float(np.asarray(theta) @ (np.asarray(x0, dtype=float) + pts))


def solve_study(s: StudyScenario, hours: float = 10.0, gamma: float = 0.5,
                cost: PiecewiseLinear | None = None) -> StudyRow:
    cost = PiecewiseLinear() if cost is None else cost
    theta = Classifier.from_weights(s.weights, 0.0 if s.theta0 is None else s.theta0)
    alloc = greedy_allocation(theta.theta, cost, hours)
    best, best_score = exhaustive_piecewise(s.x0, theta, cost, int(hours))
    w = perceived_weights(theta.theta, Prelec(gamma)).w
    b_alloc = greedy_allocation(w, cost, hours)
    return StudyRow(
        scenario=s.name,
        allocation=alloc,
        objective=_objective(theta.theta, s.x0, alloc, cost),
        oracle_objective=best_score,
        oracle_allocations=best,
        biased_allocation=b_alloc,
        biased_objective=_objective(theta.theta, s.x0, b_alloc, cost),
        max_hours_optimal=float(max(max(a) for a in best)),
    )


def gamma_scan(weights, hours: float = 10.0, gammas=None, cost: PiecewiseLinear | None = None):
    """``(gamma, biased allocation, differs from rational)`` over a grid of gammas."""
    cost = PiecewiseLinear() if cost is None else cost
    theta = Classifier.from_weights(weights, 0.0).theta
    rational = greedy_allocation(theta, cost, hours)
    gammas = np.round(np.arange(0.30, 1.0 + 1e-9, 0.01), 10) if gammas is None else gammas
    rows = []
    for g in gammas:
        alloc = greedy_allocation(perceived_weights(theta, Prelec(float(g))).w, cost, hours)
        rows.append((float(g), alloc, not np.array_equal(alloc, rational)))
    return rows


def scan_crossover(rows) -> float | None:
    """Smallest gamma from which the biased split matches the rational one for good."""
    out = None
    for g, _, differs in reversed(rows):
        if differs:
            break
        out = g
    return out
