import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratasim.analysis import Region, classify_region
from stratasim.bias import Identity, Prelec
from stratasim.costs import Norm2, QuadraticDiagonal, WeightedManhattan
from stratasim.firm import (
    DeploymentMode,
    LossSpec,
    ModeKind,
    SearchSpec,
    WelfareTag,
    empirical_loss,
    loss_1d,
    loss_from_acceptance,
    loss_on_grid,
    loss_under_response,
    optimize_threshold,
    optimize_threshold_1d,
    prop2_condition_check,
    respond_1d,
    social_burden,
    welfare,
)
from stratasim.model import Classifier
from stratasim.population import GaussianScenario, Population, sample_gaussian
from stratasim.response import AgentParams, respond_population

SMALL = SearchSpec(theta_steps=31, theta0_steps=41)


def _pop(seed=0, n=300):
    s = GaussianScenario((3.0, 5.0), (2.0, 3.0), 0.5 * np.eye(2), ((1.0, 0.5), (0.5, 1.0)), n, n, 1.0, seed)
    return sample_gaussian(s)


def test_loss_examples():
    assert loss_from_acceptance([1, 1, 1, 0], [1, 1, 0, 0], LossSpec()).total == -1.0
    assert loss_from_acceptance([0, 0], [1, 0], LossSpec()).total == 0.0
    lv = loss_from_acceptance([1, 1, 0], [1, 1, 0], LossSpec(u_plus=2.0))
    assert (lv.total, lv.tp, lv.fp) == (-4.0, 2, 0)
    assert lv.mean == pytest.approx(-4.0 / 3)
    with pytest.raises(ValueError):
        LossSpec(u_plus=0.0)


def test_empirical_loss(c64):
    pop = Population(np.array([[2.0, 2.0], [0.0, 0.0], [1.0, 1.0]]), [1, 1, 0])
    assert empirical_loss(pop, c64).total == 0.0
    assert empirical_loss(Population(np.zeros((0, 2)), np.zeros(0)), c64).total == 0.0


def test_loss_under_response_trivial_cases(c64):
    pop = Population(np.array([[2.0, 2.0], [3.0, 1.5]]), [1, 0])
    params = AgentParams(1.0)
    assert loss_under_response(pop, c64, Identity(), params).total == empirical_loss(pop, c64).total
    assert loss_under_response(pop, c64, None, params).total == 0.0


def test_single_agent_traces(c64):
    params = AgentParams(1.0)
    bias = Prelec(0.5)
    # qualified agent that undershoots
    x3 = np.array([[0.2, 0.9]])
    assert classify_region(x3[0], c64, bias, Norm2(), 1.0) == Region.R3_UNDERSHOOT
    pop = Population(x3, [1])
    assert loss_under_response(pop, c64, bias, params).total == 0.0
    assert loss_under_response(pop, c64, Identity(), params).total == -1.0
    # unqualified agent with needless effort is accepted either way
    pop5 = Population(np.array([[2.2, -0.2]]), [0])
    assert loss_under_response(pop5, c64, bias, params).total == 1.0
    assert loss_under_response(pop5, c64, Identity(), params).total == 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["norm2", "quad", "manhattan"]), st.floats(0.1, 3.0),
       st.floats(0.3, 1.0))
def test_fast_scoring_matches_moving_points(seed, kind, B, gamma):
    pop = _pop(seed, 200)
    m = {"norm2": Norm2(), "quad": QuadraticDiagonal((1.0, 2.5)), "manhattan": WeightedManhattan((1.5, 1.0))}[kind]
    c = Classifier(np.array([0.4, 0.6]), 3.4)
    params = AgentParams(B, m)
    outs = respond_population(pop, c, Prelec(gamma), params)
    acc = np.array([o.accepted_true for o in outs])
    assert loss_under_response(pop, c, Prelec(gamma), params) == loss_from_acceptance(acc, pop.y, LossSpec())


def test_separable_population_reaches_perfect_loss():
    X = np.vstack([np.full((40, 2), 5.0), np.zeros((60, 2))]) + np.random.default_rng(0).uniform(0, 1, (100, 2))
    pop = Population(X, np.r_[np.ones(40), np.zeros(60)])
    res = optimize_threshold(pop, DeploymentMode.oblivious(), LossSpec(u_plus=2.0), SMALL)
    assert res.loss.total == -2.0 * 40
    grid = loss_on_grid(pop, DeploymentMode.oblivious(), LossSpec(u_plus=2.0), SMALL, None)
    assert min(p.loss for p in grid) == res.loss.mean


def test_optimizer_returns_grid_minimum_without_refinement():
    pop = _pop(1)
    params = AgentParams(0.5)
    search = SearchSpec(theta_steps=21, theta0_steps=31, refine=False)
    mode = DeploymentMode.aware_biased(Prelec(0.5))
    res = optimize_threshold(pop, mode, LossSpec(), search, params, keep_grid=True)
    best = min(p.loss for p in res.grid)
    assert res.loss.mean == best
    ties = [p for p in res.grid if p.loss == best]
    assert res.classifier.theta0 == min(p.theta0 for p in ties)


def test_refinement_never_worsens():
    pop = _pop(2)
    params = AgentParams(0.5)
    mode = DeploymentMode.aware_rational()
    coarse = optimize_threshold(pop, mode, LossSpec(), SearchSpec(21, theta0_steps=31, refine=False), params)
    fine = optimize_threshold(pop, mode, LossSpec(), SearchSpec(21, theta0_steps=31, refine=True), params)
    assert fine.loss.mean <= coarse.loss.mean


def test_zero_budget_collapses_modes():
    pop = _pop(3)
    params = AgentParams(0.0)
    results = [
        optimize_threshold(pop, mode, LossSpec(), SMALL, params).classifier
        for mode in (DeploymentMode.oblivious(), DeploymentMode.aware_rational(),
                     DeploymentMode.aware_biased(Prelec(0.5)))
    ]
    assert results[0] == results[1] == results[2]


def test_biased_optimum_beats_rational_deployment_under_bias():
    pop = _pop(4)
    params = AgentParams(0.6)
    bias = Prelec(0.5)
    nb = optimize_threshold(pop, DeploymentMode.aware_rational(), LossSpec(), SMALL, params).classifier
    b = optimize_threshold(pop, DeploymentMode.aware_biased(bias), LossSpec(), SMALL, params, extra_candidates=[nb])
    assert b.loss.mean <= loss_under_response(pop, nb, bias, params).mean


def test_optimizer_three_features():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(2.0, 1.0, (200, 3)), rng.normal(0.0, 1.0, (200, 3))])
    X[:, 2] = rng.normal(0.0, 1.0, 400)  # an uninformative feature
    pop = Population(X, np.r_[np.ones(200), np.zeros(200)])
    res = optimize_threshold(pop, DeploymentMode.oblivious(), LossSpec(), SearchSpec(11, theta0_steps=41))
    start = Classifier(np.full(3, 1 / 3), 1.0)
    assert res.loss.mean <= empirical_loss(pop, start).mean
    assert res.classifier.theta[2] < max(res.classifier.theta[:2])


def test_optimizer_is_thread_count_invariant(monkeypatch):
    pop = _pop(5)
    params = AgentParams(0.5)
    mode = DeploymentMode.aware_biased(Prelec(0.5))
    monkeypatch.setenv("STRATASIM_THREADS", "1")
    one = optimize_threshold(pop, mode, LossSpec(), SMALL, params)
    monkeypatch.setenv("STRATASIM_THREADS", "4")
    four = optimize_threshold(pop, mode, LossSpec(), SMALL, params)
    assert one.classifier == four.classifier
    monkeypatch.setenv("STRATASIM_THREADS", "many")
    with pytest.raises(ValueError):
        optimize_threshold(pop, mode, LossSpec(), SMALL, params)


def test_optimizer_input_validation():
    with pytest.raises(ValueError):
        optimize_threshold(Population(np.zeros((0, 2)), np.zeros(0)), DeploymentMode.oblivious())
    with pytest.raises(ValueError):
        optimize_threshold(_pop(), DeploymentMode.aware_rational())
    with pytest.raises(ValueError):
        SearchSpec(theta0_min=0.0)
    with pytest.raises(ValueError):
        DeploymentMode.parse("aware_biased")
    assert DeploymentMode.parse("oblivious").kind is ModeKind.OBLIVIOUS


def test_prop2_identity_collapses():
    pop = _pop(6)
    c = Classifier(np.array([0.4, 0.6]), 3.4)
    rep = prop2_condition_check(pop, c, c, Identity(), 0.5)
    assert rep.counts["S"] == 0
    a = rep.side("a")
    assert a.lhs == a.rhs == 0.0 and a.holds
    assert rep.loss_rational_nb == rep.loss_biased_nb == rep.loss_biased_b


def test_prop2_loss_gap_decomposes_over_S():
    pop = _pop(7, 2000)
    c = Classifier(np.array([0.4, 0.6]), 3.4)
    rep = prop2_condition_check(pop, c, c, Prelec(0.5), 0.5)
    a = rep.side("a")
    # everything outside S is accepted identically in both responses
    assert rep.loss_rational_nb - rep.loss_biased_nb == pytest.approx(a.rhs - a.lhs, abs=1e-12)


def test_welfare_identity_is_neutral(c64):
    pop = _pop(8)
    rep = welfare(pop, Classifier(np.array([0.4, 0.6]), 3.4), Identity(), AgentParams(0.5))
    assert (rep.delta == 0).all()
    assert rep.counts[WelfareTag.NEUTRAL] == len(pop)


def test_welfare_single_agent_traces(c64):
    bias = Prelec(0.5)
    params = AgentParams(1.0)
    x2 = np.array([-1.5, 2.2])
    assert classify_region(x2, c64, bias, Norm2(), 1.0) == Region.R2_FUTILE_EFFORT
    rep = welfare(Population(x2[None, :], [1]), c64, bias, params)
    assert rep.tags[0] == WelfareTag.RED
    w = np.array([0.489328781146207, 0.510671218853793])
    spent = (1.0 - x2 @ w) / np.linalg.norm(w)
    assert rep.delta[0] == pytest.approx(-spent, abs=1e-12)
    # accepted for free under the biased deployment, pays to cross under the rational one
    lower = Classifier(c64.theta, 0.8)
    x = np.array([[0.9, 0.9]])
    rep = welfare(Population(x, [1]), c64, bias, params, deployed_biased=lower)
    assert rep.tags[0] == WelfareTag.GREEN
    assert rep.delta[0] == pytest.approx(0.1 / np.linalg.norm(c64.theta), abs=1e-12)
    assert rep.reward == 1.0


def test_social_burden():
    c1 = Classifier(np.array([1.0]), 5.0)
    assert social_burden(Population(np.array([[6.0], [7.0]]), [1, 1]), c1) == 0.0
    assert social_burden(np.array([4.0]), c1) == pytest.approx(1.0)
    x = np.random.default_rng(0).uniform(0, 1, 500)
    burdens = [social_burden(x, Classifier(np.array([1.0]), t)) for t in np.linspace(0, 1.2, 61)]
    assert all(b1 >= b0 for b0, b1 in zip(burdens, burdens[1:]))


def test_respond_1d():
    x = np.array([0.1, 0.5, 0.7])
    post = respond_1d(x, 0.7, Prelec(0.5))
    p = math.exp(-math.sqrt(-math.log(0.7)))
    assert post == pytest.approx([p, p, 0.7])
    assert np.array_equal(respond_1d(x, 0.7, None), x)
    assert np.array_equal(respond_1d(x, 0.7, Prelec(0.5), budget=0.1), [0.1, p, 0.7])


def test_one_dimensional_biased_optimum_is_non_strategic():
    rng = np.random.default_rng(0)
    x = np.r_[rng.beta(6, 3, 500), rng.beta(3, 5, 500)]
    y = np.r_[np.ones(500), np.zeros(500)]
    tau_ns, _ = optimize_threshold_1d(x, y, None)
    tau_b, _ = optimize_threshold_1d(x, y, Prelec(0.5), budget=0.1)
    # rational agents within reach cross any threshold, so the firm raises it
    tau_nb, _ = optimize_threshold_1d(x, y, Identity(), budget=0.1)
    assert tau_ns > math.exp(-1)  # perceived threshold lies below the true one
    assert abs(tau_b - tau_ns) <= 1e-3 + 1e-12
    assert tau_nb > tau_ns
    assert loss_1d(x, y, tau_b, Prelec(0.5), budget=0.1) == loss_1d(x, y, tau_b, None)
