import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stratasim.model import Classifier, classify, score, signed_distance

from conftest import classifiers


def test_score_examples(c64):
    assert score([0.0, 0.0], c64) == 0.0
    assert score([0.5, 0.5], c64) == pytest.approx(0.5)
    assert score([100.0, 100.0], Classifier(np.array([0.78, 0.22]), 0.0)) == pytest.approx(100.0)
    assert score(np.zeros((3, 2)), c64).shape == (3,)


def test_classify_examples(c64):
    assert classify([1.0, 1.0], c64) == 1  # score exactly theta0
    assert classify([0.5, 0.5], c64) == 0
    assert classify([2.2, -0.2], c64) == 1


def test_signed_distance_examples(c64):
    assert signed_distance([1.0, 1.0], c64.theta, 1.0) == 0.0
    assert signed_distance([0.5, 0.5], c64.theta, 1.0) == pytest.approx(0.5 / math.sqrt(0.52), abs=1e-12)
    assert signed_distance([2.2, -0.2], c64.theta, 1.0) == pytest.approx(-0.24 / math.sqrt(0.52), abs=1e-12)


def test_classifier_validation():
    with pytest.raises(ValueError):
        Classifier(np.array([0.5, 0.6]), 1.0)
    with pytest.raises(ValueError):
        Classifier(np.array([1.5, -0.5]), 1.0)
    with pytest.raises(ValueError):
        Classifier(np.array([0.5, 0.5]), float("nan"))
    with pytest.raises(ValueError):
        score([1.0, 2.0, 3.0], Classifier(np.array([0.5, 0.5]), 0.0))


def test_theta_is_read_only(c64):
    with pytest.raises(ValueError):
        c64.theta[0] = 0.9


def test_from_weights_rescales_threshold():
    c = Classifier.from_weights([3.0, 1.0], 8.0)
    assert c.theta == pytest.approx([0.75, 0.25])
    assert c.theta0 == pytest.approx(2.0)


@given(classifiers(3))
def test_string_round_trip(c):
    assert Classifier.parse(c.to_string()) == c


def test_parse_normalizes_and_rejects_malformed():
    assert Classifier.parse("theta=2,2;theta0=4") == Classifier(np.array([0.5, 0.5]), 1.0)
    for bad in ("theta=0.5,0.5", "theta0=1", "theta 0.5;theta0=1", "theta=0.5,0.5;theta0=1;x=2"):
        with pytest.raises(ValueError):
            Classifier.parse(bad)


@given(classifiers(2), st.lists(st.floats(-10, 10), min_size=2, max_size=2))
def test_classify_agrees_with_signed_distance(c, x):
    assert classify(x, c) == int(signed_distance(x, c.theta, c.theta0) <= 0)
