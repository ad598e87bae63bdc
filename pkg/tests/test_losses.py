import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import central_difference, conjugate_oracle
from vrsolve import (DataMatrix, data_fit, lipschitz_constant, loss_conjugate,
                     loss_derivative, loss_value, preprocess, synthesize)

UNIVARIATE = ("square", "logistic", "sqhinge", "safe-logistic")
scores = st.floats(-6.0, 6.0, allow_nan=False)
signs = st.sampled_from([-1.0, 1.0])


@pytest.mark.parametrize("kind,y,s,expected", [
    ("square", 1.0, 0.0, 0.5),
    ("logistic", 1.0, 0.0, math.log(2.0)),
    ("safe-logistic", 1.0, 1.0, 0.0),
    ("sqhinge", -1.0, 0.5, 1.125),
    ("sq-hinge", -1.0, 0.5, 1.125),
])
def test_values(kind, y, s, expected):
    assert loss_value(kind, y, s) == pytest.approx(expected, abs=1e-15)


def test_multiclass_uniform_scores():
    assert loss_value("multiclass-logistic", 1, [0.0, 0.0, 0.0]) == \
        pytest.approx(math.log(3.0), abs=1e-15)


def test_multiclass_large_scores_do_not_overflow():
    v = loss_value("multiclass-logistic", 2, [1000.0, 0.0, -1000.0])
    assert v == pytest.approx(1000.0, rel=1e-12)


@pytest.mark.parametrize("kind,y,s,expected", [
    ("logistic", 1.0, 0.0, -0.5),
    ("safe-logistic", 1.0, 1.0, 0.0),
    ("safe-logistic", 1.0, 3.5, 0.0),
])
def test_derivatives(kind, y, s, expected):
    assert loss_derivative(kind, y, s) == pytest.approx(expected, abs=1e-15)


def test_label_mismatch_raises():
    with pytest.raises(ValueError):
        loss_value("logistic", 0.5, 0.0)
    with pytest.raises(ValueError):
        loss_value("multiclass-logistic", 4, [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        loss_value("hinge", 1.0, 0.0)


@given(st.sampled_from(UNIVARIATE), signs, scores)
def test_derivative_matches_finite_difference(kind, y, s):
    if kind == "square":
        y *= 1.7
    num = central_difference(lambda v: loss_value(kind, y, float(v[0])), [s])
    ref = loss_derivative(kind, y, s)
    assert abs(num[0] - ref) <= 1e-5 * max(abs(ref), 1.0)


@given(st.integers(1, 4), st.lists(scores, min_size=4, max_size=4))
def test_multiclass_gradient(y, s):
    s = np.array(s)
    g = loss_derivative("multiclass-logistic", y, s)
    assert abs(g.sum()) <= 1e-12
    num = central_difference(lambda v: loss_value("multiclass-logistic", y, v),
                             s)
    np.testing.assert_allclose(g, num, rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("kind", ["safe-logistic", "sqhinge"])
def test_smooth_at_seam(kind):
    eps = 1e-10
    lo, hi = 1.0 - eps, 1.0 + eps
    assert abs(loss_value(kind, 1.0, lo) - loss_value(kind, 1.0, hi)) <= 1e-9
    assert abs(loss_derivative(kind, 1.0, lo)
               - loss_derivative(kind, 1.0, hi)) <= 1e-9


@given(st.sampled_from(UNIVARIATE), signs, scores, scores, st.floats(0, 1))
def test_convexity(kind, y, s1, s2, t):
    mid = loss_value(kind, y, t * s1 + (1 - t) * s2)
    chord = t * loss_value(kind, y, s1) + (1 - t) * loss_value(kind, y, s2)
    assert mid <= chord + 1e-12


def test_conjugate_examples():
    assert loss_conjugate("square", 1.0, 0.0) == 0.0
    assert loss_conjugate("logistic", 1.0, -0.5) == pytest.approx(
        -math.log(2.0), abs=1e-12)
    assert loss_conjugate("logistic", 1.0, 0.1) == math.inf


@pytest.mark.parametrize("kind", UNIVARIATE)
@pytest.mark.parametrize("y", [-1.0, 1.0])
def test_conjugate_matches_numeric_sup(kind, y):
    # 32 points avoid the domain endpoints u*y in {-1, 0}, where the sup is
    # only approached as |s| grows and the bounded search cannot settle it
    for u in np.linspace(-1.3, 0.3, 32):
        ref = conjugate_oracle(lambda s: loss_value(kind, y, s), u)
        got = loss_conjugate(kind, y, u)
        if math.isinf(ref):
            assert math.isinf(got), (kind, y, u)
        elif math.isinf(got):
            pytest.fail("finite sup %g reported as inf at u=%g" % (ref, u))
        else:
            assert got == pytest.approx(ref, abs=1e-7), (kind, y, u)


@given(st.sampled_from(UNIVARIATE), signs, scores, st.floats(-1.5, 0.5))
def test_fenchel_young(kind, y, s, u):
    lhs = loss_value(kind, y, s) + loss_conjugate(kind, y, u)
    assert lhs >= u * s - 1e-10


@given(st.sampled_from(UNIVARIATE), signs, scores)
def test_fenchel_young_equality_at_derivative(kind, y, s):
    u = loss_derivative(kind, y, s)
    lhs = loss_value(kind, y, s) + loss_conjugate(kind, y, u)
    assert lhs == pytest.approx(u * s, abs=1e-8)


@given(st.integers(1, 3), st.lists(scores, min_size=3, max_size=3))
def test_multiclass_fenchel_young_equality(y, s):
    s = np.array(s)
    u = loss_derivative("multiclass-logistic", y, s)
    lhs = (loss_value("multiclass-logistic", y, s)
           + loss_conjugate("multiclass-logistic", y, u))
    assert lhs == pytest.approx(u @ s, abs=1e-8)
    assert loss_conjugate("multiclass-logistic", y, u + 0.1) == math.inf


def test_data_fit_at_zero_is_log2():
    X, y = synthesize(50, 6, seed=1)
    value, (gw, gb) = data_fit("logistic", X, y, np.zeros(6), 0.0)
    assert value == pytest.approx(math.log(2.0), abs=1e-15)
    assert gb == pytest.approx(-0.5 * y.mean(), abs=1e-15)


def test_data_fit_planted_square_is_zero():
    X, y, w = synthesize(60, 5, task="regression", noise=0.0, seed=2,
                         return_coef=True)
    value, _ = data_fit("square", X, y, w)
    assert value <= 1e-25


@pytest.mark.parametrize("kind", UNIVARIATE + ("multiclass-logistic",))
def test_data_fit_gradient_finite_difference(kind):
    rng = np.random.default_rng(7)
    X = DataMatrix(rng.standard_normal((25, 4)))
    if kind == "multiclass-logistic":
        k, y = 3, rng.integers(1, 4, size=25).astype(float)
    else:
        k, y = 2, np.sign(rng.standard_normal((25, 2)))
    W = 0.5 * rng.standard_normal((4, k))
    b = 0.3 * rng.standard_normal(k)
    _, (gw, gb) = data_fit(kind, X, y, W, b)
    num_w = central_difference(lambda v: data_fit(kind, X, y, v, b)[0], W)
    num_b = central_difference(lambda v: data_fit(kind, X, y, W, v)[0], b)
    np.testing.assert_allclose(gw, num_w, rtol=1e-5, atol=1e-8)
    np.testing.assert_allclose(gb, num_b, rtol=1e-5, atol=1e-8)


def test_one_hot_expansion_equals_sum_of_columns():
    rng = np.random.default_rng(3)
    X = DataMatrix(rng.standard_normal((30, 4)))
    Y = np.sign(rng.standard_normal((30, 3)))
    W = rng.standard_normal((4, 3))
    joint, _ = data_fit("sqhinge", X, Y, W)
    loop = sum(data_fit("sqhinge", X, Y[:, j], W[:, j])[0] for j in range(3))
    assert joint == pytest.approx(loop, rel=1e-13)


def test_data_fit_dimension_mismatch():
    X, y = synthesize(20, 4, seed=0)
    with pytest.raises(ValueError):
        data_fit("logistic", X, y[:10], np.zeros(4))


def test_lipschitz_constants():
    X, _ = synthesize(40, 5, seed=0)
    preprocess(X, normalize=True)
    assert lipschitz_constant("logistic", X) == pytest.approx(0.25, rel=1e-12)
    assert lipschitz_constant("multiclass-logistic", X) == pytest.approx(
        0.25, rel=1e-12)
    assert lipschitz_constant("sqhinge", X) == pytest.approx(1.0, rel=1e-12)
    assert lipschitz_constant("logistic", X, intercept=True) == \
        pytest.approx(0.5, rel=1e-12)
    A = np.zeros((3, 2))
    A[1] = [0.0, 2.0]
    assert lipschitz_constant("square", DataMatrix(A)) == 4.0
    with pytest.raises(ValueError):
        lipschitz_constant("square", DataMatrix(np.zeros((0, 2))))
