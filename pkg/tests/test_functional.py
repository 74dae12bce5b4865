import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from distill_audit.errors import InvalidArgument, TrainingDiverged
from distill_audit.numcore import OptimizerState, entropy, kl_divergence, optimizer_step, softmax


def test_softmax_examples():
    assert softmax([0.0, 0.0]).tolist() == [0.5, 0.5]
    p = softmax([1.0, 0.0])
    assert p[0] == pytest.approx(math.e / (1 + math.e), abs=1e-15)
    np.testing.assert_allclose(softmax([2.0, 0.0], temperature=2.0), softmax([1.0, 0.0]))


def test_softmax_stable_for_huge_logits():
    p = softmax([1000.0, 0.0, -1000.0])
    assert p[0] == 1.0 and np.isfinite(p).all()


@pytest.mark.parametrize("bad", [dict(logits=[1.0]), dict(logits=[np.nan, 0.0]),
                                 dict(logits=[1.0, 0.0], temperature=0.0)])
def test_softmax_rejects(bad):
    with pytest.raises(InvalidArgument):
        softmax(**bad)


finite = st.floats(-30, 30, allow_nan=False)


@given(arrays(np.float64, st.integers(2, 12), elements=finite), st.floats(0.1, 10))
def test_softmax_is_a_distribution(z, t):
    p = softmax(z, t)
    assert abs(p.sum() - 1) < 1e-12 and (p >= 0).all()


def test_kl_examples():
    assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)
    # q = 0 where p > 0: floored, finite
    assert kl_divergence([1.0, 0.0], [0.0, 1.0]) == pytest.approx(-math.log(1e-12))
    with pytest.raises(InvalidArgument):
        kl_divergence([1.0, 0.0], [1.0, 0.0, 0.0])


def test_entropy_examples():
    assert entropy([0.25] * 4) == pytest.approx(math.log(4))
    assert entropy([1.0, 0.0]) == 0.0


def test_sgd_step():
    p = np.array([1.0, 2.0])
    state = OptimizerState(kind="sgd", lr=0.5)
    optimizer_step([p], [np.array([2.0, -2.0])], state)
    np.testing.assert_array_equal(p, [0.0, 3.0])
    assert state.step == 1


def test_adam_first_step_moves_by_lr():
    p = np.array([1.0, -1.0])
    optimizer_step([p], [np.array([3.0, -0.5])], OptimizerState(lr=0.1))
    np.testing.assert_allclose(p, [0.9, -0.9], atol=1e-7)


def test_nonfinite_gradient_raises_and_leaves_params():
    p = np.array([1.0])
    state = OptimizerState()
    with pytest.raises(TrainingDiverged) as info:
        optimizer_step([p], [np.array([np.nan])], state)
    assert info.value.step == 1 and p[0] == 1.0


def test_optimizer_validation():
    with pytest.raises(InvalidArgument):
        OptimizerState(kind="rmsprop")
    with pytest.raises(InvalidArgument):
        optimizer_step([np.zeros(2)], [np.zeros(3)], OptimizerState())
