import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from distill_audit.data import BlobConfig, make_blobs
from distill_audit.distill import (ArrayTask, Condition, analytic_per_logit_gradient,
                                   distill_loss, feature_kd_loss, kd_loss, ls_loss, rcd_target,
                                   rcd_target_fixed, train_student, train_teacher)
from distill_audit.errors import InvalidArgument, TrainingDiverged
from distill_audit.models import MlpConfig, init_model
from distill_audit.numcore import tensor as T
from distill_audit.numcore.rng import RngStream


def leaf(x):
    return T.Tensor(np.asarray(x, dtype=np.float64), requires_grad=True)


def softmax(z):
    e = np.exp(z - np.max(z))
    return e / e.sum()


def test_kd_hand_example():
    # z_s = (0, 0), z_t = (1, 0), y = 0, alpha = 0.5
    p_t = [math.e / (math.e + 1), 1 / (math.e + 1)]
    ce = math.log(2)
    kl = sum(p * math.log(p / 0.5) for p in p_t)
    expected = 0.5 * ce + 0.5 * kl
    loss = kd_loss(leaf([[0.0, 0.0]]), np.array([[1.0, 0.0]]), np.array([0]), 0.5)
    assert abs(loss.item() - expected) < 1e-12
    assert abs(expected - 0.402046) < 1e-6


def test_kd_alpha_zero_is_cross_entropy_bitwise():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((6, 5)).astype(np.float32)
    zt = rng.standard_normal((6, 5)).astype(np.float32)
    y = rng.integers(0, 5, 6)
    a, b = T.Tensor(z.copy(), requires_grad=True), T.Tensor(z.copy(), requires_grad=True)
    la, lb = kd_loss(a, zt, y, 0.0), T.cross_entropy(b, y)
    T.backward(la)
    T.backward(lb)
    assert la.data.tobytes() == lb.data.tobytes()
    assert a.grad.tobytes() == b.grad.tobytes()


def test_kd_accepts_one_hot_labels():
    z = leaf([[0.3, -0.2, 0.1]])
    zt = np.array([[1.0, 0.0, 0.5]])
    ids = kd_loss(z, zt, np.array([2]), 0.3).item()
    assert kd_loss(z, zt, np.array([[0, 0, 1]]), 0.3).item() == ids


def test_kd_temperature_and_t2_scale():
    z, zt, y = leaf([[0.5, -0.5]]), np.array([[2.0, 0.0]]), np.array([0])
    plain = kd_loss(z, zt, y, 1.0, temperature=2.0).item()
    scaled = kd_loss(z, zt, y, 1.0, temperature=2.0, t2_scale=True).item()
    assert abs(scaled - 4.0 * plain) < 1e-12
    p_t, q = softmax(np.array([1.0, 0.0])), softmax(np.array([0.25, -0.25]))
    assert abs(plain - float((p_t * np.log(p_t / q)).sum())) < 1e-12


@pytest.mark.parametrize("alpha,temp", [(-0.1, 1.0), (1.5, 1.0), (0.5, 0.0)])
def test_kd_rejects_bad_hyperparameters(alpha, temp):
    with pytest.raises(InvalidArgument):
        kd_loss(leaf([[0.0, 1.0]]), np.zeros((1, 2)), np.array([0]), alpha, temperature=temp)


def test_kd_rejects_shape_mismatch():
    with pytest.raises(InvalidArgument):
        kd_loss(leaf([[0.0, 1.0]]), np.zeros((1, 3)), np.array([0]), 0.5)
    with pytest.raises(InvalidArgument):
        kd_loss(leaf([[0.0, 1.0]]), np.zeros((1, 2)), np.array([2]), 0.5)


def test_teacher_receives_no_gradient():
    z = leaf([[0.1, 0.4, -0.3]])
    teacher = leaf([[1.0, 0.0, 0.2]])
    T.backward(kd_loss(z, teacher, np.array([1]), 0.7))
    assert z.grad is not None and teacher.grad is None


@given(st.lists(st.floats(-4, 4), min_size=2, max_size=6), st.floats(0, 1), st.integers(0, 100))
def test_analytic_gradient_matches_autodiff(zs, alpha, seed):
    k = len(zs)
    rng = np.random.default_rng(seed)
    zt = rng.standard_normal(k)
    y = int(rng.integers(0, k))
    z = leaf([zs])
    T.backward(kd_loss(z, zt[None], np.array([y]), alpha))
    onehot = np.eye(k)[y]
    expected = analytic_per_logit_gradient(softmax(np.array(zs)), softmax(zt), onehot, alpha)
    np.testing.assert_allclose(z.grad[0], expected, atol=1e-10)


def test_analytic_gradient_validation():
    with pytest.raises(InvalidArgument):
        analytic_per_logit_gradient([0.5, 0.6], [0.5, 0.5], [1, 0], 0.5)
    with pytest.raises(InvalidArgument):
        analytic_per_logit_gradient([0.5, 0.5], [0.5, 0.5], [1, 1], 0.5)
    with pytest.raises(InvalidArgument):
        analytic_per_logit_gradient([0.5, 0.5], [0.5, 0.5], [1, 0, 0], 0.5)


def test_teacher_dependent_part_of_incorrect_gradient():
    # holding p_s fixed, the teacher only enters through -alpha * p_t on every class
    p_s, y = np.array([0.2, 0.5, 0.3]), np.array([1.0, 0.0, 0.0])
    a = analytic_per_logit_gradient(p_s, np.array([0.1, 0.6, 0.3]), y, 0.4)
    b = analytic_per_logit_gradient(p_s, np.array([0.3, 0.3, 0.4]), y, 0.4)
    np.testing.assert_allclose(a - b, -0.4 * (np.array([0.1, 0.6, 0.3]) - np.array([0.3, 0.3, 0.4])))


def test_rcd_target_distribution():
    rng = RngStream(7)
    u = rcd_target(rng, 4, rows=20000)
    np.testing.assert_allclose(u.sum(axis=1), 1.0)
    np.testing.assert_allclose(u.mean(axis=0), 0.25, atol=0.005)
    raw = rcd_target(RngStream(7), 4, rows=20000, normalize=False)
    assert raw.min() >= 0 and raw.max() < 1
    assert abs(raw.mean() - 0.5) < 0.005
    assert rcd_target(RngStream(1), 3).shape == (3,)
    with pytest.raises(InvalidArgument):
        rcd_target(rng, 1)


def test_rcd_fixed_target_is_a_function_of_example():
    a = rcd_target_fixed(11, np.array([3, 4, 3]), 5)
    assert a.shape == (3, 5)
    np.testing.assert_array_equal(a[0], a[2])
    assert not np.allclose(a[0], a[1])
    np.testing.assert_array_equal(rcd_target_fixed(11, np.array([[4]]), 5)[0, 0], a[1])
    assert not np.allclose(rcd_target_fixed(12, np.array([3]), 5)[0], a[0])


def test_distill_loss_with_uniform_target():
    z = leaf([[0.0, 0.0, 0.0]])
    loss = distill_loss(z, np.full((1, 3), 1 / 3), np.array([0]), 1.0)
    assert abs(loss.item()) < 1e-12


def test_label_smoothing_identities():
    assert abs(ls_loss(leaf([[0.0, 0.0]]), np.array([0]), 1.0).item() - math.log(2)) < 1e-12
    z = leaf([[1.0, -1.0, 0.5]])
    np.testing.assert_allclose(ls_loss(z, np.array([2]), 0.0).item(),
                               T.cross_entropy(leaf([[1.0, -1.0, 0.5]]), np.array([2])).item())


def test_feature_kd_mse():
    s = leaf(np.zeros((2, 3)))
    base = T.Tensor(np.array(0.0))
    loss = feature_kd_loss(s, np.ones((2, 3)), base, 0.25)
    assert abs(loss.item() - 0.25) < 1e-12
    T.backward(loss)
    np.testing.assert_allclose(s.grad, np.full((2, 3), -0.25 * 2 / 6))
    with pytest.raises(InvalidArgument):
        feature_kd_loss(s, np.ones((2, 4)), base, 0.25)


def test_condition_rules():
    assert Condition("siddo").alpha == 0.0 and Condition("SIDDO").label == "siddo"
    assert Condition("KD", 0.9).label == "kd-0.9"
    assert Condition("feature-kd", 0.5, block=1).label == "featurekd-0.5-b1"
    assert Condition("RCD", 0.9, rcd_normalize=False, rcd_fixed=True).label == "rcd-0.9-raw-fixed"
    for bad in (dict(kind="SIDDO", alpha=0.5), dict(kind="KD"), dict(kind="KD", alpha=1.2),
                dict(kind="FeatureKD", alpha=0.5), dict(kind="KD", alpha=0.5, block=0),
                dict(kind="nope", alpha=0.1)):
        with pytest.raises(InvalidArgument):
            Condition(**bad)
    assert Condition("KD", 0.1).needs_teacher and not Condition("RCD", 0.1).needs_teacher


@pytest.fixture(scope="module")
def blob_task():
    cfg = BlobConfig(n_points=200, n_features=4, n_classes=3, noise=0.1, center_scale=2.0)
    train = make_blobs(cfg, 0)
    test = make_blobs(BlobConfig(n_points=90, n_features=4, n_classes=3, noise=0.0,
                                 center_scale=2.0), 1)
    return ArrayTask(train.x, train.y, test.x, test.y)


@pytest.fixture(scope="module")
def mlp_pair(blob_task):
    cfg = MlpConfig(4, (16,), 3)
    teacher = train_teacher(init_model(cfg, 0), blob_task, 60, data_seed=0, batch_size=32)
    return cfg, teacher


def test_teacher_learns_and_records_provenance(blob_task, mlp_pair):
    _, teacher = mlp_pair
    prov = teacher.provenance
    assert prov["stage"] == "teacher" and prov["steps"] == 60
    assert prov["test_accuracy"] > 0.8


def test_kd_alpha_zero_matches_siddo_bitwise(blob_task, mlp_pair):
    cfg, teacher = mlp_pair
    init = init_model(cfg, 5)
    kd = train_student(Condition("KD", 0.0, data_seed=5), teacher, init, blob_task, 25, batch_size=32)
    sd = train_student(Condition("SIDDO", data_seed=5), None, init, blob_task, 25, batch_size=32)
    assert kd.weights_bytes() == sd.weights_bytes()


def test_training_is_deterministic(blob_task, mlp_pair):
    cfg, teacher = mlp_pair
    init = init_model(cfg, 5)
    runs = [train_student(Condition("RCD", 0.5, data_seed=3), None, init, blob_task, 20,
                          batch_size=32, experiment_seed=1) for _ in range(2)]
    assert runs[0].weights_bytes() == runs[1].weights_bytes()
    other = train_student(Condition("RCD", 0.5, data_seed=3), None, init, blob_task, 20,
                          batch_size=32, experiment_seed=2)
    assert other.weights_bytes() != runs[0].weights_bytes()
    assert init.weights_bytes() == init_model(cfg, 5).weights_bytes()


def test_every_condition_trains(blob_task, mlp_pair):
    cfg, teacher = mlp_pair
    init = init_model(cfg, 9)
    for cond in (Condition("KD", 0.5, temperature=2.0), Condition("LS", 0.1),
                 Condition("FeatureKD", 0.5, block=0), Condition("RCD", 0.9, rcd_fixed=True),
                 Condition("RCD", 0.9, rcd_normalize=False)):
        out = train_student(cond, teacher if cond.needs_teacher else None, init, blob_task, 10,
                            batch_size=32)
        assert out.provenance["label"] == cond.label
        assert np.isfinite(out.provenance["final_batch_loss"])


def test_zero_steps_returns_init(blob_task, mlp_pair):
    cfg, _ = mlp_pair
    init = init_model(cfg, 4)
    out = train_student(Condition("SIDDO"), None, init, blob_task, 0)
    assert out.weights_bytes() == init.weights_bytes()
    assert out.provenance["final_batch_loss"] is None


def test_train_student_argument_errors(blob_task, mlp_pair):
    cfg, teacher = mlp_pair
    init = init_model(cfg, 1)
    with pytest.raises(InvalidArgument):
        train_student(Condition("KD", 0.5), None, init, blob_task, 1)
    with pytest.raises(InvalidArgument):
        train_student(Condition("SIDDO"), teacher, init, blob_task, 1)
    with pytest.raises(InvalidArgument):
        train_student(Condition("FeatureKD", 0.5, block=3), teacher, init, blob_task, 1)
    with pytest.raises(InvalidArgument):
        train_student(Condition("KD", 0.5), init_model(MlpConfig(4, (16,), 4), 0), init, blob_task, 1)
    with pytest.raises(InvalidArgument):
        train_student(Condition("SIDDO"), None, init, blob_task, -1)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_raises(blob_task, mlp_pair):
    cfg, _ = mlp_pair
    with pytest.raises(TrainingDiverged):
        train_student(Condition("SIDDO"), None, init_model(cfg, 1), blob_task, 200,
                      optimizer="sgd", lr=1e30)
