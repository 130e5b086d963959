import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sar_planner.ahp import (
    DEFAULT_TABLE,
    CategoryWeightTable,
    ConvergenceError,
    WeightVector,
    calibrate_matrices,
    consistency_ratio,
    derive_weights,
    principal_eigenvector,
    weights_for,
)
from sar_planner.enums import Label

SAATY = [1 / 9, 1 / 7, 1 / 5, 1 / 3, 1, 3, 5, 7, 9]


def random_reciprocal(rng, n=4, scale=None):
    a = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            v = rng.choice(SAATY) if scale is None else float(np.exp(rng.uniform(-scale, scale)))
            a[i, j], a[j, i] = v, 1.0 / v
    return a


def dense_lambda(a):
    vals, vecs = np.linalg.eig(a)
    k = int(np.argmax(vals.real))
    v = np.abs(vecs[:, k].real)
    return vals[k].real, v / v.sum()


def test_all_ones():
    w, lam = derive_weights(np.ones((4, 4)))
    np.testing.assert_allclose(w.as_array(), 0.25)
    assert lam == pytest.approx(4.0)
    assert consistency_ratio(np.ones((4, 4)), lam) == pytest.approx(0.0, abs=1e-12)


def test_consistent_l1_recovered():
    row = np.array([0.417, 0.417, 0.083, 0.083])
    w, lam = derive_weights(row[:, None] / row[None, :])
    np.testing.assert_allclose(w.as_array(), row / row.sum(), atol=1e-9)
    np.testing.assert_allclose(w.as_array(), row, atol=1e-3)
    assert lam == pytest.approx(4.0)


def test_residual_on_random_reciprocal_matrices():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = random_reciprocal(rng)
        w, lam = derive_weights(a)
        v = w.as_array()
        assert np.linalg.norm(a @ v - lam * v) < 1e-8


def test_cr_matches_dense_eigensolver():
    a = np.ones((4, 4))
    for (i, j), v in {(0, 1): 3.0, (0, 2): 5.0, (1, 2): 1 / 3}.items():
        a[i, j], a[j, i] = v, 1 / v
    w, lam = derive_weights(a)
    lam_ref, w_ref = dense_lambda(a)
    assert lam == pytest.approx(lam_ref, abs=1e-9)
    np.testing.assert_allclose(w.as_array(), w_ref, atol=1e-9)
    assert consistency_ratio(a, lam) == pytest.approx((lam_ref - 4) / 3 / 0.90, abs=1e-9)
    assert consistency_ratio(a, lam) > 0


def test_non_reciprocal_rejected():
    a = np.ones((4, 4))
    a[0, 1] = 2.0
    with pytest.raises(ValueError):
        derive_weights(a)
    with pytest.raises(ValueError):
        derive_weights(np.ones((3, 3)))


def test_non_convergence_reports_iterations():
    a = random_reciprocal(np.random.default_rng(1))
    with pytest.raises(ConvergenceError) as info:
        principal_eigenvector(a, tol=1e-10, max_iter=1)
    assert info.value.iterations == 1


def test_table_rows():
    np.testing.assert_allclose(weights_for(Label.L1).as_array(), [0.417, 0.417, 0.083, 0.083], atol=1e-12)
    assert weights_for(Label.L3).w_h == pytest.approx(0.631)
    assert DEFAULT_TABLE.raw[Label.L4].total == pytest.approx(0.999)
    assert weights_for(Label.L4).total == pytest.approx(1.0, abs=1e-12)
    for label in Label:
        assert weights_for(label).total == pytest.approx(1.0, abs=1e-6)


def test_calibration():
    mats = calibrate_matrices(DEFAULT_TABLE)
    assert mats[Label.L1][0, 1] == pytest.approx(1.0)
    assert mats[Label.L1][0, 2] == pytest.approx(5.024, abs=1e-3)
    for label, mat in mats.items():
        w, lam = derive_weights(mat)
        np.testing.assert_allclose(w.as_array(), DEFAULT_TABLE[label].as_array(), atol=1e-6)
        assert consistency_ratio(mat, lam) == pytest.approx(0.0, abs=1e-9)


def test_zero_weight_uses_floor():
    table = CategoryWeightTable({label: WeightVector(0.5, 0.5, 0.0, 0.0) for label in Label})
    mat = calibrate_matrices(table)[Label.L1]
    assert np.all(np.isfinite(mat))
    assert mat[0, 2] == pytest.approx(0.5 / 1e-4)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
def test_scale_invariance(seed, c):
    a = random_reciprocal(np.random.default_rng(seed))
    w1, _ = principal_eigenvector(a)
    w2, lam2 = principal_eigenvector(c * a)
    np.testing.assert_allclose(w1, w2, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.permutations(range(4)))
def test_permutation_equivariance(seed, perm):
    a = random_reciprocal(np.random.default_rng(seed))
    p = np.array(perm)
    w, _ = derive_weights(a)
    wp, _ = derive_weights(a[np.ix_(p, p)])
    np.testing.assert_allclose(wp.as_array(), w.as_array()[p], atol=1e-9)


def test_lambda_at_least_n():
    rng = np.random.default_rng(5)
    for k in range(1000):
        a = random_reciprocal(rng, scale=None if k % 2 else 2.0)
        _, lam = derive_weights(a)
        assert lam >= 4.0 - 1e-9
