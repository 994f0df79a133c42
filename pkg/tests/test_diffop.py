import numpy as np
import pytest
from _oracles import dense_difference_matrix
from conftest import random_panel

from sparsebreaks.diffop import (
    apply,
    apply_adjoint,
    as_linear_operator,
    build_design,
    group_columns,
    suffix_grams,
)
from sparsebreaks.errors import DimensionMismatch, IndexOutOfRange
from sparsebreaks.panel import RegressionPanel


@pytest.fixture
def tiny():
    return RegressionPanel(np.array([[[2.0]], [[3.0]]]), np.zeros((2, 1)))


def test_tiny_scales_and_target(tiny):
    design, target = build_design(tiny, [0.0])
    np.testing.assert_array_equal(target.r, [0.0, 0.0])
    np.testing.assert_allclose(design.column_scales[:, 0], [np.sqrt(13.0), 3.0])
    M = dense_difference_matrix(tiny.design_blocks)
    np.testing.assert_array_equal(M[:, 0], [2.0, 3.0])
    np.testing.assert_array_equal(M[:, 1], [0.0, 3.0])


def test_tiny_residual():
    panel = RegressionPanel(np.array([[[2.0]], [[3.0]]]), np.array([[2.0], [6.0]]))
    _, target = build_design(panel, [1.0])
    np.testing.assert_array_equal(target.r, [0.0, 3.0])


def test_tiny_apply_and_adjoint(tiny):
    design, _ = build_design(tiny, [0.0], normalize=False)
    np.testing.assert_array_equal(apply(design, [1.0, 1.0]), [2.0, 6.0])
    np.testing.assert_array_equal(apply_adjoint(design, [1.0, 1.0]), [5.0, 3.0])
    np.testing.assert_array_equal(apply(design, [0.0, 0.0]), [0.0, 0.0])
    np.testing.assert_array_equal(apply_adjoint(design, [0.0, 0.0]), [0.0, 0.0])


@pytest.mark.parametrize("normalize", [False, True])
def test_apply_matches_dense(rng, normalize):
    panel = random_panel(rng, 4, 2, 2)
    design, _ = build_design(panel, np.zeros(2), normalize=normalize)
    M = dense_difference_matrix(panel.design_blocks) / design.op_scales.ravel()
    delta = rng.standard_normal(8)
    np.testing.assert_allclose(apply(design, delta), M @ delta, rtol=0, atol=1e-12)
    v = rng.standard_normal(8)
    np.testing.assert_allclose(apply_adjoint(design, v), M.T @ v, rtol=0, atol=1e-12)


def test_adjoint_identity(rng):
    panel = random_panel(rng, 5, 3, 2)
    design, _ = build_design(panel, np.zeros(2))
    u, v = rng.standard_normal(10), rng.standard_normal(15)
    lhs, rhs = apply(design, u) @ v, u @ apply_adjoint(design, v)
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_suffix_gram_recursion(rng):
    X = rng.standard_normal((6, 2, 3))
    S = suffix_grams(X)
    np.testing.assert_allclose(S[-1], X[-1].T @ X[-1], atol=1e-14)
    for t in range(5):
        np.testing.assert_allclose(S[t], X[t].T @ X[t] + S[t + 1], atol=1e-12)


def test_group_columns(rng):
    panel = random_panel(rng, 4, 2, 3)
    design, _ = build_design(panel, np.zeros(3))
    M = dense_difference_matrix(panel.design_blocks) / design.op_scales.ravel()
    T = 4
    last = group_columns(design, T)
    u = rng.standard_normal(3)
    expect = np.zeros(8)
    expect[6:] = panel.design_blocks[-1] @ (u / design.column_scales[-1])
    np.testing.assert_allclose(last.matvec(u), expect, atol=1e-14)
    first = group_columns(design, 1)
    d = 1.0 / design.column_scales[0]
    full = sum(X.T @ X for X in panel.design_blocks)
    np.testing.assert_allclose(first.gram, d[:, None] * full * d[None, :], atol=1e-12)
    for t in range(1, T + 1):
        block = M[:, (t - 1) * 3 : t * 3]
        np.testing.assert_allclose(design.group_gram(t), block.T @ block, atol=1e-12)
        v = rng.standard_normal(8)
        np.testing.assert_allclose(group_columns(design, t).rmatvec(v), block.T @ v, atol=1e-12)
        assert group_columns(design, t).lipschitz == pytest.approx(np.linalg.eigvalsh(block.T @ block)[-1])
    with pytest.raises(IndexOutOfRange):
        group_columns(design, 0)
    with pytest.raises(IndexOutOfRange):
        group_columns(design, T + 1)


def test_zero_columns_are_inert():
    X = np.zeros((3, 1, 2))
    X[:, 0, 0] = [1.0, 2.0, 3.0]
    X[0, 0, 1] = 1.0  # column 2 vanishes from period 2 on
    panel = RegressionPanel(X, np.ones((3, 1)))
    design, _ = build_design(panel, np.zeros(2))
    np.testing.assert_array_equal(design.inert, [[False, False], [False, True], [False, True]])
    assert design.column_scales[1, 1] == 1.0
    assert np.all(design.group_lipschitz > 0)
    Z = np.zeros((3, 1, 1))
    design0, _ = build_design(RegressionPanel(Z, np.ones((3, 1))), np.zeros(1))
    np.testing.assert_array_equal(design0.group_lipschitz, [1.0, 1.0, 1.0])
    assert design0.inert_groups.all()


def test_scale_round_trip(rng):
    panel = random_panel(rng, 5, 2, 2)
    design, _ = build_design(panel, np.zeros(2))
    z = rng.standard_normal((5, 2))
    np.testing.assert_allclose(design.rescale(design.unscale(z)), z, atol=1e-13)


def test_linear_operator_wrapper(rng):
    panel = random_panel(rng, 4, 2, 2)
    design, _ = build_design(panel, np.zeros(2))
    op = as_linear_operator(design)
    x = rng.standard_normal(8)
    np.testing.assert_allclose(op.matvec(x), apply(design, x))
    np.testing.assert_allclose(op.rmatvec(x), apply_adjoint(design, x))


def test_bad_shapes(tiny):
    with pytest.raises(DimensionMismatch):
        build_design(tiny, [0.0, 1.0])
    design, _ = build_design(tiny, [0.0])
    with pytest.raises(DimensionMismatch):
        apply(design, [1.0, 2.0, 3.0])


def test_design_is_immutable(tiny):
    design, _ = build_design(tiny, [0.0])
    with pytest.raises(ValueError):
        design.suffix_grams[0, 0, 0] = 1.0
