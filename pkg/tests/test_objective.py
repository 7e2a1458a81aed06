import numpy as np
import pytest

from hiermotion import (HierarchyMatrix, InvalidInputError, LossWeights,
                        algebraic_connectivity, base_loss, connectivity_hinge,
                        rotational_loss)
from hiermotion import autodiff as ad
from hiermotion.objective import connectivity_loss_tensor, symmetrized_adjacency


def test_loss_weights_reject_negative():
    with pytest.raises(InvalidInputError):
        LossWeights(lambda_delta=-0.1)


def test_base_loss_perfect_reconstruction_zero():
    d = np.random.default_rng(0).normal(size=(4, 3, 2))
    assert base_loss(d, d, np.zeros_like(d), lambda_delta=5.0) == 0.0


def test_base_loss_penalizes_star_collapse():
    # copying the absolute motion into the residuals reconstructs perfectly
    # but pays the full regularizer, so the shortcut is never free
    d = np.random.default_rng(1).normal(size=(5, 4, 1))
    lam = 0.7
    loss = base_loss(d, d, d, lambda_delta=lam)
    assert loss == pytest.approx(lam * np.abs(d).sum())
    assert loss > 0


def test_base_loss_matches_scalar_summation_oracle():
    rng = np.random.default_rng(2)
    dh, da, dr = rng.normal(size=(3, 6, 5, 2))
    lam = 0.3
    expected = 0.0
    for t in range(6):
        for n in range(5):
            for k in range(2):
                expected += abs(dh[t, n, k] - da[t, n, k]) + lam * abs(dr[t, n, k])
    assert base_loss(dh, da, dr, lam) == pytest.approx(expected, rel=1e-12)


def test_base_loss_shape_mismatch():
    with pytest.raises(InvalidInputError):
        base_loss(np.zeros((2, 2, 1)), np.zeros((3, 2, 1)), np.zeros((2, 2, 1)), 0.1)


def test_rotational_loss_reduces_to_base_when_weights_zero():
    rng = np.random.default_rng(3)
    dh, da, dr = rng.normal(size=(3, 4, 3, 2))
    radial = rng.normal(size=(4, 3))
    h = np.zeros((3, 3))
    lw = LossWeights(lambda_delta=0.4, lambda_r=0.0, lambda_theta=0.0, lambda_lap=0.0)
    assert rotational_loss(dh, da, dr, radial, radial, h, lw) == pytest.approx(
        base_loss(dh, da, dr, 0.4))


def test_rotational_loss_planetary_weights_finite_and_term_by_term():
    rng = np.random.default_rng(4)
    dh, da, dr = rng.normal(size=(3, 5, 3, 2))
    radial = rng.normal(size=(5, 3))
    angular = rng.normal(size=(5, 3))
    h = HierarchyMatrix((None, 0, 1)).dense() * 0.9
    lw = LossWeights(lambda_delta=0.8, lambda_r=12.0, lambda_theta=0.0,
                     lambda_lap=6.0, tau_c=0.05)
    total = rotational_loss(dh, da, dr, radial, angular, h, lw)
    lam2, _ = algebraic_connectivity(h)
    manual = (np.abs(dh - da).sum() + 0.8 * np.abs(dr).sum()
              + 12.0 * np.abs(radial).sum()
              + 6.0 * connectivity_hinge(lam2, 0.05))
    assert np.isfinite(total)
    assert total == pytest.approx(manual, rel=1e-12)


def test_hand_built_three_node_terms():
    dh = np.array([[[1.0], [2.0], [3.0]]])
    da = np.array([[[1.0], [1.0], [1.0]]])
    dr = np.array([[[0.5], [-0.5], [0.0]]])
    assert base_loss(dh, da, dr, 2.0) == pytest.approx((0 + 1 + 2) + 2.0 * 1.0)


# -- algebraic connectivity ---------------------------------------------------


def test_lambda2_zero_for_disconnected():
    h = np.zeros((4, 4))
    h[1, 0] = 1.0
    h[3, 2] = 1.0  # two separate pairs
    lam2, _ = algebraic_connectivity(h)
    assert abs(lam2) < 1e-9


def test_lambda2_complete_graph_equals_n():
    for n in (3, 5, 8):
        adj = np.ones((n, n)) - np.eye(n)
        lam2, _ = algebraic_connectivity(adj)
        assert lam2 == pytest.approx(n, abs=1e-9)


def test_lambda2_path_graph_closed_form():
    # path on 5 vertices: eigenvalues 4 sin^2(k pi / 10)
    h = np.zeros((5, 5))
    for i in range(1, 5):
        h[i, i - 1] = 1.0
    lam2, vec = algebraic_connectivity(h)
    assert lam2 == pytest.approx(4 * np.sin(np.pi / 10) ** 2, abs=1e-12)
    lap = np.diag(symmetrized_adjacency(h).sum(1)) - symmetrized_adjacency(h)
    np.testing.assert_allclose(lap @ vec, lam2 * vec, atol=1e-9)


def test_lambda2_isolated_vertex_gives_full_hinge():
    h = np.zeros((3, 3))
    h[1, 0] = 1.0  # vertex 2 isolated
    lam2, _ = algebraic_connectivity(h)
    assert abs(lam2) < 1e-12
    assert connectivity_hinge(lam2, 0.1) == pytest.approx(0.1)


def test_connectivity_requires_square_and_size():
    with pytest.raises(InvalidInputError):
        algebraic_connectivity(np.zeros((1, 1)))
    with pytest.raises(InvalidInputError):
        algebraic_connectivity(np.zeros((2, 3)))


def test_hinge_boundary_and_values():
    assert connectivity_hinge(0.05, 0.05) == 0.0
    assert connectivity_hinge(0.0, 0.1) == pytest.approx(0.1)
    assert connectivity_hinge(2.0, 0.1) == 0.0
    with pytest.raises(InvalidInputError):
        connectivity_hinge(0.5, 0.0)


def test_symmetrized_adjacency_clamps_mutual_edges():
    h = np.zeros((2, 2))
    h[0, 1] = 0.9
    h[1, 0] = 0.8
    adj = symmetrized_adjacency(h)
    assert adj[0, 1] == 1.0 and adj[1, 0] == 1.0


def test_hinge_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    raw = rng.uniform(0.05, 0.4, size=(6, 6))
    np.fill_diagonal(raw, 0.0)
    tau_c = 5.0  # above lambda2 so the hinge is active

    lam2, _ = algebraic_connectivity(raw)
    assert lam2 < tau_c

    h = ad.Tensor(raw)
    out = connectivity_loss_tensor(h, tau_c)
    out.backward()

    def f(v):
        lam, _ = algebraic_connectivity(v)
        return connectivity_hinge(lam, tau_c)

    step = 1e-6
    num = np.zeros_like(raw)
    for i in range(6):
        for j in range(6):
            vp, vm = raw.copy(), raw.copy()
            vp[i, j] += step
            vm[i, j] -= step
            num[i, j] = (f(vp) - f(vm)) / (2 * step)
    denom = max(np.abs(num).max(), 1e-12)
    assert np.abs(h.grad - num).max() / denom < 1e-3


def test_hinge_gradient_zero_when_connectivity_sufficient():
    adj = np.ones((4, 4)) - np.eye(4)
    h = ad.Tensor(adj * 0.5)
    out = connectivity_loss_tensor(h, tau_c=0.05)
    assert out.value == 0.0
    out.backward()
    np.testing.assert_array_equal(h.grad, 0.0)
