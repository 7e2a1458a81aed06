import numpy as np
import pytest

from hiermotion import (InvalidInputError, ModelParams, aggregate_polar,
                        attention_logits, build_knn_graph, edge_logits,
                        init_params, neighborhood_softmax, polar_rates,
                        relative_velocity)
from hiermotion.encoder import WEIGHT_FLOOR


def small_graph(rng, n=4, d=2, k=None):
    pos = rng.normal(size=(n, d))
    return pos, build_knn_graph(pos, k or (n - 1))


def make_params(rng, d, n, k, h=None):
    h = h or d
    return ModelParams(rng.normal(size=2 * h), rng.normal(size=(h, d)),
                       rng.normal(size=(n, k)) * 0.1)


def test_zero_projection_gives_zero_attention():
    rng = np.random.default_rng(0)
    _, g = small_graph(rng)
    params = ModelParams(np.ones(4), np.zeros((2, 2)), np.zeros((4, 3)))
    out = attention_logits(rng.normal(size=(4, 2)), g, params)
    np.testing.assert_array_equal(out, 0.0)


def test_zero_attention_vector_gives_zero_logits():
    rng = np.random.default_rng(1)
    _, g = small_graph(rng)
    params = ModelParams(np.zeros(4), rng.normal(size=(2, 2)), np.zeros((4, 3)))
    out = attention_logits(rng.normal(size=(4, 2)), g, params)
    np.testing.assert_array_equal(out, 0.0)


def test_attention_matches_scalar_reference():
    # straight-line scalar re-evaluation of the attention rule per edge
    rng = np.random.default_rng(2)
    deltas, g = small_graph(rng, n=4, d=3)
    params = make_params(rng, d=3, n=4, k=3)
    got = attention_logits(deltas, g, params)
    h = params.hidden_dim
    for i in range(4):
        for c, j in enumerate(g.neighbors[i]):
            cat = np.concatenate([params.proj_matrix @ deltas[i],
                                  params.proj_matrix @ deltas[j]])
            raw = float(params.attn_vector @ cat)
            expected = raw if raw > 0 else params.leaky_slope * raw
            assert abs(got[i, c] - expected) < 1e-12


def test_edge_logits_adds_bias_and_flags_nonfinite():
    rng = np.random.default_rng(3)
    deltas, g = small_graph(rng)
    params = make_params(rng, d=2, n=4, k=3)
    np.testing.assert_allclose(edge_logits(deltas, g, params),
                               attention_logits(deltas, g, params) + params.edge_bias)
    bad = deltas.copy()
    bad[2, 0] = np.inf
    with pytest.raises(InvalidInputError, match="vertex 2"):
        edge_logits(bad, g, params)


def test_softmax_uniform_rows():
    rng = np.random.default_rng(4)
    _, g = small_graph(rng)
    w = neighborhood_softmax(np.zeros((4, 3)), g)
    np.testing.assert_allclose(w.weights, 1.0 / 3.0)


def test_softmax_extreme_logits_positive_and_normalized():
    rng = np.random.default_rng(5)
    _, g = small_graph(rng, n=3, d=2, k=2)
    w = neighborhood_softmax(np.array([[1000.0, 0.0]] * 3), g)
    assert w.weights[0, 0] > 1 - 1e-6
    assert 0 < w.weights[0, 1] <= 1e-6
    np.testing.assert_allclose(w.weights.sum(axis=1), 1.0, atol=1e-6)


def test_softmax_random_rows_sum_to_one_and_positive():
    rng = np.random.default_rng(6)
    _, g = small_graph(rng, n=9, d=2, k=8)
    for _ in range(50):
        w = neighborhood_softmax(rng.normal(scale=50.0, size=(9, 8)), g)
        np.testing.assert_allclose(w.weights.sum(axis=1), 1.0, atol=1e-6)
        assert (w.weights > 0).all()
        assert (w.weights >= WEIGHT_FLOOR / 2).all()


def test_relative_velocity_shared_motion_vanishes():
    rng = np.random.default_rng(7)
    _, g = small_graph(rng, n=5)
    deltas = np.tile(rng.normal(size=(1, 2)), (5, 1))
    w = neighborhood_softmax(rng.normal(size=(5, 4)), g)
    np.testing.assert_allclose(relative_velocity(deltas, w, g), 0.0, atol=1e-12)


def test_relative_velocity_static_single_parent():
    pos = np.array([[0.0], [1.0]])
    g = build_knn_graph(pos, 1)
    deltas = np.array([[2.5], [0.0]])
    w = neighborhood_softmax(np.zeros((2, 1)), g)
    out = relative_velocity(deltas, w, g)
    np.testing.assert_allclose(out[0], deltas[0])


def test_relative_velocity_matches_dense_matrix_oracle():
    rng = np.random.default_rng(8)
    deltas, g = small_graph(rng, n=6, d=3, k=4)
    w = neighborhood_softmax(rng.normal(size=(6, 4)), g)
    dense = np.zeros((6, 6))
    for i in range(6):
        for c, j in enumerate(g.neighbors[i]):
            dense[i, j] = w.weights[i, c]
    np.testing.assert_allclose(relative_velocity(deltas, w, g),
                               deltas - dense @ deltas, atol=1e-12)


def test_relative_velocity_linear_in_deltas():
    rng = np.random.default_rng(9)
    deltas, g = small_graph(rng, n=5)
    w = neighborhood_softmax(rng.normal(size=(5, 4)), g)
    a = relative_velocity(3.0 * deltas, w, g)
    b = 3.0 * relative_velocity(deltas, w, g)
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_root_keeps_full_velocity():
    rng = np.random.default_rng(10)
    deltas, g = small_graph(rng, n=5)
    g = g.with_roots([0])
    w = neighborhood_softmax(rng.normal(size=(5, 4)), g)
    out = relative_velocity(deltas, w, g)
    np.testing.assert_allclose(out[0], deltas[0])


# -- polar variant ------------------------------------------------------------


def circular_pair(omega, radius=1.5, steps=1, phase=0.3):
    """Child circling a fixed parent at the origin."""
    t = np.arange(steps + 1)
    child = radius * np.stack([np.cos(omega * t + phase), np.sin(omega * t + phase)], axis=1)
    parent = np.zeros((steps + 1, 2))
    return np.stack([child, parent], axis=1)  # (steps+1, 2 nodes, 2)


def test_polar_rates_pure_circular_orbit():
    omega = 0.25
    pos = circular_pair(omega)
    g = build_knn_graph(pos[0], 1)
    rates = polar_rates(pos[0], pos[1], g)
    assert abs(rates.radial[0, 0]) < 1e-12
    assert abs(rates.angular[0, 0] - omega) < 1e-12


def test_polar_rates_pure_radial_separation():
    v = 0.4
    direction = np.array([np.cos(1.1), np.sin(1.1)])
    p0 = np.stack([2.0 * direction, np.zeros(2)])
    p1 = np.stack([(2.0 + v) * direction, np.zeros(2)])
    g = build_knn_graph(p0, 1)
    rates = polar_rates(p0, p1, g)
    assert abs(rates.radial[0, 0] - v) < 1e-12
    assert abs(rates.angular[0, 0]) < 1e-12


def test_polar_rates_degenerate_edge_flagged_zero():
    p0 = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    p1 = np.array([[0.1, 0.0], [0.0, 0.1], [1.0, 0.1]])
    g = build_knn_graph(p0, 2)
    rates = polar_rates(p0, p1, g)
    assert rates.degenerate[0, 0]
    assert rates.radial[0, 0] == 0.0 and rates.angular[0, 0] == 0.0


def test_polar_rates_planetary_edge_matches_generator_closed_form():
    from hiermotion.datasets import PlanetaryConfig, gen_planetary

    cfg = PlanetaryConfig(seed=3)
    ds = gen_planetary(cfg)
    pos = ds.trajectory.positions
    g = build_knn_graph(pos[0], 10)
    moon = 4
    planet = cfg.bodies[moon].parent
    col = list(g.neighbors[moon]).index(planet)
    dt = 1.0 / cfg.n_frames
    expected_step = 2 * np.pi * cfg.bodies[moon].rate * dt
    for t in (0, 17, 63):
        rates = polar_rates(pos[t], pos[t + 1], g)
        assert abs(rates.radial[moon, col]) < 1e-9
        assert abs(rates.angular[moon, col] - expected_step) < 1e-9


def test_aggregate_polar_rigid_orbit_residual_zero():
    omega = 0.3
    pos = circular_pair(omega)
    g = build_knn_graph(pos[0], 1)
    w = neighborhood_softmax(np.zeros((2, 1)), g.with_roots([1]))
    deltas = pos[1] - pos[0]
    rates = polar_rates(pos[0], pos[1], g)
    agg = aggregate_polar(rates, w, g, deltas, pos[0])
    np.testing.assert_allclose(agg.cartesian_residual[0], 0.0, atol=1e-7)
    assert abs(agg.radial[0]) < 1e-9
    assert abs(agg.angular[0] - omega) < 1e-9


def test_aggregate_polar_nothing_inherited_from_static_parent():
    # all weight on a degenerate (coincident) static parent: the edge
    # explains nothing, so the residual is the node's own motion exactly
    p0 = np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 5.0]])
    p1 = np.array([[0.1, 0.2], [0.0, 0.0], [5.0, 5.0]])
    g = build_knn_graph(p0, 2)
    logits = np.full((3, 2), -60.0)
    logits[0, list(g.neighbors[0]).index(1)] = 60.0
    w = neighborhood_softmax(logits, g)
    deltas = p1 - p0
    rates = polar_rates(p0, p1, g)
    assert rates.degenerate[0, list(g.neighbors[0]).index(1)]
    agg = aggregate_polar(rates, w, g, deltas, p0)
    np.testing.assert_allclose(agg.cartesian_residual[0], deltas[0], atol=1e-12)


def test_aggregate_polar_residual_is_second_order_in_rates():
    # stretching and rotating edge: the polar reconstruction is first order,
    # so the leftover residual is bounded by the product of the rates
    p0 = np.array([[1.0, 0.0], [0.0, 0.0], [5.0, 5.0]])
    p1 = np.array([[1.1, 0.2], [0.0, 0.0], [5.0, 5.0]])
    g = build_knn_graph(p0, 2)
    logits = np.full((3, 2), -60.0)
    col = list(g.neighbors[0]).index(1)
    logits[0, col] = 60.0
    w = neighborhood_softmax(logits, g)
    rates = polar_rates(p0, p1, g)
    agg = aggregate_polar(rates, w, g, p1 - p0, p0)
    bound = abs(rates.radial[0, col] * rates.angular[0, col]) + 1e-9
    assert np.linalg.norm(agg.cartesian_residual[0]) <= bound


def test_aggregate_polar_three_body_chain_residual_below_noise():
    # star <- planet <- moon with exact circular orbits: with all weight on
    # the true parents, every residual is numerically zero
    from hiermotion.datasets import Body, PlanetaryConfig, gen_planetary

    cfg = PlanetaryConfig(seed=9, bodies=(Body(None, 0.0, 0.0),
                                          Body(0, 2.0, 1.0),
                                          Body(1, 0.5, 4.0)))
    ds = gen_planetary(cfg)
    pos = ds.trajectory.positions
    g = build_knn_graph(pos[0], 2).with_roots([0])
    logits = np.full((3, 2), -60.0)
    for node, parent in ((1, 0), (2, 1)):
        logits[node, list(g.neighbors[node]).index(parent)] = 60.0
    w = neighborhood_softmax(logits, g)
    for t in (0, 25, 80):
        deltas = pos[t + 1] - pos[t]
        rates = polar_rates(pos[t], pos[t + 1], g)
        agg = aggregate_polar(rates, w, g, deltas, pos[t])
        assert np.linalg.norm(agg.cartesian_residual[1:]) < 1e-7


def test_polar_requires_2d():
    with pytest.raises(InvalidInputError):
        polar_rates(np.zeros((3, 3)), np.ones((3, 3)), build_knn_graph(np.zeros((3, 3)) + np.arange(3)[:, None], 1))


def test_init_params_seeded_and_bounded():
    rng = np.random.default_rng(0)
    _, g = small_graph(rng, n=5, d=2)
    p1 = init_params(g, dim=2, seed=7)
    p2 = init_params(g, dim=2, seed=7)
    np.testing.assert_array_equal(p1.attn_vector, p2.attn_vector)
    bound = 1.0 / np.sqrt(p1.hidden_dim)
    assert (np.abs(p1.attn_vector) <= bound).all()
    assert (np.abs(p1.proj_matrix) <= bound).all()
    np.testing.assert_array_equal(p1.edge_bias, 0.0)
