import numpy as np
import pytest

from hiermotion import (HierarchyMatrix, InvalidInputError, gumbel_sample,
                        ml_hierarchy, trace_descendants, validate_hierarchy)
from hiermotion.encoder import EdgeWeights


def make_weights(weights, neighbors, roots=()):
    weights = np.asarray(weights, dtype=np.float64)
    mask = np.ones(weights.shape[0])
    for r in roots:
        mask[r] = 0.0
    return EdgeWeights(logits=np.log(weights), weights=weights,
                       neighbors=np.asarray(neighbors), root_mask=mask)


def chain3():
    return HierarchyMatrix((None, 0, 1))


def test_validate_chain():
    rep = validate_hierarchy(chain3())
    assert rep.ok and rep.n_roots == 1


def test_validate_two_cycle():
    rep = validate_hierarchy(HierarchyMatrix((1, 0)))
    assert not rep.acyclic


def test_validate_star():
    star = HierarchyMatrix((None, 0, 0, 0, 0))
    rep = validate_hierarchy(star)
    assert rep.ok and rep.n_roots == 1


def test_validate_dense_with_self_loop_and_multi_parent():
    h = np.zeros((3, 3))
    h[1, 1] = 1.0  # self-loop
    h[2, 0] = h[2, 1] = 1.0  # two parents
    rep = validate_hierarchy(h)
    assert not rep.no_self and not rep.single_parent


def test_dense_roundtrip():
    h = HierarchyMatrix((None, 0, 1, 1))
    back = HierarchyMatrix.from_dense(h.dense())
    assert back.parents == h.parents


def test_trace_descendants_chain_and_leaf():
    h = chain3()
    assert trace_descendants(h, {0}) == {0, 1, 2}
    assert trace_descendants(h, {2}) == {2}


def test_trace_descendants_raises_on_cycle():
    with pytest.raises(InvalidInputError):
        trace_descendants(HierarchyMatrix((1, 0)), {0})


def test_trace_descendants_matches_matrix_power_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(3, 12))
        parents = [None]
        for i in range(1, n):
            parents.append(int(rng.integers(0, i)) if rng.random() < 0.8 else None)
        h = HierarchyMatrix(tuple(parents))
        # oracle: reachability via boolean powers of the child->parent transpose
        adj = h.dense().T.astype(bool)  # adj[p, c] = True
        reach = np.eye(n, dtype=bool)
        for _ in range(n):
            reach = reach | (reach @ adj)
        start = int(rng.integers(0, n))
        expected = set(np.flatnonzero(reach[start]))
        assert trace_descendants(h, {start}) == expected


def test_dot_export_lists_edges():
    dot = chain3().to_dot()
    assert "n0 -> n1;" in dot and "n1 -> n2;" in dot


def test_json_roundtrip(tmp_path):
    h = HierarchyMatrix((None, 0, 0, 2))
    path = tmp_path / "h.json"
    h.save_json(path)
    assert HierarchyMatrix.load_json(path).parents == h.parents


# -- ml_hierarchy -------------------------------------------------------------


def test_ml_hierarchy_uniform_ties_pick_lowest_vertex():
    nbrs = np.array([[1, 2], [2, 0], [0, 1]])
    w = make_weights(np.full((3, 2), 0.5), nbrs)
    h = ml_hierarchy(w)
    assert h.parents == (1, 0, 0)


def test_ml_hierarchy_concentrated_recovers_truth():
    nbrs = np.array([[1, 2], [0, 2], [0, 1]])
    w = np.array([[0.9, 0.1], [0.8, 0.2], [0.1, 0.9]])
    h = ml_hierarchy(make_weights(w, nbrs, roots=(0,)))
    assert h.parents == (None, 0, 1)


# -- gumbel sampling ----------------------------------------------------------


def test_gumbel_rejects_bad_tau_and_samples():
    w = make_weights(np.full((3, 2), 0.5), np.array([[1, 2], [0, 2], [0, 1]]))
    with pytest.raises(InvalidInputError):
        gumbel_sample(w, tau=0.0)
    with pytest.raises(InvalidInputError):
        gumbel_sample(w, tau=1.0, n_samples=0)


def test_gumbel_sample_structure_and_straight_through():
    rng = np.random.default_rng(1)
    nbrs = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    w = rng.dirichlet(np.ones(3), size=4)
    weights = make_weights(w, nbrs, roots=(0,))
    samples = gumbel_sample(weights, tau=0.7, n_samples=50, rng=7)
    for s in samples:
        dense = s.hard.dense()
        assert (np.diag(dense) == 0).all()
        assert (dense.sum(axis=1)[1:] == 1).all()
        assert dense[0].sum() == 0  # root row empty
        np.testing.assert_allclose(s.soft.sum(axis=1), 1.0, atol=1e-9)
        for i in range(1, 4):
            assert s.hard.parents[i] == nbrs[i, np.argmax(s.soft[i])]


def test_gumbel_sampling_reproducible():
    nbrs = np.array([[1, 2], [0, 2], [0, 1]])
    w = make_weights(np.array([[0.3, 0.7], [0.5, 0.5], [0.9, 0.1]]), nbrs)
    a = gumbel_sample(w, tau=0.5, n_samples=5, rng=42)
    b = gumbel_sample(w, tau=0.5, n_samples=5, rng=42)
    for sa, sb in zip(a, b):
        assert sa.hard.parents == sb.hard.parents
        np.testing.assert_array_equal(sa.soft, sb.soft)


def test_single_neighbor_always_selected():
    nbrs = np.array([[1], [0]])
    w = make_weights(np.ones((2, 1)), nbrs)
    for s in gumbel_sample(w, tau=0.3, n_samples=10, rng=0):
        assert s.hard.parents == (1, 0)


def test_near_zero_tau_matches_argmax_of_weights():
    # zeroed noise via a fixed draw: tau -> 0+ sharpens soft rows onto argmax
    from hiermotion.hierarchy import hard_from_soft, perturbed_soft_weights

    w = np.array([[0.6, 0.3, 0.1], [0.2, 0.5, 0.3],
                  [0.1, 0.1, 0.8], [0.25, 0.7, 0.05]])
    nbrs = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    soft = perturbed_soft_weights(w, np.zeros_like(w), tau=1e-3).value
    hard = hard_from_soft(soft, nbrs, np.ones(4))
    assert hard.parents == (1, 2, 3, 1)
    assert soft[0, 0] > 1 - 1e-6


def test_empirical_frequencies_match_independent_gumbel_argmax():
    # selection frequencies of a 3-way categorical at tau=0.5 vs an
    # independent Gumbel-argmax simulation with a separate generator
    probs = np.array([0.5, 0.3, 0.2])
    nbrs = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    rows = np.tile(probs, (4, 1))
    weights = make_weights(rows, nbrs, roots=(1, 2, 3))  # only vertex 0 samples
    n = 100_000
    counts = np.zeros(3)
    samples = gumbel_sample(weights, tau=0.5, n_samples=n, rng=123)
    for s in samples:
        counts[nbrs[0].tolist().index(s.hard.parents[0])] += 1
    freq = counts / n

    # oracle: independent Gumbel-argmax simulation of the same construction
    # (noise added to the weights, argmax invariant to the temperature)
    oracle_rng = np.random.default_rng(999)
    g = oracle_rng.gumbel(size=(n, 3))
    picks = np.argmax(probs + g, axis=1)
    oracle = np.bincount(picks, minlength=3) / n
    np.testing.assert_allclose(freq, oracle, atol=0.01)
