"""Graph-attention encoder: per-edge parent logits and weights, predicted
relative velocities, and the polar-coordinate variant used for rotation
inheritance in two dimensions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .motion import InvalidInputError, ProximityGraph

WEIGHT_FLOOR = 1e-12  # keeps every parent probability strictly positive
DEGENERATE_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Learnable state of the encoder.

    attn_vector and proj_matrix parameterize the attention logits;
    edge_bias is a free logit per candidate edge, aligned with the
    proximity-graph neighborhoods. The attention term alone is monotone
    in the parent feature, which forces one global parent ranking on all
    vertices; the per-edge bias restores the row-wise freedom needed to
    represent distinct parents for distinct vertices.
    """

    attn_vector: np.ndarray  # (2h,)
    proj_matrix: np.ndarray  # (h, d)
    edge_bias: np.ndarray  # (N, k)
    leaky_slope: float = 0.2
    hidden_dim: int = field(default=0)

    def __post_init__(self):
        a = np.asarray(self.attn_vector, dtype=np.float64)
        w = np.asarray(self.proj_matrix, dtype=np.float64)
        b = np.asarray(self.edge_bias, dtype=np.float64)
        if not (np.isfinite(a).all() and np.isfinite(w).all() and np.isfinite(b).all()):
            raise InvalidInputError("model parameters must be finite")
        if self.leaky_slope <= 0:
            raise InvalidInputError("leaky_slope must be > 0")
        h = w.shape[0]
        if a.shape != (2 * h,):
            raise InvalidInputError(f"attn_vector must have length {2 * h}")
        object.__setattr__(self, "attn_vector", a)
        object.__setattr__(self, "proj_matrix", w)
        object.__setattr__(self, "edge_bias", b)
        object.__setattr__(self, "hidden_dim", h)


def init_params(graph: ProximityGraph, dim: int, hidden_dim: int | None = None,
                seed: int = 0, leaky_slope: float = 0.2) -> ModelParams:
    """Seeded uniform init in [-1/sqrt(h), 1/sqrt(h)]; edge bias starts at 0."""
    h = dim if hidden_dim is None else hidden_dim
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(h)
    a = rng.uniform(-bound, bound, size=2 * h)
    w = rng.uniform(-bound, bound, size=(h, dim))
    b = np.zeros((graph.n_vertices, graph.k))
    return ModelParams(a, w, b, leaky_slope=leaky_slope)


@dataclass(frozen=True)
class EdgeWeights:
    """Per-edge logits and softmax weights, one row per vertex over its
    neighborhood. Root rows are masked: their weights are unused and the
    vertex keeps no parent."""

    logits: np.ndarray  # (N, k)
    weights: np.ndarray  # (N, k)
    neighbors: np.ndarray  # (N, k)
    root_mask: np.ndarray  # (N,) 0 where root

    def row(self, i: int) -> dict:
        return {int(j): float(w) for j, w in zip(self.neighbors[i], self.weights[i])}


def _check_finite_per_vertex(arr: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(arr).reshape(arr.shape[0], -1).all(axis=1)
    if bad.any():
        raise InvalidInputError(f"non-finite {what} at vertex {int(np.flatnonzero(bad)[0])}")


def attention_logits(deltas_t: np.ndarray, graph: ProximityGraph, params: ModelParams) -> np.ndarray:
    """Attention logit per candidate edge for one frame of velocities.

    Each logit applies LeakyReLU to the dot product of the attention
    vector with the concatenated projections of the child and parent
    velocity features. Returns (N, k) aligned with graph.neighbors.
    """
    deltas_t = np.asarray(deltas_t, dtype=np.float64)
    _check_finite_per_vertex(deltas_t, "velocity")
    h = params.hidden_dim
    proj = deltas_t @ params.proj_matrix.T  # (N, h)
    s_child = proj @ params.attn_vector[:h]
    s_parent = proj @ params.attn_vector[h:]
    raw = s_child[:, None] + s_parent[graph.neighbors]
    return np.where(raw > 0, raw, params.leaky_slope * raw)


def edge_logits(deltas_t: np.ndarray, graph: ProximityGraph, params: ModelParams) -> np.ndarray:
    """Full per-edge logits: attention term plus the learned edge bias."""
    return attention_logits(deltas_t, graph, params) + params.edge_bias


def time_averaged_logits(deltas: np.ndarray, graph: ProximityGraph, params: ModelParams) -> np.ndarray:
    """Per-edge logits over a whole velocity field (T, N, d): the attention
    term is averaged over frames before adding the edge bias. This is the
    distribution the hierarchy is sampled from."""
    deltas = np.asarray(deltas, dtype=np.float64)
    _check_finite_per_vertex(np.moveaxis(deltas, 1, 0), "velocity")
    h = params.hidden_dim
    proj = deltas @ params.proj_matrix.T  # (T, N, h)
    s_child = proj @ params.attn_vector[:h]  # (T, N)
    s_parent = proj @ params.attn_vector[h:]
    raw = s_child[:, :, None] + s_parent[:, graph.neighbors]
    att = np.where(raw > 0, raw, params.leaky_slope * raw)
    return att.mean(axis=0) + params.edge_bias


def neighborhood_softmax(logits: np.ndarray, graph: ProximityGraph) -> EdgeWeights:
    """Normalize logits to weights over each vertex's neighborhood.

    Max-subtracted softmax followed by a small floor and renormalization,
    so every weight is strictly positive even for extreme logit gaps.
    """
    logits = np.asarray(logits, dtype=np.float64)
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    p = e / e.sum(axis=-1, keepdims=True)
    p = np.maximum(p, WEIGHT_FLOOR)
    p = p / p.sum(axis=-1, keepdims=True)
    return EdgeWeights(logits=logits, weights=p, neighbors=np.asarray(graph.neighbors),
                       root_mask=graph.root_mask())


def relative_velocity(deltas_t: np.ndarray, weights: EdgeWeights, graph: ProximityGraph) -> np.ndarray:
    """Velocity left over after subtracting the weighted parent velocities.

    Root vertices (empty effective neighborhoods) keep their full velocity.
    """
    deltas_t = np.asarray(deltas_t, dtype=np.float64)
    gathered = deltas_t[graph.neighbors]  # (N, k, d)
    w = weights.weights * weights.root_mask[:, None]
    return deltas_t - np.einsum("nk,nkd->nd", w, gathered)


# -- polar (rotational) variant --------------------------------------------


@dataclass(frozen=True)
class EdgePolarRates:
    """Per-edge radial and angular rates between two consecutive frames."""

    radial: np.ndarray  # (N, k) units/frame
    angular: np.ndarray  # (N, k) radians/frame, wrapped to (-pi, pi]
    degenerate: np.ndarray  # (N, k) bool, coincident endpoints


@dataclass(frozen=True)
class PolarRates:
    """Weight-aggregated rates plus the Cartesian residual: the part of a
    vertex's motion unexplained by parent translation, rotation about the
    parent, and radial approach/retreat."""

    radial: np.ndarray  # (N,)
    angular: np.ndarray  # (N,)
    cartesian_residual: np.ndarray  # (N, d)


def _wrap_angle(a: np.ndarray) -> np.ndarray:
    """Map angles to (-pi, pi]."""
    out = np.mod(a + np.pi, 2 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out)


def polar_edge_data(positions: np.ndarray, neighbors: np.ndarray) -> dict:
    """Per-edge polar quantities for every frame pair of a 2-D trajectory.

    positions: (T+1, N, 2). Returns radial/angular rates (T, N, k), the
    degenerate-edge mask, and the parent-explained motion (T, N, k, 2):
    parent translation plus rotation of the offset vector plus the radial
    term. Degenerate (coincident) edges get zero rates and are flagged.
    """
    positions = np.asarray(positions, dtype=np.float64)
    if positions.shape[-1] != 2:
        raise InvalidInputError("polar rates are defined for d = 2 only")
    rel = positions[:, :, None, :] - positions[:, neighbors, :]  # (T+1, N, k, 2)
    dist = np.linalg.norm(rel, axis=-1)
    ang = np.arctan2(rel[..., 1], rel[..., 0])
    degenerate = (dist[:-1] < DEGENERATE_EDGE_EPS) | (dist[1:] < DEGENERATE_EDGE_EPS)
    radial = np.where(degenerate, 0.0, dist[1:] - dist[:-1])
    angular = np.where(degenerate, 0.0, _wrap_angle(ang[1:] - ang[:-1]))

    deltas = np.diff(positions, axis=0)  # (T, N, 2)
    parent_delta = deltas[:, neighbors, :]  # (T, N, k, 2)
    r0 = rel[:-1]
    cos_t, sin_t = np.cos(angular), np.sin(angular)
    rot = np.stack(
        [cos_t * r0[..., 0] - sin_t * r0[..., 1] - r0[..., 0],
         sin_t * r0[..., 0] + cos_t * r0[..., 1] - r0[..., 1]], axis=-1)
    safe_dist = np.where(dist[:-1] < DEGENERATE_EDGE_EPS, 1.0, dist[:-1])
    unit_r0 = r0 / safe_dist[..., None]
    explained = parent_delta + rot + radial[..., None] * unit_r0
    return {"radial": radial, "angular": angular, "degenerate": degenerate,
            "explained": explained}


def polar_rates(positions_t: np.ndarray, positions_t1: np.ndarray,
                graph: ProximityGraph) -> EdgePolarRates:
    """Radial and angular rate of the child-to-parent offset between two
    frames; coincident endpoints are flagged degenerate with zero rates."""
    stacked = np.stack([np.asarray(positions_t), np.asarray(positions_t1)])
    data = polar_edge_data(stacked, np.asarray(graph.neighbors))
    return EdgePolarRates(radial=data["radial"][0], angular=data["angular"][0],
                          degenerate=data["degenerate"][0])


def aggregate_polar(rates: EdgePolarRates, weights: EdgeWeights, graph: ProximityGraph,
                    deltas_t: np.ndarray, positions_t: np.ndarray) -> PolarRates:
    """Aggregate per-edge rates with the attention weights and reconstruct
    the Cartesian residual for one frame."""
    positions_t = np.asarray(positions_t, dtype=np.float64)
    deltas_t = np.asarray(deltas_t, dtype=np.float64)
    stacked = np.stack([positions_t, positions_t + deltas_t])
    data = polar_edge_data(stacked, np.asarray(graph.neighbors))
    w = weights.weights * weights.root_mask[:, None]
    radial_hat = np.einsum("nk,nk->n", w, data["radial"][0])
    angular_hat = np.einsum("nk,nk->n", w, data["angular"][0])
    residual = deltas_t - np.einsum("nk,nkd->nd", w, data["explained"][0])
    return PolarRates(radial=radial_hat, angular=angular_hat, cartesian_residual=residual)
