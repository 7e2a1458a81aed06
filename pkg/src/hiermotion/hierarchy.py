"""Discrete motion hierarchies: the parent-assignment matrix, Gumbel-Softmax
sampling with straight-through gradients, structural validation, and
descendant tracing."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, as_tensor, softmax_rows, with_value
from .motion import InvalidInputError, ProximityGraph


@dataclass(frozen=True)
class HierarchyMatrix:
    """Parent assignment over N elements: parents[i] is i's parent or None.

    The dense view H has H[i, j] = 1 exactly when j is the parent of i,
    so rows have at most one nonzero and roots have all-zero rows.
    """

    parents: tuple  # length N, entries int or None

    def __post_init__(self):
        cleaned = tuple(None if p is None else int(p) for p in self.parents)
        for i, p in enumerate(cleaned):
            if p is not None and not (0 <= p < len(cleaned)):
                raise InvalidInputError(f"parent of {i} out of range: {p}")
        object.__setattr__(self, "parents", cleaned)

    @property
    def n(self) -> int:
        return len(self.parents)

    def dense(self) -> np.ndarray:
        h = np.zeros((self.n, self.n))
        for i, p in enumerate(self.parents):
            if p is not None:
                h[i, p] = 1.0
        return h

    def roots(self) -> list:
        return [i for i, p in enumerate(self.parents) if p is None]

    def children(self, j: int) -> list:
        return [i for i, p in enumerate(self.parents) if p == j]

    @classmethod
    def from_dense(cls, h: np.ndarray) -> "HierarchyMatrix":
        h = np.asarray(h)
        parents = []
        for i in range(h.shape[0]):
            nz = np.flatnonzero(h[i])
            if len(nz) > 1:
                raise InvalidInputError(f"row {i} has {len(nz)} parents")
            parents.append(int(nz[0]) if len(nz) else None)
        return cls(tuple(parents))

    def to_json_dict(self) -> dict:
        return {"parents": [p for p in self.parents]}

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load_json(cls, path) -> "HierarchyMatrix":
        with open(path) as fh:
            doc = json.load(fh)
        return cls(tuple(doc["parents"]))

    def to_dot(self) -> str:
        lines = ["digraph hierarchy {"]
        for i in range(self.n):
            lines.append(f"  n{i};")
        for i, p in enumerate(self.parents):
            if p is not None:
                lines.append(f"  n{p} -> n{i};")
        lines.append("}")
        return "\n".join(lines)


@dataclass(frozen=True)
class ValidationReport:
    single_parent: bool
    no_self: bool
    acyclic: bool
    n_roots: int

    @property
    def ok(self) -> bool:
        return self.single_parent and self.no_self and self.acyclic and self.n_roots >= 1


def validate_hierarchy(h) -> ValidationReport:
    """Structural check: one parent per row, zero diagonal, no cycles,
    at least one root. Accepts a HierarchyMatrix or a dense 0/1 matrix;
    always returns a report, never raises."""
    if isinstance(h, HierarchyMatrix):
        dense = h.dense()
    else:
        dense = np.asarray(h)
    n = dense.shape[0]
    row_nnz = (dense != 0).sum(axis=1)
    single_parent = bool((row_nnz <= 1).all())
    no_self = bool((np.diag(dense) == 0).all())
    parents = [int(np.argmax(dense[i] != 0)) if row_nnz[i] else None for i in range(n)]
    for i in range(n):
        if parents[i] == i:
            parents[i] = None  # self-loop: already reported via no_self
    n_roots = sum(1 for p in parents if p is None)
    acyclic = True
    state = [0] * n  # 0 unvisited, 1 in progress, 2 done
    for start in range(n):
        if state[start]:
            continue
        path = []
        v = start
        while v is not None and state[v] == 0:
            state[v] = 1
            path.append(v)
            v = parents[v]
        if v is not None and state[v] == 1:
            acyclic = False
        for u in path:
            state[u] = 2
    return ValidationReport(single_parent, no_self, acyclic, n_roots)


def trace_descendants(h: HierarchyMatrix, root_set) -> set:
    """Transitive closure of child relations from root_set (inclusive)."""
    report = validate_hierarchy(h)
    if not report.acyclic:
        raise InvalidInputError("hierarchy contains a cycle")
    children = [[] for _ in range(h.n)]
    for i, p in enumerate(h.parents):
        if p is not None:
            children[p].append(i)
    out = set()
    stack = list(root_set)
    while stack:
        v = stack.pop()
        if v in out:
            continue
        out.add(v)
        stack.extend(children[v])
    return out


# -- sampling ---------------------------------------------------------------


@dataclass(frozen=True)
class SampledHierarchy:
    """One Gumbel-Softmax draw: a hard matrix for the forward pass and the
    soft row weights that carry gradients."""

    hard: HierarchyMatrix
    soft: np.ndarray  # (N, k) rows over each vertex's neighborhood
    temperature: float


def argmax_lowest_vertex(values: np.ndarray, vertex_ids: np.ndarray) -> int:
    """Position of the max entry; ties resolved to the lowest vertex id."""
    best = values.max()
    tied = np.flatnonzero(values >= best - 0.0)
    if len(tied) == 1:
        return int(tied[0])
    sel = tied[np.argmin(vertex_ids[tied])]
    return int(sel)


def perturbed_soft_weights(weights, noise: np.ndarray, tau: float) -> Tensor:
    """Gumbel-perturbed row softmax at temperature tau.

    The noise is added to the weights themselves, so the temperature
    controls how strongly the weights dominate the noise: sampling is
    near-uniform while tau is large and argmax-driven once it is small.
    """
    if tau <= 0:
        raise InvalidInputError("temperature must be > 0")
    w = as_tensor(weights)
    z = (w + noise) * (1.0 / tau)
    return softmax_rows(z)


def hard_from_soft(soft: np.ndarray, neighbors: np.ndarray, root_mask: np.ndarray) -> HierarchyMatrix:
    """Argmax each soft row into a parent choice; root rows stay empty."""
    parents = []
    for i in range(soft.shape[0]):
        if root_mask[i] == 0.0:
            parents.append(None)
        else:
            sel = argmax_lowest_vertex(soft[i], neighbors[i])
            parents.append(int(neighbors[i, sel]))
    return HierarchyMatrix(tuple(parents))


def straight_through_dense(soft_tensor: Tensor, hard: HierarchyMatrix,
                           neighbors: np.ndarray, root_mask: np.ndarray):
    """Dense (N, N) matrices for the decoder: the straight-through matrix
    (hard forward values, soft gradients) and the soft matrix itself."""
    from .autodiff import mul, scatter_rows

    n = hard.n
    masked = mul(soft_tensor, root_mask[:, None])
    soft_dense = scatter_rows(masked, neighbors, n)
    st = with_value(soft_dense, hard.dense())
    return st, soft_dense


def gumbel_sample(weights, tau: float, n_samples: int = 1, rng=None) -> list:
    """Draw hierarchy matrices from edge weights via straight-through
    Gumbel-Softmax. ``weights`` is an EdgeWeights (see encoder module).

    Returns a list of SampledHierarchy; identical seeds reproduce samples.
    """
    if tau <= 0:
        raise InvalidInputError("temperature must be > 0")
    if n_samples < 1:
        raise InvalidInputError("need at least one sample")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    w = weights.weights
    neighbors = weights.neighbors
    root_mask = weights.root_mask
    out = []
    for _ in range(n_samples):
        noise = rng.gumbel(size=w.shape)
        soft = perturbed_soft_weights(w, noise, tau).value
        hard = hard_from_soft(soft, neighbors, root_mask)
        out.append(SampledHierarchy(hard=hard, soft=soft, temperature=tau))
    return out


def ml_hierarchy(weights) -> HierarchyMatrix:
    """Maximum-likelihood hierarchy: each vertex takes its highest-weight
    parent candidate, ties to the lowest vertex index."""
    return hard_from_soft(weights.weights, weights.neighbors, weights.root_mask)
