"""Core data types: trajectories, velocity fields, and the proximity graph.

All types are immutable after construction; the operations here are pure
functions, safe to share across concurrent training runs.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class DataFormatError(ValueError):
    """Raised when an on-disk dataset cannot be parsed."""


@dataclass(frozen=True)
class Trajectory:
    """Observed positions of N motion elements over T+1 frames in d dims."""

    positions: np.ndarray  # (T+1, N, d)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 3:
            raise InvalidInputError(f"positions must be (T+1, N, d); got shape {pos.shape}")
        if not np.isfinite(pos).all():
            raise InvalidInputError("positions contain non-finite entries")
        if pos.shape[0] < 2:
            raise InvalidInputError("need at least 2 frames")
        if pos.shape[1] < 2:
            raise InvalidInputError("need at least 2 motion elements")
        if pos.shape[2] not in (1, 2, 3):
            raise InvalidInputError(f"dim must be 1, 2 or 3; got {pos.shape[2]}")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n_frames(self) -> int:
        return self.positions.shape[0]

    @property
    def n_elements(self) -> int:
        return self.positions.shape[1]

    @property
    def dim(self) -> int:
        return self.positions.shape[2]


@dataclass(frozen=True)
class VelocityField:
    """Per-frame absolute position deltas, shape (T, N, d)."""

    deltas: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.deltas, dtype=np.float64)
        d.setflags(write=False)
        object.__setattr__(self, "deltas", d)

    @property
    def n_frames(self) -> int:
        return self.deltas.shape[0]


@dataclass(frozen=True)
class ProximityGraph:
    """Directed k-NN candidate-parent graph over motion elements.

    neighbors[i] lists the k nearest neighbors of vertex i, nearest first
    (distance ties broken by lower vertex index). An edge (i, j) means
    "j is a parent candidate of i". Vertices listed in ``roots`` keep their
    neighborhoods but are treated as parentless by the learning pipeline.
    """

    n_vertices: int
    k: int
    neighbors: np.ndarray  # (N, k) int
    roots: tuple = field(default=())

    def __post_init__(self):
        nbr = np.asarray(self.neighbors, dtype=np.int64)
        nbr.setflags(write=False)
        object.__setattr__(self, "neighbors", nbr)
        object.__setattr__(self, "roots", tuple(sorted(set(self.roots))))

    @property
    def edges(self) -> list:
        """All directed (child, parent-candidate) pairs."""
        return [(i, int(j)) for i in range(self.n_vertices) for j in self.neighbors[i]]

    def neighborhood(self, i: int) -> np.ndarray:
        return self.neighbors[i]

    def with_roots(self, roots) -> "ProximityGraph":
        return ProximityGraph(self.n_vertices, self.k, self.neighbors, tuple(roots))

    def root_mask(self) -> np.ndarray:
        """(N,) float mask: 0 for root vertices, 1 elsewhere."""
        mask = np.ones(self.n_vertices)
        for r in self.roots:
            mask[r] = 0.0
        return mask


def compute_deltas(traj: Trajectory) -> VelocityField:
    """Frame-to-frame differences of the observed positions."""
    if traj.n_frames < 2:
        raise InvalidInputError("need at least 2 frames to difference")
    return VelocityField(np.diff(traj.positions, axis=0))


def build_knn_graph(ref_positions: np.ndarray, k: int) -> ProximityGraph:
    """Euclidean k-NN neighborhoods from a reference frame's positions.

    k >= N is clamped to N-1 with a warning. Neighbor order is by
    distance, ties by lower vertex index, so results are deterministic.
    """
    pos = np.asarray(ref_positions, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[0] < 2:
        raise InvalidInputError("ref_positions must be (N, d) with N >= 2")
    n = pos.shape[0]
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if k >= n:
        log.warning("k=%d >= N=%d; clamping to %d", k, n, n - 1)
        k = n - 1
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    np.fill_diagonal(dist, np.inf)
    idx = np.arange(n)
    neighbors = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        order = np.lexsort((idx, dist[i]))
        neighbors[i] = order[:k]
    return ProximityGraph(n_vertices=n, k=k, neighbors=neighbors)


def default_k(n: int) -> int:
    """Complete candidate set at benchmark scale; caller overrides above it."""
    return n - 1 if n <= 16 else min(8, n - 1)


# -- trajectory I/O --------------------------------------------------------


def trajectory_to_json_dict(traj: Trajectory, ground_truth: np.ndarray | None = None,
                            root: int | None = None, motion_classes: list | None = None) -> dict:
    doc = {"dim": traj.dim, "positions": traj.positions.tolist()}
    if ground_truth is not None:
        doc["ground_truth_hierarchy"] = np.asarray(ground_truth, dtype=int).tolist()
    if root is not None:
        doc["root"] = int(root)
    if motion_classes is not None:
        doc["motion_classes"] = list(motion_classes)
    return doc


def save_trajectory_json(path, traj: Trajectory, **extras) -> None:
    with open(path, "w") as fh:
        json.dump(trajectory_to_json_dict(traj, **extras), fh)


def load_trajectory_json(path) -> dict:
    """Load a trajectory document.

    Returns a dict with keys: trajectory (Trajectory), ground_truth
    ((N, N) int array or None), root (int or None), motion_classes
    (list of str or None).
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{path}: invalid JSON ({e})") from e
    try:
        dim = int(doc["dim"])
        pos = np.asarray(doc["positions"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as e:
        raise DataFormatError(f"{path}: missing or malformed field ({e})") from e
    if pos.ndim != 3 or pos.shape[2] != dim:
        raise DataFormatError(f"{path}: positions shape {pos.shape} does not match dim={dim}")
    gt = doc.get("ground_truth_hierarchy")
    out = {
        "trajectory": Trajectory(pos),
        "ground_truth": None if gt is None else np.asarray(gt, dtype=int),
        "root": doc.get("root"),
        "motion_classes": doc.get("motion_classes"),
    }
    return out


def save_trajectory_csv(path, traj: Trajectory) -> None:
    cols = ["t", "node_id"] + ["x", "y", "z"][: traj.dim]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for t in range(traj.n_frames):
            for i in range(traj.n_elements):
                writer.writerow([t, i] + [repr(float(v)) for v in traj.positions[t, i]])


def load_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["t", "node_id"]:
            raise DataFormatError(f"{path}: expected columns (t, node_id, x[, y[, z]])")
        dim = len(header) - 2
        rows = {}
        for lineno, row in enumerate(reader, start=2):
            try:
                t, i = int(row[0]), int(row[1])
                rows[(t, i)] = [float(v) for v in row[2 : 2 + dim]]
            except (ValueError, IndexError) as e:
                raise DataFormatError(f"{path}:{lineno}: bad row ({e})") from e
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    n_frames = max(t for t, _ in rows) + 1
    n_nodes = max(i for _, i in rows) + 1
    pos = np.zeros((n_frames, n_nodes, dim))
    for (t, i), xyz in rows.items():
        pos[t, i] = xyz
    return Trajectory(pos)
