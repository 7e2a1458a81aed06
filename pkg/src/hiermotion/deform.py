"""Structure-aware point-set deformation: descendants of a selected element
become rigidly transformed handles, everything else follows an
as-rigid-as-possible solve on the proximity graph."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .hierarchy import HierarchyMatrix, trace_descendants
from .motion import InvalidInputError, ProximityGraph

log = logging.getLogger(__name__)


def rotation_from_axis_angle(axis, angle: float, dim: int) -> np.ndarray:
    """Proper rotation matrix: Rodrigues for d=3, plane rotation for d=2."""
    if dim == 2:
        c, s = np.cos(angle), np.sin(angle)
        return np.array([[c, -s], [s, c]])
    axis = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(axis)
    if norm < 1e-12:
        if abs(angle) > 0:
            raise InvalidInputError("rotation axis must be nonzero for a nonzero angle")
        return np.eye(3)
    k = axis / norm
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * (kx @ kx)


@dataclass(frozen=True)
class DeformRequest:
    """A rigid motion applied to one element and all its descendants."""

    handle_element: int
    rest_positions: np.ndarray  # (N, d)
    hierarchy: HierarchyMatrix
    graph: ProximityGraph
    translation: np.ndarray | None = None
    rotation_angle: float = 0.0
    rotation_axis: np.ndarray | None = None

    def __post_init__(self):
        rest = np.asarray(self.rest_positions, dtype=np.float64)
        object.__setattr__(self, "rest_positions", rest)
        d = rest.shape[1]
        tr = np.zeros(d) if self.translation is None else np.asarray(self.translation, dtype=np.float64)
        if tr.shape != (d,):
            raise InvalidInputError(f"translation must have length {d}")
        object.__setattr__(self, "translation", tr)
        if not (0 <= self.handle_element < rest.shape[0]):
            raise InvalidInputError(f"handle element {self.handle_element} out of range")

    @property
    def dim(self) -> int:
        return self.rest_positions.shape[1]

    def rotation_matrix(self) -> np.ndarray:
        return rotation_from_axis_angle(self.rotation_axis, self.rotation_angle, self.dim)

    def handle_set(self) -> list:
        return sorted(trace_descendants(self.hierarchy, {self.handle_element}))

    def handle_targets(self) -> np.ndarray:
        """Handles move rigidly: rotation about their rest centroid, then
        translation."""
        handles = self.handle_set()
        rest = self.rest_positions[handles]
        center = rest.mean(axis=0)
        return (rest - center) @ self.rotation_matrix().T + center + self.translation


@dataclass
class DeformResult:
    new_positions: np.ndarray  # (N, d)
    rotations: np.ndarray  # (N, d, d)
    energy_trace: list = field(default_factory=list)


def fit_rotation(rest_edges: np.ndarray, cur_edges: np.ndarray) -> np.ndarray:
    """Best proper rotation taking rest edge vectors onto current ones."""
    s = rest_edges.T @ cur_edges
    u, _, vt = np.linalg.svd(s)
    r = vt.T @ u.T
    if np.linalg.det(r) < 0:
        vt[-1, :] *= -1.0
        r = vt.T @ u.T
    return r


def arap_energy(rest: np.ndarray, cur: np.ndarray, rotations: np.ndarray,
                neighbors: np.ndarray) -> float:
    """Squared deviation of every directed neighbor edge from the rigid
    motion of its owning vertex (uniform edge weights)."""
    rest_edges = rest[:, None, :] - rest[neighbors]
    cur_edges = cur[:, None, :] - cur[neighbors]
    rotated = np.einsum("nij,nkj->nki", rotations, rest_edges)
    return float(((cur_edges - rotated) ** 2).sum())


def _check_solvable(n: int, neighbors: np.ndarray, handles: list) -> None:
    if not handles:
        raise InvalidInputError("deformation needs at least one handle")
    adj = [set() for _ in range(n)]
    for i in range(n):
        for j in neighbors[i]:
            adj[i].add(int(j))
            adj[int(j)].add(i)
    seen = set(handles)
    stack = list(handles)
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    stranded = sorted(set(range(n)) - seen)
    if stranded:
        raise InvalidInputError(
            f"free vertices {stranded} are disconnected from every handle; the solve is singular")


def arap_solve(request: DeformRequest, n_iters: int = 50, tol: float = 1e-8) -> DeformResult:
    """Alternating local-global minimization of the rigidity energy.

    Local step: per-vertex best rotation from the SVD of its edge
    covariance (determinant-corrected). Global step: exact solve of the
    quadratic in the free positions with handle rows constrained.
    Terminates when the energy improves by less than tol.
    """
    rest = request.rest_positions
    n, d = rest.shape
    neighbors = np.asarray(request.graph.neighbors)
    handles = request.handle_set()
    _check_solvable(n, neighbors, handles)
    targets = request.handle_targets()

    free = [i for i in range(n) if i not in set(handles)]
    # symmetrized edge multiplicities give the quadratic form of the energy
    weight = np.zeros((n, n))
    for i in range(n):
        for j in neighbors[i]:
            weight[i, int(j)] += 1.0
            weight[int(j), i] += 1.0
    lap = np.diag(weight.sum(axis=1)) - weight

    cur = rest.copy()
    cur[handles] = targets
    rotations = np.tile(np.eye(d), (n, 1, 1))
    rest_edges = rest[:, None, :] - rest[neighbors]  # (N, k, d)

    trace = []
    prev_energy = np.inf
    for _ in range(n_iters):
        cur_edges = cur[:, None, :] - cur[neighbors]
        for i in range(n):
            rotations[i] = fit_rotation(rest_edges[i], cur_edges[i])
        if free:
            b = np.zeros((n, d))
            rotated = np.einsum("nij,nkj->nki", rotations, rest_edges)  # (N, k, d)
            for i in range(n):
                for col, j in enumerate(neighbors[i]):
                    b[i] += rotated[i, col]
                    b[int(j)] -= rotated[i, col]
            rhs = b[free] - lap[np.ix_(free, handles)] @ targets
            try:
                sol = np.linalg.solve(lap[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError as e:
                raise InvalidInputError(f"singular deformation system: {e}") from e
            cur[free] = sol
        energy = arap_energy(rest, cur, rotations, neighbors)
        trace.append(energy)
        if abs(prev_energy - energy) < tol:
            break
        prev_energy = energy
    return DeformResult(new_positions=cur, rotations=rotations, energy_trace=trace)


# -- element attitudes -------------------------------------------------------


def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product, (w, x, y, z) convention."""
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_from_matrix(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) of a proper 3x3 rotation matrix."""
    t = np.trace(r)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array([0.25 * s, (r[2, 1] - r[1, 2]) / s,
                      (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(1.0 + r[i, i] - r[j, j] - r[k, k], 0.0)) * 2
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    return q / np.linalg.norm(q)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def apply_rigid_to_elements(result: DeformResult, attitudes: np.ndarray) -> tuple:
    """Carry per-element orientation state through a deformation: positions
    take the solved values, quaternions are left-composed with each
    element's fitted rotation. Non-unit inputs are renormalized with a
    warning."""
    quats = np.asarray(attitudes, dtype=np.float64).copy()
    if quats.shape != (result.new_positions.shape[0], 4):
        raise InvalidInputError("attitudes must be (N, 4) quaternions")
    norms = np.linalg.norm(quats, axis=1)
    off = np.abs(norms - 1.0) > 1e-6
    if off.any():
        log.warning("renormalizing %d non-unit quaternions", int(off.sum()))
    quats = quats / norms[:, None]
    out = np.empty_like(quats)
    for i in range(quats.shape[0]):
        q_rot = quat_from_matrix(result.rotations[i])
        q = quat_multiply(q_rot, quats[i])
        out[i] = q / np.linalg.norm(q)
    return result.new_positions.copy(), out


def write_ply(path, positions: np.ndarray) -> None:
    """ASCII point-cloud PLY; 2-D inputs are padded with z = 0."""
    pos = np.asarray(positions, dtype=np.float64)
    if pos.shape[1] == 2:
        pos = np.hstack([pos, np.zeros((pos.shape[0], 1))])
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {pos.shape[0]}\n")
        fh.write("property float x\nproperty float y\nproperty float z\nend_header\n")
        for p in pos:
            fh.write(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
