"""Absolute-velocity reconstruction: accumulate relative velocities along
parent chains with a truncated matrix power series."""
from __future__ import annotations

import numpy as np

from .autodiff import Tensor, add, as_tensor, frame_matmul
from .hierarchy import HierarchyMatrix
from .motion import InvalidInputError

DEFAULT_EPS = 1e-10


def _as_dense(h) -> np.ndarray:
    if isinstance(h, HierarchyMatrix):
        return h.dense()
    return np.asarray(h, dtype=np.float64)


def neumann_reconstruct_tensor(h: Tensor, delta: Tensor, l_max: int,
                               eps: float = DEFAULT_EPS) -> Tensor:
    """Truncated power-series reconstruction on the autodiff tape.

    delta is (T, N, d). Terms are added until the depth cap or until a
    term's Frobenius norm (of its forward value) drops below eps, so a
    straight-through matrix with nilpotent forward values stops at the
    tree depth while cyclic samples simply truncate.
    """
    acc = delta
    term = delta
    for _ in range(l_max):
        term = frame_matmul(h, term)
        if np.linalg.norm(term.value) < eps:
            break
        acc = add(acc, term)
    return acc


def neumann_reconstruct(h, delta: np.ndarray, l_max: int | None = None,
                        eps: float = DEFAULT_EPS) -> np.ndarray:
    """Reconstruct absolute velocities from relative ones along a hierarchy.

    h: HierarchyMatrix or (N, N) array (hard 0/1 or a soft matrix).
    delta: (N, d) or (T, N, d). The series runs to l_max (default N) with
    early stopping once a term's norm falls below eps.
    """
    dense = _as_dense(h)
    n = dense.shape[0]
    l_max = n if l_max is None else l_max
    if l_max > n:
        raise InvalidInputError(f"l_max must be <= N={n}")
    if eps <= 0:
        raise InvalidInputError("eps must be > 0")
    delta = np.asarray(delta, dtype=np.float64)
    squeeze = delta.ndim == 2
    batched = delta[None] if squeeze else delta
    out = neumann_reconstruct_tensor(as_tensor(dense), as_tensor(batched), l_max, eps).value
    return out[0] if squeeze else out


def decompose_check(h, delta_abs: np.ndarray) -> np.ndarray:
    """Residual velocities under a hierarchy: what each element moves
    beyond its parent. Round-trips with neumann_reconstruct."""
    dense = _as_dense(h)
    delta_abs = np.asarray(delta_abs, dtype=np.float64)
    squeeze = delta_abs.ndim == 2
    batched = delta_abs[None] if squeeze else delta_abs
    out = batched - np.einsum("ij,tjd->tid", dense, batched)
    return out[0] if squeeze else out
