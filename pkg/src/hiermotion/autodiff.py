"""Minimal reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` wraps an ndarray and records a closure that propagates
adjoints to its parents. Gradients are accumulated by walking the graph
in reverse topological order. The primitive set is deliberately small:
exactly the operations the motion-hierarchy pipeline needs (broadcast
arithmetic, row softmax, edge gather/scatter, per-frame matrix products,
L1 sums and the algebraic-connectivity eigenvalue).
"""
from __future__ import annotations

import logging

import numpy as np

logger = logging.getLogger(__name__)

_node_counter = 0


def _next_name(op: str) -> str:
    global _node_counter
    _node_counter += 1
    return f"{op}#{_node_counter}"


class Tensor:
    """Node in the computation graph: a value, an adjoint buffer, and a
    backward closure that routes the adjoint to the node's parents."""

    __slots__ = ("value", "grad", "_parents", "_backward", "name")

    def __init__(self, value, parents=(), backward=None, op="const"):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = tuple(parents)
        self._backward = backward
        self.name = _next_name(op)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor({self.name}, shape={self.value.shape})"

    # -- graph traversal -------------------------------------------------

    def backward(self, seed=None, check_nan=False):
        """Accumulate gradients of this (scalar) node into the graph.

        check_nan: raise FloatingPointError naming the first node whose
        accumulated adjoint contains a NaN.
        """
        if seed is None:
            if self.value.ndim != 0:
                raise ValueError("backward() without a seed requires a scalar output")
            seed = np.ones_like(self.value)
        topo: list[Tensor] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        for node in topo:
            node.grad = np.zeros_like(node.value)
        self.grad = np.asarray(seed, dtype=np.float64)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)
            if check_nan and np.isnan(node.grad).any():
                raise FloatingPointError(f"NaN gradient at node {node.name}")

    # -- operator sugar ---------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def reshape(self, shape):
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x) -> Tensor:
    return Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum an adjoint down to the shape it was broadcast from."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- arithmetic ----------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_val = a.value + b.value

    def backward(g):
        a.grad += _unbroadcast(g, a.value.shape)
        b.grad += _unbroadcast(g, b.value.shape)

    return Tensor(out_val, (a, b), backward, op="add")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_val = a.value * b.value

    def backward(g):
        a.grad += _unbroadcast(g * b.value, a.value.shape)
        b.grad += _unbroadcast(g * a.value, b.value.shape)

    return Tensor(out_val, (a, b), backward, op="mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_val = a.value / b.value

    def backward(g):
        a.grad += _unbroadcast(g / b.value, a.value.shape)
        b.grad += _unbroadcast(-g * out_val / b.value, b.value.shape)

    return Tensor(out_val, (a, b), backward, op="div")


def exp(a) -> Tensor:
    a = as_tensor(a)
    out_val = np.exp(a.value)

    def backward(g):
        a.grad += g * out_val

    return Tensor(out_val, (a,), backward, op="exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    out_val = np.log(a.value)

    def backward(g):
        a.grad += g / a.value

    return Tensor(out_val, (a,), backward, op="log")


def leaky_relu(a, slope: float) -> Tensor:
    a = as_tensor(a)
    mask = np.where(a.value > 0.0, 1.0, slope)
    out_val = a.value * mask

    def backward(g):
        a.grad += g * mask

    return Tensor(out_val, (a,), backward, op="leaky_relu")


def clamp(a, lo=None, hi=None) -> Tensor:
    """Elementwise clamp; adjoints pass only where the input was in range."""
    a = as_tensor(a)
    out_val = np.clip(a.value, lo, hi)
    pass_mask = np.ones_like(a.value)
    if lo is not None:
        pass_mask = np.where(a.value < lo, 0.0, pass_mask)
    if hi is not None:
        pass_mask = np.where(a.value > hi, 0.0, pass_mask)

    def backward(g):
        a.grad += g * pass_mask

    return Tensor(out_val, (a,), backward, op="clamp")


def relu(a) -> Tensor:
    return clamp(a, lo=0.0)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    in_shape = a.value.shape
    out_val = a.value.reshape(shape)

    def backward(g):
        a.grad += g.reshape(in_shape)

    return Tensor(out_val, (a,), backward, op="reshape")


def transpose2d(a) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        a.grad += g.T

    return Tensor(a.value.T, (a,), backward, op="transpose")


def sum_axis(a, axis, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out_val = a.value.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        a.grad += np.broadcast_to(g, a.value.shape)

    return Tensor(out_val, (a,), backward, op="sum_axis")


def mean_axis(a, axis) -> Tensor:
    a = as_tensor(a)
    n = a.value.shape[axis]
    return mul(sum_axis(a, axis), 1.0 / n)


def abs_sum(a) -> Tensor:
    """Sum of absolute values; subgradient at zero is zero."""
    a = as_tensor(a)
    out_val = np.abs(a.value).sum()
    sign = np.sign(a.value)

    def backward(g):
        a.grad += g * sign

    return Tensor(out_val, (a,), backward, op="abs_sum")


def softmax_rows(a) -> Tensor:
    """Softmax over the last axis, computed with max subtraction."""
    a = as_tensor(a)
    shifted = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * p).sum(axis=-1, keepdims=True)
        a.grad += p * (g - dot)

    return Tensor(p, (a,), backward, op="softmax_rows")


def with_value(a, forward_value) -> Tensor:
    """Replace a node's forward value while keeping identity gradients.

    This is the straight-through construction: the output carries
    ``forward_value`` but behaves like ``a`` to the backward pass.
    """
    a = as_tensor(a)

    def backward(g):
        a.grad += g

    return Tensor(forward_value, (a,), backward, op="straight_through")


# -- structured / fused primitives ---------------------------------------


def gather_nodes(a, idx: np.ndarray) -> Tensor:
    """Index the node axis: (T, N, ...) -> (T, N, k, ...) via idx (N, k)."""
    a = as_tensor(a)
    out_val = a.value[:, idx]

    def backward(g):
        tdim = a.value.shape[0]
        cols = idx.reshape(-1)
        g2 = g.reshape((tdim, cols.size) + a.value.shape[2:])
        acc = np.zeros((a.value.shape[1],) + (tdim,) + a.value.shape[2:])
        np.add.at(acc, cols, np.moveaxis(g2, 0, 1))
        a.grad += np.moveaxis(acc, 1, 0)

    return Tensor(out_val, (a,), backward, op="gather_nodes")


def weighted_edge_sum(w, data: np.ndarray) -> Tensor:
    """Contract per-edge weights (N, k) with constant edge data.

    data has shape (T, N, k) or (T, N, k, d); returns (T, N) or (T, N, d).
    Only the weights receive gradients: edge data is observed, not learned.
    """
    w = as_tensor(w)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 3:
        out_val = np.einsum("nk,tnk->tn", w.value, data)

        def backward(g):
            w.grad += np.einsum("tn,tnk->nk", g, data)

    else:
        out_val = np.einsum("nk,tnkd->tnd", w.value, data)

        def backward(g):
            w.grad += np.einsum("tnd,tnkd->nk", g, data)

    return Tensor(out_val, (w,), backward, op="weighted_edge_sum")


def scatter_rows(w, idx: np.ndarray, n: int) -> Tensor:
    """Spread row weights (N, k) into a dense (n, n) matrix via idx (N, k)."""
    w = as_tensor(w)
    rows = np.repeat(np.arange(idx.shape[0]), idx.shape[1])
    cols = idx.reshape(-1)
    out_val = np.zeros((n, n))
    out_val[rows, cols] = w.value.reshape(-1)

    def backward(g):
        w.grad += g[rows, cols].reshape(w.value.shape)

    return Tensor(out_val, (w,), backward, op="scatter_rows")


def frame_matmul(m, x) -> Tensor:
    """Apply an (N, N) matrix to every frame of (T, N, d)."""
    m, x = as_tensor(m), as_tensor(x)
    out_val = np.einsum("ij,tjd->tid", m.value, x.value)

    def backward(g):
        m.grad += np.einsum("tid,tjd->ij", g, x.value)
        x.grad += np.einsum("ij,tid->tjd", m.value, g)

    return Tensor(out_val, (m, x), backward, op="frame_matmul")


def project_frames(w, data: np.ndarray) -> Tensor:
    """Linear projection of per-frame features: (h, d) x (T, N, d) -> (T, N, h)."""
    w = as_tensor(w)
    data = np.asarray(data, dtype=np.float64)
    out_val = np.einsum("hd,tnd->tnh", w.value, data)

    def backward(g):
        w.grad += np.einsum("tnh,tnd->hd", g, data)

    return Tensor(out_val, (w,), backward, op="project_frames")


def contract_hidden(x, a) -> Tensor:
    """Dot the hidden axis with a vector: (T, N, h) x (h,) -> (T, N)."""
    x, a = as_tensor(x), as_tensor(a)
    out_val = np.einsum("tnh,h->tn", x.value, a.value)

    def backward(g):
        x.grad += np.einsum("tn,h->tnh", g, a.value)
        a.grad += np.einsum("tn,tnh->h", g, x.value)

    return Tensor(out_val, (x, a), backward, op="contract_hidden")


_EIG_GAP_TOL = 1e-12


def lambda2(a) -> Tensor:
    """Second-smallest Laplacian eigenvalue of a symmetric adjacency.

    Builds L = diag(A 1) - A internally and differentiates through the
    eigenvalue with the Fiedler-vector rank-one formula. When the
    eigenvalue is (numerically) repeated the subgradient is ill-posed:
    the backward pass contributes zero and logs a warning.
    """
    a = as_tensor(a)
    adj = a.value
    lap = np.diag(adj.sum(axis=1)) - adj
    lap = 0.5 * (lap + lap.T)
    vals, vecs = np.linalg.eigh(lap)
    lam2 = vals[1]
    fiedler = vecs[:, 1]
    gap = min(lam2 - vals[0], (vals[2] - lam2) if len(vals) > 2 else np.inf)
    degenerate = gap < _EIG_GAP_TOL

    def backward(g):
        if degenerate:
            logger.warning("repeated lambda_2 eigenvalue; connectivity gradient skipped")
            return
        a.grad += g * ((fiedler**2)[:, None] - np.outer(fiedler, fiedler))

    return Tensor(lam2, (a,), backward, op="lambda2")
