"""Training losses: L1 reconstruction with a relative-velocity regularizer,
radial/angular rate penalties, and the Laplacian connectivity hinge."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .motion import InvalidInputError


@dataclass(frozen=True)
class LossWeights:
    """Coefficients balancing the loss terms; all must be >= 0."""

    lambda_delta: float = 0.5
    lambda_r: float = 0.0
    lambda_theta: float = 0.0
    lambda_lap: float = 0.0
    tau_c: float = 0.05

    def __post_init__(self):
        for name in ("lambda_delta", "lambda_r", "lambda_theta", "lambda_lap", "tau_c"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be >= 0")


def _maybe_value(x, tensor_inputs: bool):
    return x if tensor_inputs else x.value.item()


def base_loss(delta_hat_abs, delta_abs, delta_rel, lambda_delta: float):
    """L1 reconstruction error plus lambda times the L1 of the residuals.

    Accepts numpy arrays (returns a float) or autodiff Tensors (returns a
    Tensor for gradient flow). Shapes are (T, N, d) throughout.
    """
    tensor_inputs = isinstance(delta_hat_abs, ad.Tensor) or isinstance(delta_rel, ad.Tensor)
    dh = ad.as_tensor(delta_hat_abs)
    da = ad.as_tensor(delta_abs)
    dr = ad.as_tensor(delta_rel)
    if dh.value.shape != da.value.shape:
        raise InvalidInputError("delta_hat_abs and delta_abs shapes differ")
    total = ad.add(ad.abs_sum(ad.add(dh, ad.mul(da, -1.0))), ad.mul(ad.abs_sum(dr), lambda_delta))
    return _maybe_value(total, tensor_inputs)


def rotational_loss(delta_hat_abs, delta_abs, delta_rel, radial, angular,
                    h_soft, weights: LossWeights):
    """Base loss plus radial/angular rate penalties and the connectivity
    hinge on the (soft) symmetrized hierarchy."""
    tensor_inputs = isinstance(delta_hat_abs, ad.Tensor) or isinstance(h_soft, ad.Tensor)
    total = ad.as_tensor(base_loss(delta_hat_abs, delta_abs, delta_rel, weights.lambda_delta))
    if weights.lambda_r:
        total = ad.add(total, ad.mul(ad.abs_sum(ad.as_tensor(radial)), weights.lambda_r))
    if weights.lambda_theta:
        total = ad.add(total, ad.mul(ad.abs_sum(ad.as_tensor(angular)), weights.lambda_theta))
    if weights.lambda_lap:
        total = ad.add(total, ad.mul(connectivity_loss_tensor(ad.as_tensor(h_soft), weights.tau_c),
                                     weights.lambda_lap))
    return _maybe_value(total, tensor_inputs)


def symmetrized_adjacency(h) -> np.ndarray:
    """A = clamp(H + H^T, 0, 1): elementwise cap so duplicated mutual edges
    cannot exceed unit weight."""
    h = np.asarray(h, dtype=np.float64)
    return np.clip(h + h.T, 0.0, 1.0)


def algebraic_connectivity(h) -> tuple:
    """Second-smallest Laplacian eigenvalue (and its eigenvector) of the
    symmetrized hierarchy; positive exactly when the graph is connected."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 2:
        raise InvalidInputError("need a square matrix of size >= 2")
    adj = symmetrized_adjacency(h)
    lap = np.diag(adj.sum(axis=1)) - adj
    vals, vecs = np.linalg.eigh(lap)
    return float(vals[1]), vecs[:, 1]


def connectivity_hinge(lambda2: float, tau_c: float) -> float:
    """Penalty for low algebraic connectivity: max(0, tau_c - lambda2)."""
    if tau_c <= 0:
        raise InvalidInputError("tau_c must be > 0")
    return max(0.0, tau_c - lambda2)


def connectivity_loss_tensor(h_soft: ad.Tensor, tau_c: float) -> ad.Tensor:
    """Differentiable hinge on the algebraic connectivity of the soft
    sampled hierarchy; gradient flows through the Fiedler eigenvalue and
    is zero once the connectivity exceeds tau_c."""
    if tau_c <= 0:
        raise InvalidInputError("tau_c must be > 0")
    sym = ad.add(h_soft, ad.transpose2d(h_soft))
    adj = ad.clamp(sym, lo=0.0, hi=1.0)
    lam2 = ad.lambda2(adj)
    return ad.relu(ad.add(ad.mul(lam2, -1.0), tau_c))
