"""Training for the hierarchy learner.

The default run anneals a deterministic relaxation: per-edge weights are a
temperature-sharpened softmax of attention-plus-bias logits, the decoder
consumes the dense weight matrix, and gradients are exact and noise-free.
The temperature schedule ends in a zero-temperature phase that polishes
the discrete parent assignment with local moves (reattach, exchange, role
swap, and loss-neutral flattening) under the same objective. A
straight-through Gumbel sampling mode is available as an alternative
gradient path.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .decoder import neumann_reconstruct_tensor
from .encoder import (WEIGHT_FLOOR, EdgeWeights, ModelParams, init_params,
                      neighborhood_softmax, polar_edge_data, time_averaged_logits)
from .hierarchy import (HierarchyMatrix, hard_from_soft, ml_hierarchy,
                        perturbed_soft_weights)
from .motion import (InvalidInputError, ProximityGraph, Trajectory,
                     build_knn_graph, compute_deltas, default_k)
from .objective import LossWeights, algebraic_connectivity, connectivity_loss_tensor

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e8
DEFAULT_TRAIN_DEPTH = 4  # decoder truncation during training: benchmark trees are shallow


class NumericalError(RuntimeError):
    """Raised when training produces NaN gradients or diverges."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    lr: float = 0.05
    tau_start: float = 1.5
    tau_end: float = 0.3
    anneal: str = "linear"
    seed: int = 0
    loss_weights: LossWeights = field(default_factory=LossWeights)
    k: int | None = None
    s_samples: int = 1
    rotational: bool = False
    hidden_dim: int | None = None
    l_max: int | None = None
    mode: str = "relaxed"  # "relaxed" (deterministic) or "sampled" (straight-through)
    refine_rounds: int = 6
    refine_tol: float = 0.02

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInputError("epochs must be >= 1")
        if self.lr <= 0:
            raise InvalidInputError("lr must be > 0")
        if not (self.tau_start >= self.tau_end > 0):
            raise InvalidInputError("need tau_start >= tau_end > 0")
        if self.s_samples < 1:
            raise InvalidInputError("s_samples must be >= 1")
        if self.anneal not in ("linear",):
            raise InvalidInputError(f"unknown anneal schedule: {self.anneal}")
        if self.mode not in ("relaxed", "sampled"):
            raise InvalidInputError(f"unknown training mode: {self.mode}")


def anneal_tau(epoch: int, config: TrainConfig) -> float:
    """Temperature at a given epoch: linear from tau_start to tau_end with
    exact endpoints."""
    if not (0 <= epoch < config.epochs):
        raise InvalidInputError("epoch out of range")
    denom = max(config.epochs - 1, 1)
    frac = epoch / denom
    return config.tau_start + (config.tau_end - config.tau_start) * frac


class Adam:
    """Adam over a list of parameter tensors (reads .grad after backward)."""

    def __init__(self, params: list, lr: float = 0.05, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g**2
            m_hat = self.m[i] / (1 - self.b1**self.t)
            v_hat = self.v[i] / (1 - self.b2**self.t)
            p.value = p.value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def backward(loss: ad.Tensor, params: dict) -> dict:
    """Reverse-mode gradients of a recorded loss for the given parameter
    tensors; aborts with a diagnostic naming the first NaN node."""
    try:
        loss.backward(check_nan=True)
    except FloatingPointError as e:
        raise NumericalError(str(e)) from e
    return {name: np.array(t.grad) for name, t in params.items()}


# -- pipeline ---------------------------------------------------------------


class PipelineContext:
    """Constants shared by every epoch of one run: velocities, the candidate
    graph, gathered neighbor data, and (in rotational mode) per-edge polar
    quantities."""

    def __init__(self, traj: Trajectory, graph: ProximityGraph,
                 loss_weights: LossWeights, rotational: bool, l_max: int | None):
        self.graph = graph
        self.neighbors = np.asarray(graph.neighbors)
        self.root_mask = graph.root_mask()
        self.n = graph.n_vertices
        self.deltas = compute_deltas(traj).deltas  # (T, N, d)
        self.deltas_nbr = self.deltas[:, self.neighbors, :]  # (T, N, k, d)
        self.loss_weights = loss_weights
        self.rotational = rotational
        self.l_max = min(self.n, DEFAULT_TRAIN_DEPTH) if l_max is None else min(l_max, self.n)
        # column lookup: col_of[i, j] = column of vertex j in row i (or -1)
        self.col_of = np.full((self.n, self.n), -1, dtype=np.int64)
        for i in range(self.n):
            for c, j in enumerate(self.neighbors[i]):
                self.col_of[i, int(j)] = c
        if rotational:
            if traj.dim != 2:
                raise InvalidInputError("rotational mode requires d = 2")
            polar = polar_edge_data(traj.positions, self.neighbors)
            self.radial = polar["radial"]
            self.angular = polar["angular"]
            self.explained = polar["explained"]
        else:
            self.radial = self.angular = self.explained = None


def make_param_tensors(params: ModelParams) -> dict:
    h = params.hidden_dim
    return {
        "attn_child": ad.Tensor(params.attn_vector[:h]),
        "attn_parent": ad.Tensor(params.attn_vector[h:]),
        "proj": ad.Tensor(params.proj_matrix),
        "edge_bias": ad.Tensor(params.edge_bias),
    }


def params_from_tensors(tensors: dict, leaky_slope: float) -> ModelParams:
    return ModelParams(
        attn_vector=np.concatenate([tensors["attn_child"].value, tensors["attn_parent"].value]),
        proj_matrix=np.array(tensors["proj"].value),
        edge_bias=np.array(tensors["edge_bias"].value),
        leaky_slope=leaky_slope,
    )


def edge_logit_tensor(ctx: PipelineContext, pt: dict, leaky_slope: float) -> ad.Tensor:
    """Per-edge logits on the tape: attention term averaged over frames plus
    the free edge bias."""
    proj = ad.project_frames(pt["proj"], ctx.deltas)  # (T, N, h)
    s_child = ad.contract_hidden(proj, pt["attn_child"])  # (T, N)
    s_parent = ad.contract_hidden(proj, pt["attn_parent"])
    gathered = ad.gather_nodes(s_parent, ctx.neighbors)  # (T, N, k)
    t_frames, n = s_child.value.shape
    raw = ad.add(ad.reshape(s_child, (t_frames, n, 1)), gathered)
    att = ad.leaky_relu(raw, leaky_slope)
    return ad.add(ad.mean_axis(att, 0), pt["edge_bias"])  # (N, k)


def floor_softmax_rows(logits: ad.Tensor) -> ad.Tensor:
    p = ad.softmax_rows(logits)
    p = ad.clamp(p, lo=WEIGHT_FLOOR)
    return ad.div(p, ad.sum_axis(p, -1, keepdims=True))


def _loss_terms(ctx: PipelineContext, w_masked: ad.Tensor, decode_matrix: ad.Tensor,
                soft_for_connectivity: ad.Tensor | None, eps: float) -> tuple:
    """Shared loss assembly given masked weights and a decode matrix."""
    lw = ctx.loss_weights
    rel_cart = ad.add(ad.constant(ctx.deltas),
                      ad.mul(ad.weighted_edge_sum(w_masked, ctx.deltas_nbr), -1.0))
    if ctx.rotational:
        rel_reg = ad.add(ad.constant(ctx.deltas),
                         ad.mul(ad.weighted_edge_sum(w_masked, ctx.explained), -1.0))
        radial_hat = ad.weighted_edge_sum(w_masked, ctx.radial)  # (T, N)
        angular_hat = ad.weighted_edge_sum(w_masked, ctx.angular)
    else:
        rel_reg = rel_cart
        radial_hat = angular_hat = None

    delta_hat = neumann_reconstruct_tensor(decode_matrix, rel_cart, ctx.l_max, eps)
    recon = ad.abs_sum(ad.add(delta_hat, ad.constant(-ctx.deltas)))
    reg_delta = ad.mul(ad.abs_sum(rel_reg), lw.lambda_delta)
    loss = ad.add(recon, reg_delta)
    parts = {"recon": float(recon.value), "reg_delta": float(reg_delta.value),
             "reg_r": 0.0, "reg_theta": 0.0, "reg_lap": 0.0}
    if ctx.rotational and lw.lambda_r:
        reg_r = ad.mul(ad.abs_sum(radial_hat), lw.lambda_r)
        loss = ad.add(loss, reg_r)
        parts["reg_r"] = float(reg_r.value)
    if ctx.rotational and lw.lambda_theta:
        reg_t = ad.mul(ad.abs_sum(angular_hat), lw.lambda_theta)
        loss = ad.add(loss, reg_t)
        parts["reg_theta"] = float(reg_t.value)
    if lw.lambda_lap and soft_for_connectivity is not None:
        reg_lap = ad.mul(connectivity_loss_tensor(soft_for_connectivity, lw.tau_c), lw.lambda_lap)
        loss = ad.add(loss, reg_lap)
        parts["reg_lap"] = float(reg_lap.value)
    return loss, parts


def relaxed_loss(ctx: PipelineContext, pt: dict, tau: float,
                 leaky_slope: float = 0.2, eps: float = 1e-12) -> tuple:
    """Deterministic annealed objective: the decoder consumes the dense
    temperature-sharpened weight matrix itself."""
    logits = edge_logit_tensor(ctx, pt, leaky_slope)
    w = floor_softmax_rows(ad.mul(logits, 1.0 / tau))
    w_masked = ad.mul(w, ctx.root_mask[:, None])
    w_dense = ad.scatter_rows(w_masked, ctx.neighbors, ctx.n)
    loss, parts = _loss_terms(ctx, w_masked, w_dense,
                              w_dense if ctx.loss_weights.lambda_lap else None, eps)
    return loss, {"weights": w, "parts": parts}


def pipeline_loss(ctx: PipelineContext, pt: dict, tau: float, noise_list: list,
                  leaky_slope: float = 0.2, hard: bool = True,
                  eps: float = 1e-10) -> tuple:
    """Sampled objective: straight-through Gumbel matrices in the decoder
    (hard forward values, soft gradients); hard=False decodes through the
    soft sample itself, which keeps the whole map differentiable for
    gradient checks."""
    logits = edge_logit_tensor(ctx, pt, leaky_slope)
    w = floor_softmax_rows(logits)
    w_masked = ad.mul(w, ctx.root_mask[:, None])

    losses = []
    parts_acc = None
    hierarchies = []
    for noise in noise_list:
        soft = perturbed_soft_weights(w, noise, tau)  # (N, k)
        hard_h = hard_from_soft(soft.value, ctx.neighbors, ctx.root_mask)
        hierarchies.append(hard_h)
        soft_masked = ad.mul(soft, ctx.root_mask[:, None])
        soft_dense = ad.scatter_rows(soft_masked, ctx.neighbors, ctx.n)
        used = ad.with_value(soft_dense, hard_h.dense()) if hard else soft_dense
        loss_s, parts = _loss_terms(ctx, w_masked, used,
                                    soft_dense if ctx.loss_weights.lambda_lap else None, eps)
        losses.append(loss_s)
        if parts_acc is None:
            parts_acc = {k: v / len(noise_list) for k, v in parts.items()}
        else:
            for k, v in parts.items():
                parts_acc[k] += v / len(noise_list)
    total = losses[0]
    for t in losses[1:]:
        total = ad.add(total, t)
    total = ad.mul(total, 1.0 / len(noise_list))
    return total, {"weights": w, "parts": parts_acc, "hierarchies": hierarchies}


# -- discrete refinement ------------------------------------------------------


def discrete_loss(ctx: PipelineContext, parents) -> float:
    """The training objective evaluated at a hard parent assignment: the
    decomposition is taken against the assigned parents, reconstruction runs
    through the truncated series (so cycles and over-deep chains pay), and
    the regularizers read the assigned edges."""
    lw = ctx.loss_weights
    n = ctx.n
    deltas = ctx.deltas
    h = np.zeros((n, n))
    rows = []
    cols = []
    for i, p in enumerate(parents):
        if p is not None:
            h[i, p] = 1.0
            rows.append(i)
            cols.append(ctx.col_of[i, p])
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)

    rel = deltas - np.einsum("ij,tjd->tid", h, deltas)
    acc = rel.copy()
    term = rel
    for _ in range(ctx.l_max):
        term = np.einsum("ij,tjd->tid", h, term)
        if np.abs(term).max() < 1e-12:
            break
        acc = acc + term
    total = np.abs(acc - deltas).sum()

    if ctx.rotational:
        rel_reg = deltas.copy()
        rel_reg[:, rows] -= ctx.explained[:, rows, cols]
        total += lw.lambda_delta * np.abs(rel_reg).sum()
        if lw.lambda_r:
            total += lw.lambda_r * np.abs(ctx.radial[:, rows, cols]).sum()
        if lw.lambda_theta:
            total += lw.lambda_theta * np.abs(ctx.angular[:, rows, cols]).sum()
    else:
        total += lw.lambda_delta * np.abs(rel).sum()
    if lw.lambda_lap:
        lam2, _ = algebraic_connectivity(h)
        total += lw.lambda_lap * max(0.0, lw.tau_c - lam2)
    return float(total)


def _depth_sum(parents) -> int:
    total = 0
    for i, p in enumerate(parents):
        seen = set()
        d = 0
        v = p
        while v is not None and v not in seen:
            seen.add(v)
            d += 1
            v = parents[v]
        total += d
    return total


def _role_swap(parents, i, j):
    swap = lambda x: j if x == i else (i if x == j else x)
    new = [None] * len(parents)
    for v, p in enumerate(parents):
        new[swap(v)] = None if p is None else swap(p)
    return new


def _local_moves(parents, neighbors, nbr_sets, roots, include_role_swaps=True) -> list:
    """Neighbor states of a parent assignment: reattach one vertex, exchange
    a parent-child pair, or swap two vertices' positions in the tree."""
    n = len(parents)
    out = []
    for i in range(n):
        if i in roots:
            continue
        for j in neighbors[i]:
            if j != parents[i]:
                t = list(parents)
                t[i] = int(j)
                out.append(t)
    for i in range(n):
        if i in roots:
            continue
        for j in range(n):
            if j in roots or j == i:
                continue
            pj = parents[j]
            if pj == i or (pj is not None and pj not in nbr_sets[i]) or i not in nbr_sets[j]:
                continue
            t = list(parents)
            t[i] = pj
            t[j] = i
            out.append(t)
    if include_role_swaps:
        for i in range(n):
            if i in roots:
                continue
            for j in range(i + 1, n):
                if j not in roots:
                    out.append(_role_swap(parents, i, j))
    return out


def refine_hierarchy(ctx: PipelineContext, parents, rounds: int = 6,
                     tol: float = 0.02) -> tuple:
    """Zero-temperature polish of a parent assignment under the training
    objective.

    Alternates steepest local descent over the move set with a flattening
    pass that accepts depth-reducing moves whose loss stays within a small
    relative tolerance; near-ties between isomorphic structures are
    noise-level while structural differences are far larger, so the
    tolerance separates them cleanly.
    """
    roots = set(ctx.graph.roots)
    nbr_sets = [set(int(x) for x in ctx.neighbors[i]) for i in range(ctx.n)]
    parents = list(parents)
    best = discrete_loss(ctx, parents)
    for _ in range(rounds):
        while True:
            cands = _local_moves(parents, ctx.neighbors, nbr_sets, roots)
            scored = min(((discrete_loss(ctx, t), t) for t in cands), key=lambda x: x[0])
            if scored[0] < best - 1e-12:
                best, parents = scored[0], scored[1]
            else:
                break
        flattened = False
        cur_depth = _depth_sum(parents)
        for trial in _local_moves(parents, ctx.neighbors, nbr_sets, roots,
                                  include_role_swaps=False):
            val = discrete_loss(ctx, trial)
            if val <= best * (1 + tol) and _depth_sum(trial) < cur_depth:
                parents = trial
                cur_depth = _depth_sum(trial)
                flattened = True
        if not flattened:
            break
    return tuple(parents), best


# -- the run ---------------------------------------------------------------


@dataclass
class TrainRecord:
    """Per-epoch scalars plus the final model state of one training run."""

    seed: int
    loss: np.ndarray
    recon: np.ndarray
    reg_delta: np.ndarray
    reg_r: np.ndarray
    reg_theta: np.ndarray
    reg_lap: np.ndarray
    tau: np.ndarray
    final_params: ModelParams
    final_weights: EdgeWeights
    final_hierarchy: HierarchyMatrix
    diverged: bool = False

    @property
    def n_epochs(self) -> int:
        return len(self.loss)

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "diverged": self.diverged,
            "epochs": {
                name: getattr(self, name).tolist()
                for name in ("loss", "recon", "reg_delta", "reg_r", "reg_theta", "reg_lap", "tau")
            },
            "final_hierarchy": self.final_hierarchy.to_json_dict(),
            "final_params": {
                "attn_vector": self.final_params.attn_vector.tolist(),
                "proj_matrix": self.final_params.proj_matrix.tolist(),
                "edge_bias": self.final_params.edge_bias.tolist(),
                "leaky_slope": self.final_params.leaky_slope,
            },
        }

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    def save_metrics_csv(self, path) -> None:
        cols = ["epoch", "loss", "recon", "reg_delta", "reg_r", "reg_theta", "reg_lap", "tau"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for e in range(self.n_epochs):
                writer.writerow([e] + [repr(float(getattr(self, c)[e])) for c in cols[1:]])


def train_run(traj: Trajectory, config: TrainConfig, root: int | None = None) -> TrainRecord:
    """Full-batch training over all frames; deterministic given the seed.

    The returned hierarchy is the maximum-likelihood assignment from the
    final weights, polished by the zero-temperature refinement when
    config.refine_rounds > 0.
    """
    n, d = traj.n_elements, traj.dim
    k = config.k if config.k is not None else default_k(n)
    graph = build_knn_graph(traj.positions[0], k)
    if root is not None:
        graph = graph.with_roots([root])
    ctx = PipelineContext(traj, graph, config.loss_weights, config.rotational, config.l_max)

    rng = np.random.default_rng(config.seed)
    params = init_params(graph, d, hidden_dim=config.hidden_dim, seed=rng)
    pt = make_param_tensors(params)
    opt = Adam(list(pt.values()), lr=config.lr)

    stats = {name: [] for name in ("loss", "recon", "reg_delta", "reg_r", "reg_theta", "reg_lap", "tau")}
    diverged = False
    for epoch in range(config.epochs):
        tau = anneal_tau(epoch, config)
        if config.mode == "relaxed":
            loss, aux = relaxed_loss(ctx, pt, tau, leaky_slope=params.leaky_slope)
        else:
            noise_list = [rng.gumbel(size=(n, graph.k)) for _ in range(config.s_samples)]
            loss, aux = pipeline_loss(ctx, pt, tau, noise_list, leaky_slope=params.leaky_slope)
        loss_val = float(loss.value)
        stats["loss"].append(loss_val)
        for name in ("recon", "reg_delta", "reg_r", "reg_theta", "reg_lap"):
            stats[name].append(aux["parts"][name])
        stats["tau"].append(tau)
        if not np.isfinite(loss_val) or loss_val > DIVERGENCE_LIMIT:
            log.warning("run seed=%d diverged at epoch %d (loss=%g)", config.seed, epoch, loss_val)
            diverged = True
            break
        backward(loss, pt)
        opt.step()

    final_params = params_from_tensors(pt, params.leaky_slope)
    logits = time_averaged_logits(ctx.deltas, graph, final_params)
    weights = neighborhood_softmax(logits / max(config.tau_end, 1e-9), graph)
    hierarchy = ml_hierarchy(weights)
    if config.refine_rounds > 0 and not diverged:
        starts = [hierarchy.parents]
        if graph.roots:
            anchor = graph.roots[0]
            starts.append(tuple(None if i in graph.roots else anchor for i in range(n)))
        candidates = [refine_hierarchy(ctx, s, rounds=config.refine_rounds,
                                       tol=config.refine_tol) for s in starts]
        refined = min(candidates, key=lambda c: c[1])[0]
        hierarchy = HierarchyMatrix(refined)
    return TrainRecord(
        seed=config.seed,
        **{name: np.asarray(vals) for name, vals in stats.items()},
        final_params=final_params,
        final_weights=weights,
        final_hierarchy=hierarchy,
        diverged=diverged,
    )


# -- sweeps ------------------------------------------------------------------


@dataclass
class SweepReport:
    """Aggregate of independent seeded runs with a binomial confidence
    interval over the success rate."""

    n_runs: int
    n_success: int
    rate: float
    ci_low: float
    ci_high: float
    runs: list

    def to_json_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "n_success": self.n_success,
            "rate": self.rate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "runs": self.runs,
        }


def _sweep_worker(args: tuple) -> dict:
    from . import datasets as ds_mod
    from .evaluation import exact_match, toy_validate

    kind, seed, config_kwargs, noise = args
    config = TrainConfig(seed=seed, **config_kwargs)
    try:
        if kind == "toy1d":
            ds = ds_mod.gen_toy_1d(ds_mod.ToyConfig(seed=seed))
        elif kind == "planetary":
            ds = ds_mod.gen_planetary(ds_mod.PlanetaryConfig(seed=seed, noise_sigma=noise))
        else:
            raise InvalidInputError(f"unknown dataset kind: {kind}")
        record = train_run(ds.trajectory, config, root=ds.root)
        if kind == "toy1d":
            valid = toy_validate(record.final_hierarchy, ds.hierarchy, ds.motion_classes)
        else:
            valid = exact_match(record.final_hierarchy, ds.hierarchy)
        return {
            "seed": seed,
            "valid": bool(valid),
            "loss_final": float(record.loss[-1]),
            "n_epochs": int(record.n_epochs),
            "diverged": bool(record.diverged),
            "parents": list(record.final_hierarchy.parents),
            "error": None,
        }
    except Exception as e:  # individual run failures are recorded, not fatal
        log.warning("run seed=%d failed: %s", seed, e)
        return {"seed": seed, "valid": False, "loss_final": float("nan"),
                "n_epochs": 0, "diverged": True, "parents": None, "error": str(e)}


def sweep(dataset: str, n_runs: int, config: TrainConfig | None = None,
          noise: float = 0.0, workers: int | None = None,
          seeds: list | None = None) -> SweepReport:
    """Run independent seeded trainings of one benchmark and aggregate the
    success rate (depth-1 cluster validity for the toy benchmark, exact
    hierarchy match for the planetary one) with a 95% Wilson interval."""
    from .evaluation import wilson_ci

    if n_runs < 1 and not seeds:
        raise InvalidInputError("need at least one run")
    config = config or TrainConfig()
    seeds = list(range(n_runs)) if seeds is None else list(seeds)
    config_kwargs = {
        "epochs": config.epochs, "lr": config.lr, "tau_start": config.tau_start,
        "tau_end": config.tau_end, "anneal": config.anneal,
        "loss_weights": config.loss_weights, "k": config.k,
        "s_samples": config.s_samples, "rotational": config.rotational,
        "hidden_dim": config.hidden_dim, "l_max": config.l_max,
        "mode": config.mode, "refine_rounds": config.refine_rounds,
        "refine_tol": config.refine_tol,
    }
    jobs = [(dataset, s, config_kwargs, noise) for s in seeds]
    if workers is None:
        import os

        workers = max(1, min(len(jobs), os.cpu_count() or 1))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]
    results.sort(key=lambda r: r["seed"])
    n_success = sum(1 for r in results if r["valid"])
    lo, hi = wilson_ci(n_success, len(results))
    return SweepReport(n_runs=len(results), n_success=n_success,
                       rate=n_success / len(results), ci_low=lo, ci_high=hi,
                       runs=results)
