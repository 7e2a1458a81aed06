"""Hierarchy-correctness evaluation: depth-1 cluster matching against the
ground truth, exact matching, exhaustive counting of valid hierarchies at
toy scale, and a uniform-random Monte-Carlo baseline."""
from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass
from itertools import combinations, permutations

import numpy as np

from .hierarchy import HierarchyMatrix, validate_hierarchy
from .motion import InvalidInputError

ROOT_CLASS = "root"


def _as_parents(h) -> tuple:
    if isinstance(h, HierarchyMatrix):
        return h.parents
    return HierarchyMatrix.from_dense(np.asarray(h)).parents


@dataclass(frozen=True)
class Cluster:
    parent: int
    parent_class: str
    children: tuple


def depth1_clusters(h, classes) -> list:
    """Group vertices by their direct parent; the parent is also reported
    by motion class so clusters compare up to within-class permutation."""
    parents = _as_parents(h)
    if not validate_hierarchy(HierarchyMatrix(parents)).ok:
        raise InvalidInputError("not a valid hierarchy")
    by_parent: dict = {}
    for i, p in enumerate(parents):
        if p is not None:
            by_parent.setdefault(p, []).append(i)
    return [Cluster(parent=p, parent_class=classes[p], children=tuple(sorted(ch)))
            for p, ch in sorted(by_parent.items())]


def _signature(parents, classes) -> frozenset:
    """Multiset of (parent-class, sorted child classes) pairs, one per
    cluster, encoded as a frozenset of ((pclass, children), count)."""
    by_parent: dict = {}
    for i, p in enumerate(parents):
        if p is not None:
            by_parent.setdefault(p, []).append(classes[i])
    sig = Counter((classes[p], tuple(sorted(ch))) for p, ch in by_parent.items())
    return frozenset(sig.items())


def _relabel_signature(sig: frozenset, mapping: dict) -> frozenset:
    out: Counter = Counter()
    for (pclass, children), count in sig:
        new_p = mapping.get(pclass, pclass)
        new_children = tuple(sorted(mapping.get(c, c) for c in children))
        out[(new_p, new_children)] += count
    return frozenset(out.items())


def _target_signatures(h_star, classes) -> list:
    """Ground-truth signature under every permutation of the non-root
    motion classes (the group orderings the protocol accepts)."""
    star_sig = _signature(_as_parents(h_star), classes)
    labels = sorted({c for c in classes if c != ROOT_CLASS})
    targets = []
    for perm in permutations(labels):
        mapping = dict(zip(labels, perm))
        sig = _relabel_signature(star_sig, mapping)
        if sig not in targets:
            targets.append(sig)
    return targets


def toy_validate(h, h_star, classes) -> bool:
    """True when every depth-1 cluster of h matches a ground-truth cluster
    up to permutation within motion classes (and up to reordering of the
    classes themselves). Never raises: malformed hierarchies are False."""
    targets = _target_signatures(h_star, classes)
    return _signature(_as_parents(h), classes) in targets


def exact_match(h, h_star) -> bool:
    """Strict equality of parent assignments."""
    return _as_parents(h) == _as_parents(h_star)


# -- exhaustive counting -----------------------------------------------------


def _class_ints(classes) -> tuple:
    labels = sorted(set(classes))
    index = {c: i for i, c in enumerate(labels)}
    return np.array([index[c] for c in classes]), labels


def count_valid_hierarchies(h_star, classes, max_nodes: int = 12) -> int:
    """Count all parent assignments that pass toy_validate.

    Any valid assignment uses exactly as many distinct parents as the
    ground truth has clusters, so the search enumerates every choice of
    that parent set and every assignment onto it; candidates surviving a
    vectorized signature screen are re-checked with toy_validate itself.
    """
    parents_star = _as_parents(h_star)
    n = len(parents_star)
    if n > max_nodes:
        raise InvalidInputError(f"refusing exhaustive enumeration for N={n} > {max_nodes}")
    roots = [i for i, p in enumerate(parents_star) if p is None]
    if len(roots) != 1:
        raise InvalidInputError("expected exactly one root")
    root = roots[0]
    targets = _target_signatures(h_star, classes)
    m = sum(count for _, count in targets[0])  # clusters in the ground truth
    if m > 4:
        raise InvalidInputError(f"refusing enumeration over {m} clusters")
    class_ints, labels = _class_ints(classes)
    onehot = np.eye(len(labels))[class_ints]  # (N, n_classes)
    non_root = [i for i in range(n) if i != root]

    total = 0
    for combo in combinations(non_root, m - 1):
        slots = (root,) + combo
        cands = [[p for p in slots if p != node] for node in non_root]
        grids = np.meshgrid(*cands, indexing="ij")
        assign = np.stack([g.reshape(-1) for g in grids], axis=1)  # (B, n-1)
        # screen: per-slot child-class counts must match some target exactly
        counts = np.stack([((assign == s)[:, :, None] * onehot[non_root][None]).sum(axis=1)
                           for s in slots], axis=1)  # (B, m, n_classes)
        slot_classes = [classes[s] for s in slots]
        match_any = np.zeros(len(assign), dtype=bool)
        for target in targets:
            expanded = []
            for (pclass, children), count in target:
                child_counts = np.zeros(len(labels))
                for c in children:
                    child_counts[labels.index(c)] += 1
                expanded.extend([(pclass, child_counts)] * count)
            for perm in permutations(range(m)):
                ok = np.ones(len(assign), dtype=bool)
                feasible = True
                for slot_idx, cluster_idx in enumerate(perm):
                    pclass, child_counts = expanded[cluster_idx]
                    if slot_classes[slot_idx] != pclass:
                        feasible = False
                        break
                    ok &= (counts[:, slot_idx] == child_counts).all(axis=1)
                if feasible:
                    match_any |= ok
        survivors = assign[match_any]
        for row in survivors:
            parents = [None] * n
            for node, p in zip(non_root, row):
                parents[node] = int(p)
            if toy_validate(HierarchyMatrix(tuple(parents)), h_star, classes):
                total += 1
    return total


# -- Monte-Carlo baseline ----------------------------------------------------


def monte_carlo_baseline(n_trials: int, h_star, classes, rng=None,
                         batch: int = 100_000) -> float:
    """Fraction of uniformly random parent assignments (each non-root node
    picks any of the other N-1 nodes) that pass toy_validate."""
    if n_trials < 1:
        raise InvalidInputError("n_trials must be >= 1")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    parents_star = _as_parents(h_star)
    n = len(parents_star)
    roots = [i for i, p in enumerate(parents_star) if p is None]
    if len(roots) != 1:
        raise InvalidInputError("expected exactly one root")
    root = roots[0]
    targets = _target_signatures(h_star, classes)
    # necessary conditions shared by all targets, used as a cheap screen
    allowed_cluster_counts = {sum(c for _, c in t) for t in targets}
    non_root = np.array([i for i in range(n) if i != root])

    hits = 0
    done = 0
    while done < n_trials:
        b = min(batch, n_trials - done)
        raw = rng.integers(0, n - 1, size=(b, n - 1))
        parents = raw + (raw >= non_root[None, :])  # uniform over others
        sorted_p = np.sort(parents, axis=1)
        distinct = 1 + (np.diff(sorted_p, axis=1) > 0).sum(axis=1)
        candidates = np.flatnonzero(np.isin(distinct, list(allowed_cluster_counts)))
        for idx in candidates:
            full = [None] * n
            for node, p in zip(non_root, parents[idx]):
                full[node] = int(p)
            if _signature(tuple(full), classes) in targets:
                hits += 1
        done += b
    return hits / n_trials


# -- aggregation -------------------------------------------------------------


def wilson_ci(successes: int, n: int, z: float = 1.959963984540054) -> tuple:
    """95% (by default) Wilson score interval for a binomial rate."""
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    denom = 1 + z**2 / n
    center = (p + z**2 / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def save_report_json(path, report_dict: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report_dict, fh, indent=2)


def save_runs_csv(path, runs: list) -> None:
    """Per-run summary rows: run_id, valid, loss_final, n_epochs."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "valid", "loss_final", "n_epochs"])
        for r in runs:
            writer.writerow([r["seed"], int(r["valid"]), r["loss_final"], r["n_epochs"]])
