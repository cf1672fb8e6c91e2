"""Community detection by semi-synchronous label propagation.

Nodes are greedily colored so that each color class is an independent set;
one sweep updates the classes in turn, all nodes of a class at once. The
partition depends on topology only. Per-community mean feature vectors are
computed separately so callers can re-derive them from any embedding matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .rng import stream

MAX_SWEEPS = 100


@dataclass
class CommunityAssignment:
    membership: np.ndarray        # node -> community id in [0, K)
    num_communities: int
    community_features: np.ndarray  # K x d, arithmetic mean of member rows
    community_sizes: np.ndarray
    converged: bool = True


def _greedy_coloring(g: Graph) -> list[np.ndarray]:
    """Color classes via Welsh-Powell order (degree desc, id asc)."""
    order = np.lexsort((np.arange(g.n), -g.degrees))
    color = -np.ones(g.n, dtype=np.int64)
    for u in order:
        taken = {color[v] for v in g.neighbors(u) if color[v] >= 0}
        c = 0
        while c in taken:
            c += 1
        color[u] = c
    return [np.flatnonzero(color == c) for c in range(int(color.max()) + 1)]


def _vote(labels: np.ndarray, neigh: np.ndarray, current: int, rng) -> int:
    """Majority label among neighbours; keep current when it is tied for
    the lead, otherwise pick uniformly among the leaders (seeded)."""
    counts = np.bincount(labels[neigh])
    best = counts.max()
    leaders = np.flatnonzero(counts == best)
    if current < counts.size and counts[current] == best:
        return current
    if leaders.size == 1:
        return int(leaders[0])
    rng.shuffle(leaders)
    return int(leaders[0])


def label_propagation(g: Graph, seed: int) -> CommunityAssignment:
    """Propagate labels to convergence (or MAX_SWEEPS) and compact ids.

    Converged means no node would change its label under the majority
    vote: every node's label is among its neighbourhood's most frequent.
    Isolated nodes keep their own label and end up as singletons.
    """
    if g.n < 1:
        raise ValueError("graph must have at least one node")
    labels = np.arange(g.n, dtype=np.int64)
    classes = _greedy_coloring(g)
    rng = stream(seed, "lpa")

    converged = False
    for _ in range(MAX_SWEEPS):
        changed = False
        for members in classes:
            updates = {}
            for u in members:
                neigh = g.neighbors(u)
                if neigh.size == 0:
                    continue
                new = _vote(labels, neigh, int(labels[u]), rng)
                if new != labels[u]:
                    updates[int(u)] = new
            for u, new in updates.items():
                labels[u] = new
                changed = True
        if not changed:
            converged = True
            break

    # compact ids in order of smallest member node
    _, first = np.unique(labels, return_index=True)
    compact = {int(labels[i]): k for k, i in enumerate(np.sort(first))}
    membership = np.array([compact[int(l)] for l in labels], dtype=np.int64)
    k = len(compact)
    sizes = np.bincount(membership, minlength=k)
    feats = community_features(g, membership)
    return CommunityAssignment(membership=membership, num_communities=k,
                               community_features=feats,
                               community_sizes=sizes, converged=converged)


def community_features(g: Graph | np.ndarray, membership: np.ndarray) -> np.ndarray:
    """Per-community arithmetic mean of member feature rows.

    Accepts a Graph or a bare (n, d) embedding matrix, so kernels built
    mid-training can use the current representations.
    """
    x = g.features if isinstance(g, Graph) else np.asarray(g, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected an (n, d) feature matrix")
    membership = np.asarray(membership, dtype=np.int64)
    if membership.shape[0] != x.shape[0]:
        raise ValueError("membership must cover every node")
    k = int(membership.max()) + 1
    sizes = np.bincount(membership, minlength=k)
    if (sizes == 0).any():
        raise ValueError(f"empty community id {int(np.flatnonzero(sizes == 0)[0])}")
    totals = np.zeros((k, x.shape[1]))
    np.add.at(totals, membership, x)
    return totals / sizes[:, None]
