"""Undirected graph storage, loading, traversal and synthetic generation.

Graphs are immutable: CSR adjacency (both directions stored), float64 node
features, integer class labels and three disjoint train/val/test masks.
Self-loops are never stored; the convolution injects the self term itself.
"""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import GraphFormatError
from .rng import stream


@dataclass(frozen=True)
class Graph:
    n: int
    csr_offsets: np.ndarray
    csr_targets: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    num_classes: int

    def __post_init__(self):
        for arr in (self.csr_offsets, self.csr_targets, self.features,
                    self.labels, self.train_mask, self.val_mask, self.test_mask):
            arr.setflags(write=False)

    def neighbors(self, i: int) -> np.ndarray:
        return self.csr_targets[self.csr_offsets[i]:self.csr_offsets[i + 1]]

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.csr_offsets)

    @property
    def num_edge_slots(self) -> int:
        """Directed edge slots; an undirected edge occupies two."""
        return int(self.csr_targets.size)

    @property
    def num_undirected_edges(self) -> int:
        return self.num_edge_slots // 2

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])


@dataclass
class DistancePartition:
    """Nodes grouped by exact BFS distance from a source node."""
    source: int
    sets: dict[int, np.ndarray] = field(default_factory=dict)
    max_length: int = 0


def build_graph(n, edges, features, labels, masks, num_classes) -> Graph:
    """Assemble a Graph from an undirected edge list.

    Edges are symmetrized, duplicates collapsed; self-loops are dropped
    with a warning since the convolution adds the self term on its own.
    """
    features = np.ascontiguousarray(features, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)

    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise GraphFormatError(f"field 'edges': node id out of range [0, {n})")
    loops = edges[:, 0] == edges[:, 1]
    if loops.any():
        warnings.warn(f"dropped {int(loops.sum())} self-loop(s)", stacklevel=2)
        edges = edges[~loops]

    # symmetrize and deduplicate via (u, v) codes
    both = np.concatenate([edges, edges[:, ::-1]], axis=0)
    codes = np.unique(both[:, 0] * n + both[:, 1])
    src = codes // n
    dst = codes % n
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.add.at(offsets, src + 1, 1)
    offsets = np.cumsum(offsets)

    train, val, test = (np.ascontiguousarray(masks[k], dtype=bool)
                        for k in ("train", "val", "test"))
    g = Graph(n=int(n), csr_offsets=offsets, csr_targets=dst,
              features=features, labels=labels,
              train_mask=train, val_mask=val, test_mask=test,
              num_classes=int(num_classes))
    validate_graph(g)
    return g


def validate_graph(g: Graph) -> None:
    if g.features.shape[0] != g.n:
        raise GraphFormatError(f"field 'features': expected {g.n} rows, got {g.features.shape[0]}")
    if g.labels.shape != (g.n,):
        raise GraphFormatError(f"field 'labels': expected length {g.n}")
    for name, mask in (("train", g.train_mask), ("val", g.val_mask), ("test", g.test_mask)):
        if mask.shape != (g.n,):
            raise GraphFormatError(f"field 'masks.{name}': expected length {g.n}, got {mask.shape[0]}")
    overlap = (g.train_mask.astype(int) + g.val_mask + g.test_mask) > 1
    if overlap.any():
        raise GraphFormatError(f"field 'masks': masks overlap at node {int(np.flatnonzero(overlap)[0])}")
    if g.labels.size and (g.labels.min() < 0 or g.labels.max() >= g.num_classes):
        raise GraphFormatError(f"field 'labels': label outside [0, {g.num_classes})")
    if np.any(np.diff(g.csr_offsets) < 0) or g.csr_offsets[-1] != g.csr_targets.size:
        raise GraphFormatError("corrupt CSR offsets")


def load_graph(path) -> Graph:
    """Read a graph from the JSON interchange format.

    Expected keys: n, edges, features, labels, masks{train,val,test},
    num_classes. Edge direction in the file is irrelevant; the stored
    adjacency always contains both (u, v) and (v, u).
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(
            f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc

    for key in ("n", "edges", "features", "labels", "masks", "num_classes"):
        if key not in raw:
            raise GraphFormatError(f"missing field '{key}'")
    masks = raw["masks"]
    for key in ("train", "val", "test"):
        if key not in masks:
            raise GraphFormatError(f"missing field 'masks.{key}'")
    try:
        return build_graph(raw["n"], raw["edges"], raw["features"],
                           raw["labels"], masks, raw["num_classes"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, GraphFormatError):
            raise
        raise GraphFormatError(f"invalid graph content: {exc}") from exc


def save_graph(g: Graph, path) -> None:
    """Write the JSON interchange format; exact float round-trip."""
    src = np.repeat(np.arange(g.n), np.diff(g.csr_offsets))
    upper = src < g.csr_targets
    payload = {
        "n": g.n,
        "edges": np.stack([src[upper], g.csr_targets[upper]], axis=1).tolist(),
        "features": g.features.tolist(),
        "labels": g.labels.tolist(),
        "masks": {
            "train": g.train_mask.tolist(),
            "val": g.val_mask.tolist(),
            "test": g.test_mask.tolist(),
        },
        "num_classes": g.num_classes,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))


def _induced_subgraph(g: Graph, nodes: np.ndarray) -> Graph:
    nodes = np.sort(nodes)
    remap = -np.ones(g.n, dtype=np.int64)
    remap[nodes] = np.arange(nodes.size)
    src = np.repeat(np.arange(g.n), np.diff(g.csr_offsets))
    keep = (remap[src] >= 0) & (remap[g.csr_targets] >= 0)
    sub_edges = np.stack([remap[src[keep]], remap[g.csr_targets[keep]]], axis=1)
    return build_graph(nodes.size, sub_edges,
                       g.features[nodes], g.labels[nodes],
                       {"train": g.train_mask[nodes],
                        "val": g.val_mask[nodes],
                        "test": g.test_mask[nodes]},
                       g.num_classes)


def connected_components(g: Graph) -> list[np.ndarray]:
    """Components as sorted node-id arrays, ordered by smallest member id."""
    seen = np.zeros(g.n, dtype=bool)
    comps = []
    for start in range(g.n):
        if seen[start]:
            continue
        queue = deque([start])
        seen[start] = True
        members = [start]
        while queue:
            u = queue.popleft()
            for v in g.neighbors(u):
                if not seen[v]:
                    seen[v] = True
                    members.append(int(v))
                    queue.append(int(v))
        comps.append(np.sort(np.array(members, dtype=np.int64)))
    return comps


def largest_connected_component(g: Graph) -> Graph:
    """Induced subgraph on the largest component, ids remapped to [0, n').

    Ties between equal-size components go to the one containing the
    smallest original node id.
    """
    if g.n == 0:
        raise GraphFormatError("empty graph has no connected component")
    comps = connected_components(g)
    best = max(comps, key=lambda c: (c.size, -int(c[0])))
    return _induced_subgraph(g, best)


def bfs_distance_partition(g: Graph, source: int, max_length: int) -> DistancePartition:
    """Group nodes by exact BFS distance l = 1..max_length from source."""
    if not 0 <= source < g.n:
        raise ValueError(f"source {source} outside [0, {g.n})")
    if max_length < 2:
        raise ValueError("max_length must be at least 2")
    dist = -np.ones(g.n, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if dist[u] >= max_length:
            continue
        for v in g.neighbors(u):
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(int(v))
    sets = {}
    for length in range(1, max_length + 1):
        members = np.flatnonzero(dist == length)
        if members.size:
            sets[length] = members
    return DistancePartition(source=int(source), sets=sets, max_length=int(max_length))


def generate_sbm(blocks: int, nodes_per_block: int, p_in: float, p_out: float,
                 feature_dim: int, feature_noise: float, seed: int) -> Graph:
    """Planted-partition graph with block-prototype features.

    Labels are block ids. Each node's feature row is its block's one-hot
    prototype plus zero-mean Gaussian noise of scale feature_noise. Masks
    split each block 60/20/20, deterministically from the seed.
    """
    if blocks * nodes_per_block == 0:
        raise ValueError("blocks * nodes_per_block must be positive")
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ValueError("need 0 <= p_out <= p_in <= 1")
    n = blocks * nodes_per_block
    labels = np.repeat(np.arange(blocks), nodes_per_block)
    rng = stream(seed, "sbm")

    prob = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    draw = rng.random((n, n))
    upper = np.triu(draw < prob, k=1)
    edges = np.argwhere(upper)

    proto = np.zeros((blocks, feature_dim))
    proto[np.arange(blocks), np.arange(blocks) % feature_dim] = 1.0
    features = proto[labels] + feature_noise * rng.standard_normal((n, feature_dim))

    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    n_train = int(round(0.6 * nodes_per_block))
    n_val = int(round(0.2 * nodes_per_block))
    for b in range(blocks):
        members = rng.permutation(np.arange(b * nodes_per_block, (b + 1) * nodes_per_block))
        train[members[:n_train]] = True
        val[members[n_train:n_train + n_val]] = True
        test[members[n_train + n_val:]] = True

    return build_graph(n, edges, features, labels,
                       {"train": train, "val": val, "test": test}, blocks)
