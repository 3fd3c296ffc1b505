"""Data model and I/O for node-colored networks.

A node-colored multilayer network is stored as a single symmetric binary
supra-adjacency matrix together with a partition of the nodes into layers.
Nodes are reindexed on load so that each layer occupies a contiguous index
range; the original string ids are retained for reporting.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

__all__ = ["SupraNetwork", "load_network"]


@dataclass(frozen=True)
class SupraNetwork:
    """Symmetric binary supra-adjacency matrix with a layer partition.

    Immutable after construction and safe to share across threads.

    Attributes
    ----------
    adjacency : (V, V) bool array, symmetric with zero diagonal.
    layer_of : (V,) int array mapping node index to layer index in [0, d).
    layer_sizes : (d,) int array, one positive entry per layer.
    node_ids : original node identifiers, index order.
    layer_labels : original layer labels, layer-index order.
    """

    adjacency: np.ndarray
    layer_of: np.ndarray
    layer_sizes: np.ndarray
    node_ids: tuple = ()
    layer_labels: tuple = ()

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        layer_of = np.asarray(self.layer_of, dtype=np.int64)
        sizes = np.asarray(self.layer_sizes, dtype=np.int64)
        v = layer_of.shape[0]
        if adj.shape != (v, v):
            raise ValueError(f"adjacency shape {adj.shape} does not match {v} nodes")
        if v < 1:
            raise ValueError("a network needs at least one node")
        if np.any(adj != adj.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(adj)):
            raise ValueError("adjacency must have a zero diagonal (no self-loops)")
        if np.any(sizes < 1) or sizes.sum() != v:
            raise ValueError("layer sizes must be positive and sum to the node count")
        expected = np.repeat(np.arange(sizes.size), sizes)
        if np.any(layer_of != expected):
            raise ValueError("nodes of the same layer must occupy a contiguous index range")
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "layer_of", layer_of)
        object.__setattr__(self, "layer_sizes", sizes)
        if not self.node_ids:
            object.__setattr__(self, "node_ids", tuple(str(i) for i in range(v)))
        if not self.layer_labels:
            object.__setattr__(self, "layer_labels", tuple(str(j) for j in range(sizes.size)))

    @property
    def num_nodes(self) -> int:
        return self.layer_of.shape[0]

    @property
    def num_layers(self) -> int:
        return self.layer_sizes.shape[0]

    @property
    def num_edges(self) -> int:
        return int(np.triu(self.adjacency, 1).sum())

    def index_of(self, node_id: str) -> int:
        try:
            return self.node_ids.index(node_id)
        except ValueError:
            raise KeyError(f"unknown node id {node_id!r}") from None

    def neighbor_lists(self) -> list:
        """Per-node arrays of neighbor indices (precomputed for samplers)."""
        return [np.flatnonzero(self.adjacency[v]) for v in range(self.num_nodes)]

    def to_json(self) -> str:
        edges = np.argwhere(np.triu(self.adjacency, 1))
        payload = {
            "node_ids": list(self.node_ids),
            "node_layers": [self.layer_labels[j] for j in self.layer_of],
            "layer_labels": list(self.layer_labels),
            "edges": [[self.node_ids[int(a)], self.node_ids[int(b)]] for a, b in edges],
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SupraNetwork":
        payload = json.loads(text)
        ids = payload["node_ids"]
        index = {nid: i for i, nid in enumerate(ids)}
        labels = list(payload["layer_labels"])
        layer_of = np.array([labels.index(lab) for lab in payload["node_layers"]], dtype=np.int64)
        v = len(ids)
        adj = np.zeros((v, v), dtype=bool)
        for a, b in payload["edges"]:
            ia, ib = index[a], index[b]
            adj[ia, ib] = adj[ib, ia] = True
        sizes = np.bincount(layer_of, minlength=len(labels))
        return cls(adj, layer_of, sizes, tuple(ids), tuple(labels))


def _read_layer_file(layer_path) -> tuple:
    """Parse ``node_id<TAB>layer_label`` lines; any whitespace separates."""
    node_order = []
    node_layer = {}
    layer_order = []
    with open(layer_path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) != 2:
                raise ValueError(f"{layer_path}:{lineno}: expected 'node_id<TAB>layer_label'")
            nid, lab = parts[0].strip(), parts[1].strip()
            if nid in node_layer:
                raise ValueError(f"{layer_path}:{lineno}: duplicate layer entry for node {nid!r}")
            node_layer[nid] = lab
            node_order.append(nid)
            if lab not in layer_order:
                layer_order.append(lab)
    if not node_order:
        raise ValueError(f"{layer_path}: no nodes declared")
    return node_order, node_layer, layer_order


def load_network(edge_path, layer_path) -> SupraNetwork:
    """Load a network from an edge list and a layer-label file.

    The edge file lists one undirected dyad per line as two whitespace
    separated node ids; the layer file maps every node id to a layer label.
    Layer indices follow first appearance in the layer file, node order
    within a layer follows first appearance there too, so the reindexing is
    deterministic.  Self-loops are a hard error; duplicate edges are merged
    with a logged count.
    """
    node_order, node_layer, layer_order = _read_layer_file(layer_path)

    # Reindex: layers contiguous, first-appearance order within each layer.
    by_layer = {lab: [] for lab in layer_order}
    for nid in node_order:
        by_layer[node_layer[nid]].append(nid)
    ordered_ids = [nid for lab in layer_order for nid in by_layer[lab]]
    index = {nid: i for i, nid in enumerate(ordered_ids)}
    layer_of = np.array(
        [layer_order.index(node_layer[nid]) for nid in ordered_ids], dtype=np.int64
    )
    sizes = np.array([len(by_layer[lab]) for lab in layer_order], dtype=np.int64)

    v = len(ordered_ids)
    adj = np.zeros((v, v), dtype=bool)
    duplicates = 0
    with open(edge_path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{edge_path}:{lineno}: expected two node ids per line")
            a, b = parts
            if a not in index:
                raise ValueError(f"{edge_path}:{lineno}: node {a!r} has no layer label")
            if b not in index:
                raise ValueError(f"{edge_path}:{lineno}: node {b!r} has no layer label")
            if a == b:
                raise ValueError(f"{edge_path}:{lineno}: self-loop on node {a!r} is not allowed")
            ia, ib = index[a], index[b]
            if adj[ia, ib]:
                duplicates += 1
            adj[ia, ib] = adj[ib, ia] = True
    if duplicates:
        logger.warning("%s: %d duplicate edge(s) merged", edge_path, duplicates)

    return SupraNetwork(adj, layer_of, sizes, tuple(ordered_ids), tuple(layer_order))
