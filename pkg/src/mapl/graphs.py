"""Per-frame action graphs.

Actor nodes carry [roi_feature; box] vectors; edges come from a
distance-based social connectivity rule (centered pairwise distances,
row-normalized, sigmoid, pruned below the row mean). One event node is
connected to every actor and carries the predictor's event feature
projected into the shared node width.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import NonFiniteError, ShapeError, Tensor


@dataclass
class ActorNode:
    feature: np.ndarray          # [D+4] value snapshot (event row updates live on the graph tensor)
    box: tuple
    is_null: bool = False
    is_action_node: bool = False


@dataclass
class ActionGraph:
    nodes: list
    adjacency: np.ndarray        # [n, n] float32, row-normalized weights
    features: Tensor             # [n, D+4] stacked node features (tape-live event row)
    frame_index: int = -1

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def actor_indices(self):
        return [i for i, n in enumerate(self.nodes) if not n.is_action_node]

    @property
    def real_actor_indices(self):
        return [i for i, n in enumerate(self.nodes) if not n.is_action_node and not n.is_null]

    @property
    def action_index(self):
        for i, n in enumerate(self.nodes):
            if n.is_action_node:
                return i
        return None

    def boxes(self):
        return np.array([n.box for n in self.nodes], dtype=np.float32)


def _box_descriptor(boxes):
    # location and spatial geometry: (center_x, center_y, width, height)
    b = np.asarray(boxes, dtype=np.float64)
    return np.stack(
        [(b[:, 0] + b[:, 2]) / 2, (b[:, 1] + b[:, 3]) / 2, b[:, 2] - b[:, 0], b[:, 3] - b[:, 1]],
        axis=1,
    )


def actor_adjacency(boxes):
    """Social connectivity block over actor boxes (no event node)."""
    n = len(boxes)
    if n == 0:
        return np.zeros((0, 0), dtype=np.float32)
    if n == 1:
        return np.ones((1, 1), dtype=np.float32)
    desc = _box_descriptor(boxes)
    diff = desc[:, None, :] - desc[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    if not np.all(np.isfinite(dist)):
        raise NonFiniteError("non-finite pairwise distance between actor boxes")
    off = ~np.eye(n, dtype=bool)
    # closeness score: negate distances centered on the mean pairwise distance
    scores = -(dist - dist[off].mean())
    adj = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        row = scores[i].copy()
        vals = row[off[i]]
        norm = np.linalg.norm(vals)
        # a vanishing row means all pairs are (numerically) equidistant;
        # normalizing would amplify rounding noise to O(1)
        if norm > 1e-7:
            vals = vals / norm
        else:
            vals = np.zeros_like(vals)
        sig = 1.0 / (1.0 + np.exp(-vals))
        keep = sig >= sig.mean()
        out = np.zeros(n - 1)
        out[keep] = sig[keep]
        adj[i, off[i]] = out
    np.fill_diagonal(adj, 1.0)
    return adj.astype(np.float32)


def build_action_graph(boxes, roi_features, event_feature, event_w, event_b,
                       include_action_node=True, frame_index=-1):
    """Assemble the frame graph from selected actor boxes and features.

    `event_feature` enters as one extra node, projected to the node width
    by the learned affine map (event_w, event_b).
    """
    boxes = np.asarray(boxes, dtype=np.float32).reshape(-1, 4)
    n = boxes.shape[0]
    roi_features = np.asarray(roi_features, dtype=np.float32).reshape(n, -1) if n else np.zeros((0, 0), dtype=np.float32)
    node_feats = np.concatenate([roi_features, boxes], axis=1) if n else np.zeros((0, event_w.data.shape[1]), dtype=np.float32)

    adj = actor_adjacency(boxes)
    nodes = [ActorNode(feature=node_feats[i], box=tuple(map(float, boxes[i]))) for i in range(n)]

    if include_action_node:
        ev = ad.as_tensor(event_feature)
        row = ad.add(ad.matmul(ad.reshape(ev, (1, ev.data.size)), event_w), event_b)
        if n:
            if node_feats.shape[1] != row.data.shape[1]:
                raise ShapeError(
                    f"event projection width {row.data.shape[1]} != node width {node_feats.shape[1]}"
                )
            features = ad.concat([Tensor(node_feats), row], axis=0)
        else:
            features = row
        full = np.ones((n + 1, n + 1), dtype=np.float32)
        full[:n, :n] = adj
        nodes.append(ActorNode(feature=row.data[0].copy(), box=(0.0, 0.0, 0.0, 0.0), is_action_node=True))
        return ActionGraph(nodes=nodes, adjacency=full, features=features, frame_index=frame_index)

    features = Tensor(node_feats)
    return ActionGraph(nodes=nodes, adjacency=adj, features=features, frame_index=frame_index)


def spatial_smooth(graph, w_s):
    """One message-passing step: relu(A @ F @ W_s)."""
    if graph.features.data.shape[1] != w_s.data.shape[0]:
        raise ShapeError(
            f"spatial smoothing weight rows {w_s.data.shape[0]} != node feature width {graph.features.data.shape[1]}"
        )
    a = Tensor(graph.adjacency)
    return ad.relu(ad.matmul(ad.matmul(a, graph.features), w_s))


def smooth_stack(graph, weights):
    """Apply 0..k spatial smoothing layers; 0 layers returns the raw features."""
    feats = graph.features
    for w_s in weights:
        a = Tensor(graph.adjacency)
        feats = ad.relu(ad.matmul(ad.matmul(a, feats), w_s))
    return feats


def dump_graph(graph):
    """Adjacency and node table as line-delimited text, for debugging."""
    lines = []
    for i, node in enumerate(graph.nodes):
        kind = "action" if node.is_action_node else ("null" if node.is_null else "actor")
        box = " ".join(f"{v:.4f}" for v in node.box)
        lines.append(f"node {i} {kind} box {box}")
    for i in range(graph.n_nodes):
        row = " ".join(f"{v:.4f}" for v in graph.adjacency[i])
        lines.append(f"adj {i} {row}")
    return "\n".join(lines) + "\n"
