"""Cross-frame actor registration and the composite spatio-temporal graph.

Consecutive action graphs are aligned with an exact Hungarian solve over a
feature-distance + IoU-distance cost; null nodes absorb appearances and
disappearances. Registered graphs stack into one composite graph whose
temporal edges link matched actors and consecutive event nodes.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .graphs import ActionGraph, ActorNode

NULL_BOX = (0.0, 0.0, 0.0, 0.0)


def solve_assignment(cost):
    """Exact minimum-cost perfect matching (Hungarian with potentials).

    Returns (col_of_row, total_cost) for a square cost matrix.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ShapeError(f"assignment needs a square matrix, got {cost.shape}")
    n = cost.shape[0]
    if n == 0:
        return np.zeros(0, dtype=int), 0.0
    if not np.all(np.isfinite(cost)):
        raise ValueError("assignment cost matrix contains non-finite entries")

    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)     # p[j]: row matched to column j (1-based)
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = np.inf
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = np.empty(n, dtype=int)
    col_of_row[p[1:] - 1] = np.arange(n)
    total = float(cost[np.arange(n), col_of_row].sum())
    return col_of_row, total


def box_iou(a, b):
    ix1, iy1 = max(a[0], b[0]), max(a[1], b[1])
    ix2, iy2 = min(a[2], b[2]), min(a[3], b[3])
    inter = max(0.0, ix2 - ix1) * max(0.0, iy2 - iy1)
    area_a = max(0.0, a[2] - a[0]) * max(0.0, a[3] - a[1])
    area_b = max(0.0, b[2] - b[0]) * max(0.0, b[3] - b[1])
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


@dataclass
class PermutationMatrix:
    """0/1 correspondence between two padded node sets of equal size N."""

    matrix: np.ndarray           # [N, N]
    null_left: np.ndarray        # bool[N]: padded rows (frame t side)
    null_right: np.ndarray       # bool[N]: padded cols (frame t+1 side)

    @property
    def size(self):
        return self.matrix.shape[0]

    def matched_real_pairs(self):
        """(i, j) index pairs where both endpoints are real actor nodes."""
        pairs = []
        for i, j in zip(*np.nonzero(self.matrix)):
            if not self.null_left[i] and not self.null_right[j]:
                pairs.append((int(i), int(j)))
        return pairs


def pad_null(graph, target_n):
    """Append null actor nodes (zero feature, degenerate box) up to target_n."""
    actors = graph.actor_indices
    n = len(actors)
    if target_n < n:
        raise ValueError(f"cannot pad down: {n} actors, target {target_n}")
    if target_n == n:
        return graph
    extra = target_n - n
    width = graph.features.data.shape[1]
    action = graph.action_index

    nulls = [ActorNode(feature=np.zeros(width, dtype=np.float32), box=NULL_BOX, is_null=True)
             for _ in range(extra)]
    if action is None:
        nodes = list(graph.nodes) + nulls
        feats = ad.concat([graph.features, Tensor(np.zeros((extra, width), dtype=np.float32))], axis=0)
    else:
        # keep the action node last: actors, nulls, action
        nodes = [graph.nodes[i] for i in actors] + nulls + [graph.nodes[action]]
        feats = ad.concat(
            [
                ad.take_rows(graph.features, actors),
                Tensor(np.zeros((extra, width), dtype=np.float32)),
                ad.take_rows(graph.features, [action]),
            ],
            axis=0,
        )
    m = len(nodes)
    adj = np.zeros((m, m), dtype=np.float32)
    adj[:n, :n] = graph.adjacency[np.ix_(actors, actors)]
    np.fill_diagonal(adj, 1.0)
    if action is not None:
        adj[m - 1, :n] = graph.adjacency[action, actors]
        adj[:n, m - 1] = graph.adjacency[actors, action]
        adj[m - 1, m - 1] = 1.0
    return ActionGraph(nodes=nodes, adjacency=adj, features=feats, frame_index=graph.frame_index)


def register(g_t, g_next, w1=1.0, w2=1.0, feats_t=None, feats_next=None):
    """Optimal actor correspondence between consecutive graphs.

    Pair cost is w1 * feature L2 distance + w2 * IoU distance; matching a
    real node to a null costs w1 * ||feature|| + w2. Action nodes never
    participate.

    feats_t / feats_next override node features for the cost (e.g. the
    post-smoothing representations); rows must align with graph node order.
    """
    actors_t = g_t.actor_indices
    actors_n = g_next.actor_indices
    real_t = [i for i in actors_t if not g_t.nodes[i].is_null]
    real_n = [j for j in actors_n if not g_next.nodes[j].is_null]
    n = max(len(real_t), len(real_n))
    if n == 0:
        return PermutationMatrix(np.zeros((0, 0)), np.zeros(0, bool), np.zeros(0, bool))

    def feature_rows(graph, indices, override):
        if override is not None:
            data = override.data if isinstance(override, Tensor) else np.asarray(override)
            return data[indices]
        return np.stack([graph.nodes[i].feature for i in indices]) if indices else np.zeros((0, 1))

    f_t = feature_rows(g_t, real_t, feats_t).astype(np.float64)
    f_n = feature_rows(g_next, real_n, feats_next).astype(np.float64)
    null_left = np.arange(n) >= len(real_t)
    null_right = np.arange(n) >= len(real_n)

    cost = np.zeros((n, n))
    norms_t = np.linalg.norm(f_t, axis=1) if len(real_t) else np.zeros(0)
    norms_n = np.linalg.norm(f_n, axis=1) if len(real_n) else np.zeros(0)
    for i in range(n):
        for j in range(n):
            if not null_left[i] and not null_right[j]:
                d_feat = np.linalg.norm(f_t[i] - f_n[j])
                d_iou = 1.0 - box_iou(g_t.nodes[real_t[i]].box, g_next.nodes[real_n[j]].box)
                cost[i, j] = w1 * d_feat + w2 * d_iou
            elif null_left[i] and null_right[j]:
                cost[i, j] = w2
            elif null_left[i]:
                cost[i, j] = w1 * norms_n[j] + w2
            else:
                cost[i, j] = w1 * norms_t[i] + w2

    col_of_row, _ = solve_assignment(cost)
    matrix = np.zeros((n, n), dtype=np.float32)
    matrix[np.arange(n), col_of_row] = 1.0
    return PermutationMatrix(matrix=matrix, null_left=null_left, null_right=null_right)


@dataclass
class CompositeGraph:
    """Whole-window graph: per-frame blocks plus temporal edges."""

    adjacency: np.ndarray        # [M, M]
    features: Tensor             # [M, D']
    frame_of_node: np.ndarray    # int[M]
    graphs: list
    offsets: list                # node offset of each frame block
    temporal_edges: list = field(default_factory=list)

    @property
    def n_nodes(self):
        return self.adjacency.shape[0]

    def actor_rows(self):
        """Global row indices of real (non-null, non-action) actor nodes."""
        rows = []
        for off, g in zip(self.offsets, self.graphs):
            rows.extend(off + i for i in g.real_actor_indices)
        return rows

    def node_row(self, frame_pos, local_index):
        return self.offsets[frame_pos] + local_index


def build_composite(graphs, perms, features=None):
    """Stack per-frame graphs; perms[i] registers graphs[i] -> graphs[i+1]."""
    if len(perms) != max(len(graphs) - 1, 0):
        raise ValueError(f"expected {len(graphs) - 1} permutations for {len(graphs)} graphs, got {len(perms)}")
    if not graphs:
        raise ValueError("composite needs at least one graph")
    if features is None:
        features = [g.features for g in graphs]

    offsets = []
    total = 0
    for g in graphs:
        offsets.append(total)
        total += g.n_nodes
    adj = np.zeros((total, total), dtype=np.float32)
    frame_of_node = np.zeros(total, dtype=int)
    for pos, (off, g) in enumerate(zip(offsets, graphs)):
        adj[off:off + g.n_nodes, off:off + g.n_nodes] = g.adjacency
        frame_of_node[off:off + g.n_nodes] = pos

    edges = []
    for pos, perm in enumerate(perms):
        g_a, g_b = graphs[pos], graphs[pos + 1]
        real_a = [i for i in g_a.actor_indices if not g_a.nodes[i].is_null]
        real_b = [j for j in g_b.actor_indices if not g_b.nodes[j].is_null]
        for i, j in perm.matched_real_pairs():
            a = offsets[pos] + real_a[i]
            b = offsets[pos + 1] + real_b[j]
            adj[a, b] = adj[b, a] = 1.0
            edges.append((a, b))
        act_a, act_b = g_a.action_index, g_b.action_index
        if act_a is not None and act_b is not None:
            a = offsets[pos] + act_a
            b = offsets[pos + 1] + act_b
            adj[a, b] = adj[b, a] = 1.0
            edges.append((a, b))

    stacked = features[0] if len(features) == 1 else ad.concat(features, axis=0)
    return CompositeGraph(
        adjacency=adj, features=stacked, frame_of_node=frame_of_node,
        graphs=list(graphs), offsets=offsets, temporal_edges=edges,
    )


def temporal_smooth(composite, w_t):
    """One message-passing step over the composite adjacency: relu(A F W)."""
    if composite.features.data.shape[1] != w_t.data.shape[0]:
        raise ShapeError(
            f"temporal smoothing weight rows {w_t.data.shape[0]} != feature width {composite.features.data.shape[1]}"
        )
    a = Tensor(composite.adjacency)
    return ad.relu(ad.matmul(ad.matmul(a, composite.features), w_t))


def temporal_smooth_stack(composite, weights):
    """Apply 0..k temporal smoothing layers; 0 layers returns raw features."""
    feats = composite.features
    for w_t in weights:
        a = Tensor(composite.adjacency)
        feats = ad.relu(ad.matmul(ad.matmul(a, feats), w_t))
    return feats
