"""Spatiotemporal prediction of future global features.

An L-layer LSTM stack runs at every spatial location with shared weights,
anticipating the next frame's feature map. The spatial mean of the top
hidden state is the running event representation; per-location prediction
errors, gated by a motion mask, drive actor selection.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor


class SpatialPredictor:
    """Shared-weight recurrent stack over the H*W grid of a feature map."""

    def __init__(self, channels, event_dim=256, layers=2):
        self.channels = channels
        self.event_dim = event_dim
        self.layers = layers

    def init_params(self, rng):
        """Glorot-uniform gate weights; forget bias starts at 1."""
        params = {}
        for l in range(self.layers):
            fan_in = self.channels if l == 0 else self.event_dim
            for gate in "ifgo":
                limit = np.sqrt(6.0 / (fan_in + self.event_dim))
                params[f"lstm{l}_wx{gate}"] = Tensor(
                    rng.uniform(-limit, limit, (fan_in, self.event_dim)).astype(np.float32),
                    requires_grad=True,
                )
                limit = np.sqrt(6.0 / (2 * self.event_dim))
                params[f"lstm{l}_wh{gate}"] = Tensor(
                    rng.uniform(-limit, limit, (self.event_dim, self.event_dim)).astype(np.float32),
                    requires_grad=True,
                )
                bias = np.ones(self.event_dim) if gate == "f" else np.zeros(self.event_dim)
                params[f"lstm{l}_b{gate}"] = Tensor(bias.astype(np.float32), requires_grad=True)
        limit = np.sqrt(6.0 / (self.event_dim + self.channels))
        params["proj_w"] = Tensor(
            rng.uniform(-limit, limit, (self.event_dim, self.channels)).astype(np.float32),
            requires_grad=True,
        )
        params["proj_b"] = Tensor(np.zeros(self.channels, dtype=np.float32), requires_grad=True)
        return params

    def init_state(self, n_locations):
        zeros = lambda: Tensor(np.zeros((n_locations, self.event_dim), dtype=np.float32))
        return [(zeros(), zeros()) for _ in range(self.layers)]

    def step(self, f_t, state, params):
        """One recurrent step: (F_hat_next [C,H,W], event [E], new state)."""
        c, h, w = f_t.shape if not isinstance(f_t, Tensor) else f_t.data.shape
        if c != self.channels:
            raise ShapeError(f"feature map has {c} channels, predictor expects {self.channels}")
        x = ad.transpose(ad.reshape(ad.as_tensor(f_t), (c, h * w)))  # [HW, C]
        if state is None:
            state = self.init_state(h * w)
        new_state = []
        for l, (h_prev, c_prev) in enumerate(state):
            gi = self._gate(x, h_prev, params, l, "i", ad.sigmoid)
            gf = self._gate(x, h_prev, params, l, "f", ad.sigmoid)
            gg = self._gate(x, h_prev, params, l, "g", ad.tanh)
            go = self._gate(x, h_prev, params, l, "o", ad.sigmoid)
            c_new = ad.add(ad.mul(gf, c_prev), ad.mul(gi, gg))
            h_new = ad.mul(go, ad.tanh(c_new))
            new_state.append((h_new, c_new))
            x = h_new
        event = ad.mean(x, axis=0)  # [E]
        pred = ad.add(ad.matmul(x, params["proj_w"]), params["proj_b"])  # [HW, C]
        pred_map = ad.reshape(ad.transpose(pred), (c, h, w))
        return pred_map, event, new_state

    @staticmethod
    def _gate(x, h_prev, params, layer, gate, activation):
        pre = ad.add(
            ad.add(ad.matmul(x, params[f"lstm{layer}_wx{gate}"]),
                   ad.matmul(h_prev, params[f"lstm{layer}_wh{gate}"])),
            params[f"lstm{layer}_b{gate}"],
        )
        return activation(pre)


def motion_mask(f_t, f_next):
    """Channel-mean absolute temporal difference, max-normalized to [0,1]."""
    a = f_t.data if isinstance(f_t, Tensor) else np.asarray(f_t)
    b = f_next.data if isinstance(f_next, Tensor) else np.asarray(f_next)
    if a.shape != b.shape:
        raise ShapeError(f"motion_mask shapes do not conform: {a.shape} vs {b.shape}")
    diff = np.abs(b.astype(np.float32) - a.astype(np.float32)).mean(axis=0)
    peak = diff.max()
    if peak > 0:
        diff = diff / peak
    return diff


def global_loss(pred_map, f_next, mask):
    """Masked per-location prediction error; returns (scalar loss, error map)."""
    pred = ad.as_tensor(pred_map)
    actual = ad.as_tensor(f_next)
    if pred.data.shape != actual.data.shape:
        raise ShapeError(f"global_loss shapes do not conform: {pred.data.shape} vs {actual.data.shape}")
    c, h, w = pred.data.shape
    diff = ad.sub(actual, pred)
    norms = ad.l2norm(ad.reshape(diff, (c, h * w)), axis=0)   # [HW]
    error_map = ad.mul(ad.reshape(norms, (h, w)), ad.as_tensor(np.asarray(mask, dtype=np.float32)))
    loss = ad.mean(error_map)
    return loss, error_map


def attention(error_map):
    """Softmax of the flattened error map; sums to 1, entries in (0,1)."""
    p = ad.as_tensor(error_map)
    values = p.data
    if np.any(values < 0):
        raise ValueError("error map must be nonnegative")
    h, w = values.shape
    return ad.reshape(ad.softmax(ad.reshape(p, (h * w,)), axis=0), (h, w))


def top_k_cells(attn, k):
    """Indices of the k largest cells, ties broken in row-major order."""
    values = attn.data if isinstance(attn, Tensor) else np.asarray(attn)
    flat = values.reshape(-1)
    order = np.argsort(-flat, kind="stable")
    return order[: min(k, flat.size)]


def select_actors(attn, rois, k):
    """ROIs claimed by the top-k attention cell centers.

    Each slot claims at most one ROI (first containing box in input order),
    so at most k actors come back; order follows the input ROI list.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    values = attn.data if isinstance(attn, Tensor) else np.asarray(attn)
    h, w = values.shape
    boxes = np.asarray(rois, dtype=np.float32).reshape(-1, 4)
    if boxes.shape[0] == 0:
        return []
    cells = top_k_cells(values, k)
    cy = (cells // w + 0.5) / h
    cx = (cells % w + 0.5) / w
    chosen = set()
    for x, y in zip(cx, cy):
        for i, (x1, y1, x2, y2) in enumerate(boxes):
            if i not in chosen and x1 <= x <= x2 and y1 <= y <= y2:
                chosen.add(i)
                break
    return sorted(chosen)
