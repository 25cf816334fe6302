"""Prediction-error attention: where the scene is hard to anticipate,
actors get selected."""

import numpy as np

from mapl.autodiff import Tensor
from mapl.config import Config
from mapl.predictor import attention, global_loss, motion_mask, select_actors
from mapl.synthetic import SceneSpec, synth_generate
from mapl.training import ModelParams

spec = SceneSpec(
    n_groups=2, actors_per_group=2,
    patterns=("linear_walk", "stationary"),  # one moving group, one parked
    noise=0.02, n_frames=6, seed=7,
)
frames, records = synth_generate(spec)
cfg = Config(event_dim=16, layers=1, attention_slots=8).validate()
model = ModelParams(spec.c, spec.d, cfg, np.random.default_rng(0))

state = None
pred_map = None
prev = None
alpha = None
for frame in frames:
    if prev is not None:
        mask = motion_mask(prev.global_map, frame.global_map)
        loss, error_map = global_loss(pred_map, Tensor(frame.global_map), mask)
        alpha = attention(Tensor(error_map.data.copy()))
        selected = select_actors(alpha, prev.rois, cfg.attention_slots)
        moving = sum(
            1 for i in selected
            if any(r.membership_id == 0 and abs((r.box[0] + r.box[2]) / 2 - (prev.rois[i][0] + prev.rois[i][2]) / 2) < 0.05
                   for r in records if r.frame_index == prev.frame_index)
        )
        print(
            f"frame {prev.frame_index}: global loss {float(loss.data):6.3f}, "
            f"attention peak {alpha.data.max():.3f}, selected {len(selected)}/{prev.n_rois} rois "
            f"({moving} near the walking group)"
        )
    pred_map, event, state = model.predictor.step(frame.global_map, state, model.tensors)
    prev = frame

print("\nattention map for the last scored frame (uniform is 1/64 = 0.016):")
for row in alpha.data:
    print("  " + " ".join(f"{v:.3f}" for v in row))
