"""One streaming pass over a synthetic corpus, watching the losses fall."""

import tempfile
from pathlib import Path

import numpy as np

from mapl.config import Config
from mapl.streams import write_stream
from mapl.synthetic import CorpusSpec, synth_generate
from mapl.training import train_stream

tmp = Path(tempfile.mkdtemp())
corpus = CorpusSpec(
    templates=[("linear_walk", "stationary"), ("queueing", "crossing")],
    videos_per_template=4, actors_per_group=3, noise=0.05, n_frames=24, seed=1,
)
paths = []
for i, spec in enumerate(corpus.scene_specs()):
    frames, _ = synth_generate(spec)
    p = tmp / f"v{i:03d}.mapf"
    write_stream(frames, p)
    paths.append(p)

cfg = Config(event_dim=32, layers=1, attention_slots=16, learning_rate=1e-3,
             bptt_window=8, seed=0).validate()
model, stats = train_stream(paths, cfg)

print(f"single pass over {stats.videos} videos / {stats.frames_read} frames")
print(f"optimizer steps {stats.optimizer_steps}, skipped {stats.skipped_steps}")
print(f"peak retained history: {stats.peak_retained_frames} frames + "
      f"{stats.peak_retained_graphs} graphs (window {cfg.bptt_window})")

log = np.array([(row[2], row[3], row[4]) for row in stats.loss_log])
chunks = np.array_split(log, 8)
print("\n      global     actor     total   (means over successive eighths)")
for i, chunk in enumerate(chunks):
    g, a, t = chunk.mean(axis=0)
    print(f"  {i}: {g:8.4f}  {a:8.4f}  {t:8.4f}")
