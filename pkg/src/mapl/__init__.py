"""Self-supervised multi-actor predictive learning for streaming feature
videos: single-pass training, action graphs, and clustering-based social
activity inference."""

from .autodiff import GradientDescent, Tape, Tensor, backward, gradient_check
from .config import Config, load_config, save_config
from .graphs import ActionGraph, build_action_graph, spatial_smooth
from .inference import infer_corpus, run_video
from .metrics import evaluate, format_report
from .predictor import SpatialPredictor, attention, global_loss, motion_mask, select_actors
from .registration import build_composite, pad_null, register, solve_assignment, temporal_smooth
from .streams import FrameFeatures, read_records, read_stream, write_records, write_stream
from .synthetic import CorpusSpec, SceneSpec, synth_generate
from .training import ModelParams, actor_loss, restore_model, save_checkpoint, total_loss, train_stream

__version__ = "0.1.0"
