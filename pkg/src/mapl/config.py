"""Run configuration: a flat key=value text file, override-friendly.

Unknown keys are rejected so stale experiment files fail loudly. The
config hash pins a checkpoint to the settings that produced it.
"""

import hashlib
from dataclasses import dataclass, fields


@dataclass
class Config:
    # predictor
    event_dim: int = 256
    layers: int = 2
    attention_slots: int = 16
    # smoothing / graph structure
    spatial_layers: int = 1
    temporal_layers: int = 1
    action_node: bool = True
    # objective
    lambda_global: float = 1.0
    lambda_actor: float = 1.0
    w_feature: float = 1.0
    w_iou: float = 1.0
    # optimization
    learning_rate: float = 1e-3
    bptt_window: int = 8
    seed: int = 0
    # inference
    k_group: int = 2
    k_action: int = 4
    k_mode: str = "gt"           # gt: use k as given; opt: elbow search in [k, 3k]
    membership_groups: int = 0   # 0: eigengap heuristic per frame

    def validate(self):
        if self.event_dim < 1 or self.layers < 1:
            raise ValueError("event_dim and layers must be >= 1")
        if self.attention_slots < 1:
            raise ValueError("attention_slots must be >= 1")
        if self.spatial_layers not in (0, 1, 2) or self.temporal_layers not in (0, 1, 2):
            raise ValueError("spatial_layers and temporal_layers must be 0, 1 or 2")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.bptt_window < 2:
            raise ValueError("bptt_window must be >= 2")
        if self.k_mode not in ("gt", "opt"):
            raise ValueError(f"k_mode must be 'gt' or 'opt', got {self.k_mode!r}")
        if self.k_group < 1 or self.k_action < 1:
            raise ValueError("k_group and k_action must be >= 1")
        return self


_BOOL_TRUE = {"true", "1", "yes", "on"}
_BOOL_FALSE = {"false", "0", "no", "off"}


def _parse_value(ftype, raw, key):
    if ftype is bool:
        low = raw.lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ValueError(f"config key {key}: cannot parse boolean from {raw!r}")
    return ftype(raw)


def apply_overrides(config, overrides):
    """Apply key=value override strings on top of a Config."""
    known = {f.name: f.type for f in fields(Config)}
    typemap = {"int": int, "float": float, "bool": bool, "str": str}
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        ftype = known[key]
        if isinstance(ftype, str):
            ftype = typemap[ftype]
        setattr(config, key, _parse_value(ftype, raw.strip(), key))
    return config


def load_config(path):
    lines = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            lines.append(line)
    return apply_overrides(Config(), lines).validate()


def save_config(config, path):
    with open(path, "w") as fh:
        fh.write(serialize_config(config))


def serialize_config(config):
    out = []
    for f in fields(Config):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        out.append(f"{f.name}={value}")
    return "\n".join(out) + "\n"


# fields that shape the trained parameters or the training trajectory;
# inference-only clustering knobs (k_*, membership_groups) stay out so a
# checkpoint can be re-clustered with different k at evaluation time
TRAINING_FIELDS = (
    "event_dim", "layers", "attention_slots", "spatial_layers", "temporal_layers",
    "action_node", "lambda_global", "lambda_actor", "w_feature", "w_iou",
    "learning_rate", "bptt_window", "seed",
)


def config_hash(config):
    parts = [f"{name}={getattr(config, name)}" for name in TRAINING_FIELDS]
    return hashlib.sha256("\n".join(parts).encode()).hexdigest()[:16]
