import numpy as np
import pytest

from mapl.autodiff import Tensor, gradient_check
from mapl.config import Config, config_hash
from mapl.registration import PermutationMatrix
from mapl.streams import write_stream
from mapl.synthetic import SceneSpec, synth_generate
from mapl.training import (
    ModelParams,
    actor_loss,
    clip_total_loss,
    load_checkpoint,
    restore_model,
    save_checkpoint,
    total_loss,
    train_stream,
)


def small_config(**overrides):
    base = dict(
        event_dim=8, layers=1, attention_slots=12, spatial_layers=1, temporal_layers=1,
        learning_rate=1e-3, bptt_window=4, seed=0, k_group=2, k_action=4,
    )
    base.update(overrides)
    return Config(**base).validate()


def identity_perm(n):
    return PermutationMatrix(
        matrix=np.eye(n, dtype=np.float32),
        null_left=np.zeros(n, dtype=bool),
        null_right=np.zeros(n, dtype=bool),
    )


class TestActorLoss:
    def test_exact_anticipation_zero_loss(self):
        rng = np.random.default_rng(0)
        f_t = rng.standard_normal((2, 6)).astype(np.float32)
        w_act = Tensor(np.eye(6, dtype=np.float32))
        w_bb = Tensor(np.zeros((6, 4), dtype=np.float32))
        boxes = np.zeros((2, 4), dtype=np.float32)
        loss = actor_loss(Tensor(f_t), boxes, Tensor(f_t), boxes, identity_perm(2), w_act, w_bb)
        assert loss.item() == pytest.approx(0.0, abs=1e-6)

    def test_unit_feature_residual(self):
        # one actor, anticipated feature off by a unit vector, geometry exact
        f_t = np.array([[1.0, 0.0, 0.0, 0.0]], dtype=np.float32)
        f_n = np.array([[2.0, 0.0, 0.0, 0.0]], dtype=np.float32)  # residual norm 1
        w_act = Tensor(np.eye(4, dtype=np.float32))
        w_bb = Tensor(np.zeros((4, 4), dtype=np.float32))
        boxes = np.zeros((1, 4), dtype=np.float32)
        loss = actor_loss(Tensor(f_t), boxes, Tensor(f_n), boxes, identity_perm(1), w_act, w_bb)
        assert loss.item() == pytest.approx(1.0, rel=1e-6)

    def test_hand_combined_residuals(self):
        # feature residual norms 3 and 4; box residual norms 0.5 and 0
        f_t = np.zeros((2, 4), dtype=np.float32)
        f_n = np.array([[3.0, 0, 0, 0], [0, 4.0, 0, 0]], dtype=np.float32)
        w_act = Tensor(np.eye(4, dtype=np.float32))   # anticipates zeros
        w_bb = Tensor(np.zeros((4, 4), dtype=np.float32))  # anticipates zero boxes
        boxes_n = np.array([[0.5, 0, 0, 0], [0, 0, 0, 0]], dtype=np.float32)
        loss = actor_loss(Tensor(f_t), np.zeros((2, 4)), Tensor(f_n), boxes_n, identity_perm(2), w_act, w_bb)
        assert loss.item() == pytest.approx((3 + 0.5 + 4 + 0) / 2, rel=1e-6)

    def test_no_matched_pairs_zero(self):
        empty = PermutationMatrix(np.zeros((0, 0)), np.zeros(0, bool), np.zeros(0, bool))
        w = Tensor(np.eye(4, dtype=np.float32))
        loss = actor_loss(Tensor(np.zeros((0, 4))), None, Tensor(np.zeros((0, 4))), np.zeros((0, 4)), empty, w, w)
        assert loss.item() == 0.0

    def test_null_pairs_excluded(self):
        perm = PermutationMatrix(
            matrix=np.eye(2, dtype=np.float32),
            null_left=np.array([False, True]),
            null_right=np.array([False, True]),
        )
        f_t = np.ones((1, 4), dtype=np.float32)
        f_n = np.ones((1, 4), dtype=np.float32) * 3  # residual 4 if included
        w_act = Tensor(np.eye(4, dtype=np.float32))
        w_bb = Tensor(np.zeros((4, 4), dtype=np.float32))
        loss = actor_loss(Tensor(f_t), None, Tensor(f_n), np.zeros((1, 4)), perm, w_act, w_bb)
        assert loss.item() == pytest.approx(4.0, rel=1e-5)


class TestTotalLoss:
    def test_unit_weights(self):
        assert total_loss(Tensor(2.0), Tensor(3.0), 1.0, 1.0).item() == pytest.approx(5.0)

    def test_actor_weight_zero(self):
        assert total_loss(Tensor(2.0), Tensor(99.0), 1.0, 0.0).item() == pytest.approx(2.0)

    def test_hand_weighted(self):
        assert total_loss(Tensor(4.0), Tensor(1.0), 0.5, 2.0).item() == pytest.approx(4.0)


def write_scene(tmp_path, name, **kw):
    # 8x8 raster: attention cell spacing must not exceed actor box size,
    # or boxes can contain no cell center and selection starves
    defaults = dict(
        n_groups=2, actors_per_group=2, patterns=("linear_walk", "stationary"),
        noise=0.05, n_frames=8, seed=1, c=8, h=8, w=8, d=8,
    )
    defaults.update(kw)
    frames, records = synth_generate(SceneSpec(**defaults))
    path = tmp_path / name
    write_stream(frames, path)
    return path, frames, records


class TestTrainStream:
    def test_empty_stream_list(self):
        model, stats = train_stream([], small_config())
        assert stats.frames_read == 0
        assert stats.optimizer_steps == 0

    def test_single_pass_frame_counter(self, tmp_path):
        paths = []
        total = 0
        for i, nf in enumerate([6, 9]):
            p, frames, _ = write_scene(tmp_path, f"v{i}.mapf", n_frames=nf, seed=i)
            paths.append(p)
            total += nf
        model, stats = train_stream(paths, small_config())
        assert stats.frames_read == total
        assert stats.videos == 2

    def test_bounded_history(self, tmp_path):
        p, _, _ = write_scene(tmp_path, "v.mapf", n_frames=12)
        cfg = small_config(bptt_window=3)
        _, stats = train_stream([p], cfg)
        assert stats.peak_retained_frames <= 2
        assert stats.peak_retained_graphs <= cfg.bptt_window

    def test_determinism_byte_identical_checkpoints(self, tmp_path):
        p, _, _ = write_scene(tmp_path, "v.mapf")
        cfg = small_config(seed=5)
        out = []
        for run in range(2):
            model, stats = train_stream([p], cfg)
            ck = tmp_path / f"run{run}.mapc"
            save_checkpoint(model, stats.frames_read, config_hash(cfg), ck)
            out.append(ck.read_bytes())
        assert out[0] == out[1]

    def test_exact_constant_scene_has_zero_global_loss(self, tmp_path):
        # identical frames: the motion mask vanishes, so the masked
        # prediction error is identically zero
        p, _, _ = write_scene(
            tmp_path, "const.mapf", patterns=("stationary", "stationary"),
            noise=0.0, n_frames=10, seed=2,
        )
        _, stats = train_stream([p], small_config())
        assert all(row[2] == 0.0 for row in stats.loss_log)

    def test_loss_decreases_on_near_constant_scene(self, tmp_path):
        p, _, _ = write_scene(
            tmp_path, "const.mapf", patterns=("stationary", "stationary"),
            noise=0.02, n_frames=40, seed=2,
        )
        cfg = small_config(learning_rate=5e-3)
        _, stats = train_stream([p], cfg)
        lgs = [row[2] for row in stats.loss_log]
        assert lgs[-1] < lgs[0]

    def test_periodic_stream_total_loss_trend(self, tmp_path):
        p, _, _ = write_scene(
            tmp_path, "walk.mapf", patterns=("linear_walk", "crossing"),
            noise=0.0, n_frames=32, seed=3,
        )
        _, stats = train_stream([p], small_config(learning_rate=2e-3))
        totals = [row[4] for row in stats.loss_log]
        q = len(totals) // 4
        assert np.mean(totals[-q:]) < np.mean(totals[:q])

    def test_state_resets_between_videos(self, tmp_path):
        pa, fa, _ = write_scene(tmp_path, "a.mapf", seed=1)
        pb, fb, _ = write_scene(tmp_path, "b.mapf", seed=2)
        model, stats = train_stream([pa, pb], small_config())
        assert stats.videos == 2
        # one loss row per frame after the first of each video
        assert len(stats.loss_log) == (len(fa) - 1) + (len(fb) - 1)


class TestGradientIntegrity:
    def test_total_loss_gradcheck_on_clip(self, tmp_path):
        frames, _ = synth_generate(
            SceneSpec(
                n_groups=2, actors_per_group=2, patterns=("linear_walk", "stationary"),
                noise=0.0, n_frames=3, seed=4, c=4, h=4, w=4, d=6,
            )
        )
        cfg = small_config(event_dim=5, bptt_window=3)
        model = ModelParams(4, 6, cfg, np.random.default_rng(0))

        for name in ["w_act", "w_bb", "ws0", "wt0", "event_w", "proj_w", "lstm0_wxi"]:
            original = model.tensors[name]

            def f(theta, name=name, original=original):
                model.tensors[name] = theta
                loss = clip_total_loss(frames, model, cfg)
                model.tensors[name] = original
                return loss

            err = gradient_check(f, original, step=1e-3)
            assert err < 1e-4, f"{name}: {err}"


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        cfg = small_config()
        model = ModelParams(8, 8, cfg, np.random.default_rng(3))
        path = tmp_path / "model.mapc"
        save_checkpoint(model, 123, config_hash(cfg), path, hw=(4, 4))
        arrays, frames_trained, cfg_hash, dims = load_checkpoint(path)
        assert frames_trained == 123
        assert cfg_hash == config_hash(cfg)
        assert dims == (8, 4, 4, 8)
        for name, t in model.tensors.items():
            np.testing.assert_array_equal(arrays[name], t.data)

        # loading then saving reproduces the file byte for byte
        model2, ft = restore_model(path, cfg)
        assert ft == 123
        path2 = tmp_path / "model2.mapc"
        save_checkpoint(model2, ft, cfg_hash, path2, hw=(4, 4))
        assert path.read_bytes() == path2.read_bytes()

    def test_config_mismatch_rejected(self, tmp_path):
        cfg = small_config()
        model = ModelParams(8, 8, cfg, np.random.default_rng(3))
        path = tmp_path / "model.mapc"
        save_checkpoint(model, 1, config_hash(cfg), path)
        with pytest.raises(ValueError, match="different config"):
            restore_model(path, small_config(seed=99))
