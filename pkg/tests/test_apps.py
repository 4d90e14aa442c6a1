import numpy as np
import pytest

from warpgen import apps
from warpgen.containers import load_gdf
from warpgen.errors import ShapeError
from warpgen.nets import GeneratorBundle, NetConfig, sample_video

CFG = NetConfig(latent_dim=16, widths=(16, 12, 8, 8), motion_freqs=4, init_mode="xavier")


@pytest.fixture(scope="module")
def sampled():
    return sample_video(GeneratorBundle(CFG, seed=3), seed=5, n_frames=6)


def random_fields(t=4, h=8, w=8, scale=1.5, seed=0):
    return np.random.default_rng(seed).normal(0, scale, (t, 2, h, w)).astype(np.float32)


class TestPropagateEdit:
    def test_unmodified_canonical_reproduces_video(self, sampled):
        clip = apps.propagate_edit(sampled.canonical, sampled.fields)
        assert np.array_equal(clip.frames, sampled.frames)

    def test_zero_fields_copy_canonical(self):
        img = np.random.default_rng(1).normal(size=(3, 8, 8)).astype(np.float32)
        clip = apps.propagate_edit(img, np.zeros((5, 2, 8, 8), np.float32))
        for t in range(5):
            assert np.array_equal(clip.frames[t], img)

    def test_translation_moves_edit_opposite(self):
        # backward warp: offsets (d, 0) read from x+d, so an edit at
        # canonical x shows up at output x-d
        img = np.zeros((3, 8, 8), np.float32)
        img[:, 4, 5] = 1.0
        fields = np.zeros((2, 2, 8, 8), np.float32)
        fields[:, 0] = 2.0
        clip = apps.propagate_edit(img, fields)
        assert clip.frames[0][0, 4, 3] == 1.0
        assert clip.frames[0][0, 4, 5] == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            apps.propagate_edit(np.zeros((3, 8, 8)), np.zeros((2, 2, 16, 16)))


class TestPropagateMask:
    def test_matches_thresholded_edit(self):
        rng = np.random.default_rng(2)
        mask = (rng.uniform(size=(8, 8)) > 0.6).astype(np.uint8)
        fields = random_fields(seed=3)
        seq = apps.propagate_mask(mask, fields)
        as_image = np.broadcast_to(mask.astype(np.float32), (3, 8, 8))
        clip = apps.propagate_edit(np.array(as_image), fields)
        want = (clip.frames[:, 0] >= 0.5).astype(np.uint8)
        assert np.array_equal(seq.masks, want)

    def test_zero_fields_identity(self):
        mask = np.zeros((8, 8), np.uint8)
        mask[2:5, 3:6] = 1
        seq = apps.propagate_mask(mask, np.zeros((3, 2, 8, 8), np.float32))
        for t in range(3):
            assert np.array_equal(seq.masks[t], mask)

    def test_masks_are_binary(self):
        mask = (np.random.default_rng(0).uniform(size=(8, 8)) > 0.5).astype(np.uint8)
        seq = apps.propagate_mask(mask, random_fields(seed=1))
        assert seq.masks.dtype == np.uint8
        assert np.isin(seq.masks, (0, 1)).all()

    def test_rejects_soft_mask(self):
        with pytest.raises(ValueError):
            apps.propagate_mask(np.full((8, 8), 0.3), random_fields())

    def test_save_round_trip(self, tmp_path):
        mask = np.eye(8, dtype=np.uint8)
        seq = apps.propagate_mask(mask, np.zeros((2, 2, 8, 8), np.float32))
        path = str(tmp_path / "m.gdf")
        seq.save(path)
        assert np.array_equal(load_gdf(path)[:, 0], seq.masks.astype(np.float32))


class TestTrackPoint:
    def test_zero_fields_integer_point_exact(self):
        traj = apps.track_point((3.0, 5.0), np.zeros((4, 2, 8, 8), np.float32))
        assert np.array_equal(traj.positions, np.tile([3.0, 5.0], (4, 1)))
        assert traj.residuals.max() == 0.0
        assert traj.valid.all()

    def test_zero_fields_fractional_point(self):
        traj = apps.track_point((3.4, 5.7), np.zeros((3, 2, 16, 16), np.float32))
        assert np.abs(traj.positions - [3.4, 5.7]).max() < 1e-3
        assert traj.valid.all()

    def test_global_translation_closed_form(self):
        # constant offsets (d_t, 0): the point lands at (x - d_t, y)
        fields = np.zeros((3, 2, 16, 16), np.float32)
        for t, d in enumerate((1.0, 2.5, -1.25)):
            fields[t, 0] = d
        traj = apps.track_point((8.0, 6.0), fields)
        want = np.array([[7.0, 6.0], [5.5, 6.0], [9.25, 6.0]])
        assert np.abs(traj.positions - want).max() < 1e-3
        assert traj.residuals.max() < 1e-3
        assert traj.valid.all()

    def test_unreachable_point_invalid(self):
        fields = np.full((2, 2, 8, 8), 20.0, np.float32)
        traj = apps.track_point((3.0, 3.0), fields)
        assert not traj.valid.any()
        assert traj.residuals.min() > 1.0

    def test_point_outside_rejected(self):
        with pytest.raises(ValueError):
            apps.track_point((9.0, 2.0), np.zeros((2, 2, 8, 8), np.float32))

    def test_json_round_trip(self):
        traj = apps.track_point((2.0, 2.0), random_fields(seed=5, scale=0.5))
        back = apps.Trajectory.from_json(traj.to_json())
        assert np.array_equal(back.positions, traj.positions)
        assert np.array_equal(back.valid, traj.valid)

    def test_smooth_field_refinement_beats_grid(self):
        # a linear-in-x offset field: s(x) = x + 0.2x = 1.2x, so the exact
        # preimage of p.x = 6 is x = 5; the integer argmin alone cannot be
        # more than .5 px off, refinement should land within .05
        h = w = 16
        fields = np.zeros((1, 2, h, w), np.float32)
        fields[0, 0] = 0.2 * np.arange(w)[None, :]
        traj = apps.track_point((6.0, 8.0), fields)
        assert abs(traj.positions[0, 0] - 5.0) < 0.05
        assert traj.valid[0]


class TestResampleMotion:
    def test_canonical_shared_fields_differ(self):
        bundle = GeneratorBundle(CFG, seed=3)
        results = apps.resample_motion(bundle, seed=7, n_frames=4, motion_seeds=[1, 2, 3])
        for r in results[1:]:
            assert np.array_equal(r.canonical, results[0].canonical)
            assert not np.array_equal(r.fields, results[0].fields)

    def test_same_motion_seed_identical(self):
        bundle = GeneratorBundle(CFG, seed=3)
        a, b = apps.resample_motion(bundle, seed=7, n_frames=4, motion_seeds=[9, 9])
        assert np.array_equal(a.fields, b.fields)
        assert np.array_equal(a.frames, b.frames)
