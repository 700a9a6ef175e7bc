"""Invariant suites: randomized checks of each module's stated properties.

Linear-algebra properties run over at least 1000 random cases; the heavier
geometric/rendering checks run over enough scenes to be convincing while
keeping the whole file fast.
"""

import numpy as np
import pytest

from posewarp.evaluate import PredictionRecord, evaluate, pose_bin
from posewarp.fitting import FitConfig, estimate_pose, fit_frame
from posewarp.lp import sample_pose_increment
from posewarp.manifest import ManifestEntry
from posewarp.morphable import (
    FitParams,
    PoseAngles,
    check_rotation,
    euler_from_rotation,
    pose_to_camera,
    project,
    reconstruct_shape,
    rotation_from_euler,
)
from posewarp.preprocess import Aug2DConfig, ROI_SIZE, apply_plan, make_video_plan
from posewarp.render import SceneMesh, build_scene_mesh, estimate_background_depth, rasterize, rotate_scene
from posewarp.segment import Reason, WordBoundary, balance_split, decide_segment
from posewarp.seeding import derive_seed

from synth import (
    centered_face_params,
    landmarks_for,
    make_model,
    make_params,
    smooth_texture,
)

N_CASES = 1000


class TestMorphableProperties:
    def test_reconstruction_linearity(self):
        model = make_model(n_vertices=60, k_id=6, k_exp=4, seed=0)
        rng = np.random.default_rng(1)
        mean = reconstruct_shape(model, np.zeros(6), np.zeros(4))
        for _ in range(N_CASES):
            a, b = rng.normal(size=2)
            p = rng.normal(size=10)
            q = rng.normal(size=10)
            disp_p = reconstruct_shape(model, p[:6], p[6:]) - mean
            disp_q = reconstruct_shape(model, q[:6], q[6:]) - mean
            combo = a * p + b * q
            got = reconstruct_shape(model, combo[:6], combo[6:])
            np.testing.assert_allclose(got, mean + a * disp_p + b * disp_q, atol=1e-10)

    def test_projection_commutes_with_pre_rotation(self):
        rng = np.random.default_rng(2)
        shape = rng.normal(scale=30.0, size=(3, 40))
        for _ in range(N_CASES):
            R = rotation_from_euler(PoseAngles(
                yaw=rng.uniform(-180, 180), pitch=rng.uniform(-89, 89), roll=rng.uniform(-180, 180)))
            Q = rotation_from_euler(PoseAngles(
                yaw=rng.uniform(-180, 180), pitch=rng.uniform(-89, 89), roll=rng.uniform(-180, 180)))
            f = rng.uniform(0.5, 3.0)
            t = rng.uniform(-50, 50, size=2)
            p_combined = FitParams(scale=f, rotation=R @ Q, translation=t,
                                   id_coeffs=np.zeros(1), exp_coeffs=np.zeros(1))
            p_plain = FitParams(scale=f, rotation=R, translation=t,
                                id_coeffs=np.zeros(1), exp_coeffs=np.zeros(1))
            np.testing.assert_allclose(
                project(shape, p_combined), project(Q @ shape, p_plain), atol=1e-10)

    def test_euler_round_trip_1000(self):
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(N_CASES):
            angles = PoseAngles(yaw=rng.uniform(-180, 180), pitch=rng.uniform(-85, 85),
                                roll=rng.uniform(-180, 180))
            back = euler_from_rotation(rotation_from_euler(angles))
            err = max(abs(back.yaw - angles.yaw), abs(back.pitch - angles.pitch),
                      abs(back.roll - angles.roll))
            # Yaw/roll wrap at +-180: compare via rotation matrices instead.
            R1 = rotation_from_euler(angles)
            R2 = rotation_from_euler(back)
            np.testing.assert_allclose(R1, R2, atol=1e-9)
            if err < 180.0:
                worst = max(worst, err)
        assert worst < 1e-9


def _noisy_case(rng, model):
    params = make_params(model, seed=int(rng.integers(1 << 31)))
    Y = landmarks_for(model, params)
    return Y + rng.normal(scale=rng.uniform(0.0, 1.0), size=Y.shape)


class TestFittingProperties:
    CFG = FitConfig(max_alternations=6, convergence_tol=1e-12, reg_id=1e-6, reg_exp=1e-6)

    def test_rmse_monotone_and_rotation_orthonormal(self):
        model = make_model(n_vertices=80, k_id=5, k_exp=4, seed=4)
        rng = np.random.default_rng(5)
        for _ in range(N_CASES):
            res = fit_frame(model, _noisy_case(rng, model), self.CFG)
            hist = np.array(res.rmse_history)
            assert (np.diff(hist) <= 1e-9).all()
            check_rotation(res.params.rotation, tol=1e-6)

    def test_translation_equivariance(self):
        model = make_model(n_vertices=80, k_id=5, k_exp=4, seed=6)
        rng = np.random.default_rng(7)
        for _ in range(N_CASES):
            Y = _noisy_case(rng, model)
            shift = rng.uniform(-100, 100, size=2)
            a = fit_frame(model, Y, self.CFG)
            b = fit_frame(model, Y + shift[:, None], self.CFG)
            np.testing.assert_allclose(b.params.translation,
                                       a.params.translation + shift, atol=1e-9)
            np.testing.assert_allclose(b.params.rotation, a.params.rotation, atol=1e-9)
            assert abs(b.params.scale - a.params.scale) < 1e-9
            np.testing.assert_allclose(b.params.id_coeffs, a.params.id_coeffs, atol=1e-9)

    def test_scale_equivariance(self):
        model = make_model(n_vertices=80, k_id=5, k_exp=4, seed=8)
        rng = np.random.default_rng(9)
        cfg = FitConfig(max_alternations=6, convergence_tol=1e-12, reg_id=1e-12, reg_exp=1e-12)
        for _ in range(N_CASES):
            Y = _noisy_case(rng, model)
            c = rng.uniform(0.3, 3.0)
            a = fit_frame(model, Y, cfg)
            b = fit_frame(model, c * Y, cfg)
            assert abs(b.params.scale - c * a.params.scale) < 1e-6 * max(1.0, a.params.scale)
            np.testing.assert_allclose(b.params.translation, c * a.params.translation,
                                       atol=1e-6 * max(1.0, np.abs(a.params.translation).max()))
            np.testing.assert_allclose(b.params.rotation, a.params.rotation, atol=1e-6)
            np.testing.assert_allclose(
                np.concatenate([b.params.id_coeffs, b.params.exp_coeffs]),
                np.concatenate([a.params.id_coeffs, a.params.exp_coeffs]), atol=1e-6)


def _random_scene(seed, size=40, n_vertices=80):
    model = make_model(n_vertices=n_vertices, seed=seed)
    params = centered_face_params(model, size, seed=seed + 1)
    img = smooth_texture(size, size, seed=seed + 2)
    shape = reconstruct_shape(model, params.id_coeffs, params.exp_coeffs)
    cam = pose_to_camera(shape, params)
    anchors = estimate_background_depth(cam, img, grid_step=8)
    mesh = build_scene_mesh(shape, params, img, anchors)
    return model, params, img, mesh


class TestRenderProperties:
    def test_render_deterministic(self):
        for seed in range(5):
            _, _, img, mesh = _random_scene(seed)
            rotated = rotate_scene(mesh, 18.0, -7.0)
            a = rasterize(rotated, img, (img.shape[1], img.shape[0]))
            b = rasterize(rotated, img, (img.shape[1], img.shape[0]))
            np.testing.assert_array_equal(a, b)

    def test_triangle_order_invariance(self):
        rng = np.random.default_rng(10)
        for seed in range(20):
            _, _, img, mesh = _random_scene(seed + 20)
            rotated = rotate_scene(mesh, float(rng.uniform(-30, 30)), float(rng.uniform(-20, 20)))
            out = rasterize(rotated, img, (img.shape[1], img.shape[0]))
            perm = rng.permutation(rotated.triangles.shape[0])
            shuffled = SceneMesh(vertices=rotated.vertices, uv=rotated.uv,
                                 triangles=rotated.triangles[perm],
                                 face_vertex_mask=rotated.face_vertex_mask)
            np.testing.assert_array_equal(rasterize(shuffled, img, (img.shape[1], img.shape[0])), out)

    def test_identity_warp_exact(self):
        for seed in range(10):
            _, _, img, mesh = _random_scene(seed + 50)
            out = rasterize(mesh, img, (img.shape[1], img.shape[0]))
            np.testing.assert_array_equal(out, img)

    def test_rotated_landmarks_match_direct_projection(self):
        for seed in range(50):
            model, params, img, mesh = _random_scene(seed + 80)
            dyaw, dpitch = 25.0, -10.0
            rotated = rotate_scene(mesh, dyaw, dpitch)
            # Direct: rotate the camera-space landmark points about the same pivot.
            shape = reconstruct_shape(model, params.id_coeffs, params.exp_coeffs)
            cam = pose_to_camera(shape, params)
            pivot = cam.mean(axis=1, keepdims=True)
            R = rotation_from_euler(PoseAngles(yaw=dyaw, pitch=dpitch))
            direct = (R @ (cam - pivot) + pivot)[:2, model.landmark_indices]
            mesh_lm = rotated.vertices[:2, :model.n_vertices][:, model.landmark_indices]
            assert np.abs(mesh_lm - direct).max() < 0.5


class TestLpProperties:
    def test_increment_distribution_and_signs(self):
        pos = PoseAngles(yaw=4.0, pitch=2.0)
        neg = PoseAngles(yaw=-4.0, pitch=-2.0)
        for pose, sy, sp in ((pos, 1.0, 1.0), (neg, -1.0, -1.0)):
            yaws, pitches = [], []
            for seed in range(10_000):
                inc = sample_pose_increment(derive_seed(seed, "prop"), pose)
                yaws.append(inc.delta_yaw)
                pitches.append(inc.delta_pitch)
            yaws = np.array(yaws) * sy
            pitches = np.array(pitches) * sp
            assert (yaws >= 0.0).all() and (yaws <= 45.0).all()
            assert (pitches >= 0.0).all() and (pitches <= 30.0).all()
            assert abs(yaws.mean() - 22.5) < 1.0
            assert abs(pitches.mean() - 15.0) < 1.0


class TestPreprocessProperties:
    def test_plans_video_consistent_and_in_range(self):
        cfg = Aug2DConfig()
        for seed in range(10_000):
            plan = make_video_plan(cfg, seed)
            again = make_video_plan(cfg, seed)
            assert plan.flip == again.flip and plan.crop_x == again.crop_x
            assert plan.scale == again.scale and plan.degrade == again.degrade
            assert 0.8 <= plan.scale <= 1.2
            assert 0.4 <= plan.degrade <= 0.8
            assert 0 <= plan.crop_x <= 8 and 0 <= plan.crop_y <= 8
            assert 1 <= len(plan.patches) <= 3
            for p in plan.patches:
                frac = (p.width * p.height) / float(ROI_SIZE ** 2)
                assert 0.01 <= frac <= 0.16

    def test_flip_frequency_10k(self):
        cfg = Aug2DConfig()
        flips = sum(make_video_plan(cfg, seed).flip for seed in range(10_000))
        assert abs(flips / 10_000 - 0.5) <= 0.02

    def test_output_always_88(self):
        cfg = Aug2DConfig()
        img = smooth_texture(96, 96, seed=11)
        for seed in range(50):
            assert apply_plan(img, make_video_plan(cfg, seed)).shape == (88, 88, 3)


class TestSegmentProperties:
    def test_rejection_reasons_priority(self):
        rng = np.random.default_rng(12)
        for _ in range(N_CASES):
            n = int(rng.integers(29, 200))
            start = int(rng.integers(0, n))
            end = int(rng.integers(start, n))
            b = WordBoundary("W", start, end)
            d = decide_segment(b, n)
            i_mid = (start + end) // 2
            duration = end - start + 1
            if duration < 5:
                assert d.reason is Reason.TOO_SHORT
            elif duration > 31:
                assert d.reason is Reason.TOO_LONG
            elif i_mid <= 12 or i_mid < 14:
                assert d.reason is Reason.TOO_EARLY
            elif i_mid >= n - 12 or i_mid + 14 >= n:
                assert d.reason is Reason.TOO_LATE
            else:
                assert d.accepted and d.reason is Reason.OK
                assert d.window == (i_mid - 14, i_mid + 14)

    def test_partition_caps_determinism(self):
        rng = np.random.default_rng(13)
        vocab = {f"W{k}" for k in range(20)}
        words = sorted(vocab)
        instances = [(f"i{k:06d}", words[int(rng.integers(0, 20))]) for k in range(3000)]
        res = balance_split(instances, vocab, seed=4)
        assert sorted(i for i, _, _ in res.assignments) == sorted(i for i, _ in instances)
        split_of = {}
        for inst, _, split in res.assignments:
            assert inst not in split_of
            split_of[inst] = split
        for word, c in res.counts.items():
            assert c["train"] <= 90 and c["val"] <= 10
        again = balance_split(list(reversed(instances)), vocab, seed=4)
        assert sorted(res.assignments) == sorted(again.assignments)


class TestEvaluateProperties:
    def test_bin_partition_exact(self):
        for a in np.linspace(0.0, 90.0, 2001):
            hits = [i for i in range(5)
                    if (i < 4 and 15.0 * i <= a < 15.0 * (i + 1))
                    or (i == 4 and 60.0 <= a <= 90.0)]
            assert len(hits) == 1
            assert pose_bin(float(a)) == hits[0]

    def test_overall_equals_weighted_bin_mean(self):
        rng = np.random.default_rng(14)
        for trial in range(50):
            n = int(rng.integers(1, 300))
            manifest, preds = [], []
            for k in range(n):
                manifest.append(ManifestEntry(
                    entry_id=f"t{trial}e{k}", path="p", word="W", split="test", frame_count=29,
                    mean_abs_yaw=float(rng.uniform(0, 100)), mean_abs_pitch=float(rng.uniform(0, 100))))
                ok = rng.random() < 0.5
                preds.append(PredictionRecord(f"t{trial}e{k}", "W" if ok else "X", "W"))
            report = evaluate(preds, manifest)
            for table in (report.yaw_table, report.pitch_table):
                weighted = sum(b.count * b.accuracy for b in table.bins if b.count)
                assert abs(weighted / report.total - report.overall_accuracy) < 1e-9
            shuffled = [preds[i] for i in rng.permutation(n)]
            assert evaluate(shuffled, manifest).overall_accuracy == report.overall_accuracy
