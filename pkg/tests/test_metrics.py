import numpy as np
import pytest

from auglift.metrics import MetricReport, auc, evaluate_poses, mpjpe, p_mpjpe, pck


def random_rotation(rng) -> np.ndarray:
    """Uniform random rotation via QR with sign fix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def grid_search_p_mpjpe(pred, gt, step_deg=2.0) -> float:
    """Independent oracle: dense rotation grid, closed-form scale/translation.

    Searches the same least-squares objective as Procrustes alignment: for
    every rotation on a z-y-z Euler grid, the optimal scale/translation have
    closed forms, and the rotation minimizing the summed squared residual is
    kept.  Returns the mean joint distance at that grid optimum.
    """
    pred = np.asarray(pred, float)
    gt = np.asarray(gt, float)
    mu_p, mu_g = pred.mean(0), gt.mean(0)
    pc, gc = pred - mu_p, gt - mu_g
    denom = (pc**2).sum()

    step = np.deg2rad(step_deg)
    alphas = np.arange(0.0, 2 * np.pi, step)
    betas = np.arange(0.0, np.pi + step / 2, step)
    gammas = np.arange(0.0, 2 * np.pi, step)

    def rot_z(t):
        c, s = np.cos(t), np.sin(t)
        out = np.zeros((t.size, 3, 3))
        out[:, 0, 0], out[:, 0, 1] = c, -s
        out[:, 1, 0], out[:, 1, 1] = s, c
        out[:, 2, 2] = 1
        return out

    def rot_y(t):
        c, s = np.cos(t), np.sin(t)
        out = np.zeros((t.size, 3, 3))
        out[:, 0, 0], out[:, 0, 2] = c, s
        out[:, 2, 0], out[:, 2, 2] = -s, c
        out[:, 1, 1] = 1
        return out

    best_sse = np.inf
    best_mean = np.inf
    rz_gamma = rot_z(gammas)
    for alpha in alphas:
        ra = rot_z(np.array([alpha]))[0]
        for beta in betas:
            rb = rot_y(np.array([beta]))[0]
            rot = ra @ rb @ rz_gamma  # (G, 3, 3), z-y-z Euler coverage
            # act on row vectors from the right
            pr = np.einsum("kj,gjl->gkl", pc, rot)
            tr = np.einsum("gkl,kl->g", pr, gc)
            scale = np.maximum(tr / denom, 0.0)
            resid = scale[:, None, None] * pr - gc
            sq = (resid**2).sum(axis=(1, 2))
            g_best = int(np.argmin(sq))
            if sq[g_best] < best_sse:
                best_sse = float(sq[g_best])
                best_mean = float(np.linalg.norm(resid[g_best], axis=1).mean())
    return best_mean


class TestMpjpe:
    def test_zero_for_identical(self):
        pose = np.random.default_rng(0).normal(size=(17, 3))
        assert mpjpe(pose, pose) == 0.0

    def test_pythagorean_offset(self):
        gt = np.zeros((1, 3))
        pred = np.array([[3.0, 4.0, 0.0]])
        assert mpjpe(pred, gt) == pytest.approx(5.0)

    def test_mean_over_joints(self):
        gt = np.zeros((2, 3))
        pred = np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]])
        assert mpjpe(pred, gt) == pytest.approx(5.0)

    def test_k_mismatch_rejected(self):
        with pytest.raises(ValueError):
            mpjpe(np.zeros((3, 3)), np.zeros((4, 3)))

    def test_metric_properties_spot_check(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a, b, c = rng.normal(size=(3, 8, 3)) * 50
            assert mpjpe(a, b) == pytest.approx(mpjpe(b, a))
            assert mpjpe(a, c) <= mpjpe(a, b) + mpjpe(b, c) + 1e-9
            assert mpjpe(a, a) == 0.0


class TestPMpjpe:
    def test_rotation_removed(self):
        rng = np.random.default_rng(2)
        gt = rng.normal(size=(17, 3)) * 100
        rot90 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        pred = gt @ rot90
        assert p_mpjpe(pred, gt) < 1e-6

    def test_scale_and_translation_removed(self):
        rng = np.random.default_rng(3)
        gt = rng.normal(size=(17, 3)) * 100
        pred = 2.0 * gt + np.array([10.0, -20.0, 5.0])
        assert p_mpjpe(pred, gt) < 1e-6

    def test_never_exceeds_mpjpe(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            pred = rng.normal(size=(10, 3)) * 80
            gt = rng.normal(size=(10, 3)) * 80
            assert p_mpjpe(pred, gt) <= mpjpe(pred, gt) + 1e-9

    def test_similarity_invariance(self):
        rng = np.random.default_rng(5)
        pred = rng.normal(size=(12, 3)) * 60
        gt = rng.normal(size=(12, 3)) * 60
        base = p_mpjpe(pred, gt)
        for _ in range(10):
            rot = random_rotation(rng)
            s = rng.uniform(0.2, 5.0)
            t = rng.normal(size=3) * 30
            assert p_mpjpe(s * pred @ rot + t, gt) == pytest.approx(base, abs=1e-6)

    def test_degenerate_gt_rejected(self):
        line = np.outer(np.arange(5.0), np.array([1.0, 2.0, 3.0]))
        with pytest.raises(ValueError):
            p_mpjpe(np.random.default_rng(0).normal(size=(5, 3)), line)
        with pytest.raises(ValueError):
            p_mpjpe(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_matches_grid_search_oracle(self):
        # frozen seeds; oracle = dense 2-degree rotation grid + closed-form s, t
        rng = np.random.default_rng(1234)
        for _ in range(3):
            pred = rng.normal(size=(5, 3)) * 50
            gt = rng.normal(size=(5, 3)) * 50
            ours = p_mpjpe(pred, gt)
            oracle = grid_search_p_mpjpe(pred, gt, step_deg=2.0)
            assert ours == pytest.approx(oracle, rel=0.02)


class TestPck:
    def test_all_zero_errors(self):
        pose = np.random.default_rng(0).normal(size=(5, 3))
        assert pck(pose, pose) == 1.0

    def test_half(self):
        gt = np.zeros((2, 3))
        pred = np.array([[100.0, 0, 0], [200.0, 0, 0]])
        assert pck(pred, gt, threshold_mm=150.0) == 0.5

    def test_zero_threshold(self):
        gt = np.zeros((2, 3))
        pred = np.array([[0.0, 0, 0], [1.0, 0, 0]])
        assert pck(pred, gt, threshold_mm=0.0) == 0.5

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(6)
        pred = rng.normal(size=(17, 3)) * 120
        gt = rng.normal(size=(17, 3)) * 120
        values = [pck(pred, gt, t) for t in np.arange(0, 400, 10)]
        assert all(a <= b for a, b in zip(values, values[1:]))


class TestAuc:
    def test_perfect(self):
        pose = np.random.default_rng(0).normal(size=(5, 3))
        assert auc(pose, pose) == 1.0

    def test_all_errors_above_max(self):
        gt = np.zeros((3, 3))
        pred = np.full((3, 3), 1000.0)
        assert auc(pred, gt) == 0.0

    def test_single_joint_between_thresholds(self):
        gt = np.zeros((1, 3))
        pred = np.array([[75.0, 0.0, 0.0]])
        assert auc(pred, gt, thresholds_mm=[50.0, 100.0]) == 0.5

    def test_empty_thresholds_rejected(self):
        with pytest.raises(ValueError):
            auc(np.zeros((2, 3)), np.zeros((2, 3)), thresholds_mm=[])


class TestEvaluatePoses:
    def test_report_fields_and_invariants(self):
        rng = np.random.default_rng(7)
        gts = rng.normal(size=(10, 17, 3)) * 100
        preds = gts + rng.normal(size=(10, 17, 3)) * 30
        report = evaluate_poses(preds, gts)
        assert report.n_frames == 10
        assert report.p_mpjpe <= report.mpjpe + 1e-9
        assert 0 <= report.pck150 <= 1
        assert 0 <= report.auc <= 1

    def test_report_invariant_enforced(self):
        with pytest.raises(ValueError):
            MetricReport(mpjpe=1.0, p_mpjpe=2.0, pck150=0.5, auc=0.5, n_frames=1)
