import math

import numpy as np
import pytest

from flowloss import (
    FeatureMap,
    FlowField,
    LossParams,
    SaliencyMap,
    finite_diff_check,
    flow_loss,
    flow_loss_grad,
    patch_kl,
    patch_weights,
    stabilize,
)
from flowloss.errors import DimMismatch, LengthMismatch

from oracle import oracle_flow_loss, oracle_stabilize


def random_instance(seed, H=6, W=6, C=4, with_saliency=False, flow_scale=1.0):
    rng = np.random.default_rng(seed)
    feat = FeatureMap(rng.normal(size=(C, H, W)))
    flow = stabilize(FlowField(u=flow_scale * rng.normal(size=(H, W)),
                               v=flow_scale * rng.normal(size=(H, W))))
    sal = SaliencyMap(rng.normal(size=(H, W))) if with_saliency else None
    return feat, flow, sal


def test_patch_kl_values():
    assert patch_kl([0.25, 0.75], [0.25, 0.75]) == 0.0
    got = patch_kl([0.5, 0.5], [0.9, 0.1])
    want = 0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1)
    assert got == pytest.approx(want, rel=1e-15)
    swapped = patch_kl([0.9, 0.1], [0.5, 0.5])
    assert swapped == pytest.approx(0.9 * math.log(1.8) + 0.1 * math.log(0.2), rel=1e-15)
    assert swapped != pytest.approx(got)


def test_patch_kl_length_mismatch():
    with pytest.raises(LengthMismatch):
        patch_kl([0.5, 0.5], [1.0 / 3] * 3)


def test_patch_weights():
    a = np.zeros((2, 1, 1))
    a[0, 0, 0] = 3.0
    b = np.zeros((2, 1, 1))
    b[0, 0, 0] = 1.0
    w = patch_weights([a, b])
    assert np.allclose(w, [0.75, 0.25], atol=1e-15)
    assert np.all(patch_weights([np.zeros((2, 2, 2))] * 3) == 0.0)


def test_zero_flow_gives_zero_loss_and_grad():
    rng = np.random.default_rng(0)
    feat = FeatureMap(rng.normal(size=(4, 6, 6)))
    flow = FlowField(u=np.zeros((6, 6)), v=np.zeros((6, 6)))
    report, grad = flow_loss_grad(feat, flow)
    assert report.total == 0.0
    assert np.all(report.weights == 0.0)
    assert np.all(grad == 0.0)


def test_single_window_total_equals_patch_loss():
    rng = np.random.default_rng(1)
    feat = FeatureMap(rng.normal(size=(3, 3, 3)))
    flow = stabilize(FlowField(u=rng.normal(size=(3, 3)), v=rng.normal(size=(3, 3))))
    report = flow_loss(feat, flow)
    assert len(report.per_patch) == 1
    assert report.weights[0] == 1.0
    assert report.total == report.per_patch[0]


def test_report_invariants():
    for seed in range(10):
        feat, flow, sal = random_instance(seed, with_saliency=seed % 2 == 0)
        report = flow_loss(feat, flow, sal)
        assert report.total >= 0.0
        assert np.all(report.per_patch >= -1e-15)
        assert abs(report.weights.sum() - 1.0) < 1e-12
        assert abs(report.total - float(np.sum(report.weights * report.per_patch))) <= 1e-12 * max(1.0, report.total)


def test_feature_scale_invariance():
    feat, flow, _ = random_instance(3)
    base = flow_loss(feat, flow)
    scaled = feat.values.copy()
    scaled[:, 2, 4] *= 11.0
    other = flow_loss(FeatureMap(scaled), flow)
    assert other.total == pytest.approx(base.total, rel=1e-12)
    assert np.allclose(other.per_patch, base.per_patch, rtol=1e-12)


def test_matched_patch_has_zero_loss():
    # identical features and identical flows: both distributions uniform
    feat = FeatureMap(np.ones((4, 3, 3)))
    flow = FlowField(u=np.full((3, 3), 0.5), v=np.full((3, 3), -0.25))
    report = flow_loss(feat, flow)  # deliberately not stabilized
    assert report.total == pytest.approx(0.0, abs=1e-14)


def test_dim_mismatch():
    rng = np.random.default_rng(4)
    feat = FeatureMap(rng.normal(size=(2, 5, 5)))
    flow = FlowField(u=np.zeros((6, 6)), v=np.zeros((6, 6)))
    with pytest.raises(DimMismatch):
        flow_loss(feat, flow)
    flow2 = FlowField(u=np.zeros((5, 5)), v=np.zeros((5, 5)))
    sal = SaliencyMap(np.zeros((4, 4)))
    with pytest.raises(DimMismatch):
        flow_loss(feat, flow2, sal)


def test_oracle_equivalence_fuzz():
    rng = np.random.default_rng(100)
    for trial in range(60):
        H = int(rng.integers(3, 7))
        W = int(rng.integers(3, 7))
        C = int(rng.choice([1, 4]))
        K = int(rng.integers(1, min(H, W, 3) + 1))
        stride = int(rng.choice([1, K]))
        with_sal = bool(rng.integers(0, 2))

        feat = FeatureMap(rng.normal(size=(C, H, W)))
        raw = FlowField(u=rng.normal(size=(H, W)), v=rng.normal(size=(H, W)))
        sal = SaliencyMap(rng.normal(size=(H, W))) if with_sal else None
        params = LossParams(patch_size=K, stride=stride)

        flow = stabilize(raw)
        report = flow_loss(feat, flow, sal, params)

        su, sv = oracle_stabilize(raw.u.tolist(), raw.v.tolist())
        total, per_patch, weights, salient = oracle_flow_loss(
            feat.values.tolist(), su, sv,
            sal.values.tolist() if sal is not None else None,
            K, stride, params.tau, params.sigma)

        assert math.isclose(report.total, total, rel_tol=1e-12, abs_tol=1e-13)
        assert list(report.salient) == salient
        for a, b in zip(report.per_patch, per_patch):
            assert math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-13)
        for a, b in zip(report.weights, weights):
            assert math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-13)


def test_gradient_matches_finite_differences():
    for seed in range(5):
        feat, flow, sal = random_instance(seed, with_saliency=seed % 2 == 0)
        for stride in (1, 3):
            params = LossParams(patch_size=3, stride=stride)
            chk = finite_diff_check(feat, flow, sal, params, step=1e-5)
            assert chk["max_rel_error"] < 1e-6


def test_gradient_richardson_behavior():
    feat, flow, _ = random_instance(42)
    e1 = finite_diff_check(feat, flow, None, LossParams(), step=1e-3)["max_rel_error"]
    e2 = finite_diff_check(feat, flow, None, LossParams(), step=5e-4)["max_rel_error"]
    # central differences: halving the step should roughly quarter the error
    assert e2 < e1 / 2.5


def test_directional_derivative():
    feat, flow, _ = random_instance(7)
    params = LossParams()
    _, grad = flow_loss_grad(feat, flow, None, params)
    rng = np.random.default_rng(8)
    h = 1e-6
    for _ in range(3):
        d = rng.normal(size=feat.values.shape)
        d /= np.sqrt(np.sum(d * d))
        lp = flow_loss(FeatureMap(feat.values + h * d), flow, None, params).total
        lm = flow_loss(FeatureMap(feat.values - h * d), flow, None, params).total
        numeric = (lp - lm) / (2 * h)
        analytic = float(np.sum(grad * d))
        assert numeric == pytest.approx(analytic, rel=5e-4, abs=1e-9)


def test_determinism():
    feat, flow, sal = random_instance(9, with_saliency=True)
    r1, g1 = flow_loss_grad(feat, flow, sal)
    r2, g2 = flow_loss_grad(feat, flow, sal)
    assert r1.total == r2.total
    assert np.array_equal(r1.per_patch, r2.per_patch)
    assert np.array_equal(g1, g2)


def test_backends_agree():
    import subprocess
    import sys

    code = (
        "import numpy as np, flowloss as fl\n"
        "rng = np.random.default_rng(123)\n"
        "feat = fl.FeatureMap(rng.normal(size=(4, 6, 6)))\n"
        "flow = fl.stabilize(fl.FlowField(rng.normal(size=(6, 6)), rng.normal(size=(6, 6))))\n"
        "rep, grad = fl.flow_loss_grad(feat, flow, None, fl.LossParams(stride=1))\n"
        "print(fl.BACKEND)\n"
        "print(repr(rep.total))\n"
        "print(repr(float(np.sum(np.abs(grad)))))\n"
    )
    outs = {}
    for backend in ("python", "cython"):
        proc = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                              env={"FLOWLOSS_BACKEND": backend, "PATH": "/usr/bin:/bin"})
        if proc.returncode != 0 and backend == "cython":
            pytest.skip("compiled extension unavailable")
        assert proc.returncode == 0, proc.stderr
        lines = proc.stdout.splitlines()
        assert lines[0] == backend
        outs[backend] = (float(lines[1]), float(lines[2]))
    for a, b in zip(outs["python"], outs["cython"]):
        assert math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-13)
