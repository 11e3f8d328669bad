import numpy as np

from flowloss import FlowField, flow_norm_map, stabilize


def field(u, v):
    return FlowField(u=np.asarray(u, dtype=np.float64), v=np.asarray(v, dtype=np.float64))


def test_constant_field_maps_to_zero():
    f = field(np.full((4, 5), 3.2), np.full((4, 5), -1.1))
    out = stabilize(f)
    assert np.all(out.u == 0) and np.all(out.v == 0)


def test_hand_computed_two_pixel_field():
    f = field([[1.0, 3.0]], [[0.0, 0.0]])
    out = stabilize(f)
    assert np.allclose(out.u, [[-1.0, 1.0]], atol=0)
    assert np.all(out.v == 0)


def test_some_component_hits_one():
    rng = np.random.default_rng(2)
    for _ in range(30):
        f = field(rng.normal(size=(6, 7)), rng.normal(size=(6, 7)))
        out = stabilize(f)
        peak = max(np.abs(out.u).max(), np.abs(out.v).max())
        assert abs(peak - 1.0) < 1e-15


def test_components_bounded_and_centered():
    rng = np.random.default_rng(3)
    f = field(rng.normal(scale=40, size=(50, 60)), rng.normal(scale=40, size=(50, 60)))
    out = stabilize(f)
    assert np.abs(out.u).max() <= 1.0 and np.abs(out.v).max() <= 1.0
    assert abs(out.u.mean()) <= 1e-9 and abs(out.v.mean()) <= 1e-9


def test_translation_invariance():
    rng = np.random.default_rng(4)
    f = field(rng.normal(size=(8, 8)), rng.normal(size=(8, 8)))
    shifted = field(f.u + 17.5, f.v - 3.25)
    a, b = stabilize(f), stabilize(shifted)
    assert np.allclose(a.u, b.u, atol=1e-12) and np.allclose(a.v, b.v, atol=1e-12)


def test_positive_scale_invariance():
    rng = np.random.default_rng(5)
    f = field(rng.normal(size=(8, 8)), rng.normal(size=(8, 8)))
    scaled = field(4.0 * f.u, 4.0 * f.v)
    a, b = stabilize(f), stabilize(scaled)
    assert np.allclose(a.u, b.u, atol=1e-12) and np.allclose(a.v, b.v, atol=1e-12)


def test_idempotence():
    rng = np.random.default_rng(6)
    f = field(rng.normal(size=(8, 8)), rng.normal(size=(8, 8)))
    once = stabilize(f)
    twice = stabilize(once)
    assert np.allclose(once.u, twice.u, atol=1e-12) and np.allclose(once.v, twice.v, atol=1e-12)


def test_norm_map_values():
    f = field([[0.0, 3.0]], [[0.0, 4.0]])
    m = flow_norm_map(f)
    assert m.values[0, 0] == 0.0
    assert m.values[0, 1] == 5.0


def test_norm_after_stabilize_bounded_by_sqrt2():
    rng = np.random.default_rng(7)
    f = field(rng.normal(size=(10, 10)), rng.normal(size=(10, 10)))
    m = flow_norm_map(stabilize(f))
    assert m.values.max() <= np.sqrt(2.0) + 1e-15
