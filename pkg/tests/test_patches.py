import numpy as np
import pytest

from flowloss import GridSpec, build_grid, extract_patch, patch_flow_norm, window_count
from flowloss.errors import PatchLargerThanGrid


def test_exact_tiling_6x6():
    grid = build_grid(GridSpec(height=6, width=6, patch_size=3, stride=3))
    assert grid.windows == ((0, 0), (0, 3), (3, 0), (3, 3))


def test_overlapping_count():
    grid = build_grid(GridSpec(height=4, width=4, patch_size=3, stride=1))
    assert grid.num_windows == 4


def test_single_window():
    grid = build_grid(GridSpec(height=3, width=3, patch_size=3, stride=3))
    assert grid.windows == ((0, 0),)


def test_patch_larger_than_grid():
    with pytest.raises(PatchLargerThanGrid):
        GridSpec(height=2, width=5, patch_size=3, stride=1)


def test_window_count_formula_fuzz():
    rng = np.random.default_rng(9)
    for _ in range(200):
        h, w = rng.integers(1, 30, size=2)
        k = int(rng.integers(1, min(h, w) + 1))
        stride = int(rng.integers(1, 6))
        spec = GridSpec(height=int(h), width=int(w), patch_size=k, stride=stride)
        grid = build_grid(spec)
        assert grid.num_windows == ((h - k) // stride + 1) * ((w - k) // stride + 1)
        assert grid.num_windows == window_count(spec)
        for r, c in grid.windows:
            assert 0 <= r <= h - k and 0 <= c <= w - k


def test_extract_full_grid():
    t = np.arange(12.0).reshape(3, 2, 2)
    patch = extract_patch(t, (0, 0), 2)
    assert np.array_equal(patch, t)


def test_row_major_flattening():
    t = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    patch = extract_patch(t, (0, 0), 2)
    assert list(patch.reshape(-1)) == [1.0, 2.0, 3.0, 4.0]


def test_tiling_partitions_grid():
    spec = GridSpec(height=9, width=12, patch_size=3, stride=3)
    grid = build_grid(spec)
    cover = np.zeros((9, 12), dtype=int)
    for win in grid.windows:
        r, c = win
        cover[r : r + 3, c : c + 3] += 1
    assert np.all(cover == 1)


def test_patch_flow_norm_values():
    assert patch_flow_norm(np.zeros((2, 3, 3))) == 0.0
    assert patch_flow_norm(np.array([[[3.0]], [[4.0]]])) == 5.0
    ones = np.stack([np.ones((2, 2)), np.zeros((2, 2))])
    assert patch_flow_norm(ones) == 2.0
