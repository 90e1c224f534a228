import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdlatlrr.errors import ArgumentError, StructuralError
from mdlatlrr.patches import (
    PatchMatrix,
    coverage_counts,
    extract_patches,
    iter_patch_blocks,
    OverlapAccumulator,
    reconstruct_image,
    reshape_patch,
)

from oracles import reconstruct_by_windows


class TestExtract:
    def test_exact_tiling(self):
        img = np.arange(16.0).reshape(4, 4)
        pm = extract_patches(img, 2, 2)
        assert pm.mat.shape == (4, 4)
        assert np.array_equal(pm.mat[:, 0], [0, 1, 4, 5])
        assert np.array_equal(pm.mat[:, 1], [2, 3, 6, 7])
        assert np.array_equal(pm.mat[:, 2], [8, 9, 12, 13])

    def test_overlapping_count(self):
        pm = extract_patches(np.zeros((3, 3)), 2, 1)
        assert pm.mat.shape == (4, 4)

    def test_padding_by_enumeration(self):
        img = np.arange(25.0).reshape(5, 5)
        pm = extract_patches(img, 2, 2)
        # oracle: enumerate window corners inside the smallest stride-compatible padded grid
        ph = next(h for h in itertools.count(5) if (h - 2) % 2 == 0)
        corners = [(r, c) for r in range(0, ph - 1, 2) for c in range(0, ph - 1, 2)]
        assert ph == 6 and len(corners) == 9
        g = pm.geometry
        assert (g.pad_bottom, g.pad_right, g.patch_count) == (1, 1, 9)
        # edge replication: last window column repeats the final image column
        assert np.array_equal(pm.mat[:, 2], [4, 4, 9, 9])

    def test_column_order(self):
        rng = np.random.default_rng(0)
        img = rng.random((9, 11))
        pm = extract_patches(img, 3, 2)
        cols = pm.geometry.window_cols
        for j in range(pm.geometry.patch_count):
            r, c = divmod(j, cols)
            assert np.array_equal(pm.mat[:, j], img[2 * r:2 * r + 3, 2 * c:2 * c + 3].ravel())

    @pytest.mark.parametrize("n,s", [(5, 1), (1, 1), (3, 0), (3, 4)])
    def test_bad_arguments(self, n, s):
        with pytest.raises(ArgumentError):
            extract_patches(np.zeros((4, 4)), n, s)


class TestReconstruct:
    def test_identity_stride_one(self):
        img = np.random.default_rng(1).random((16, 16))
        assert np.abs(reconstruct_image(extract_patches(img, 8, 1)) - img).max() <= 1e-12

    def test_all_ones(self):
        pm = extract_patches(np.zeros((7, 9)), 3, 2)
        pm = PatchMatrix(pm.geometry, np.ones_like(pm.mat))
        assert np.array_equal(reconstruct_image(pm), np.ones((7, 9)))

    def test_overlap_means_by_hand(self):
        geom = extract_patches(np.zeros((2, 3)), 2, 1).geometry
        mat = np.array([[1.0, 5.0], [2.0, 6.0], [3.0, 7.0], [4.0, 8.0]])
        # hand count: middle column is covered by both windows
        expected = np.array([[1.0, 3.5, 6.0], [3.0, 5.5, 8.0]])
        assert np.allclose(reconstruct_image(PatchMatrix(geom, mat)), expected)

    def test_matches_window_loop_oracle(self):
        rng = np.random.default_rng(2)
        for h, w, n, s in [(10, 13, 4, 3), (12, 12, 4, 4), (9, 7, 2, 1)]:
            pm = extract_patches(rng.random((h, w)), n, s)
            pm = PatchMatrix(pm.geometry, rng.standard_normal(pm.mat.shape))
            assert np.allclose(reconstruct_image(pm), reconstruct_by_windows(pm.mat, h, w, n, s), atol=1e-13)

    def test_shape_mismatch(self):
        geom = extract_patches(np.zeros((4, 4)), 2, 2).geometry
        with pytest.raises(StructuralError):
            PatchMatrix(geom, np.zeros((4, 5)))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 6), st.data())
    def test_round_trip_property(self, n, data):
        s = data.draw(st.integers(1, n))
        h = data.draw(st.integers(n, 20))
        w = data.draw(st.integers(n, 20))
        img = np.random.default_rng(h * 31 + w).random((h, w))
        pm = extract_patches(img, n, s)
        assert np.abs(reconstruct_image(pm) - img).max() <= 1e-12
        assert coverage_counts(pm.geometry).min() >= 1

    def test_linearity(self):
        rng = np.random.default_rng(3)
        a, b = rng.random((2, 11, 10))
        pa, pb = extract_patches(a, 4, 3), extract_patches(b, 4, 3)
        pab = extract_patches(2 * a - 3 * b, 4, 3)
        assert np.allclose(pab.mat, 2 * pa.mat - 3 * pb.mat)
        combo = PatchMatrix(pa.geometry, 2 * pa.mat - 3 * pb.mat)
        assert np.allclose(reconstruct_image(combo), 2 * reconstruct_image(pa) - 3 * reconstruct_image(pb))

    def test_blockwise_matches_full(self):
        img = np.random.default_rng(4).random((30, 25))
        pm = extract_patches(img, 4, 1)
        acc = OverlapAccumulator(pm.geometry)
        pieces = []
        for c0, block in iter_patch_blocks(img, pm.geometry, max_columns=50):
            pieces.append(block)
            acc.add(c0, block)
        assert np.array_equal(np.hstack(pieces), pm.mat)
        assert np.allclose(acc.result(), img, atol=1e-12)


class TestReshape:
    def test_row_major(self):
        assert np.array_equal(reshape_patch([1, 2, 3, 4], 2), [[1, 2], [3, 4]])

    def test_zero(self):
        assert np.array_equal(reshape_patch(np.zeros(9), 3), np.zeros((3, 3)))

    def test_round_trip(self):
        v = np.random.default_rng(5).random(64)
        assert np.array_equal(reshape_patch(v, 8).ravel(), v)

    def test_inverse_of_vectorisation(self):
        img = np.random.default_rng(6).random((8, 8))
        pm = extract_patches(img, 8, 1)
        assert np.array_equal(reshape_patch(pm.mat[:, 0], 8), img)

    def test_length_mismatch(self):
        with pytest.raises(ArgumentError):
            reshape_patch(np.zeros(5), 2)
