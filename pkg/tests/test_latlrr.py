import math

import numpy as np
import pytest

from mdlatlrr.errors import ArgumentError, DataError, NumericalError, PoolSizeError, StructuralError
from mdlatlrr.latlrr import (
    DETAIL,
    SMOOTH,
    LatLrrParams,
    ProjectionMatrix,
    build_training_set,
    classify_patch,
    column_sd,
    patch_sd,
    solve_latlrr,
    train_projection,
)
from mdlatlrr.linalg import nuclear_norm
from mdlatlrr.patches import extract_patches


def _two_pass_sd(p):
    vals = [float(v) for v in np.asarray(p).ravel()]
    mean = sum(vals) / len(vals)
    return math.sqrt(sum((v - mean) ** 2 for v in vals))


class TestPatchSd:
    def test_constant(self):
        assert patch_sd(np.full((4, 4), 0.3)) == pytest.approx(0.0, abs=1e-15)
        assert classify_patch(np.full((4, 4), 0.3), 0.5) == SMOOTH

    def test_checkerboard(self):
        p = np.indices((16, 16)).sum(axis=0) % 2
        assert patch_sd(p) == pytest.approx(8.0)
        assert classify_patch(p, 0.5) == DETAIL

    def test_random_matches_two_pass(self):
        rng = np.random.default_rng(0)
        mats = rng.random((64, 30))
        got = column_sd(mats)
        for j in range(30):
            assert got[j] == pytest.approx(_two_pass_sd(mats[:, j]), rel=1e-12)
            assert patch_sd(mats[:, j]) == pytest.approx(_two_pass_sd(mats[:, j]), rel=1e-12)

    def test_threshold_is_strict(self):
        p = np.array([0.0, 1.0])
        sd = patch_sd(p)
        assert classify_patch(p, sd) == SMOOTH
        assert classify_patch(p, sd * 0.999) == DETAIL

    def test_negative_threshold(self):
        with pytest.raises(ArgumentError):
            classify_patch(np.zeros(4), -1.0)


def _synthetic_images(seed=0):
    """One noisy and one flat 32x32 image: every 8x8 window of the first is detail."""
    rng = np.random.default_rng(seed)
    return [rng.random((32, 32)), np.full((32, 32), 0.4)]


class TestTrainingSet:
    def test_counts_and_labels(self):
        ts = build_training_set(_synthetic_images(), 8, 4, 10, 10, 0.5, seed=1)
        assert ts.X.shape == (64, 20)
        assert ts.detail_pool == 49 and ts.smooth_pool == 49
        assert ts.detail_count == 10 and ts.smooth_count == 10
        assert np.all(ts.labels[:10] == DETAIL) and np.all(ts.labels[10:] == SMOOTH)
        assert np.all(column_sd(ts.X[:, :10]) > 0.5)
        assert np.all(column_sd(ts.X[:, 10:]) <= 0.5)

    def test_columns_are_real_windows(self):
        imgs = _synthetic_images()
        ts = build_training_set(imgs, 8, 4, 10, 10, 0.5, seed=2)
        pool = extract_patches(imgs[0], 8, 4).mat
        for j in range(10):
            assert np.any(np.all(pool == ts.X[:, [j]], axis=0))

    def test_deterministic(self):
        a = build_training_set(_synthetic_images(), 8, 4, 10, 10, 0.5, seed=7)
        b = build_training_set(_synthetic_images(), 8, 4, 10, 10, 0.5, seed=7)
        c = build_training_set(_synthetic_images(), 8, 4, 10, 10, 0.5, seed=8)
        assert np.array_equal(a.X, b.X)
        assert not np.array_equal(a.X, c.X)

    def test_no_replacement(self):
        ts = build_training_set(_synthetic_images(), 8, 4, 49, 2, 0.5, seed=3)
        assert np.unique(ts.X[:, :49], axis=1).shape[1] == 49

    def test_pool_too_small(self):
        with pytest.raises(PoolSizeError, match="detail pool 49 < 50"):
            build_training_set(_synthetic_images(), 8, 4, 50, 10, 0.5, seed=0)

    def test_no_images(self):
        with pytest.raises(DataError):
            build_training_set([], 8, 1, 1, 1, 0.5, 0)


class TestSolver:
    def test_zero_matrix(self):
        sol = solve_latlrr(np.zeros((10, 20)))
        assert sol.converged and sol.iterations <= 1
        assert np.all(sol.Z == 0) and np.all(sol.L == 0) and np.all(sol.E == 0)

    def _check_feasible(self, X, sol, tol=1e-6):
        res = X - X @ sol.Z - sol.L @ X - sol.E
        assert np.abs(res).max() <= 10 * tol

    def test_low_rank_input(self):
        rng = np.random.default_rng(0)
        X = rng.random((16, 2)) @ rng.random((2, 40))
        sol = solve_latlrr(X)
        assert sol.converged
        self._check_feasible(X, sol)
        assert np.linalg.matrix_rank(X @ sol.Z + sol.L @ X, tol=1e-4) <= 4

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_sparse_spikes_land_in_E(self, seed):
        # at lam=0.4 a 16x40 problem routes the spikes through XZ + LX; 0.1 makes E cheap enough
        rng = np.random.default_rng(seed)
        X = rng.random((16, 2)) @ rng.random((2, 40))
        k = X.size // 20
        support = rng.choice(X.size, k, replace=False)
        spikes = np.zeros(X.size)
        spikes[support] = rng.choice([-1.0, 1.0], k) * rng.uniform(1.0, 2.0, k)
        sol = solve_latlrr(X + spikes.reshape(X.shape), LatLrrParams(lam=0.1))
        assert sol.converged
        top = np.argsort(-np.abs(sol.E).ravel())[:k]
        assert np.isin(top, support).mean() >= 0.8

    def test_reduced_matches_full(self):
        X = np.random.default_rng(2).random((12, 30))
        params = LatLrrParams(max_iters=300)
        a = solve_latlrr(X, params)
        b = solve_latlrr(X, params, reduce=False)
        assert a.iterations == b.iterations
        assert np.abs(a.L - b.L).max() < 1e-8
        assert np.abs(a.Z - b.Z).max() < 1e-8

    def test_history_consistent_with_iterate(self):
        X = np.random.default_rng(3).random((10, 25))
        sol = solve_latlrr(X)
        assert len(sol.objective_history) == sol.iterations
        assert all(np.isfinite(sol.objective_history))
        obj = nuclear_norm(sol.Z) + nuclear_norm(sol.L) + 0.4 * np.abs(sol.E).sum()
        assert obj == pytest.approx(sol.objective_history[-1], rel=1e-3)

    def test_iteration_cap(self):
        X = np.random.default_rng(4).random((10, 25))
        sol = solve_latlrr(X, LatLrrParams(max_iters=5))
        assert sol.iterations == 5 and not sol.converged

    def test_non_finite_input(self):
        X = np.ones((4, 4))
        X[0, 0] = np.inf
        with pytest.raises(ArgumentError):
            solve_latlrr(X)

    def test_blowup_reports_iteration(self):
        X = np.random.default_rng(5).random((6, 10)) * 1e300
        with pytest.raises(NumericalError) as info:
            solve_latlrr(X)
        assert info.value.iteration >= 0

    @pytest.mark.parametrize("kw", [{"lam": 0}, {"rho": 1.0}, {"mu0": 2e6}, {"tol": 0}, {"max_iters": 0}])
    def test_bad_params(self, kw):
        with pytest.raises(ArgumentError):
            LatLrrParams(**kw)


class TestProjectionMatrix:
    def _proj(self):
        mat = np.random.default_rng(0).standard_normal((16, 16))
        return ProjectionMatrix(4, mat, {"lambda": "0.4", "seed": "3", "detail_count": "10",
                                         "smooth_count": "10", "threshold": "0.5"})

    def test_round_trip(self, tmp_path):
        p = self._proj()
        path = tmp_path / "L.bin"
        p.save(path)
        q = ProjectionMatrix.load(path)
        assert q.to_bytes() == path.read_bytes()
        assert np.array_equal(q.mat, p.mat) and q.provenance == p.provenance

    def test_read_only(self):
        with pytest.raises(ValueError):
            self._proj().mat[0, 0] = 1.0

    def test_bad_magic(self):
        data = bytearray(self._proj().to_bytes())
        data[:4] = b"XXXX"
        with pytest.raises(DataError, match="magic"):
            ProjectionMatrix.from_bytes(bytes(data))

    def test_truncated(self):
        with pytest.raises(DataError):
            ProjectionMatrix.from_bytes(self._proj().to_bytes()[:100])

    def test_wrong_shape(self):
        with pytest.raises(StructuralError):
            ProjectionMatrix(4, np.zeros((15, 16)))


class TestTrainProjection:
    def test_shapes_and_determinism(self):
        rng = np.random.default_rng(0)
        imgs = [rng.random((40, 40)), np.full((40, 40), 0.2) + 0.001 * rng.random((40, 40))]
        params = LatLrrParams(max_iters=400)
        p1, ts, sol = train_projection(imgs, 8, 4, 20, 20, 0.5, seed=4, params=params)
        p2, _, _ = train_projection(imgs, 8, 4, 20, 20, 0.5, seed=4, params=params)
        assert p1.mat.shape == (64, 64) and ts.X.shape == (64, 40)
        assert np.array_equal(p1.mat, p2.mat)
        assert p1.provenance["seed"] == "4" and p1.provenance["lambda"] == "0.4"

    def test_patch_size_16(self):
        rng = np.random.default_rng(1)
        imgs = [rng.random((48, 48)), np.full((48, 48), 0.5)]
        p, _, _ = train_projection(imgs, 16, 8, 10, 10, 0.5, seed=0, params=LatLrrParams(max_iters=30))
        assert p.mat.shape == (256, 256)
