import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import FIG2_CENTER, FIG2_LEFT, FIG2_RIGHT, grid_distance_k3, naive_unimodal, qp_projection
from ordino.data import sample_uniform_simplex
from ordino.errors import ConvergenceError, DimensionError, NumericError
from ordino.simplex import (
    SIMPLEX_DIAMETER,
    hausdorff_batch,
    hausdorff_to_unimodal,
    is_approx_unimodal,
    is_unimodal,
    isotonic_nondecreasing,
    mode_set,
    pava_nondecreasing,
    project_to_simplex,
    project_unimodal_fixed_mode,
    unimodal_mask,
)


def pmfs(min_k=3, max_k=10):
    """Random PMFs built from nonnegative weights."""
    def build(w):
        w = np.asarray(w)
        return w / w.sum()
    return st.integers(min_k, max_k).flatmap(
        lambda k: arrays(float, k, elements=st.floats(0.0, 1.0)).filter(lambda w: w.sum() > 1e-3)
    ).map(build)


class TestIsUnimodal:
    def test_fig2_left_and_center(self):
        assert is_unimodal(FIG2_LEFT)
        assert not is_unimodal(FIG2_CENTER)

    def test_uniform_is_unimodal(self):
        for K in (3, 7, 20):
            assert is_unimodal(np.full(K, 1.0 / K))

    def test_tied_modes_must_all_satisfy_chain(self):
        # two separated maxima: each mode breaks the other's chain
        assert not is_unimodal([0.4, 0.2, 0.4])
        assert is_unimodal([0.4, 0.4, 0.2])

    def test_rejects_k_below_3(self):
        with pytest.raises(DimensionError):
            is_unimodal([0.5, 0.5])

    def test_rejects_non_finite(self):
        with pytest.raises(NumericError):
            is_unimodal([np.nan, 0.5, 0.5])

    @given(pmfs())
    def test_matches_literal_definition(self, p):
        assert is_unimodal(p) == naive_unimodal(p)

    def test_batch_mask_matches_scalar(self, rng):
        P = sample_uniform_simplex(5, 300, rng)
        mask = unimodal_mask(P)
        assert [bool(m) for m in mask] == [naive_unimodal(p) for p in P]


class TestModeSet:
    def test_examples(self):
        assert mode_set([0.2, 0.5, 0.3]) == {2}
        assert mode_set([1 / 3, 1 / 3, 1 / 3]) == {1, 2, 3}
        assert mode_set([0.4, 0.4, 0.2], tol=1e-9) == {1, 2}


class TestSimplexProjection:
    def test_examples(self):
        np.testing.assert_allclose(project_to_simplex([2.0, 0.0, 0.0]), [1, 0, 0])
        np.testing.assert_allclose(project_to_simplex([0.5, 0.5, 0.5]), [1 / 3] * 3)

    def test_non_finite(self):
        with pytest.raises(NumericError):
            project_to_simplex([np.inf, 0, 0])

    @given(arrays(float, st.integers(3, 12), elements=st.floats(-5, 5)))
    def test_output_on_simplex_and_idempotent(self, v):
        x = project_to_simplex(v)
        assert abs(x.sum() - 1) < 1e-9 and x.min() >= 0
        np.testing.assert_allclose(project_to_simplex(x), x, atol=1e-12)

    @given(arrays(float, 6, elements=st.floats(-3, 3)), arrays(float, 6, elements=st.floats(-3, 3)))
    def test_non_expansive(self, u, v):
        d = np.linalg.norm(project_to_simplex(u) - project_to_simplex(v))
        assert d <= np.linalg.norm(u - v) + 1e-12

    def test_against_brute_force_k3(self, rng):
        grid = np.stack(np.meshgrid(*(np.linspace(0, 1, 201),) * 2, indexing="ij"), -1).reshape(-1, 2)
        grid = grid[grid.sum(1) <= 1]
        grid = np.c_[grid, 1 - grid.sum(1)]
        for v in rng.normal(size=(10, 3)):
            best = grid[np.argmin(((grid - v) ** 2).sum(1))]
            np.testing.assert_allclose(project_to_simplex(v), best, atol=5e-3)


class TestIsotonic:
    @given(arrays(float, st.integers(1, 12), elements=st.floats(-10, 10)))
    def test_maxmin_equals_pava(self, y):
        np.testing.assert_allclose(isotonic_nondecreasing(y), pava_nondecreasing(y), atol=1e-9)

    def test_pava_pools_violators(self):
        np.testing.assert_allclose(pava_nondecreasing([3.0, 1.0, 2.0]), [2, 2, 2])
        np.testing.assert_allclose(pava_nondecreasing([1.0, 3.0, 2.0, 4.0]), [1, 2.5, 2.5, 4])

    def test_weighted_pava(self):
        np.testing.assert_allclose(pava_nondecreasing([2.0, 0.0], [3.0, 1.0]), [1.5, 1.5])


class TestFixedModeProjection:
    def test_examples(self):
        v = np.array([0.5, 0.0, 0.5])
        np.testing.assert_allclose(project_unimodal_fixed_mode(v, 1), [0.5, 0.25, 0.25], atol=1e-8)
        np.testing.assert_allclose(project_unimodal_fixed_mode(v, 2), [1 / 3] * 3, atol=1e-8)

    def test_member_is_fixed_point(self):
        np.testing.assert_allclose(project_unimodal_fixed_mode(FIG2_LEFT, 6), FIG2_LEFT, atol=1e-10)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            project_unimodal_fixed_mode([0.2, 0.3, 0.5], 4)

    def test_convergence_error_carries_iterate(self):
        with pytest.raises(ConvergenceError) as info:
            project_unimodal_fixed_mode(FIG2_RIGHT, 1, tol=0.0, max_iter=3)
        assert info.value.best.shape == (1, 10)
        assert info.value.residual >= 0

    @pytest.mark.parametrize("M", [1, 3, 6, 10])
    def test_output_satisfies_mode_constraints(self, M):
        x = project_unimodal_fixed_mode(FIG2_RIGHT, M)
        assert abs(x.sum() - 1) < 1e-9
        d = np.diff(x)
        assert np.all(d[: M - 1] >= -1e-9) and np.all(d[M - 1:] <= 1e-9)


class TestHausdorff:
    def test_two_point_example(self):
        res = hausdorff_to_unimodal([0.5, 0.0, 0.5])
        assert res.distance == pytest.approx(math.sqrt(2) / 4, abs=1e-8)
        np.testing.assert_allclose(res.nearest, [0.5, 0.25, 0.25], atol=1e-8)
        assert res.mode == 1  # modes 1 and 3 tie; the smaller index wins

    def test_unimodal_input(self):
        res = hausdorff_to_unimodal(FIG2_LEFT)
        assert res.distance == 0.0
        np.testing.assert_array_equal(res.nearest, FIG2_LEFT)
        assert res.mode == 6

    @pytest.mark.parametrize("p", [FIG2_CENTER, FIG2_RIGHT], ids=["center", "right"])
    def test_fig2_against_qp_oracle(self, p):
        d, q, m = qp_projection(p)
        res = hausdorff_to_unimodal(p)
        assert res.distance == pytest.approx(d, abs=1e-6)
        np.testing.assert_allclose(res.nearest, q, atol=1e-3)
        assert res.mode == m

    def test_fig2_center_pooling(self):
        res = hausdorff_to_unimodal(FIG2_CENTER)
        assert res.distance == pytest.approx(0.05 / math.sqrt(2), abs=1e-8)
        np.testing.assert_allclose(res.nearest[3:5], [0.125, 0.125], atol=1e-8)

    def test_grid_oracle_k3(self, rng):
        P = sample_uniform_simplex(3, 100, rng)
        d, _, _ = hausdorff_batch(P)
        np.testing.assert_allclose(d, grid_distance_k3(P), atol=2e-3)

    @given(pmfs())
    def test_properties(self, p):
        res = hausdorff_to_unimodal(p)
        assert 0 <= res.distance <= SIMPLEX_DIAMETER
        assert is_unimodal(res.nearest, 1e-7)
        assert res.distance == pytest.approx(np.linalg.norm(p - res.nearest), abs=1e-9)
        assert (res.distance < 1e-8) == is_unimodal(p, 1e-7)
        again = hausdorff_to_unimodal(res.nearest / res.nearest.sum())
        assert again.distance < 1e-7
        assert hausdorff_to_unimodal(p[::-1]).distance == pytest.approx(res.distance, abs=1e-8)

    def test_batch_matches_single(self, rng):
        P = sample_uniform_simplex(6, 20, rng)
        d, m, q = hausdorff_batch(P)
        for i, p in enumerate(P):
            res = hausdorff_to_unimodal(p)
            assert d[i] == pytest.approx(res.distance, abs=1e-12)
            assert m[i] == res.mode


class TestApproxUnimodal:
    def test_examples(self):
        assert is_approx_unimodal(FIG2_LEFT, 0.0)
        assert not is_approx_unimodal([0.5, 0.0, 0.5], 0.3)
        assert is_approx_unimodal(FIG2_RIGHT, math.sqrt(2))

    def test_negative_eps(self):
        with pytest.raises(ValueError):
            is_approx_unimodal(FIG2_LEFT, -1.0)
