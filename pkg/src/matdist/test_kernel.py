#!/usr/bin/env python3
"""
Pytest tests for kernel assembly and nullspace extraction.
"""

import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

# Add the src directory to the path
sys.path.insert(0, str(Path(__file__).parent.parent))

from matdist.errors import RankUnstableError, UnderdeterminedError
from matdist.kernel import (KernelProblem, SamplingConfig, Variant, assemble, derive_seed, full_system,
                            nullspace, sample_gl3, solve, solve_variants)
from matdist.law import builtin_registry

ORIGIN = (0.0, 0.0, 0.0)


@pytest.fixture(scope="module")
def registry():
    return builtin_registry()


@pytest.fixture
def cfg():
    return SamplingConfig(n_f=30, n_validation=20)


class TestSampling:
    """Test deterministic F sampling and seed derivation."""

    def test_first_sample_is_identity(self):
        """Test that the identity is always sampled."""
        samples = sample_gl3(5, 1)
        np.testing.assert_array_equal(samples[0], np.eye(3))
        assert len(samples) == 5
        assert all(np.linalg.det(F) > 0 for F in samples)

    def test_same_seed_same_samples(self):
        """Test that sampling is a pure function of the seed."""
        a = sample_gl3(4, 42)
        b = sample_gl3(4, 42)
        c = sample_gl3(4, 43)
        for Fa, Fb in zip(a, b):
            np.testing.assert_array_equal(Fa, Fb)
        assert not np.allclose(a[1], c[1])

    def test_needs_a_sample(self):
        """Test that n < 1 is rejected."""
        with pytest.raises(ValueError):
            sample_gl3(0, 1)

    def test_derive_seed(self):
        """Test that derived seeds are stable and key-dependent."""
        assert derive_seed(7, "validation") == derive_seed(7, "validation")
        assert derive_seed(7, "validation") != derive_seed(7, "membership")
        assert derive_seed(7, "resample", 1) != derive_seed(7, "resample", 2)
        assert derive_seed(7, "x") != derive_seed(8, "x")

    def test_validation_samples_are_held_out(self):
        """Test that validation samples differ from training samples."""
        cfg = SamplingConfig(n_f=3, n_validation=3)
        train, held = cfg.training_samples(), cfg.validation_samples()
        assert not np.allclose(train[1], held[1])
        assert SamplingConfig(n_validation=0).validation_samples() == []

    def test_to_dict(self):
        """Test the sampling record carried into reports."""
        record = SamplingConfig().to_dict()
        assert record["n_f"] == 40 and record["seed"] == 7 and record["tau_rank"] == 1e-8


class TestAssembly:
    """Test the stacked system layout."""

    def test_isotropy_row_at_identity(self, registry):
        """Test the row (0 | 0 | Iᵀ·2I) for W = tr(FᵀF) at F = I."""
        A = full_system(registry["homog_isotropic"], 0.0, ORIGIN, [np.eye(3)])
        expected = np.zeros(13)
        expected[[4, 8, 12]] = 2.0
        np.testing.assert_allclose(A[0], expected)

    def test_homogeneous_law_has_zero_t_and_x_columns(self, registry):
        """Test that the λ and Θⁱ columns vanish for W = tr(FᵀF)."""
        A = full_system(registry["homog_isotropic"], 3.0, (0.5, -0.5, 1.0), sample_gl3(15, 2))
        assert not np.any(A[:, 0:4])
        assert np.any(A[:, 4:])

    def test_graded_spatial_column_vanishes_at_origin(self, registry):
        """Test that ∂W/∂x¹ is zero on x¹ = 0 and nonzero away from it."""
        samples = tuple(sample_gl3(10, 3))
        at_zero = assemble(registry["graded"], KernelProblem(Variant.STATE_T, 0.0, ORIGIN, samples))
        away = assemble(registry["graded"], KernelProblem(Variant.STATE_T, 0.0, (1.0, 0.0, 0.0), samples))
        assert at_zero.shape == (20, 12)
        assert not np.any(at_zero[:, 0])
        assert np.any(away[:, 0])

    def test_variant_column_counts(self):
        """Test unknown counts per variant."""
        assert Variant.FULL.unknown_dim == 13
        assert Variant.STATE_T.unknown_dim == 12
        assert Variant.PARTICLE_X.unknown_dim == 10
        assert Variant.ISOTROPY.unknown_dim == 9

    def test_underdetermined_problem_rejected(self, registry):
        """Test that too few rows for the unknowns raise UnderdeterminedError."""
        problem = KernelProblem(Variant.FULL, 0.0, ORIGIN, tuple(sample_gl3(5, 1)))
        with pytest.raises(UnderdeterminedError):
            assemble(registry["homog_isotropic"], problem)

    def test_degenerate_sample_rejected(self, registry):
        """Test that an F sample outside GL+(3) is rejected."""
        problem = KernelProblem(Variant.ISOTROPY, 0.0, ORIGIN, (np.eye(3), -np.eye(3)) * 5)
        with pytest.raises(ValueError):
            assemble(registry["homog_pair"], problem)


class TestNullspace:
    """Test SVD nullspaces and rank decisions."""

    def test_zero_matrix(self):
        """Test that the zero system has the full unknown space."""
        result = nullspace(np.zeros((4, 13)))
        assert result.dim == 13

    def test_identity(self):
        """Test that the identity has a trivial nullspace."""
        result = nullspace(np.eye(13))
        assert result.dim == 0
        assert result.basis.shape == (13, 0)

    def test_ambiguous_rank_raises(self):
        """Test that a singular value near the threshold raises RankUnstableError."""
        with pytest.raises(RankUnstableError):
            nullspace(np.diag([1.0, 1e-8]), tau_rank=1e-8)

    def test_held_out_failure_raises(self):
        """Test that a basis violating the held-out rows is rejected."""
        with pytest.raises(RankUnstableError):
            nullspace(np.array([[1.0, 0.0]]), validation=np.array([[0.0, 1.0]]))

    def test_held_out_success_records_residual(self):
        """Test the validation residual on a consistent held-out system."""
        result = nullspace(np.array([[1.0, 0.0]]), validation=np.array([[2.0, 0.0]]))
        assert result.dim == 1
        np.testing.assert_allclose(result.validation_residual, [0.0], atol=1e-15)

    def test_non_finite_rejected(self):
        """Test that a non-finite system is rejected."""
        with pytest.raises(ValueError):
            nullspace(np.array([[np.nan, 1.0]]))

    @settings(deadline=None, max_examples=40)
    @given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=2**31 - 1))
    def test_rank_nullity(self, rank, seed):
        """Test rank + nullity = n and A·basis ≈ 0 on well-separated spectra."""
        rng = np.random.default_rng(seed)
        U = scipy.stats.ortho_group.rvs(20, random_state=rng)
        V = scipy.stats.ortho_group.rvs(13, random_state=rng)
        s = rng.uniform(0.5, 2.0, size=rank)
        A = U[:, :rank] @ np.diag(s) @ V[:, :rank].T
        result = nullspace(A)
        assert result.dim == 13 - rank
        assert np.max(np.abs(A @ result.basis), initial=0.0) <= 1e-10
        np.testing.assert_allclose(result.basis.T @ result.basis, np.eye(result.dim), atol=1e-10)


class TestSolve:
    """Test nullspaces of the built-in laws."""

    def test_homog_isotropic_full_dim(self, registry, cfg):
        """Test that W = tr(FᵀF) has a 7-dimensional solution space."""
        results = solve_variants(registry["homog_isotropic"], 1.0, (0.5, 0.0, 0.0), [Variant.FULL], cfg)
        assert results[Variant.FULL].dim == 7

    @pytest.mark.parametrize("name", ["homog_pair", "aging_pair", "graded", "implant"])
    def test_variant_monotonicity(self, registry, cfg, name):
        """Test that restricting unknowns never grows the nullspace."""
        dims = {v: r.dim for v, r in solve_variants(registry[name], 1.0, (0.5, 0.0, 0.0), list(Variant), cfg).items()}
        assert dims[Variant.STATE_T] <= dims[Variant.FULL]
        assert dims[Variant.PARTICLE_X] <= dims[Variant.FULL]
        assert dims[Variant.ISOTROPY] <= dims[Variant.STATE_T]
        assert dims[Variant.ISOTROPY] <= dims[Variant.PARTICLE_X]

    def test_isotropy_basis_is_skew_for_homog_pair(self, registry, cfg):
        """Test that the isotropy directions of (tr(FᵀF), det F) are skew."""
        result = solve_variants(registry["homog_pair"], 0.0, ORIGIN, [Variant.ISOTROPY], cfg)[Variant.ISOTROPY]
        assert result.dim == 3
        for column in result.basis.T:
            theta = column.reshape(3, 3)
            np.testing.assert_allclose(theta + theta.T, np.zeros((3, 3)), atol=1e-8)

    def test_doubling_samples_keeps_dims(self, registry):
        """Test dims are unchanged when n_f doubles on a 3×3 grid."""
        law = registry["aging_pair"]
        small, large = SamplingConfig(n_f=30, n_validation=10), SamplingConfig(n_f=60, n_validation=10)
        for t in (0.0, 5.0, 10.0):
            for x1 in (-1.0, 0.0, 1.0):
                a = solve_variants(law, t, (x1, 0.0, 0.0), list(Variant), small)
                b = solve_variants(law, t, (x1, 0.0, 0.0), list(Variant), large)
                assert {v: r.dim for v, r in a.items()} == {v: r.dim for v, r in b.items()}

    def test_solve_matches_solve_variants(self, registry, cfg):
        """Test that a single kernel problem agrees with the shared solve."""
        law = registry["aging_pair"]
        problem = KernelProblem(Variant.STATE_T, 2.0, ORIGIN, tuple(cfg.training_samples()))
        single = solve(law, problem, cfg)
        shared = solve_variants(law, 2.0, ORIGIN, [Variant.STATE_T], cfg)[Variant.STATE_T]
        assert single.dim == shared.dim == 6

    def test_unstable_rank_names_variant(self, registry, cfg, monkeypatch):
        """Test that a RankUnstableError from a solve carries its variant."""
        def ambiguous(*args, **kwargs):
            raise RankUnstableError("ambiguous")

        monkeypatch.setattr("matdist.kernel.nullspace", ambiguous)
        with pytest.raises(RankUnstableError) as excinfo:
            solve_variants(registry["homog_pair"], 0.0, ORIGIN, [Variant.PARTICLE_X], cfg)
        assert excinfo.value.variant == "ParticleX"

    def test_too_few_samples(self, registry):
        """Test that n_f too small for a variant raises UnderdeterminedError."""
        with pytest.raises(UnderdeterminedError):
            solve_variants(registry["homog_isotropic"], 0.0, ORIGIN, [Variant.FULL],
                           SamplingConfig(n_f=4, n_validation=0))
