#!/usr/bin/env python3
"""
Pytest tests for sweep classification.
"""

import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

# Add the src directory to the path
sys.path.insert(0, str(Path(__file__).parent.parent))

from matdist.classify import CAVEATS, CITATIONS, CRITERIA, THRESHOLD_PROVENANCE, classify
from matdist.distributions import FiberReport, GridSpec, grid_sweep
from matdist.errors import IncompleteSweepError
from matdist.kernel import SamplingConfig
from matdist.law import builtin_registry


@pytest.fixture(scope="module")
def registry():
    return builtin_registry()


@pytest.fixture(scope="module")
def cfg():
    return SamplingConfig(n_f=30, n_validation=20)


@pytest.fixture(scope="module")
def grid():
    return GridSpec.regular((0.0, 2.0), 2, (-1.0, 1.0), 2)


def synthetic(t, x1, full, base, state_base, px_base, iso=3):
    return FiberReport(t=t, x=(x1, 0.0, 0.0), dim_full=full, dim_base=base, dim_state_t=state_base + iso,
                       dim_state_t_base=state_base, dim_particle_x=px_base + iso, dim_particle_x_base=px_base,
                       dim_isotropy=iso, dim_vertical=full - base, n_f=40)


def values(report):
    return {name: verdict.value for name, verdict in report.verdicts.items()}


class TestBuiltinLaws:
    """Test verdicts on sweeps of the built-in laws."""

    def test_homog_pair_is_uniform_remodeling(self, registry, cfg, grid):
        """Test that a homogeneous law is a smooth uniform remodeling."""
        report = classify(grid_sweep(registry["homog_pair"], grid, cfg))
        assert values(report) == {
            "smooth_uniform_remodeling": True,
            "smooth_remodeling": True,
            "smooth_aging": False,
            "uniform_aging": False,
        }
        assert report.dims_constant is True
        assert len(report.smooth_uniform_remodeling.witnesses) == len(grid)

    def test_aging_pair_is_uniform_aging(self, registry, cfg, grid):
        """Test that W = ((1+t)·tr(FᵀF), det F) ages uniformly."""
        report = classify(grid_sweep(registry["aging_pair"], grid, cfg))
        assert values(report) == {
            "smooth_uniform_remodeling": False,
            "smooth_remodeling": False,
            "smooth_aging": True,
            "uniform_aging": True,
        }
        assert report.smooth_uniform_remodeling.counterexample == {"t": 0.0, "x": [-1.0, 0.0, 0.0]}

    def test_graded_has_dimension_jump(self, registry, cfg):
        """Test that a dimension jump across x¹ = 0 blocks every verdict."""
        report = classify(grid_sweep(registry["graded"], GridSpec((0.0,), (0.0, 1.0)), cfg))
        assert report.dims_constant is False
        assert not any(values(report).values())
        assert report.smooth_uniform_remodeling.counterexample == {"t": 0.0, "x": [1.0, 0.0, 0.0]}
        assert report.smooth_remodeling.counterexample == {"t": 0.0, "x": [1.0, 0.0, 0.0]}


class TestReportShape:
    """Test report contents and error paths."""

    def test_to_dict(self):
        """Test the serialized report."""
        report = classify([synthetic(0.0, 0.0, 7, 4, 3, 1)], thresholds={"tau_rank": 1e-8})
        record = report.to_dict()
        assert record["status"] == "complete"
        assert record["thresholds_used"] == {"tau_rank": 1e-8}
        assert record["caveats"] == list(CAVEATS)
        assert record["verdicts"]["smooth_remodeling"]["criterion"] == CRITERIA["smooth_remodeling"]
        assert record["per_point"][0]["dim_full"] == 7

    def test_criteria_are_plain_language(self):
        """Test that every verdict names its criterion."""
        assert set(CRITERIA) == {"smooth_uniform_remodeling", "smooth_remodeling", "smooth_aging", "uniform_aging"}
        assert all("dimension" in text for text in CRITERIA.values())

    def test_every_verdict_carries_its_citation(self):
        """Test that each verdict and threshold embeds the result it applies."""
        record = classify([synthetic(0.0, 0.0, 6, 3, 3, 0)]).to_dict()
        for name, verdict in record["verdicts"].items():
            assert verdict["citation"] == CITATIONS[name]
            assert any(word in verdict["citation"] for word in ("theorem", "proposition"))
        provenance = record["threshold_provenance"]
        assert {entry["value"] for entry in provenance.values()} == {4, 3, 1, 0}
        assert all(entry["citation"] in CITATIONS.values() for entry in provenance.values())
        assert provenance == THRESHOLD_PROVENANCE

    def test_empty_sweep(self):
        """Test that an empty sweep is rejected."""
        with pytest.raises(ValueError):
            classify([])

    def test_incomplete_sweep_carries_partial_report(self):
        """Test that failed points raise with verdicts over the rest."""
        sweep = [synthetic(0.0, 0.0, 7, 4, 3, 1), FiberReport(t=1.0, x=(0.0, 0.0, 0.0), error="DomainError: out")]
        with pytest.raises(IncompleteSweepError) as excinfo:
            classify(sweep)
        partial = excinfo.value.report
        assert not partial.complete
        assert partial.to_dict()["status"] == "incomplete"
        assert partial.failed_points == [{"t": 1.0, "x": [0.0, 0.0, 0.0], "error": "DomainError: out"}]
        assert partial.smooth_uniform_remodeling.value is True
        assert len(partial.per_point) == 2

    def test_all_points_failed(self):
        """Test that a sweep with no successes has no verdicts."""
        with pytest.raises(IncompleteSweepError) as excinfo:
            classify([FiberReport(t=0.0, x=(0.0, 0.0, 0.0), error="NonFiniteError: nan")])
        assert excinfo.value.report.verdicts == {}
        assert excinfo.value.report.dims_constant is None

    def test_classification_is_pure(self):
        """Test that classifying twice gives identical reports."""
        sweep = [synthetic(0.0, 0.0, 6, 3, 3, 0), synthetic(1.0, 0.0, 6, 3, 3, 0)]
        assert classify(sweep).to_dict() == classify(list(sweep)).to_dict()

    def test_aging_without_uniform_state(self):
        """Test smooth aging whose states are not uniform."""
        report = classify([synthetic(0.0, 0.0, 5, 2, 2, 0), synthetic(1.0, 0.0, 5, 2, 2, 1)])
        assert report.smooth_aging.value is True
        assert report.smooth_aging.witnesses == [{"t": 0.0, "x": [0.0, 0.0, 0.0]}]
        assert report.uniform_aging.value is False
        assert report.uniform_aging.counterexample == {"t": 0.0, "x": [0.0, 0.0, 0.0]}


point_dims = st.tuples(
    st.integers(min_value=3, max_value=7),
    st.integers(min_value=0, max_value=4),
    st.integers(min_value=0, max_value=3),
    st.integers(min_value=0, max_value=1),
)


class TestImplications:
    """Test logical relations between verdicts on synthetic sweeps."""

    @settings(deadline=None, max_examples=200)
    @given(st.lists(point_dims, min_size=1, max_size=8))
    def test_verdict_lattice(self, rows):
        """Test implications that hold for every sweep."""
        sweep = [synthetic(float(i), 0.0, max(full, base), base, min(state, base), px)
                 for i, (full, base, state, px) in enumerate(rows)]
        report = classify(sweep)
        v = values(report)
        if v["uniform_aging"]:
            assert v["smooth_aging"]
        assert not (v["smooth_aging"] and v["smooth_remodeling"])
        if any(v.values()):
            assert report.dims_constant
        if v["smooth_uniform_remodeling"]:
            assert all(r.dim_base == 4 for r in sweep)
        for verdict in report.verdicts.values():
            assert verdict.value == (verdict.counterexample is None)
