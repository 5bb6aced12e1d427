"""
Tests for Monte Carlo region estimation
"""

import json
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from region_atlas.arrangement import exact_count_multi
from region_atlas.bounds import multi_upper
from region_atlas.errors import InvalidInputError
from region_atlas.graph import fixture, normalize
from region_atlas.model import GcnSpec, Parameters, init_kaiming
from region_atlas.sampler import (SamplingConfig, draw_inputs, estimate_regions, paper_sweep, parse_distribution,
                                  saturation_curve, sweep_configs)


@pytest.fixture
def path3():
    return normalize(fixture("path3"))


class TestDistributions:
    """Tests for distribution parsing and input draws"""

    def test_parse(self):
        assert parse_distribution("normal:1.5") == ("normal", 1.5)
        assert parse_distribution("uniform:10") == ("uniform", 10.0)

    @pytest.mark.parametrize("text", ["normal", "gauss:1", "uniform:-2", "normal:abc"])
    def test_parse_rejects(self, text):
        with pytest.raises(InvalidInputError):
            parse_distribution(text)

    def test_draws_are_reproducible(self):
        cfg = SamplingConfig(distribution="normal", scale=2.0, samples=100, seed=4, batch=100)
        a = draw_inputs(cfg, (3, 2), 0)
        assert a.shape == (100, 3, 2)
        assert np.array_equal(a, draw_inputs(cfg, (3, 2), 0))
        assert not np.array_equal(a, draw_inputs(cfg, (3, 2), 1))

    def test_uniform_range(self):
        cfg = SamplingConfig(distribution="uniform", scale=5.0, samples=1000, seed=0, batch=1000)
        x = draw_inputs(cfg, (3, 1), 0)
        assert x.min() >= -5.0 and x.max() <= 5.0

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            SamplingConfig(distribution="normal", scale=0.0, samples=10)
        with pytest.raises(ValueError):
            SamplingConfig(distribution="normal", scale=1.0, samples=0)


class TestEstimate:
    """Tests for distinct-pattern estimation"""

    def test_single_neuron_both_sides(self):
        adj = normalize(fixture("single1"))
        spec = GcnSpec(widths=(1, 1))
        params = Parameters(weights=(np.array([[1.0]]),), biases=(np.array([0.0]),))
        cfg = SamplingConfig(distribution="normal", scale=1.0, samples=500, seed=0, batch=100)
        assert estimate_regions(spec, adj, params, cfg).distinct_patterns == 2

    def test_thread_invariance(self, path3):
        spec = GcnSpec(widths=(2, 3, 2))
        params = init_kaiming(spec, 8)
        cfg = SamplingConfig(distribution="uniform", scale=5.0, samples=20_000, seed=21, batch=3_000)
        reports = [estimate_regions(spec, path3, params, cfg, workers=w) for w in (1, 4, 8)]
        dumps = [r.model_dump_json() for r in reports]
        assert dumps[0] == dumps[1] == dumps[2]

    def test_below_upper_bound(self, path3):
        spec = GcnSpec(widths=(2, 2, 3))
        cfg = SamplingConfig(distribution="normal", scale=3.0, samples=20_000, seed=1, batch=5_000)
        report = estimate_regions(spec, path3, init_kaiming(spec, 1), cfg)
        assert 1 <= report.distinct_patterns <= multi_upper(spec, path3)

    def test_estimate_below_exact(self, path3):
        spec = GcnSpec(widths=(2, 2, 1))
        params = init_kaiming(spec, 2)
        exact, _ = exact_count_multi(spec, path3, params)
        cfg = SamplingConfig(distribution="normal", scale=3.0, samples=20_000, seed=2, batch=5_000)
        assert estimate_regions(spec, path3, params, cfg).distinct_patterns <= exact

    def test_report_json(self, path3):
        spec = GcnSpec(widths=(2, 2))
        cfg = SamplingConfig(distribution="normal", scale=1.0, samples=1_000, seed=3, batch=1_000)
        payload = json.loads(estimate_regions(spec, path3, init_kaiming(spec, 0), cfg).model_dump_json())
        assert isinstance(payload["distinct_patterns"], str)
        assert payload["samples_used"] == 1_000
        assert payload["seed"] == 3


class TestSweep:
    """Tests for the eight-configuration sweep"""

    def test_configs(self):
        configs = sweep_configs(seed=5, samples=100)
        assert len(configs) == 8
        assert len({c.stream for c in configs}) == 8
        assert [c.label() for c in configs][:2] == ["normal:1", f"normal:{np.sqrt(3):g}"]
        assert [c.scale for c in configs if c.distribution == "uniform"] == [1.0, 5.0, 10.0]

    def test_max_over_configs(self, path3):
        spec = GcnSpec(widths=(2, 2, 2))
        report = paper_sweep(spec, path3, init_kaiming(spec, 0), seed=0, samples=2_000, batch=1_000)
        assert len(report.per_config) == 8
        assert report.max_over_configs == max(c.count for c in report.per_config)
        assert report.distinct_patterns == report.max_over_configs

    def test_saturation_curve(self, path3):
        spec = GcnSpec(widths=(2, 2, 2))
        params = init_kaiming(spec, 6)
        cfg = SamplingConfig(distribution="normal", scale=2.0, samples=5_000, seed=6, batch=1_500)
        curve = saturation_curve(spec, path3, params, cfg, [500, 1_500, 2_000, 5_000])
        assert [n for n, _ in curve] == [500, 1_500, 2_000, 5_000]
        counts = [c for _, c in curve]
        assert counts == sorted(counts)
        assert counts[-1] == estimate_regions(spec, path3, params, cfg).distinct_patterns

    def test_saturation_checkpoints_validated(self, path3):
        spec = GcnSpec(widths=(2, 2))
        cfg = SamplingConfig(distribution="normal", scale=1.0, samples=10, seed=0)
        with pytest.raises(InvalidInputError):
            saturation_curve(spec, path3, init_kaiming(spec, 0), cfg, [10, 5])
