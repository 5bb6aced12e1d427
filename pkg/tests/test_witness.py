"""
Tests for the folding witness network
"""

import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from region_atlas.bounds import multi_lower
from region_atlas.errors import HypothesisError
from region_atlas.graph import FIXTURE_NAMES, fixture, normalize
from region_atlas.model import GcnSpec
from region_atlas.witness import build_witness, folding_layer, sawtooth_fold, verify_folding, witness_region_check


class TestSawtooth:
    """Tests for the coordinatewise fold"""

    def test_identity_for_one_fold(self):
        y = np.linspace(0.0, 2.0, 9)
        assert np.allclose(sawtooth_fold(1, 2.0, y), y)

    def test_two_folds(self):
        c = 1.5
        assert sawtooth_fold(2, c, c / 4) == pytest.approx(c / 2)
        assert sawtooth_fold(2, c, c / 2) == pytest.approx(c)
        assert sawtooth_fold(2, c, 3 * c / 4) == pytest.approx(c / 2)
        assert sawtooth_fold(2, c, c) == pytest.approx(0.0)

    def test_three_folds_alternate(self):
        c = 1.0
        values = [sawtooth_fold(3, c, y) for y in (0.0, 1 / 3, 2 / 3, 1.0)]
        assert np.allclose(values, [0.0, 1.0, 0.0, 1.0])


class TestFoldingLayer:
    """Tests for one folding layer"""

    def test_shapes_and_surplus(self):
        sides = np.sqrt(np.array([2.0, 3.0, 2.0]))
        w, b, w_star = folding_layer(2, 1, 3, sides)
        assert w.shape == (1, 3)
        assert b.shape == (3, 3)
        assert w_star.shape == (3, 1)
        assert np.allclose(w[0], [2.0, 4.0, 0.0])
        assert np.allclose(b[:, 1], -2.0 * sides)
        assert np.all(b[:, 2] < 0)
        assert np.allclose(w_star[:, 0], [1.0, -1.0, 0.0])


class TestBuildWitness:
    """Tests for the assembled witness"""

    def test_plan(self):
        adj = normalize(fixture("path3"))
        params, plan = build_witness(GcnSpec(widths=(1, 3, 2)), adj, final_seed=0)
        assert plan.p_per_layer == (3,)
        assert np.allclose(plan.r, [2.0, 3.0, 2.0])
        assert params.weights[0].shape == (1, 3)
        assert params.weights[1].shape == (3, 2)

    def test_hypothesis(self):
        adj = normalize(fixture("path3"))
        with pytest.raises(HypothesisError):
            build_witness(GcnSpec(widths=(2, 1, 2)), adj, final_seed=0)

    def test_seeded(self):
        adj = normalize(fixture("star3"))
        spec = GcnSpec(widths=(1, 2, 2))
        a, _ = build_witness(spec, adj, final_seed=3)
        b, _ = build_witness(spec, adj, final_seed=3)
        assert np.array_equal(a.weights[1], b.weights[1])


class TestVerifyFolding:
    """The three properties behind the lower bound"""

    @pytest.mark.parametrize("name", FIXTURE_NAMES)
    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_one_input_feature(self, name, p):
        adj = normalize(fixture(name))
        spec = GcnSpec(widths=(1, p, 2))
        _, plan = build_witness(spec, adj, final_seed=0)
        report = verify_folding(spec, adj, plan)
        assert report.passed, report.failures
        assert report.residuals["sawtooth_composition"] <= 1e-9

    @pytest.mark.parametrize("name", FIXTURE_NAMES)
    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_two_input_features_two_folds(self, name, p):
        adj = normalize(fixture(name))
        spec = GcnSpec(widths=(2, 2 * p + 1, p * 2, 1))
        _, plan = build_witness(spec, adj, final_seed=1)
        report = verify_folding(spec, adj, plan)
        assert plan.p_per_layer == (p, p)
        assert report.passed, report.failures


class TestRegionCheck:
    """Exact count of the witness against the lower bound"""

    @pytest.mark.parametrize("name", ["single1", "path3"])
    @pytest.mark.parametrize("widths", [(1, 2, 1), (1, 2, 2)])
    def test_reaches_lower_bound(self, name, widths):
        adj = normalize(fixture(name))
        spec = GcnSpec(widths=widths)
        check = witness_region_check(spec, adj, final_seed=0)
        assert check.lower == multi_lower(spec, adj)
        assert check.passed

    @pytest.mark.slow
    @pytest.mark.parametrize("name", ["single1", "path3"])
    @pytest.mark.parametrize("widths", [(1, 2, 1), (1, 2, 2), (1, 3, 2)])
    @pytest.mark.parametrize("final_seed", [0, 1, 2])
    def test_all_seeds(self, name, widths, final_seed):
        adj = normalize(fixture(name))
        assert witness_region_check(GcnSpec(widths=widths), adj, final_seed=final_seed).passed
