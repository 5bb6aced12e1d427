"""
Tests for the closed-form bounds
"""

import json
import os
import sys
from fractions import Fraction

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from region_atlas.bounds import (asymptotic_exponent, binom_sum, bound_report, central_regions, cnn_upper,
                                 depth_comparison, gcn_vs_mlp, kset_count, multi_lower, multi_upper, naive_bound,
                                 nn_upper, one_layer_max, per_param_ratio)
from region_atlas.errors import CapExceededError, HypothesisError
from region_atlas.graph import fixture, normalize
from region_atlas.model import GcnSpec


@pytest.fixture
def path3():
    return normalize(fixture("path3"))


class TestOneLayer:
    """One-layer GCN on the 3-node path with one input feature"""

    def test_exact_maximum(self):
        assert [one_layer_max(3, 1, n) for n in range(1, 6)] == [8, 27, 64, 125, 216]

    def test_general_position_bound(self):
        assert [binom_sum(3, 3 * n) for n in range(1, 6)] == [8, 42, 130, 299, 576]

    def test_naive(self):
        assert [naive_bound(3 * n) for n in range(1, 6)] == [8, 64, 512, 4096, 32768]

    def test_monotone_in_each_argument(self):
        for d_star in range(1, 5):
            for n_in in range(1, 5):
                for n_out in range(1, 7):
                    value = one_layer_max(d_star, n_in, n_out)
                    assert one_layer_max(d_star + 1, n_in, n_out) >= value
                    assert one_layer_max(d_star, n_in + 1, n_out) >= value
                    assert one_layer_max(d_star, n_in, n_out + 1) >= value

    def test_saturates_when_inputs_dominate(self):
        assert one_layer_max(2, 5, 3) == 2 ** (3 * 2)

    def test_four_node_graph_at_one_feature(self):
        assert one_layer_max(4, 1, 1) == binom_sum(4, 4) == naive_bound(4) == 16

    def test_asymptotic_exponent(self):
        assert asymptotic_exponent(3, 2) == 6


class TestMultiLayer:
    """Two-layer bounds for widths [2, 2, N2] on the 3-node path"""

    def test_lower(self, path3):
        values = [multi_lower(GcnSpec(widths=(2, 2, n)), path3) for n in range(1, 6)]
        assert values == [8, 64, 343, 1331, 4096]

    def test_upper(self, path3):
        values = [multi_upper(GcnSpec(widths=(2, 2, n)), path3) for n in range(1, 6)]
        assert values == [512, 4096, 29824, 160640, 636736]

    def test_hypothesis(self, path3):
        with pytest.raises(HypothesisError, match="N_l >= N_0"):
            multi_lower(GcnSpec(widths=(2, 1, 2)), path3)

    def test_last_layer_unconstrained(self, path3):
        assert multi_lower(GcnSpec(widths=(2, 2, 1)), path3) == 8

    def test_folding_factor(self, path3):
        """floor(N_1 / N_0)^(N_0 rank) multiplies the last-layer count"""
        assert multi_lower(GcnSpec(widths=(1, 3, 1)), path3) == 8 * 3 ** 3
        assert multi_lower(GcnSpec(widths=(1, 3, 1)), path3, rank_a=1) == 8 * 3


class TestKSet:
    """Tests for the independent-subset count"""

    def test_generic_matches_maximum(self, path3):
        w = np.random.default_rng(0).normal(size=(1, 2))
        assert kset_count(path3, w) == one_layer_max(3, 1, 2)

    def test_generic_two_inputs(self, path3):
        w = np.random.default_rng(1).normal(size=(2, 3))
        assert kset_count(path3, w) == one_layer_max(3, 2, 3)

    @pytest.mark.parametrize("name", ["path3", "star3"])
    @pytest.mark.parametrize("n_in,n_out", [(1, 2), (2, 2), (2, 3)])
    def test_random_draws_match_maximum(self, name, n_in, n_out):
        adj = normalize(fixture(name))
        rng = np.random.default_rng(40 + n_in * 10 + n_out)
        expected = one_layer_max(adj.d_star, n_in, n_out)
        assert all(kset_count(adj, rng.normal(size=(n_in, n_out))) == expected for _ in range(100))

    def test_duplicate_columns_fall_short(self, path3):
        w = np.array([[0.8, 0.8, 0.8]])
        assert kset_count(path3, w) == 8
        assert kset_count(path3, w) < one_layer_max(3, 1, 3)

    def test_cap(self, path3):
        with pytest.raises(CapExceededError):
            kset_count(path3, np.ones((1, 7)), cap=20)


class TestComparators:
    """Tests for MLP, CNN and central-arrangement comparators"""

    def test_central_regions(self):
        assert central_regions(0, 3) == 1
        assert central_regions(1, 1) == 2
        assert central_regions(2, 2) == 4
        assert central_regions(3, 2) == 6

    def test_nn_upper(self):
        assert nn_upper(2, [2, 2]) == 16
        assert nn_upper(1, [3]) == 4

    def test_cnn_upper(self):
        assert cnn_upper(8, 2, [3]) == 56

    def test_per_param_ratio(self):
        assert per_param_ratio(30, GcnSpec(widths=(2, 2, 3))) == Fraction(2)

    def test_depth_comparison(self, path3):
        deep, shallow = depth_comparison(path3, 1, 2, 2)
        assert deep == Fraction(216, 10)
        assert shallow == Fraction(125, 8)

    def test_deep_overtakes_shallow(self, path3):
        """With two input features the shallow net leads at small widths only"""
        ratios = {w: depth_comparison(path3, 2, w, 2) for w in range(2, 33)}
        assert ratios[2][0] < ratios[2][1]
        assert ratios[5][0] < ratios[5][1]
        assert all(ratios[w][0] > ratios[w][1] for w in range(6, 33))
        advantage = [ratios[w][0] / ratios[w][1] for w in (8, 16, 32)]
        assert advantage == sorted(advantage)

    def test_gcn_vs_mlp(self, path3):
        assert gcn_vs_mlp(path3, 1, 2, 2) == (216, 16)


class TestBoundReport:
    """Tests for the collected bound report"""

    def test_table_column(self, path3):
        report = bound_report(GcnSpec(widths=(2, 2, 3)), path3)
        assert report.multi_lower == 343
        assert report.multi_upper == 29824
        assert report.naive == 2 ** 15
        assert report.one_layer_max is None

    def test_json_uses_strings(self, path3):
        payload = json.loads(bound_report(GcnSpec(widths=(2, 2, 3)), path3).model_dump_json())
        assert payload["multi_lower"] == "343"
        assert payload["multi_upper"] == "29824"
        assert payload["ratio_upper"] == "29824/15"

    def test_hypothesis_failure_drops_lower(self, path3):
        report = bound_report(GcnSpec(widths=(2, 1, 2)), path3)
        assert report.multi_lower is None
        assert report.ratio_lower is None

    def test_one_layer(self, path3):
        report = bound_report(GcnSpec(widths=(1, 2)), path3)
        assert report.one_layer_max == 27
        assert report.multi_upper == 27
