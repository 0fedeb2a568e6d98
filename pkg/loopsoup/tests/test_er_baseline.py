"""
Tests for the Erdos-Renyi G(n, c/n) baseline.

The isolated-tree factorial-moment formula is checked against the exhaustive
expectation over all labelled graphs, in exact rationals.
"""

import math
from collections import Counter
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from pytest import approx

from loopsoup.src.components.er_baseline import (ErParams, er_cluster_count_asymptotic,
                                                 er_exhaustive_factorial_moment, er_tree_factorial_moment,
                                                 isolated_cluster_census, isolated_tree_census, sample_gnp)
from loopsoup.src.components.statistics import chi_square, estimate_mean
from loopsoup.src.utils.exception import LoopSoupException
from loopsoup.src.utils.rng import make_generator


def _graph(n, edges) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from(edges)
    return graph


class TestErParams:
    def test_edge_probability(self):
        assert ErParams(n=4, c=1.0).p == 0.25

    @pytest.mark.parametrize("n,c", [(4, 0.0), (4, 4.0), (1, 0.5)])
    def test_invalid(self, n, c):
        with pytest.raises(LoopSoupException):
            ErParams(n=n, c=c)


class TestSampling:
    def test_same_seed_same_graph(self):
        params = ErParams(n=60, c=1.5)
        first = sorted(sample_gnp(make_generator(4), params).edges())
        second = sorted(sample_gnp(make_generator(4), params).edges())
        assert first == second

    def test_tiny_c_gives_empty_graphs(self, rng):
        params = ErParams(n=50, c=1e-9)
        assert all(sample_gnp(rng, params).number_of_edges() == 0 for _ in range(100))

    def test_edge_count_mean(self):
        rng = make_generator(17)
        params = ErParams(n=100, c=1.0)
        mean, stderr = estimate_mean([sample_gnp(rng, params).number_of_edges() for _ in range(5000)])
        assert abs(mean - math.comb(100, 2) / 100) <= 4 * stderr

    def test_half_probability_is_uniform_over_graphs(self):
        rng = make_generator(23)
        params = ErParams(n=4, c=2.0)
        counts = Counter(frozenset(sample_gnp(rng, params).edges()) for _ in range(6400))
        assert len(counts) == 64
        _, pvalue = chi_square(list(counts.values()), [100.0] * 64)
        assert pvalue > 1e-3


class TestCensus:
    def test_empty_graph(self):
        assert isolated_tree_census(_graph(7, []), 1) == 7
        assert isolated_cluster_census(_graph(7, []), 1) == 7

    def test_triangle_is_not_a_tree(self):
        graph = _graph(5, [(0, 1), (1, 2), (2, 0)])
        assert isolated_cluster_census(graph, 3) == 1
        assert isolated_tree_census(graph, 3) == 0

    def test_path_is_a_tree(self):
        graph = _graph(5, [(0, 1), (1, 2)])
        assert isolated_cluster_census(graph, 3) == 1
        assert isolated_tree_census(graph, 3) == 1
        assert isolated_tree_census(graph, 1) == 2

    def test_tree_census_never_exceeds_cluster_census(self, rng):
        params = ErParams(n=80, c=1.2)
        for _ in range(50):
            graph = sample_gnp(rng, params)
            for d in (1, 2, 3, 4):
                assert isolated_tree_census(graph, d) <= isolated_cluster_census(graph, d)


class TestFactorialMoments:
    def test_isolated_edges_on_four_vertices(self):
        assert er_tree_factorial_moment(4, 1.0, 2, 1) == approx(0.474609375, rel=1e-12)
        assert er_tree_factorial_moment(4, Fraction(1), 2, 1) == Fraction(243, 512)

    @pytest.mark.parametrize("n,c", [(10, 1.0), (50, 2.5)])
    def test_isolated_vertices(self, n, c):
        assert er_tree_factorial_moment(n, c, 1, 1) == approx(n * (1 - c / n) ** (n - 1), rel=1e-12)

    def test_too_many_blocks(self):
        assert er_tree_factorial_moment(5, 1.0, 3, 2) == 0.0
        assert er_tree_factorial_moment(5, Fraction(1), 3, 2) == Fraction(0)

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    @pytest.mark.parametrize("p", [Fraction(1, 4), Fraction(1, 2)])
    def test_formula_matches_exhaustive_sum(self, n, p):
        for d in range(1, n + 1):
            for k in (1, 2):
                assert er_tree_factorial_moment(n, p * n, d, k) == er_exhaustive_factorial_moment(n, p, d, k)

    @pytest.mark.slow
    @pytest.mark.parametrize("p", [Fraction(1, 4), Fraction(1, 2)])
    def test_formula_matches_exhaustive_sum_n6(self, p):
        for d in range(1, 7):
            for k in (1, 2):
                assert er_tree_factorial_moment(6, p * 6, d, k) == er_exhaustive_factorial_moment(6, p, d, k)

    def test_displayed_form_misses_tree_count(self):
        p = Fraction(1, 4)
        exhaustive = er_exhaustive_factorial_moment(4, p, 3, 1)
        assert er_tree_factorial_moment(4, p * 4, 3, 1, uncorrected_form=True) != exhaustive
        assert er_tree_factorial_moment(4, p * 4, 3, 1) == exhaustive

    def test_exhaustive_cap(self):
        with pytest.raises(LoopSoupException) as info:
            er_exhaustive_factorial_moment(7, Fraction(1, 2), 2, 1)
        assert info.value.error_type == "EnumerationCapExceeded"


class TestAsymptotics:
    def test_closed_form(self):
        assert er_cluster_count_asymptotic(2000, 1.0, 1) == approx(2000 * math.exp(-1))
        assert er_cluster_count_asymptotic(2000, 1.0, 3) == approx(2000 * 3 * math.exp(-3) / 6)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_census_mean_at_n_2000(self, d):
        rng = make_generator(29 + d)
        params = ErParams(n=2000, c=1.0)
        counts = np.array([isolated_cluster_census(sample_gnp(rng, params), d) for _ in range(200)])
        assert counts.mean() == approx(er_cluster_count_asymptotic(2000, 1.0, d), rel=0.05)
