"""
Tests for weighted graphs with killing.

Covers transition matrices, Green determinants on the complete-graph fast
path against dense linear algebra, determinant ratios of partitions and the
trace / determinant closed forms used by the sampler and the loop mass.
"""

import math

import numpy as np
import pytest
from pytest import approx

from loopsoup.src.components.graph_model import (GraphSpec, build_transition, complete_log_det_i_minus_theta_p,
                                                 complete_trace_powers, det_ratio, green_det,
                                                 log_det_i_minus_theta_p, log_equicorrelated_det, log_green_det)
from loopsoup.src.components.partition_lattice import Partition, enumerate_all
from loopsoup.src.utils.exception import LoopSoupException


def _dense_copy(g: GraphSpec) -> GraphSpec:
    """Same graph without the complete-graph marker, so every computation takes the dense path."""
    return GraphSpec(conductances=g.conductances.copy(), killing=g.killing.copy())


def _merges(pi: Partition):
    """Every partition obtained from pi by joining two of its blocks."""
    blocks = [list(block) for block in pi.blocks]
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            rest = [block for k, block in enumerate(blocks) if k not in (i, j)]
            yield Partition.from_blocks(rest + [blocks[i] + blocks[j]])


class TestGraphSpec:
    def test_complete_graph_lambdas(self):
        g = GraphSpec.complete(3, 1.0)
        assert g.n == 3
        assert g.is_complete
        assert g.lambdas.tolist() == [3.0, 3.0, 3.0]

    def test_no_killing_is_rejected(self):
        with pytest.raises(LoopSoupException) as info:
            GraphSpec(conductances=np.array([[0.0, 1.0], [1.0, 0.0]]), killing=np.zeros(2))
        assert info.value.error_type == "InvalidGraph"

    @pytest.mark.parametrize("conductances", [
        [[0.0, 1.0], [2.0, 0.0]],
        [[1.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0], [-1.0, 0.0]],
    ])
    def test_malformed_conductances(self, conductances):
        with pytest.raises(LoopSoupException) as info:
            GraphSpec(conductances=np.array(conductances), killing=np.ones(2))
        assert info.value.error_type == "InvalidGraph"

    def test_from_dict_without_weights_is_complete(self):
        g = GraphSpec.from_dict({"n": 4, "kappa": 0.5})
        assert g.is_complete
        assert g.to_dict() == {"n": 4, "kappa": 0.5}

    def test_from_dict_with_killing_takes_general_path(self):
        g = GraphSpec.from_dict({"n": 3, "kappa": 1.0, "killing": [1.0, 0.0, 2.0]})
        assert not g.is_complete
        assert g.killing.tolist() == [1.0, 0.0, 2.0]
        assert g.to_dict()["conductances"] == [0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]


class TestBuildTransition:
    def test_k2(self):
        p = build_transition(GraphSpec.complete(2, 1.0))
        assert p.entries.tolist() == [[0.0, 0.5], [0.5, 0.0]]

    def test_k3_off_diagonal_entries(self):
        p = build_transition(GraphSpec.complete(3, 1.0))
        off = p.entries[~np.eye(3, dtype=bool)]
        assert off == approx(np.full(6, 1 / 3))
        assert np.diag(p.entries).tolist() == [0.0, 0.0, 0.0]

    def test_row_sums_are_substochastic(self):
        g = GraphSpec(conductances=np.array([[0, 1, 2], [1, 0, 0], [2, 0, 0]], dtype=float),
                      killing=np.array([0.5, 0.0, 1.0]))
        p = build_transition(g)
        expected = (g.lambdas - g.killing) / g.lambdas
        assert p.row_sums == approx(expected)
        assert p.row_sums[0] < 1 and p.row_sums[2] < 1

    @pytest.mark.parametrize("n,kappa", [(3, 1.0), (5, 0.25), (8, 2.0)])
    def test_spectral_radius_matches_dense(self, n, kappa):
        g = GraphSpec.complete(n, kappa)
        assert build_transition(g).spectral_radius == approx(build_transition(_dense_copy(g)).spectral_radius,
                                                              rel=1e-12)


class TestGreenDeterminants:
    def test_k3_full_determinant(self):
        assert green_det(GraphSpec.complete(3, 1.0)) == approx(1 / 16, rel=1e-14)

    @pytest.mark.parametrize("n,kappa", [(2, 1.0), (5, 0.5), (10, 3.0)])
    def test_single_vertex(self, n, kappa):
        assert green_det(GraphSpec.complete(n, kappa), [0]) == approx(1 / (n - 1 + kappa), rel=1e-14)

    def test_closed_form_matches_dense_lu(self):
        g = GraphSpec.complete(4, 2.0)
        assert green_det(g, [1, 3]) == approx(green_det(g, [1, 3], dense=True), rel=1e-12)
        assert green_det(g, [1, 3]) == approx(1 / ((4 - 2 + 2) * (4 + 2)), rel=1e-12)

    def test_large_n_stays_finite(self):
        g = GraphSpec.complete(400, 1.0)
        assert math.isfinite(log_green_det(g))
        assert log_green_det(g) == approx(-math.log(1.0) - 399 * math.log(401.0), rel=1e-12)

    def test_empty_subset_is_rejected(self):
        with pytest.raises(LoopSoupException):
            log_green_det(GraphSpec.complete(3, 1.0), [])

    def test_out_of_range_subset(self):
        with pytest.raises(LoopSoupException) as info:
            log_green_det(GraphSpec.complete(3, 1.0), [0, 5])
        assert info.value.error_type == "VertexOutOfRange"

    def test_equicorrelated_det(self):
        assert log_equicorrelated_det(2.0, 1.0, 3) == approx(math.log(20.0))

    def test_equicorrelated_det_matches_numpy(self, rng):
        for _ in range(50):
            a, b, m = rng.uniform(0.5, 3.0), rng.uniform(0.0, 2.0), int(rng.integers(1, 9))
            matrix = a * np.eye(m) + b * np.ones((m, m))
            assert log_equicorrelated_det(a, b, m) == approx(math.log(np.linalg.det(matrix)), rel=1e-10, abs=1e-12)


class TestDetRatio:
    def test_k3_pair_and_singleton(self):
        pi = Partition.from_blocks([[0], [1, 2]])
        assert det_ratio(GraphSpec.complete(3, 1.0), pi) == approx(2 / 3, rel=1e-14)

    def test_single_block_is_one(self):
        g = GraphSpec(conductances=np.array([[0, 1, 0.5], [1, 0, 2], [0.5, 2, 0]], dtype=float),
                      killing=np.array([1.0, 0.0, 0.3]))
        assert det_ratio(g, Partition.single_block(3)) == approx(1.0)

    def test_fast_path_matches_dense(self):
        g = GraphSpec.complete(4, 1.0)
        pi = Partition.singletons(4)
        assert det_ratio(g, pi) == approx(det_ratio(g, pi, dense=True), rel=1e-12)

    def test_ratio_is_a_probability(self):
        g = GraphSpec.complete(6, 0.5)
        for pi in (Partition.singletons(6), Partition.from_blocks([[0, 1, 2], [3, 4, 5]])):
            assert 0 < det_ratio(g, pi) < 1

    def test_partition_must_cover_vertices(self):
        with pytest.raises(LoopSoupException) as info:
            det_ratio(GraphSpec.complete(4, 1.0), Partition.from_blocks([[0, 1], [2]]))
        assert info.value.error_type == "PartitionMismatch"

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    @pytest.mark.parametrize("kappa", [0.5, 2.0])
    def test_strictly_increasing_under_coarsening(self, n, kappa):
        g = GraphSpec.complete(n, kappa)
        for pi in enumerate_all(n):
            ratio = det_ratio(g, pi)
            for coarser in _merges(pi):
                assert ratio < det_ratio(g, coarser)
        assert det_ratio(g, Partition.single_block(n)) == approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_general_graph_strictly_increasing_under_coarsening(self, n, rng):
        upper = np.triu(rng.uniform(0.2, 2.0, size=(n, n)), 1)
        g = GraphSpec(conductances=upper + upper.T, killing=rng.uniform(0.1, 1.0, size=n))
        for pi in enumerate_all(n):
            ratio = det_ratio(g, pi, dense=True)
            for coarser in _merges(pi):
                assert ratio < det_ratio(g, coarser, dense=True)
        assert det_ratio(g, Partition.single_block(n), dense=True) == approx(1.0, rel=1e-12)


class TestTracesAndDeterminants:
    @pytest.mark.parametrize("n,kappa", [(4, 0.5), (3, 1.0), (6, 2.5)])
    def test_traces_match_matrix_powers(self, n, kappa):
        p = build_transition(GraphSpec.complete(n, kappa)).entries
        ks = list(range(2, 9))
        expected = [np.trace(np.linalg.matrix_power(p, k)) for k in ks]
        assert complete_trace_powers(n, kappa, ks) == approx(expected, rel=1e-12)

    def test_k2_odd_traces_vanish(self):
        assert complete_trace_powers(2, 1.0, [3, 5, 7]).tolist() == [0.0, 0.0, 0.0]

    @pytest.mark.parametrize("theta", [0.0, 0.5, 1.0])
    def test_log_det_matches_dense(self, theta):
        g = GraphSpec.complete(5, 0.7)
        assert log_det_i_minus_theta_p(g, theta) == approx(log_det_i_minus_theta_p(_dense_copy(g), theta),
                                                           rel=1e-12, abs=1e-14)

    def test_k2_loop_mass_determinant(self):
        # eigenvalues of P are +-1/2, so det(I - P) = 3/4
        assert complete_log_det_i_minus_theta_p(2, 1.0) == approx(math.log(0.75), rel=1e-14)

    def test_theta_beyond_radius(self):
        with pytest.raises(LoopSoupException) as info:
            complete_log_det_i_minus_theta_p(3, 1.0, theta=1.6)
        assert info.value.error_type == "DomainError"
