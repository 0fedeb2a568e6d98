"""
Tests for the exact engine.

Core claims:
    - moments and cumulants follow the closed form and the moment-cumulant recursion
    - partition probabilities: finer-than, exact (Moebius inversion), connectedness
    - factorial moments of isolated-vertex and size-d cluster counts
    - cumulants approach alpha (d-1)! n^-d
    - the Poisson-mixture pmf agrees with its alternating-series oracle
    - loop mass, d-gon measure and size generating function closed forms
"""

import math
from fractions import Fraction

import pytest
from pytest import approx

from loopsoup.src.components.exact_engine import (ExactEngine, dgon_measure, expected_support,
                                                  large_cluster_probability_bound, limit_factorial_moment_size_d,
                                                  limit_moment_H, limit_moment_R, long_loop_mass, loop_mass,
                                                  loop_mass_reference, required_precision, size_gf)
from loopsoup.src.components.graph_model import GraphSpec, build_transition, det_ratio
from loopsoup.src.components.partition_lattice import Partition, enumerate_all
from loopsoup.src.config_entity.config_params import EngineConfig, ModelParams
from loopsoup.src.utils.exception import LoopSoupException, EXIT_NUMERIC


class TestMomentsAndCumulants:
    def test_zeroth_moment(self, engine, model):
        assert float(engine.moment(0, model(10))) == 1.0

    @pytest.mark.parametrize("n,j,expected", [(10, 1, 1.1), (2, 2, 3.0)])
    def test_moment_values(self, engine, model, n, j, expected):
        assert float(engine.moment(j, model(n))) == approx(expected, rel=1e-15)

    def test_moment_order_out_of_range(self, engine, model):
        with pytest.raises(LoopSoupException) as info:
            engine.moment(4, model(3))
        assert info.value.error_type == "DomainError"

    def test_first_cumulant_is_first_moment(self, engine, model):
        table = engine.cumulants(3, model(5, 0.5, 2.0))
        assert table.cumulant(1) == table.moment(1)

    def test_k2_second_cumulant(self, engine, model):
        table = engine.cumulants(2, model(2))
        assert float(table.cumulant(2)) == approx(0.75, rel=1e-15)

    def test_second_cumulant_at_n_100(self, engine, model):
        table = engine.cumulants(2, model(100))
        exact = Fraction(101, 99) - Fraction(101, 100) ** 2
        assert float(table.cumulant(2)) == approx(float(exact), rel=1e-12)
        assert float(table.cumulant(2)) == approx(1.0203e-4, rel=1e-3)

    def test_recursion_holds(self, engine, model):
        table = engine.cumulants(6, model(6, 0.7, 1.3))
        for j in range(1, 7):
            rebuilt = sum(math.comb(j - 1, i - 1) * table.cumulant(i) * table.moment(j - i) for i in range(1, j + 1))
            assert float(rebuilt - table.moment(j)) == approx(0.0, abs=1e-40)

    def test_cumulant_index_starts_at_one(self, engine, model):
        with pytest.raises(LoopSoupException):
            engine.cumulants(2, model(4)).cumulant(0)

    def test_auto_precision_raises_bits(self, engine, model):
        params = model(10000)
        table = engine.cumulants(40, params)
        assert table.precision_bits >= required_precision(40, params)

    def test_insufficient_precision(self, strict_engine, model):
        with pytest.raises(LoopSoupException) as info:
            strict_engine.cumulants(20, model(10000))
        assert info.value.error_type == "InsufficientPrecision"
        assert info.value.exit_code == EXIT_NUMERIC
        assert int(info.value.context["required_bits"]) == required_precision(20, model(10000))

    def test_table_to_dict(self, engine, model):
        data = engine.cumulants(2, model(2)).to_dict()
        assert data["moments"][0].startswith("1.0")
        assert float(data["cumulants"][1]) == approx(0.75, rel=1e-15)


class TestPartitionProbabilities:
    def test_prob_finer_single_block(self, engine, model):
        assert float(engine.prob_finer(Partition.single_block(4), model(4, 0.5, 2.0))) == approx(1.0, rel=1e-15)

    @pytest.mark.parametrize("blocks", [[[0], [1, 2, 3, 4]], [[0, 1], [2, 3], [4]], [[0], [1], [2], [3], [4]]])
    def test_prob_finer_decreases_in_alpha(self, engine, model, blocks):
        pi = Partition.from_blocks(blocks)
        values = [float(engine.prob_finer(pi, model(5, 1.0, alpha))) for alpha in (0.25, 0.5, 1.0, 2.0, 4.0)]
        assert all(later < earlier for earlier, later in zip(values, values[1:]))
        assert float(engine.prob_finer(Partition.single_block(5), model(5, 1.0, 4.0))) == approx(1.0)

    def test_prob_finer_k3(self, engine, model):
        assert float(engine.prob_finer(Partition.from_blocks([[0], [1, 2]]), model(3))) == approx(2 / 3, rel=1e-15)

    def test_prob_finer_matches_det_ratio(self, engine, model):
        pi = Partition.from_blocks([[0, 3], [1], [2, 4, 5]])
        params = model(6, 0.5, 2.0)
        assert float(engine.prob_finer(pi, params)) == approx(det_ratio(GraphSpec.complete(6, 0.5), pi) ** 2,
                                                              rel=1e-12)

    def test_prob_exact_k2(self, engine, model):
        assert float(engine.prob_exact(Partition.singletons(2), model(2))) == approx(0.75, rel=1e-15)
        assert float(engine.prob_exact(Partition.single_block(2), model(2))) == approx(0.25, rel=1e-15)

    @pytest.mark.parametrize("n,kappa,alpha", [(3, 1.0, 1.0), (4, 0.5, 2.0), (5, 2.0, 0.5), (6, 1.0, 1.0)])
    def test_probabilities_sum_to_one(self, engine, model, n, kappa, alpha):
        assert float(engine.partition_sum(model(n, kappa, alpha))) == approx(1.0, abs=1e-9)

    def test_all_exact_probabilities_are_positive(self, engine, model):
        params = model(4, 0.5, 0.5)
        assert all(engine.prob_exact(pi, params) > 0 for pi in enumerate_all(4))

    def test_partition_must_cover_vertices(self, engine, model):
        with pytest.raises(LoopSoupException) as info:
            engine.prob_finer(Partition.singletons(3), model(4))
        assert info.value.error_type == "PartitionMismatch"

    def test_prob_connected_k2(self, engine, model):
        assert float(engine.prob_connected(model(2))) == approx(0.25, rel=1e-15)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_prob_connected_matches_moebius(self, engine, model, n):
        params = model(n, 1.5, 0.7)
        connected = engine.prob_connected(params)
        assert 0 < connected < 1
        assert float(connected) == approx(float(engine.prob_exact(Partition.single_block(n), params)), abs=1e-9)

    def test_isolated_sets(self, engine, model):
        assert float(engine.prob_isolated_sets([2], model(2))) == approx(1.0)
        assert float(engine.prob_isolated_sets([1], model(2))) == approx(0.75, rel=1e-15)
        assert float(engine.prob_isolated_sets([1, 1], model(3))) == approx(16 / 27, rel=1e-15)

    def test_isolated_sets_too_large(self, engine, model):
        with pytest.raises(LoopSoupException):
            engine.prob_isolated_sets([2, 2], model(3))

    def test_clusters_whole_set_is_connectedness(self, engine, model):
        params = model(5, 0.5, 1.5)
        assert float(engine.prob_clusters([5], params)) == approx(float(engine.prob_connected(params)), rel=1e-12)


class TestClusterCountMoments:
    def test_isolated_first_moment_k2(self, engine, model):
        assert float(engine.factorial_moment_isolated_vertices(1, model(2))) == approx(1.5, rel=1e-15)

    def test_isolated_empty_and_vanishing_products(self, engine, model):
        assert float(engine.factorial_moment_isolated_vertices(0, model(2))) == 1.0
        assert float(engine.factorial_moment_isolated_vertices(3, model(2))) == 0.0

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_size_one_reduces_to_isolated(self, engine, model, k):
        params = model(10, 1.0, 2.0)
        assert float(engine.factorial_moment_size_d(1, k, params)) == approx(
            float(engine.factorial_moment_isolated_vertices(k, params)), rel=1e-12)

    def test_size_n_is_connectedness(self, engine, model):
        params = model(5, 0.5, 1.0)
        assert float(engine.factorial_moment_size_d(5, 1, params)) == approx(float(engine.prob_connected(params)),
                                                                             rel=1e-12)

    def test_n6_pairs(self, engine, model):
        # c_2 = 7/5 - (7/6)^2 = 7/180 at n + kappa = 7
        assert float(engine.factorial_moment_size_d(2, 1, model(6))) == approx(15 * 7 / 180 / 3, rel=1e-12)

    def test_isolated_fraction_first_moment(self, engine, model):
        params = model(10)
        assert float(engine.moment_isolated_fraction(1, params)) == approx(
            float(engine.factorial_moment_isolated_vertices(1, params)) / 10, rel=1e-12)

    def test_isolated_fraction_tends_to_limit(self, engine, model):
        assert float(engine.moment_isolated_fraction(2, model(100000))) == approx(limit_moment_R(2, 1.0, 1.0),
                                                                                  rel=1e-3)

    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("kappa,alpha", [(1.0, 1.0), (2.0, 0.5), (0.5, 2.0)])
    def test_isolated_factorial_moment_tends_to_limit(self, engine, model, k, kappa, alpha):
        n = 10**6
        scaled = float(engine.factorial_moment_isolated_vertices(k, model(n, kappa, alpha))) / n**k
        assert scaled == approx(limit_moment_R(k, kappa, alpha), rel=1e-3)

    @pytest.mark.parametrize("d,k", [(2, 1), (2, 2), (3, 1), (3, 2)])
    @pytest.mark.parametrize("kappa,alpha", [(1.0, 1.0), (1.0, 2.0)])
    def test_size_d_factorial_moment_tends_to_limit(self, engine, model, d, k, kappa, alpha):
        value = float(engine.factorial_moment_size_d(d, k, model(10**5, kappa, alpha)))
        assert value == approx(limit_factorial_moment_size_d(d, k, kappa, alpha), rel=1e-2)


class TestAsymptotics:
    def test_ratio_at_n_100(self, engine, model):
        assert float(engine.cumulant_asymptotic_ratio(2, model(100))) == approx(1.0202, abs=1e-3)

    @pytest.mark.parametrize("d,alpha", [(2, 1.0), (2, 2.0), (3, 1.0), (3, 2.0)])
    def test_ratio_at_n_10000(self, engine, model, d, alpha):
        assert abs(float(engine.cumulant_asymptotic_ratio(d, model(10000, 1.0, alpha))) - 1) < 5e-3

    def test_ratio_d3_n1000(self, engine, model):
        assert abs(float(engine.cumulant_asymptotic_ratio(3, model(1000, 1.0, 2.0))) - 1) < 2e-2

    def test_limit_moments(self):
        assert limit_moment_R(0, 1.0, 1.0) == 1.0
        assert limit_moment_R(1, 1.0, 1.0) == approx(0.5)
        assert limit_moment_H(1, 2, 1.0, 1.0) == approx(1 / 3)
        assert limit_factorial_moment_size_d(2, 1, 1.0, 1.0) == approx(1 / 6)

    def test_large_cluster_bound(self):
        assert large_cluster_probability_bound(10000, 1.0, 0.5) == approx(0.9 * 0.98)
        assert large_cluster_probability_bound(4, 1.0, 0.5) == 0.0


class TestPoissonMixture:
    def test_no_cluster_of_size_d(self, engine):
        assert float(engine.poisson_mixture_pmf(0, 2, 2.0, 1.0)) == approx(1 - math.exp(-1), abs=1e-10)

    def test_normalization(self, engine):
        total = sum(float(engine.poisson_mixture_pmf(k, 2, 1.0, 1.0)) for k in range(20))
        assert total == approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("k,d,kappa,alpha", [(0, 2, 1.0, 1.0), (1, 2, 1.5, 1.3), (2, 3, 2.0, 2.0)])
    def test_series_oracle(self, engine, k, d, kappa, alpha):
        quadrature = float(engine.poisson_mixture_pmf(k, d, kappa, alpha))
        series = float(engine.poisson_mixture_pmf_series(k, d, kappa, alpha))
        assert quadrature == approx(series, abs=1e-8)

    def test_negative_order(self, engine):
        with pytest.raises(LoopSoupException):
            engine.poisson_mixture_pmf(-1, 2, 1.0, 1.0)


class TestLoopMeasure:
    def test_dgon_measure(self):
        assert dgon_measure(2, 2, 1.0) == approx(0.25)
        assert dgon_measure(3, 3, 1.0) == approx(1 / 27)

    def test_two_gon_is_product_of_transitions(self):
        p = build_transition(GraphSpec.complete(3, 1.0)).entries
        assert dgon_measure(2, 3, 1.0) == approx(p[0, 1] * p[1, 0])

    def test_dgon_out_of_range(self):
        with pytest.raises(LoopSoupException):
            dgon_measure(4, 3, 1.0)

    def test_loop_mass_k2(self):
        mass = loop_mass(2, 1.0)
        assert mass.exact == approx(math.log(4 / 3), rel=1e-14)
        assert mass.closed_form == approx(2 * (math.log(2) - 0.5), rel=1e-14)

    def test_loop_mass_large_n(self):
        mass = loop_mass(10000, 1.0)
        reference = loop_mass_reference(10000, 1.0)
        assert mass.exact == approx(reference, rel=0.05)
        assert mass.closed_form == approx(mass.exact, rel=0.05)

    def test_long_loop_mass(self):
        assert long_loop_mass(50, 1.0, 1) == approx(loop_mass(50, 1.0).exact)
        assert 0 < long_loop_mass(50, 1.0, 20) < long_loop_mass(50, 1.0, 5)

    def test_size_gf(self, model):
        params = model(5)
        assert size_gf(1.0, params) == approx(1.0)
        assert size_gf(0.0, params) == approx(math.exp(-loop_mass(5, 1.0).exact), rel=1e-12)
        assert size_gf(0.5, params) < size_gf(0.9, params)

    def test_size_gf_outside_range(self, model):
        with pytest.raises(LoopSoupException):
            size_gf(2.0, model(5))

    def test_expected_support(self):
        assert expected_support(10, 2) == approx(1.9)


class TestEvaluateBatch:
    def test_dispatch(self, engine):
        results = engine.evaluate_batch([
            {"op": "moment", "args": {"j": 1, "n": 10, "kappa": 1}},
            {"op": "prob_exact", "args": {"n": 2, "kappa": 1, "partition": [[0], [1]]}},
            {"op": "loop_mass", "args": {"n": 2, "kappa": 1.0}},
        ])
        assert [r["op"] for r in results] == ["moment", "prob_exact", "loop_mass"]
        assert float(results[0]["value"]) == approx(1.1, rel=1e-15)
        assert float(results[1]["value"]) == approx(0.75, rel=1e-15)
        assert float(results[2]["value"]["exact"]) == approx(math.log(4 / 3))

    def test_unknown_op(self, engine):
        with pytest.raises(LoopSoupException) as info:
            engine.evaluate_batch([{"op": "nope", "args": {}}])
        assert info.value.error_type == "InvalidConfig"

    def test_requires_engine_config(self):
        with pytest.raises(TypeError):
            ExactEngine({"precision_bits": 64})

    def test_explicit_precision_is_used(self):
        engine = ExactEngine(EngineConfig(precision_bits=512))
        table = engine.cumulants(3, ModelParams(n=4, kappa=1.0))
        assert table.precision_bits == 512
