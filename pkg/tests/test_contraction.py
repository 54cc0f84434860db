"""Testes de contraction: g sobre a grade, varreduras em β e L, variância."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.contraction import (
    basin_contraction, beta_sweep, contraction_area_agreement, contraction_constant,
    depth_curve, estimate_beta_cr, fit_depth_law, local_contraction_map,
    neighbor_pairs, preactivation_variance,
)
from src.errors import NumericalError, ParameterError, ShapeError
from src.fixpoint import find_fixed_points
from src.models import (
    ActivationKind, DistributionSpec, Family, GridSpec, IterationPolicy, ScaleRule, Seed,
)
from src.netcore import diagonal_network, make_network
from src.randinit import init_network, seed_list
from tests.conftest import power_iteration_norm

pytestmark = pytest.mark.unit

COARSE = GridSpec(delta=0.25)


class TestContractionConstant:
    def test_rede_nula(self, zero_net):
        assert contraction_constant(zero_net, GridSpec()) == 0.0

    def test_contracao_linear(self):
        net = diagonal_network(0.5, 0.0, ActivationKind.HARDTANH)
        assert abs(contraction_constant(net, GridSpec()) - 0.5) < 1e-12

    def test_nao_autoencoder(self):
        net = make_network([np.eye(3, 2)], [np.zeros(3)], "tanh")
        with pytest.raises(ShapeError):
            contraction_constant(net, COARSE)

    def test_overflow(self):
        net = diagonal_network(1e300, 0.0, ActivationKind.IDENTITY, depth=2)
        with pytest.raises(NumericalError):
            contraction_constant(net, COARSE)

    def test_amostra_de_pares_nao_excede_o_total(self, make_net):
        net = make_net((2, 30, 2), ActivationKind.TANH, seed=3, family=Family.CAUCHY)
        full = contraction_constant(net, GridSpec(delta=0.1))
        sub = contraction_constant(net, GridSpec(delta=0.1), pair_budget=500, seed=Seed(1))
        assert sub <= full * (1 + 1e-12)
        assert sub > 0

    def test_pares_vizinhos(self):
        pairs = neighbor_pairs(GridSpec(delta=1.0))
        # 3×3: 6 horizontais, 6 verticais, 4 + 4 diagonais
        assert len(pairs) == 20
        assert len({tuple(sorted(p)) for p in pairs}) == 20

    def test_refinamento_monotono(self, make_net):
        for seed in range(3):
            net = make_net((2, 50, 2), ActivationKind.TANH, seed=seed, family=Family.CAUCHY)
            coarse = contraction_constant(net, GridSpec(delta=0.2))
            fine = contraction_constant(net, GridSpec(delta=0.1))
            assert fine >= coarse - 1e-12

    def test_camada_n_por_n_embutida(self):
        dist = DistributionSpec(Family.GAUSS, ScaleRule.POWER_LAW, beta=0.5)
        net = init_network([40, 40], "tanh", dist, Seed(2))
        g = contraction_constant(net, COARSE)
        assert 0 < g <= power_iteration_norm(np.asarray(net.layers[0].weights)) * (1 + 1e-6)

    @settings(max_examples=100, deadline=None)
    @given(
        seed=st.integers(0, 2**32 - 1),
        kind=st.sampled_from([ActivationKind.TANH, ActivationKind.HARDTANH, ActivationKind.SIGMOID]),
        width=st.sampled_from([2, 6]),
    )
    def test_limitado_pela_norma_espectral(self, seed, kind, width):
        dist = DistributionSpec(Family.GAUSS, ScaleRule.FIXED, value=1.0)
        net = init_network([width, width], kind, dist, Seed(seed))
        bound = power_iteration_norm(np.asarray(net.layers[0].weights))
        assert contraction_constant(net, GridSpec(delta=0.5)) <= bound * (1 + 1e-6) + 1e-12


class TestLocalContraction:
    def test_mapa_local_linear(self):
        net = diagonal_network(0.5, 0.1, ActivationKind.HARDTANH)
        local = local_contraction_map(net, COARSE)
        assert local.shape == (COARSE.size,)
        np.testing.assert_allclose(local, 0.5, atol=1e-12)

    def test_contracao_por_bacia(self):
        net = diagonal_network(0.5, 0.1, ActivationKind.HARDTANH)
        report = find_fixed_points(net, COARSE, IterationPolicy())
        per_basin = basin_contraction(net, COARSE, report)
        assert list(per_basin) == [0]
        assert per_basin[0] == pytest.approx(0.5, abs=1e-12)
        assert contraction_area_agreement(local_contraction_map(net, COARSE), report) == 1.0

    def test_bacias_do_mapa_com_quatro_cantos(self):
        net = diagonal_network(2.0, 0.07, ActivationKind.HARDTANH)
        report = find_fixed_points(net, GridSpec(delta=0.1), IterationPolicy())
        per_basin = basin_contraction(net, GridSpec(delta=0.1), report)
        assert set(per_basin) == set(range(report.q))
        assert all(g >= 0 for g in per_basin.values())


class TestBetaSweep:
    def test_interpolacao_linear(self):
        beta_cr, diag = estimate_beta_cr([0.1, 0.2, 0.3], [1.5, 1.1, 0.9])
        assert beta_cr == pytest.approx(0.25)
        assert diag == ""

    def test_valor_exato_em_um(self):
        assert estimate_beta_cr([0.1, 0.2, 0.3], [1.2, 1.0, 0.8])[0] == pytest.approx(0.2)

    def test_sem_cruzamento(self):
        beta_cr, diag = estimate_beta_cr([0.1, 0.2], [1.5, 1.2])
        assert beta_cr is None
        assert "acima de 1" in diag and "[0.1, 0.2]" in diag

    def test_betas_invalidos(self):
        seeds = [Seed(0)]
        with pytest.raises(ParameterError, match="ao menos 2"):
            beta_sweep([4, 4], "tanh", [0.5], seeds, COARSE)
        with pytest.raises(ParameterError, match="crescente"):
            beta_sweep([4, 4], "tanh", [0.5, 0.3], seeds, COARSE)

    def test_curva_cruza_um(self):
        seeds = seed_list(0, "teste", 3)
        curve = beta_sweep([20, 20], ActivationKind.TANH, [0.0, 1.0, 2.0], seeds, COARSE)
        assert len(curve.samples) == 9
        assert curve.mean_g[0] > 1 > curve.mean_g[-1]
        assert 0.0 < curve.beta_cr < 2.0
        assert curve.to_dict()["beta_cr"] == curve.beta_cr

    def test_independe_do_numero_de_workers(self):
        seeds = seed_list(1, "teste", 2)
        a = beta_sweep([10, 10], "sigmoid", [0.2, 0.8], seeds, COARSE, jobs=1)
        b = beta_sweep([10, 10], "sigmoid", [0.2, 0.8], seeds, COARSE, jobs=2)
        assert [s.g for s in a.samples] == [s.g for s in b.samples]
        assert a.beta_cr == b.beta_cr


class TestDepthCurve:
    def test_composicao_de_contracoes(self):
        depths = [1, 2, 3, 4, 5]
        gs = []
        for L in depths:
            g = contraction_constant(diagonal_network(0.5, 0.0, ActivationKind.HARDTANH, depth=L), GridSpec())
            assert abs(g - 0.5 ** L) < 1e-12
            gs.append(g)
        fit = fit_depth_law(depths, gs)
        assert fit.slope == pytest.approx(math.log(0.5), abs=1e-10)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-10)
        assert fit.g0 == pytest.approx(0.5, abs=1e-10)

    def test_uma_profundidade_passa_pelo_ponto(self):
        fit = fit_depth_law([1], [0.8])
        assert fit.g0 == pytest.approx(0.8)
        assert fit.r_squared == 1.0

    def test_g_nulo_sem_ajuste(self):
        assert fit_depth_law([1, 2], [0.0, 0.5]) is None

    def test_curva_pequena(self):
        seeds = seed_list(2, "teste", 3)
        curve = depth_curve(10, ActivationKind.TANH, 0.7, [1, 2, 3], seeds, GridSpec(delta=0.5))
        assert curve.depths == [1, 2, 3]
        assert len(curve.samples) == 9
        assert [s.depth_L for s in curve.samples] == [1, 1, 1, 2, 2, 2, 3, 3, 3]
        assert curve.fit is not None
        assert "fit" in curve.to_dict()

    def test_profundidade_invalida(self):
        with pytest.raises(ParameterError):
            depth_curve(10, "tanh", 0.7, [0, 1], [Seed(0)], COARSE)


class TestPreactivationVariance:
    def test_sigma_zero(self):
        stats = preactivation_variance(20, 0.0, seed_list(0, "v", 5))
        assert stats.preactivation_variance == 0.0

    def test_x_com_comprimento_errado(self):
        with pytest.raises(ShapeError):
            preactivation_variance(20, 0.1, [Seed(0)], x=np.ones(3))

    def test_sigma_negativo(self):
        with pytest.raises(ParameterError):
            preactivation_variance(20, -0.1, [Seed(0)])

    def test_previsao_do_tcl(self):
        stats = preactivation_variance(100, 0.1, seed_list(0, "v", 2000))
        assert stats.expected_variance == pytest.approx(1.01)
        assert stats.preactivation_variance == pytest.approx(1.01, rel=0.05)
        assert stats.n_samples == 200_000

    def test_dobrar_sigma_quadruplica(self):
        seeds = seed_list(3, "v", 400)
        a = preactivation_variance(50, 0.1, seeds).preactivation_variance
        b = preactivation_variance(50, 0.2, seed_list(4, "v", 400)).preactivation_variance
        assert b / a == pytest.approx(4.0, rel=0.06)

    def test_blocos_independem_de_workers(self):
        seeds = seed_list(5, "v", 300)
        a = preactivation_variance(30, 0.1, seeds, jobs=1)
        b = preactivation_variance(30, 0.1, seeds, jobs=2)
        assert a.preactivation_variance == b.preactivation_variance
