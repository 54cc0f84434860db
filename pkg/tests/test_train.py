"""Testes de train: discos, perda, gradiente, SGD e verificação."""

from __future__ import annotations

import json

import numpy as np
import pytest

from src.errors import DivergenceError, PackingError, ParameterError
from src.models import (
    ActivationKind, ClassVerification, DiscClass, GridSpec, IterationPolicy,
    ScaleRule, Seed, TrainConfig, TrainingSet,
)
from src.netcore import diagonal_network, layer_forward, make_network, preactivation
from src.randinit import init_network
from src.train import (
    PENTAGON_RADIUS, gradient, loss, loss_rows, make_discs, train,
    trace_from_dict, trace_to_dict, training_set_from_dict,
    training_set_to_dict, verify_trained,
)
from tests.conftest import naive_loss

pytestmark = pytest.mark.unit

GRID = GridSpec()


def _single_class(center, points) -> TrainingSet:
    return TrainingSet(classes=[DiscClass(center=np.asarray(center, dtype=float), radius=0.1,
                                          points=np.asarray(points, dtype=float))])


# ── Discos ──────────────────────────────────────────────────────────────

class TestMakeDiscs:
    def test_um_disco(self):
        ts = make_discs(1, 0.2, GRID, 16, Seed(0))
        assert ts.k == 1
        c = ts.classes[0]
        assert c.points.shape == (16, 2)
        np.testing.assert_array_equal(c.points[0], c.center)
        assert np.all(np.abs(c.center) <= 0.8)
        assert np.all(np.linalg.norm(c.points - c.center, axis=1) <= 0.2)

    def test_cinco_discos_disjuntos(self):
        ts = make_discs(5, 0.15, GRID, 10, Seed(3))
        centers = np.array([c.center for c in ts.classes])
        for i in range(5):
            for j in range(i + 1, 5):
                assert np.linalg.norm(centers[i] - centers[j]) >= 0.5
        assert np.all(np.abs(centers) <= 1 - 0.15)

    def test_deterministico(self):
        a = make_discs(3, 0.1, GRID, 8, Seed(9))
        b = make_discs(3, 0.1, GRID, 8, Seed(9))
        for ca, cb in zip(a.classes, b.classes):
            np.testing.assert_array_equal(ca.points, cb.points)

    def test_pentagono(self):
        ts = make_discs(5, 0.2, GRID, 4, Seed(0), layout="pentagon")
        radii = [np.linalg.norm(c.center) for c in ts.classes]
        assert radii == pytest.approx([PENTAGON_RADIUS] * 5)
        assert ts.classes[0].center == pytest.approx([0.0, PENTAGON_RADIUS])

    def test_pentagono_com_um_disco_fica_na_origem(self):
        ts = make_discs(1, 0.2, GRID, 4, Seed(0), layout="pentagon")
        np.testing.assert_array_equal(ts.classes[0].center, [0.0, 0.0])

    def test_discos_nao_cabem(self):
        with pytest.raises(PackingError):
            make_discs(20, 0.4, GRID, 4, Seed(0), max_attempts=500)
        with pytest.raises(PackingError):
            make_discs(5, 0.45, GRID, 4, Seed(0), layout="pentagon")
        with pytest.raises(PackingError):
            make_discs(1, 1.5, GRID, 4, Seed(0))

    def test_parametros_invalidos(self):
        with pytest.raises(ParameterError):
            make_discs(0, 0.1, GRID, 4, Seed(0))
        with pytest.raises(ParameterError):
            make_discs(1, 0.0, GRID, 4, Seed(0))
        with pytest.raises(ParameterError, match="layout"):
            make_discs(1, 0.1, GRID, 4, Seed(0), layout="hexagon")


# ── Perda e gradiente ───────────────────────────────────────────────────

class TestLoss:
    def test_identidade_sobre_o_centro(self):
        net = diagonal_network(1.0, 0.0, ActivationKind.IDENTITY)
        ts = _single_class([0.3, -0.4], [[0.3, -0.4]])
        assert loss(net, ts) == 0.0

    def test_mapa_nulo_soma_das_distancias(self, zero_net):
        ts = _single_class([0.3, -0.4], [[0.3, -0.4], [0.1, 0.1], [-0.5, 0.2]])
        assert loss(zero_net, ts) == pytest.approx(3 * 0.25)

    def test_oraculo_ingenuo(self, make_net):
        net = make_net((2, 12, 2), ActivationKind.SIGMOID, seed=4)
        ts = make_discs(3, 0.1, GRID, 6, Seed(2))
        assert loss(net, ts) == pytest.approx(naive_loss(net, ts), rel=1e-12)


def _perturbed(net, layer: int, which: str, index: tuple, h: float):
    weights = [np.array(l.weights) for l in net.layers]
    biases = [np.array(l.bias) for l in net.layers]
    target = weights if which == "weights" else biases
    target[layer][index] += h
    return make_network(weights, biases, [l.activation for l in net.layers])


_FD_KINDS = (ActivationKind.TANH, ActivationKind.SIGMOID, ActivationKind.HARDTANH)


def _kink_pattern(net, xs) -> list[bytes]:
    """Máscara |z| ≤ 1 das camadas HardTanh; muda quando um parâmetro cruza uma quina."""
    masks = []
    a = xs
    for layer in net.layers:
        z = preactivation(layer, a)
        if layer.activation is ActivationKind.HARDTANH:
            masks.append(np.packbits(np.abs(z) <= 1).tobytes())
        a = layer_forward(layer, a)
    return masks


class TestGradient:
    def test_nulo_com_residuo_nulo(self):
        net = diagonal_network(1.0, 0.0, ActivationKind.IDENTITY, depth=2)
        ts = _single_class([0.2, 0.1], [[0.2, 0.1]])
        for g in gradient(net, ts):
            assert not g.weights.any()
            assert not g.bias.any()

    def test_formas(self, make_net):
        net = make_net((2, 7, 5, 2))
        grads = gradient(net, make_discs(2, 0.1, GRID, 4, Seed(0)))
        assert [g.weights.shape for g in grads] == [(7, 2), (5, 7), (2, 5)]
        assert [g.bias.shape for g in grads] == [(7,), (5,), (2,)]

    def test_bias_de_saida_no_mapa_nulo(self, zero_net):
        ts = _single_class([0.3, -0.4], [[0.3, -0.4], [0.1, 0.1]])
        # tanh'(0) = 1, então ∂L/∂b^L = 2 Σ (0 − x*)
        np.testing.assert_allclose(gradient(zero_net, ts)[-1].bias, [-1.2, 1.6])

    @pytest.mark.parametrize("seed", range(20))
    def test_diferencas_centrais(self, make_net, seed):
        kind = _FD_KINDS[seed % 3]
        widths = (2, 6, 2) if seed % 2 == 0 else (2, 5, 4, 2)
        if kind is ActivationKind.HARDTANH:
            # escala 0.8 satura parte das unidades; quinas |z| = 1 ficam de fora
            net = make_net(widths, kind, seed=seed, scale_rule=ScaleRule.FIXED, value=0.8)
        else:
            net = make_net(widths, kind, seed=seed)
        ts = make_discs(2, 0.1, GRID, 5, Seed(seed))
        xs, _, _ = ts.stacked()
        base = _kink_pattern(net, xs)
        grads = gradient(net, ts)
        h = 1e-6
        checked = 0
        for l in range(len(net.layers)):
            for which in ("weights", "bias"):
                analytic = getattr(grads[l], which)
                for index in np.ndindex(analytic.shape):
                    up = _perturbed(net, l, which, index, h)
                    down = _perturbed(net, l, which, index, -h)
                    if _kink_pattern(up, xs) != base or _kink_pattern(down, xs) != base:
                        continue
                    numeric = (loss(up, ts) - loss(down, ts)) / (2 * h)
                    assert analytic[index] == pytest.approx(numeric, rel=1e-4, abs=1e-7)
                    checked += 1
        assert checked > 0


# ── SGD ─────────────────────────────────────────────────────────────────

class TestTrain:
    def test_taxa_zero_nao_mexe(self):
        cfg = TrainConfig(widths=(2, 8, 2), learning_rate=0.0, max_epochs=5)
        trace = train(cfg, make_discs(2, 0.1, GRID, 4, Seed(0)))
        assert len(trace.loss_history) == 6
        assert len(set(trace.loss_history)) == 1
        assert trace.stopped_reason == "max_epochs"
        assert trace.epochs_run == 5

    def test_um_ponto_no_centro_converge(self):
        cfg = TrainConfig(widths=(2, 8, 2), max_epochs=5000, target_loss=1e-6, seed=Seed(2))
        ts = _single_class([0.3, -0.2], [[0.3, -0.2]])
        trace = train(cfg, ts)
        assert trace.stopped_reason == "target_loss"
        assert trace.loss_history[-1] <= 1e-6
        assert loss(trace.network, ts) == pytest.approx(trace.loss_history[-1])

    def test_perda_cai(self):
        cfg = TrainConfig(widths=(2, 16, 2), max_epochs=300, seed=Seed(5))
        trace = train(cfg, make_discs(2, 0.1, GRID, 8, Seed(5)))
        assert trace.loss_history[-1] < trace.loss_history[0]

    def test_deterministico(self):
        cfg = TrainConfig(widths=(2, 6, 2), max_epochs=20, batch_size=3)
        ts = make_discs(2, 0.1, GRID, 5, Seed(1))
        assert train(cfg, ts).loss_history == train(cfg, ts).loss_history

    def test_divergencia(self):
        cfg = TrainConfig(widths=(2, 2), activation=ActivationKind.IDENTITY,
                          learning_rate=1e3, max_epochs=50)
        with pytest.raises(DivergenceError, match="perda anterior") as exc:
            train(cfg, make_discs(2, 0.2, GRID, 8, Seed(0)))
        trace = exc.value.trace
        assert trace.stopped_reason == "divergence"
        assert trace.epochs_run >= 1
        assert all(np.isfinite(trace.loss_history))
        assert exc.value.exit_code == 4
        # a rede anexada é a da época que divergiu, não a inicial
        init = init_network([2, 2], ActivationKind.IDENTITY, cfg.init, cfg.seed,
                            output_activation=cfg.output_activation)
        assert not np.array_equal(trace.network.layers[0].weights, init.layers[0].weights)

    def test_reajuste_da_saida_nao_aumenta_a_perda(self):
        ts = make_discs(3, 0.15, GRID, 10, Seed(4))
        base = dict(widths=(2, 12, 12, 2), max_epochs=20, seed=Seed(4))
        plain = train(TrainConfig(refit_every=0, **base), ts)
        # refit_every > max_epochs: só a última época é reajustada
        refit = train(TrainConfig(refit_every=1000, **base), ts)
        assert refit.loss_history[:-1] == plain.loss_history[:-1]
        assert refit.loss_history[-1] <= plain.loss_history[-1]
        assert loss(refit.network, ts) == pytest.approx(refit.loss_history[-1])

    def test_reajuste_com_um_disco_acha_a_constante(self):
        ts = make_discs(1, 0.15, GRID, 12, Seed(1))
        cfg = TrainConfig(widths=(2, 8, 2), max_epochs=3, refit_every=1)
        trace = train(cfg, ts)
        assert trace.stopped_reason == "target_loss"
        assert trace.epochs_run == 1
        assert trace.loss_history[-1] <= 1e-20

    def test_saida_nao_afim_nao_e_reajustada(self):
        ts = make_discs(2, 0.1, GRID, 5, Seed(2))
        base = dict(widths=(2, 6, 2), output_activation=ActivationKind.HARDTANH, max_epochs=4)
        plain = train(TrainConfig(refit_every=0, **base), ts)
        assert train(TrainConfig(refit_every=1, **base), ts).loss_history == plain.loss_history

    def test_config_invalida(self):
        with pytest.raises(ParameterError):
            TrainConfig(learning_rate=-0.1)
        with pytest.raises(ParameterError):
            TrainConfig(widths=(2, 10, 3))
        with pytest.raises(ParameterError):
            TrainConfig(refit_every=-1)


# ── Verificação ─────────────────────────────────────────────────────────

class TestVerify:
    POLICY = IterationPolicy()

    def test_contracao_com_um_disco_passa(self):
        net = diagonal_network(0.5, 0.0, ActivationKind.HARDTANH)
        ts = _single_class([0.0, 0.0], [[0.0, 0.0], [0.1, 0.05], [-0.08, 0.02]])
        v = verify_trained(net, ts, GridSpec(delta=0.25), self.POLICY)
        assert v.report.q == 1
        assert v.passed
        assert v.classes[0].own_basin_fraction == 1.0

    def test_dois_discos_um_atrator_falha(self):
        net = diagonal_network(0.5, 0.0, ActivationKind.HARDTANH)
        ts = make_discs(2, 0.1, GRID, 4, Seed(0), layout="pentagon")
        v = verify_trained(net, ts, GridSpec(delta=0.25), self.POLICY)
        assert not v.q_matches_k
        assert not v.centers_matched
        assert not v.passed
        d = v.to_dict()
        assert d["k"] == 2 and d["q"] == 1

    def test_distancia_infinita_vira_null(self):
        cv = ClassVerification(center=np.zeros(2), fixed_point_index=-1,
                               center_distance=float("inf"), own_basin_fraction=0.0)
        assert json.loads(json.dumps(cv.to_dict()))["center_distance"] is None


# ── Serialização ────────────────────────────────────────────────────────

class TestSerialization:
    def test_conjunto_de_treino(self):
        ts = make_discs(3, 0.1, GRID, 5, Seed(4))
        back = training_set_from_dict(json.loads(json.dumps(training_set_to_dict(ts))))
        for a, b in zip(ts.classes, back.classes):
            np.testing.assert_array_equal(a.points, b.points)
            np.testing.assert_array_equal(a.center, b.center)

    def test_traco(self):
        cfg = TrainConfig(widths=(2, 4, 2), max_epochs=3)
        trace = train(cfg, make_discs(1, 0.1, GRID, 4, Seed(0)))
        back = trace_from_dict(json.loads(json.dumps(trace_to_dict(trace))))
        assert back.loss_history == trace.loss_history
        assert back.stopped_reason == trace.stopped_reason
        assert back.network.layers[0].weights.tobytes() == trace.network.layers[0].weights.tobytes()
        rows = loss_rows(trace)
        assert rows[0][0] == 0 and len(rows) == 4
