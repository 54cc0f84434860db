"""Treino codifica/decodifica em K discos de Ω e verificação dos pontos fixos.

Perda: L(α) = Σ_k Σ_{x ∈ T_k} ‖Φ(x, α) − x*_k‖². O gradiente é calculado em
modo reverso, camada a camada. Cada passo de SGD usa a média do gradiente
do lote.
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from .errors import DivergenceError, PackingError, ParameterError
from .fixpoint import DEFAULT_CLUSTER_RADIUS, find_fixed_points, iterate_many
from .models import (
    ActivationKind, ClassVerification, DiscClass, GridSpec, IterationPolicy, LayerGradient,
    Network, Seed, TrainConfig, TrainingSet, TrainTrace, VerificationReport,
)
from .netcore import activation_derivative, apply_activation, forward, make_network, network_from_dict, network_to_dict
from .randinit import DISC_STREAM, SHUFFLE_STREAM, init_network, sample_uniform

PENTAGON_RADIUS = 0.6


# ── Conjunto de treino ──────────────────────────────────────────────────

def _random_centers(k, radius, lo, hi, min_sep, seed, max_attempts) -> np.ndarray:
    u = sample_uniform(seed, 2 * max_attempts, path=(DISC_STREAM, 0)).reshape(max_attempts, 2)
    candidates = lo + (hi - lo) * u
    centers: list[np.ndarray] = []
    for c in candidates:
        if all(np.linalg.norm(c - other) >= min_sep for other in centers):
            centers.append(c)
            if len(centers) == k:
                return np.array(centers)
    raise PackingError(
        f"não coube {k} discos de raio {radius} com separação ≥ {min_sep} "
        f"em {max_attempts} tentativas"
    )


def _pentagon_centers(k: int) -> np.ndarray:
    if k == 1:
        return np.zeros((1, 2))
    angle = np.pi / 2 + 2 * np.pi * np.arange(k) / k
    return PENTAGON_RADIUS * np.column_stack([np.cos(angle), np.sin(angle)])


def make_discs(
    k: int,
    radius: float,
    grid: GridSpec,
    points_per_class: int,
    seed: Seed,
    *,
    layout: str = "random",
    min_separation: float = 0.5,
    max_attempts: int = 10_000,
) -> TrainingSet:
    """K discos disjuntos dentro de Ω; o centro é sempre o primeiro ponto da classe."""
    if k < 1:
        raise ParameterError(f"K deve ser ≥ 1 (obtido {k})")
    if not radius > 0:
        raise ParameterError(f"raio deve ser > 0 (obtido {radius})")
    if points_per_class < 1:
        raise ParameterError(f"points_per_class deve ser ≥ 1 (obtido {points_per_class})")
    lo = np.asarray(grid.lower) + radius
    hi = np.asarray(grid.upper) - radius
    if np.any(hi < lo):
        raise PackingError(f"disco de raio {radius} não cabe em Ω")
    min_sep = max(float(min_separation), 2 * radius * (1 + 1e-9))

    if layout == "random":
        centers = _random_centers(k, radius, lo, hi, min_sep, seed, int(max_attempts))
    elif layout == "pentagon":
        centers = _pentagon_centers(k)
        if np.any(centers < lo) or np.any(centers > hi):
            raise PackingError(f"layout pentagon não cabe em Ω com raio {radius}")
        gaps = [np.linalg.norm(a - b) for i, a in enumerate(centers) for b in centers[i + 1:]]
        if gaps and min(gaps) <= 2 * radius:
            raise PackingError(f"layout pentagon com K={k} sobrepõe discos de raio {radius}")
    else:
        raise ParameterError(f"layout desconhecido: {layout!r} (use 'random' ou 'pentagon')")

    classes = []
    m = points_per_class - 1
    for i, center in enumerate(centers):
        u = sample_uniform(seed, 2 * m, path=(DISC_STREAM, i + 1))
        r = radius * np.sqrt(u[:m])
        theta = 2 * np.pi * u[m:]
        ring = center + np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        classes.append(DiscClass(center=np.array(center), radius=float(radius),
                                 points=np.vstack([center[None, :], ring])))
    return TrainingSet(classes=classes)


# ── Perda e gradiente ───────────────────────────────────────────────────

def loss(net: Network, ts: TrainingSet) -> float:
    """Soma dos quadrados dos resíduos Φ(x) − x*_k sobre todas as classes."""
    net.require_autoencoder(2)
    xs, targets, _ = ts.stacked()
    r = forward(net, xs) - targets
    return float(np.sum(r * r))


def _backprop(weights, biases, activations, xs, targets) -> tuple[float, list[LayerGradient]]:
    acts = [xs]
    pres = []
    a = xs
    for w, b, kind in zip(weights, biases, activations):
        z = a @ w.T + b
        pres.append(z)
        a = apply_activation(kind, z)
        acts.append(a)
    residual = a - targets
    delta = 2.0 * residual
    grads: list[LayerGradient] = []
    for l in range(len(weights) - 1, -1, -1):
        dz = delta * activation_derivative(activations[l], pres[l])
        grads.append(LayerGradient(weights=dz.T @ acts[l], bias=dz.sum(axis=0)))
        delta = dz @ weights[l]
    grads.reverse()
    return float(np.sum(residual * residual)), grads


def gradient(net: Network, ts: TrainingSet) -> list[LayerGradient]:
    """Gradiente exato da perda em relação a todos os W^l e b^l."""
    net.require_autoencoder(2)
    xs, targets, _ = ts.stacked()
    _, grads = _backprop(
        [layer.weights for layer in net.layers],
        [layer.bias for layer in net.layers],
        [layer.activation for layer in net.layers],
        xs, targets,
    )
    return grads


# ── SGD ─────────────────────────────────────────────────────────────────

def _refit_output(weights, biases, activations, xs, targets) -> bool:
    """Camada de saída afim por mínimos quadrados sobre as features da penúltima camada.

    Só vale com saída Identity; com as camadas ocultas fixas é o mínimo exato
    da perda em W^L e b^L. Altera weights/biases no lugar e devolve True se
    houve reajuste.
    """
    if activations[-1] is not ActivationKind.IDENTITY:
        return False
    h = xs
    for w, b, kind in zip(weights[:-1], biases[:-1], activations[:-1]):
        h = apply_activation(kind, h @ w.T + b)
    features = np.column_stack([h, np.ones(len(h))])
    if not np.all(np.isfinite(features)):
        return False
    try:
        coef, *_ = np.linalg.lstsq(features, targets, rcond=None)
    except np.linalg.LinAlgError:
        return False
    weights[-1][...] = coef[:-1].T
    biases[-1][...] = coef[-1]
    return True


def train(cfg: TrainConfig, ts: TrainingSet) -> TrainTrace:
    """SGD em mini-lotes até target_loss ou max_epochs.

    O embaralhamento da época e é tirado do fluxo (SHUFFLE_STREAM, e) da
    semente, então o traço é determinístico. Com refit_every > 0 a camada de
    saída é reajustada por mínimos quadrados ao fim das épocas múltiplas de
    refit_every e da última; o reajuste só é mantido se não aumentar a perda.
    Perda > divergence_threshold ou não finita levanta DivergenceError com o
    traço e a rede da época em que divergiu.
    """
    init = init_network(list(cfg.widths), cfg.activation, cfg.init, cfg.seed,
                        output_activation=cfg.output_activation)
    weights = [np.array(layer.weights) for layer in init.layers]
    biases = [np.array(layer.bias) for layer in init.layers]
    activations = [layer.activation for layer in init.layers]
    xs, targets, _ = ts.stacked()
    n = len(xs)

    def snapshot() -> Network:
        return make_network(weights, biases, activations, params_id=dict(init.params_id))

    def full_loss() -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            return _backprop(weights, biases, activations, xs, targets)[0]

    def refit_due(epoch: int) -> bool:
        return cfg.refit_every > 0 and (epoch % cfg.refit_every == 0 or epoch == cfg.max_epochs)

    history = [full_loss()]
    reason = "max_epochs"
    epochs = 0
    for epoch in range(1, cfg.max_epochs + 1):
        if cfg.learning_rate > 0:
            order = np.argsort(sample_uniform(cfg.seed, n, path=(SHUFFLE_STREAM, epoch)), kind="stable")
            with np.errstate(over="ignore", invalid="ignore"):
                for start in range(0, n, cfg.batch_size):
                    idx = order[start:start + cfg.batch_size]
                    _, grads = _backprop(weights, biases, activations, xs[idx], targets[idx])
                    step = cfg.learning_rate / len(idx)
                    for l, g in enumerate(grads):
                        weights[l] -= step * g.weights
                        biases[l] -= step * g.bias
        current = full_loss()
        if cfg.learning_rate > 0 and refit_due(epoch) and math.isfinite(current):
            kept = (weights[-1].copy(), biases[-1].copy())
            if _refit_output(weights, biases, activations, xs, targets):
                refitted = full_loss()
                if refitted <= current:
                    current = refitted
                else:
                    weights[-1][...], biases[-1][...] = kept
        epochs = epoch
        if not math.isfinite(current) or current > cfg.divergence_threshold:
            message = (f"perda divergiu na época {epoch}: {current!r} > {cfg.divergence_threshold:g} "
                       f"(perda anterior {history[-1]!r})")
            if math.isfinite(current):
                history.append(current)
            trace = TrainTrace(loss_history=history, network=snapshot(), epochs_run=epoch,
                               stopped_reason="divergence")
            raise DivergenceError(message, trace=trace)
        history.append(current)
        if current <= cfg.target_loss:
            reason = "target_loss"
            break
    return TrainTrace(loss_history=history, network=snapshot(), epochs_run=epochs, stopped_reason=reason)


# ── Verificação ─────────────────────────────────────────────────────────

def verify_trained(
    net: Network,
    ts: TrainingSet,
    grid: GridSpec,
    policy: IterationPolicy,
    cluster_radius: float = DEFAULT_CLUSTER_RADIUS,
    *,
    tolerance: float = 0.05,
    jobs: int = 1,
) -> VerificationReport:
    """Pontos fixos da rede treinada vs centros das classes, e o teste T_k ⊂ Ω_k."""
    report = find_fixed_points(net, grid, policy, cluster_radius, jobs=jobs)
    positions = np.array([fp.position for fp in report.fixed_points]).reshape(-1, 2)
    classes: list[ClassVerification] = []
    for c in ts.classes:
        if report.q == 0:
            classes.append(ClassVerification(center=c.center, fixed_point_index=-1,
                                             center_distance=math.inf, own_basin_fraction=0.0))
            continue
        dists = np.linalg.norm(positions - c.center, axis=1)
        idx = int(np.argmin(dists))
        limits, _, converged = iterate_many(net, c.points, policy, jobs)
        hits = converged & (np.linalg.norm(limits - positions[idx], axis=1) <= cluster_radius)
        classes.append(ClassVerification(
            center=c.center,
            fixed_point_index=idx,
            center_distance=float(dists[idx]),
            own_basin_fraction=float(np.mean(hits)),
        ))
    return VerificationReport(report=report, classes=classes, tolerance=tolerance)


# ── Serialização ────────────────────────────────────────────────────────

def training_set_to_dict(ts: TrainingSet) -> dict[str, Any]:
    return {
        "k": ts.k,
        "classes": [
            {
                "center": [float(v) for v in c.center],
                "radius": c.radius,
                "points": [[float(v) for v in p] for p in c.points],
            }
            for c in ts.classes
        ],
    }


def training_set_from_dict(d: dict[str, Any]) -> TrainingSet:
    return TrainingSet(classes=[
        DiscClass(center=np.array(c["center"], dtype=np.float64), radius=float(c["radius"]),
                  points=np.array(c["points"], dtype=np.float64).reshape(-1, 2))
        for c in d["classes"]
    ])


def trace_to_dict(trace: TrainTrace) -> dict[str, Any]:
    return {
        "epochs_run": trace.epochs_run,
        "stopped_reason": trace.stopped_reason,
        "initial_loss": trace.loss_history[0],
        "final_loss": trace.loss_history[-1],
        "loss_history": trace.loss_history,
        "network": network_to_dict(trace.network),
    }


def trace_from_dict(d: dict[str, Any]) -> TrainTrace:
    return TrainTrace(
        loss_history=[float(v) for v in d["loss_history"]],
        network=network_from_dict(d["network"]),
        epochs_run=int(d["epochs_run"]),
        stopped_reason=str(d["stopped_reason"]),
    )


def loss_rows(trace: TrainTrace) -> list[tuple]:
    """(época, perda); época 0 é a perda inicial."""
    return [(e, repr(v)) for e, v in enumerate(trace.loss_history)]
