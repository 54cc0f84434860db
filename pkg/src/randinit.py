"""Amostragem determinística de pesos e biases (Gauss e Cauchy).

Convenção congelada (não alterar sem regenerar os golden files):
  - gerador Philox (contador) criado por SeedSequence(value, spawn_key=(stream_id, *path));
  - uniforme u = (top 53 bits da palavra de 64 bits + 0.5) · 2⁻⁵³, sempre em (0, 1);
  - Gauss:  x = σ · Φ⁻¹(u)               (scipy.special.ndtri);
  - Cauchy: x = γ · tan(π(u − 1/2)).
Cada (camada, matriz) usa seu próprio caminho de fluxo, então a ordem em
que as camadas são sorteadas não altera os valores.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np
from scipy.special import ndtri

from .errors import ParameterError
from .models import (
    ActivationKind, DistributionSpec, Family, Layer, Network, ScaleRule, Seed,
)

_WEIGHTS = 0
_BIAS = 1
_U53 = 2.0 ** -53

# Caminhos reservados, acima de qualquer índice de camada.
SHUFFLE_STREAM = 1 << 20
PAIR_STREAM = (1 << 20) + 1
DISC_STREAM = (1 << 20) + 2


# ── Sementes ────────────────────────────────────────────────────────────

def derive_seed(master: int, *path: object) -> int:
    """Divide a semente mestre: SHA-256 de "master:p1:p2…", 8 bytes big-endian."""
    text = ":".join([str(int(master))] + [str(p) for p in path])
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big", signed=False)


def seed_list(master: int, label: str, n: int, stream_id: int = 0) -> list[Seed]:
    """n sementes independentes para o experimento `label`."""
    return [Seed(derive_seed(master, label, i), stream_id) for i in range(n)]


def _generator(seed: Seed, path: tuple[int, ...]) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed.value), spawn_key=(int(seed.stream_id), *path))
    return np.random.Generator(np.random.Philox(ss))


# ── Amostragem ──────────────────────────────────────────────────────────

def sample_uniform(seed: Seed, n: int, path: tuple[int, ...] = ()) -> np.ndarray:
    """n uniformes em (0, 1) aberto; 0 e 1 nunca aparecem."""
    if n < 0:
        raise ParameterError(f"n deve ser ≥ 0 (obtido {n})")
    raw = _generator(seed, path).bit_generator.random_raw(n)
    raw = np.asarray(raw, dtype=np.uint64).reshape(n)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def sample_gauss(seed: Seed, n: int, sigma: float, path: tuple[int, ...] = ()) -> np.ndarray:
    """n amostras i.i.d. de N(0, σ) pela inversa da CDF normal."""
    if not sigma > 0:
        raise ParameterError(f"sigma deve ser > 0 (obtido {sigma})")
    return sigma * ndtri(sample_uniform(seed, n, path))


def sample_cauchy(seed: Seed, n: int, gamma: float, path: tuple[int, ...] = ()) -> np.ndarray:
    """n amostras i.i.d. de Cauchy(0, γ) pela inversa da CDF."""
    if not gamma > 0:
        raise ParameterError(f"gamma deve ser > 0 (obtido {gamma})")
    u = sample_uniform(seed, n, path)
    return gamma * np.tan(np.pi * (u - 0.5))


def sample(dist: DistributionSpec, seed: Seed, n: int, scale: float,
           path: tuple[int, ...] = ()) -> np.ndarray:
    if dist.family is Family.GAUSS:
        return sample_gauss(seed, n, scale, path)
    return sample_cauchy(seed, n, scale, path)


# ── Escalas por camada ──────────────────────────────────────────────────

def layer_scales(widths: list[int], dist: DistributionSpec) -> list[float]:
    """Escala (σ_l ou γ_l) de cada camada; N = colunas da camada (largura de entrada)."""
    _check_widths(widths)
    depth = len(widths) - 1
    scales: list[float] = []
    for n_in in widths[:-1]:
        if dist.scale_rule is ScaleRule.PER_LAYER_INVERSE_WIDTH:
            scales.append(1.0 / n_in)
        elif dist.scale_rule is ScaleRule.POWER_LAW:
            scales.append(float(n_in) ** (-float(dist.beta)))
        elif dist.scale_rule is ScaleRule.INVERSE_SQRT_DEPTH:
            scales.append(1.0 / math.sqrt(depth))
        else:
            scales.append(float(dist.value))
    return scales


def _check_widths(widths: list[int]) -> None:
    if len(widths) < 2:
        raise ParameterError(f"larguras precisam de ao menos 2 entradas (obtido {list(widths)})")
    if any(int(w) < 1 for w in widths):
        raise ParameterError(f"larguras devem ser ≥ 1 (obtido {list(widths)})")


# ── Rede aleatória ──────────────────────────────────────────────────────

def init_network(
    widths: list[int],
    activation: ActivationKind,
    dist: DistributionSpec,
    seed: Seed,
    *,
    output_activation: ActivationKind | None = None,
) -> Network:
    """Sorteia W^l e b^l i.i.d. com a escala da camada l.

    Pesos da camada l usam o fluxo (l, 0) e biases o fluxo (l, 1).
    Com dist.zero_bias os biases são zerados.
    """
    widths = [int(w) for w in widths]
    scales = layer_scales(widths, dist)
    activation = ActivationKind(activation)
    layers: list[Layer] = []
    for l, (n_in, n_out, scale) in enumerate(zip(widths[:-1], widths[1:], scales)):
        w = sample(dist, seed, n_out * n_in, scale, (l, _WEIGHTS)).reshape(n_out, n_in)
        if dist.zero_bias:
            b = np.zeros(n_out)
        else:
            b = sample(dist, seed, n_out, scale, (l, _BIAS))
        act = activation
        if output_activation is not None and l == len(widths) - 2:
            act = ActivationKind(output_activation)
        layers.append(Layer(weights=w, bias=b, activation=act))
    return Network(
        layers=tuple(layers),
        params_id={"seed": seed.to_dict(), "distribution": dist.to_dict()},
    )
