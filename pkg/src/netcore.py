"""Mapa de camada φ(Wx + b) e composição Φ da rede.

Todas as funções aceitam um vetor (n,) ou uma matriz de vetores-linha (m, n).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
from scipy.special import expit

from .errors import ParameterError, ShapeError
from .models import ActivationKind, Layer, Network


# ── Ativações ───────────────────────────────────────────────────────────

def apply_activation(kind: ActivationKind, x):
    """φ elemento a elemento; escalar entra, escalar sai."""
    kind = ActivationKind(kind)
    z = np.asarray(x, dtype=np.float64)
    if kind is ActivationKind.TANH:
        out = np.tanh(z)
    elif kind is ActivationKind.HARDTANH:
        out = np.clip(z, -1.0, 1.0)
    elif kind is ActivationKind.SIGMOID:
        out = expit(z)
    else:
        out = z.copy()
    return float(out) if out.ndim == 0 else out


def activation_derivative(kind: ActivationKind, z):
    """φ'(z). HardTanh: 1 no intervalo fechado [-1, 1], 0 fora."""
    kind = ActivationKind(kind)
    z = np.asarray(z, dtype=np.float64)
    if kind is ActivationKind.TANH:
        t = np.tanh(z)
        out = 1.0 - t * t
    elif kind is ActivationKind.HARDTANH:
        out = (np.abs(z) <= 1.0).astype(np.float64)
    elif kind is ActivationKind.SIGMOID:
        s = expit(z)
        out = s * (1.0 - s)
    else:
        out = np.ones_like(z)
    return float(out) if out.ndim == 0 else out


# ── Avaliação ───────────────────────────────────────────────────────────

def preactivation(layer: Layer, x: np.ndarray) -> np.ndarray:
    """y = Wx + b (vetor) ou X Wᵀ + b (linhas)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise ShapeError("entrada da camada (número de eixos)", "1 ou 2", x.ndim)
    if x.shape[-1] != layer.n_in:
        raise ShapeError("comprimento da entrada da camada", layer.n_in, x.shape[-1])
    if x.ndim == 1:
        return layer.weights @ x + layer.bias
    return x @ layer.weights.T + layer.bias


def layer_forward(layer: Layer, x: np.ndarray) -> np.ndarray:
    """x^{l+1} = φ(W^l x^l + b^l)."""
    return apply_activation(layer.activation, preactivation(layer, x))


def forward(net: Network, x0: np.ndarray) -> np.ndarray:
    """Φ(x⁰) = x^L, aplicando as camadas da entrada para a saída."""
    x = np.asarray(x0, dtype=np.float64)
    if x.ndim >= 1 and x.shape[-1] != net.widths[0]:
        raise ShapeError("comprimento de x0 vs n_0", net.widths[0], x.shape[-1])
    for layer in net.layers:
        x = layer_forward(layer, x)
    return x


def embed_points(points: np.ndarray, n0: int) -> np.ndarray:
    """Coloca pontos 2-D nos dois primeiros eixos de ℝ^{n0} (zeros no resto)."""
    points = np.asarray(points, dtype=np.float64)
    dim = points.shape[-1]
    if n0 == dim:
        return points
    if n0 < dim:
        raise ShapeError("largura de entrada para embutir a grade", f">= {dim}", n0)
    out = np.zeros(points.shape[:-1] + (n0,), dtype=np.float64)
    out[..., :dim] = points
    return out


# ── Construção ──────────────────────────────────────────────────────────

def make_network(
    weights: list[Any],
    biases: list[Any],
    activations: ActivationKind | list[ActivationKind],
    params_id: dict[str, Any] | None = None,
) -> Network:
    """Monta uma Network a partir de listas de W, b e ativações."""
    if len(weights) != len(biases):
        raise ShapeError("número de matrizes vs número de biases", len(weights), len(biases))
    if isinstance(activations, (str, ActivationKind)):
        activations = [ActivationKind(activations)] * len(weights)
    if len(activations) != len(weights):
        raise ShapeError("número de ativações vs número de camadas", len(weights), len(activations))
    layers = tuple(
        Layer(weights=w, bias=b, activation=a)
        for w, b, a in zip(weights, biases, activations)
    )
    return Network(layers=layers, params_id=dict(params_id or {}))


def diagonal_network(scale: float, offset: float, activation: ActivationKind,
                     depth: int = 1, dim: int = 2) -> Network:
    """Rede diagonal W = scale·I, b = offset·1 empilhada depth vezes."""
    if depth < 1:
        raise ParameterError("depth deve ser ≥ 1")
    w = scale * np.eye(dim)
    b = np.full(dim, float(offset))
    return make_network([w] * depth, [b] * depth, activation,
                        params_id={"kind": "diagonal", "scale": scale, "offset": offset})


# ── Serialização JSON (hex-float, bit a bit) ────────────────────────────

def _hex_array(arr: np.ndarray) -> list:
    return [float(v).hex() for v in arr] if arr.ndim == 1 else [_hex_array(r) for r in arr]


def _from_hex(values: Any) -> np.ndarray:
    def conv(v):
        return [conv(x) for x in v] if isinstance(v, list) else float.fromhex(v)
    return np.array(conv(values), dtype=np.float64)


def network_to_dict(net: Network) -> dict[str, Any]:
    return {
        "format": "hexfloat-v1",
        "widths": net.widths,
        "activations": [layer.activation.value for layer in net.layers],
        "weights": [_hex_array(layer.weights) for layer in net.layers],
        "biases": [_hex_array(layer.bias) for layer in net.layers],
        "params_id": net.params_id,
    }


def network_from_dict(d: dict[str, Any]) -> Network:
    if d.get("format") != "hexfloat-v1":
        raise ParameterError(f"formato de rede desconhecido: {d.get('format')!r}")
    net = make_network(
        [_from_hex(w) for w in d["weights"]],
        [_from_hex(b) for b in d["biases"]],
        [ActivationKind(a) for a in d["activations"]],
        params_id=d.get("params_id", {}),
    )
    if net.widths != list(d["widths"]):
        raise ShapeError("larguras declaradas vs reconstruídas", list(d["widths"]), net.widths)
    return net


def save_network(net: Network, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(network_to_dict(net), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def load_network(path: str | Path) -> Network:
    return network_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
