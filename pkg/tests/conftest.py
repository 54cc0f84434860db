"""Fixtures, oráculos independentes e helpers de golden file."""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Garante que o diretório raiz do projeto esteja no sys.path
ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.models import ActivationKind, DistributionSpec, Family, Network, ScaleRule, Seed
from src.netcore import make_network
from src.randinit import init_network

SNAPSHOTS_DIR = Path(__file__).resolve().parent / "snapshots"


# ── CLI flag ────────────────────────────────────────────────────────────

def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        "--update-snapshots",
        action="store_true",
        default=False,
        help="Regenera os golden files de snapshot.",
    )


@pytest.fixture(scope="session")
def update_snapshots(request: pytest.FixtureRequest) -> bool:
    return bool(request.config.getoption("--update-snapshots"))


# ── Factories ───────────────────────────────────────────────────────────

@pytest.fixture
def make_net():
    """Factory para redes Gauss σ = 1/n_l com defaults sensatos."""

    def _factory(
        widths: list[int] = (2, 10, 2),
        activation: ActivationKind = ActivationKind.TANH,
        *,
        seed: int = 0,
        family: Family = Family.GAUSS,
        scale_rule: ScaleRule = ScaleRule.PER_LAYER_INVERSE_WIDTH,
        beta: float | None = None,
        value: float | None = None,
    ) -> Network:
        dist = DistributionSpec(family, scale_rule, beta=beta, value=value)
        return init_network(list(widths), activation, dist, Seed(seed))

    return _factory


@pytest.fixture
def zero_net() -> Network:
    """Φ ≡ 0 em ℝ² (Tanh, pesos e biases nulos)."""
    return make_network([np.zeros((3, 2)), np.zeros((2, 3))], [np.zeros(3), np.zeros(2)], "tanh")


# ── Oráculos ────────────────────────────────────────────────────────────

_SCALAR = {
    ActivationKind.TANH: math.tanh,
    ActivationKind.HARDTANH: lambda v: min(1.0, max(-1.0, v)),
    ActivationKind.SIGMOID: lambda v: 1.0 / (1.0 + math.exp(-v)),
    ActivationKind.IDENTITY: lambda v: v,
}


def naive_forward(net: Network, x: list[float]) -> list[float]:
    """Φ(x) com laços Python e math escalar, sem numpy."""
    vec = [float(v) for v in x]
    for layer in net.layers:
        phi = _SCALAR[layer.activation]
        w = layer.weights.tolist()
        b = layer.bias.tolist()
        vec = [phi(sum(w[i][j] * vec[j] for j in range(len(vec))) + b[i]) for i in range(len(b))]
    return vec


def naive_loss(net: Network, ts) -> float:
    """Σ_k Σ_x ‖Φ(x) − x*_k‖² com laços Python."""
    total = 0.0
    for c in ts.classes:
        for p in c.points:
            out = naive_forward(net, list(p))
            total += sum((o - t) ** 2 for o, t in zip(out, c.center))
    return total


def power_iteration_norm(w: np.ndarray, iters: int = 1000, tol: float = 1e-12) -> float:
    """‖W‖₂ por iteração de potência em WᵀW (vetor inicial fixo)."""
    v = np.ones(w.shape[1]) / math.sqrt(w.shape[1])
    sigma = 0.0
    for _ in range(iters):
        u = w.T @ (w @ v)
        norm = np.linalg.norm(u)
        if norm == 0:
            return 0.0
        v = u / norm
        new_sigma = math.sqrt(norm)
        if abs(new_sigma - sigma) <= tol * max(new_sigma, 1.0):
            return new_sigma
        sigma = new_sigma
    return sigma


def scalar_iterate(f, x: float, eps: float, max_iters: int) -> float | None:
    """Iteração escalar de f; None se não convergir em max_iters passos."""
    for _ in range(max_iters):
        nxt = f(x)
        if abs(nxt - x) < eps:
            return nxt
        x = nxt
    return None


# ── Helpers de snapshot ─────────────────────────────────────────────────

def load_golden(name: str) -> dict | None:
    """Carrega golden file JSON; retorna None se não existir."""
    p = SNAPSHOTS_DIR / f"{name}.json"
    if not p.exists():
        return None
    return json.loads(p.read_text(encoding="utf-8"))


def save_golden(name: str, data: dict) -> Path:
    """Salva golden file JSON."""
    SNAPSHOTS_DIR.mkdir(parents=True, exist_ok=True)
    p = SNAPSHOTS_DIR / f"{name}.json"
    p.write_text(json.dumps(data, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return p
