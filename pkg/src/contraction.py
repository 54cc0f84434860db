"""Constante de contração empírica g e suas varreduras.

g = max_{x ≠ x'} ‖Φ(x) − Φ(x')‖₂ / ‖x − x'‖₂ sobre os pontos da grade.
Para uma camada N × N (n_0 > 2) a grade de Ω é embutida nos dois primeiros
eixos de entrada e a diferença das saídas é medida em ℝ^N.
"""

from __future__ import annotations

import math
from functools import partial

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import linregress

from .errors import NumericalError, ParameterError, ShapeError
from .fixpoint import make_grid
from .models import (
    UNRESOLVED, ActivationKind, ContractionCurve, ContractionSample, DepthCurve,
    DepthFit, DistributionSpec, Family, FixedPointReport, GridSpec, LayerStats,
    Network, ScaleRule, Seed,
)
from .netcore import embed_points, forward
from .parallel import map_ordered
from .randinit import (
    PAIR_STREAM, derive_seed, init_network, sample_gauss, sample_uniform,
)


# ── Pares da grade ──────────────────────────────────────────────────────

def neighbor_pairs(spec: GridSpec) -> np.ndarray:
    """Pares (i, k) de vizinhos da grade: horizontal, vertical e as duas diagonais."""
    n = spec.points_per_axis
    idx = np.arange(n * n).reshape(n, n)  # idx[l, j]
    pairs = [
        (idx[:, :-1], idx[:, 1:]),
        (idx[:-1, :], idx[1:, :]),
        (idx[:-1, :-1], idx[1:, 1:]),
        (idx[:-1, 1:], idx[1:, :-1]),
    ]
    return np.vstack([np.column_stack([a.ravel(), b.ravel()]) for a, b in pairs])


def _sampled_pairs(n_points: int, budget: int, seed: Seed) -> np.ndarray:
    u = sample_uniform(seed, 2 * budget, path=(PAIR_STREAM, n_points))
    i = np.minimum((u[:budget] * n_points).astype(np.int64), n_points - 1)
    k = np.minimum((u[budget:] * n_points).astype(np.int64), n_points - 1)
    keep = i != k
    return np.column_stack([i[keep], k[keep]])


def _images(net: Network, points: np.ndarray) -> np.ndarray:
    net.require_autoencoder()
    with np.errstate(over="ignore", invalid="ignore"):
        images = forward(net, embed_points(points, net.widths[0]))
    if not np.all(np.isfinite(images)):
        raise NumericalError("Φ produziu valores não finitos na grade")
    return images


def pair_ratios(points: np.ndarray, images: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    num = np.linalg.norm(images[pairs[:, 0]] - images[pairs[:, 1]], axis=1)
    den = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1)
    return num / den


# ── Constante de contração ──────────────────────────────────────────────

def contraction_constant(
    net: Network,
    spec: GridSpec,
    pair_budget: int | None = None,
    *,
    seed: Seed = Seed(0),
) -> float:
    """g da rede sobre a grade.

    pair_budget=None usa todos os pares (≈1,4 milhão para δ = 0,05); caso
    contrário usa `pair_budget` pares sorteados mais todos os pares vizinhos.
    """
    points = make_grid(spec)
    if len(points) < 2:
        raise ParameterError("grade degenerada: contração exige ao menos 2 pontos")
    images = _images(net, points)
    total = len(points) * (len(points) - 1) // 2
    if pair_budget is None or pair_budget >= total:
        ratios = pdist(images) / pdist(points)
    else:
        pairs = np.vstack([neighbor_pairs(spec), _sampled_pairs(len(points), int(pair_budget), seed)])
        ratios = pair_ratios(points, images, pairs)
    return float(ratios.max())


def local_contraction_map(net: Network, spec: GridSpec) -> np.ndarray:
    """Por ponto da grade: maior razão com os seus (até 8) vizinhos."""
    points = make_grid(spec)
    images = _images(net, points)
    pairs = neighbor_pairs(spec)
    ratios = pair_ratios(points, images, pairs)
    local = np.zeros(len(points))
    np.maximum.at(local, pairs[:, 0], ratios)
    np.maximum.at(local, pairs[:, 1], ratios)
    return local


def basin_contraction(net: Network, spec: GridSpec, report: FixedPointReport) -> dict[int, float]:
    """g restrito aos pares dentro de cada bacia Ω_k (bacias de um ponto ficam de fora)."""
    points = make_grid(spec)
    images = _images(net, points)
    out: dict[int, float] = {}
    for k in range(report.q):
        members = np.flatnonzero(report.labels == k)
        if len(members) < 2:
            continue
        out[k] = float((pdist(images[members]) / pdist(points[members])).max())
    return out


def contraction_area_agreement(local: np.ndarray, report: FixedPointReport) -> float:
    """Fração dos pontos com razão local < 1 que pertencem a alguma bacia."""
    contracting = local < 1.0
    if not contracting.any():
        return 1.0
    return float(np.mean(report.labels[contracting] != UNRESOLVED))


# ── Varredura em β ──────────────────────────────────────────────────────

def _beta_task(task: tuple[float, Seed], *, widths, activation, spec, zero_bias, pair_budget) -> float:
    beta, seed = task
    dist = DistributionSpec(Family.GAUSS, ScaleRule.POWER_LAW, beta=beta, zero_bias=zero_bias)
    net = init_network(widths, activation, dist, seed)
    return contraction_constant(net, spec, pair_budget, seed=seed)


def estimate_beta_cr(betas: list[float], mean_g: list[float]) -> tuple[float | None, str]:
    """Cruzamento de g(β) com 1 por interpolação linear entre β vizinhos."""
    for i in range(len(betas) - 1):
        g0, g1 = mean_g[i] - 1.0, mean_g[i + 1] - 1.0
        if g0 == 0.0:
            return betas[i], ""
        if g0 * g1 < 0 or g1 == 0.0:
            b0, b1 = betas[i], betas[i + 1]
            return b0 + (0.0 - g0) * (b1 - b0) / (g1 - g0), ""
    lo, hi = betas[0], betas[-1]
    side = "acima" if min(mean_g) > 1.0 else "abaixo"
    return None, (
        f"g(β) fica {side} de 1 em todo o intervalo β ∈ [{lo:g}, {hi:g}] "
        f"(g mín = {min(mean_g):.4g}, g máx = {max(mean_g):.4g})"
    )


def beta_sweep(
    widths: list[int],
    activation: ActivationKind,
    betas: list[float],
    seeds: list[Seed],
    spec: GridSpec,
    *,
    zero_bias: bool = False,
    pair_budget: int | None = None,
    jobs: int = 1,
) -> ContractionCurve:
    """g(β) para redes Gauss com σ = N^{-β}; β_cr onde a média sobre sementes cruza 1."""
    betas = [float(b) for b in betas]
    if len(betas) < 2:
        raise ParameterError("beta_sweep exige ao menos 2 valores de β")
    if any(b1 <= b0 for b0, b1 in zip(betas, betas[1:])):
        raise ParameterError("valores de β devem estar em ordem crescente")
    if not seeds:
        raise ParameterError("beta_sweep exige ao menos uma semente")
    if widths[0] != widths[-1]:
        raise ShapeError("rede não é autoencoder (n_0 vs n_L)", widths[0], widths[-1])
    activation = ActivationKind(activation)

    tasks = [(b, s) for b in betas for s in seeds]
    fn = partial(_beta_task, widths=list(widths), activation=activation, spec=spec,
                 zero_bias=zero_bias, pair_budget=pair_budget)
    gs = map_ordered(fn, tasks, jobs)

    samples = [
        ContractionSample(beta=b, width_N=int(widths[-2]), depth_L=len(widths) - 1,
                          activation=activation, g=g, seed=s)
        for (b, s), g in zip(tasks, gs)
    ]
    n = len(seeds)
    mean_g = [float(np.mean(gs[i * n:(i + 1) * n])) for i in range(len(betas))]
    beta_cr, diagnostic = estimate_beta_cr(betas, mean_g)
    return ContractionCurve(samples=samples, betas=betas, mean_g=mean_g,
                            beta_cr=beta_cr, diagnostic=diagnostic)


# ── Dependência com a profundidade ──────────────────────────────────────

def fit_depth_law(depths: list[int], g: list[float]) -> DepthFit | None:
    """Ajuste de log g = slope·L + intercept. Com uma única profundidade, g = g₀^L exato."""
    g = np.asarray(g, dtype=np.float64)
    if len(depths) == 0 or np.any(g <= 0):
        return None
    logs = np.log(g)
    if len(depths) == 1:
        return DepthFit(slope=float(logs[0] / depths[0]), intercept=0.0, r_squared=1.0)
    res = linregress(np.asarray(depths, dtype=np.float64), logs)
    r2 = float(res.rvalue ** 2) if math.isfinite(res.rvalue) else 1.0
    return DepthFit(slope=float(res.slope), intercept=float(res.intercept), r_squared=r2)


def _depth_task(task: tuple[int, Seed], *, width_N, activation, beta, spec, pair_budget) -> float:
    depth, seed = task
    dist = DistributionSpec(Family.GAUSS, ScaleRule.POWER_LAW, beta=beta)
    net = init_network([width_N] * (depth + 1), activation, dist, seed)
    return contraction_constant(net, spec, pair_budget, seed=seed)


def depth_curve(
    width_N: int,
    activation: ActivationKind,
    beta: float,
    depths: list[int],
    seeds: list[Seed],
    spec: GridSpec,
    *,
    pair_budget: int | None = None,
    jobs: int = 1,
) -> DepthCurve:
    """Média de g por profundidade L (camadas N × N); sementes reamostradas por L."""
    depths = [int(d) for d in depths]
    if not depths or any(d < 1 for d in depths):
        raise ParameterError("profundidades devem ser ≥ 1")
    if not seeds:
        raise ParameterError("depth_curve exige ao menos uma semente")
    activation = ActivationKind(activation)

    tasks = [
        (L, Seed(derive_seed(s.value, "depth", L), s.stream_id))
        for L in depths for s in seeds
    ]
    fn = partial(_depth_task, width_N=int(width_N), activation=activation, beta=float(beta),
                 spec=spec, pair_budget=pair_budget)
    gs = map_ordered(fn, tasks, jobs)

    samples = [
        ContractionSample(beta=float(beta), width_N=int(width_N), depth_L=L,
                          activation=activation, g=g, seed=s)
        for (L, s), g in zip(tasks, gs)
    ]
    n = len(seeds)
    mean_g = [float(np.mean(gs[i * n:(i + 1) * n])) for i in range(len(depths))]
    return DepthCurve(depths=depths, mean_g=mean_g, samples=samples,
                      fit=fit_depth_law(depths, mean_g))


# ── Variância da pré-ativação (TCL) ─────────────────────────────────────

def _variance_chunk(seeds: list[Seed], *, width_N: int, sigma: float, x: np.ndarray) -> np.ndarray:
    out = []
    for s in seeds:
        w = sample_gauss(s, width_N * width_N, sigma, (0, 0)).reshape(width_N, width_N)
        b = sample_gauss(s, width_N, sigma, (0, 1))
        out.append(w @ x + b)
    return np.concatenate(out) if out else np.empty(0)


def preactivation_variance(
    width_N: int,
    sigma: float,
    seeds: list[Seed],
    x: np.ndarray | None = None,
    *,
    jobs: int = 1,
) -> LayerStats:
    """Variância empírica de y = Wx + b (W, b ~ N(0, σ)) sobre sementes e componentes."""
    if width_N < 1:
        raise ParameterError("width_N deve ser ≥ 1")
    if sigma < 0:
        raise ParameterError(f"sigma deve ser ≥ 0 (obtido {sigma})")
    x = np.ones(width_N) if x is None else np.asarray(x, dtype=np.float64)
    if x.shape != (width_N,):
        raise ShapeError("comprimento de x vs width_N", width_N, x.shape[-1] if x.ndim else 0)
    n_samples = len(seeds) * width_N
    if sigma == 0 or not seeds:
        return LayerStats(preactivation_variance=0.0, width_N=width_N, sigma=sigma,
                          n_samples=n_samples)
    chunk = 256
    groups = [seeds[i:i + chunk] for i in range(0, len(seeds), chunk)]
    parts = map_ordered(partial(_variance_chunk, width_N=width_N, sigma=sigma, x=x), groups, jobs)
    y = np.concatenate(parts)
    return LayerStats(preactivation_variance=float(np.var(y)), width_N=width_N,
                      sigma=sigma, n_samples=n_samples)
