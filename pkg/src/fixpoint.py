"""Pontos fixos por iteração a partir de uma grade sobre Ω.

Para cada ponto x_{j,l} da grade roda-se x^{m+1} = Φ(x^m) até o critério
de Cauchy ‖x^{m+1} − x^m‖₂ < ε ou até max_iters passos. Os limites
convergidos são agrupados por ligação simples (raio cluster_radius); cada
grupo é um ponto fixo x*_k e os pontos da grade que caem nele formam Ω_k.
"""

from __future__ import annotations

from functools import partial

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from .models import (
    UNRESOLVED, FixedPoint, FixedPointReport, GridSpec, IterationPolicy,
    IterationResult, IterationStatus, Network,
)
from .netcore import forward
from .parallel import map_ordered

# Tamanho fixo dos blocos de pontos; não depende do número de workers.
CHUNK_SIZE = 512
DEFAULT_CLUSTER_RADIUS = 1e-3


# ── Grade ───────────────────────────────────────────────────────────────

def grid_axis(spec: GridSpec) -> np.ndarray:
    """Coordenadas −1 + δj, j = 0..⌊2/δ⌋."""
    return spec.lower[0] + spec.delta * np.arange(spec.points_per_axis, dtype=np.float64)


def make_grid(spec: GridSpec) -> np.ndarray:
    """Pontos (x_j, y_l) em ordem de linhas: índice k = l·n + j."""
    axis = grid_axis(spec)
    y_axis = spec.lower[1] + spec.delta * np.arange(spec.points_per_axis, dtype=np.float64)
    xs, ys = np.meshgrid(axis, y_axis, indexing="xy")
    return np.column_stack([xs.ravel(), ys.ravel()])


# ── Iteração ────────────────────────────────────────────────────────────

def iterate_points(
    net: Network,
    starts: np.ndarray,
    policy: IterationPolicy,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Itera todos os pontos em bloco. Retorna (limites, passos, convergiu).

    O bloco inteiro é avaliado a cada passo; pontos já resolvidos seguem no
    bloco mas seu resultado fica congelado. Iterados que saem de Ω não são
    projetados de volta; valores não finitos encerram o ponto como não resolvido.
    """
    x = np.array(starts, dtype=np.float64, ndmin=2)
    net.require_autoencoder(x.shape[1])
    n = x.shape[0]
    limits = np.full_like(x, np.nan)
    steps = np.full(n, int(policy.max_iters), dtype=np.int64)
    converged = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)

    with np.errstate(over="ignore", invalid="ignore"):
        for m in range(1, int(policy.max_iters) + 1):
            nxt = forward(net, x)
            finite = np.all(np.isfinite(nxt), axis=1)
            diff = np.linalg.norm(nxt - x, axis=1)
            done = active & finite & (diff < policy.epsilon)
            limits[done] = nxt[done]
            steps[done] = m
            converged |= done
            blown = active & ~finite
            steps[blown] = m
            active &= ~(done | blown)
            if not active.any():
                break
            x = nxt
    return limits, steps, converged


def iterate(net: Network, x1: np.ndarray, policy: IterationPolicy) -> IterationResult:
    """Iteração de um único ponto inicial (mesma regra de iterate_points)."""
    start = np.asarray(x1, dtype=np.float64)
    net.require_autoencoder(start.shape[-1])
    limits, steps, converged = iterate_points(net, start[None, :], policy)
    status = IterationStatus.CONVERGED if converged[0] else IterationStatus.UNRESOLVED
    return IterationResult(start=start, status=status, limit=limits[0], steps=int(steps[0]))


def _iterate_chunk(chunk: np.ndarray, *, net: Network, policy: IterationPolicy):
    return iterate_points(net, chunk, policy)


def iterate_many(net: Network, starts: np.ndarray, policy: IterationPolicy,
                 jobs: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """iterate_points em blocos de CHUNK_SIZE, distribuídos entre workers."""
    starts = np.asarray(starts, dtype=np.float64)
    net.require_autoencoder(starts.shape[1])
    chunks = [starts[i:i + CHUNK_SIZE] for i in range(0, len(starts), CHUNK_SIZE)]
    parts = map_ordered(partial(_iterate_chunk, net=net, policy=policy), chunks, jobs)
    if not parts:
        return np.empty((0, starts.shape[1])), np.empty(0, dtype=np.int64), np.empty(0, dtype=bool)
    limits = np.vstack([p[0] for p in parts])
    steps = np.concatenate([p[1] for p in parts])
    converged = np.concatenate([p[2] for p in parts])
    return limits, steps, converged


# ── Agrupamento dos limites ─────────────────────────────────────────────

def cluster_limits(limits: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Ligação simples com limiar `radius`.

    Retorna (rótulo por limite, centróides). Os grupos são numerados pela
    ordem lexicográfica (x, y) dos centróides e centróides a menos de
    `radius` um do outro são fundidos, então o resultado não depende da
    ordem dos limites de entrada.
    """
    limits = np.asarray(limits, dtype=np.float64)
    c = len(limits)
    if c == 0:
        return np.empty(0, dtype=np.int64), np.empty((0, limits.shape[1] if limits.ndim == 2 else 2))
    if c == 1:
        raw = np.zeros(1, dtype=np.int64)
    else:
        raw = fcluster(linkage(limits, method="single"), t=radius, criterion="distance") - 1

    while True:
        ids = np.unique(raw)
        centroids = np.array([_centroid(limits[raw == i]) for i in ids])
        order = np.lexsort(centroids.T[::-1])
        remap = np.empty(len(ids), dtype=np.int64)
        remap[order] = np.arange(len(ids))
        raw = remap[np.searchsorted(ids, raw)]
        centroids = centroids[order]
        merge = _first_close_pair(centroids, radius)
        if merge is None:
            return raw, centroids
        a, b = merge
        raw[raw == b] = a


def _centroid(members: np.ndarray) -> np.ndarray:
    # média de colunas ordenadas: independe da ordem dos membros
    return np.sort(members, axis=0).mean(axis=0)


def _first_close_pair(centroids: np.ndarray, radius: float) -> tuple[int, int] | None:
    for a in range(len(centroids)):
        d = np.linalg.norm(centroids[a + 1:] - centroids[a], axis=1)
        hit = np.flatnonzero(d <= radius)
        if hit.size:
            return a, a + 1 + int(hit[0])
    return None


# ── Relatório ───────────────────────────────────────────────────────────

def classify_starts(
    net: Network,
    starts: np.ndarray,
    policy: IterationPolicy,
    cluster_radius: float = DEFAULT_CLUSTER_RADIUS,
    *,
    lower: tuple[float, float] = (-1.0, -1.0),
    upper: tuple[float, float] = (1.0, 1.0),
    jobs: int = 1,
) -> tuple[list[FixedPoint], np.ndarray, np.ndarray, np.ndarray]:
    """Itera cada início e agrupa os limites. Retorna (pontos fixos, rótulos, passos, limites)."""
    limits, steps, converged = iterate_many(net, starts, policy, jobs)
    labels = np.full(len(starts), UNRESOLVED, dtype=np.int64)
    conv_idx = np.flatnonzero(converged)
    cl, centroids = cluster_limits(limits[conv_idx], cluster_radius)
    labels[conv_idx] = cl

    fixed_points: list[FixedPoint] = []
    if len(centroids):
        with np.errstate(over="ignore", invalid="ignore"):
            residuals = np.linalg.norm(forward(net, centroids) - centroids, axis=1)
        lo, hi = np.asarray(lower) - 1e-12, np.asarray(upper) + 1e-12
        for k, c in enumerate(centroids):
            members = conv_idx[cl == k]
            fixed_points.append(FixedPoint(
                position=c,
                residual=float(residuals[k]),
                basin_size=int(len(members)),
                out_of_domain=bool(np.any(c < lo) or np.any(c > hi)),
                # grade exatamente sobre um ponto fixo que não atrai vizinho algum
                unstable_suspect=bool(len(members) == 1 and steps[members[0]] == 1),
            ))
    return fixed_points, labels, steps, limits


def find_fixed_points(
    net: Network,
    spec: GridSpec,
    policy: IterationPolicy,
    cluster_radius: float = DEFAULT_CLUSTER_RADIUS,
    *,
    jobs: int = 1,
) -> FixedPointReport:
    """Roda iterate de todos os pontos da grade e devolve x*_k, Q e as bacias Ω_k."""
    net.require_autoencoder(2)
    starts = make_grid(spec)
    fixed_points, labels, steps, limits = classify_starts(
        net, starts, policy, cluster_radius,
        lower=spec.lower, upper=spec.upper, jobs=jobs,
    )
    return FixedPointReport(
        grid=spec,
        fixed_points=fixed_points,
        labels=labels,
        steps=steps,
        limits=limits,
        cluster_radius=cluster_radius,
    )


# ── Exportação das bacias ───────────────────────────────────────────────

BASIN_COLUMNS = ("j", "l", "x", "y", "label", "steps", "status")


def basin_rows(report: FixedPointReport) -> list[tuple]:
    """Linhas (j, l, x, y, label, steps, status) na ordem da grade."""
    n = report.grid.points_per_axis
    points = make_grid(report.grid)
    rows = []
    for k, (x, y) in enumerate(points):
        l, j = divmod(k, n)
        label = int(report.labels[k])
        status = IterationStatus.UNRESOLVED if label == UNRESOLVED else IterationStatus.CONVERGED
        rows.append((j, l, float(x), float(y), label, int(report.steps[k]), status.value))
    return rows


def basin_raster(report: FixedPointReport, maxval: int = 255) -> str:
    """Mapa de bacias em PGM texto (P2); y = +1 na primeira linha, não resolvido = 0."""
    n = report.grid.points_per_axis
    q = report.q
    grid = report.labels.reshape(n, n)[::-1]
    gray = np.where(grid == UNRESOLVED, 0, ((grid + 1) * maxval) // max(q, 1))
    lines = ["P2", f"# Q={q} delta={report.grid.delta!r}", f"{n} {n}", str(maxval)]
    lines += [" ".join(str(int(v)) for v in row) for row in gray]
    return "\n".join(lines) + "\n"
