"""Varredura (profundidade × semente) da contagem Q de pontos fixos.

Cada célula sorteia uma rede {2, N₀, …, N₀, 2}, roda find_fixed_points e
guarda Q. A agregação por profundidade é feita na ordem das células, então
o resultado não depende do número de workers.
"""

from __future__ import annotations

import json
from collections import Counter
from functools import partial
from typing import Any

import numpy as np

from .errors import NumericalError
from .fixpoint import find_fixed_points
from .models import DepthSummary, Seed, SweepCell, SweepConfig, SweepReport
from .parallel import map_ordered
from .randinit import init_network, seed_list

SUMMARY_COLUMNS = (
    "L", "mode", "mean", "histogram", "unresolved_fraction", "n_failed", "unresolved_seeds",
)
CELL_COLUMNS = ("L", "seed_index", "seed", "q", "unresolved_fraction", "failed")


def sweep_widths(width_N0: int, depth: int) -> list[int]:
    """{2, N₀ (L−1 vezes), 2}."""
    return [2] + [int(width_N0)] * (int(depth) - 1) + [2]


def sweep_seeds(master_seed: int, depth: int, n: int) -> list[Seed]:
    return seed_list(master_seed, f"sweep:L{int(depth)}", n)


def _run_cell(task: tuple[int, int, Seed], *, cfg: SweepConfig, keep_report: bool) -> SweepCell:
    depth, index, seed = task
    try:
        net = init_network(sweep_widths(cfg.width_N0, depth), cfg.activation, cfg.family, seed)
        report = find_fixed_points(net, cfg.grid, cfg.policy, cfg.cluster_radius)
    except (NumericalError, FloatingPointError):
        return SweepCell(depth=depth, seed_index=index, seed=seed, q=0,
                         unresolved_fraction=1.0, failed=True)
    return SweepCell(
        depth=depth, seed_index=index, seed=seed, q=report.q,
        unresolved_fraction=report.unresolved_fraction,
        report=report if keep_report else None,
    )


def summarize_depth(depth: int, cells: list[SweepCell]) -> DepthSummary:
    """Histograma, moda (empate → menor Q), média e fração não resolvida.

    Uma semente com Q = 0 não teve nenhum ponto da grade convergindo (órbitas
    periódicas ou caóticas): o histograma e a média a incluem, mas a moda é
    tomada só entre as sementes com Q ≥ 1. Se nenhuma convergiu, a moda é 0.
    """
    histogram = dict(sorted(Counter(c.q for c in cells).items()))
    measured = {q: n for q, n in histogram.items() if q > 0} or histogram
    top = max(measured.values())
    mode = min(q for q, n in measured.items() if n == top)
    return DepthSummary(
        depth=depth,
        histogram=histogram,
        mode=mode,
        mean=float(np.mean([c.q for c in cells])),
        unresolved_fraction=float(np.mean([c.unresolved_fraction for c in cells])),
        n_failed=sum(1 for c in cells if c.failed),
        unresolved_seeds=sum(1 for c in cells if c.q == 0),
    )


def run_sweep(cfg: SweepConfig, *, jobs: int = 1, keep_reports: bool = False) -> SweepReport:
    """init_network → find_fixed_points → Q para cada (L, semente)."""
    tasks = [
        (depth, i, seed)
        for depth in cfg.depths
        for i, seed in enumerate(sweep_seeds(cfg.master_seed, depth, cfg.n_seeds))
    ]
    cells = map_ordered(partial(_run_cell, cfg=cfg, keep_report=keep_reports), tasks, jobs)
    per_depth = [
        summarize_depth(depth, [c for c in cells if c.depth == depth])
        for depth in cfg.depths
    ]
    return SweepReport(config=cfg, cells=cells, per_depth=per_depth)


# ── Tabelas e arquivo ───────────────────────────────────────────────────

def summarize(report: SweepReport) -> list[tuple]:
    """Uma linha por profundidade: L, moda, média, histograma (JSON), fração não resolvida."""
    rows = []
    for s in report.per_depth:
        hist = json.dumps({str(q): n for q, n in s.histogram.items()}, separators=(",", ":"))
        rows.append((s.depth, s.mode, repr(s.mean), hist, repr(s.unresolved_fraction), s.n_failed,
                     s.unresolved_seeds))
    return rows


def cell_rows(report: SweepReport) -> list[tuple]:
    return [
        (c.depth, c.seed_index, c.seed.value, c.q, repr(c.unresolved_fraction), int(c.failed))
        for c in report.cells
    ]


def archive_dict(report: SweepReport, *, include_basins: bool = False) -> dict[str, Any]:
    """Todas as células; bacias só com include_basins (e keep_reports na varredura)."""
    cells = []
    for c in report.cells:
        entry: dict[str, Any] = {
            "L": c.depth,
            "seed_index": c.seed_index,
            "seed": c.seed.to_dict(),
            "q": c.q,
            "unresolved_fraction": c.unresolved_fraction,
        }
        if c.failed:
            entry["failed"] = True
        if c.report is not None:
            entry["report"] = c.report.to_dict(include_basins=include_basins)
        cells.append(entry)
    cfg = report.config
    return {
        "width_N0": cfg.width_N0,
        "depths": list(cfg.depths),
        "distribution": cfg.family.to_dict(),
        "activation": cfg.activation.value,
        "n_seeds": cfg.n_seeds,
        "master_seed": cfg.master_seed,
        "per_depth": [
            {
                "L": s.depth,
                "mode": s.mode,
                "mean": s.mean,
                "histogram": {str(q): n for q, n in s.histogram.items()},
                "unresolved_fraction": s.unresolved_fraction,
                "n_failed": s.n_failed,
                "unresolved_seeds": s.unresolved_seeds,
            }
            for s in report.per_depth
        ],
        "cells": cells,
    }
