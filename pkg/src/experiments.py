"""Um executor por comando do CLI.

Cada executor imprime as fases no console, grava os artefatos pelo
ArtifactWriter e devolve um resumo (dict) que vai para o manifest.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import config as C
from .artifacts import ArtifactWriter
from .contraction import (
    basin_contraction, beta_sweep, contraction_area_agreement, depth_curve,
    local_contraction_map, preactivation_variance,
)
from .errors import DivergenceError
from .fixpoint import BASIN_COLUMNS, basin_raster, basin_rows, find_fixed_points, make_grid
from .models import ContractionSample
from .netcore import network_to_dict
from .randinit import init_network
from .sweep import CELL_COLUMNS, SUMMARY_COLUMNS, archive_dict, cell_rows, run_sweep, summarize
from .train import loss_rows, make_discs, trace_to_dict, train, training_set_to_dict, verify_trained


@dataclass
class Console:
    """Saída de progresso no estilo [i/n] ... / → ...; quiet silencia tudo."""
    quiet: bool = False

    def banner(self, label: str) -> None:
        if not self.quiet:
            print(f"\n{'═' * 60}")
            print(f"  {label}")
            print(f"{'═' * 60}")

    def phase(self, i: int, n: int, text: str) -> None:
        if not self.quiet:
            print(f"[{i}/{n}] {text}")

    def result(self, text: str) -> None:
        if not self.quiet:
            print(f"      → {text}")

    def done(self, label: str, elapsed: float, where: str) -> None:
        if not self.quiet:
            print(f"\n✓ {label} pronto em {elapsed:.1f}s → {where}")


def _sample_rows(samples: list[ContractionSample], key: str) -> list[tuple]:
    return [
        (getattr(s, key), s.seed.value, repr(s.g))
        for s in samples
    ]


# ── basins ──────────────────────────────────────────────────────────────

def run_basins(cfg: C.ExperimentConfig, out: ArtifactWriter, jobs: int, con: Console) -> dict[str, Any]:
    export = cfg["export"]
    grid, policy, radius = C.grid_spec(cfg), C.iteration_policy(cfg), C.cluster_radius(cfg)
    steps = 4 if cfg["contraction"]["local_map"] else 3

    con.phase(1, steps, "Sorteando a rede...")
    seed = C.basins_seed(cfg)
    net = init_network(C.network_widths(cfg), C.activation(cfg), C.distribution(cfg), seed)
    con.result(f"larguras {net.widths}, semente {seed.value}")

    con.phase(2, steps, f"Iterando {grid.size} pontos da grade...")
    report = find_fixed_points(net, grid, policy, radius, jobs=jobs)
    con.result(f"Q = {report.q}, {report.unresolved_count} ponto(s) não resolvido(s)")
    for fp in report.fixed_points:
        flags = [f for f, on in (("fora de Ω", fp.out_of_domain), ("instável?", fp.unstable_suspect)) if on]
        con.result(
            f"x* = ({fp.position[0]:+.4f}, {fp.position[1]:+.4f}), bacia {fp.basin_size}"
            + (f" [{', '.join(flags)}]" if flags else "")
        )

    summary: dict[str, Any] = {"q": report.q, "unresolved": report.unresolved_count}
    fixed = {"seed": seed.to_dict(), "widths": net.widths, **report.to_dict(include_basins=export["include_basins"])}

    if steps == 4:
        con.phase(3, steps, "Calculando contração local...")
        local = local_contraction_map(net, grid)
        per_basin = basin_contraction(net, grid, report)
        agreement = contraction_area_agreement(local, report)
        fixed["basin_contraction"] = {str(k): g for k, g in per_basin.items()}
        fixed["contraction_area_agreement"] = agreement
        points = make_grid(grid)
        n = grid.points_per_axis
        out.write_csv(
            "local_contraction.csv", ("j", "l", "x", "y", "ratio"),
            [(k % n, k // n, repr(float(x)), repr(float(y)), repr(float(r)))
             for k, ((x, y), r) in enumerate(zip(points, local))],
        )
        con.result(f"{np.count_nonzero(local < 1)} ponto(s) com razão local < 1; "
                   f"concordância com bacias {agreement:.3f}")
        summary["contraction_area_agreement"] = agreement

    con.phase(steps, steps, "Gravando artefatos...")
    out.write_json("fixed_points.json", fixed)
    if export["network_json"]:
        out.write_json("network.json", network_to_dict(net))
    if export["basins_csv"]:
        out.write_csv("basins.csv", BASIN_COLUMNS, basin_rows(report))
    if export["raster"]:
        out.write_text("basins.pgm", basin_raster(report))
    con.result(f"{len(out.written)} arquivo(s)")
    return summary


# ── sweep-depth ─────────────────────────────────────────────────────────

def run_sweep_depth(cfg: C.ExperimentConfig, out: ArtifactWriter, jobs: int, con: Console) -> dict[str, Any]:
    sc = C.sweep_config(cfg)
    keep = bool(cfg["sweep"]["keep_reports"])

    con.phase(1, 2, f"Varrendo {len(sc.depths)} profundidades × {sc.n_seeds} sementes...")
    report = run_sweep(sc, jobs=jobs, keep_reports=keep)
    for s in report.per_depth:
        failed = f", {s.n_failed} falha(s)" if s.n_failed else ""
        if s.unresolved_seeds:
            failed += f", {s.unresolved_seeds} semente(s) sem convergência"
        con.result(f"L = {s.depth:>2}: moda Q = {s.mode}, média {s.mean:.2f}{failed}")

    con.phase(2, 2, "Gravando artefatos...")
    out.write_csv("sweep_summary.csv", SUMMARY_COLUMNS, summarize(report))
    out.write_csv("sweep_cells.csv", CELL_COLUMNS, cell_rows(report))
    out.write_json("sweep_archive.json",
                   archive_dict(report, include_basins=cfg["export"]["include_basins"]))
    return {"modes": {str(s.depth): s.mode for s in report.per_depth}}


# ── beta-sweep / depth-curve ────────────────────────────────────────────

def run_beta_sweep(cfg: C.ExperimentConfig, out: ArtifactWriter, jobs: int, con: Console) -> dict[str, Any]:
    c = cfg["contraction"]
    width = int(c["width_N"])
    act = C.activation(cfg)
    betas = C.beta_values(cfg)
    seeds = C.contraction_seeds(cfg)

    con.phase(1, 2, f"g(β) para N = {width}, {act.value}, {len(betas)} β × {len(seeds)} sementes...")
    curve = beta_sweep([width, width], act, betas, seeds, C.grid_spec(cfg),
                       zero_bias=bool(cfg["distribution"]["zero_bias"]),
                       pair_budget=C.pair_budget(cfg), jobs=jobs)
    if curve.beta_cr is not None:
        con.result(f"β_cr ≈ {curve.beta_cr:.4f}")
    else:
        con.result(f"sem cruzamento: {curve.diagnostic}")

    con.phase(2, 2, "Gravando artefatos...")
    out.write_csv("contraction_samples.csv", ("beta", "seed", "g"), _sample_rows(curve.samples, "beta"))
    summary = {"width_N": width, "activation": act.value, "n_seeds": len(seeds), **curve.to_dict()}
    out.write_json("contraction_summary.json", summary)
    return {"beta_cr": curve.beta_cr}


def run_depth_curve(cfg: C.ExperimentConfig, out: ArtifactWriter, jobs: int, con: Console) -> dict[str, Any]:
    c = cfg["contraction"]
    width, beta = int(c["width_N"]), float(c["beta"])
    act = C.activation(cfg)
    depths = [int(d) for d in c["depths"]]
    seeds = C.contraction_seeds(cfg)

    con.phase(1, 2, f"g(L) para N = {width}, β = {beta:g}, L ∈ {depths}...")
    curve = depth_curve(width, act, beta, depths, seeds, C.grid_spec(cfg),
                        pair_budget=C.pair_budget(cfg), jobs=jobs)
    for L, g in zip(curve.depths, curve.mean_g):
        con.result(f"L = {L}: g médio = {g:.4g}")
    if curve.fit is not None:
        con.result(f"ajuste log g: inclinação {curve.fit.slope:+.4f}, R² = {curve.fit.r_squared:.4f}")

    con.phase(2, 2, "Gravando artefatos...")
    out.write_csv("depth_samples.csv", ("L", "seed", "g"), _sample_rows(curve.samples, "depth_L"))
    summary = {"width_N": width, "beta": beta, "activation": act.value, "n_seeds": len(seeds),
               **curve.to_dict()}
    out.write_json("depth_summary.json", summary)
    return {"slope": curve.fit.slope if curve.fit else None}


# ── variance-check ──────────────────────────────────────────────────────

def run_variance_check(cfg: C.ExperimentConfig, out: ArtifactWriter, jobs: int, con: Console) -> dict[str, Any]:
    v = cfg["variance"]
    seeds = C.variance_seeds(cfg)
    con.phase(1, 2, f"Sorteando y = Wx + b para {len(seeds)} sementes...")
    stats = preactivation_variance(int(v["width_N"]), float(v["sigma"]), seeds, jobs=jobs)
    expected = stats.expected_variance
    rel = abs(stats.preactivation_variance - expected) / expected if expected > 0 else 0.0
    con.result(f"Σ² = {stats.preactivation_variance:.5f} (previsto {expected:.5f}, erro relativo {rel:.2%})")

    con.phase(2, 2, "Gravando artefatos...")
    summary = {
        "width_N": stats.width_N,
        "sigma": stats.sigma,
        "n_seeds": len(seeds),
        "n_samples": stats.n_samples,
        "variance": stats.preactivation_variance,
        "expected_variance": expected,
        "relative_error": rel,
    }
    out.write_json("variance_summary.json", summary)
    return {"variance": stats.preactivation_variance}


# ── train-verify ────────────────────────────────────────────────────────

def run_train_verify(cfg: C.ExperimentConfig, out: ArtifactWriter, jobs: int, con: Console) -> dict[str, Any]:
    d, t = cfg["discs"], cfg["train"]
    grid, policy, radius = C.grid_spec(cfg), C.iteration_policy(cfg), C.cluster_radius(cfg)
    n_runs = int(t["n_runs"])
    runs: list[dict[str, Any]] = []
    last_error: DivergenceError | None = None

    for run in range(n_runs):
        prefix = f"run_{run:02d}/"
        con.phase(run + 1, n_runs, f"Treino {run + 1} de {n_runs}...")
        ts = make_discs(int(d["k"]), float(d["radius"]), grid, int(d["points_per_class"]),
                        C.disc_seed(cfg, run), layout=d["layout"],
                        min_separation=float(d["min_separation"]))
        out.write_json(prefix + "training_set.json", training_set_to_dict(ts))
        tc = C.train_config(cfg, run)
        try:
            trace = train(tc, ts)
        except DivergenceError as e:
            last_error = e
            con.result(f"divergiu: {e}")
            if e.trace is not None:
                out.write_csv(prefix + "loss.csv", ("epoch", "loss"), loss_rows(e.trace))
            runs.append({"run": run, "seed": tc.seed.to_dict(), "diverged": True, "message": str(e)})
            continue
        con.result(f"perda {trace.loss_history[0]:.4g} → {trace.loss_history[-1]:.4g} "
                   f"em {trace.epochs_run} época(s) ({trace.stopped_reason})")

        check = verify_trained(trace.network, ts, grid, policy, radius,
                               tolerance=float(t["tolerance"]), jobs=jobs)
        mark = "✓" if check.passed else "✗"
        con.result(f"{mark} Q = {check.report.q} para K = {ts.k}")

        out.write_json(prefix + "trace.json", trace_to_dict(trace))
        out.write_csv(prefix + "loss.csv", ("epoch", "loss"), loss_rows(trace))
        out.write_json(prefix + "verification.json", check.to_dict())
        if cfg["export"]["raster"]:
            out.write_text(prefix + "basins.pgm", basin_raster(check.report))
        runs.append({
            "run": run,
            "seed": tc.seed.to_dict(),
            "passed": check.passed,
            "q": check.report.q,
            "final_loss": trace.loss_history[-1],
            "epochs_run": trace.epochs_run,
        })

    if last_error is not None and all(r.get("diverged") for r in runs):
        raise last_error
    n_passed = sum(1 for r in runs if r.get("passed"))
    out.write_json("train_summary.json", {"k": int(d["k"]), "n_runs": n_runs, "n_passed": n_passed, "runs": runs})
    con.result(f"{n_passed} de {n_runs} execução(ões) verificada(s)")
    return {"n_passed": n_passed, "n_runs": n_runs}


RUNNERS: dict[str, Callable[..., dict[str, Any]]] = {
    "basins": run_basins,
    "sweep-depth": run_sweep_depth,
    "beta-sweep": run_beta_sweep,
    "depth-curve": run_depth_curve,
    "variance-check": run_variance_check,
    "train-verify": run_train_verify,
}

_LABELS = {
    "basins": "Bacias de atração",
    "sweep-depth": "Q(N₀, L) por profundidade",
    "beta-sweep": "Contração g(β)",
    "depth-curve": "Contração g(L)",
    "variance-check": "Variância da pré-ativação",
    "train-verify": "Treino e verificação dos pontos fixos",
}


def run_experiment(cfg: C.ExperimentConfig, *, jobs: int = 1, quiet: bool = False) -> tuple[dict[str, Any], ArtifactWriter]:
    """Executa o comando de cfg; o manifest fica por conta do chamador."""
    con = Console(quiet=quiet)
    label = _LABELS[cfg.command]
    con.banner(f"{label} ({cfg.command})")
    t0 = time.time()
    out = ArtifactWriter(cfg.output_dir)
    summary = RUNNERS[cfg.command](cfg, out, jobs, con)
    con.done(label, time.time() - t0, cfg.output_dir.as_posix())
    return summary, out
