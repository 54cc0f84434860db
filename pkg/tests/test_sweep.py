"""Testes de sweep: células (L, semente), agregação e tabelas."""

from __future__ import annotations

import json

import pytest

from src.errors import ParameterError
from src.models import (
    ActivationKind, DepthSummary, DistributionSpec, Family, GridSpec, Seed,
    ScaleRule, SweepCell, SweepConfig, SweepReport,
)
from src.sweep import (
    CELL_COLUMNS, SUMMARY_COLUMNS, archive_dict, cell_rows, run_sweep,
    summarize, summarize_depth, sweep_seeds, sweep_widths,
)

pytestmark = pytest.mark.unit


def _cell(depth: int, index: int, q: int, unresolved: float = 0.0, failed: bool = False) -> SweepCell:
    return SweepCell(depth=depth, seed_index=index, seed=Seed(index), q=q,
                     unresolved_fraction=unresolved, failed=failed)


def _small_config(**overrides) -> SweepConfig:
    base = dict(
        width_N0=8,
        depths=(2, 3),
        family=DistributionSpec(Family.CAUCHY),
        activation=ActivationKind.TANH,
        n_seeds=3,
        grid=GridSpec(delta=0.25),
        master_seed=7,
    )
    base.update(overrides)
    return SweepConfig(**base)


class TestWidthsAndSeeds:
    def test_larguras(self):
        assert sweep_widths(100, 1) == [2, 2]
        assert sweep_widths(100, 2) == [2, 100, 2]
        assert sweep_widths(50, 4) == [2, 50, 50, 50, 2]

    def test_sementes_por_profundidade(self):
        a = sweep_seeds(0, 2, 5)
        assert a == sweep_seeds(0, 2, 5)
        assert [s.value for s in a] != [s.value for s in sweep_seeds(0, 3, 5)]

    def test_prefixo_das_sementes(self):
        assert sweep_seeds(1, 4, 3) == sweep_seeds(1, 4, 10)[:3]


class TestSweepConfig:
    def test_n_seeds_invalido(self):
        with pytest.raises(ParameterError):
            _small_config(n_seeds=0)

    def test_profundidades_invalidas(self):
        with pytest.raises(ParameterError):
            _small_config(depths=())
        with pytest.raises(ParameterError):
            _small_config(depths=(0, 2))


class TestSummarizeDepth:
    def test_uma_semente(self):
        s = summarize_depth(2, [_cell(2, 0, 3)])
        assert s.histogram == {3: 1}
        assert s.mode == 3
        assert s.mean == 3.0

    def test_empate_vai_para_o_menor_q(self):
        s = summarize_depth(2, [_cell(2, 0, 2), _cell(2, 1, 1)])
        assert s.mode == 1
        assert s.mean == 1.5

    def test_histograma_ordenado(self):
        s = summarize_depth(3, [_cell(3, i, q) for i, q in enumerate([4, 1, 2, 1, 4, 4])])
        assert list(s.histogram) == [1, 2, 4]
        assert s.mode == 4

    def test_celulas_com_falha(self):
        cells = [_cell(2, 0, 1, 0.1), _cell(2, 1, 0, 1.0, failed=True)]
        s = summarize_depth(2, cells)
        assert s.n_failed == 1
        assert s.unresolved_fraction == pytest.approx(0.55)

    def test_sementes_sem_convergencia_ficam_fora_da_moda(self):
        qs = [0] * 28 + [1] * 15 + [2] * 6 + [3]
        s = summarize_depth(20, [_cell(20, i, q, 1.0 if q == 0 else 0.2) for i, q in enumerate(qs)])
        assert s.histogram == {0: 28, 1: 15, 2: 6, 3: 1}
        assert s.mode == 1
        assert s.unresolved_seeds == 28
        assert s.mean == pytest.approx(30 / 50)

    def test_nenhuma_semente_converge(self):
        s = summarize_depth(20, [_cell(20, i, 0, 1.0) for i in range(3)])
        assert s.mode == 0
        assert s.unresolved_seeds == 3


class TestSummaryTables:
    def _report(self) -> SweepReport:
        cells = [_cell(2, 0, 1), _cell(2, 1, 2), _cell(2, 2, 1)]
        return SweepReport(config=_small_config(depths=(2,)), cells=cells,
                           per_depth=[summarize_depth(2, cells)])

    def test_uma_linha_por_profundidade(self):
        rows = summarize(self._report())
        assert len(rows) == 1
        assert len(rows[0]) == len(SUMMARY_COLUMNS)
        depth, mode, _, hist, _, n_failed, unresolved_seeds = rows[0]
        assert (depth, mode, n_failed, unresolved_seeds) == (2, 1, 0, 0)
        assert json.loads(hist) == {"1": 2, "2": 1}

    def test_linhas_das_celulas(self):
        rows = cell_rows(self._report())
        assert len(rows) == 3
        assert all(len(r) == len(CELL_COLUMNS) for r in rows)
        assert [r[3] for r in rows] == [1, 2, 1]

    def test_arquivo(self):
        d = archive_dict(self._report())
        assert d["per_depth"][0]["histogram"] == {"1": 2, "2": 1}
        assert len(d["cells"]) == 3
        assert "report" not in d["cells"][0]
        assert "failed" not in d["cells"][0]


class TestRunSweep:
    def test_varredura_pequena(self):
        report = run_sweep(_small_config())
        assert [c.depth for c in report.cells] == [2, 2, 2, 3, 3, 3]
        assert [c.seed_index for c in report.cells] == [0, 1, 2, 0, 1, 2]
        assert [s.depth for s in report.per_depth] == [2, 3]
        for s in report.per_depth:
            assert sum(s.histogram.values()) == 3

    def test_independe_do_numero_de_workers(self):
        cfg = _small_config()
        a = run_sweep(cfg, jobs=1)
        b = run_sweep(cfg, jobs=2)
        assert cell_rows(a) == cell_rows(b)
        assert summarize(a) == summarize(b)

    def test_relatorios_guardados(self):
        report = run_sweep(_small_config(depths=(2,), n_seeds=1), keep_reports=True)
        assert report.cells[0].report is not None
        d = archive_dict(report, include_basins=True)
        assert d["cells"][0]["report"]["q"] == report.cells[0].q

    def test_mapa_contrativo_tem_um_ponto_fixo(self):
        # σ fixo pequeno: Φ contrai e há um único atrator
        cfg = _small_config(
            family=DistributionSpec(Family.GAUSS, ScaleRule.FIXED, value=0.05),
            depths=(2,),
        )
        report = run_sweep(cfg)
        assert report.per_depth[0].histogram == {1: 3}
        assert isinstance(report.per_depth[0], DepthSummary)
