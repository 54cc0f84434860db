"""Configuração de experimentos: TOML → ExperimentConfig → objetos dos módulos.

Erros de leitura/tipo levantam ConfigError (saída 2). Pré-condições dos
módulos são coletadas em um ValidationReport; se houver erro,
ConfigValidationError (saída 3).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib  # type: ignore[no-redef]

from .errors import ConfigError, ConfigValidationError, LabError, ParameterError
from .models import (
    ActivationKind, DistributionSpec, Family, GridSpec, IterationPolicy,
    ScaleRule, Seed, SweepConfig, TrainConfig,
)
from .randinit import derive_seed, layer_scales, seed_list

COMMANDS = (
    "basins", "sweep-depth", "beta-sweep", "depth-curve", "train-verify", "variance-check",
)

_INT = (int,)
_REAL = (int, float)
_STR = (str,)
_BOOL = (bool,)
_LIST = (list,)

# seção → chave → (tipos aceitos, padrão); padrão None = opcional sem valor
_SCHEMA: dict[str, dict[str, tuple[tuple[type, ...], Any]]] = {
    "network": {
        "widths": (_LIST, [2, 100, 2]),
        "activation": (_STR, "tanh"),
        "seed": (_INT, None),
        "seed_index": (_INT, 0),
    },
    "distribution": {
        "family": (_STR, "gauss"),
        "scale_rule": (_STR, "per_layer_inverse_width"),
        "beta": (_REAL, None),
        "value": (_REAL, None),
        "zero_bias": (_BOOL, False),
    },
    "grid": {
        "delta": (_REAL, 0.05),
    },
    "iteration": {
        "epsilon": (_REAL, 1e-5),
        "max_iters": (_INT, 50),
        "cluster_radius": (_REAL, 1e-3),
    },
    "sweep": {
        "width_N0": (_INT, 100),
        "depths": (_LIST, [2, 3, 4, 5, 6, 8, 10, 14, 20]),
        "n_seeds": (_INT, 100),
        "keep_reports": (_BOOL, False),
    },
    "contraction": {
        "width_N": (_INT, None),
        "betas": (_LIST, None),
        "beta_min": (_REAL, 0.1),
        "beta_max": (_REAL, 1.0),
        "beta_step": (_REAL, 0.05),
        "beta": (_REAL, 0.7),
        "depths": (_LIST, [1, 2, 3, 4, 5, 6, 7, 8]),
        "n_seeds": (_INT, 20),
        "pair_budget": (_INT, 0),
        "local_map": (_BOOL, False),
    },
    "variance": {
        "width_N": (_INT, 100),
        "sigma": (_REAL, 0.1),
        "n_seeds": (_INT, 10_000),
    },
    "discs": {
        "k": (_INT, 5),
        "radius": (_REAL, 0.15),
        "points_per_class": (_INT, 50),
        "layout": (_STR, "random"),
        "min_separation": (_REAL, 0.5),
    },
    "train": {
        "widths": (_LIST, [2, 100, 100, 2]),
        "activation": (_STR, "hardtanh"),
        "output_activation": (_STR, "identity"),
        "family": (_STR, "gauss"),
        "scale_rule": (_STR, "inverse_sqrt_depth"),
        "learning_rate": (_REAL, 0.01),
        "batch_size": (_INT, 16),
        "max_epochs": (_INT, 5000),
        "target_loss": (_REAL, 1e-4),
        "divergence_threshold": (_REAL, 1e6),
        "refit_every": (_INT, 250),
        "n_runs": (_INT, 1),
        "tolerance": (_REAL, 0.05),
    },
    "export": {
        "basins_csv": (_BOOL, True),
        "raster": (_BOOL, True),
        "include_basins": (_BOOL, False),
        "network_json": (_BOOL, True),
    },
}

_TOP = {"command", "output_dir", "master_seed"}

# listas de larguras e profundidades: só inteiros
_INT_LISTS = {"network.widths", "train.widths", "sweep.depths", "contraction.depths"}

# largura padrão da camada N × N em cada comando de contração
_CONTRACTION_WIDTH = {"beta-sweep": 400, "depth-curve": 100}


# ── Relatório de validação ──────────────────────────────────────────────

@dataclass
class ValidationIssue:
    category: str   # "grade", "rede", "treino", ...
    severity: str   # "erro", "aviso", "info"
    message: str
    context: str = ""


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    def add(self, category: str, severity: str, message: str, context: str = "") -> None:
        self.issues.append(ValidationIssue(category, severity, message, context))

    @property
    def errors(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == "erro"]

    @property
    def warnings(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == "aviso"]

    @property
    def infos(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == "info"]

    def print_report(self) -> None:
        if not self.issues:
            print("\n✓ Validação: nenhum problema encontrado")
            return

        by_cat: dict[str, list[ValidationIssue]] = {}
        for issue in self.issues:
            by_cat.setdefault(issue.category, []).append(issue)

        print(f"\n{'─' * 60}")
        print("  Relatório de validação")
        print(f"{'─' * 60}")

        icons = {"erro": "✗", "aviso": "·", "info": "→"}
        for cat, items in by_cat.items():
            print(f"\n  [{_CATEGORY_LABELS.get(cat, cat)}]")
            for item in items:
                line = f"    {icons.get(item.severity, '·')} {item.message}"
                if item.context:
                    line += f"  ({item.context})"
                print(line)

        parts = []
        if self.errors:
            parts.append(f"{len(self.errors)} erro(s)")
        if self.warnings:
            parts.append(f"{len(self.warnings)} aviso(s)")
        if not parts:
            parts.append("nenhum problema")
        print(f"\n  Total: {', '.join(parts)}")
        print(f"{'─' * 60}")

    def to_json(self) -> list[dict]:
        return [
            {
                "category": i.category,
                "severity": i.severity,
                "message": i.message,
                **({"context": i.context} if i.context else {}),
            }
            for i in self.issues
        ]


_CATEGORY_LABELS = {
    "experimento": "Experimento",
    "grade": "Grade sobre Ω",
    "iteracao": "Iteração de ponto fixo",
    "rede": "Rede e distribuição",
    "varredura": "Varredura em profundidade",
    "contracao": "Constante de contração",
    "variancia": "Variância da pré-ativação",
    "discos": "Conjunto de treino",
    "treino": "Treino",
}


# ── Leitura ─────────────────────────────────────────────────────────────

def parse_value(text: str) -> Any:
    """Literal TOML (número, booleano, lista, string entre aspas); senão a string crua."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(data: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Aplica --set secao.chave=valor sobre o dicionário lido do TOML."""
    data = copy.deepcopy(data)
    for item in overrides:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"--set espera chave=valor (obtido {item!r})")
        parts = key.split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {p!r} não é uma tabela")
        node[parts[-1]] = parse_value(raw.strip())
    return data


def load_toml(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"arquivo de configuração não encontrado: {path}") from None
    except OSError as e:
        raise ConfigError(f"não foi possível ler {path}: {e}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"TOML inválido em {path}: {e}") from None


def _check_type(where: str, value: Any, types: tuple[type, ...]) -> Any:
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"{where}: tipo inválido (esperado {_type_names(types)}, obtido bool)")
    if not isinstance(value, types):
        raise ConfigError(
            f"{where}: tipo inválido (esperado {_type_names(types)}, obtido {type(value).__name__})"
        )
    return value


def _type_names(types: tuple[type, ...]) -> str:
    names = {int: "inteiro", float: "real", str: "texto", bool: "booleano", list: "lista"}
    if types == _REAL:
        return "número"
    return " ou ".join(names.get(t, t.__name__) for t in types)


@dataclass
class ExperimentConfig:
    """Configuração completa de um comando, com os padrões já preenchidos."""
    command: str
    output_dir: Path
    master_seed: int
    sections: dict[str, dict[str, Any]]
    source: str = ""

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.sections[section]

    def to_dict(self) -> dict[str, Any]:
        """Eco da configuração efetiva (vai para o manifest)."""
        return {
            "command": self.command,
            "output_dir": self.output_dir.as_posix(),
            "master_seed": self.master_seed,
            **{
                name: {k: v for k, v in values.items() if v is not None}
                for name, values in self.sections.items()
            },
        }


def parse_config(data: dict[str, Any], *, source: str = "") -> ExperimentConfig:
    """Valida chaves e tipos (ConfigError) e preenche os padrões."""
    unknown = set(data) - _TOP - set(_SCHEMA)
    if unknown:
        raise ConfigError(f"chave(s) desconhecida(s) no topo: {', '.join(sorted(unknown))}")
    command = data.get("command")
    if command is None:
        raise ConfigError("falta a chave 'command'")
    if command not in COMMANDS:
        raise ConfigError(f"comando desconhecido: {command!r} (use {', '.join(COMMANDS)})")
    master_seed = _check_type("master_seed", data.get("master_seed", 0), _INT)
    if not 0 <= master_seed < 2**64:
        raise ConfigError(f"master_seed fora de u64: {master_seed}")
    output_dir = _check_type("output_dir", data.get("output_dir", f"results/{command}"), _STR)

    sections: dict[str, dict[str, Any]] = {}
    for name, schema in _SCHEMA.items():
        given = data.get(name, {})
        if not isinstance(given, dict):
            raise ConfigError(f"[{name}] deve ser uma tabela")
        extra = set(given) - set(schema)
        if extra:
            raise ConfigError(f"[{name}]: chave(s) desconhecida(s): {', '.join(sorted(extra))}")
        values: dict[str, Any] = {}
        for key, (types, default) in schema.items():
            if key in given:
                values[key] = _check_type(f"{name}.{key}", given[key], types)
                if types == _LIST:
                    item_types = _INT if f"{name}.{key}" in _INT_LISTS else _REAL
                    for item in values[key]:
                        _check_type(f"{name}.{key}[]", item, item_types)
            else:
                values[key] = copy.deepcopy(default)
        sections[name] = values
    if sections["contraction"]["width_N"] is None:
        sections["contraction"]["width_N"] = _CONTRACTION_WIDTH.get(command, 100)
    return ExperimentConfig(command=command, output_dir=Path(output_dir),
                            master_seed=int(master_seed), sections=sections, source=source)


def load_experiment(path: str | Path, overrides: list[str] | None = None) -> ExperimentConfig:
    data = apply_overrides(load_toml(path), overrides or [])
    return parse_config(data, source=str(path))


# ── Objetos dos módulos ─────────────────────────────────────────────────

def grid_spec(cfg: ExperimentConfig) -> GridSpec:
    return GridSpec(delta=float(cfg["grid"]["delta"]))


def iteration_policy(cfg: ExperimentConfig) -> IterationPolicy:
    it = cfg["iteration"]
    return IterationPolicy(epsilon=float(it["epsilon"]), max_iters=int(it["max_iters"]))


def cluster_radius(cfg: ExperimentConfig) -> float:
    return float(cfg["iteration"]["cluster_radius"])


def _enum(kind, value: str, where: str):
    try:
        return kind(value)
    except ValueError:
        allowed = ", ".join(m.value for m in kind)
        raise ConfigError(f"{where}: valor inválido {value!r} (use {allowed})") from None


def activation(cfg: ExperimentConfig, section: str = "network", key: str = "activation") -> ActivationKind:
    return _enum(ActivationKind, cfg[section][key], f"{section}.{key}")


def distribution(cfg: ExperimentConfig) -> DistributionSpec:
    d = cfg["distribution"]
    return DistributionSpec(
        family=_enum(Family, d["family"], "distribution.family"),
        scale_rule=_enum(ScaleRule, d["scale_rule"], "distribution.scale_rule"),
        beta=None if d["beta"] is None else float(d["beta"]),
        value=None if d["value"] is None else float(d["value"]),
        zero_bias=bool(d["zero_bias"]),
    )


def network_widths(cfg: ExperimentConfig) -> list[int]:
    return [int(w) for w in cfg["network"]["widths"]]


def basins_seed(cfg: ExperimentConfig) -> Seed:
    """network.seed explícita, senão derivada de master_seed e network.seed_index."""
    net = cfg["network"]
    if net["seed"] is not None:
        return Seed(int(net["seed"]))
    return Seed(derive_seed(cfg.master_seed, "basins", int(net["seed_index"])))


def sweep_config(cfg: ExperimentConfig) -> SweepConfig:
    s = cfg["sweep"]
    return SweepConfig(
        width_N0=int(s["width_N0"]),
        depths=tuple(int(d) for d in s["depths"]),
        family=distribution(cfg),
        activation=activation(cfg),
        n_seeds=int(s["n_seeds"]),
        grid=grid_spec(cfg),
        policy=iteration_policy(cfg),
        cluster_radius=cluster_radius(cfg),
        master_seed=cfg.master_seed,
    )


def beta_values(cfg: ExperimentConfig) -> list[float]:
    """contraction.betas, ou a faixa beta_min:beta_step:beta_max (extremos inclusos)."""
    c = cfg["contraction"]
    if c["betas"] is not None:
        return [float(b) for b in c["betas"]]
    lo, hi, step = float(c["beta_min"]), float(c["beta_max"]), float(c["beta_step"])
    if not step > 0:
        raise ParameterError(f"contraction.beta_step deve ser > 0 (obtido {step})")
    n = int(round((hi - lo) / step))
    return [round(lo + i * step, 12) for i in range(n + 1)]


def contraction_seeds(cfg: ExperimentConfig) -> list[Seed]:
    return seed_list(cfg.master_seed, cfg.command, int(cfg["contraction"]["n_seeds"]))


def pair_budget(cfg: ExperimentConfig) -> int | None:
    budget = int(cfg["contraction"]["pair_budget"])
    return None if budget <= 0 else budget


def variance_seeds(cfg: ExperimentConfig) -> list[Seed]:
    return seed_list(cfg.master_seed, "variance", int(cfg["variance"]["n_seeds"]))


def disc_seed(cfg: ExperimentConfig, run: int) -> Seed:
    return Seed(derive_seed(cfg.master_seed, "discs", run))


def train_config(cfg: ExperimentConfig, run: int) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        widths=tuple(int(w) for w in t["widths"]),
        activation=activation(cfg, "train", "activation"),
        output_activation=activation(cfg, "train", "output_activation"),
        learning_rate=float(t["learning_rate"]),
        batch_size=int(t["batch_size"]),
        max_epochs=int(t["max_epochs"]),
        target_loss=float(t["target_loss"]),
        divergence_threshold=float(t["divergence_threshold"]),
        refit_every=int(t["refit_every"]),
        init=DistributionSpec(
            family=_enum(Family, t["family"], "train.family"),
            scale_rule=_enum(ScaleRule, t["scale_rule"], "train.scale_rule"),
        ),
        seed=Seed(derive_seed(cfg.master_seed, "train", run)),
    )


# ── Diagnóstico (validate.py) ───────────────────────────────────────────

def _try(report: ValidationReport, category: str, fn):
    try:
        return fn()
    except ConfigError:
        raise
    except (LabError, ValueError) as e:
        report.add(category, "erro", str(e))
        return None


def build_diagnostics(cfg: ExperimentConfig) -> ValidationReport:
    """Constrói todos os objetos do comando sem calcular nada e lista as grandezas derivadas."""
    report = ValidationReport()
    cmd = cfg.command
    report.add("experimento", "info", f"comando {cmd}", f"saída em {cfg.output_dir.as_posix()}")

    grid = _try(report, "grade", lambda: grid_spec(cfg))
    if grid is not None:
        report.add("grade", "info",
                   f"{grid.size} pontos ({grid.points_per_axis} por eixo), δ = {grid.delta:g}")
    policy = _try(report, "iteracao", lambda: iteration_policy(cfg))
    if policy is not None and cmd in ("basins", "sweep-depth", "train-verify"):
        report.add("iteracao", "info",
                   f"ε = {policy.epsilon:g}, max_iters = {policy.max_iters}, "
                   f"raio de agrupamento = {cluster_radius(cfg):g}")
        if not cluster_radius(cfg) > 0:
            report.add("iteracao", "erro", "iteration.cluster_radius deve ser > 0")

    if cmd == "basins":
        _diagnose_basins(cfg, report)
    elif cmd == "sweep-depth":
        _diagnose_sweep(cfg, report)
    elif cmd in ("beta-sweep", "depth-curve"):
        _diagnose_contraction(cfg, report)
    elif cmd == "variance-check":
        v = cfg["variance"]
        if int(v["width_N"]) < 1:
            report.add("variancia", "erro", f"variance.width_N deve ser ≥ 1 (obtido {v['width_N']})")
        if float(v["sigma"]) < 0:
            report.add("variancia", "erro", f"variance.sigma deve ser ≥ 0 (obtido {v['sigma']})")
        if int(v["n_seeds"]) < 1:
            report.add("variancia", "erro", "variance.n_seeds deve ser ≥ 1")
        report.add("variancia", "info",
                   f"N = {v['width_N']}, σ = {float(v['sigma']):g}, {v['n_seeds']} sementes, "
                   f"previsão (N+1)σ² = {(int(v['width_N']) + 1) * float(v['sigma']) ** 2:g}")
    elif cmd == "train-verify":
        _diagnose_train(cfg, report)
    return report


def _describe_scales(report, category, widths, dist) -> None:
    scales = _try(report, category, lambda: layer_scales(widths, dist))
    if scales is not None:
        shown = ", ".join(f"{s:.4g}" for s in scales)
        report.add(category, "info", f"larguras {widths}; escala por camada: {shown}")


def _diagnose_basins(cfg: ExperimentConfig, report: ValidationReport) -> None:
    widths = network_widths(cfg)
    if len(widths) < 2:
        report.add("rede", "erro", f"network.widths precisa de ao menos 2 larguras (obtido {widths})")
        return
    if any(w < 1 for w in widths):
        report.add("rede", "erro", f"network.widths devem ser ≥ 1 (obtido {widths})")
        return
    if widths[0] != 2 or widths[-1] != 2:
        report.add("rede", "erro",
                   f"rede não é autoencoder em ℝ²: larguras {widths} (n_0 e n_L devem ser 2)")
    dist = _try(report, "rede", lambda: distribution(cfg))
    act = _try(report, "rede", lambda: activation(cfg))
    if dist is not None and act is not None:
        _describe_scales(report, "rede", widths, dist)
    seed = _try(report, "rede", lambda: basins_seed(cfg))
    if seed is not None:
        report.add("rede", "info", f"semente {seed.value} (fluxo {seed.stream_id})")


def _diagnose_sweep(cfg: ExperimentConfig, report: ValidationReport) -> None:
    sc = _try(report, "varredura", lambda: sweep_config(cfg))
    if sc is None:
        return
    if sc.width_N0 < 1:
        report.add("varredura", "erro", f"sweep.width_N0 deve ser ≥ 1 (obtido {sc.width_N0})")
        return
    from .sweep import sweep_seeds, sweep_widths

    report.add("varredura", "info",
               f"{len(sc.depths)} profundidades × {sc.n_seeds} sementes = "
               f"{len(sc.depths) * sc.n_seeds} células")
    for depth in sc.depths:
        seeds = sweep_seeds(sc.master_seed, depth, min(sc.n_seeds, 3))
        shown = ", ".join(str(s.value) for s in seeds)
        _describe_scales(report, "varredura", sweep_widths(sc.width_N0, depth), sc.family)
        report.add("varredura", "info", f"L = {depth}: sementes {shown}{' …' if sc.n_seeds > 3 else ''}")


def _diagnose_contraction(cfg: ExperimentConfig, report: ValidationReport) -> None:
    c = cfg["contraction"]
    width = int(c["width_N"])
    if width < 2:
        report.add("contracao", "erro", f"contraction.width_N deve ser ≥ 2 (obtido {width})")
    _try(report, "contracao", lambda: activation(cfg))
    if int(c["n_seeds"]) < 1:
        report.add("contracao", "erro", "contraction.n_seeds deve ser ≥ 1")
    if cfg.command == "beta-sweep":
        betas = _try(report, "contracao", lambda: beta_values(cfg))
        if betas is None:
            return
        if len(betas) < 2:
            report.add("contracao", "erro", "beta-sweep exige ao menos 2 valores de β")
        elif any(b1 <= b0 for b0, b1 in zip(betas, betas[1:])):
            report.add("contracao", "erro", "valores de β devem estar em ordem crescente")
        else:
            report.add("contracao", "info",
                       f"N = {width}, {len(betas)} valores de β em [{betas[0]:g}, {betas[-1]:g}], "
                       f"{c['n_seeds']} sementes; σ(β) = N^(-β) de {width ** -betas[0]:.4g} "
                       f"a {width ** -betas[-1]:.4g}")
    else:
        depths = [int(d) for d in c["depths"]]
        if not depths or any(d < 1 for d in depths):
            report.add("contracao", "erro", f"contraction.depths devem ser ≥ 1 (obtido {depths})")
        else:
            report.add("contracao", "info",
                       f"N = {width}, β = {float(c['beta']):g}, L ∈ {depths}, {c['n_seeds']} sementes")
    budget = pair_budget(cfg)
    report.add("contracao", "info",
               "todos os pares da grade" if budget is None else f"{budget} pares sorteados + vizinhos")


def _diagnose_train(cfg: ExperimentConfig, report: ValidationReport) -> None:
    d = cfg["discs"]
    if d["layout"] not in ("random", "pentagon"):
        report.add("discos", "erro", f"discs.layout inválido: {d['layout']!r} (use random ou pentagon)")
    if int(d["k"]) < 1 or not float(d["radius"]) > 0 or int(d["points_per_class"]) < 1:
        report.add("discos", "erro", "discs: k ≥ 1, radius > 0 e points_per_class ≥ 1")
    else:
        report.add("discos", "info",
                   f"K = {d['k']}, raio {float(d['radius']):g}, {d['points_per_class']} pontos por classe "
                   f"(layout {d['layout']})")
    t = cfg["train"]
    if int(t["n_runs"]) < 1:
        report.add("treino", "erro", "train.n_runs deve ser ≥ 1")
    tc = _try(report, "treino", lambda: train_config(cfg, 0))
    if tc is None:
        return
    if tc.widths[0] != 2:
        report.add("treino", "erro", f"train.widths deve começar e terminar em 2 (obtido {list(tc.widths)})")
    if not tc.learning_rate > 0:
        report.add("treino", "aviso", "learning_rate = 0: a rede não será atualizada")
    _describe_scales(report, "treino", list(tc.widths), tc.init)
    refit = f"reajuste da saída a cada {tc.refit_every} épocas" if tc.refit_every else "sem reajuste da saída"
    report.add("treino", "info",
               f"lr = {tc.learning_rate:g}, lote {tc.batch_size}, até {tc.max_epochs} épocas, {refit}, "
               f"{t['n_runs']} execução(ões)")


def validate_config(cfg: ExperimentConfig) -> ValidationReport:
    """build_diagnostics + ConfigValidationError se houver erro."""
    report = build_diagnostics(cfg)
    if report.errors:
        first = report.errors[0]
        raise ConfigValidationError(f"{first.category}: {first.message}", report=report)
    return report
