"""Representação intermediária do laboratório de pontos fixos.

Redes, distribuições, grades, relatórios de pontos fixos, curvas de
contração, varreduras e treino. Tudo em float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np

from .errors import ParameterError, ShapeError

UNRESOLVED = -1  # rótulo sentinela de bacia para pontos que não convergiram


# ── Ativações ───────────────────────────────────────────────────────────

class ActivationKind(str, Enum):
    TANH = "tanh"
    HARDTANH = "hardtanh"
    SIGMOID = "sigmoid"
    IDENTITY = "identity"

    @property
    def is_odd(self) -> bool:
        return self in (ActivationKind.TANH, ActivationKind.HARDTANH, ActivationKind.IDENTITY)

    @property
    def is_bounded(self) -> bool:
        return self is not ActivationKind.IDENTITY


# ── Rede ────────────────────────────────────────────────────────────────

def _as_frozen_array(values: Any, ndim: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise ShapeError(f"{what} (número de eixos)", ndim, arr.ndim)
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{what} contém valores não finitos")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Layer:
    """Camada φ(Wx + b); W tem forma n_{l+1} × n_l."""
    weights: np.ndarray
    bias: np.ndarray
    activation: ActivationKind = ActivationKind.TANH

    def __post_init__(self) -> None:
        w = _as_frozen_array(self.weights, 2, "pesos")
        b = _as_frozen_array(self.bias, 1, "bias")
        if w.shape[0] != b.shape[0]:
            raise ShapeError("linhas de W vs comprimento do bias", w.shape[0], b.shape[0])
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "activation", ActivationKind(self.activation))

    @property
    def n_in(self) -> int:
        return int(self.weights.shape[1])

    @property
    def n_out(self) -> int:
        return int(self.weights.shape[0])


@dataclass(frozen=True, eq=False)
class Network:
    """Composição Φ = Φ^{L-1} ∘ … ∘ Φ^0 (camada de entrada primeiro)."""
    layers: tuple[Layer, ...]
    params_id: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        layers = tuple(self.layers)
        if not layers:
            raise ParameterError("rede sem camadas")
        for i in range(1, len(layers)):
            if layers[i].n_in != layers[i - 1].n_out:
                raise ShapeError(
                    f"colunas da camada {i} vs linhas da camada {i - 1}",
                    layers[i - 1].n_out, layers[i].n_in,
                )
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def widths(self) -> list[int]:
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    @property
    def is_autoencoder(self) -> bool:
        w = self.widths
        return w[0] == w[-1]

    def require_autoencoder(self, dim: int | None = None) -> None:
        """Levanta ShapeError se n_0 ≠ n_L (ou ≠ dim, quando dado)."""
        w = self.widths
        if w[0] != w[-1]:
            raise ShapeError("rede não é autoencoder (n_0 vs n_L)", w[0], w[-1])
        if dim is not None and w[0] != dim:
            raise ShapeError("dimensão do ponto inicial vs n_0", w[0], dim)


# ── Distribuições e sementes ────────────────────────────────────────────

class Family(str, Enum):
    GAUSS = "gauss"
    CAUCHY = "cauchy"


class ScaleRule(str, Enum):
    PER_LAYER_INVERSE_WIDTH = "per_layer_inverse_width"
    POWER_LAW = "power_law"
    INVERSE_SQRT_DEPTH = "inverse_sqrt_depth"
    FIXED = "fixed"


@dataclass(frozen=True)
class DistributionSpec:
    """Família + regra de escala (σ_l, γ_l, N^{-β}, 1/√L ou valor fixo)."""
    family: Family = Family.GAUSS
    scale_rule: ScaleRule = ScaleRule.PER_LAYER_INVERSE_WIDTH
    beta: Optional[float] = None
    value: Optional[float] = None
    zero_bias: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "scale_rule", ScaleRule(self.scale_rule))
        if self.scale_rule is ScaleRule.POWER_LAW:
            if self.beta is None or not math.isfinite(self.beta):
                raise ParameterError("regra power_law exige beta finito")
        if self.scale_rule is ScaleRule.FIXED:
            if self.value is None or not (self.value > 0 and math.isfinite(self.value)):
                raise ParameterError("regra fixed exige value > 0")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "family": self.family.value,
            "scale_rule": self.scale_rule.value,
        }
        if self.beta is not None:
            d["beta"] = self.beta
        if self.value is not None:
            d["value"] = self.value
        if self.zero_bias:
            d["zero_bias"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> DistributionSpec:
        return cls(
            family=Family(d.get("family", "gauss")),
            scale_rule=ScaleRule(d.get("scale_rule", "per_layer_inverse_width")),
            beta=d.get("beta"),
            value=d.get("value"),
            zero_bias=bool(d.get("zero_bias", False)),
        )


@dataclass(frozen=True)
class Seed:
    """Semente (valor u64 + fluxo). O mesmo par reproduz a mesma sequência."""
    value: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        if not (0 <= int(self.value) < 2**64):
            raise ParameterError(f"semente fora de u64: {self.value}")
        if int(self.stream_id) < 0:
            raise ParameterError(f"stream_id negativo: {self.stream_id}")

    def to_dict(self) -> dict[str, int]:
        return {"value": int(self.value), "stream_id": int(self.stream_id)}


# ── Grade e iteração ────────────────────────────────────────────────────

@dataclass(frozen=True)
class GridSpec:
    """Grade de passo δ sobre Ω = [lower, upper]² (padrão [-1, 1]²)."""
    delta: float = 0.05
    lower: tuple[float, float] = (-1.0, -1.0)
    upper: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        span = self.upper[0] - self.lower[0]
        if span <= 0 or self.upper[1] - self.lower[1] != span:
            raise ParameterError(f"GridSpec: Ω deve ser um quadrado não degenerado ({self.lower}, {self.upper})")
        if not (isinstance(self.delta, (int, float)) and 0 < self.delta <= span):
            raise ParameterError(f"GridSpec: delta deve estar em (0, {span:g}] (obtido {self.delta})")

    @property
    def points_per_axis(self) -> int:
        span = self.upper[0] - self.lower[0]
        # tolerância para 2/0.05 não cair em 39.999...
        return int(math.floor(span / self.delta + 1e-9)) + 1

    @property
    def size(self) -> int:
        return self.points_per_axis ** 2


@dataclass(frozen=True)
class IterationPolicy:
    """Critério de Cauchy ‖x^{m+1} − x^m‖ < ε com teto de max_iters passos."""
    epsilon: float = 1e-5
    max_iters: int = 50

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon deve ser > 0 (obtido {self.epsilon})")
        if int(self.max_iters) < 1:
            raise ParameterError(f"max_iters deve ser ≥ 1 (obtido {self.max_iters})")


class IterationStatus(str, Enum):
    CONVERGED = "converged"
    UNRESOLVED = "unresolved"


@dataclass
class IterationResult:
    start: np.ndarray
    status: IterationStatus
    limit: np.ndarray  # válido só quando CONVERGED
    steps: int

    @property
    def converged(self) -> bool:
        return self.status is IterationStatus.CONVERGED


@dataclass
class FixedPoint:
    """Ponto fixo deduplicado x*_k e a bacia Ω_k correspondente."""
    position: np.ndarray
    residual: float  # ‖Φ(x*) − x*‖₂
    basin_size: int
    out_of_domain: bool = False
    unstable_suspect: bool = False

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "position": [float(v) for v in self.position],
            "residual": float(self.residual),
            "basin_size": int(self.basin_size),
        }
        if self.out_of_domain:
            d["out_of_domain"] = True
        if self.unstable_suspect:
            d["unstable_suspect"] = True
        return d


@dataclass
class FixedPointReport:
    """Resultado de find_fixed_points sobre toda a grade."""
    grid: GridSpec
    fixed_points: list[FixedPoint]
    labels: np.ndarray      # por ponto da grade; UNRESOLVED se não convergiu
    steps: np.ndarray       # passos m por ponto da grade
    limits: np.ndarray      # limite por ponto (NaN quando não convergiu)
    cluster_radius: float = 1e-3

    @property
    def q(self) -> int:
        return len(self.fixed_points)

    @property
    def converged(self) -> np.ndarray:
        return self.labels != UNRESOLVED

    @property
    def unresolved_count(self) -> int:
        return int(np.count_nonzero(self.labels == UNRESOLVED))

    @property
    def unresolved_fraction(self) -> float:
        return self.unresolved_count / max(len(self.labels), 1)

    def to_dict(self, *, include_basins: bool = False) -> dict[str, Any]:
        d: dict[str, Any] = {
            "q": self.q,
            "fixed_points": [fp.to_dict() for fp in self.fixed_points],
            "unresolved": self.unresolved_count,
            "grid_points": int(len(self.labels)),
            "delta": self.grid.delta,
            "cluster_radius": self.cluster_radius,
        }
        if include_basins:
            d["labels"] = [int(v) for v in self.labels]
        return d


# ── Contração ───────────────────────────────────────────────────────────

@dataclass
class ContractionSample:
    beta: float
    width_N: int
    depth_L: int
    activation: ActivationKind
    g: float
    seed: Seed

    def __post_init__(self) -> None:
        if not (self.g >= 0 and math.isfinite(self.g)):
            raise ParameterError(f"g deve ser finito e ≥ 0 (obtido {self.g})")


@dataclass
class ContractionCurve:
    """Amostras g(β) e β_cr estimado (None quando a curva não cruza 1)."""
    samples: list[ContractionSample]
    betas: list[float]
    mean_g: list[float]
    beta_cr: Optional[float] = None
    diagnostic: str = ""

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "beta_cr": self.beta_cr,
            "curve": [{"beta": b, "mean_g": g} for b, g in zip(self.betas, self.mean_g)],
        }
        if self.diagnostic:
            d["diagnostic"] = self.diagnostic
        return d


@dataclass
class DepthFit:
    """Ajuste por mínimos quadrados de log g vs L (g = g₀^L)."""
    slope: float
    intercept: float
    r_squared: float

    @property
    def g0(self) -> float:
        return math.exp(self.slope)


@dataclass
class DepthCurve:
    depths: list[int]
    mean_g: list[float]
    samples: list[ContractionSample]
    fit: Optional[DepthFit] = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "curve": [{"L": L, "mean_g": g} for L, g in zip(self.depths, self.mean_g)],
        }
        if self.fit is not None:
            d["fit"] = {
                "slope": self.fit.slope,
                "intercept": self.fit.intercept,
                "r_squared": self.fit.r_squared,
                "g0": self.fit.g0,
            }
        return d


@dataclass
class LayerStats:
    preactivation_variance: float
    width_N: int
    sigma: float
    n_samples: int = 0

    @property
    def expected_variance(self) -> float:
        """Previsão do TCL: (N + 1)σ²."""
        return (self.width_N + 1) * self.sigma ** 2


# ── Varredura ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SweepConfig:
    width_N0: int = 100
    depths: tuple[int, ...] = (2, 3, 4, 5, 6, 8, 10, 14, 20)
    family: DistributionSpec = field(default_factory=lambda: DistributionSpec(Family.CAUCHY))
    activation: ActivationKind = ActivationKind.TANH
    n_seeds: int = 100
    grid: GridSpec = field(default_factory=GridSpec)
    policy: IterationPolicy = field(default_factory=IterationPolicy)
    cluster_radius: float = 1e-3
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_seeds < 1:
            raise ParameterError("n_seeds deve ser ≥ 1")
        if not self.depths:
            raise ParameterError("lista de profundidades vazia")
        if any(int(d) < 1 for d in self.depths):
            raise ParameterError("profundidades devem ser ≥ 1")
        object.__setattr__(self, "depths", tuple(int(d) for d in self.depths))


@dataclass
class SweepCell:
    """Uma célula (profundidade, semente) da varredura."""
    depth: int
    seed_index: int
    seed: Seed
    q: int
    unresolved_fraction: float
    failed: bool = False
    report: Optional[FixedPointReport] = None


@dataclass
class DepthSummary:
    depth: int
    histogram: dict[int, int]
    mode: int
    mean: float
    unresolved_fraction: float
    n_failed: int = 0
    unresolved_seeds: int = 0  # sementes com Q = 0, fora da moda


@dataclass
class SweepReport:
    config: SweepConfig
    cells: list[SweepCell]
    per_depth: list[DepthSummary]


# ── Treino ──────────────────────────────────────────────────────────────

@dataclass
class DiscClass:
    """Classe k: centro x*_k ("foto verdadeira"), raio e pontos T_k."""
    center: np.ndarray
    radius: float
    points: np.ndarray  # (m, 2); a linha 0 é o próprio centro


@dataclass
class TrainingSet:
    classes: list[DiscClass]

    @property
    def k(self) -> int:
        return len(self.classes)

    def stacked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(pontos, alvos, índice da classe) empilhados na ordem das classes."""
        xs = np.vstack([c.points for c in self.classes])
        targets = np.vstack([np.broadcast_to(c.center, c.points.shape) for c in self.classes])
        owner = np.concatenate([np.full(len(c.points), i) for i, c in enumerate(self.classes)])
        return xs, targets, owner


@dataclass(frozen=True)
class TrainConfig:
    widths: tuple[int, ...] = (2, 100, 100, 2)
    activation: ActivationKind = ActivationKind.HARDTANH
    output_activation: ActivationKind = ActivationKind.IDENTITY
    learning_rate: float = 0.01
    batch_size: int = 16
    max_epochs: int = 5000
    target_loss: float = 1e-4
    divergence_threshold: float = 1e6
    # a cada refit_every épocas (e na última) a camada de saída afim é
    # reajustada por mínimos quadrados; 0 desliga
    refit_every: int = 250
    init: DistributionSpec = field(
        default_factory=lambda: DistributionSpec(Family.GAUSS, ScaleRule.INVERSE_SQRT_DEPTH)
    )
    seed: Seed = field(default_factory=lambda: Seed(0))

    def __post_init__(self) -> None:
        if not self.learning_rate >= 0:
            raise ParameterError("learning_rate deve ser ≥ 0")
        if self.max_epochs < 1:
            raise ParameterError("max_epochs deve ser ≥ 1")
        if self.batch_size < 1:
            raise ParameterError("batch_size deve ser ≥ 1")
        if self.refit_every < 0:
            raise ParameterError("refit_every deve ser ≥ 0")
        if len(self.widths) < 2 or self.widths[0] != self.widths[-1]:
            raise ShapeError("larguras do autoencoder (n_0 vs n_L)",
                             self.widths[0] if self.widths else 0,
                             self.widths[-1] if self.widths else 0)
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))


@dataclass
class LayerGradient:
    """∂L/∂W^l e ∂L/∂b^l, com as mesmas formas da camada."""
    weights: np.ndarray
    bias: np.ndarray


@dataclass
class TrainTrace:
    loss_history: list[float]  # índice 0 = perda antes da primeira época
    network: Network
    epochs_run: int
    stopped_reason: str  # "target_loss" | "max_epochs" | "divergence"


@dataclass
class ClassVerification:
    center: np.ndarray
    fixed_point_index: int   # ponto fixo mais próximo do centro (-1 se Q = 0)
    center_distance: float
    own_basin_fraction: float  # fração de T_k cuja iteração cai no ponto fixo da classe

    def to_dict(self) -> dict[str, Any]:
        return {
            "center": [float(v) for v in self.center],
            "fixed_point_index": self.fixed_point_index,
            "center_distance": self.center_distance if math.isfinite(self.center_distance) else None,
            "own_basin_fraction": self.own_basin_fraction,
        }


@dataclass
class VerificationReport:
    report: FixedPointReport
    classes: list[ClassVerification]
    tolerance: float

    @property
    def q_matches_k(self) -> bool:
        return self.report.q == len(self.classes)

    @property
    def centers_matched(self) -> bool:
        idx = [c.fixed_point_index for c in self.classes]
        return (
            all(c.center_distance <= self.tolerance for c in self.classes)
            and len(set(idx)) == len(idx)
        )

    @property
    def contained(self) -> bool:
        """T_k ⊂ Ω_k para toda classe."""
        return all(c.own_basin_fraction == 1.0 for c in self.classes)

    @property
    def passed(self) -> bool:
        return self.q_matches_k and self.centers_matched and self.contained

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "q": self.report.q,
            "k": len(self.classes),
            "tolerance": self.tolerance,
            "q_matches_k": self.q_matches_k,
            "centers_matched": self.centers_matched,
            "contained": self.contained,
            "classes": [c.to_dict() for c in self.classes],
            "fixed_points": [fp.to_dict() for fp in self.report.fixed_points],
        }
