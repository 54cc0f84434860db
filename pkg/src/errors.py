"""Hierarquia de exceções do laboratório.

Cada classe carrega o código de saída usado pelo CLI (run.py / validate.py).
"""

from __future__ import annotations

from typing import Any


class LabError(Exception):
    """Erro base; exit_code é o código devolvido pelo CLI."""
    exit_code: int = 1
    kind: str = "erro"

    def to_json(self) -> dict[str, Any]:
        return {
            "error": self.kind,
            "message": str(self),
            "exit_code": self.exit_code,
        }


# ── Erros de domínio ────────────────────────────────────────────────────

class ParameterError(LabError, ValueError):
    """Parâmetro numérico fora do domínio (σ ≤ 0, δ ≤ 0, larguras vazias...)."""
    exit_code = 3
    kind = "parametro"


class ShapeError(ParameterError):
    """Dimensões incompatíveis; a mensagem cita o esperado e o obtido."""
    kind = "dimensao"

    def __init__(self, what: str, expected: int | tuple, actual: int | tuple):
        super().__init__(f"{what}: esperado {expected}, obtido {actual}")
        self.expected = expected
        self.actual = actual


class PackingError(ParameterError):
    """Não foi possível posicionar os discos com a separação exigida."""
    kind = "empacotamento"


class NumericalError(LabError, ArithmeticError):
    """Valores não finitos (overflow) durante um cálculo."""
    exit_code = 4
    kind = "numerico"


class DivergenceError(NumericalError):
    """Treino divergiu (perda > limite); o trace parcial fica anexado."""
    kind = "divergencia"

    def __init__(self, message: str, trace: Any = None):
        super().__init__(message)
        self.trace = trace


# ── Erros de configuração ───────────────────────────────────────────────

class ConfigError(LabError):
    """Arquivo de configuração ilegível ou malformado."""
    exit_code = 2
    kind = "config"


class ConfigValidationError(LabError):
    """Configuração lida, mas viola pré-condições dos módulos."""
    exit_code = 3
    kind = "validacao"

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report

    def to_json(self) -> dict[str, Any]:
        d = super().to_json()
        if self.report is not None:
            d["issues"] = self.report.to_json()
        return d
