#!/usr/bin/env python3
"""validate.py — Confere um arquivo de experimento sem calcular nada.

Lista as grandezas derivadas (pontos da grade, sementes, escala por camada)
e os problemas encontrados. Mesmos códigos de saída de run.py.
"""

from __future__ import annotations

import argparse
import io
import json
import sys

# Fix Windows console encoding
if sys.stdout.encoding != "utf-8":
    sys.stdout = io.TextIOWrapper(
        sys.stdout.buffer, encoding="utf-8", errors="replace"
    )

from src.config import build_diagnostics, load_experiment
from src.errors import ConfigValidationError, LabError


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Valida um arquivo TOML de experimento")
    parser.add_argument("config", help="Arquivo TOML do experimento")
    parser.add_argument(
        "--set", action="append", default=[], metavar="SECAO.CHAVE=VALOR",
        help="Sobrescreve uma chave do TOML (pode repetir)",
    )
    parser.add_argument("--json", action="store_true", help="Imprime o relatório em JSON")
    args = parser.parse_args(argv)

    try:
        cfg = load_experiment(args.config, args.set)
        report = build_diagnostics(cfg)
    except LabError as e:
        print(json.dumps(e.to_json(), ensure_ascii=False), file=sys.stderr)
        return e.exit_code

    if args.json:
        print(json.dumps({"command": cfg.command, "issues": report.to_json()}, ensure_ascii=False, indent=2))
    else:
        report.print_report()

    if report.errors:
        first = report.errors[0]
        err = ConfigValidationError(f"{first.category}: {first.message}", report=report)
        if not args.json:
            print(json.dumps(err.to_json(), ensure_ascii=False), file=sys.stderr)
        return err.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
