#!/usr/bin/env python3
"""Executa um experimento descrito em TOML e grava artefatos + manifest.json.

Códigos de saída: 0 ok, 2 configuração ilegível, 3 configuração inválida,
4 falha numérica. Em caso de erro, um JSON {"error", "message", "exit_code"}
vai para stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
import time
from datetime import datetime, timezone

# Fix Windows console encoding
if sys.stdout.encoding != "utf-8":
    sys.stdout = io.TextIOWrapper(
        sys.stdout.buffer, encoding="utf-8", errors="replace"
    )

from src.config import load_experiment, validate_config
from src.errors import LabError
from src.experiments import run_experiment
from src.parallel import resolve_jobs


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description="Pontos fixos e contração de redes aleatórias: executa o experimento do arquivo TOML"
    )
    parser.add_argument("config", help="Arquivo TOML do experimento")
    parser.add_argument(
        "--jobs", type=int, default=None,
        help="Número de processos (padrão 1; limitado por $PONTOSFIXOS_JOBS)",
    )
    parser.add_argument(
        "--set", action="append", default=[], metavar="SECAO.CHAVE=VALOR",
        help="Sobrescreve uma chave do TOML (pode repetir)",
    )
    parser.add_argument("--output-dir", default=None, help="Diretório de saída (sobrescreve output_dir)")
    parser.add_argument("--quiet", action="store_true", help="Não imprime o progresso")
    args = parser.parse_args(argv)

    overrides = list(args.set)
    if args.output_dir is not None:
        overrides.append(f"output_dir={json.dumps(args.output_dir)}")

    try:
        cfg = load_experiment(args.config, overrides)
        validate_config(cfg)
        jobs = resolve_jobs(args.jobs)
        started, t0 = _now(), time.time()
        summary, writer = run_experiment(cfg, jobs=jobs, quiet=args.quiet)
        writer.write_manifest(
            command=cfg.command,
            config=cfg.to_dict(),
            jobs=jobs,
            started=started,
            finished=_now(),
            wall_time_s=time.time() - t0,
            extra={"summary": summary},
        )
    except LabError as e:
        print(json.dumps(e.to_json(), ensure_ascii=False), file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
