"""Escrita dos artefatos de uma execução e do manifest.json.

CSV e JSON saem byte a byte iguais para a mesma configuração; data, hora e
tempo de execução ficam só no manifest.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

TOOL = "pontosfixos"
VERSION = "0.1.0"


def _default(obj: Any) -> Any:
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"tipo não serializável: {type(obj).__name__}")


def dumps(data: Any) -> str:
    return json.dumps(data, ensure_ascii=False, indent=2, allow_nan=False, default=_default) + "\n"


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class ArtifactWriter:
    """Grava arquivos em output_dir e lembra a ordem em que foram escritos."""
    output_dir: Path
    written: list[Path] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.output_dir = Path(self.output_dir)

    def _path(self, name: str) -> Path:
        path = self.output_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self._path(name)
        path.write_text(text, encoding="utf-8", newline="\n")
        self.written.append(path)
        return path

    def write_json(self, name: str, data: Any) -> Path:
        return self.write_text(name, dumps(data))

    def write_csv(self, name: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        return self.write_text(name, csv_text(columns, rows))

    def write_manifest(
        self,
        *,
        command: str,
        config: dict[str, Any],
        jobs: int,
        started: str,
        finished: str,
        wall_time_s: float,
        extra: dict[str, Any] | None = None,
    ) -> Path:
        manifest = {
            "tool": TOOL,
            "version": VERSION,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "command": command,
            "jobs": jobs,
            "started": started,
            "finished": finished,
            "wall_time_s": round(wall_time_s, 3),
            "config": config,
            "artifacts": [
                {"file": p.relative_to(self.output_dir).as_posix(), "sha256": sha256_file(p)}
                for p in self.written
            ],
        }
        if extra:
            manifest.update(extra)
        path = self._path("manifest.json")
        path.write_text(dumps(manifest), encoding="utf-8", newline="\n")
        return path
