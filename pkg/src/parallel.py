"""Pool de processos com resultado na ordem das tarefas.

A ordem de retorno é sempre a ordem de `items`, então a redução feita pelo
chamador não depende do número de workers nem do escalonamento.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

from .errors import ParameterError

T = TypeVar("T")
R = TypeVar("R")

ENV_JOBS = "PONTOSFIXOS_JOBS"


def resolve_jobs(requested: int | None = None) -> int:
    """Número de workers: --jobs (padrão 1), limitado por $PONTOSFIXOS_JOBS."""
    jobs = 1 if requested is None else int(requested)
    if jobs < 1:
        raise ParameterError(f"--jobs deve ser ≥ 1 (obtido {jobs})")
    cap = os.environ.get(ENV_JOBS, "").strip()
    if cap:
        try:
            jobs = min(jobs, max(1, int(cap)))
        except ValueError:
            raise ParameterError(f"{ENV_JOBS} inválido: {cap!r}") from None
    return jobs


def map_ordered(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> list[R]:
    """[fn(x) for x in items], em paralelo quando jobs > 1."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items, chunksize=1))
