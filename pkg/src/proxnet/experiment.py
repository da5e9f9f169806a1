"""Replicate seeding, worker pools and the tabular result container."""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import __version__


def derive_seed(master: int, *coords: int) -> int:
    """64-bit replicate seed from a master seed and integer task coordinates.

    Counter-based: the seed depends only on ``(master, coords)``, never on
    the order in which tasks run.
    """
    if master is None or int(master) < 0:
        raise ValueError("master seed must be a non-negative integer")
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(c) for c in coords))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def pmap(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    """Order-preserving map, optionally over a process pool."""
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def mean_se(values: Iterable[float]) -> tuple[float, float]:
    v = np.asarray(list(values), dtype=float)
    if len(v) == 0:
        return math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else math.nan
    return float(v.mean()), se


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else None
    return v


@dataclass
class ExperimentResult:
    """Replicate-level rows plus a summary mapping."""

    kind: str
    columns: list[str]
    rows: list[dict]
    summary: dict = field(default_factory=dict)
    spec_fingerprint: str = ""
    tool_version: str = __version__

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def csv_text(self) -> str:
        lines = [",".join(self.columns)]
        for r in self.rows:
            lines.append(",".join(_cell(r.get(c)) for c in self.columns))
        return "\n".join(lines) + "\n"

    def summary_json(self) -> str:
        body = {"kind": self.kind, "spec_fingerprint": self.spec_fingerprint,
                "tool_version": self.tool_version, "summary": _jsonable(self.summary)}
        return json.dumps(body, indent=2, sort_keys=True, allow_nan=False) + "\n"

    def write(self, out_dir: str | Path, stem: str | None = None) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = stem or self.kind
        csv_path, json_path = out_dir / f"{stem}.csv", out_dir / f"{stem}.json"
        csv_path.write_text(self.csv_text(), encoding="utf-8")
        json_path.write_text(self.summary_json(), encoding="utf-8")
        return csv_path, json_path

    def rows_digest(self) -> str:
        return hashlib.sha256(self.csv_text().encode()).hexdigest()
