"""Deterministic CSV/manifest output for batch experiment runs."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path


def format_float(x) -> str:
    """17-significant-digit float formatting (round-trip exact)."""
    return f"{float(x):.17g}"


def write_csv(path, header, rows) -> None:
    """Write rows of numbers (floats formatted at 17 significant digits)."""
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (int,)) and not isinstance(v, bool):
                cells.append(str(v))
            else:
                cells.append(format_float(v))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def write_grid_csv(path, times, grid, index_name="site") -> None:
    """Time-series grid in the `t,<index>,value` schema."""
    rows = []
    for t, row in zip(times, grid):
        for idx, v in enumerate(row):
            rows.append((t, idx, v))
    write_csv(path, ["t", index_name, "value"], rows)


def sha256_of(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


class RunManifest:
    """Collects config echo, timing, and per-output checksums."""

    def __init__(self, config: dict, out_dir, version: str):
        self.data = {
            "config": config,
            "code_version": version,
            "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "outputs": {},
            "results": {},
        }
        self.out_dir = Path(out_dir)

    def add_output(self, path) -> None:
        path = Path(path)
        self.data["outputs"][path.name] = sha256_of(path)

    def add_result(self, key, value) -> None:
        self.data["results"][key] = value

    def finish(self) -> Path:
        self.data["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        target = self.out_dir / "manifest.json"
        target.write_text(json.dumps(self.data, indent=2, sort_keys=True, default=str) + "\n")
        return target
