"""Small helpers shared by the experiment scripts."""

from __future__ import annotations

import csv
import json
from pathlib import Path


def out_dir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_rows(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def pyplot():
    """matplotlib's pyplot on a file backend, or None when it is not installed."""
    try:
        import matplotlib
    except ImportError:
        print("matplotlib not installed; skipping the figure")
        return None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt
