"""Report emission: deterministic JSON, CSV twins for every plotted series,
SVG plots, and the run manifest. Report JSON bytes are reproducible for
identical config + seeds; the manifest carries wall-clock times and is
excluded from that guarantee.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .config import canonical_json, config_hash

SCHEMA_VERSION = 1
ARTIFACT_VERSION = "0.1.0"


def write_json(path, payload: Dict[str, Any], cfg_raw: Optional[dict] = None,
               seed: Optional[int] = None) -> Path:
    doc = {"schema_version": SCHEMA_VERSION, "artifact_version": ARTIFACT_VERSION}
    if cfg_raw is not None:
        doc["config_hash"] = config_hash(cfg_raw)
        doc["config_canonical"] = json.loads(canonical_json(cfg_raw))
    if seed is not None:
        doc["seed"] = seed
    doc.update(payload)
    path = Path(path)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path


def write_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def write_svg_plot(path, series: Dict[str, Sequence], x_key: str, y_keys: Sequence[str],
                   title: str, xlabel: str, ylabel: str, hashsalt: str = "relbind") -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = hashsalt
    fig, ax = plt.subplots(figsize=(6, 4))
    for y in y_keys:
        ax.plot(series[x_key], series[y], marker="o", markersize=3, label=y)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    if len(y_keys) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


@dataclass
class RunManifest:
    subcommand: str
    config_hash: str
    seeds: Dict[str, int] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    artifact_version: str = ARTIFACT_VERSION

    def record(self, path) -> None:
        self.files.append(str(path))

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / "manifest.json"
        doc = {
            "subcommand": self.subcommand,
            "config_hash": self.config_hash,
            "seeds": self.seeds,
            "files": sorted(self.files),
            "timings": self.timings,
            "artifact_version": self.artifact_version,
        }
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
        return path


class StageTimer:
    def __init__(self, manifest: RunManifest, stage: str):
        self.manifest = manifest
        self.stage = stage

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.manifest.timings[self.stage] = time.perf_counter() - self._start
        return False
