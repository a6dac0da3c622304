"""Plot-ready tables derived from a finished run directory."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from pathlib import Path

from scatterlab.harness.io import read_csv, write_csv, write_json

PLOT_DIR = "plots"
CHANNEL_SAMPLE = 8


class MissingArtifact(FileNotFoundError):
    pass


def _need(run_dir: Path, name: str) -> Path:
    path = run_dir / name
    if not path.exists():
        raise MissingArtifact(name)
    return path


def _focus_map(run_dir: Path, out: Path) -> None:
    rows = read_csv(_need(run_dir, "focus_map.csv"))
    side = math.isqrt(len(rows))
    if side * side == len(rows):
        # square channel count: lay the camera bins out as a side x side map
        table = ((int(r["channel"]) // side, int(r["channel"]) % side, r["signal"]) for r in rows)
        write_csv(out, ["row", "col", "signal"], table)
    else:
        write_csv(out, ["channel", "signal"], ((r["channel"], r["signal"]) for r in rows))


def _copy(run_dir: Path, name: str, columns: list[str], out: Path) -> None:
    rows = read_csv(_need(run_dir, name))
    write_csv(out, columns, ([r[c] for c in columns] for r in rows))


def _intervals(run_dir: Path, out: Path) -> None:
    rows = read_csv(_need(run_dir, "interval_table.csv"))
    verdicts = json.loads(_need(run_dir, "verdicts.json").read_text())
    verdict = {v["pair"]: v["verdict"] for v in verdicts["pairs"]}
    table = []
    for r in rows:
        pair = int(r["pair"])
        for member in ("first", "second"):
            table.append((pair, r["operator"], member, r[f"{member}_lo"], r[f"{member}_hi"], verdict[pair]))
    write_csv(out, ["pair", "operator", "spectrum", "lo", "hi", "verdict"], table)


def _modulation(run_dir: Path, out: Path) -> None:
    rows = read_csv(_need(run_dir, "frames.csv"))
    table = [
        (r["channel"], float(r["phase_index"]) * 0.5 * math.pi, r["intensity"])
        for r in rows
        if r["kind"] == "pair" and int(r["channel"]) < CHANNEL_SAMPLE
    ]
    table.sort(key=lambda t: (int(t[0]), t[1]))
    write_csv(out, ["channel", "phase", "intensity"], table)


def _complex_plane(run_dir: Path, out: Path) -> None:
    rows = read_csv(_need(run_dir, "complex_b_pairs.csv"))
    write_csv(
        out,
        ["a", "b", "channel", "re", "im"],
        ((r["a"], r["b"], r["channel"], r["re"], r["im"]) for r in rows if int(r["channel"]) < CHANNEL_SAMPLE),
    )


def _accuracy(run_dir: Path, out: Path) -> None:
    rows = read_csv(_need(run_dir, "accuracy_matrix.csv"))
    probes = sorted({r["probe"] for r in rows})
    grid = defaultdict(dict)
    for r in rows:
        grid[r["representation"]][r["probe"]] = r["accuracy"]
    write_csv(out, ["representation"] + probes, ([rep] + [grid[rep].get(p, "") for p in probes] for rep in grid))


TABLES = {
    "tm": {
        "focus_map.csv": _focus_map,
        "enhancement_vs_modes.csv": lambda d, o: _copy(
            d, "enhancement_vs_modes.csv", ["modes", "mean_enhancement", "max_enhancement", "oracle_enhancement"], o
        ),
        "geometry_screen.csv": lambda d, o: _copy(d, "geometry_screen.csv", ["geometry", "enhancement", "best"], o),
    },
    "coherence": {"intervals.csv": _intervals},
    "bilinear": {
        "modulation.csv": _modulation,
        "complex_plane.csv": _complex_plane,
        "accuracy_matrix.csv": _accuracy,
    },
}


def emit_plot_data(run_dir: str | Path) -> dict[str, str]:
    """Write the figure tables for a run into ``<run_dir>/plots``.

    Returns ``{table: status}``; a table whose source artifact is absent gets
    ``"missing: <artifact>"`` instead of failing the whole emission.
    """
    run_dir = Path(run_dir)
    config = json.loads(_need(run_dir, "config.json").read_text())
    out_dir = run_dir / PLOT_DIR
    out_dir.mkdir(exist_ok=True)
    status = {}
    for name, build in TABLES[config["study"]].items():
        try:
            build(run_dir, out_dir / name)
            status[name] = "ok"
        except MissingArtifact as exc:
            status[name] = f"missing: {exc}"
    write_json(out_dir / "manifest.json", status)
    return status
