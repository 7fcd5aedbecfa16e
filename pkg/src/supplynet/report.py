"""Plot-ready long-format CSV files built from one or more output bundles."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

FIGURES = ("fig_inventory.csv", "fig_fulfillment.csv", "fig_costs.csv")


def _rows(path: Path) -> list[dict[str, str]]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def _bundle_name(d: Path) -> str:
    summary = d / "summary.json"
    if summary.exists():
        return str(json.loads(summary.read_text()).get("scenario", d.name))
    return d.name


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def build_reports(bundles: Sequence[str | Path], out: str | Path) -> list[Path]:
    """Write inventory, fulfillment and cumulative-cost tables for every bundle."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    inv, ful, cost = [], [], []
    for d in map(Path, bundles):
        name = _bundle_name(d)
        lower = {}
        net_file = d / "network.json"
        if net_file.exists():
            for f in json.loads(net_file.read_text())["firms"]:
                lower[f["name"]] = f["bounds"]["lower"]
        for r in _rows(d / "trace.csv"):
            inv.append([name, r["k"], r["firm"], r["inv_out"], lower.get(r["firm"], "")])
            ful.append([name, r["k"], r["firm"], r["omega"], r["shipped"], r["shortage"]])
        for r in _rows(d / "ledger.csv"):
            cost.append([name, r["k"], r["firm"], r["cum_cost"]])
    written = []
    for fname, header, rows in (
        ("fig_inventory.csv", ["scenario", "k", "firm", "inv_out", "inv_lower"], inv),
        ("fig_fulfillment.csv", ["scenario", "k", "firm", "omega", "shipped", "shortage"], ful),
        ("fig_costs.csv", ["scenario", "k", "firm", "cum_cost"], cost),
    ):
        p = out / fname
        p.write_text(_csv(header, rows))
        written.append(p)
    return written
