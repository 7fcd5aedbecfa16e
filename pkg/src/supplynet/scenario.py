"""Scenario files and the end-to-end pipeline that turns one into an output bundle.

A scenario is a YAML document with a ``schema_version`` key. Validation
collects every problem it finds, each tagged with the line it came from.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .demand import DemandPmf, demand_from_spec
from .errors import (
    BomMismatch,
    BoundsError,
    CycleError,
    NonPositiveCost,
    ParseError,
    PipelineError,
    SchemaError,
    UnknownFirm,
)
from .network import Network, build_network, validate_costs
from .propagation import PropagationConfig, PropagationResult, propagate
from .simulator import POLICY_MODES, SHOCK_KINDS, Shock, SimTrace, Simulator, ledger_csv, summarize, trace_csv
from .solver import PolicyTable, SolverInstance, ThresholdSchedule, compute_policy

SCHEMA_VERSION = 1
BOUNDS_MODES = ("strict", "auto")
PRESET_DIR = Path(__file__).parent / "presets"
PRESETS = ("ideal", "outage", "demand_shock")


@dataclass(frozen=True)
class Scenario:
    name: str
    network: Network
    demand: dict[int, Any]  # distributor id -> demand source
    solver_horizon: int
    bounds_mode: str
    propagation: PropagationConfig
    steps: int
    seed: int
    policy_mode: str
    shocks: tuple[Shock, ...]
    output: Path | None = None

    def distributor_pmfs(self) -> dict[int, DemandPmf]:
        return {i: src.pmf() for i, src in self.demand.items()}

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)


def preset_path(name: str) -> Path:
    return PRESET_DIR / f"{name}.scn"


# -- parsing -----------------------------------------------------------------

def _line_map(node: yaml.Node, path: tuple = (), out: dict | None = None) -> dict[tuple, int]:
    """Map every key path in the document to its 1-based source line."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_map(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


class _Problems:
    def __init__(self, lines: dict[tuple, int]):
        self.lines = lines
        self.items: list[str] = []
        self.unknown_firm = False

    def add(self, path: tuple, msg: str, unknown_firm: bool = False) -> None:
        p = path
        while p not in self.lines and p:
            p = p[:-1]
        where = ".".join(str(x) for x in path) or "<root>"
        self.items.append(f"line {self.lines.get(p, 1)}: {where}: {msg}")
        self.unknown_firm |= unknown_firm

    def raise_if_any(self) -> None:
        if self.items:
            raise (UnknownFirm if self.unknown_firm else SchemaError)(self.items)


def _int(doc: Mapping, key: str, path: tuple, probs: _Problems, default=None, minimum=None):
    v = doc.get(key, default)
    if v is None:
        probs.add(path + (key,), "required integer is missing")
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        probs.add(path + (key,), f"expected an integer, got {v!r}")
        return None
    if minimum is not None and v < minimum:
        probs.add(path + (key,), f"must be >= {minimum}, got {v}")
        return None
    return v


def _section(doc: Mapping, key: str, probs: _Problems, required: bool = True) -> dict:
    v = doc.get(key)
    if v is None:
        if required:
            probs.add((key,), "section is missing")
        return {}
    if not isinstance(v, Mapping):
        probs.add((key,), "expected a mapping")
        return {}
    return dict(v)


def parse_scenario_text(text: str, source: str = "<string>") -> Scenario:
    try:
        node = yaml.compose(text)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"{source}: {exc}") from None
    if not isinstance(doc, Mapping):
        raise ParseError(f"{source}: top level must be a mapping")
    probs = _Problems(_line_map(node))

    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        probs.add(("schema_version",), f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        probs.raise_if_any()

    net_doc = _section(doc, "network", probs)
    firms = net_doc.get("firms")
    net = None
    if not isinstance(firms, list) or not firms:
        probs.add(("network", "firms"), "expected a non-empty list of firms")
    else:
        names = [f.get("name") if isinstance(f, Mapping) else None for f in firms]
        for idx, f in enumerate(firms):
            if not isinstance(f, Mapping) or not isinstance(f.get("name"), str):
                probs.add(("network", "firms", idx), "each firm needs a string name")
            elif isinstance(f.get("bom"), Mapping):
                for good in f["bom"]:
                    if good not in names:
                        probs.add(("network", "firms", idx, "bom", good), f"unknown firm {good!r}", True)
        if not probs.items:
            try:
                net = build_network(net_doc)
            except (BomMismatch, BoundsError, CycleError, NonPositiveCost) as exc:
                probs.add(("network",), f"{type(exc).__name__}: {exc}")
            except (TypeError, ValueError, KeyError) as exc:
                probs.add(("network",), f"malformed firm entry: {exc}")
    probs.raise_if_any()
    assert net is not None
    name_idx = {f.name: f.id for f in net.firms}

    demand: dict[int, Any] = {}
    dem_doc = _section(doc, "demand", probs)
    for key, spec in dem_doc.items():
        if key not in name_idx:
            probs.add(("demand", key), f"unknown firm {key!r}", True)
            continue
        if not net.is_distributor(name_idx[key]):
            probs.add(("demand", key), f"{key} is not a distributor")
            continue
        try:
            demand[name_idx[key]] = demand_from_spec(spec)
        except SchemaError as exc:
            probs.add(("demand", key, "kind"), str(exc))
        except (TypeError, ValueError, KeyError) as exc:
            probs.add(("demand", key), f"bad demand spec: {exc}")
    for i in net.distributors:
        if i not in demand and net.firms[i].name not in dem_doc:
            probs.add(("demand",), f"distributor {net.firms[i].name} has no demand entry")

    sol = _section(doc, "solver", probs)
    horizon = _int(sol, "horizon", ("solver",), probs, minimum=1)
    bounds_mode = sol.get("bounds_mode", "strict")
    if bounds_mode not in BOUNDS_MODES:
        probs.add(("solver", "bounds_mode"), f"must be one of {BOUNDS_MODES}")

    prop = _section(doc, "propagation", probs, required=False)
    reps = _int(prop, "replicates", ("propagation",), probs, default=200, minimum=1)
    p_h = _int(prop, "horizon", ("propagation",), probs, default=250, minimum=1)
    warm = prop.get("warmup")
    if warm is not None:
        warm = _int(prop, "warmup", ("propagation",), probs, minimum=0)
        if warm is not None and p_h is not None and warm >= p_h:
            probs.add(("propagation", "warmup"), "warmup must be smaller than the propagation horizon")
    p_seed = _int(prop, "seed", ("propagation",), probs, default=0)

    sim = _section(doc, "simulation", probs)
    steps = _int(sim, "steps", ("simulation",), probs, minimum=1)
    seed = _int(sim, "seed", ("simulation",), probs, default=0)
    mode = sim.get("policy_mode", "receding")
    if mode not in POLICY_MODES:
        probs.add(("simulation", "policy_mode"), f"must be one of {POLICY_MODES}")

    shocks = []
    raw_shocks = doc.get("shocks") or []
    if not isinstance(raw_shocks, list):
        probs.add(("shocks",), "expected a list")
        raw_shocks = []
    for idx, sh in enumerate(raw_shocks):
        path = ("shocks", idx)
        if not isinstance(sh, Mapping):
            probs.add(path, "expected a mapping")
            continue
        kind = sh.get("kind")
        if kind not in SHOCK_KINDS:
            probs.add(path + ("kind",), f"must be one of {SHOCK_KINDS}")
            continue
        firm = sh.get("firm")
        if firm not in name_idx:
            probs.add(path + ("firm",), f"unknown firm {firm!r}", True)
            continue
        start = _int(sh, "start", path, probs, minimum=0)
        end = _int(sh, "end", path, probs, minimum=0)
        if start is None or end is None:
            continue
        if start > end:
            probs.add(path, f"window [{start}, {end}] is empty")
            continue
        if steps is not None and end >= steps:
            probs.add(path + ("end",), f"window must lie inside [0, {steps})")
            continue
        delta = sh.get("delta", 0.0)
        revert = sh.get("revert_at")
        if kind == "demand_shift":
            if not net.is_distributor(name_idx[firm]):
                probs.add(path + ("firm",), "demand_shift must target a distributor")
                continue
            if isinstance(delta, bool) or not isinstance(delta, (int, float)):
                probs.add(path + ("delta",), "expected a number")
                continue
            if revert is not None:
                revert = _int(sh, "revert_at", path, probs)
                if revert is not None and revert <= end:
                    probs.add(path + ("revert_at",), "must be after the window end")
                    continue
        shocks.append(Shock(kind, name_idx[firm], start, end, float(delta), revert))

    out = doc.get("output")
    if out is not None and not isinstance(out, str):
        probs.add(("output",), "expected a directory path")
    probs.raise_if_any()

    return Scenario(
        name=str(doc.get("name", Path(source).stem)),
        network=net,
        demand=demand,
        solver_horizon=horizon,
        bounds_mode=bounds_mode,
        propagation=PropagationConfig(reps, p_h, warm, p_seed),
        steps=steps,
        seed=seed,
        policy_mode=mode,
        shocks=tuple(shocks),
        output=Path(out) if out else None,
    )


def parse_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return parse_scenario_text(text, str(path))


# -- pipeline stages -----------------------------------------------------------

def run_propagation(s: Scenario, workers: int = 1) -> PropagationResult:
    return propagate(s.network, s.distributor_pmfs(), s.solver_horizon, s.propagation,
                     workers=workers, raise_upper=s.bounds_mode == "auto")


def apply_raised_upper(net: Network, raised: Mapping[int, int]) -> Network:
    if not raised:
        return net
    return net.with_params({i: replace(net.firms[i].params, inv_upper=u) for i, u in raised.items()})


def solve_all(s: Scenario, pmfs: Mapping[int, DemandPmf]) -> tuple[dict[int, PolicyTable], dict[int, int]]:
    """Solve every firm against the given pmfs, lifting upper bounds in ``auto`` mode."""
    policies, raised = {}, {}
    for f in s.network.firms:
        params = f.params
        need = params.inv_lower + pmfs[f.id].support_max
        if s.bounds_mode == "auto" and params.inv_upper < need:
            params = replace(params, inv_upper=need)
            raised[f.id] = need
        policies[f.id] = compute_policy(SolverInstance.from_params(params, pmfs[f.id], s.solver_horizon))
    return policies, raised


def simulate(s: Scenario, policies: Mapping[int, Any], raised: Mapping[int, int] | None = None) -> SimTrace:
    net = apply_raised_upper(s.network, raised or {})
    return Simulator(net, policies, s.demand, s.shocks, s.policy_mode).run(s.steps, s.seed)


# -- bundle files --------------------------------------------------------------

def _json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def network_json(s: Scenario) -> str:
    net = s.network
    d = net.to_dict()
    d["echelons"] = {f.name: net.echelons[f.id] for f in net.firms}
    d["distributors"] = [net.firms[i].name for i in net.distributors]
    d["cost_warnings"] = [w.message for w in validate_costs(net).warnings]
    return _json(d)


def pmfs_csv(net: Network, pmfs: Mapping[int, DemandPmf]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["firm", "value", "probability"])
    for f in net.firms:
        p = pmfs[f.id]
        for v, prob in zip(p.values, p.probs):
            if prob > 0:
                w.writerow([f.name, int(v), repr(float(prob))])
    return buf.getvalue()


def read_pmfs_csv(net: Network, text: str) -> dict[int, DemandPmf]:
    rows: dict[int, dict[int, float]] = {}
    for row in csv.DictReader(io.StringIO(text)):
        rows.setdefault(net.index(row["firm"]), {})[int(row["value"])] = float(row["probability"])
    out = {}
    for i, probs in rows.items():
        lo, hi = min(probs), max(probs)
        arr = np.zeros(hi - lo + 1)
        for v, p in probs.items():
            arr[v - lo] = p
        out[i] = DemandPmf(lo, arr)
    return out


THRESHOLD_COLUMNS = ["firm", "stage", "threshold", "case", "band_low", "band_high",
                     "F_band_low", "F_band_high", "G_band_low", "G_band_high"]


def thresholds_csv(net: Network, policies: Mapping[int, PolicyTable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(THRESHOLD_COLUMNS)
    for f in net.firms:
        for st in policies[f.id].report()["stages"]:
            w.writerow([f.name, st["stage"], st["threshold"], st["case"], st["band"][0], st["band"][1],
                        repr(st["F_band_low"]), repr(st["F_band_high"]),
                        repr(st["G_band_low"]), repr(st["G_band_high"])])
    return buf.getvalue()


def read_thresholds_csv(net: Network, text: str) -> tuple[dict[int, ThresholdSchedule], dict[int, int]]:
    """Cached thresholds plus the upper bounds they were solved with."""
    stages: dict[int, list[tuple[int, int]]] = {}
    uppers: dict[int, int] = {}
    for row in csv.DictReader(io.StringIO(text)):
        i = net.index(row["firm"])
        stages.setdefault(i, []).append((int(row["stage"]), int(row["threshold"])))
        uppers[i] = int(row["band_high"])
    policies = {i: ThresholdSchedule(tuple(m for _, m in sorted(v))) for i, v in stages.items()}
    raised = {i: u for i, u in uppers.items() if u != net.firms[i].params.inv_upper}
    return policies, raised


def propagation_json(net: Network, result: PropagationResult) -> str:
    diag = {net.firms[i].name: d for i, d in sorted(result.diagnostics.items())}
    raised = {net.firms[i].name: u for i, u in result.raised_upper.items()}
    return _json({"diagnostics": diag, "raised_upper": raised})


def write_text(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    p.write_text(text)
    return p


def output_dir(s: Scenario, override: str | Path | None = None) -> Path:
    if override is not None:
        return Path(override)
    return s.output if s.output is not None else Path("out") / s.name


def write_propagation(s: Scenario, out: Path, result: PropagationResult) -> None:
    write_text(out, "network.json", network_json(s))
    write_text(out, "pmfs.csv", pmfs_csv(s.network, result.pmfs))
    write_text(out, "propagation.json", propagation_json(s.network, result))
    write_text(out, "thresholds.csv", thresholds_csv(s.network, result.policies))


def write_simulation(s: Scenario, out: Path, trace: SimTrace) -> None:
    net = s.network
    write_text(out, "trace.csv", trace_csv(net, trace))
    write_text(out, "ledger.csv", ledger_csv(net, trace))
    summary = summarize(net, trace)
    summary["scenario"] = s.name
    summary["seed"] = s.seed
    summary["shocks"] = [dict(sh.to_dict(), firm=net.firms[sh.firm].name) for sh in s.shocks]
    write_text(out, "summary.json", _json(summary))


def run_scenario(s: Scenario, out: str | Path | None = None, workers: int = 1) -> Path:
    """validate, propagate (solving every firm), simulate, and write the full bundle."""
    out = output_dir(s, out)
    stage = "propagate"
    try:
        result = run_propagation(s, workers)
        write_propagation(s, out, result)
        stage = "simulate"
        trace = simulate(s, result.policies, result.raised_upper)
        write_simulation(s, out, trace)
    except SchemaError:
        raise
    except Exception as exc:
        raise PipelineError(stage, exc) from exc
    return out

