"""Regenerate the bundled preset scenarios in src/supplynet/presets/.

Topology: 15 firms v1..v15 over five echelons, two distributors (v14, v15),
binary bills of materials. Costs are one seeded draw from ``draw_costs``,
rounded to cents and frozen into the files.
"""
from pathlib import Path

import numpy as np
import yaml

from supplynet.network import build_network, draw_costs, validate_costs

# (supplier, customer)
EDGES = [
    (1, 4), (2, 5), (2, 6), (3, 6),
    (4, 7), (5, 8), (5, 9), (6, 9),
    (7, 10), (7, 11), (8, 12), (9, 13),
    (10, 14), (12, 14), (11, 15), (13, 15),
]
ECHELON_LOWER = {1: 0, 2: 0, 3: 50, 4: 70, 5: 80}
UPPER_HEADROOM = 250
INPUT_UPPER = 150
COST_SEED = 7
OUT = Path(__file__).resolve().parents[1] / "src" / "supplynet" / "presets"


def echelon(v: int) -> int:
    return 1 if v >= 14 else 2 if v >= 10 else 3 if v >= 7 else 4 if v >= 4 else 5


def firms() -> list[dict]:
    out = []
    for v in range(1, 16):
        lo = ECHELON_LOWER[echelon(v)]
        bounds = {"lower": lo, "upper": lo + UPPER_HEADROOM}
        bom = {f"v{a}": 1 for a, b in EDGES if b == v}
        if bom:
            bounds["input_upper"] = INPUT_UPPER
        out.append({"name": f"v{v}", "bom": bom,
                    "costs": {"production": 1.0, "shortage": 1.0, "holding": 1.0}, "bounds": bounds})
    net = build_network({"firms": out})
    params = draw_costs(net, np.random.default_rng(COST_SEED))
    assert validate_costs(net.with_params(params)).ok
    for i, f in enumerate(out):
        p = params[i]
        f["costs"] = {"production": p.production_cost, "shortage": p.shortage_penalty, "holding": p.holding_cost}
    return out


def scenario(name: str, shocks: list[dict]) -> dict:
    demand = {"kind": "normal", "mean": 32, "std": 4, "trunc_sigmas": 2}
    return {
        "schema_version": 1,
        "name": name,
        "network": {"firms": firms()},
        "demand": {"v14": dict(demand), "v15": dict(demand)},
        "solver": {"horizon": 8, "bounds_mode": "strict"},
        "propagation": {"replicates": 200, "horizon": 250, "warmup": 20, "seed": 0},
        "simulation": {"steps": 250, "seed": 0, "policy_mode": "receding"},
        "shocks": shocks,
        "output": f"out/{name}",
    }


PRESETS = {
    "ideal": [],
    "outage": [{"kind": "full_outage", "firm": "v1", "start": 100, "end": 150}],
    "demand_shock": [
        {"kind": "demand_shift", "firm": "v14", "start": 0, "end": 60, "delta": 2, "revert_at": 101},
        {"kind": "demand_shift", "firm": "v14", "start": 61, "end": 100, "delta": 1, "revert_at": 101},
        {"kind": "demand_shift", "firm": "v15", "start": 0, "end": 60, "delta": 2, "revert_at": 61},
    ],
}


class _Dumper(yaml.SafeDumper):
    pass


def _flow_small(dumper, data):
    flow = len(data) <= 6 and all(not isinstance(v, (dict, list)) for v in data.values())
    return dumper.represent_mapping("tag:yaml.org,2002:map", data, flow_style=flow)


_Dumper.add_representer(dict, _flow_small)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for name, shocks in PRESETS.items():
        text = yaml.dump(scenario(name, shocks), Dumper=_Dumper, sort_keys=False, width=120)
        (OUT / f"{name}.scn").write_text(f"# preset scenario: {name}\n" + text)
        print(f"wrote {OUT / f'{name}.scn'}")


if __name__ == "__main__":
    main()
