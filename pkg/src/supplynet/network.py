"""Supply network graph: firms, bills of materials, echelons, cost parameters.

A firm makes exactly one good, so firm ids double as good ids. Material flows
from supplier ``j`` to customer ``i`` whenever ``bom[i][j] > 0``.
"""
from __future__ import annotations

import graphlib
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import BomMismatch, BoundsError, CycleError, NonPositiveCost


@dataclass(frozen=True)
class FirmParams:
    production_cost: float
    shortage_penalty: float
    holding_cost: float
    inv_lower: int
    inv_upper: int
    # cap for the uniform draw of initial input stocks; defaults to inv_upper
    input_upper: int | None = None

    @property
    def input_cap(self) -> int:
        return self.inv_upper if self.input_upper is None else self.input_upper


@dataclass(frozen=True)
class Firm:
    id: int
    name: str
    bom: tuple[int, ...]
    params: FirmParams

    @property
    def inputs(self) -> tuple[int, ...]:
        return tuple(r for r, b in enumerate(self.bom) if b > 0)


@dataclass(frozen=True)
class Network:
    firms: tuple[Firm, ...]
    edges: tuple[tuple[int, int], ...]  # (supplier, customer), sorted
    echelons: tuple[int, ...]
    _customers: tuple[tuple[int, ...], ...] = field(repr=False, compare=False)
    _suppliers: tuple[tuple[int, ...], ...] = field(repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.firms)

    @property
    def depth(self) -> int:
        return max(self.echelons)

    def customers(self, i: int) -> tuple[int, ...]:
        """Out-neighbors of firm ``i`` (firms that buy its good)."""
        return self._customers[i]

    def suppliers(self, i: int) -> tuple[int, ...]:
        """In-neighbors of firm ``i`` (firms whose goods it consumes)."""
        return self._suppliers[i]

    @property
    def distributors(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if self.echelons[i] == 1)

    def is_distributor(self, i: int) -> bool:
        return self.echelons[i] == 1

    def bom_matrix(self) -> np.ndarray:
        return np.array([f.bom for f in self.firms], dtype=np.int64).reshape(self.n, self.n)

    def index(self, name: str) -> int:
        for f in self.firms:
            if f.name == name:
                return f.id
        raise KeyError(name)

    def names(self) -> list[str]:
        return [f.name for f in self.firms]

    def downstream_of(self, i: int) -> list[int]:
        """All firms reachable from ``i`` along material flow, ascending id."""
        seen: set[int] = set()
        stack = list(self.customers(i))
        while stack:
            j = stack.pop()
            if j not in seen:
                seen.add(j)
                stack.extend(self.customers(j))
        return sorted(seen)

    def with_params(self, params: Mapping[int, FirmParams]) -> "Network":
        firms = tuple(replace(f, params=params.get(f.id, f.params)) for f in self.firms)
        return replace(self, firms=firms)

    def to_dict(self) -> dict[str, Any]:
        firms = []
        for f in self.firms:
            p = f.params
            bounds: dict[str, int] = {"lower": p.inv_lower, "upper": p.inv_upper}
            if p.input_upper is not None:
                bounds["input_upper"] = p.input_upper
            firms.append(
                {
                    "name": f.name,
                    "bom": {self.firms[r].name: b for r, b in enumerate(f.bom) if b > 0},
                    "costs": {
                        "production": p.production_cost,
                        "shortage": p.shortage_penalty,
                        "holding": p.holding_cost,
                    },
                    "bounds": bounds,
                }
            )
        edges = [[self.firms[a].name, self.firms[b].name] for a, b in self.edges]
        return {"firms": firms, "edges": edges}


def _parse_bom(raw: Any, n: int, names: dict[str, int], who: str) -> tuple[int, ...]:
    if raw is None:
        return (0,) * n
    if isinstance(raw, Mapping):
        bom = [0] * n
        for key, units in raw.items():
            r = names.get(key) if not isinstance(key, int) else key
            if r is None or not 0 <= r < n:
                raise BomMismatch(f"{who}: bill of materials names unknown good {key!r}")
            bom[r] = units
    else:
        bom = list(raw)
        if len(bom) != n:
            raise BomMismatch(f"{who}: bill of materials has {len(bom)} entries, expected {n}")
    out = []
    for b in bom:
        if isinstance(b, bool) or int(b) != b or b < 0:
            raise BomMismatch(f"{who}: bill of materials entries must be nonnegative integers, got {b!r}")
        out.append(int(b))
    return tuple(out)


def _parse_params(raw: Mapping[str, Any], who: str) -> FirmParams:
    costs = raw.get("costs", {})
    bounds = raw.get("bounds", {})
    c = float(costs.get("production", costs.get("c", 0.0)))
    s = float(costs.get("shortage", costs.get("s", 0.0)))
    h = float(costs.get("holding", costs.get("h", 0.0)))
    for label, v in (("production cost", c), ("shortage penalty", s), ("holding cost", h)):
        if not v > 0:
            raise NonPositiveCost(f"{who}: {label} must be > 0, got {v}")
    lo = int(bounds.get("lower", 0))
    hi = int(bounds.get("upper", 0))
    if lo > hi:
        raise BoundsError(f"{who}: inventory lower bound {lo} exceeds upper bound {hi}")
    cap = bounds.get("input_upper")
    if cap is not None:
        cap = int(cap)
        if cap < 0:
            raise BoundsError(f"{who}: input_upper must be >= 0")
    return FirmParams(c, s, h, lo, hi, cap)


def build_network(spec: Mapping[str, Any]) -> Network:
    """Validate a declarative description and return an immutable Network.

    ``spec["firms"]`` is a list of dicts with ``name``, ``bom`` (mapping of
    good name to units, or a length-n list), ``costs`` and ``bounds``.
    ``spec["edges"]`` is optional; when given it must list exactly the
    (supplier, customer) pairs implied by the nonzero BOM entries.
    """
    raw_firms = list(spec["firms"])
    n = len(raw_firms)
    names = [str(f.get("name", f"v{i}")) for i, f in enumerate(raw_firms)]
    if len(set(names)) != n:
        raise BomMismatch("firm names must be unique")
    name_idx = {nm: i for i, nm in enumerate(names)}

    firms = []
    for i, raw in enumerate(raw_firms):
        bom = _parse_bom(raw.get("bom"), n, name_idx, names[i])
        if bom[i] != 0:
            raise CycleError(f"{names[i]} lists its own good as an input")
        firms.append(Firm(i, names[i], bom, _parse_params(raw, names[i])))

    derived = {(r, f.id) for f in firms for r in f.inputs}
    if spec.get("edges") is not None:
        explicit = set()
        for pair in spec["edges"]:
            a, b = (name_idx[p] if isinstance(p, str) and p in name_idx else p for p in pair)
            if not (isinstance(a, int) and isinstance(b, int)):
                raise BomMismatch(f"edge {pair!r} names an unknown firm")
            explicit.add((a, b))
        if explicit != derived:
            extra = sorted(explicit - derived)
            missing = sorted(derived - explicit)
            raise BomMismatch(
                f"edges disagree with bills of materials: edges without BOM entry {extra}, "
                f"BOM entries without edge {missing}"
            )

    customers: list[list[int]] = [[] for _ in range(n)]
    suppliers: list[list[int]] = [[] for _ in range(n)]
    for a, b in sorted(derived):
        customers[a].append(b)
        suppliers[b].append(a)

    # customers are "predecessors" so every customer is ordered before its suppliers
    sorter = graphlib.TopologicalSorter({i: customers[i] for i in range(n)})
    try:
        order = list(sorter.static_order())
    except graphlib.CycleError as exc:
        raise CycleError(f"supply graph has a cycle through {[names[i] for i in exc.args[1]]}") from None
    echelon = [0] * n
    for i in order:
        echelon[i] = 1 + max((echelon[j] for j in customers[i]), default=0)

    return Network(
        firms=tuple(firms),
        edges=tuple(sorted(derived)),
        echelons=tuple(echelon),
        _customers=tuple(tuple(c) for c in customers),
        _suppliers=tuple(tuple(s) for s in suppliers),
    )


def echelon_order(net: Network) -> list[list[int]]:
    """Firm groups by echelon, distributors first, ascending id inside a group."""
    return [[i for i in range(net.n) if net.echelons[i] == e] for e in range(1, net.depth + 1)]


@dataclass(frozen=True)
class CostWarning:
    firm: int
    rule: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    warnings: tuple[CostWarning, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.warnings

    def for_firm(self, i: int) -> list[CostWarning]:
        return [w for w in self.warnings if w.firm == i]


def validate_costs(net: Network) -> ValidationReport:
    """Check the plausibility conditions on production cost and penalties.

    Flags ``c < sum of input shortage penalties``, ``c > s`` and ``s < s_j``
    for any supplier ``j``. Advisory only; the solver does not need them.
    """
    out = []
    for f in net.firms:
        p = f.params
        sup = net.suppliers(f.id)
        input_total = sum(net.firms[j].params.shortage_penalty for j in sup)
        if p.production_cost < input_total:
            out.append(CostWarning(f.id, "c below input cost",
                                   f"{f.name}: c={p.production_cost:g} < sum of input penalties {input_total:g}"))
        if p.production_cost > p.shortage_penalty:
            out.append(CostWarning(f.id, "c above shortage penalty",
                                   f"{f.name}: c={p.production_cost:g} > s={p.shortage_penalty:g}"))
        for j in sup:
            sj = net.firms[j].params.shortage_penalty
            if p.shortage_penalty < sj:
                out.append(CostWarning(f.id, "s below input penalty",
                                       f"{f.name}: s={p.shortage_penalty:g} < s of {net.firms[j].name}={sj:g}"))
    return ValidationReport(tuple(out))


def draw_costs(
    net: Network,
    rng: np.random.Generator,
    c_range: tuple[float, float] = (1.0, 30.0),
    s_range: tuple[float, float] = (1.0, 40.0),
    h_range: tuple[float, float] = (0.05, 0.5),
    decimals: int = 2,
    max_tries: int = 100_000,
) -> dict[int, FirmParams]:
    """Draw (c, s, h) per firm by rejection until the plausibility checks pass.

    Firms are visited upstream first so input penalties are known when a
    firm's own draw is tested. Values are rounded before testing.
    """
    chosen: dict[int, tuple[float, float, float]] = {}
    for group in reversed(echelon_order(net)):
        for i in group:
            inputs = [chosen[j][1] for j in net.suppliers(i)]
            lo_c = max(c_range[0], sum(inputs))
            for _ in range(max_tries):
                c = round(float(rng.uniform(*c_range)) + sum(inputs), decimals)
                s = round(float(rng.uniform(*s_range)) + sum(inputs), decimals)
                h = round(float(rng.uniform(*h_range)), decimals)
                if h > 0 and c >= lo_c and c <= s and all(s >= sj for sj in inputs):
                    chosen[i] = (c, s, h)
                    break
            else:  # pragma: no cover - ranges are wide enough in practice
                raise RuntimeError(f"no admissible costs for {net.firms[i].name}")
    return {
        i: replace(net.firms[i].params, production_cost=c, shortage_penalty=s, holding_cost=h)
        for i, (c, s, h) in chosen.items()
    }
