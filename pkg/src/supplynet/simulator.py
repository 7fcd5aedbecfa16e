"""Discrete-time network simulation under order-up-to policies.

Each step runs an order sweep from the distributors upstream, then a
fulfillment sweep from the raw-material firms downstream. There are no lead
times: goods produced or delivered in a step can be shipped in the same
step. Unmet demand is lost.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any, Mapping, Protocol, Sequence

import numpy as np

from .errors import MissingDistributorPmf, MissingPolicy, NegativeInventory
from .network import Network, echelon_order

SHOCK_KINDS = ("production_outage", "shipping_outage", "full_outage", "demand_shift")
POLICY_MODES = ("receding", "finite")


class ThresholdPolicy(Protocol):
    thresholds: tuple[int, ...]


class DemandSource(Protocol):
    def pmf(self, shift: float = 0.0) -> Any: ...


@dataclass(frozen=True)
class Shock:
    """A disruption on one firm over the inclusive step window ``[start, end]``.

    ``demand_shift`` raises the mean by ``delta`` per step inside the window
    (so the shift at step k is ``delta * (k - start + 1)``), holds the
    accumulated shift after the window and drops it at ``revert_at``
    (default ``end + 1``).
    """

    kind: str
    firm: int
    start: int
    end: int
    delta: float = 0.0
    revert_at: int | None = None

    def __post_init__(self):
        if self.kind not in SHOCK_KINDS:
            raise ValueError(f"unknown shock kind {self.kind!r}")
        if self.start > self.end:
            raise ValueError(f"shock window [{self.start}, {self.end}] is empty")
        if self.revert_at is not None and self.revert_at <= self.end:
            raise ValueError("revert_at must come after the shock window")

    def active(self, k: int) -> bool:
        return self.start <= k <= self.end

    def blocks_production(self, k: int) -> bool:
        return self.kind in ("production_outage", "full_outage") and self.active(k)

    def blocks_shipping(self, k: int) -> bool:
        return self.kind in ("shipping_outage", "full_outage") and self.active(k)

    def demand_shift(self, k: int) -> float:
        if self.kind != "demand_shift" or k < self.start:
            return 0.0
        revert = self.end + 1 if self.revert_at is None else self.revert_at
        if k >= revert:
            return 0.0
        return self.delta * (min(k, self.end) - self.start + 1)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind, "firm": self.firm, "start": self.start, "end": self.end}
        if self.kind == "demand_shift":
            d["delta"] = self.delta
            if self.revert_at is not None:
                d["revert_at"] = self.revert_at
        return d


@dataclass
class SimState:
    k: int
    inv_out: np.ndarray  # (n,) output good on hand
    inv_in: np.ndarray   # (n, n) inv_in[i, r] = units of good r held by firm i

    def copy(self) -> "SimState":
        return SimState(self.k, self.inv_out.copy(), self.inv_in.copy())


@dataclass(frozen=True)
class StepRecord:
    omega: np.ndarray
    request: np.ndarray
    received: np.ndarray  # (n, n) deliveries of good r to firm i
    produced: np.ndarray
    shipped: np.ndarray
    shortage: np.ndarray
    inv_out: np.ndarray
    inv_in: np.ndarray
    cost_production: np.ndarray
    cost_shortage: np.ndarray
    cost_holding: np.ndarray

    @property
    def cost(self) -> np.ndarray:
        return self.cost_production + self.cost_shortage + self.cost_holding


@dataclass(frozen=True)
class CostLedger:
    """Cumulative cost per firm, shape (K, n), and for the whole network, shape (K,)."""

    firm: np.ndarray
    network: np.ndarray

    @classmethod
    def from_step_costs(cls, step_costs: np.ndarray) -> "CostLedger":
        firm = np.cumsum(step_costs, axis=0)
        return cls(firm, firm.sum(axis=1))


@dataclass(frozen=True)
class SimTrace:
    """Per step (axis 0) and per firm (axis 1) record of a run.

    ``inv_out``/``inv_in`` hold the end-of-step inventories. ``received`` and
    ``inv_in`` are (K, n, n) indexed ``[k, firm, good]``.
    """

    omega: np.ndarray
    request: np.ndarray
    received: np.ndarray
    produced: np.ndarray
    shipped: np.ndarray
    shortage: np.ndarray
    inv_out: np.ndarray
    inv_in: np.ndarray
    cost_production: np.ndarray
    cost_shortage: np.ndarray
    cost_holding: np.ndarray
    stage: np.ndarray
    thresholds: np.ndarray  # (K, n) threshold applied at each step
    initial: SimState
    policy_mode: str
    ledger: CostLedger = field(repr=False)

    @property
    def steps(self) -> int:
        return self.omega.shape[0]

    @property
    def cost_step(self) -> np.ndarray:
        return self.cost_production + self.cost_shortage + self.cost_holding


def allocate(available: int, orders: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    """Split ``available`` units across ``(firm, quantity)`` orders.

    Orders are filled in full when stock suffices. Otherwise each firm gets
    the floor of its proportional share and leftover units go one at a time
    to the largest fractional remainders, ties to the lower firm id.
    """
    total = sum(q for _, q in orders)
    if total <= available:
        return [(j, q) for j, q in orders]
    if available <= 0:
        return [(j, 0) for j, _ in orders]
    base = []
    rems = []
    for pos, (j, q) in enumerate(orders):
        share, rem = divmod(available * q, total)
        base.append(share)
        rems.append((-rem, j, pos))
    left = available - sum(base)
    for _, _, pos in sorted(rems)[:left]:
        base[pos] += 1
    return [(j, base[pos]) for pos, (j, _) in enumerate(orders)]


def accrue(costs: Any, produced: int, shortage: int, holding: int) -> float:
    """Step cost ``c*q + s*shortage + h*holding`` for one firm."""
    return costs.production_cost * produced + costs.shortage_penalty * shortage + costs.holding_cost * holding


class Simulator:
    """Steps a network forward under fixed threshold policies."""

    def __init__(
        self,
        net: Network,
        policies: Mapping[int, ThresholdPolicy],
        demand: Mapping[int, DemandSource],
        shocks: Sequence[Shock] = (),
        policy_mode: str = "receding",
    ):
        if policy_mode not in POLICY_MODES:
            raise ValueError(f"policy_mode must be one of {POLICY_MODES}")
        missing = [net.firms[i].name for i in range(net.n) if i not in policies]
        if missing:
            raise MissingPolicy(f"no policy for {', '.join(missing)}")
        dists = net.distributors
        absent = [net.firms[i].name for i in dists if i not in demand]
        if absent:
            raise MissingDistributorPmf(f"no exogenous demand for {', '.join(absent)}")
        for s in shocks:
            if not 0 <= s.firm < net.n:
                raise ValueError(f"shock targets unknown firm id {s.firm}")
            if s.kind == "demand_shift" and not net.is_distributor(s.firm):
                raise ValueError(f"demand_shift must target a distributor, not {net.firms[s.firm].name}")
        self.net = net
        self.policy_mode = policy_mode
        self.thresholds = [tuple(int(m) for m in policies[i].thresholds) for i in range(net.n)]
        self.demand = demand
        self.distributors = dists
        self.shocks = tuple(shocks)
        self.bom = net.bom_matrix()
        self.upstream_first = [i for group in reversed(echelon_order(net)) for i in group]
        p = [f.params for f in net.firms]
        self.c = np.array([q.production_cost for q in p])
        self.s = np.array([q.shortage_penalty for q in p])
        self.h = np.array([q.holding_cost for q in p])

    def stage(self, k: int, i: int) -> int:
        if self.policy_mode == "receding":
            return 0
        return min(k, len(self.thresholds[i]) - 1)

    def initial_state(self, rng: np.random.Generator) -> SimState:
        """Uniform integer stocks: output in [0, x^U], each input in [0, input cap]."""
        n = self.net.n
        inv_out = np.zeros(n, dtype=np.int64)
        inv_in = np.zeros((n, n), dtype=np.int64)
        for f in self.net.firms:
            inv_out[f.id] = rng.integers(0, f.params.inv_upper + 1)
            for r in f.inputs:
                inv_in[f.id, r] = rng.integers(0, f.params.input_cap + 1)
        return SimState(0, inv_out, inv_in)

    def exogenous_demand(self, k: int, uniforms: np.ndarray) -> dict[int, int]:
        out = {}
        for u, i in zip(uniforms, self.distributors):
            shift = sum(s.demand_shift(k) for s in self.shocks if s.firm == i)
            out[i] = int(self.demand[i].pmf(shift).quantile(float(u)))
        return out

    def step(self, state: SimState, uniforms: np.ndarray) -> tuple[SimState, StepRecord]:
        """Advance one step. ``uniforms`` holds one draw per distributor."""
        net, bom, k = self.net, self.bom, state.k
        n = net.n
        x = state.inv_out
        x_in = state.inv_in

        request = np.array(
            [max(self.thresholds[i][self.stage(k, i)] - int(x[i]), 0) for i in range(n)], dtype=np.int64
        )
        omega = request @ bom
        for i, w in self.exogenous_demand(k, uniforms).items():
            omega[i] = w

        no_prod = {s.firm for s in self.shocks if s.blocks_production(k)}
        no_ship = {s.firm for s in self.shocks if s.blocks_shipping(k)}
        received = np.zeros((n, n), dtype=np.int64)
        produced = np.zeros(n, dtype=np.int64)
        shipped = np.zeros(n, dtype=np.int64)
        for i in self.upstream_first:
            firm = net.firms[i]
            q = int(request[i])
            for r in firm.inputs:
                q = min(q, int(x_in[i, r] + received[i, r]) // int(bom[i, r]))
            if i in no_prod:
                q = 0
            produced[i] = q
            available = int(x[i]) + q
            if i in no_ship:
                continue
            if net.is_distributor(i):
                shipped[i] = min(int(omega[i]), available)
                continue
            orders = [(j, int(request[j] * bom[j, i])) for j in net.customers(i)]
            for j, units in allocate(available, orders):
                received[j, i] = units
                shipped[i] += units

        new_out = x + produced - shipped
        new_in = x_in + received - produced[:, None] * bom
        if (new_out < 0).any() or (new_in < 0).any():
            raise NegativeInventory(f"step {k}: inventory went negative")
        shortage = omega - shipped
        rec = StepRecord(
            omega=omega,
            request=request,
            received=received,
            produced=produced,
            shipped=shipped,
            shortage=shortage,
            inv_out=new_out,
            inv_in=new_in,
            cost_production=self.c * produced,
            cost_shortage=self.s * shortage,
            cost_holding=self.h * new_out,
        )
        return SimState(k + 1, new_out, new_in), rec

    def run(self, steps: int, seed: int) -> SimTrace:
        rng = np.random.default_rng(seed)
        state = self.initial_state(rng)
        initial = state.copy()
        records = []
        stage = np.zeros(steps, dtype=np.int64)
        applied = np.zeros((steps, self.net.n), dtype=np.int64)
        for k in range(steps):
            # one uniform per distributor every step keeps streams aligned across scenarios
            u = rng.random(len(self.distributors))
            stage[k] = self.stage(k, 0)
            applied[k] = [self.thresholds[i][self.stage(k, i)] for i in range(self.net.n)]
            state, rec = self.step(state, u)
            records.append(rec)
        return _stack(records, stage, applied, initial, self.policy_mode)


def _stack(records: list[StepRecord], stage, applied, initial: SimState, mode: str) -> SimTrace:
    def col(name):
        return np.stack([getattr(r, name) for r in records]) if records else np.zeros((0,))

    cost = col("cost_production") + col("cost_shortage") + col("cost_holding")
    return SimTrace(
        omega=col("omega"),
        request=col("request"),
        received=col("received"),
        produced=col("produced"),
        shipped=col("shipped"),
        shortage=col("shortage"),
        inv_out=col("inv_out"),
        inv_in=col("inv_in"),
        cost_production=col("cost_production"),
        cost_shortage=col("cost_shortage"),
        cost_holding=col("cost_holding"),
        stage=stage,
        thresholds=applied,
        initial=initial,
        policy_mode=mode,
        ledger=CostLedger.from_step_costs(cost),
    )


def run(
    net: Network,
    policies: Mapping[int, ThresholdPolicy],
    demand: Mapping[int, DemandSource],
    shocks: Sequence[Shock] = (),
    steps: int = 250,
    seed: int = 0,
    policy_mode: str = "receding",
) -> SimTrace:
    return Simulator(net, policies, demand, shocks, policy_mode).run(steps, seed)


# CSV export. Fixed column order and number formats so runs can be diffed byte for byte.

def _fmt(v: float) -> str:
    return f"{v:.6f}"


def trace_csv(net: Network, trace: SimTrace) -> str:
    goods = sorted({r for f in net.firms for r in f.inputs})
    header = ["k", "firm", "omega", "request", "produced", "shipped", "shortage", "inv_out"]
    header += [f"inv_in_{net.firms[r].name}" for r in goods] + ["cost_step", "cost_cum"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    cost = trace.cost_step
    cum = trace.ledger.firm
    for k in range(trace.steps):
        for f in net.firms:
            i = f.id
            row = [k, f.name, trace.omega[k, i], trace.request[k, i], trace.produced[k, i],
                   trace.shipped[k, i], trace.shortage[k, i], trace.inv_out[k, i]]
            row += [trace.inv_in[k, i, r] if f.bom[r] > 0 else "" for r in goods]
            row += [_fmt(cost[k, i]), _fmt(cum[k, i])]
            w.writerow(row)
    return buf.getvalue()


def ledger_csv(net: Network, trace: SimTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "firm", "cum_cost"])
    for k in range(trace.steps):
        for f in net.firms:
            w.writerow([k, f.name, _fmt(trace.ledger.firm[k, f.id])])
        w.writerow([k, "network", _fmt(trace.ledger.network[k])])
    return buf.getvalue()


def summarize(net: Network, trace: SimTrace) -> dict[str, Any]:
    firms = {}
    for f in net.firms:
        i = f.id
        firms[f.name] = {
            "total_cost": round(float(trace.ledger.firm[-1, i]), 6) if trace.steps else 0.0,
            "shortage_events": int((trace.shortage[:, i] > 0).sum()),
            "shortage_units": int(trace.shortage[:, i].sum()),
            "min_inventory": int(trace.inv_out[:, i].min()) if trace.steps else int(trace.initial.inv_out[i]),
        }
    return {
        "steps": trace.steps,
        "policy_mode": trace.policy_mode,
        "total_cost": round(float(trace.ledger.network[-1]), 6) if trace.steps else 0.0,
        "shortage_events": int((trace.shortage > 0).sum()),
        "firms": firms,
    }
