"""Optimal order-up-to policy for a single firm, plus a brute-force DP oracle.

Demand, inventory and orders are integers, so every expectation below is an
exact finite sum over the stage pmf. Derivatives are forward differences:
``F[k](y) = G[k](y + 1) - G[k](y)``, which with the right-derivative
convention for the penalty kink reproduces the continuous recursion exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .demand import DemandModel, DemandPmf
from .errors import GridMiss, InfeasibleBounds, InstanceTooLarge, StageOutOfRange
from .network import FirmParams

# threshold search treats F(y) >= -c - tol as crossing (absorbs float accumulation)
THRESHOLD_RTOL = 1e-9
ORACLE_WORK_LIMIT = 50_000_000


@dataclass(frozen=True)
class SolverInstance:
    production_cost: float
    shortage_penalty: float
    holding_cost: float
    lower: int
    upper: int
    demand: DemandModel
    horizon: int

    @classmethod
    def from_params(cls, params: FirmParams, demand: DemandModel | DemandPmf, horizon: int) -> "SolverInstance":
        if isinstance(demand, DemandPmf):
            demand = DemandModel.constant(demand)
        return cls(params.production_cost, params.shortage_penalty, params.holding_cost,
                   params.inv_lower, params.inv_upper, demand, horizon)

    def support_max(self, k: int) -> int:
        return self.demand.at(k).support_max

    def max_support(self) -> int:
        return self.demand.max_support(self.horizon)

    def band(self, k: int) -> tuple[int, int]:
        """Feasible on-hand stock interval at stage ``k``."""
        return self.lower + self.support_max(k), self.upper

    def grid_start(self, k: int) -> int:
        return self.lower - (self.horizon - 1 - k) * self.max_support()

    def check(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        for v in (self.production_cost, self.shortage_penalty, self.holding_cost):
            if not v > 0:
                raise ValueError("costs must be positive")
        self.demand.check_horizon(self.horizon)
        for k in range(self.horizon):
            lo, hi = self.band(k)
            if lo > hi:
                raise InfeasibleBounds(
                    f"stage {k}: lower bound {self.lower} + max demand {self.support_max(k)} "
                    f"exceeds upper bound {self.upper}"
                )


def penalty(costs: Any, u: int | np.ndarray) -> float | np.ndarray:
    """Shortage/holding charge for end-of-stage position ``u`` (stock minus demand)."""
    s, h = costs.shortage_penalty, costs.holding_cost
    out = s * np.maximum(-np.asarray(u), 0) + h * np.maximum(np.asarray(u), 0)
    return float(out) if np.ndim(out) == 0 else out


def penalty_subgradient(costs: Any, u: int | np.ndarray) -> float | np.ndarray:
    """Right derivative of :func:`penalty`: ``-s`` for u < 0, ``+h`` for u >= 0."""
    out = np.where(np.asarray(u) < 0, -costs.shortage_penalty, costs.holding_cost)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class PolicyTable:
    """Per-stage thresholds with the tabulated F and G functions behind them.

    Stage ``k`` tables cover the integers ``grid_start[k] .. upper``.
    """

    thresholds: tuple[int, ...]
    cases: tuple[str, ...]
    bands: tuple[tuple[int, int], ...]
    grid_start: tuple[int, ...]
    F: tuple[np.ndarray, ...]
    G: tuple[np.ndarray, ...]
    lower: int
    upper: int
    production_cost: float

    @property
    def horizon(self) -> int:
        return len(self.thresholds)

    def _check_stage(self, k: int, allow_terminal: bool = False) -> None:
        top = self.horizon if allow_terminal else self.horizon - 1
        if not 0 <= k <= top:
            raise StageOutOfRange(f"stage {k} outside [0, {top}]")

    def grid(self, k: int) -> np.ndarray:
        self._check_stage(k)
        return np.arange(self.grid_start[k], self.upper + 1)

    def _index(self, k: int, y: int) -> int:
        if not self.grid_start[k] <= y <= self.upper:
            raise GridMiss(f"{y} outside stage-{k} grid [{self.grid_start[k]}, {self.upper}]")
        return int(y) - self.grid_start[k]

    def F_at(self, k: int, y: int) -> float:
        self._check_stage(k)
        return float(self.F[k][self._index(k, y)])

    def G_at(self, k: int, y: int) -> float:
        self._check_stage(k)
        return float(self.G[k][self._index(k, y)])

    def optimal_request(self, k: int, x: int) -> int:
        self._check_stage(k)
        return max(self.thresholds[k] - int(x), 0)

    def cost_to_go(self, k: int, x: int) -> float:
        self._check_stage(k, allow_terminal=True)
        if k == self.horizon:
            return 0.0
        m = self.thresholds[k]
        i = self._index(k, x)
        if m >= x:
            return self.production_cost * (m - x) + float(self.G[k][m - self.grid_start[k]])
        return float(self.G[k][i])

    def cost_to_go_table(self, k: int) -> np.ndarray:
        """Cost-to-go over the whole stage-``k`` grid."""
        if k == self.horizon:
            return np.zeros(self.upper - self.grid_start[-1] + 1)
        y = self.grid(k)
        m = self.thresholds[k]
        g_m = self.G[k][m - self.grid_start[k]]
        return np.where(y <= m, self.production_cost * (m - y) + g_m, self.G[k])

    def report(self) -> dict[str, Any]:
        stages = []
        for k in range(self.horizon):
            lo, hi = self.bands[k]
            stages.append(
                {
                    "stage": k,
                    "threshold": self.thresholds[k],
                    "case": self.cases[k],
                    "band": [lo, hi],
                    "F_band_low": self.F_at(k, lo),
                    "F_band_high": self.F_at(k, hi),
                    "G_band_low": self.G_at(k, lo),
                    "G_band_high": self.G_at(k, hi),
                }
            )
        return {"lower": self.lower, "upper": self.upper, "horizon": self.horizon, "stages": stages}


def optimal_request(table: PolicyTable, k: int, x: int) -> int:
    return table.optimal_request(k, x)


def cost_to_go(table: PolicyTable, k: int, x: int) -> float:
    return table.cost_to_go(k, x)


def _threshold(F: np.ndarray, start: int, band: tuple[int, int], c: float) -> tuple[int, str]:
    """Smallest band point where F reaches -c; band end points when it never/always does.

    Same as the three-case rule (interior inverse, lower clamp, upper clamp)
    except when F equals -c exactly at the top of the band, where the
    smallest minimizer is returned instead of the upper bound.
    """
    lo, hi = band
    seg = F[lo - start : hi - start + 1]
    tol = THRESHOLD_RTOL * max(1.0, c)
    hit = np.flatnonzero(seg >= -c - tol)
    if hit.size == 0:
        return hi, "upper"
    if hit[0] == 0:
        return lo, "lower"
    return lo + int(hit[0]), "interior"


def compute_policy(inst: SolverInstance) -> PolicyTable:
    """Backward recursion for F and G, thresholds stage by stage."""
    inst.check()
    T = inst.horizon
    c = inst.production_cost
    thresholds = [0] * T
    cases = [""] * T
    F: list[np.ndarray] = [np.empty(0)] * T
    G: list[np.ndarray] = [np.empty(0)] * T
    starts = [inst.grid_start(k) for k in range(T)]

    for k in reversed(range(T)):
        y = np.arange(starts[k], inst.upper + 1)
        Fk = np.zeros(y.size)
        Gk = np.zeros(y.size)
        pmf = inst.demand.at(k)
        for w, p in zip(pmf.values, pmf.probs):
            if p == 0.0:
                continue
            u = y - w
            Fk += p * penalty_subgradient(inst, u)
            Gk += p * penalty(inst, u)
            if k == T - 1:
                continue
            # next-stage state u orders up to M when below it (forced when u is
            # under the feasible band), otherwise holds and pays G[k+1](u)
            m = thresholds[k + 1]
            s1 = starts[k + 1]
            order = u < m
            idx = np.where(order, m - s1, u - s1)
            Fk += p * np.where(order, -c, np.maximum(F[k + 1][idx], -c))
            Gk += p * np.where(order, c * (m - u) + G[k + 1][m - s1], G[k + 1][idx])
        F[k], G[k] = Fk, Gk
        thresholds[k], cases[k] = _threshold(Fk, starts[k], inst.band(k), c)

    for arr in F + G:
        arr.setflags(write=False)
    return PolicyTable(
        thresholds=tuple(thresholds),
        cases=tuple(cases),
        bands=tuple(inst.band(k) for k in range(T)),
        grid_start=tuple(starts),
        F=tuple(F),
        G=tuple(G),
        lower=inst.lower,
        upper=inst.upper,
        production_cost=c,
    )


@dataclass(frozen=True)
class DPResult:
    """Value and action tables of the exhaustive DP, indexed like PolicyTable grids."""

    values: tuple[np.ndarray, ...]   # stages 0..T
    actions: tuple[np.ndarray, ...]  # stages 0..T-1, order quantity N
    grid_start: tuple[int, ...]      # stages 0..T
    upper: int

    def value(self, k: int, x: int) -> float:
        return float(self.values[k][x - self.grid_start[k]])

    def action(self, k: int, x: int) -> int:
        return int(self.actions[k][x - self.grid_start[k]])


def brute_force_dp(inst: SolverInstance, tie_tol: float = 1e-9) -> DPResult:
    """Bellman recursion by exhaustive search over every feasible on-hand level.

    For each state x, minimizes ``c*(y - x) + E[f(y - w) + V[k+1](y - w)]``
    over integer y in ``[max(x, lower + D_k), upper]``. Ties go to the
    smallest y.
    """
    inst.check()
    T = inst.horizon
    c = inst.production_cost
    starts = [inst.grid_start(k) for k in range(T)] + [inst.lower]
    work = sum((inst.upper - starts[k] + 1) * (inst.upper - inst.band(k)[0] + 1) for k in range(T))
    if work > ORACLE_WORK_LIMIT:
        raise InstanceTooLarge(f"oracle would scan {work} state/action pairs")

    values: list[np.ndarray] = [np.empty(0)] * (T + 1)
    actions: list[np.ndarray] = [np.empty(0, dtype=np.int64)] * T
    values[T] = np.zeros(inst.upper - inst.lower + 1)

    for k in reversed(range(T)):
        a_lo, a_hi = inst.band(k)
        nxt, nxt_start = values[k + 1], starts[k + 1]
        pmf = inst.demand.at(k)
        ys = list(range(a_lo, a_hi + 1))
        q = np.empty(len(ys))
        for j, yv in enumerate(ys):
            total = c * yv
            for w, p in zip(pmf.values.tolist(), pmf.probs.tolist()):
                if p == 0.0:
                    continue
                total += p * (penalty(inst, yv - w) + nxt[yv - w - nxt_start])
            q[j] = total
        xs = range(starts[k], inst.upper + 1)
        v = np.empty(len(xs))
        act = np.empty(len(xs), dtype=np.int64)
        for i, xv in enumerate(xs):
            first = max(xv, a_lo) - a_lo
            cand = q[first:]
            best = cand.min()
            tol = tie_tol * max(1.0, abs(best))
            j = first + int(np.flatnonzero(cand <= best + tol)[0])
            v[i] = q[j] - c * xv
            act[i] = ys[j] - xv
        values[k], actions[k] = v, act

    return DPResult(tuple(values), tuple(actions), tuple(starts), inst.upper)


@dataclass(frozen=True)
class ThresholdSchedule:
    """Thresholds only, e.g. reloaded from a cached solve. Enough to drive a simulation."""

    thresholds: tuple[int, ...]

    @property
    def horizon(self) -> int:
        return len(self.thresholds)

    def optimal_request(self, k: int, x: int) -> int:
        if not 0 <= k < self.horizon:
            raise StageOutOfRange(f"stage {k} outside [0, {self.horizon - 1}]")
        return max(self.thresholds[k] - int(x), 0)
