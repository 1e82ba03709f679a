"""Multiplicative-weights loop around an electrical-flow congestion oracle.

Each oracle step prices every edge of the symmetrized network by
``r = (w + regularizer) / u_parent^2``, computes an approximate electrical
s-t flow of the requested value, and fails when the flow's energy exceeds a
threshold derived from the weight total.  Successful flows are averaged; the
loop stops as soon as a running average stays within the per-edge bound
``|f| <= (1+eps) * u_parent`` and the exact target value, both verified
explicitly before returning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .electrical import (
    DisconnectedNetworkError,
    default_solve_tolerance,
    electrical_st_flow,
)
from .network import FlowAssignment, SymmetrizedNetwork

# Practical cap on oracle calls per solve; the theoretical schedule
# 2*rho*ln(edges)/eps^2 is far beyond desk scale for small eps.
DEFAULT_ITERATION_CAP = 2000


class WidthViolationError(RuntimeError):
    """An oracle flow exceeded the congestion width guarantee."""


@dataclass(frozen=True)
class OracleParams:
    """Loop parameters: accuracy eps, congestion width, solver accuracy."""

    epsilon: float
    arc_count: int

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 0.5):
            raise ValueError(f"epsilon must lie in (0, 1/2], got {self.epsilon}")
        if self.arc_count < 1:
            raise ValueError("need at least one arc")

    @classmethod
    def for_network(cls, net: SymmetrizedNetwork, epsilon: float | None = None) -> "OracleParams":
        return cls(net.epsilon if epsilon is None else float(epsilon), net.m_arcs)

    @property
    def width(self) -> float:
        """Max congestion any successful oracle flow can carry: sqrt(27 m / eps)."""
        return math.sqrt(27.0 * self.arc_count / self.epsilon)

    @property
    def electrical_accuracy(self) -> float:
        return self.epsilon / 10.0


class WeightVector:
    """Strictly positive per-edge weights with a cached total."""

    __slots__ = ("values", "total")

    def __init__(self, values):
        arr = np.array(values, dtype=np.float64)
        if not (np.isfinite(arr).all() and (arr > 0).all()):
            raise ValueError("weights must be finite and strictly positive")
        arr.setflags(write=False)
        self.values = arr
        self.total = float(arr.sum())

    @classmethod
    def ones(cls, edge_count: int) -> "WeightVector":
        return cls(np.ones(edge_count))

    def scaled(self, factor: float) -> "WeightVector":
        return WeightVector(self.values * factor)

    def __len__(self) -> int:
        return len(self.values)


def compute_resistances(
    net: SymmetrizedNetwork, weights: WeightVector, epsilon: float
) -> np.ndarray:
    """Edge resistances (w + eps*|w|_1/(3*edges)) / u_parent^2.

    The additive regularizer keeps every resistance bounded away from zero
    relative to the weight total; with all weights tied it reduces to a
    per-arc form because each arc owns exactly three edges.
    """
    reg = epsilon * weights.total / (3.0 * net.edge_count)
    return (weights.values + reg) / (net.parent_capacity**2)


def fail_threshold(net: SymmetrizedNetwork, weights: WeightVector, epsilon: float) -> float:
    """Energy ceiling above which an oracle step reports failure.

    (1 + eps/10) * sum_a (w_a + regularizer) * (cap_a / u_parent_a)^2 — the
    energy of a flow that congests every edge exactly to its capacity ratio,
    padded by the electrical solver's accuracy factor.
    """
    reg = epsilon * weights.total / (3.0 * net.edge_count)
    beta = net.capacities / net.parent_capacity
    return float((1.0 + epsilon / 10.0) * np.sum((weights.values + reg) * beta * beta))


def congestion_of(flow: FlowAssignment, net: SymmetrizedNetwork | None = None) -> np.ndarray:
    """Per-edge congestion |f| / u_parent (parent arc's original capacity)."""
    net = flow.network if net is None else net
    if not isinstance(net, SymmetrizedNetwork):
        raise TypeError("congestion is defined on symmetrized networks")
    return np.abs(flow.values) / net.parent_capacity


def update_weights(
    weights: WeightVector, congestion: np.ndarray, params: OracleParams
) -> WeightVector:
    """Multiplicative update w <- w * (1 + (eps/width) * congestion)."""
    cong = np.asarray(congestion, dtype=np.float64)
    width = params.width
    worst = float(cong.max()) if len(cong) else 0.0
    if worst > width * (1.0 + 1e-9):
        raise WidthViolationError(
            f"congestion {worst:.6g} exceeds the oracle width {width:.6g}"
        )
    return WeightVector(weights.values * (1.0 + (params.epsilon / width) * cong))


def _step_weights(
    weights: WeightVector, congestion: np.ndarray, params: OracleParams
) -> WeightVector:
    """Width-adaptive variant of `update_weights` used inside the solve loop.

    Normalizing the step by the observed max congestion instead of the
    worst-case width keeps the same update shape but converges in far fewer
    oracle calls; the returned flow is post-verified either way.
    """
    cong = np.asarray(congestion, dtype=np.float64)
    width = params.width
    worst = float(cong.max()) if len(cong) else 0.0
    if worst > width * (1.0 + 1e-9):
        raise WidthViolationError(
            f"congestion {worst:.6g} exceeds the oracle width {width:.6g}"
        )
    step = max(1.0 + params.epsilon, worst)
    return WeightVector(weights.values * (1.0 + (params.epsilon / step) * cong))


class Verdict(Enum):
    FLOW = "flow"
    FAIL = "fail"


@dataclass(frozen=True)
class OracleDiagnostics:
    energy: float
    threshold: float
    max_congestion: float
    weighted_congestion: float
    weight_total: float
    solver_iterations: int


@dataclass(frozen=True)
class OracleOutcome:
    verdict: Verdict
    flow: Optional[FlowAssignment]
    congestion: Optional[np.ndarray]
    potentials: Optional[np.ndarray]
    diagnostics: OracleDiagnostics


def oracle_step(
    net: SymmetrizedNetwork,
    weights: WeightVector,
    target_value: float,
    params: OracleParams,
    solve_tol: float | None = None,
    x0: np.ndarray | None = None,
) -> OracleOutcome:
    """One oracle call: price edges, solve the electrical flow, test its energy."""
    if target_value < 0:
        raise ValueError("target_value must be nonnegative")
    eps = params.epsilon
    r = compute_resistances(net, weights, eps)
    threshold = fail_threshold(net, weights, eps)
    if solve_tol is None:
        solve_tol = default_solve_tolerance(eps, net.edge_count)
    result = electrical_st_flow(net, r, target_value, solve_tol, x0=x0)
    cong = congestion_of(result.flow, net)
    diag = OracleDiagnostics(
        energy=result.energy,
        threshold=threshold,
        max_congestion=float(cong.max()) if len(cong) else 0.0,
        weighted_congestion=float(np.dot(weights.values, cong)),
        weight_total=weights.total,
        solver_iterations=result.iterations,
    )
    if result.energy > threshold:
        return OracleOutcome(Verdict.FAIL, result.flow, cong, result.potentials, diag)
    return OracleOutcome(Verdict.FLOW, result.flow, cong, result.potentials, diag)


def check_bounded_flow(
    net: SymmetrizedNetwork,
    values: np.ndarray,
    target_value: float,
    rtol: float = 1e-9,
) -> bool:
    """True iff ``values`` conserves, has value ``target_value``, and respects
    |f| <= (1+eps) * u_parent per edge, all within relative ``rtol``."""
    bound = (1.0 + net.epsilon) * net.parent_capacity
    if len(values) and float(np.max(np.abs(values) - bound * (1.0 + rtol))) > 0.0:
        return False
    resid = net.incidence @ values
    tol = rtol * max(1.0, abs(target_value))
    if abs(resid[net.source] - target_value) > tol:
        return False
    mask = np.ones(net.vertex_count, dtype=bool)
    mask[net.source] = False
    mask[net.sink] = False
    if mask.any() and float(np.abs(resid[mask]).max()) > tol:
        return False
    return True


def iteration_schedule(net: SymmetrizedNetwork, epsilon: float) -> int:
    """Theoretical oracle-call budget 2 * width * ln(edges) / eps^2."""
    params = OracleParams.for_network(net, epsilon)
    return math.ceil(2.0 * params.width * math.log(max(net.edge_count, 2)) / epsilon**2)


def sweep_cut_value(net: SymmetrizedNetwork, phi: np.ndarray) -> float:
    """Smallest s-t cut among potential threshold cuts {v: phi[v] > theta}.

    Any cut's capacity upper-bounds the undirected max flow, so a sweep cut
    below a requested flow value certifies that no flow of that value fits
    the edge capacities.  Returns inf when the potentials do not separate
    the source from the sink.
    """
    if net.edge_count == 0:
        return math.inf
    phi_s = phi[net.source]
    phi_t = phi[net.sink]
    if not phi_s > phi_t:
        return math.inf
    levels = np.unique(phi)
    lo = np.minimum(phi[net.tails], phi[net.heads])
    hi = np.maximum(phi[net.tails], phi[net.heads])
    li = np.searchsorted(levels, lo)
    hi_i = np.searchsorted(levels, hi)
    diff = np.zeros(len(levels) + 1)
    np.add.at(diff, li, net.capacities)
    np.add.at(diff, hi_i, -net.capacities)
    crossing = np.cumsum(diff)[:-1]  # capacity crossing (levels[j], levels[j+1])
    j_t = int(np.searchsorted(levels, phi_t))
    j_s = int(np.searchsorted(levels, phi_s))
    if j_s <= j_t:
        return math.inf
    return float(crossing[j_t:j_s].min())


@dataclass(frozen=True)
class BoundedFlowResult:
    """Outcome of `solve_bounded_flow`."""

    flow: Optional[FlowAssignment]
    iterations: int
    failure: Optional[str]  # None on success
    last_diagnostics: Optional[OracleDiagnostics]

    @property
    def succeeded(self) -> bool:
        return self.flow is not None


TraceCallback = Callable[[int, OracleDiagnostics], None]


def solve_bounded_flow(
    net: SymmetrizedNetwork,
    target_value: float,
    epsilon: float | None = None,
    max_iterations: int | None = None,
    trace: TraceCallback | None = None,
    verify_rtol: float = 1e-9,
) -> BoundedFlowResult:
    """Find an s-t flow of exactly ``target_value`` with every edge flow in
    ``[-(1+eps)u, +(1+eps)u]`` of its parent arc capacity, or report failure.

    Starts from unit weights and iterates the congestion oracle, reweighting
    edges by their congestion after each successful step.  Running averages
    of the iterate flows are checked against the contract every iteration
    and the first one that verifies is returned.  Failure happens when an
    oracle step's energy exceeds its threshold, or when the iteration budget
    (doubled once) runs out without a verified average.

    Requires ``target_value`` strictly above (1+eps) * total arc capacity's
    worth of link routing, i.e. the sum of boosted capacities.
    """
    eps = net.epsilon if epsilon is None else float(epsilon)
    baseline = (1.0 + eps) * float(net.arc_capacities.sum())
    if not target_value > baseline:
        raise ValueError(
            f"target value {target_value} must exceed the boosted capacity total "
            f"{baseline}"
        )
    params = OracleParams.for_network(net, eps)
    budget = iteration_schedule(net, eps)
    if max_iterations is not None:
        budget = min(budget, max_iterations)
    else:
        budget = min(budget, DEFAULT_ITERATION_CAP)
    budget = max(budget, 1)

    weights = WeightVector.ones(net.edge_count)
    log_scale = 0.0  # weights are renormalized; true total = total * exp(log_scale)
    solve_tol = default_solve_tolerance(eps, net.edge_count)
    flow_sum = np.zeros(net.edge_count)
    # Prefix snapshots let a burn-in-free "last half" average be formed at
    # any iteration with bounded lag; early iterates otherwise dominate the
    # plain average for a long time.
    snap_every = 32
    snapshots: dict[int, np.ndarray] = {0: np.zeros(net.edge_count)}
    phi_prev: np.ndarray | None = None
    bound = (1.0 + eps) * net.parent_capacity if net.edge_count else None

    allowed = budget
    doubled = False
    last_diag: Optional[OracleDiagnostics] = None
    best_overrun = math.inf
    best_overrun_iter = 0
    i = 0
    while True:
        if i >= allowed:
            if doubled:
                return BoundedFlowResult(None, i, "iteration-budget", last_diag)
            allowed *= 2
            doubled = True
        i += 1
        try:
            out = oracle_step(net, weights, target_value, params, solve_tol, x0=phi_prev)
        except DisconnectedNetworkError:
            return BoundedFlowResult(None, i, "disconnected", None)
        last_diag = OracleDiagnostics(
            energy=out.diagnostics.energy,
            threshold=out.diagnostics.threshold,
            max_congestion=out.diagnostics.max_congestion,
            weighted_congestion=out.diagnostics.weighted_congestion,
            weight_total=out.diagnostics.weight_total * math.exp(log_scale),
            solver_iterations=out.diagnostics.solver_iterations,
        )
        if trace is not None:
            trace(i, last_diag)
        if out.verdict is Verdict.FAIL:
            return BoundedFlowResult(None, i, "oracle-energy", last_diag)

        phi_prev = out.potentials
        flow_sum += out.flow.values
        half_start = (i // 2) // snap_every * snap_every
        candidates = [flow_sum / i]
        if 0 < half_start < i:
            candidates.append((flow_sum - snapshots[half_start]) / (i - half_start))
        candidates.append(out.flow.values)
        for cand in candidates:
            if check_bounded_flow(net, cand, target_value, verify_rtol):
                return BoundedFlowResult(FlowAssignment(net, cand), i, None, last_diag)
            overrun = float(np.max(np.abs(cand) / bound)) - 1.0
            if overrun < best_overrun * (1.0 - 1e-4):
                best_overrun = overrun
                best_overrun_iter = i
        if i % snap_every == 0:
            snapshots[i] = flow_sum.copy()
            for key in [k for k in snapshots if 0 < k < half_start]:
                del snapshots[key]
        # A run whose candidates have stopped approaching the per-edge bound
        # will not verify later either; bail instead of burning the budget.
        if i >= 600 and i - best_overrun_iter >= 400:
            return BoundedFlowResult(None, i, "stalled", last_diag)

        weights = _step_weights(weights, out.congestion, params)
        top = float(weights.values.max())
        if top > 1.0:
            log_scale += math.log(top)
            weights = weights.scaled(1.0 / top)
