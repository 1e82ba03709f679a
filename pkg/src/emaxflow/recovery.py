"""Recover a feasible directed flow from a bounded symmetrized flow.

Pipeline: subtract the canonical per-arc link routing and halve, cancel all
directed cycles in the result, then read the original-edge flows back onto
the arcs (scaling down once if any arc exceeds its capacity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import DirectedNetwork, FlowAssignment, Provenance, SymmetrizedNetwork


class RecoveryError(ValueError):
    """Input flow violates the bounds the recovery pipeline relies on."""


@dataclass(frozen=True)
class RecoveryResult:
    """A feasible directed flow extracted from the undirected solve."""

    directed_flow: FlowAssignment
    value: float
    scaled: bool
    max_capacity_ratio: float


def link_routing_values(net: SymmetrizedNetwork) -> np.ndarray:
    """The summed canonical routings, one per arc: (1+eps)*u via the source
    link, backwards across the original edge, and out the sink link."""
    sign = np.array([-1.0, 1.0, 1.0])[net.provenance]
    return sign * (1.0 + net.epsilon) * net.parent_capacity


def subtract_and_halve(flow: FlowAssignment, rtol: float = 1e-9) -> FlowAssignment:
    """Halve the flow minus the canonical link routing.

    For an input satisfying the bounded-flow contract, the output carries
    each original edge forward in [0, (1+eps)u], each link edge backward in
    [-(1+eps)u, 0], and has value (input value - (1+eps)*total capacity)/2.
    Out-of-range outputs (beyond ``rtol``) raise `RecoveryError`.
    """
    net = flow.network
    if not isinstance(net, SymmetrizedNetwork):
        raise TypeError("subtract_and_halve expects a flow on a SymmetrizedNetwork")
    vals = 0.5 * (flow.values - link_routing_values(net))
    bound = (1.0 + net.epsilon) * net.parent_capacity
    tol = rtol * np.maximum(1.0, bound)
    original = net.provenance == Provenance.ORIGINAL
    bad_low = np.where(original, vals < -tol, vals < -bound - tol)
    bad_high = np.where(original, vals > bound + tol, vals > tol)
    if bad_low.any() or bad_high.any():
        k = int(np.flatnonzero(bad_low | bad_high)[0])
        raise RecoveryError(
            f"edge {k} value {vals[k]:.6g} outside its recovery range; "
            "input was not a valid bounded flow"
        )
    return FlowAssignment(net, vals)


def cycle_cancel(flow: FlowAssignment) -> FlowAssignment:
    """Remove all directed cycles from the flow's support, preserving value.

    Edges are oriented by the sign of their flow; repeatedly find a directed
    cycle by depth-first search and subtract the cycle's minimum flow.  No
    edge's magnitude ever increases, and each cancellation zeroes at least
    one edge, so this terminates with an acyclic support.
    """
    net = flow.network
    vals = np.array(flow.values)
    n = net.vertex_count
    tails = net.tails
    heads = net.heads

    # A self-loop with flow is a one-edge cycle.
    vals[np.asarray(tails == heads)] = 0.0

    adj: list[list[int]] = [[] for _ in range(n)]
    for k in range(len(vals)):
        a, b = int(tails[k]), int(heads[k])
        if a != b and vals[k] != 0.0:
            adj[a].append(k)
            adj[b].append(k)

    color = np.zeros(n, dtype=np.int8)  # 0 white, 1 on current path, 2 finished
    ptr = np.zeros(n, dtype=np.int64)
    pos_on_path = np.full(n, -1, dtype=np.int64)

    def head_of(k: int) -> int:
        return int(heads[k]) if vals[k] > 0.0 else int(tails[k])

    def tail_of(k: int) -> int:
        return int(tails[k]) if vals[k] > 0.0 else int(heads[k])

    for root in range(n):
        if color[root] != 0:
            continue
        color[root] = 1
        ptr[root] = 0
        path_v = [root]
        path_e: list[int] = [-1]
        pos_on_path[root] = 0
        while path_v:
            u = path_v[-1]
            moved = False
            while ptr[u] < len(adj[u]):
                k = adj[u][ptr[u]]
                if vals[k] == 0.0 or tail_of(k) != u:
                    ptr[u] += 1
                    continue
                w = head_of(k)
                if color[w] == 2:
                    ptr[u] += 1
                    continue
                if color[w] == 1:
                    # Cycle: path section from w to u, plus edge k back to w.
                    start = int(pos_on_path[w])
                    cyc = path_e[start + 1 :] + [k]
                    c = min(abs(vals[e]) for e in cyc)
                    for e in cyc:
                        vals[e] -= c if vals[e] > 0 else -c
                    # Retreat to w; support only shrinks, so finished
                    # vertices stay finished and w's scan position stands.
                    for v2 in path_v[start + 1 :]:
                        color[v2] = 0
                        pos_on_path[v2] = -1
                        ptr[v2] = 0
                    del path_v[start + 1 :]
                    del path_e[start + 1 :]
                    moved = True
                    break
                color[w] = 1
                ptr[w] = 0
                pos_on_path[w] = len(path_v)
                path_v.append(w)
                path_e.append(k)
                moved = True
                break
            if not moved:
                color[u] = 2
                pos_on_path[u] = -1
                path_v.pop()
                path_e.pop()
    return FlowAssignment(net, vals)


def extract_directed(
    flow: FlowAssignment, network: DirectedNetwork, rtol: float = 1e-9
) -> RecoveryResult:
    """Map an acyclic symmetrized flow back onto the arcs of ``network``.

    Link edges must carry (numerically) zero flow and original edges must be
    nonnegative.  If some arc exceeds its capacity the whole flow is scaled
    by the worst capacity ratio, which recovery's range bounds keep at most
    (1+eps).
    """
    net = flow.network
    if not isinstance(net, SymmetrizedNetwork):
        raise TypeError("extract_directed expects a flow on a SymmetrizedNetwork")
    if net.m_arcs != network.m:
        raise ValueError("symmetrized network does not match the directed network")
    cap_scale = float(net.capacities.max()) if net.edge_count else 1.0
    link_tol = rtol * max(1.0, cap_scale)
    original = np.asarray(net.provenance == Provenance.ORIGINAL)
    link_vals = flow.values[~original]
    if len(link_vals) and float(np.abs(link_vals).max()) > link_tol:
        raise RecoveryError(
            f"link edge still carries {np.abs(link_vals).max():.3e} after canceling"
        )
    arc_vals = np.array(flow.values[original])
    if len(arc_vals) and float(arc_vals.min()) < -link_tol:
        raise RecoveryError(f"negative original-edge flow {arc_vals.min():.3e}")
    np.clip(arc_vals, 0.0, None, out=arc_vals)

    caps = network.capacities
    ratio = float((arc_vals / caps).max()) if len(arc_vals) else 0.0
    scaled = ratio > 1.0
    if scaled:
        arc_vals /= ratio
    np.clip(arc_vals, 0.0, caps, out=arc_vals)
    directed = FlowAssignment(network, arc_vals)
    value = directed.source_outflow()
    return RecoveryResult(
        directed_flow=directed,
        value=value,
        scaled=scaled,
        max_capacity_ratio=ratio,
    )


def recover_directed_flow(
    flow: FlowAssignment, network: DirectedNetwork, rtol: float = 1e-9
) -> RecoveryResult:
    """Full pipeline: subtract and halve, cancel cycles, extract arc flows."""
    halved = subtract_and_halve(flow, rtol=rtol)
    acyclic = cycle_cancel(halved)
    return extract_directed(acyclic, network, rtol=rtol)
