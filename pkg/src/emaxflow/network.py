"""Capacitated digraphs, DIMACS max-flow I/O, and the undirected symmetrization.

The symmetrization turns every arc (u, v) of the input digraph into three
undirected edges: the original edge u-v at the arc's capacity, a source link
s-v and a sink link u-t, both at (1+eps) times the arc's capacity.  All flow
bookkeeping downstream (values, conservation residuals, congestion) lives on
`FlowAssignment`, which works for both the directed input and its
symmetrization.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple, Sequence, TextIO, Union

import numpy as np
import scipy.sparse as sp


class DimacsParseError(ValueError):
    """Malformed DIMACS max-flow input; the message names the offending line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message}, line {line}")
        self.line = line


class ConservationError(ValueError):
    """A flow violates conservation at an interior vertex."""


class ArcDropReason(enum.Enum):
    SELF_LOOP = "self-loop"
    ZERO_CAPACITY = "zero-capacity"


@dataclass(frozen=True)
class DroppedArc:
    """Record of an input arc removed at construction time."""

    input_index: int
    tail: int
    head: int
    capacity: float
    reason: ArcDropReason


class Provenance(enum.IntEnum):
    """Which of the three symmetrization edges a given edge is."""

    ORIGINAL = 0
    SOURCE_LINK = 1
    SINK_LINK = 2


class Edge(NamedTuple):
    tail: int
    head: int
    capacity: float
    provenance: Provenance
    parent_arc: int


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class DirectedNetwork:
    """A directed s-t flow network with nonnegative real arc capacities.

    Zero-capacity arcs and self-loops cannot carry s-t flow and are dropped
    at construction; the drops are recorded in ``dropped``.
    """

    def __init__(
        self,
        vertex_count: int,
        arcs: Iterable[tuple[int, int, float]],
        source: int,
        sink: int,
    ):
        vertex_count = int(vertex_count)
        if vertex_count < 2:
            raise ValueError("network needs at least two vertices")
        if not (0 <= source < vertex_count) or not (0 <= sink < vertex_count):
            raise ValueError("source and sink must be valid vertex ids")
        if source == sink:
            raise ValueError("source and sink must differ")

        tails: list[int] = []
        heads: list[int] = []
        caps: list[float] = []
        dropped: list[DroppedArc] = []
        for i, (u, v, c) in enumerate(arcs):
            u, v, c = int(u), int(v), float(c)
            if not (0 <= u < vertex_count) or not (0 <= v < vertex_count):
                raise ValueError(f"arc {i}: vertex out of range")
            if not np.isfinite(c) or c < 0:
                raise ValueError(f"arc {i}: capacity must be finite and >= 0")
            if u == v:
                dropped.append(DroppedArc(i, u, v, c, ArcDropReason.SELF_LOOP))
                continue
            if c == 0.0:
                dropped.append(DroppedArc(i, u, v, c, ArcDropReason.ZERO_CAPACITY))
                continue
            tails.append(u)
            heads.append(v)
            caps.append(c)

        self.vertex_count = vertex_count
        self.source = int(source)
        self.sink = int(sink)
        self.dropped = tuple(dropped)
        self.tails = _readonly(np.asarray(tails, dtype=np.int64))
        self.heads = _readonly(np.asarray(heads, dtype=np.int64))
        self.capacities = _readonly(np.asarray(caps, dtype=np.float64))

    @property
    def m(self) -> int:
        return len(self.tails)

    @property
    def edge_count(self) -> int:
        return len(self.tails)

    @property
    def arcs(self) -> list[tuple[int, int, float]]:
        return list(zip(self.tails.tolist(), self.heads.tolist(), self.capacities.tolist()))

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Signed vertex-edge incidence: +1 at the tail, -1 at the head."""
        return _incidence_matrix(self.vertex_count, self.tails, self.heads)

    def out_capacity(self, v: int) -> float:
        return float(self.capacities[self.tails == v].sum())

    def in_capacity(self, v: int) -> float:
        return float(self.capacities[self.heads == v].sum())

    def total_capacity(self) -> float:
        return float(self.capacities.sum())

    def __repr__(self) -> str:
        return (
            f"DirectedNetwork(n={self.vertex_count}, m={self.m}, "
            f"s={self.source}, t={self.sink})"
        )


class SymmetrizedNetwork:
    """The undirected multigraph produced by `symmetrize`.

    Edges are stored arc-major: arc i contributes edges 3i (original),
    3i+1 (source link), 3i+2 (sink link).  Each edge has a canonical
    positive orientation tail -> head; flows are signed against it.
    """

    def __init__(
        self,
        vertex_count: int,
        source: int,
        sink: int,
        epsilon: float,
        tails: np.ndarray,
        heads: np.ndarray,
        capacities: np.ndarray,
        provenance: np.ndarray,
        parent_arc: np.ndarray,
        arc_capacities: np.ndarray,
    ):
        self.vertex_count = int(vertex_count)
        self.source = int(source)
        self.sink = int(sink)
        self.epsilon = float(epsilon)
        self.tails = _readonly(tails)
        self.heads = _readonly(heads)
        self.capacities = _readonly(capacities)
        self.provenance = _readonly(provenance)
        self.parent_arc = _readonly(parent_arc)
        self.arc_capacities = _readonly(arc_capacities)
        self.parent_capacity = _readonly(arc_capacities[parent_arc] if len(parent_arc) else np.zeros(0))

    @property
    def m_arcs(self) -> int:
        return len(self.arc_capacities)

    @property
    def edge_count(self) -> int:
        return len(self.tails)

    @property
    def edges(self) -> list[Edge]:
        return [
            Edge(int(a), int(b), float(c), Provenance(int(p)), int(e))
            for a, b, c, p, e in zip(
                self.tails, self.heads, self.capacities, self.provenance, self.parent_arc
            )
        ]

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        return _incidence_matrix(self.vertex_count, self.tails, self.heads)

    @cached_property
    def vertex_components(self) -> np.ndarray:
        """Connected-component label per vertex of the support graph.

        Self-loop edges do not connect anything; isolated vertices get
        their own labels.
        """
        keep = self.tails != self.heads
        adj = sp.coo_matrix(
            (
                np.ones(int(keep.sum())),
                (self.tails[keep], self.heads[keep]),
            ),
            shape=(self.vertex_count, self.vertex_count),
        )
        n_comp, labels = sp.csgraph.connected_components(adj, directed=False)
        return _readonly(labels)

    def st_connected(self) -> bool:
        labels = self.vertex_components
        return bool(labels[self.source] == labels[self.sink])

    @cached_property
    def spanning_tree(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """BFS spanning tree of the source's component.

        Returns (order, parent_vertex, parent_edge): ``order`` lists tree
        vertices root-first, ``parent_edge[v]`` is the edge id connecting v
        to ``parent_vertex[v]`` (-1 at the root).  Deterministic: edges are
        scanned in index order.
        """
        n = self.vertex_count
        adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for k in range(self.edge_count):
            a, b = int(self.tails[k]), int(self.heads[k])
            if a == b:
                continue
            adj[a].append((b, k))
            adj[b].append((a, k))
        parent_vertex = np.full(n, -1, dtype=np.int64)
        parent_edge = np.full(n, -1, dtype=np.int64)
        seen = np.zeros(n, dtype=bool)
        order = [self.source]
        seen[self.source] = True
        head = 0
        while head < len(order):
            v = order[head]
            head += 1
            for w, k in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    parent_vertex[w] = v
                    parent_edge[w] = k
                    order.append(w)
        return np.asarray(order, dtype=np.int64), parent_vertex, parent_edge

    def __repr__(self) -> str:
        return (
            f"SymmetrizedNetwork(n={self.vertex_count}, edges={self.edge_count}, "
            f"eps={self.epsilon})"
        )


Network = Union[DirectedNetwork, SymmetrizedNetwork]


def _incidence_matrix(n: int, tails: np.ndarray, heads: np.ndarray) -> sp.csr_matrix:
    e = len(tails)
    if e == 0:
        return sp.csr_matrix((n, 0))
    rows = np.concatenate([tails, heads])
    cols = np.concatenate([np.arange(e), np.arange(e)])
    data = np.concatenate([np.ones(e), -np.ones(e)])
    return sp.coo_matrix((data, (rows, cols)), shape=(n, e)).tocsr()


def symmetrize(network: DirectedNetwork, epsilon: float) -> SymmetrizedNetwork:
    """Build the undirected symmetrization of ``network``.

    Arc (u, v) with capacity c yields, in order: the original edge u-v at
    capacity c, the source link s-v at (1+epsilon)c, and the sink link u-t
    at (1+epsilon)c.  Requires 0 < epsilon <= 1/2.
    """
    epsilon = float(epsilon)
    if not (0.0 < epsilon <= 0.5):
        raise ValueError(f"epsilon must lie in (0, 1/2], got {epsilon}")
    m = network.m
    u, v, c = network.tails, network.heads, network.capacities
    s = np.full(m, network.source, dtype=np.int64)
    t = np.full(m, network.sink, dtype=np.int64)
    boosted = (1.0 + epsilon) * c
    tails = np.stack([u, s, u], axis=1).ravel() if m else np.zeros(0, dtype=np.int64)
    heads = np.stack([v, v, t], axis=1).ravel() if m else np.zeros(0, dtype=np.int64)
    caps = np.stack([c, boosted, boosted], axis=1).ravel() if m else np.zeros(0)
    prov = np.tile(np.array([0, 1, 2], dtype=np.int8), m)
    parent = np.repeat(np.arange(m, dtype=np.int64), 3)
    return SymmetrizedNetwork(
        vertex_count=network.vertex_count,
        source=network.source,
        sink=network.sink,
        epsilon=epsilon,
        tails=tails,
        heads=heads,
        capacities=caps,
        provenance=prov,
        parent_arc=parent,
        arc_capacities=np.array(network.capacities, dtype=np.float64),
    )


class FlowAssignment:
    """Signed per-edge flow relative to each edge's canonical orientation."""

    __slots__ = ("network", "values")

    def __init__(self, network: Network, values):
        arr = np.array(values, dtype=np.float64)
        if arr.shape != (network.edge_count,):
            raise ValueError(
                f"expected {network.edge_count} edge values, got shape {arr.shape}"
            )
        self.network = network
        self.values = _readonly(arr)

    @classmethod
    def zeros(cls, network: Network) -> "FlowAssignment":
        return cls(network, np.zeros(network.edge_count))

    def residuals(self) -> np.ndarray:
        """Net outflow per vertex (positive = more flow leaving than entering)."""
        return self.network.incidence @ self.values

    def interior_residual_max(self) -> float:
        resid = self.residuals()
        mask = np.ones(self.network.vertex_count, dtype=bool)
        mask[self.network.source] = False
        mask[self.network.sink] = False
        if not mask.any():
            return 0.0
        return float(np.abs(resid[mask]).max())

    def source_outflow(self) -> float:
        """Net outflow at the source, without any conservation check."""
        return float(self.residuals()[self.network.source])

    def value(self, tol: float | None = None) -> float:
        return flow_value(self, tol=tol)

    def __repr__(self) -> str:
        return f"FlowAssignment(edges={len(self.values)}, value~{self.source_outflow():.6g})"


def flow_value(flow: FlowAssignment, tol: float | None = None) -> float:
    """Value of a conserving flow: its net outflow at the source.

    Raises `ConservationError` if any vertex other than the source or sink
    has a conservation residual above ``tol`` (default 1e-9 scaled by the
    largest flow magnitude).
    """
    if tol is None:
        scale = max(1.0, float(np.abs(flow.values).max()) if len(flow.values) else 0.0)
        tol = 1e-9 * scale
    resid = flow.residuals()
    net = flow.network
    for v in range(net.vertex_count):
        if v in (net.source, net.sink):
            continue
        if abs(resid[v]) > tol:
            raise ConservationError(
                f"conservation residual {resid[v]:.3e} at vertex {v} exceeds {tol:.3e}"
            )
    return float(resid[net.source])


def parse_dimacs(text: str | TextIO) -> DirectedNetwork:
    """Parse a DIMACS max-flow instance.

    Recognized lines: comments ``c ...``, one header ``p max <n> <m>``,
    node designations ``n <id> s|t`` (1-based ids), arcs
    ``a <tail> <head> <capacity>``.  Zero-capacity arcs and self-loops are
    dropped by the `DirectedNetwork` constructor and recorded there.
    """
    if hasattr(text, "read"):
        text = text.read()
    n = None
    source = None
    sink = None
    arcs: list[tuple[int, int, float]] = []
    header_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "p":
            if n is not None:
                raise DimacsParseError("duplicate problem line", lineno)
            if len(parts) != 4 or parts[1] != "max":
                raise DimacsParseError("malformed header, expected 'p max <n> <m>'", lineno)
            try:
                n = int(parts[2])
                int(parts[3])
            except ValueError:
                raise DimacsParseError("malformed header, expected integer sizes", lineno) from None
            if n < 1:
                raise DimacsParseError("vertex count must be positive", lineno)
            header_line = lineno
        elif tag == "n":
            if n is None:
                raise DimacsParseError("node line before header", lineno)
            if len(parts) != 3 or parts[2] not in ("s", "t"):
                raise DimacsParseError("malformed node line, expected 'n <id> s|t'", lineno)
            try:
                vid = int(parts[1]) - 1
            except ValueError:
                raise DimacsParseError("malformed node id", lineno) from None
            if not (0 <= vid < n):
                raise DimacsParseError("vertex out of range", lineno)
            if parts[2] == "s":
                if source is not None:
                    raise DimacsParseError("duplicate source designation", lineno)
                source = vid
            else:
                if sink is not None:
                    raise DimacsParseError("duplicate sink designation", lineno)
                sink = vid
        elif tag == "a":
            if n is None:
                raise DimacsParseError("arc line before header", lineno)
            if len(parts) != 4:
                raise DimacsParseError("malformed arc line, expected 'a <tail> <head> <cap>'", lineno)
            try:
                u = int(parts[1]) - 1
                v = int(parts[2]) - 1
                c = float(parts[3])
            except ValueError:
                raise DimacsParseError("malformed arc line", lineno) from None
            if not (0 <= u < n) or not (0 <= v < n):
                raise DimacsParseError("vertex out of range", lineno)
            if not np.isfinite(c) or c < 0:
                raise DimacsParseError("capacity must be finite and >= 0", lineno)
            arcs.append((u, v, c))
        else:
            raise DimacsParseError(f"unknown line tag {tag!r}", lineno)
    if n is None:
        raise DimacsParseError("missing header", 1)
    if source is None:
        raise DimacsParseError("missing source designation", header_line)
    if sink is None:
        raise DimacsParseError("missing sink designation", header_line)
    if source == sink:
        raise DimacsParseError("source and sink must differ", header_line)
    return DirectedNetwork(n, arcs, source, sink)


def write_dimacs(network: DirectedNetwork, fp: TextIO | None = None) -> str:
    """Serialize a network in DIMACS max-flow format (1-based vertex ids)."""
    lines = [f"p max {network.vertex_count} {network.m}"]
    lines.append(f"n {network.source + 1} s")
    lines.append(f"n {network.sink + 1} t")
    for u, v, c in zip(network.tails, network.heads, network.capacities):
        lines.append(f"a {u + 1} {v + 1} {c:.12g}")
    text = "\n".join(lines) + "\n"
    if fp is not None:
        fp.write(text)
    return text
