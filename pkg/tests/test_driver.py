import json

import numpy as np
import pytest

from emaxflow import (
    DirectedNetwork,
    SolveReport,
    approx_max_flow,
    exact_max_flow,
    exact_undirected_max_flow,
    symmetrize,
    undirected_max_flow_witness,
)

from corpus import nonempty_network, random_network
from oracles import brute_force_max_flow, directed_min_cut, undirected_min_cut


def diamond():
    return DirectedNetwork(
        4, [(0, 1, 3), (0, 2, 2), (1, 3, 2), (2, 3, 3), (1, 2, 1)], 0, 3
    )


class TestExactMaxFlow:
    def test_single_arc(self):
        G = DirectedNetwork(2, [(0, 1, 5.0)], 0, 1)
        value, flow = exact_max_flow(G)
        assert value == 5.0
        assert flow.values == pytest.approx([5.0])

    def test_path_bottleneck(self):
        G = DirectedNetwork(3, [(0, 1, 1.0), (1, 2, 1.0)], 0, 2)
        value, _ = exact_max_flow(G)
        assert value == 1.0

    def test_diamond(self):
        value, flow = exact_max_flow(diamond())
        assert value == 5.0
        assert flow.value() == pytest.approx(5.0)
        assert directed_min_cut(diamond()) == 5.0

    def test_witness_is_feasible(self):
        for seed in (0, 3, 7, 11):
            G = nonempty_network(seed)
            value, flow = exact_max_flow(G)
            assert (flow.values >= -1e-12).all()
            assert (flow.values <= G.capacities + 1e-12).all()
            assert flow.value() == pytest.approx(value, abs=1e-9)

    def test_integral_instances_integral_values(self):
        for seed in range(20):
            G = random_network(seed)
            value, _ = exact_max_flow(G)
            assert value == int(value)

    def test_matches_cut_enumeration(self):
        for seed in range(25):
            G = random_network(seed, n_max=8)
            value, _ = exact_max_flow(G)
            assert value == pytest.approx(directed_min_cut(G), abs=1e-9)

    def test_matches_brute_force(self):
        for seed in range(15):
            G = random_network(seed, n_max=5, m_max=8, cap_max=2)
            value, _ = exact_max_flow(G)
            assert value == brute_force_max_flow(G)


class TestExactUndirected:
    def test_single_arc_value(self):
        G = DirectedNetwork(2, [(0, 1, 1.0)], 0, 1)
        net = symmetrize(G, 0.5)
        assert exact_undirected_max_flow(net) == pytest.approx(4.0)

    def test_two_arc_path_small_epsilon(self):
        G = DirectedNetwork(3, [(0, 1, 1.0), (1, 2, 1.0)], 0, 2)
        net = symmetrize(G, 1e-9)
        assert exact_undirected_max_flow(net) == pytest.approx(4.0, rel=1e-6)

    def test_empty(self):
        G = DirectedNetwork(2, [], 0, 1)
        net = symmetrize(G, 0.25)
        assert exact_undirected_max_flow(net) == 0.0

    def test_matches_cut_enumeration(self):
        for seed in range(20):
            G = random_network(seed, n_max=7)
            if G.m == 0:
                continue
            net = symmetrize(G, 0.3)
            assert exact_undirected_max_flow(net) == pytest.approx(
                undirected_min_cut(net), rel=1e-9
            )

    def test_witness_conserves(self):
        net = symmetrize(nonempty_network(3), 0.25)
        value, flow = undirected_max_flow_witness(net)
        assert flow.value() == pytest.approx(value, abs=1e-9)
        assert (np.abs(flow.values) <= net.capacities + 1e-9).all()


class TestReductionValueStructure:
    """What the symmetrized max flow actually equals, versus the claimed
    closed form (2+eps) F* + (1+eps) U, which fails on real digraphs."""

    @staticmethod
    def _cut_form(G, eps):
        """min over s-side subsets of (2+eps)*leaving - eps*entering, plus
        (1+eps) * total capacity: the true undirected min cut."""
        import itertools

        n = G.vertex_count
        others = [v for v in range(n) if v not in (G.source, G.sink)]
        best = np.inf
        for bits in itertools.product((0, 1), repeat=len(others)):
            side = {G.source: 1, G.sink: 0}
            side.update(dict(zip(others, bits)))
            leaving = sum(
                c
                for u, v, c in zip(G.tails, G.heads, G.capacities)
                if side[int(u)] and not side[int(v)]
            )
            entering = sum(
                c
                for u, v, c in zip(G.tails, G.heads, G.capacities)
                if not side[int(u)] and side[int(v)]
            )
            best = min(best, (2 + eps) * leaving - eps * entering)
        return best + (1 + eps) * G.total_capacity()

    def test_general_cut_formula_always_matches(self):
        for seed in range(30):
            G = random_network(seed, n_max=8)
            if G.m == 0:
                continue
            for eps in (0.1, 0.4):
                net = symmetrize(G, eps)
                assert exact_undirected_max_flow(net) == pytest.approx(
                    self._cut_form(G, eps), rel=1e-9
                )

    def test_closed_form_holds_without_entering_arcs(self):
        # two-layer networks (every arc leaves s or enters t) never have an
        # arc entering a cut's source side, so the closed form is exact.
        G = DirectedNetwork(
            4, [(0, 1, 2), (1, 3, 1), (0, 2, 1), (2, 3, 3), (0, 3, 1)], 0, 3
        )
        fstar, _ = exact_max_flow(G)
        for eps in (0.1, 0.25, 0.4):
            net = symmetrize(G, eps)
            expected = (2 + eps) * fstar + (1 + eps) * G.total_capacity()
            assert exact_undirected_max_flow(net) == pytest.approx(expected, rel=1e-12)

    def test_closed_form_counterexample(self):
        # A 5-arc DAG on which the closed form overstates the undirected
        # max flow by 5*eps: the cut {s, a} counts the heavy entering arc.
        G = DirectedNetwork(
            4, [(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1), (2, 1, 5)], 0, 3
        )
        fstar, _ = exact_max_flow(G)
        assert fstar == 2.0
        for eps in (0.1, 0.25, 0.4):
            net = symmetrize(G, eps)
            actual = exact_undirected_max_flow(net)
            assert actual == pytest.approx(13 + 6 * eps, rel=1e-9)
            claimed = (2 + eps) * fstar + (1 + eps) * G.total_capacity()
            assert claimed == pytest.approx(13 + 11 * eps, rel=1e-12)
            assert actual < claimed - 1e-6


class TestApproxMaxFlow:
    def test_single_arc(self):
        G = DirectedNetwork(2, [(0, 1, 1.0)], 0, 1)
        rec, report = approx_max_flow(G, 0.25, exact_check=True)
        assert rec.value >= 0.75
        assert report.exact_value == 1.0
        assert report.ratio >= 0.75

    def test_disconnected_returns_zero_without_oracle_calls(self):
        G = DirectedNetwork(4, [(0, 1, 2.0), (2, 3, 2.0)], 0, 3)
        rec, report = approx_max_flow(G, 0.2)
        assert rec.value == 0.0
        assert report.oracle_calls == 0

    def test_empty_graph(self):
        G = DirectedNetwork(2, [], 0, 1)
        rec, report = approx_max_flow(G, 0.2, exact_check=True)
        assert rec.value == 0.0
        assert report.exact_value == 0.0

    def test_diamond(self):
        rec, report = approx_max_flow(diamond(), 0.1, exact_check=True)
        assert report.exact_value == 5.0
        assert rec.value >= 4.5

    def test_epsilon_range(self):
        with pytest.raises(ValueError):
            approx_max_flow(diamond(), 0.7)
        with pytest.raises(ValueError):
            approx_max_flow(diamond(), 0.0)

    def test_feasibility_unconditional(self):
        for seed in (0, 5, 9, 14):
            G = nonempty_network(seed)
            rec, _ = approx_max_flow(G, 0.25)
            f = rec.directed_flow.values
            assert (f >= 0).all()
            assert (f <= G.capacities + 1e-12).all()
            assert rec.directed_flow.interior_residual_max() <= 1e-9 * max(
                1.0, rec.value
            )

    def test_never_beats_optimum(self):
        for seed in (0, 3, 8, 15):
            G = nonempty_network(seed)
            rec, report = approx_max_flow(G, 0.2, exact_check=True)
            assert rec.value <= report.exact_value * (1 + 1e-6)
            if report.exact_value > 0:
                assert report.ratio <= 1 + 1e-9

    def test_guarantee_on_small_corpus(self):
        for seed in range(12):
            G = random_network(seed)
            eps = (0.1, 0.25)[seed % 2]
            rec, report = approx_max_flow(G, eps, exact_check=True)
            if report.exact_value and report.exact_value > 0:
                assert rec.value >= (1 - eps) * report.exact_value - 1e-9

    def test_trace_lines_match_oracle_calls(self):
        records = []
        _, report = approx_max_flow(
            diamond(), 0.25, on_trace=lambda rec: records.append(rec)
        )
        assert len(records) == report.oracle_calls
        assert len(report.trace) == report.oracle_calls
        assert {"probe", "iter", "energy", "threshold", "max_cong"} <= set(
            records[0].keys()
        )

    def test_epsilon_budget_composition(self):
        # the internal split must leave (1-eps) of the optimum: a (1+eps')
        # recovery loss times the (1+eps'/2)(1+eps') search gap, eps' = eps/4
        for eps in np.linspace(0.01, 0.499, 200):
            eps_i = eps / 4
            worst = (1 + eps_i) * (1 + eps_i / 2) * (1 + eps_i)
            assert 1.0 / worst >= 1 - eps


class TestSolveReport:
    def test_roundtrip(self):
        _, report = approx_max_flow(diamond(), 0.25, exact_check=True, instance="d")
        payload = json.dumps(report.to_dict())
        again = SolveReport.from_dict(json.loads(payload))
        assert again.to_dict() == report.to_dict()

    def test_twelve_significant_digits(self):
        _, report = approx_max_flow(diamond(), 0.25, exact_check=True)
        d = report.to_dict()
        assert d["approx_value"] == float(f"{d['approx_value']:.12g}")
        assert set(d.keys()) == {
            "instance",
            "n",
            "m",
            "epsilon",
            "approx_value",
            "exact_value",
            "ratio",
            "search_iterations",
            "oracle_calls",
            "mwu_iterations_total",
            "fail_count",
            "wall_time_ms",
        }
