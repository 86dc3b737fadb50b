import numpy as np
import pytest

from capclust.assign import brute_force_opt, optimal_assignment, verify_solution
from capclust.instance import InfeasibleError, Solution, generate_instance
from capclust.reroute import (DemandFlow, ExchangeMatching, build_exchange_graph,
                              build_reassignment, build_sequences,
                              build_structure, heavy_path_length_sum,
                              heavy_unmatched_report, max_demand_flow,
                              partition_and_pairs, path_length,
                              round_fractional_matching, round_matching,
                              sample_pair_closing, sample_swap,
                              sequence_edge_disjoint)

from conftest import plane_instance


def make_pair(inst, first_centers, first_assign, second_centers,
              second_assign):
    first = Solution.from_assignment(inst, first_centers, first_assign)
    second = Solution.from_assignment(inst, second_centers, second_assign)
    return first, second


def random_pair(seed, n=8, m=5, k=3, eta=3, p=1.0):
    """Oracle-optimal first solution and a perturbed second of equal size."""
    rng = np.random.default_rng(seed)
    inst = generate_instance("uniform-square", n=n, m=m, k=k, eta=eta, p=p,
                             seed=seed)
    opt = brute_force_opt(inst)
    size = len(opt.centers)
    for _ in range(50):
        cand = tuple(sorted(rng.choice(m, size=size, replace=False).tolist()))
        if size * eta >= n:
            try:
                ref = optimal_assignment(inst, cand)
                return inst, opt, ref
            except InfeasibleError:
                continue
    raise RuntimeError("no reference found")


# ------------------------------------------------------ exchange graph

def test_identical_solutions_edge_costs():
    inst = plane_instance([(0, 0), (1, 0), (3, 0), (4, 0)],
                          [(0.5, 0), (3.5, 0)], k=2, eta=2, p=1.0)
    sol = optimal_assignment(inst, (0, 1))
    net = build_exchange_graph(inst, sol, sol)
    assert net.deleted == []  # eta even
    for e in net.edges:
        d = inst.unit_cost(e.unit, net.a_centers[e.a])
        assert e.cost == pytest.approx(2 * d)
        assert net.a_centers[e.a] == net.b_centers[e.b]


def test_parity_preprocessing_derived():
    # eta = 3, one center each side serving the same 3 clients
    inst = plane_instance([(0, 0), (1, 0), (2, 0)], [(1, 0), (1.25, 0)],
                          k=1, eta=3, p=1.0)
    first, second = make_pair(inst, (0,), (0, 0, 0), (1,), (1, 1, 1))
    net = build_exchange_graph(inst, first, second)
    assert len(net.deleted) == 1
    assert net.eta_prime == 2
    assert net.deg_a == [2] and net.deg_b == [2]


def test_eta_one_rejected():
    inst = plane_instance([(0, 0)], [(0, 0)], k=1, eta=1, p=1.0)
    sol = optimal_assignment(inst, (0,))
    with pytest.raises(ValueError, match="eta >= 2"):
        build_exchange_graph(inst, sol, sol)


# --------------------------------------------------------- demand flow

def test_flow_identical_solutions_even_eta():
    inst = plane_instance([(0, 0), (1, 0), (3, 0), (4, 0)],
                          [(0.5, 0), (3.5, 0)], k=2, eta=2, p=1.0)
    sol = optimal_assignment(inst, (0, 1))
    net = build_exchange_graph(inst, sol, sol)
    flow = max_demand_flow(net)
    for e in net.edges:
        assert flow.edge_flow[e.eid] in (0, 2)
    for i in range(len(net.a_centers)):
        assert flow.through_a[i] >= 2 * (net.deg_a[i] // 2)
    for j in range(len(net.b_centers)):
        assert flow.through_b[j] >= 2 * (net.deg_b[j] // 2)
    assert flow.cost <= 2 * (sol.cost + sol.cost) + 1e-9


def test_flow_zero_demand_single_client():
    inst = plane_instance([(0, 0)], [(0.5, 0), (5, 0)], k=2, eta=2, p=1.0)
    first, second = make_pair(inst, (0,), (0,), (1,), (1,))
    net = build_exchange_graph(inst, first, second)
    assert net.deg_a == [1] and net.deg_b == [1]
    flow = max_demand_flow(net)
    # demand 2*floor(1/2) = 0 on both sides; flow may still be maximal
    assert flow.edge_flow[0] in (0, 2)


def test_flow_invariants_random():
    for seed in range(25):
        inst, opt, ref = random_pair(seed)
        net = build_exchange_graph(inst, opt, ref)
        flow = max_demand_flow(net)
        for e in net.edges:
            assert flow.edge_flow[e.eid] in (0, 2)
        for i in range(len(net.a_centers)):
            assert flow.through_a[i] >= 2 * (net.deg_a[i] // 2)
            assert flow.through_a[i] <= net.eta_prime
        for j in range(len(net.b_centers)):
            assert flow.through_b[j] >= 2 * (net.deg_b[j] // 2)
            assert flow.through_b[j] <= net.eta_prime
        assert flow.cost <= 2 * (opt.cost + ref.cost) + 1e-9


# ------------------------------------------------------------ matching

def test_round_fractional_matching_simple():
    # triangle-ish fractional values must round to a matching covering the
    # saturated vertex
    edges = [(0, 0, 0, 1.0, 0.5), (1, 0, 1, 2.0, 0.5)]
    chosen = round_fractional_matching(1, 2, edges)
    assert len(chosen) == 1
    assert chosen == [0]  # lower weight kept


def test_matching_identical_solutions_saturated():
    # two centers each serving exactly eta' clients of their own copy
    inst = plane_instance([(0, 0), (0.5, 0), (3, 0), (3.5, 0)],
                          [(0.25, 0), (3.25, 0), (0.3, 0), (3.3, 0)],
                          k=2, eta=2, p=1.0)
    first, second = make_pair(inst, (0, 1), (0, 0, 1, 1),
                              (2, 3), (2, 2, 3, 3))
    net = build_exchange_graph(inst, first, second)
    flow = max_demand_flow(net)
    assert flow.saturated_a(net) == [0, 1]
    assert flow.saturated_b(net) == [0, 1]
    matching = round_matching(net, flow)
    assert matching.matched_a == {0, 1}
    assert matching.a_of_b == {0: 0, 1: 1}
    assert matching.weight <= flow.cost / net.eta_prime + 1e-9


def test_matching_covers_saturated_random():
    for seed in range(25):
        inst, opt, ref = random_pair(seed, n=8, m=5, k=4, eta=2)
        net = build_exchange_graph(inst, opt, ref)
        flow = max_demand_flow(net)
        matching = round_matching(net, flow)
        heavy = [i for i in range(len(net.a_centers))
                 if net.deg_a[i] >= net.eta_prime / 2]
        for i in flow.saturated_a(net):
            if i in heavy:
                assert i in matching.matched_a
        for j in flow.saturated_b(net):
            assert j in matching.matched_b
        assert matching.weight <= 2 * (opt.cost + ref.cost) / net.eta_prime \
            + 1e-9
        # matched pairs only along positive-flow edges
        for eid in matching.edge_ids:
            assert flow.edge_flow[eid] > 0


# ------------------------------------------------------------ sequences

def chain_fixture():
    """f0 heavy unmatched; its single edge routes to matched f1."""
    inst = plane_instance([(0.25, 0), (1.2, 0)],
                          [(0, 0), (1.5, 0), (1, 0), (5, 0)],
                          k=2, eta=2, p=1.0)
    first, second = make_pair(inst, (0, 1), (0, 1), (2, 3), (2, 2))
    net = build_exchange_graph(inst, first, second)
    flow = max_demand_flow(net)
    matching = round_matching(net, flow)
    return inst, net, flow, matching


def test_sequences_route_to_matched_hand():
    inst, net, flow, matching = chain_fixture()
    # the f1 -> l1 edge carries the flow and forms the matched pair
    assert matching.a_of_b == {0: 1}
    seq_map = build_sequences(net, flow, matching)
    assert len(seq_map.seqs) == 1
    seq = seq_map.seqs[0]
    assert seq.start_a == 0
    assert seq.kind == "matched"
    assert seq.terminal == 1
    assert len(seq.edges) == 1


def test_sequences_two_hop_chain_hand():
    # f0 -> l1 (matched to f1), f1 -> l2 unmatched: chain of length 2
    inst = plane_instance([(0.25, 0), (1.2, 0), (4.8, 0)],
                          [(0, 0), (1.5, 0), (1, 0), (5, 0)],
                          k=3, eta=2, p=1.0)
    first, second = make_pair(inst, (0, 1), (0, 1, 1), (2, 3), (2, 2, 3))
    net = build_exchange_graph(inst, first, second)
    flow = max_demand_flow(net)
    matching = round_matching(net, flow)
    assert matching.a_of_b == {0: 1}
    seq_map = build_sequences(net, flow, matching)
    chains = {s.start_a: s for s in seq_map.seqs}
    seq = chains[0]
    assert seq.kind == "unmatched"
    assert seq.terminal == 1  # ends at l2
    assert len(seq.edges) == 2
    units = [net.edges[eid].unit for eid in seq.edges]
    assert units == [0, 1]


def test_sequences_empty_matching_all_length_one():
    inst = plane_instance([(0, 0), (4, 0)], [(0.5, 0), (4.5, 0),
                                             (1, 0), (5, 0)],
                          k=2, eta=4, p=1.0)
    first, second = make_pair(inst, (0, 1), (0, 1), (2, 3), (2, 3))
    net = build_exchange_graph(inst, first, second)
    # degrees 1 < eta'/2: no saturation, force empty matching
    flow = max_demand_flow(net)
    matching = ExchangeMatching([], {}, {}, 0.0)
    seq_map = build_sequences(net, flow, matching)
    assert all(len(s.edges) == 1 and s.kind == "unmatched"
               for s in seq_map.seqs)


def test_sequence_edge_disjointness_random():
    for seed in range(40):
        inst, opt, ref = random_pair(seed, n=10, m=5, k=4, eta=3)
        state = build_structure(inst, opt, ref)
        assert sequence_edge_disjoint(state.seq_map)


# ------------------------------------------------------------- lemma 8

def test_heavy_unmatched_bound_random():
    for seed in range(40):
        inst, opt, ref = random_pair(seed, n=10, m=5, k=4, eta=4)
        state = build_structure(inst, opt, ref)
        assert heavy_unmatched_report(state.net, state.matching,
                                      state.seq_map) == []


def test_heavy_unmatched_negative_control():
    # one center serving 4 on each side; a truncated flow leaves it
    # unmatched with 4 unmatched-routed sequences > eta'/2 - 1 = 1
    inst = plane_instance([(0, 0), (0.5, 0), (1, 0), (1.5, 0)],
                          [(0.75, 0), (0.8, 0)], k=1, eta=4, p=1.0)
    first, second = make_pair(inst, (0,), (0,) * 4, (1,), (1,) * 4)
    net = build_exchange_graph(inst, first, second)
    honest = max_demand_flow(net)
    assert heavy_unmatched_report(
        net, round_matching(net, honest), build_sequences(
            net, honest, round_matching(net, honest))) == []
    truncated = DemandFlow([2, 0, 0, 0], [2], [2], 2.0, 1)
    matching = round_matching(net, truncated)
    assert matching.edge_ids == []  # nothing saturated anymore
    seq_map = build_sequences(net, truncated, matching)
    report = heavy_unmatched_report(net, matching, seq_map)
    assert report, "expected a violation from the truncated flow"


# ------------------------------------------------------- reassignment

def test_mu_identity_when_solutions_match():
    inst = plane_instance([(0, 0), (1, 0), (3, 0), (4, 0)],
                          [(0.5, 0), (3.5, 0)], k=2, eta=2, p=1.0)
    sol = optimal_assignment(inst, (0, 1))
    state = build_structure(inst, sol, sol)
    assert state.reassignment.moved_units == ()
    assert state.reassignment.assignment == sol.assignment
    assert state.reassignment.violations == []


def test_mu_hand_chain_bookkeeping():
    inst, net, flow, matching = chain_fixture()
    seq_map = build_sequences(net, flow, matching)
    mu = build_reassignment(net, matching, seq_map)
    # the one client of heavy unmatched f0 reroutes to f1
    assert mu.moved_units == (0,)
    assert mu.assignment[0] == net.a_centers[1]
    assert mu.violations == []
    # nu <= eta' accounting for the matched pair (l1, f1):
    b, a = 0, 1
    incoming = [e for e in net.edges if e.b == b and e.a != a]
    outgoing = [e for e in net.edges if e.a == a and e.b != b]
    between = [e for e in net.edges if e.a == a and e.b == b]
    t_plain = sum(1 for e in incoming if flow.edge_flow[e.eid] == 0)
    t_sat = sum(1 for e in incoming if flow.edge_flow[e.eid] == 2)
    s_plain = sum(1 for e in outgoing if flow.edge_flow[e.eid] == 0)
    s_sat = sum(1 for e in outgoing if flow.edge_flow[e.eid] == 2)
    m_plain = sum(1 for e in between if flow.edge_flow[e.eid] == 0)
    m_sat = sum(1 for e in between if flow.edge_flow[e.eid] == 2)
    assert (t_plain, t_sat, s_plain, s_sat, m_plain, m_sat) == \
        (1, 0, 0, 0, 0, 1)
    nu = s_sat + s_plain + m_plain + m_sat + \
        max(t_sat - s_sat, 0) + max(t_plain - s_plain, 0)
    assert nu <= net.eta_prime
    # path length bounds the rerouted distance
    seq = seq_map.seqs[0]
    length = path_length(net, matching, seq)
    moved_dist = inst.metric.dist(inst.clients[0],
                                  inst.metric.coords.shape[0] and
                                  inst.facilities[net.a_centers[1]])
    assert moved_dist <= length + 1e-12


def test_mu_properties_random():
    for p in (1.0, 2.0):
        for seed in range(30):
            inst, opt, ref = random_pair(seed, n=10, m=5, k=4, eta=4, p=p)
            state = build_structure(inst, opt, ref)
            assert state.reassignment.violations == []
            bound = (4.0 if p == 1 else 2.0 ** (4 * p)) * \
                (opt.cost + ref.cost)
            assert heavy_path_length_sum(
                state.net, state.matching, state.seq_map) <= bound + 1e-9
            # untouched clients keep their original cost
            for u in range(inst.n):
                if u not in state.reassignment.moved_units:
                    assert state.reassignment.assignment[u] == \
                        opt.assignment[u]


# ------------------------------------------------- partition and pairs

def test_partition_all_matched():
    inst = plane_instance([(0, 0), (0.5, 0), (3, 0), (3.5, 0)],
                          [(0.25, 0), (3.25, 0), (0.3, 0), (3.3, 0)],
                          k=2, eta=2, p=1.0)
    first, second = make_pair(inst, (0, 1), (0, 0, 1, 1),
                              (2, 3), (2, 2, 3, 3))
    state = build_structure(inst, first, second)
    part = state.partition
    assert part.close_a == [] and part.close_b == []
    assert part.pairs == []
    assert len(part.swap_a) == len(part.swap_b) == 2


def test_partition_shared_target_makes_pair():
    # two unmatched first-side centers share the nearest unmatched second
    inst = plane_instance([(0, 0), (10, 0), (20, 0)],
                          [(0, 0), (10, 0), (20, 0), (4, 0), (40, 0),
                           (41, 0)],
                          k=3, eta=4, p=1.0)
    first, second = make_pair(inst, (0, 1, 2), (0, 1, 2),
                              (3, 4, 5), (3, 3, 3))
    net = build_exchange_graph(inst, first, second)
    flow = max_demand_flow(net)
    matching = ExchangeMatching([], {}, {}, 0.0)
    part = partition_and_pairs(net, matching)
    # facilities at 0 and 10 both have (4,0) as nearest unmatched target
    assert part.pairs == [(1, 0)]  # farther one first
    assert len(part.close_a) == len(part.close_b)


def test_partition_cardinality_random():
    for seed in range(30):
        inst, opt, ref = random_pair(seed, n=10, m=6, k=4, eta=3)
        if len(opt.centers) != len(ref.centers):
            continue
        state = build_structure(inst, opt, ref)
        part = state.partition
        assert len(part.close_a) == len(part.close_b)
        assert len(part.swap_a) == len(part.swap_b)
        # phi is a bijection
        assert len(set(part.phi.values())) == len(part.phi)
        assert sorted(part.phi) == part.swap_a
        assert sorted(part.phi.values()) == part.swap_b


# ------------------------------------------------------------ samplers

def test_pair_closing_nothing_selected():
    inst, opt, ref = random_pair(3)
    state = build_structure(inst, opt, ref)
    sol = sample_pair_closing(state, eps=1e-12, seed=0)
    assert sol.centers == opt.centers
    assert sol.cost == pytest.approx(opt.cost)


def test_pair_closing_all_selected_feasible():
    for seed in range(20):
        inst, opt, ref = random_pair(seed, n=10, m=6, k=4, eta=3)
        state = build_structure(inst, opt, ref)
        sol = sample_pair_closing(state, eps=1.0, seed=seed)
        report = verify_solution(inst, sol)
        assert report.ok, report.violations
        closed = {state.net.a_centers[far]
                  for far, _ in state.partition.pairs}
        assert set(sol.centers) == set(opt.centers) - closed


def test_pair_closing_mean_cost_bound():
    inst, opt, ref = random_pair(7, n=10, m=6, k=4, eta=3)
    state = build_structure(inst, opt, ref)
    eps = 0.5
    costs = [sample_pair_closing(state, eps=eps, seed=s).cost
             for s in range(100)]
    mean = float(np.mean(costs))
    fitted = (mean - opt.cost) / (eps * (opt.cost + ref.cost))
    assert fitted <= 10.0, f"pair-closing constant {fitted} out of range"


def test_swap_nothing_selected():
    inst, opt, ref = random_pair(4)
    state = build_structure(inst, opt, ref)
    base = sample_pair_closing(state, eps=0.3, seed=1)
    swapped = sample_swap(state, base, pi=1e-9, seed=2)
    assert swapped.centers == base.centers
    assert swapped.cost == pytest.approx(base.cost)


def test_swap_single_hand_no_displacement():
    # swap f0 for its partner l2; room for everyone, cost delta exact
    inst, net, flow, matching = chain_fixture()
    state = build_structure(inst, net.first, net.second)
    # force selection of every swappable center
    sol = sample_swap(state, net.first, pi=1.0, seed=0)
    report = verify_solution(inst, sol)
    assert report.ok, report.violations


def test_swap_feasible_random():
    for seed in range(25):
        inst, opt, ref = random_pair(seed, n=10, m=6, k=4, eta=3)
        state = build_structure(inst, opt, ref)
        base = sample_pair_closing(state, eps=0.4, seed=seed)
        sol = sample_swap(state, base, pi=0.6, seed=seed + 1)
        report = verify_solution(inst, sol)
        assert report.ok, report.violations
        # pinned reference clients sit on their swapped-in center
        for b_fac in set(sol.centers) - set(opt.centers):
            for u in range(inst.n):
                if ref.assignment[u] == b_fac:
                    assert sol.assignment[u] == b_fac
