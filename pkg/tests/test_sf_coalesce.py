import pytest

from conftest import DISK_READ_BW, derived_scenario
from oracles import best_partition_sfset
from vidplan import Consumer, default_domains, generate_synthetic
from vidplan.cf_search import derive_all
from vidplan.errors import BudgetInfeasible, Infeasible
from vidplan.knobspace import CodingOption, ConsumptionFormat, FidelityOption, StorageFormat
from vidplan.sf_coalesce import (
    Subscriber,
    choose_coding,
    coalesce_pair,
    derive_sfs_distance,
    derive_sfs_heuristic,
    fidelity_distance,
    golden_sf,
    ingestion_cost,
    make_subscribers,
    retrieval_speed,
    storage_cost,
)

D = default_domains()


def small_case(seed, n_ops=2, accs=(0.95, 0.9, 0.8)):
    """A derivation case small enough for the partition oracle (<= 6 CFs)."""
    store = generate_synthetic(seed, D)
    ops = store.operator_ids
    consumers = [Consumer(ops[seed % 6], a) for a in accs]
    consumers += [Consumer(ops[(seed + 2) % 6], a) for a in accs[1:]]
    assignments, _ = derive_all(store, consumers)
    return store, make_subscribers(store, assignments)


def test_golden_single_cf():
    store = generate_synthetic(1, D)
    cf = ConsumptionFormat(FidelityOption(2, 2, 1, 2))
    gold = golden_sf([cf], store)
    assert gold.fidelity == cf.fidelity


def test_golden_knobwise_max():
    store = generate_synthetic(1, D)
    cfs = [ConsumptionFormat(FidelityOption(3, 3, 1, 3)),   # 720p, best
           ConsumptionFormat(FidelityOption(4, 2, 2, 2))]   # 540p full crop
    gold = golden_sf(cfs, store)
    assert gold.fidelity == FidelityOption(4, 3, 2, 3)


def test_golden_minimizes_bitrate_over_all_codings():
    store = generate_synthetic(2, D)
    gold = golden_sf([ConsumptionFormat(FidelityOption(4, 4, 2, 3))], store)
    rate = store.query_coding(gold.fidelity, gold.coding, 1).bitrate
    from vidplan.knobspace import enumerate_codings
    for c in enumerate_codings(D, include_raw=False):
        assert rate <= store.query_coding(gold.fidelity, c, 1).bitrate + 1e-15


def _sub(consumer, cf_fid, speed, interval):
    return Subscriber(consumer, ConsumptionFormat(cf_fid), speed, interval)


def test_coalesce_self_is_idempotent():
    store = generate_synthetic(3, D)
    fid = FidelityOption(2, 2, 1, 2)
    sub = _sub(Consumer("diff", 0.8), fid, 50.0, 5)
    sf = StorageFormat(fid, choose_coding(store, fid, [sub], DISK_READ_BW))
    merged = coalesce_pair(sf, sf, [sub], store, DISK_READ_BW)
    assert merged == sf


def test_coalesce_same_fidelity_repicks_coding():
    store = generate_synthetic(3, D)
    fid = FidelityOption(2, 2, 1, 2)
    slow_sub = _sub(Consumer("fullnet", 0.9), fid, 2.0, 5)
    fast_sub = _sub(Consumer("motion", 0.8), fid, 200.0, 5)
    sf_slow = StorageFormat(fid, choose_coding(store, fid, [slow_sub], DISK_READ_BW))
    sf_fast = StorageFormat(fid, choose_coding(store, fid, [fast_sub], DISK_READ_BW))
    merged = coalesce_pair(sf_slow, sf_fast, [slow_sub, fast_sub], store, DISK_READ_BW)
    assert merged.fidelity == fid
    for sub in (slow_sub, fast_sub):
        assert retrieval_speed(store, merged, sub.sampling_interval, DISK_READ_BW) \
            >= sub.consumption_speed


def test_fast_filter_forces_bypass():
    """A consumer faster than any decode speed pushes the pair to raw."""
    store = generate_synthetic(3, D)
    fid = FidelityOption(0, 0, 0, 2)
    racer = _sub(Consumer("diff", 0.7), fid, 5000.0, 30)
    sf = StorageFormat(fid, CodingOption(4, 0))
    merged = coalesce_pair(sf, sf, [racer], store, DISK_READ_BW)
    assert merged.is_raw
    assert retrieval_speed(store, merged, 30, DISK_READ_BW) >= 5000.0


def test_coalesce_infeasible_when_raw_too_slow():
    store = generate_synthetic(3, D)
    fid = FidelityOption(4, 4, 2, 3)
    impossible = _sub(Consumer("diff", 0.7), fid, 1e9, 1)
    sf = StorageFormat(fid, CodingOption(0, 4))
    with pytest.raises(Infeasible):
        coalesce_pair(sf, sf, [impossible], store, DISK_READ_BW)


def test_costs_empty_and_single():
    store = generate_synthetic(4, D)
    assert storage_cost([], store) == 0.0
    assert ingestion_cost([], store) == 0.0
    gold = golden_sf([ConsumptionFormat(FidelityOption(4, 4, 2, 3))], store)
    pt = store.query_coding(gold.fidelity, gold.coding, 1)
    assert storage_cost([gold], store) == pt.bitrate
    assert ingestion_cost([gold], store) == pt.encode_cost


def test_heuristic_matches_partition_oracle_small_sets():
    """Greedy free-merging reaches the exhaustive minimum-storage set."""
    for seed in range(20):
        store, subs = small_case(seed)
        assert len({s.cf for s in subs}) <= 6
        sfset, costs, _ = derive_sfs_heuristic(store, subs, DISK_READ_BW)
        oracle_formats, oracle_cost = best_partition_sfset(
            generate_synthetic(seed, D), subs, DISK_READ_BW)
        assert sorted(sfset.formats) == oracle_formats
        assert costs.storage_cost == pytest.approx(oracle_cost, rel=1e-9)


def test_heuristic_requirements_hold(scenario0):
    store, _consumers, _assignments, subscribers, _ = scenario0
    sfset, _costs, _ = derive_sfs_heuristic(store, subscribers, DISK_READ_BW)
    assert sfset.validate(store, subscribers, DISK_READ_BW) == []
    goldens = [sf for sf in sfset.formats if sf == sfset.golden]
    assert len(goldens) == 1


def test_heuristic_full_library_sf_count(scenario0):
    store, _c, _a, subscribers, _ = scenario0
    sfset, _costs, _ = derive_sfs_heuristic(store, subscribers, DISK_READ_BW)
    assert len(sfset.formats) <= 6


def test_heuristic_free_merges_never_increase_storage():
    """Without a budget, every accepted merge keeps total storage flat or lower."""
    for seed in (0, 5, 9):
        store, subs = small_case(seed, accs=(0.9, 0.8, 0.7))
        from vidplan.sf_coalesce import _best_pair, _initial_clusters

        clusters = _initial_clusters(store, subs, DISK_READ_BW)
        cost = storage_cost([c.format() for c in clusters], store)
        while len(clusters) > 1:
            options = _best_pair(store, clusters, DISK_READ_BW)
            if not options or options[0][0] > 1e-12:
                break
            _d, _ka, _kb, i, j, merged = options[0]
            clusters = [c for k, c in enumerate(clusters) if k not in (i, j)] + [merged]
            new_cost = storage_cost([c.format() for c in clusters], store)
            assert new_cost <= cost + 1e-9
            cost = new_cost


def test_free_merge_reduces_ingestion(scenario0):
    store, _c, _a, subscribers, _ = scenario0
    from vidplan.sf_coalesce import _best_pair, _initial_clusters

    clusters = _initial_clusters(store, subscribers, DISK_READ_BW)
    ingest = ingestion_cost([c.format() for c in clusters], store)
    while len(clusters) > 1:
        options = _best_pair(store, clusters, DISK_READ_BW)
        if not options or options[0][0] > 1e-12:
            break
        _d, _ka, _kb, i, j, merged = options[0]
        clusters = [c for k, c in enumerate(clusters) if k not in (i, j)] + [merged]
        new_ingest = ingestion_cost([c.format() for c in clusters], store)
        assert new_ingest < ingest + 1e-9
        ingest = new_ingest


def _reachable_ingest_floor(store, subscribers):
    """Drive the budget moves greedily until none remains."""
    from vidplan.sf_coalesce import _Cluster, _budget_moves, _initial_clusters

    clusters = _initial_clusters(store, subscribers, DISK_READ_BW)
    while True:
        moves = _budget_moves(store, clusters, DISK_READ_BW)
        if not moves:
            break
        _d, _kind, _ka, _kb, move = moves[0]
        if move[0] == "merge":
            _tag, i, j, merged = move
            clusters = [c for k, c in enumerate(clusters) if k not in (i, j)] + [merged]
        else:
            _tag, idx, coding, _ = move
            old = clusters[idx]
            clusters[idx] = _Cluster(old.fidelity, coding, old.subscribers,
                                     old.cfs, old.is_golden)
    return ingestion_cost([c.format() for c in clusters], store)


def test_ingest_budget_enforced_or_infeasible(scenario0):
    store, _c, _a, subscribers, _ = scenario0
    _sfset, costs, _ = derive_sfs_heuristic(store, subscribers, DISK_READ_BW)
    floor = _reachable_ingest_floor(generate_synthetic(0, D), subscribers)
    assert floor < costs.ingestion_cost
    budget = (floor + costs.ingestion_cost) / 2
    sfset2, costs2, _ = derive_sfs_heuristic(store, subscribers, DISK_READ_BW, budget)
    assert costs2.ingestion_cost <= budget
    assert costs2.ingestion_cost < costs.ingestion_cost
    assert sfset2.validate(store, subscribers, DISK_READ_BW) == []
    # below the reachable floor: merging cannot rescue the budget
    with pytest.raises(BudgetInfeasible):
        derive_sfs_heuristic(store, subscribers, DISK_READ_BW, floor * 0.5)


def test_distance_identical_cfs_merge_first():
    store = generate_synthetic(5, D)
    fid = FidelityOption(1, 1, 1, 1)
    subs = [_sub(Consumer("diff", 0.8), fid, 10.0, 10),
            _sub(Consumer("motion", 0.8), fid, 12.0, 10)]
    assert fidelity_distance(D, fid, fid) == 0.0
    sfset, _costs, _ = derive_sfs_distance(store, subs, DISK_READ_BW, target_count=2)
    assert sfset.subscription[subs[0].cf] == sfset.subscription[subs[1].cf]


def test_distance_vs_heuristic_directions():
    """Distance derives cheaper (fewer runs) but stores more, on full suites."""
    for seed in range(3):
        store, _c, _a, subs, _ = derived_scenario(seed, D)
        _h_set, h_costs, h_runs = derive_sfs_heuristic(store, subs, DISK_READ_BW)
        fresh = generate_synthetic(seed, D)
        _d_set, d_costs, d_runs = derive_sfs_distance(fresh, subs, DISK_READ_BW)
        assert d_runs < h_runs
        assert d_costs.storage_cost >= h_costs.storage_cost - 1e-9


def test_distance_respects_budget(scenario0):
    store, _c, _a, subscribers, _ = scenario0
    _s, costs, _ = derive_sfs_heuristic(store, subscribers, DISK_READ_BW)
    sfset, costs2, _ = derive_sfs_distance(
        store, subscribers, DISK_READ_BW, ingest_budget=costs.ingestion_cost)
    assert costs2.ingestion_cost <= costs.ingestion_cost
    assert sfset.validate(store, subscribers, DISK_READ_BW) == []


def test_memoization_bounds_profiled_formats(scenario0):
    store, _c, _a, subscribers, _ = scenario0
    fresh = generate_synthetic(0, D)
    _assignments, _ = derive_all(fresh, [s.consumer for s in subscribers])
    subs = make_subscribers(fresh, {s.consumer: s.cf for s in subscribers})
    _sfset, _costs, runs = derive_sfs_heuristic(fresh, subs, DISK_READ_BW)
    assert runs <= D.n_formats()
