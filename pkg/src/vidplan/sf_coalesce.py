"""Storage-format derivation by iterative pairwise coalescing.

Starting from one storage format per unique consumption format plus a
golden format (knob-wise maximum fidelity, cheapest-to-store coding), pairs
of formats are merged: the merged fidelity is the knob-wise maximum, and
the coding is re-chosen as the cheapest-to-store option that still decodes
fast enough for every downstream consumer, falling back to raw frames when
no encoded option can keep up.

Two pair-selection strategies are provided. The heuristic strategy first
harvests merges that do not increase total storage, then, if an ingestion
budget is set, trades storage for ingestion until the budget is met. The
distance strategy merges the Euclidean-closest fidelities and profiles only
the merged format each round, which is cheaper to derive but typically
stores more.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .errors import BudgetInfeasible, Infeasible
from .knobspace import (
    CodingOption,
    Consumer,
    ConsumptionFormat,
    FidelityOption,
    KnobDomains,
    StorageFormat,
    can_degrade,
    enumerate_codings,
    knobwise_max,
)
from .profiles import ProfileStore


@dataclass(frozen=True)
class Subscriber:
    """A consumer attached to its derived consumption format."""

    consumer: Consumer
    cf: ConsumptionFormat
    consumption_speed: float
    sampling_interval: int


def make_subscribers(store: ProfileStore,
                     assignments: dict[Consumer, ConsumptionFormat]) -> list[Subscriber]:
    subs = []
    for consumer, cf in sorted(assignments.items()):
        pt = store.query_operator(consumer.operator_id, cf.fidelity)
        interval = store.domains.sampling_interval(cf.fidelity)
        subs.append(Subscriber(consumer, cf, pt.consumption_speed, interval))
    return subs


def retrieval_speed(store: ProfileStore, sf: StorageFormat,
                    sampling_interval: int, disk_read_bw: float) -> float:
    """Speed at which a consumer can pull frames out of this format.

    Encoded formats are decoder bound; raw formats are disk bound.
    """
    pt = store.query_coding(sf.fidelity, sf.coding, sampling_interval)
    if sf.is_raw:
        return disk_read_bw / pt.bitrate
    return pt.decode_speed


def choose_coding(store: ProfileStore, fidelity: FidelityOption,
                  subscribers: list[Subscriber], disk_read_bw: float) -> CodingOption:
    """Cheapest-to-store coding that retrieves fast enough for everyone.

    Scans all encoded options for the minimum bitrate whose decode speed,
    at each subscriber's sampling interval, covers that subscriber's
    consumption speed; bypasses coding when none does. Raises
    :exc:`Infeasible` when even raw retrieval is too slow.
    """
    best: tuple[float, int, int] | None = None
    best_coding: CodingOption | None = None
    for coding in enumerate_codings(store.domains, include_raw=False):
        ok = True
        for sub in subscribers:
            pt = store.query_coding(fidelity, coding, sub.sampling_interval)
            if pt.decode_speed < sub.consumption_speed:
                ok = False
                break
        if not ok:
            continue
        bitrate = store.query_coding(fidelity, coding, 1).bitrate
        # prefer the slowest coding on bitrate ties
        key = (bitrate, coding.speed_step, -coding.keyframe)
        if best is None or key < best:
            best, best_coding = key, coding
    if best_coding is not None:
        return best_coding

    raw = CodingOption.raw()
    raw_speed = disk_read_bw / store.query_coding(fidelity, raw, 1).bitrate
    for sub in subscribers:
        if raw_speed < sub.consumption_speed:
            raise Infeasible(
                f"raw retrieval at {raw_speed:.1f}x cannot feed {sub.consumer.operator_id} "
                f"running at {sub.consumption_speed:.1f}x")
    return raw


def golden_sf(cfs: list[ConsumptionFormat], store: ProfileStore,
              disk_read_bw: float = math.inf) -> StorageFormat:
    """The never-eroded root format: knob-wise max fidelity, minimum bitrate."""
    if not cfs:
        raise ValueError("golden format needs at least one consumption format")
    fid = cfs[0].fidelity
    for cf in cfs[1:]:
        fid = knobwise_max(fid, cf.fidelity)
    return StorageFormat(fid, choose_coding(store, fid, [], disk_read_bw))


def coalesce_pair(sf0: StorageFormat, sf1: StorageFormat,
                  downstream: list[Subscriber], store: ProfileStore,
                  disk_read_bw: float) -> StorageFormat:
    """Merge two storage formats under their combined consumer set."""
    fid = knobwise_max(sf0.fidelity, sf1.fidelity)
    return StorageFormat(fid, choose_coding(store, fid, downstream, disk_read_bw))


@dataclass
class SFSet:
    """A derived set of storage formats with the CF subscription map."""

    formats: list[StorageFormat]
    golden: StorageFormat
    subscription: dict[ConsumptionFormat, StorageFormat]

    def validate(self, store: ProfileStore, subscribers: list[Subscriber],
                 disk_read_bw: float) -> list[str]:
        """Check satisfiable fidelity and adequate retrieval per edge."""
        problems = []
        if self.golden not in self.formats:
            problems.append("golden format missing from the format set")
        golden_fid = None
        for cf in self.subscription:
            golden_fid = cf.fidelity if golden_fid is None else knobwise_max(golden_fid, cf.fidelity)
        if golden_fid is not None and self.golden.fidelity != golden_fid:
            problems.append("golden fidelity is not the knob-wise max over consumption formats")
        for cf, sf in self.subscription.items():
            if sf not in self.formats:
                problems.append(f"{cf} subscribed to a format outside the set")
            if not can_degrade(sf.fidelity, cf.fidelity):
                problems.append(f"fidelity not satisfiable: {sf.fidelity} cannot serve {cf.fidelity}")
        for sub in subscribers:
            sf = self.subscription.get(sub.cf)
            if sf is None:
                problems.append(f"{sub.cf} has no subscription")
                continue
            speed = retrieval_speed(store, sf, sub.sampling_interval, disk_read_bw)
            if speed < sub.consumption_speed - 1e-9:
                problems.append(
                    f"retrieval too slow: {speed:.2f}x < {sub.consumption_speed:.2f}x "
                    f"for {sub.consumer.operator_id}@{sub.consumer.target_accuracy}")
        return problems


@dataclass(frozen=True)
class CostSummary:
    storage_cost: float  # MB per video-second over all formats
    ingestion_cost: float  # CPU cores per ingested stream


def storage_cost(formats: list[StorageFormat], store: ProfileStore) -> float:
    return sum(store.query_coding(sf.fidelity, sf.coding, 1).bitrate for sf in formats)


def ingestion_cost(formats: list[StorageFormat], store: ProfileStore) -> float:
    return sum(store.query_coding(sf.fidelity, sf.coding, 1).encode_cost for sf in formats)


def cost_summary(sfset: SFSet, store: ProfileStore) -> CostSummary:
    return CostSummary(storage_cost(sfset.formats, store), ingestion_cost(sfset.formats, store))


@dataclass
class _Cluster:
    fidelity: FidelityOption
    coding: CodingOption
    subscribers: list[Subscriber] = field(default_factory=list)
    cfs: list[ConsumptionFormat] = field(default_factory=list)
    is_golden: bool = False

    def sort_key(self):
        return (self.fidelity.as_tuple(), self.coding.bypass,
                self.coding.speed_step, self.coding.keyframe)

    def format(self) -> StorageFormat:
        return StorageFormat(self.fidelity, self.coding)


def _initial_clusters(store: ProfileStore, subscribers: list[Subscriber],
                      disk_read_bw: float) -> list[_Cluster]:
    by_cf: dict[ConsumptionFormat, list[Subscriber]] = {}
    for sub in subscribers:
        by_cf.setdefault(sub.cf, []).append(sub)
    clusters = []
    for cf in sorted(by_cf):
        subs = by_cf[cf]
        coding = choose_coding(store, cf.fidelity, subs, disk_read_bw)
        clusters.append(_Cluster(cf.fidelity, coding, subs, [cf]))
    gold = golden_sf(sorted(by_cf), store, disk_read_bw)
    clusters.append(_Cluster(gold.fidelity, gold.coding, [], [], is_golden=True))
    return clusters


def _bitrate(store: ProfileStore, cluster: _Cluster) -> float:
    return store.query_coding(cluster.fidelity, cluster.coding, 1).bitrate


def _merge(store: ProfileStore, a: _Cluster, b: _Cluster, disk_read_bw: float) -> _Cluster:
    fid = knobwise_max(a.fidelity, b.fidelity)
    subs = a.subscribers + b.subscribers
    coding = choose_coding(store, fid, subs, disk_read_bw)
    return _Cluster(fid, coding, subs, a.cfs + b.cfs, is_golden=a.is_golden or b.is_golden)


def _as_sfset(clusters: list[_Cluster]) -> SFSet:
    clusters = sorted(clusters, key=_Cluster.sort_key)
    formats = [c.format() for c in clusters]
    golden = next(c.format() for c in clusters if c.is_golden)
    subscription = {cf: c.format() for c in clusters for cf in c.cfs}
    return SFSet(formats, golden, subscription)


def _best_pair(store: ProfileStore, clusters: list[_Cluster], disk_read_bw: float):
    """All feasible merges this round, cheapest storage delta first."""
    options = []
    for i, j in itertools.combinations(range(len(clusters)), 2):
        a, b = clusters[i], clusters[j]
        try:
            merged = _merge(store, a, b, disk_read_bw)
        except Infeasible:
            continue
        delta = _bitrate(store, merged) - _bitrate(store, a) - _bitrate(store, b)
        options.append((delta, a.sort_key(), b.sort_key(), i, j, merged))
    options.sort(key=lambda o: o[:3])
    return options


def _budget_moves(store: ProfileStore, clusters: list[_Cluster], disk_read_bw: float):
    """Ingestion-reducing moves: merges plus per-format coding cheapening.

    Both trade storage for transcode cores. Re-coding one format to a
    cheaper-to-encode option (possibly raw) keeps retrieval adequate for
    its subscribers; merges must themselves reduce the transcode total.
    Sorted by storage increase, smallest first.
    """
    moves = []
    for delta, ka, kb, i, j, merged in _best_pair(store, clusters, disk_read_bw):
        saved = (store.query_coding(clusters[i].fidelity, clusters[i].coding, 1).encode_cost
                 + store.query_coding(clusters[j].fidelity, clusters[j].coding, 1).encode_cost
                 - store.query_coding(merged.fidelity, merged.coding, 1).encode_cost)
        if saved > 1e-12:
            moves.append((delta, 0, ka, kb, ("merge", i, j, merged)))
    for idx, cluster in enumerate(clusters):
        cur = store.query_coding(cluster.fidelity, cluster.coding, 1)
        for coding in enumerate_codings(store.domains):
            if coding == cluster.coding:
                continue
            pt = store.query_coding(cluster.fidelity, coding, 1)
            if pt.encode_cost >= cur.encode_cost - 1e-12:
                continue
            trial = StorageFormat(cluster.fidelity, coding)
            if any(retrieval_speed(store, trial, s.sampling_interval, disk_read_bw)
                   < s.consumption_speed for s in cluster.subscribers):
                continue
            delta = pt.bitrate - cur.bitrate
            moves.append((delta, 1, cluster.sort_key(),
                          (coding.bypass, coding.speed_step, coding.keyframe),
                          ("recode", idx, coding, None)))
    moves.sort(key=lambda m: m[:4])
    return moves


def derive_sfs_heuristic(store: ProfileStore, subscribers: list[Subscriber],
                         disk_read_bw: float,
                         ingest_budget: float | None = None) -> tuple[SFSet, CostSummary, int]:
    """Derive storage formats: free merges first, then budget enforcement.

    Phase one repeatedly applies the merge with the largest storage saving
    as long as some merge does not increase storage. Phase two, only with
    an ingestion budget, keeps applying the ingestion-reducing move with
    the smallest storage increase, merging formats or re-coding single
    formats to cheaper-to-encode options, until the transcode cores fit
    the budget. Returns the format set, its costs, and the number of
    coding profiling runs spent.
    """
    runs_before = store.coding_runs
    clusters = _initial_clusters(store, subscribers, disk_read_bw)

    while len(clusters) > 1:
        options = _best_pair(store, clusters, disk_read_bw)
        if not options or options[0][0] > 1e-12:
            break
        delta, _ka, _kb, i, j, merged = options[0]
        clusters = [c for k, c in enumerate(clusters) if k not in (i, j)] + [merged]

    if ingest_budget is not None:
        while ingestion_cost([c.format() for c in clusters], store) > ingest_budget:
            moves = _budget_moves(store, clusters, disk_read_bw)
            if not moves:
                raise BudgetInfeasible(
                    f"still need {ingestion_cost([c.format() for c in clusters], store):.2f} "
                    f"transcode cores > budget {ingest_budget} with no move left")
            _delta, _kind, _ka, _kb, move = moves[0]
            if move[0] == "merge":
                _tag, i, j, merged = move
                clusters = [c for k, c in enumerate(clusters) if k not in (i, j)] + [merged]
            else:
                _tag, idx, coding, _ = move
                old = clusters[idx]
                clusters[idx] = _Cluster(old.fidelity, coding, old.subscribers,
                                         old.cfs, old.is_golden)

    sfset = _as_sfset(clusters)
    return sfset, cost_summary(sfset, store), store.coding_runs - runs_before


def _fidelity_coords(domains: KnobDomains, f: FidelityOption) -> tuple[float, ...]:
    shape = domains.fidelity_shape()
    return tuple(idx / (n - 1) if n > 1 else 0.0 for idx, n in zip(f.as_tuple(), shape))


def fidelity_distance(domains: KnobDomains, a: FidelityOption, b: FidelityOption) -> float:
    """Euclidean distance over richness-normalized fidelity knobs."""
    ca, cb = _fidelity_coords(domains, a), _fidelity_coords(domains, b)
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(ca, cb)))


def derive_sfs_distance(store: ProfileStore, subscribers: list[Subscriber],
                        disk_read_bw: float, ingest_budget: float | None = None,
                        target_count: int = 4) -> tuple[SFSet, CostSummary, int]:
    """Derive storage formats by merging the closest fidelities.

    Each round coalesces the pair with the shortest normalized Euclidean
    distance and profiles only the merged format, stopping when the
    ingestion budget is met or, without a budget, when ``target_count``
    formats remain.
    """
    runs_before = store.coding_runs
    clusters = _initial_clusters(store, subscribers, disk_read_bw)

    def done() -> bool:
        if ingest_budget is not None:
            return ingestion_cost([c.format() for c in clusters], store) <= ingest_budget
        return len(clusters) <= target_count

    while len(clusters) > 1 and not done():
        pairs = sorted(
            (fidelity_distance(store.domains, clusters[i].fidelity, clusters[j].fidelity),
             clusters[i].sort_key(), clusters[j].sort_key(), i, j)
            for i, j in itertools.combinations(range(len(clusters)), 2))
        merged = None
        for _dist, _ka, _kb, i, j in pairs:
            try:
                merged = _merge(store, clusters[i], clusters[j], disk_read_bw)
            except Infeasible:
                continue
            clusters = [c for k, c in enumerate(clusters) if k not in (i, j)] + [merged]
            break
        if merged is None:
            if ingest_budget is not None:
                raise BudgetInfeasible("over ingestion budget with no feasible merge left")
            break

    if ingest_budget is not None and not done():
        raise BudgetInfeasible("single-format set still exceeds the ingestion budget")

    sfset = _as_sfset(clusters)
    return sfset, cost_summary(sfset, store), store.coding_runs - runs_before
