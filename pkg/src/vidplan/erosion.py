"""Age-based data erosion planning.

Aged video is thinned by deleting a growing fraction of each storage
format's segments; consumers hitting a deleted segment fall back to the
format's parent in a richer-than tree rooted at the golden format, which
is never eroded. Deleting from a format therefore never breaks accuracy,
only slows the consumers that depended on its cheap retrieval.

The planner picks per-age deletion fractions so that the overall consumer
speed (max-min fair: the minimum relative speed over all consumers) decays
along a power law, and binary-searches the decay exponent for the gentlest
curve whose accumulated storage fits the budget.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BudgetInfeasible, DomainError
from .knobspace import StorageFormat, can_degrade
from .profiles import ProfileStore
from .sf_coalesce import SFSet, Subscriber, retrieval_speed

SECONDS_PER_DAY = 86400.0
DELETION_STEP = 0.01  # fraction of one format's segments per planning move


def relative_speed(alpha: float, p: float) -> float:
    """Speed ratio of a consumer reading a fraction ``p`` from its parent.

    ``alpha`` is the consumer's speed on the parent relative to its own
    format. Equals 1 with nothing eroded and ``alpha`` with everything
    eroded, decreasing in between.
    """
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha {alpha} outside (0, 1]")
    if not 0 <= p <= 1:
        raise DomainError(f"deleted fraction {p} outside [0, 1]")
    return alpha / ((1 - p) * alpha + p)


@dataclass(frozen=True)
class TreeConsumer:
    """A consumer's fallback chain: its own format first, golden last."""

    key: str
    chain: tuple[StorageFormat, ...]
    speeds: tuple[float, ...]  # effective speed per chain level

    def relative(self, deletions: dict[StorageFormat, float]) -> float:
        """Relative speed under per-format cumulative deletion fractions.

        Segments resolve level by level: a deleted segment at one level is
        served by the next; the effective speed is the harmonic composition
        over the chain.
        """
        own = self.speeds[0]
        remaining = 1.0
        time_per_second = 0.0
        for sf, speed in zip(self.chain, self.speeds):
            p = deletions.get(sf, 0.0)
            served = remaining * (1.0 - p)
            time_per_second += served / speed
            remaining *= p
        if remaining > 1e-12:  # golden is never eroded, so this is dust
            time_per_second += remaining / self.speeds[-1]
        return (1.0 / time_per_second) / own


@dataclass
class FallbackTree:
    golden: StorageFormat
    parent: dict[StorageFormat, StorageFormat]
    consumers: list[TreeConsumer]
    daily_size_mb: dict[StorageFormat, float]

    @property
    def erodible(self) -> list[StorageFormat]:
        return sorted(self.parent)

    def overall_speed(self, deletions: dict[StorageFormat, float]) -> float:
        return min((c.relative(deletions) for c in self.consumers), default=1.0)

    def p_min(self) -> float:
        return self.overall_speed({sf: 1.0 for sf in self.parent})


@dataclass(frozen=True)
class DecayParams:
    k: float
    p_min: float

    def target(self, age: int) -> float:
        if age < 1:
            raise DomainError(f"age {age} < 1")
        return (1.0 - self.p_min) * age ** (-self.k) + self.p_min


def consumer_alpha(store: ProfileStore, tree: FallbackTree, sub: Subscriber,
                   sf: StorageFormat, disk_read_bw: float) -> float:
    """Speed on the parent relative to the own format, clamped to (0, 1]."""
    own = min(sub.consumption_speed, retrieval_speed(store, sf, sub.sampling_interval, disk_read_bw))
    parent = tree.parent[sf]
    on_parent = min(sub.consumption_speed,
                    retrieval_speed(store, parent, sub.sampling_interval, disk_read_bw))
    return min(1.0, max(1e-12, on_parent / own))


def build_fallback_tree(sfset: SFSet, subscribers: list[Subscriber],
                        store: ProfileStore, disk_read_bw: float) -> FallbackTree:
    """Attach every non-golden format to its cheapest richer-or-equal peer."""
    parent: dict[StorageFormat, StorageFormat] = {}
    for sf in sfset.formats:
        if sf == sfset.golden:
            continue
        candidates = [
            other for other in sfset.formats
            if other != sf and can_degrade(other.fidelity, sf.fidelity)
        ]
        parent[sf] = min(
            candidates,
            key=lambda o: (store.query_coding(o.fidelity, o.coding, 1).bitrate,
                           o.fidelity.as_tuple()))

    def chain_of(sf: StorageFormat) -> tuple[StorageFormat, ...]:
        chain = [sf]
        while chain[-1] in parent:
            chain.append(parent[chain[-1]])
        return tuple(chain)

    consumers = []
    for sub in subscribers:
        sf = sfset.subscription[sub.cf]
        chain = chain_of(sf)
        speeds = tuple(
            min(sub.consumption_speed,
                retrieval_speed(store, link, sub.sampling_interval, disk_read_bw))
            for link in chain)
        key = f"{sub.consumer.operator_id}@{sub.consumer.target_accuracy:g}"
        consumers.append(TreeConsumer(key, chain, speeds))

    daily = {
        sf: store.query_coding(sf.fidelity, sf.coding, 1).bitrate * SECONDS_PER_DAY
        for sf in sfset.formats
    }
    return FallbackTree(sfset.golden, parent, consumers, daily)


def _fair_erode(tree: FallbackTree, deletions: dict[StorageFormat, float],
                target: float, step: float = DELETION_STEP) -> None:
    """Erode in place until overall speed drops to the target.

    Each move finds the currently slowest consumer and deletes a step from
    the format hurting it least, switching formats once another consumer
    falls below it. Ties on impact level the field max-min style: prefer
    the format whose best-off dependent consumer is highest (formats nobody
    depends on erode first), then the format with more data left.
    """
    erodible = tree.erodible

    def remaining(sf: StorageFormat) -> float:
        return (1.0 - deletions[sf]) * tree.daily_size_mb[sf]

    while True:
        rels = {c.key: c.relative(deletions) for c in tree.consumers}
        overall = min(rels.values(), default=1.0)
        if overall <= target + 1e-12:
            return
        open_sfs = [sf for sf in erodible if deletions[sf] < 1.0 - 1e-12]
        if not open_sfs:
            return  # target below the floor; everything erodible is gone
        slowest = min(tree.consumers, key=lambda c: (rels[c.key], c.key))

        def impact(sf: StorageFormat) -> float:
            trial = dict(deletions)
            trial[sf] = min(1.0, trial[sf] + step)
            return rels[slowest.key] - slowest.relative(trial)

        def highest_dependent(sf: StorageFormat) -> float:
            dependents = [rels[c.key] for c in tree.consumers if sf in c.chain[:-1]]
            return max(dependents) if dependents else 2.0

        chosen = min(open_sfs,
                     key=lambda sf: (impact(sf), -highest_dependent(sf), -remaining(sf), sf))

        q_level = rels[slowest.key]
        while deletions[chosen] < 1.0 - 1e-12:
            deletions[chosen] = min(1.0, deletions[chosen] + step)
            rels = {c.key: c.relative(deletions) for c in tree.consumers}
            if min(rels.values()) <= target + 1e-12:
                return
            if min(rels.values()) < q_level - 1e-12:
                break  # someone else dropped below the old slowest


@dataclass
class ErosionPlan:
    """Cumulative per-age deletion fractions and their storage footprint."""

    params: DecayParams
    ages: list[int]
    fractions: dict[int, dict[StorageFormat, float]]  # age -> sf -> p
    daily_size_mb: dict[StorageFormat, float]
    accumulated_mb: float
    budget_mb: float | None = None

    def age_size_mb(self, age: int) -> float:
        p = self.fractions[age]
        return sum(size * (1.0 - p.get(sf, 0.0)) for sf, size in self.daily_size_mb.items())

    def overall_speeds(self, tree: FallbackTree) -> dict[int, float]:
        return {age: tree.overall_speed(self.fractions[age]) for age in self.ages}


def plan_age(tree: FallbackTree, target_speed: float,
             step: float = DELETION_STEP) -> dict[StorageFormat, float]:
    """Deletion fractions bringing overall speed down to one age's target."""
    p_min = tree.p_min()
    if not p_min - 1e-9 <= target_speed <= 1.0 + 1e-9:
        raise DomainError(f"target {target_speed} outside [{p_min}, 1]")
    deletions = {sf: 0.0 for sf in tree.erodible}
    _fair_erode(tree, deletions, target_speed, step)
    return deletions


def accumulated_size_mb(tree: FallbackTree,
                        fractions: dict[int, dict[StorageFormat, float]]) -> float:
    total = 0.0
    for _age, p in fractions.items():
        total += sum(size * (1.0 - p.get(sf, 0.0)) for sf, size in tree.daily_size_mb.items())
    return total


def _plan_for_k(tree: FallbackTree, k: float, lifespan_days: int,
                step: float = DELETION_STEP) -> dict[int, dict[StorageFormat, float]]:
    # one continuing erosion state over ascending ages: fractions accumulate
    params = DecayParams(k, tree.p_min())
    deletions = {sf: 0.0 for sf in tree.erodible}
    fractions = {}
    for age in range(1, lifespan_days + 1):
        _fair_erode(tree, deletions, params.target(age), step)
        fractions[age] = dict(deletions)
    return fractions


K_MAX = 32.0
K_TOL = 1e-3


def plan_erosion(tree: FallbackTree, lifespan_days: int, storage_budget_mb: float,
                 step: float = DELETION_STEP) -> ErosionPlan:
    """Find the gentlest power-law decay that fits the storage budget.

    Accumulated storage is non-increasing in the decay exponent, so a
    binary search on k in [0, K_MAX] finds the smallest exponent whose plan
    stays under budget; k = 0 when no erosion is needed at all.
    """
    p_min = tree.p_min()

    def build(k: float) -> tuple[dict, float]:
        fractions = _plan_for_k(tree, k, lifespan_days, step)
        return fractions, accumulated_size_mb(tree, fractions)

    fractions0, full = build(0.0)
    if full <= storage_budget_mb:
        return ErosionPlan(DecayParams(0.0, p_min), list(range(1, lifespan_days + 1)),
                           fractions0, dict(tree.daily_size_mb), full, storage_budget_mb)

    fractions_hi, floor = build(K_MAX)
    if floor > storage_budget_mb:
        raise BudgetInfeasible(
            f"budget {storage_budget_mb:.0f} MB below the golden-only floor {floor:.0f} MB")

    lo, hi = 0.0, K_MAX
    best = (K_MAX, fractions_hi, floor)
    while hi - lo > K_TOL:
        mid = (lo + hi) / 2
        fractions, acc = build(mid)
        if acc <= storage_budget_mb:
            hi = mid
            best = (mid, fractions, acc)
        else:
            lo = mid
    k, fractions, acc = best
    return ErosionPlan(DecayParams(k, p_min), list(range(1, lifespan_days + 1)),
                       fractions, dict(tree.daily_size_mb), acc, storage_budget_mb)
