"""Hardware purchase planning and reconfiguration migration scheduling.

Hardware planning enumerates catalog combinations under a monetary budget,
solves the performance model for each, and reports the Pareto frontier of
(cost, utility). Reconfiguration planning decomposes the difference between
two placement policies into per-(istream, temperature) tier-to-tier moves,
scores each move by utility gained per migration second, and schedules them
serially, best ratio first; an exhaustive temporal-knapsack search over
serial-and-parallel placements is provided as a test oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyFeasibleSet, Infeasible, TooLarge
from .perfmodel import (
    MB_PER_GB,
    CodecSpec,
    HardwareSpec,
    PlacementPolicy,
    StorageTier,
    Workload,
    solve,
    t_all,
)


@dataclass(frozen=True)
class HardwareCatalog:
    """Candidate devices per tier slot, candidate codecs, and a budget."""

    tier_slots: tuple[tuple[StorageTier, ...], ...]
    codecs: tuple[CodecSpec, ...]
    budget: float

    def __post_init__(self):
        if not self.tier_slots or not self.codecs:
            raise ValueError("catalog needs at least one tier slot and one codec")


def enumerate_setups(catalog: HardwareCatalog) -> list[tuple[HardwareSpec, float]]:
    """All slot/codec combinations with total cost within the budget."""
    setups = []
    for tiers in itertools.product(*catalog.tier_slots):
        for codec in catalog.codecs:
            # slots may offer identically named devices; qualify names per slot
            named = tuple(
                StorageTier(f"s{i}:{t.name}", t.read_bw, t.write_bw, t.capacity_gb, t.cost)
                for i, t in enumerate(tiers))
            hw = HardwareSpec(named, codec)
            if hw.total_cost <= catalog.budget:
                setups.append((hw, hw.total_cost))
    if not setups:
        raise EmptyFeasibleSet(f"no setup fits budget {catalog.budget}")
    return setups


@dataclass(frozen=True)
class ParetoPoint:
    setup: HardwareSpec
    cost: float
    utility: float
    policy: PlacementPolicy | None = None


def pareto_frontier(points: list[ParetoPoint]) -> list[ParetoPoint]:
    """Maximal points under (cost <=, utility >=) dominance.

    Returned sorted by cost ascending with utility strictly increasing;
    exact duplicates keep their first occurrence.
    """
    indexed = sorted(enumerate(points), key=lambda p: (p[1].cost, -p[1].utility, p[0]))
    frontier = []
    best_utility = -np.inf
    seen = set()
    for _i, p in indexed:
        key = (p.cost, p.utility)
        if p.utility > best_utility and key not in seen:
            frontier.append(p)
            best_utility = p.utility
            seen.add(key)
    return frontier


def plan_hardware(catalog: HardwareCatalog, workload: Workload,
                  grid_step: float = 0.05) -> tuple[list[ParetoPoint], list[ParetoPoint]]:
    """Evaluate every affordable setup; return (all points, frontier)."""
    points = []
    for hw, cost in enumerate_setups(catalog):
        try:
            policy, utility = solve(workload, hw, grid_step=grid_step)
        except Infeasible:
            continue
        points.append(ParetoPoint(hw, cost, utility, policy))
    return points, pareto_frontier(points)


@dataclass
class WhatIfReport:
    base_points: list[ParetoPoint]
    base_frontier: list[ParetoPoint]
    scaled_points: list[ParetoPoint]
    scaled_frontier: list[ParetoPoint]
    decoder_cost_factor: float
    tier_speed_factor: float


def _scale_catalog(catalog: HardwareCatalog, decoder_cost_factor: float,
                   tier_speed_factor: float) -> HardwareCatalog:
    slots = tuple(
        tuple(StorageTier(t.name, t.read_bw * tier_speed_factor,
                          t.write_bw * tier_speed_factor, t.capacity_gb, t.cost)
              for t in slot)
        for slot in catalog.tier_slots)
    codecs = tuple(
        CodecSpec(c.decode_fps, c.transcode_fps, c.cost * decoder_cost_factor)
        for c in catalog.codecs)
    return HardwareCatalog(slots, codecs, catalog.budget)


def whatif_report(catalog: HardwareCatalog, workload: Workload,
                  decoder_cost_factor: float = 1.0, tier_speed_factor: float = 1.0,
                  grid_step: float = 0.05) -> WhatIfReport:
    """Frontier comparison under scaled decoder prices or tier speeds."""
    if decoder_cost_factor <= 0 or tier_speed_factor <= 0:
        raise ValueError("scale factors must be positive")
    base_points, base_front = plan_hardware(catalog, workload, grid_step)
    scaled = _scale_catalog(catalog, decoder_cost_factor, tier_speed_factor)
    scaled_points, scaled_front = plan_hardware(scaled, workload, grid_step)
    return WhatIfReport(base_points, base_front, scaled_points, scaled_front,
                        decoder_cost_factor, tier_speed_factor)


def frontier_weakly_dominates(new: list[ParetoPoint], old: list[ParetoPoint],
                              tol: float = 1e-9) -> bool:
    """True when every old point is matched at equal-or-lower cost."""
    return all(
        any(q.cost <= p.cost + tol and q.utility >= p.utility - tol for q in new)
        for p in old)


# -- migration ----------------------------------------------------------------


@dataclass(frozen=True)
class MigrationTask:
    istream: str
    temperature: str
    src: str
    dst: str
    fraction: float  # share of the (istream, temperature) span moved
    volume_gb: float
    transcode: bool
    duration_s: float
    reward: float  # utility delta when this task lands

    @property
    def score(self) -> float:
        return self.reward / self.duration_s


def _apply_task(policy: PlacementPolicy, workload: Workload, hw: HardwareSpec,
                i: int, t: int, src: int, dst: int, fraction: float,
                en_dst: bool) -> PlacementPolicy:
    frac = policy.fractions.copy()
    enc = policy.encoded.copy()
    frac[i, t, src] = max(0.0, frac[i, t, src] - fraction)
    frac[i, t, dst] += fraction
    enc[i, t, dst] = en_dst
    return PlacementPolicy(frac, enc)


def diff_policies(old: PlacementPolicy, new: PlacementPolicy,
                  workload: Workload, hw: HardwareSpec) -> list[MigrationTask]:
    """Decompose a policy change into tier-to-tier migration tasks.

    Per (istream, temperature) the fraction deltas are split into moves,
    largest surplus feeding largest deficit, so applying every task in any
    order lands exactly on the new fractions. Rewards are evaluated
    sequentially against the interim policy since utilities do not add.
    """
    names = [t.name for t in hw.tiers]
    tasks: list[tuple] = []
    for i, ist in enumerate(workload.istreams):
        for t, temp in enumerate(workload.temperatures):
            delta = new.fractions[i, t] - old.fractions[i, t]
            surplus = sorted(
                [(float(-delta[s]), s) for s in range(len(names)) if delta[s] < -1e-12],
                key=lambda x: (-x[0], x[1]))
            deficit = sorted(
                [(float(delta[s]), s) for s in range(len(names)) if delta[s] > 1e-12],
                key=lambda x: (-x[0], x[1]))
            si, di = 0, 0
            surplus = [list(x) for x in surplus]
            deficit = [list(x) for x in deficit]
            while si < len(surplus) and di < len(deficit):
                move = min(surplus[si][0], deficit[di][0])
                src, dst = surplus[si][1], deficit[di][1]
                tasks.append((i, t, src, dst, move))
                surplus[si][0] -= move
                deficit[di][0] -= move
                if surplus[si][0] <= 1e-12:
                    si += 1
                if deficit[di][0] <= 1e-12:
                    di += 1

    out = []
    interim = old
    base = t_all(interim, workload, hw)
    for i, t, src, dst, move in tasks:
        ist = workload.istreams[i]
        temp = workload.temperatures[t]
        en_src = bool(old.encoded[i, t, src])
        en_dst = bool(new.encoded[i, t, dst])
        b_src = ist.encoded_bitrate if en_src else ist.raw_bitrate
        volume_gb = move * temp.span_s * b_src / MB_PER_GB
        transcode = en_src != en_dst
        rates = [hw.tiers[src].read_bw, hw.tiers[dst].write_bw]
        if transcode:
            codec_fps = hw.codec.transcode_fps if en_dst else hw.codec.decode_fps
            rates.append(codec_fps / workload.fps * b_src)
        duration = volume_gb * MB_PER_GB / min(rates)
        after = _apply_task(interim, workload, hw, i, t, src, dst, move, en_dst)
        reward = t_all(after, workload, hw) - base
        out.append(MigrationTask(ist.name, temp.name, names[src], names[dst],
                                 move, volume_gb, transcode, duration, reward))
        interim, base = after, base + reward
    return out


@dataclass
class MigrationSchedule:
    tasks: list[MigrationTask]
    base_utility: float
    trajectory: list[tuple[float, float]] = field(default_factory=list)  # (time, utility)
    buffer_gb: float = 0.0

    def total_duration(self) -> float:
        return sum(t.duration_s for t in self.tasks)

    def nonmonotone_steps(self) -> int:
        """Trajectory dips; migrations are assumed to improve utility, so
        any dip is reported rather than repaired."""
        utils = [self.base_utility] + [u for _t, u in self.trajectory]
        return sum(1 for a, b in zip(utils, utils[1:]) if b < a - 1e-12)

    def integrated_utility(self, horizon: float | None = None) -> float:
        """Time integral of utility, holding the final value to the horizon."""
        if horizon is None:
            horizon = self.total_duration()
        area = 0.0
        now = 0.0
        utility = self.base_utility
        for task in self.tasks:
            end = min(now + task.duration_s, horizon)
            area += (end - now) * utility
            utility += task.reward
            now = end
        if now < horizon:
            area += (horizon - now) * utility
        return area


def schedule_greedy(tasks: list[MigrationTask], base_utility: float = 0.0) -> MigrationSchedule:
    """Serial schedule, the highest utility-per-second first.

    Tasks with negative rewards run last: they only exist to finish the
    reconfiguration, so deferring them keeps performance high longest.
    """
    nonneg = [t for t in tasks if t.reward >= 0]
    negative = [t for t in tasks if t.reward < 0]
    ordered = sorted(nonneg, key=lambda t: (-t.score, t.duration_s, t.istream,
                                            t.temperature, t.src, t.dst))
    ordered += sorted(negative, key=lambda t: (-t.score, t.duration_s, t.istream,
                                               t.temperature, t.src, t.dst))
    schedule = MigrationSchedule(ordered, base_utility)
    now, utility = 0.0, base_utility
    for task in ordered:
        now += task.duration_s
        utility += task.reward
        schedule.trajectory.append((now, utility))
    return schedule


def required_buffer_gb(old: PlacementPolicy, schedule: MigrationSchedule,
                       workload: Workload, hw: HardwareSpec) -> float:
    """Worst interim capacity overshoot across the schedule, as buffer space."""
    name_to_idx = {t.name: s for s, t in enumerate(hw.tiers)}
    ist_idx = {ist.name: i for i, ist in enumerate(workload.istreams)}
    temp_idx = {t.name: i for i, t in enumerate(workload.temperatures)}
    usage = np.zeros(len(hw.tiers))
    for i, ist in enumerate(workload.istreams):
        for t, temp in enumerate(workload.temperatures):
            for s in range(len(hw.tiers)):
                b = ist.encoded_bitrate if old.encoded[i, t, s] else ist.raw_bitrate
                usage[s] += old.fractions[i, t, s] * temp.span_s * b / MB_PER_GB
    caps = np.array([t.capacity_gb for t in hw.tiers])
    worst = float(np.maximum(usage - caps, 0.0).sum())
    for task in schedule.tasks:
        ist = workload.istreams[ist_idx[task.istream]]
        temp = workload.temperatures[temp_idx[task.temperature]]
        b_src = task.volume_gb * MB_PER_GB / (task.fraction * temp.span_s)
        if task.transcode:
            # the destination holds the moved span in the other coding
            b_dst = (ist.raw_bitrate if abs(b_src - ist.encoded_bitrate) < abs(b_src - ist.raw_bitrate)
                     else ist.encoded_bitrate)
        else:
            b_dst = b_src
        # both copies exist until the move completes
        usage[name_to_idx[task.dst]] += task.fraction * temp.span_s * b_dst / MB_PER_GB
        worst = max(worst, float(np.maximum(usage - caps, 0.0).sum()))
        usage[name_to_idx[task.src]] -= task.volume_gb
    return worst


def schedule_knapsack_oracle(tasks: list[MigrationTask], tiers: list[str],
                             base_utility: float = 0.0) -> tuple[float, list[str]]:
    """Exhaustive serial-and-parallel scheduling oracle.

    Tries every priority permutation under list scheduling with at most
    one task per tier at any instant (no device sharing), and returns the
    best time-integrated utility over the serial-makespan horizon plus the
    start order achieving it. Intended as a test oracle only.
    """
    if len(tasks) > 8:
        raise TooLarge(f"{len(tasks)} tasks exceed the oracle cap of 8")
    if len(tiers) > 5:
        raise TooLarge(f"{len(tiers)} tiers exceed the oracle cap of 5")
    horizon = sum(t.duration_s for t in tasks)
    if not tasks:
        return 0.0, []

    best_area = -np.inf
    best_order: list[str] = []
    for perm in itertools.permutations(range(len(tasks))):
        free_at = {name: 0.0 for name in tiers}
        events = []  # (finish time, reward)
        started = []
        pending = list(perm)
        running: list[tuple[float, int]] = []  # (finish, task idx)
        now = 0.0
        while pending or running:
            progressed = True
            while progressed:
                progressed = False
                for k, idx in enumerate(pending):
                    task = tasks[idx]
                    if free_at[task.src] <= now + 1e-12 and free_at[task.dst] <= now + 1e-12:
                        finish = now + task.duration_s
                        free_at[task.src] = finish
                        free_at[task.dst] = finish
                        running.append((finish, idx))
                        events.append((finish, task.reward))
                        started.append(idx)
                        pending.pop(k)
                        progressed = True
                        break
            if running:
                running.sort()
                now = running.pop(0)[0]
            elif pending:
                now = min(max(free_at[tasks[i].src], free_at[tasks[i].dst]) for i in pending)
        events.sort()
        area = 0.0
        cursor = 0.0
        utility = base_utility
        for when, reward in events:
            area += (min(when, horizon) - cursor) * utility
            utility += reward
            cursor = min(when, horizon)
        area += (horizon - cursor) * utility
        if area > best_area + 1e-12:
            best_area = area
            best_order = [f"{tasks[i].istream}:{tasks[i].src}->{tasks[i].dst}" for i in started]
    return best_area, best_order
