"""Discrete-event simulator of the store's runtime services.

Ingestion, retrieval and migration are executed as primitive tasks over
storage-tier and codec devices. A task occupies every device it involves
for ``size / min(device rates)`` seconds, and each device serves at most
one task at any instant. Dispatch order follows a priority score that
ranks service classes (ingestion over retrieval over migration) far above
device idleness, which in turn outranks arrival order.

Two dispatch-eligibility rules sit in front of the scoring: retrieval
requests of an istream whose watermark runs too far ahead of its query's
most lagged istream are paused, and when the ingestion buffer piles past
its threshold only ingestion may dispatch until it drains. The simulator
is single threaded and deterministic; it models concurrency, it does not
use it.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

from .errors import MappingError, ScenarioInvalid, WeightViolation

CHUNK_DURATION_S = 8.0  # one stored segment worth of video

SERVICE_RANK = {"migration": 1, "retrieval": 2, "ingestion": 3}


@dataclass(frozen=True)
class PriorityWeights:
    service: float = 1e9
    resource: float = 1e3


def priority(service: str, arrival: int, device_idle: bool,
             weights: PriorityWeights = PriorityWeights()) -> float:
    """Dispatch score: service class, then device idleness, then age."""
    if weights.service < 1000 * weights.resource:
        raise WeightViolation(
            f"service weight {weights.service} must be >= 1000x resource weight {weights.resource}")
    t_s = SERVICE_RANK[service]
    t_r = 1 if device_idle else 0
    return t_s * weights.service + t_r * weights.resource - arrival


@dataclass(frozen=True)
class DeviceSpec:
    name: str
    rate_mb_s: float


@dataclass(frozen=True)
class RetrievalStream:
    name: str
    tier: str
    chunk_mb: float


@dataclass(frozen=True)
class SimQuery:
    name: str
    istreams: tuple[str, ...]


@dataclass(frozen=True)
class IngestSpec:
    name: str
    tier: str
    chunk_mb: float
    transcode: bool = False  # decode+store through the codec


@dataclass(frozen=True)
class MigrationSpec:
    name: str
    src: str
    dst: str
    volume_mb: float
    codec_op: str = ""  # "", "decode" or "encode"


@dataclass(frozen=True)
class Scenario:
    tiers: tuple[DeviceSpec, ...]
    codec: DeviceSpec | None
    istreams: tuple[RetrievalStream, ...] = ()
    queries: tuple[SimQuery, ...] = ()
    ingests: tuple[IngestSpec, ...] = ()
    migrations: tuple[MigrationSpec, ...] = ()
    horizon_s: float = 600.0
    chunk_duration_s: float = CHUNK_DURATION_S
    pause_threshold_s: float = 2 * CHUNK_DURATION_S
    ingest_buffer_threshold_chunks: int = 4
    serial_migrations: bool = False  # replay mode: run migrations in order
    seed: int = 0

    def validate(self) -> None:
        names = [d.name for d in self.tiers]
        if len(set(names)) != len(names):
            raise ScenarioInvalid(f"duplicate tier names {names}")
        known = set(names)
        for ist in self.istreams:
            if ist.tier not in known:
                raise ScenarioInvalid(f"istream {ist.name} on unknown tier {ist.tier}")
        by_name = {i.name for i in self.istreams}
        for q in self.queries:
            for ist in q.istreams:
                if ist not in by_name:
                    raise ScenarioInvalid(f"query {q.name} reads unknown istream {ist}")
        for ing in self.ingests:
            if ing.tier not in known:
                raise ScenarioInvalid(f"ingest {ing.name} on unknown tier {ing.tier}")
            if ing.transcode and self.codec is None:
                raise ScenarioInvalid(f"ingest {ing.name} needs a codec device")
        for mig in self.migrations:
            if mig.src not in known or mig.dst not in known:
                raise ScenarioInvalid(f"migration {mig.name} uses unknown tiers")
            if mig.codec_op and self.codec is None:
                raise ScenarioInvalid(f"migration {mig.name} needs a codec device")
        if self.horizon_s <= 0:
            raise ScenarioInvalid("horizon must be positive")


@dataclass
class SimMetrics:
    ingest_buffer_peak_mb: float = 0.0
    max_watermark_spread_s: dict[str, float] = field(default_factory=dict)
    migration_completion_s: float = 0.0
    migration_durations_s: dict[str, float] = field(default_factory=dict)
    migration_finish_order: list[str] = field(default_factory=list)
    device_utilization: dict[str, float] = field(default_factory=dict)
    chunks_delivered: dict[str, int] = field(default_factory=dict)
    chunks_ingested: int = 0


@dataclass
class _Task:
    service: str
    kind: str
    label: str
    size_mb: float
    arrival: int
    devices: tuple[str, ...]
    istream: str = ""
    query: str = ""
    after: str | None = None  # replay chaining
    started: float = 0.0


def run(scenario: Scenario, weights: PriorityWeights = PriorityWeights()) -> SimMetrics:
    """Run a scenario to its horizon and report metrics.

    Deterministic: identical metrics for identical scenarios.
    """
    sc = scenario
    sc.validate()
    rates = {d.name: d.rate_mb_s for d in sc.tiers}
    if sc.codec is not None:
        rates[sc.codec.name] = sc.codec.rate_mb_s

    busy: dict[str, _Task | None] = {name: None for name in rates}
    busy_time = {name: 0.0 for name in rates}
    pending: list[_Task] = []
    events: list = []
    seq = itertools.count()
    arrivals = itertools.count()
    metrics = SimMetrics()
    watermark: dict[str, float] = {}
    done_migrations: set[str] = set()
    buffer_mb = 0.0
    buffer_chunks = 0
    now = 0.0

    def push(when: float, kind: str, payload) -> None:
        heapq.heappush(events, (when, next(seq), kind, payload))

    def query_istreams(qname: str) -> tuple[str, ...]:
        return next(q for q in sc.queries if q.name == qname).istreams

    def eligible(task: _Task) -> bool:
        if task.after is not None and task.after not in done_migrations:
            return False
        if buffer_chunks >= sc.ingest_buffer_threshold_chunks and task.service != "ingestion":
            return False
        if task.service == "retrieval":
            lagged = min(watermark[i] for i in query_istreams(task.query))
            if watermark[task.istream] - lagged > sc.pause_threshold_s + 1e-9:
                return False
        return True

    def dispatch() -> None:
        while True:
            ready = [
                t for t in pending
                if all(busy[d] is None for d in t.devices) and eligible(t)
            ]
            if not ready:
                return
            best = max(ready, key=lambda t: (
                priority(t.service, t.arrival, True, weights), -t.arrival, t.label))
            pending.remove(best)
            best.started = now
            duration = best.size_mb / min(rates[d] for d in best.devices)
            for d in best.devices:
                assert busy[d] is None, f"device {d} double-booked at t={now}"
                busy[d] = best
                busy_time[d] += max(0.0, min(now + duration, sc.horizon_s) - min(now, sc.horizon_s))
            push(now + duration, "complete", best)

    def observe_watermarks() -> None:
        for q in sc.queries:
            marks = [watermark[i] for i in q.istreams]
            spread = max(marks) - min(marks)
            metrics.max_watermark_spread_s[q.name] = max(
                metrics.max_watermark_spread_s.get(q.name, 0.0), spread)

    # -- seed the workload ---------------------------------------------------

    prev_label = None
    for mig in sc.migrations:
        devices = [mig.src, mig.dst]
        if mig.codec_op:
            devices.append(sc.codec.name)
        kind = {"": "load+store", "decode": "load+decode+store",
                "encode": "load+encode+store"}[mig.codec_op]
        pending.append(_Task("migration", kind, mig.name, mig.volume_mb,
                             next(arrivals), tuple(devices),
                             after=prev_label if sc.serial_migrations else None))
        if sc.serial_migrations:
            prev_label = mig.name

    for q in sc.queries:
        for name in q.istreams:
            watermark.setdefault(name, 0.0)
    for q in sc.queries:
        for name in q.istreams:
            stream = next(i for i in sc.istreams if i.name == name)
            pending.append(_Task("retrieval", "load", f"load:{name}", stream.chunk_mb,
                                 next(arrivals), (stream.tier,), istream=name, query=q.name))

    for k in range(int(sc.horizon_s / sc.chunk_duration_s)):
        for ing in sc.ingests:
            push(k * sc.chunk_duration_s, "arrival", ing)

    # -- event loop ------------------------------------------------------------

    dispatch()
    while events:
        when, _n, kind, payload = heapq.heappop(events)
        now = when
        if kind == "arrival":
            ing: IngestSpec = payload
            buffer_mb += ing.chunk_mb
            buffer_chunks += 1
            metrics.ingest_buffer_peak_mb = max(metrics.ingest_buffer_peak_mb, buffer_mb)
            devices = (sc.codec.name, ing.tier) if ing.transcode else (ing.tier,)
            op = "decode+store" if ing.transcode else "store"
            pending.append(_Task("ingestion", op, f"ingest:{ing.name}", ing.chunk_mb,
                                 next(arrivals), devices))
        else:
            task: _Task = payload
            for d in task.devices:
                assert busy[d] is task
                busy[d] = None
            if task.service == "ingestion":
                buffer_mb -= task.size_mb
                buffer_chunks -= 1
                metrics.chunks_ingested += 1
            elif task.service == "retrieval":
                watermark[task.istream] += sc.chunk_duration_s
                metrics.chunks_delivered[task.istream] = (
                    metrics.chunks_delivered.get(task.istream, 0) + 1)
                observe_watermarks()
                if now < sc.horizon_s:
                    stream = next(i for i in sc.istreams if i.name == task.istream)
                    pending.append(_Task("retrieval", "load", f"load:{task.istream}",
                                         stream.chunk_mb, next(arrivals), (stream.tier,),
                                         istream=task.istream, query=task.query))
            else:
                done_migrations.add(task.label)
                metrics.migration_durations_s[task.label] = now - task.started
                metrics.migration_finish_order.append(task.label)
                metrics.migration_completion_s = max(metrics.migration_completion_s, now)
        dispatch()

    metrics.device_utilization = {
        d: min(1.0, busy_time[d] / sc.horizon_s) for d in sorted(rates)
    }
    return metrics


@dataclass
class ScheduleValidation:
    task_durations: list[tuple[str, float, float]]  # label, planned, simulated
    order_matches: bool
    max_duration_error: float

    @property
    def ok(self) -> bool:
        return self.order_matches and self.max_duration_error <= 0.05


def validate_schedule(schedule, scenario: Scenario) -> ScheduleValidation:
    """Replay a migration schedule in the simulator and compare timings.

    The schedule's tasks are mapped onto scenario tiers by name; a missing
    device is a :exc:`MappingError`. The replay is serial, matching the
    planner's one-at-a-time schedule semantics.
    """
    tier_names = {d.name for d in scenario.tiers}
    migrations = []
    for k, task in enumerate(schedule.tasks):
        if task.src not in tier_names or task.dst not in tier_names:
            raise MappingError(f"task {k}: tiers {task.src}->{task.dst} not in scenario")
        codec_op = ""
        if task.transcode:
            if scenario.codec is None:
                raise MappingError(f"task {k} needs a codec device")
            codec_op = "encode"
        migrations.append(MigrationSpec(
            f"mig{k:03d}", task.src, task.dst, task.volume_gb * 1000.0, codec_op))

    replay = Scenario(
        tiers=scenario.tiers, codec=scenario.codec, migrations=tuple(migrations),
        horizon_s=10 * sum(t.duration_s for t in schedule.tasks) + 1,
        serial_migrations=True)
    metrics = run(replay)

    durations = []
    worst = 0.0
    for k, task in enumerate(schedule.tasks):
        sim_d = metrics.migration_durations_s[f"mig{k:03d}"]
        durations.append((f"mig{k:03d}", task.duration_s, sim_d))
        if task.duration_s > 0:
            worst = max(worst, abs(sim_d - task.duration_s) / task.duration_s)
    order_ok = metrics.migration_finish_order == [f"mig{k:03d}" for k in range(len(schedule.tasks))]
    return ScheduleValidation(durations, order_ok, worst)
