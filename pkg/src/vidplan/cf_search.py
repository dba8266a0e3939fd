"""Per-consumer consumption-format search.

For a consumer (operator, target accuracy) the search finds the fidelity
with adequate accuracy and the highest consumption speed while profiling
as few fidelity options as possible. Image quality is fixed at its richest
value first (it does not affect consumption cost), the remaining 3D space
is split into 2D sampling-by-resolution slabs along the crop knob, and
each slab is explored only along its accuracy boundary, exploiting that
accuracy is monotone in every knob. Quality is lowered afterwards as far
as accuracy allows, which opportunistically cuts storage-side costs.

The staircase walk probes at most ``N_sample + N_res`` options per slab.
A row of the staircase whose boundary column equals the row below it can
be certified without probing it; such rows are provably no faster than the
probed row below them, so the format derivation may skip profiling them.
``boundary_search_2d`` profiles them anyway by default so that its result
is the complete per-row boundary; ``derive_cf`` runs the walk in support
mode to stay within the profiling-run bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import NoAdequatePoint
from .knobspace import Consumer, ConsumptionFormat, FidelityOption
from .profiles import ProfileStore


@dataclass(frozen=True)
class BoundaryPoint:
    fidelity: FidelityOption
    accuracy: float
    consumption_speed: float


@dataclass
class SearchReport:
    """Accounting for one consumer's search."""

    consumer: Consumer
    chosen: ConsumptionFormat | None = None
    operator_runs: int = 0
    boundary_points: dict[int, int] = field(default_factory=dict)  # crop -> points
    infeasible_slabs: list[int] = field(default_factory=list)
    monotonicity_flags: list[str] = field(default_factory=list)


@dataclass
class GlobalSearchReport:
    per_consumer: dict[Consumer, SearchReport] = field(default_factory=dict)
    total_operator_runs: int = 0


def _walk_staircase(store: ProfileStore, operator_id: str, target: float,
                    crop: int, quality: int, flags: list[str] | None = None):
    """Trace the accuracy boundary of one sampling-by-resolution slab.

    Returns ``(probed, inferred)``: per-row leftmost-adequate points that
    were profiled during the walk, and ``(row, col)`` cells whose boundary
    position is implied by monotonicity without a probe. Raises
    :exc:`NoAdequatePoint` when the slab's richest corner is inadequate.
    """
    domains = store.domains
    n_samp = len(domains.sampling)
    n_res = len(domains.resolution)

    def probe(row: int, col: int):
        return store.query_operator(operator_id, FidelityOption(col, row, crop, quality))

    corner = probe(n_res - 1, n_samp - 1)
    if corner.accuracy < target:
        raise NoAdequatePoint(
            f"{operator_id}: accuracy {corner.accuracy:.4f} < {target} at the slab's richest corner")

    probed: dict[int, BoundaryPoint] = {}
    inferred_col: dict[int, int] = {}
    boundary_col: dict[int, int] = {}
    prev_acc_in_row: float | None = None

    row, col = 0, n_samp - 1
    while row < n_res and col >= 0:
        pt = probe(row, col)
        if flags is not None and prev_acc_in_row is not None and pt.accuracy > prev_acc_in_row + 1e-12:
            flags.append(
                f"{operator_id}: accuracy rose from {prev_acc_in_row:.4f} to {pt.accuracy:.4f} "
                f"while lowering sampling at crop={crop} res_row={row}")
        if pt.accuracy >= target:
            boundary_col[row] = col
            probed[row] = BoundaryPoint(pt.fidelity, pt.accuracy, pt.consumption_speed)
            prev_acc_in_row = pt.accuracy
            col -= 1
        else:
            if row not in boundary_col and col + 1 < n_samp:
                # adequate at col+1 is implied by the row below's boundary
                boundary_col[row] = col + 1
                inferred_col[row] = col + 1
            row += 1
            prev_acc_in_row = None

    # leaving on the left edge: every richer row is adequate at column 0
    if col < 0:
        for r in range(row, n_res):
            if r not in boundary_col:
                boundary_col[r] = 0
                inferred_col[r] = 0

    inferred = [(r, c) for r, c in sorted(inferred_col.items())]
    return probed, inferred


def boundary_search_2d(store: ProfileStore, operator_id: str, target_acc: float,
                       crop: int, quality: int,
                       profile_inferred: bool = True) -> list[BoundaryPoint]:
    """The full accuracy boundary of one slab, one point per feasible row.

    With ``profile_inferred`` (the default) rows certified by inference are
    profiled too, so every returned point carries measured values. Format
    derivation disables it to keep within its run bound; the skipped points
    are never faster than a returned one.
    """
    probed, inferred = _walk_staircase(store, operator_id, target_acc, crop, quality)
    points = dict(probed)
    if profile_inferred:
        for row, col_ in inferred:
            pt = store.query_operator(operator_id, FidelityOption(col_, row, crop, quality))
            points[row] = BoundaryPoint(pt.fidelity, pt.accuracy, pt.consumption_speed)
    return [points[r] for r in sorted(points)]


def _pick_fastest(points: list[BoundaryPoint]) -> BoundaryPoint:
    # max consumption speed; ties resolved toward the cheapest storage proxy:
    # lowest resolution, then lowest sampling, then lowest crop
    def key(p: BoundaryPoint):
        f = p.fidelity
        return (p.consumption_speed, -f.resolution, -f.sampling, -f.crop)

    return max(points, key=key)


def derive_cf(store: ProfileStore, consumer: Consumer) -> tuple[ConsumptionFormat, SearchReport]:
    """Choose the consumption format for one consumer.

    Quality is pinned at its richest value while the quantity knobs are
    searched slab by slab; the fastest adequate boundary point wins; then
    quality is walked down to the minimum that still meets the target.
    """
    domains = store.domains
    report = SearchReport(consumer=consumer)
    runs_before = store.operator_runs
    q_rich = domains.quality.richest

    candidates: list[BoundaryPoint] = []
    for crop in range(len(domains.crop)):
        try:
            probed, _inferred = _walk_staircase(
                store, consumer.operator_id, consumer.target_accuracy,
                crop, q_rich, flags=report.monotonicity_flags)
        except NoAdequatePoint:
            report.infeasible_slabs.append(crop)
            if crop == domains.crop.richest:
                # even the globally richest fidelity misses the target
                report.operator_runs = store.operator_runs - runs_before
                raise
            continue
        report.boundary_points[crop] = len(probed)
        candidates.extend(probed.values())

    best = _pick_fastest(candidates)

    # opportunistic quality reduction: no effect on consumption speed
    fidelity = best.fidelity
    for q in range(q_rich - 1, -1, -1):
        trial = fidelity.replace(quality=q)
        pt = store.query_operator(consumer.operator_id, trial)
        if pt.accuracy >= consumer.target_accuracy:
            fidelity = trial
        else:
            break

    report.chosen = ConsumptionFormat(fidelity)
    report.operator_runs = store.operator_runs - runs_before
    return report.chosen, report


def derive_all(store: ProfileStore,
               consumers: list[Consumer]) -> tuple[dict[Consumer, ConsumptionFormat], GlobalSearchReport]:
    """Derive consumption formats for every consumer on one shared store.

    Consumers of one operator share the store's memoization cache, so the
    total profiling runs stay below the sum of independent searches.
    """
    report = GlobalSearchReport()
    runs_before = store.operator_runs
    results: dict[Consumer, ConsumptionFormat] = {}
    ordered = sorted(set(consumers), key=lambda c: (c.operator_id, -c.target_accuracy))
    for consumer in ordered:
        cf, sub = derive_cf(store, consumer)
        results[consumer] = cf
        report.per_consumer[consumer] = sub
    report.total_operator_runs = store.operator_runs - runs_before
    return results, report
