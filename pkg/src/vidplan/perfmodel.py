"""Tier-placement performance model and its discretized solver.

The model scores a placement policy (per istream, per data temperature:
what fraction of the data sits on which storage tier, encoded or raw) for
one query running alone. Loading a temperature span is bound by the
slowest tier weighted by its data share and, when decoding, by the codec;
an operator is bound by the lower of compute and IO; a query cascade's
throughput is the harmonic combination of its stages weighted by their
activation fractions; the global utility is the temperature- and
query-weighted sum.

The solver enumerates encoded/raw choices together with data splits on a
simplex grid, assembles per-temperature combinations exactly, prunes
states that another state beats on both utility and every resource usage,
and finishes with a single-coordinate descent refinement. On the coarse
grid the search is exhaustive, so the returned policy is never worse than
any coarse-grid policy.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible

MB_PER_GB = 1000.0


@dataclass(frozen=True)
class StorageTier:
    name: str
    read_bw: float  # MB/s
    write_bw: float  # MB/s
    capacity_gb: float
    cost: float = 0.0


@dataclass(frozen=True)
class CodecSpec:
    decode_fps: float
    transcode_fps: float
    cost: float = 0.0


@dataclass(frozen=True)
class HardwareSpec:
    tiers: tuple[StorageTier, ...]
    codec: CodecSpec

    def __post_init__(self):
        names = [t.name for t in self.tiers]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate tier names: {names}")
        for t in self.tiers:
            if min(t.read_bw, t.write_bw, t.capacity_gb) <= 0:
                raise ValueError(f"tier {t.name}: bandwidths and capacity must be positive")
        if min(self.codec.decode_fps, self.codec.transcode_fps) <= 0:
            raise ValueError("codec bandwidths must be positive")

    @property
    def total_cost(self) -> float:
        return sum(t.cost for t in self.tiers) + self.codec.cost


@dataclass(frozen=True)
class IStream:
    """One stored stream version consumed by one operator stage."""

    name: str
    encoded_bitrate: float  # MB per video-second
    raw_bitrate: float
    compute_fps: float  # the operator's compute-bound throughput
    activation: float  # fraction of chunks triggering this stage


@dataclass(frozen=True)
class QuerySpec:
    name: str
    weight: float
    stages: tuple[int, ...]  # istream indexes, cascade order


@dataclass(frozen=True)
class Temperature:
    name: str
    span_s: float  # L_t, video-seconds of data in this age class
    weight: float


@dataclass(frozen=True)
class Workload:
    n_cam: int
    fps: float
    istreams: tuple[IStream, ...]
    queries: tuple[QuerySpec, ...]
    temperatures: tuple[Temperature, ...]

    def __post_init__(self):
        if abs(sum(t.weight for t in self.temperatures) - 1.0) > 1e-9:
            raise ValueError("temperature weights must sum to 1")
        if abs(sum(q.weight for q in self.queries) - 1.0) > 1e-9:
            raise ValueError("query weights must sum to 1")
        for q in self.queries:
            acts = [self.istreams[i].activation for i in q.stages]
            if acts and abs(acts[0] - 1.0) > 1e-9:
                raise ValueError(f"query {q.name}: first stage activation must be 1")
            if any(b > a + 1e-9 for a, b in itertools.pairwise(acts)):
                raise ValueError(f"query {q.name}: activations must be non-increasing")


@dataclass
class PlacementPolicy:
    """Data fractions D[i, t, s] and encoded flags En[i, t, s]."""

    fractions: np.ndarray  # float (n_istreams, n_temps, n_tiers)
    encoded: np.ndarray  # bool (n_istreams, n_temps, n_tiers)

    def __post_init__(self):
        self.fractions = np.asarray(self.fractions, dtype=float)
        self.encoded = np.asarray(self.encoded, dtype=bool)
        if self.fractions.shape != self.encoded.shape:
            raise ValueError("fraction/encoded shape mismatch")

    def validate(self) -> None:
        if np.any(self.fractions < -1e-12) or np.any(self.fractions > 1 + 1e-12):
            raise ValueError("fractions outside [0, 1]")
        sums = self.fractions.sum(axis=2)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("fractions of some (istream, temperature) do not sum to 1")

    def canonical(self) -> "PlacementPolicy":
        """Encoded flags on zero-fraction tiers carry no meaning; pin them."""
        en = self.encoded.copy()
        en[self.fractions <= 1e-12] = True
        return PlacementPolicy(self.fractions.copy(), en)

    def encoding_key(self):
        return (tuple(np.round(self.fractions, 9).ravel()),
                tuple(self.canonical().encoded.ravel().tolist()))

    def rows(self, workload: "Workload", hw: "HardwareSpec") -> list[list]:
        out = []
        for i, ist in enumerate(workload.istreams):
            for t, temp in enumerate(workload.temperatures):
                for s, tier in enumerate(hw.tiers):
                    out.append([ist.name, temp.name, tier.name,
                                float(self.fractions[i, t, s]),
                                int(self.encoded[i, t, s])])
        return out


POLICY_CSV_HEADER = ["istream", "temperature", "tier", "fraction", "encoded"]


def policy_from_rows(rows: list[list], workload: Workload, hw: HardwareSpec) -> PlacementPolicy:
    ist_idx = {ist.name: i for i, ist in enumerate(workload.istreams)}
    temp_idx = {t.name: i for i, t in enumerate(workload.temperatures)}
    tier_idx = {t.name: i for i, t in enumerate(hw.tiers)}
    frac = np.zeros((len(ist_idx), len(temp_idx), len(tier_idx)))
    enc = np.ones_like(frac, dtype=bool)
    for ist, temp, tier, fraction, encoded in rows:
        frac[ist_idx[ist], temp_idx[temp], tier_idx[tier]] = float(fraction)
        enc[ist_idx[ist], temp_idx[temp], tier_idx[tier]] = bool(int(encoded))
    policy = PlacementPolicy(frac, enc)
    policy.validate()
    return policy


# -- objective ---------------------------------------------------------------


def t_io_tier(istream: IStream, tier: StorageTier, encoded: bool,
              workload: Workload, hw: HardwareSpec) -> float:
    """Throughput (fps) of loading this istream from one tier."""
    if encoded:
        t_encoded = tier.read_bw / istream.encoded_bitrate * workload.fps
        return min(hw.codec.decode_fps, t_encoded)
    return tier.read_bw / istream.raw_bitrate * workload.fps


def t_io(istream_idx: int, temp_idx: int, policy: PlacementPolicy,
         workload: Workload, hw: HardwareSpec) -> float:
    """Effective IO throughput over all tiers: bound by the slowest share."""
    ist = workload.istreams[istream_idx]
    worst = 0.0
    for s, tier in enumerate(hw.tiers):
        d = policy.fractions[istream_idx, temp_idx, s]
        if d <= 1e-12:
            continue
        per_tier = t_io_tier(ist, tier, bool(policy.encoded[istream_idx, temp_idx, s]),
                             workload, hw)
        worst = max(worst, d / per_tier)
    if worst == 0.0:
        raise ValueError(f"istream {ist.name}: no data placed for temperature {temp_idx}")
    return 1.0 / worst


def t_query(query: QuerySpec, temp_idx: int, policy: PlacementPolicy,
            workload: Workload, hw: HardwareSpec) -> float:
    """Cascade throughput on one temperature span."""
    denom = 0.0
    for idx in query.stages:
        ist = workload.istreams[idx]
        t_op = min(ist.compute_fps, t_io(idx, temp_idx, policy, workload, hw))
        denom += ist.activation / t_op
    return 1.0 / denom


def t_all(policy: PlacementPolicy, workload: Workload, hw: HardwareSpec) -> float:
    """Global utility: temperature- and query-weighted throughput."""
    total = 0.0
    for q in workload.queries:
        for t_idx, temp in enumerate(workload.temperatures):
            total += q.weight * temp.weight * t_query(q, t_idx, policy, workload, hw)
    return total


# -- constraints -------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintEntry:
    name: str
    value: float
    bound: float
    slack: float
    ok: bool


@dataclass
class ConstraintReport:
    entries: list[ConstraintEntry] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def failures(self) -> list[ConstraintEntry]:
        return [e for e in self.entries if not e.ok]


def check_constraints(policy: PlacementPolicy, workload: Workload,
                      hw: HardwareSpec, hot_idx: int = 0,
                      tol: float = 1e-9) -> ConstraintReport:
    """Evaluate write, codec and capacity constraints with slack values."""
    report = ConstraintReport()
    n_i = len(workload.istreams)
    n_t = len(workload.temperatures)
    need_fps = workload.fps * workload.n_cam

    for s, tier in enumerate(hw.tiers):
        rate = 0.0
        for i, ist in enumerate(workload.istreams):
            d = policy.fractions[i, hot_idx, s]
            b = ist.encoded_bitrate if policy.encoded[i, hot_idx, s] else ist.raw_bitrate
            rate += d * b
        report.entries.append(ConstraintEntry(
            f"write[{tier.name}]", rate, tier.write_bw, tier.write_bw - rate,
            rate <= tier.write_bw + tol))

    for i, ist in enumerate(workload.istreams):
        for t in range(n_t):
            for s, tier in enumerate(hw.tiers):
                if policy.fractions[i, t, s] <= 1e-12:
                    continue
                speed = (hw.codec.transcode_fps if policy.encoded[i, t, s]
                         else hw.codec.decode_fps)
                kind = "transcode" if policy.encoded[i, t, s] else "ingest-decode"
                report.entries.append(ConstraintEntry(
                    f"{kind}[{ist.name},t{t},{tier.name}]", speed, need_fps,
                    speed - need_fps, speed >= need_fps - tol))

    for s, tier in enumerate(hw.tiers):
        size_mb = 0.0
        for i, ist in enumerate(workload.istreams):
            for t, temp in enumerate(workload.temperatures):
                b = ist.encoded_bitrate if policy.encoded[i, t, s] else ist.raw_bitrate
                size_mb += temp.span_s * policy.fractions[i, t, s] * b
        cap_mb = tier.capacity_gb * MB_PER_GB
        report.entries.append(ConstraintEntry(
            f"capacity[{tier.name}]", size_mb, cap_mb, cap_mb - size_mb,
            size_mb <= cap_mb + tol))

    return report


# -- solver ------------------------------------------------------------------


@dataclass(frozen=True)
class _RowCandidate:
    fractions: tuple[float, ...]
    encoded: tuple[bool, ...]
    io_fps: float
    write_mb_s: tuple[float, ...]
    cap_mb: tuple[float, ...]


def _simplex_grid(n_tiers: int, step: float):
    units = round(1.0 / step)
    if abs(units * step - 1.0) > 1e-9:
        raise ValueError(f"grid step {step} must divide 1")
    for combo in itertools.combinations_with_replacement(range(n_tiers), units):
        counts = [0] * n_tiers
        for c in combo:
            counts[c] += 1
        yield tuple(k / units for k in counts)


def _row_candidates(ist: IStream, temp: Temperature, workload: Workload,
                    hw: HardwareSpec, step: float,
                    is_hot: bool) -> list[_RowCandidate]:
    need_fps = workload.fps * workload.n_cam
    enc_ok = hw.codec.transcode_fps >= need_fps
    raw_ok = hw.codec.decode_fps >= need_fps
    if not enc_ok and not raw_ok:
        return []

    out = []
    seen = set()
    n = len(hw.tiers)
    for frac in _simplex_grid(n, step):
        nonzero = [s for s in range(n) if frac[s] > 0]
        en_choices = []
        for s in range(n):
            if s in nonzero:
                opts = []
                if enc_ok:
                    opts.append(True)
                if raw_ok:
                    opts.append(False)
                en_choices.append(opts)
            else:
                en_choices.append([True])  # canonical on empty tiers
        for en in itertools.product(*en_choices):
            key = (frac, en)
            if key in seen:
                continue
            seen.add(key)
            worst = 0.0
            for s in nonzero:
                per = t_io_tier(ist, hw.tiers[s], en[s], workload, hw)
                worst = max(worst, frac[s] / per)
            io_fps = 1.0 / worst
            rates = tuple(
                frac[s] * (ist.encoded_bitrate if en[s] else ist.raw_bitrate)
                for s in range(n))
            caps = tuple(temp.span_s * r for r in rates)
            out.append(_RowCandidate(frac, en, io_fps, rates, caps))

    # lossless row-level pruning: a candidate beaten on IO throughput and on
    # every resource dimension can never appear in an optimal policy
    usage = np.array([
        c.cap_mb + (c.write_mb_s if is_hot else ()) for c in out])
    io = np.array([c.io_fps for c in out])
    keep = _prune(io, usage, np.arange(len(out)))
    return [out[int(k)] for k in sorted(keep)]


def _temp_states(workload: Workload, hw: HardwareSpec, temp_idx: int,
                 step: float, hot_idx: int):
    """Exact per-temperature assembly: utility plus resource usage arrays."""
    temp = workload.temperatures[temp_idx]
    rows = [
        _row_candidates(ist, temp, workload, hw, step, temp_idx == hot_idx)
        for ist in workload.istreams
    ]
    if any(not r for r in rows):
        return None, rows
    counts = [len(r) for r in rows]
    grids = np.indices(counts).reshape(len(counts), -1)  # (n_i, n_combo)
    n_combo = grids.shape[1]

    t_op = []
    for i, ist in enumerate(workload.istreams):
        io = np.array([c.io_fps for c in rows[i]])[grids[i]]
        t_op.append(np.minimum(ist.compute_fps, io))

    utility = np.zeros(n_combo)
    for q in workload.queries:
        denom = np.zeros(n_combo)
        for idx in q.stages:
            denom += workload.istreams[idx].activation / t_op[idx]
        utility += q.weight * temp.weight / denom

    n_tiers = len(hw.tiers)
    caps = np.zeros((n_combo, n_tiers))
    writes = np.zeros((n_combo, n_tiers))
    for i in range(len(workload.istreams)):
        cap_arr = np.array([c.cap_mb for c in rows[i]])
        caps += cap_arr[grids[i]]
        if temp_idx == hot_idx:
            w_arr = np.array([c.write_mb_s for c in rows[i]])
            writes += w_arr[grids[i]]

    cap_limits = np.array([t.capacity_gb * MB_PER_GB for t in hw.tiers])
    mask = np.all(caps <= cap_limits + 1e-9, axis=1)
    if temp_idx == hot_idx:
        write_limits = np.array([t.write_bw for t in hw.tiers])
        mask &= np.all(writes <= write_limits + 1e-9, axis=1)

    idx = np.nonzero(mask)[0]
    return {
        "utility": utility[idx],
        "caps": caps[idx],
        "combo": grids[:, idx],  # row-candidate index per istream
    }, rows


def _prune(utility: np.ndarray, caps: np.ndarray, order_key: np.ndarray):
    """Drop states beaten on utility and on every capacity dimension.

    Scanning in utility-descending order, a state is dominated exactly when
    some kept state uses no more of any capacity. Keeps the first-ordered
    state among exact ties so tie-breaking stays lexicographic in the
    policy encoding.
    """
    order = np.lexsort((order_key, -utility))
    use = caps[order]
    n, dims = use.shape
    kept = np.empty((n, dims))
    n_kept = 0
    keep_mask = np.zeros(n, dtype=bool)
    block_size = 512
    for lo in range(0, n, block_size):
        hi = min(lo + block_size, n)
        block = use[lo:hi]
        if n_kept:
            dom = np.any(
                np.all(kept[:n_kept][None, :, :] <= block[:, None, :] + 1e-12, axis=2), axis=1)
        else:
            dom = np.zeros(hi - lo, dtype=bool)
        # within the block, earlier rows rank higher; domination is transitive
        within = np.all(block[:, None, :] <= block[None, :, :] + 1e-12, axis=2)
        dom |= np.any(np.triu(within, 1), axis=0)
        rows = block[~dom]
        kept[n_kept:n_kept + len(rows)] = rows
        n_kept += len(rows)
        keep_mask[lo:hi] = ~dom
    return order[keep_mask]


def _policy_from_choice(workload: Workload, hw: HardwareSpec,
                        rows_by_temp, combos_by_temp) -> PlacementPolicy:
    n_i, n_t, n_s = len(workload.istreams), len(workload.temperatures), len(hw.tiers)
    frac = np.zeros((n_i, n_t, n_s))
    enc = np.ones((n_i, n_t, n_s), dtype=bool)
    for t in range(n_t):
        for i in range(n_i):
            cand = rows_by_temp[t][i][combos_by_temp[t][i]]
            frac[i, t, :] = cand.fractions
            enc[i, t, :] = cand.encoded
    return PlacementPolicy(frac, enc)


def solve(workload: Workload, hw: HardwareSpec, grid_step: float = 0.05,
          refine: bool = True, hot_idx: int = 0,
          max_states: int = 2_000_000) -> tuple[PlacementPolicy, float]:
    """Best placement policy on the grid, plus coordinate-descent polish.

    Raises :exc:`Infeasible` when no policy satisfies the constraints.
    """
    n_t = len(workload.temperatures)
    states_by_temp = []
    rows_by_temp = []
    for t in range(n_t):
        states, rows = _temp_states(workload, hw, t, grid_step, hot_idx)
        if states is None or states["utility"].size == 0:
            raise Infeasible(f"no feasible placement for temperature index {t}")
        keep = _prune(states["utility"], states["caps"],
                      np.arange(states["utility"].size))
        states_by_temp.append({k: (v[keep] if k != "combo" else v[:, keep])
                               for k, v in states.items()})
        rows_by_temp.append(rows)

    cap_limits = np.array([t.capacity_gb * MB_PER_GB for t in hw.tiers])

    # fold temperatures one at a time, pruning partial states
    acc_util = states_by_temp[0]["utility"]
    acc_caps = states_by_temp[0]["caps"]
    acc_choice = states_by_temp[0]["combo"].T[:, None, :]  # (n_states, 1, n_i)
    for t in range(1, n_t):
        nxt = states_by_temp[t]
        n_a, n_b = acc_util.size, nxt["utility"].size
        util = (acc_util[:, None] + nxt["utility"][None, :]).ravel()
        caps = (acc_caps[:, None, :] + nxt["caps"][None, :, :]).reshape(-1, len(hw.tiers))
        ok = np.all(caps <= cap_limits + 1e-9, axis=1)
        idx = np.nonzero(ok)[0]
        if idx.size == 0:
            raise Infeasible("capacity constraints admit no cross-temperature combination")
        a_idx, b_idx = idx // n_b, idx % n_b
        choice = np.concatenate(
            [acc_choice[a_idx], nxt["combo"].T[b_idx][:, None, :]], axis=1)
        util, caps = util[idx], caps[idx]
        if util.size > max_states:
            raise Infeasible(f"state space exceeded {max_states}; coarsen the grid")
        if t < n_t - 1:  # after the last fold only the argmax matters
            keep = _prune(util, caps, np.arange(util.size))
            util, caps, choice = util[keep], caps[keep], choice[keep]
        acc_util, acc_caps, acc_choice = util, caps, choice

    best = int(np.argmax(acc_util))
    ties = np.nonzero(acc_util >= acc_util[best] - 1e-15)[0]
    if ties.size > 1:
        keys = [tuple(acc_choice[j].ravel().tolist()) for j in ties]
        best = int(ties[min(range(len(keys)), key=keys.__getitem__)])

    combos_by_temp = [acc_choice[best][t] for t in range(n_t)]
    policy = _policy_from_choice(workload, hw, rows_by_temp, combos_by_temp)
    utility = t_all(policy, workload, hw)

    if refine:
        policy, utility = _coordinate_descent(
            policy, utility, workload, hw, grid_step / 5.0, hot_idx)
    policy = policy.canonical()
    report = check_constraints(policy, workload, hw, hot_idx)
    if not report.ok:
        raise Infeasible(f"solver produced an infeasible policy: {report.failures()}")
    return policy, utility


def _coordinate_descent(policy: PlacementPolicy, utility: float,
                        workload: Workload, hw: HardwareSpec,
                        delta: float, hot_idx: int,
                        max_rounds: int = 60) -> tuple[PlacementPolicy, float]:
    n_i, n_t, n_s = policy.fractions.shape
    best_policy, best_util = policy, utility
    for _ in range(max_rounds):
        improved = False
        for i, t, src, dst in itertools.product(
                range(n_i), range(n_t), range(n_s), range(n_s)):
            if src == dst or best_policy.fractions[i, t, src] < delta - 1e-12:
                continue
            for en_dst in (True, False):
                frac = best_policy.fractions.copy()
                enc = best_policy.encoded.copy()
                move = min(delta, frac[i, t, src])
                frac[i, t, src] -= move
                frac[i, t, dst] += move
                enc[i, t, dst] = en_dst
                trial = PlacementPolicy(frac, enc)
                if not check_constraints(trial, workload, hw, hot_idx).ok:
                    continue
                u = t_all(trial, workload, hw)
                if u > best_util + 1e-12:
                    best_policy, best_util = trial, u
                    improved = True
        if not improved:
            break
    return best_policy, best_util
