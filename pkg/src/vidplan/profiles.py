"""Profiling data: operator accuracy/speed and coding cost/speed/size.

A :class:`ProfileStore` answers two kinds of queries and accounts for how
many distinct profiling runs they would have cost on a real stack:

* operator queries ``(operator, fidelity) -> (accuracy, consumption speed)``
* coding queries ``(fidelity, coding) -> (encode cost, decode speed, bitrate)``

Answers are memoized; the run counters advance only on cache misses, which
is what makes the search algorithms' run accounting meaningful. Data comes
either from a deterministic synthetic model or from a saved profile table.

The synthetic model keeps two structural properties observed on real
operators: accuracy and consumption cost never decrease when any fidelity
knob is raised, and image quality affects accuracy but not consumption
cost. It also carries a quality/resolution interaction: at low image
quality, accuracy becomes more sensitive to resolution.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainMismatch, MissingProfilePoint, ParseError, UnknownOperator
from .knobspace import (
    FIDELITY_KNOBS,
    CodingOption,
    FidelityOption,
    KnobDomains,
    enumerate_codings,
    enumerate_fidelities,
)

RAW_DECODE_SPEED = math.inf  # raw retrieval is disk bound, not codec bound

# frames per second of the ingested streams; the synthetic model's bitrates
# and throughputs are all derived from it
INGEST_FPS = 30.0

# ceiling on the decode speedup from skipping whole chunks between samples
MAX_SKIP_GAIN = 6.0

BYTES_PER_PIXEL = 3


@dataclass(frozen=True)
class OperatorProfilePoint:
    operator_id: str
    fidelity: FidelityOption
    accuracy: float
    consumption_speed: float  # multiple of video realtime


@dataclass(frozen=True)
class CodingProfilePoint:
    fidelity: FidelityOption
    coding: CodingOption
    sampling_interval: int  # frames between consumed samples
    encode_cost: float  # CPU cores to transcode one realtime stream
    decode_speed: float  # multiple of video realtime; inf for raw
    bitrate: float  # MB per video-second


@dataclass(frozen=True)
class OperatorSpec:
    """Knob-response parameters of one synthetic operator.

    ``base_speed`` is the consumption speed at the richest fidelity.
    ``beta`` holds the accuracy loss at the poorest value per fidelity knob,
    ``gamma`` the saturation exponents, ``interaction`` the strength of the
    quality/resolution coupling.
    """

    operator_id: str
    base_speed: float
    beta: tuple[float, float, float, float]
    gamma: tuple[float, float, float, float]
    interaction: float


# Operator library shipped with the planner: a spread of fast frame filters
# and slow detectors, mirroring a typical analytics cascade.
DEFAULT_OPERATOR_BASE_SPEEDS = {
    "diff": 4.0,
    "motion": 3.0,
    "specnet": 1.5,
    "ocr": 0.7,
    "plate": 0.6,
    "fullnet": 0.35,
}


def draw_operator_specs(seed: int, base_speeds: dict[str, float] | None = None) -> list[OperatorSpec]:
    """Draw per-operator knob-response parameters deterministically."""
    base_speeds = dict(base_speeds or DEFAULT_OPERATOR_BASE_SPEEDS)
    rng = np.random.default_rng(seed)
    specs = []
    for op_id in sorted(base_speeds):
        beta = (
            rng.uniform(0.30, 0.60),  # sampling
            rng.uniform(0.28, 0.55),  # resolution
            rng.uniform(0.25, 0.60),  # crop
            rng.uniform(0.08, 0.28),  # quality
        )
        gamma = tuple(rng.uniform(2.0, 4.5, size=4))
        interaction = rng.uniform(0.10, 0.30)
        specs.append(OperatorSpec(op_id, base_speeds[op_id], beta, gamma, interaction))
    return specs


@dataclass(frozen=True)
class CodingModel:
    """Coefficients of the synthetic coding cost model."""

    compression_base: float = 1 / 80  # encoded/raw size at the richest coding
    step_size_span: float = 1.5  # fastest step stores up to 2.5x more
    keyframe_size_gain: float = 2.0  # keyframe-per-frame stores ~3x more
    quality_size_exp: float = 1.8
    encode_cores_720p: float = 5.0  # slowest-step transcode of best 720p
    decode_1080_speed: float = 10.0  # x realtime decoding full 1080p
    decode_step_gain: float = 0.015  # faster steps decode slightly faster
    ingest_decode_base: float = 0.4  # cores to decode+resize for raw storing
    ingest_decode_span: float = 0.6


@dataclass(frozen=True)
class SyntheticProfileModel:
    """Deterministic stand-in for profiling a real video stack."""

    seed: int
    domains: KnobDomains
    operators: tuple[OperatorSpec, ...]
    coding: CodingModel = CodingModel()

    @classmethod
    def generate(cls, seed: int, domains: KnobDomains,
                 operator_specs: list[OperatorSpec] | None = None) -> "SyntheticProfileModel":
        specs = operator_specs if operator_specs is not None else draw_operator_specs(seed)
        return cls(seed=seed, domains=domains, operators=tuple(specs))

    def _spec(self, operator_id: str) -> OperatorSpec:
        for spec in self.operators:
            if spec.operator_id == operator_id:
                return spec
        raise UnknownOperator(operator_id)

    def _knob_positions(self, f: FidelityOption) -> tuple[float, float, float, float]:
        """Normalized annotations in (0, 1], 1 at the richest value."""
        d = self.domains
        return (
            d.sampling.annotations[f.sampling] / d.sampling.annotations[-1],
            d.resolution.annotations[f.resolution] / d.resolution.annotations[-1],
            d.crop.annotations[f.crop] / d.crop.annotations[-1],
            d.quality.annotations[f.quality] / d.quality.annotations[-1],
        )

    def operator_point(self, operator_id: str, f: FidelityOption) -> tuple[float, float]:
        spec = self._spec(operator_id)
        xs = self._knob_positions(f)
        acc = 1.0
        for x, b, g in zip(xs, spec.beta, spec.gamma):
            acc *= 1.0 - b * (1.0 - x) ** g
        # low quality amplifies resolution sensitivity
        x_res, x_quality = xs[1], xs[3]
        acc *= 1.0 - spec.interaction * (1.0 - x_quality) * (1.0 - x_res)
        acc = min(1.0, max(0.0, acc))
        x_samp, x_res, x_crop, _ = xs
        speed = spec.base_speed / (x_samp * x_res * x_crop)
        return acc, speed

    def raw_bitrate(self, f: FidelityOption) -> float:
        d = self.domains
        pixels = d.resolution.annotations[f.resolution]
        crop = d.crop.annotations[f.crop]
        sampling = d.sampling.annotations[f.sampling]
        return pixels * crop * BYTES_PER_PIXEL * INGEST_FPS * sampling / 1e6

    def coding_point(self, f: FidelityOption, c: CodingOption) -> tuple[float, float, float]:
        """Base measurements for one storage format.

        Returns (encode_cost, base decode speed, bitrate); the decode speed
        is before any chunk-skipping gain.
        """
        d = self.domains
        cm = self.coding
        raw_rate = self.raw_bitrate(f)
        if c.bypass:
            pixels = d.resolution.annotations[f.resolution]
            work = (pixels * d.crop.annotations[f.crop] * d.sampling.annotations[f.sampling]
                    / d.resolution.annotations[-1])
            encode_cost = cm.ingest_decode_base + cm.ingest_decode_span * work
            return encode_cost, RAW_DECODE_SPEED, raw_rate

        step_ann = d.speed_step.annotations[c.speed_step]
        kf_ann = d.keyframe.annotations[c.keyframe]
        x_quality = d.quality.annotations[f.quality] / d.quality.annotations[-1]

        step_span = d.speed_step.annotations[-1] - d.speed_step.annotations[0]
        size = raw_rate * cm.compression_base
        size *= x_quality ** cm.quality_size_exp
        size *= 1.0 + cm.step_size_span * (step_ann - d.speed_step.annotations[0]) / step_span
        size *= 1.0 + cm.keyframe_size_gain / kf_ann - cm.keyframe_size_gain / d.keyframe.annotations[-1]

        pixels = d.resolution.annotations[f.resolution]
        work = (pixels * d.crop.annotations[f.crop] * d.sampling.annotations[f.sampling]
                / (1280 * 720))
        encode_cost = cm.encode_cores_720p * work * (0.7 + 0.3 * x_quality) / step_ann

        decode = cm.decode_1080_speed / (pixels / d.resolution.annotations[-1])
        decode *= 1.0 + cm.decode_step_gain * (step_ann - 1.0)
        return encode_cost, decode, size


def effective_decode_speed(base_speed: float, keyframe_frames: float,
                           sampling_interval: int, max_gain: float = MAX_SKIP_GAIN) -> float:
    """Decode speed after skipping whole chunks between consumed samples.

    The gain applies only when the keyframe interval divides the sampling
    interval, so skipped chunks never contain a wanted frame.
    """
    if math.isinf(base_speed):
        return base_speed
    kf = int(round(keyframe_frames))
    if kf > 0 and sampling_interval % kf == 0 and sampling_interval >= kf:
        return base_speed * min(sampling_interval / kf, max_gain)
    return base_speed


class ProfileStore:
    """Memoized profile queries with per-table run accounting.

    One profiling run is the act of measuring one distinct key: an
    ``(operator, fidelity)`` pair or a ``(fidelity, coding)`` pair. Repeat
    queries, including coding queries that differ only in sampling
    interval, are free. Thread safe: answers and final counter values match
    a serial execution.
    """

    def __init__(self, domains: KnobDomains, model: SyntheticProfileModel | None = None,
                 operator_table: dict | None = None, coding_table: dict | None = None,
                 memoize: bool = True):
        self.domains = domains
        self._model = model
        self._operator_table = operator_table
        self._coding_table = coding_table
        self._memoize = memoize
        self._op_cache: dict = {}
        self._coding_cache: dict = {}
        self.operator_runs = 0
        self.coding_runs = 0
        self._lock = threading.Lock()

    # -- construction ------------------------------------------------------

    @classmethod
    def from_model(cls, model: SyntheticProfileModel, memoize: bool = True) -> "ProfileStore":
        return cls(model.domains, model=model, memoize=memoize)

    @property
    def operator_ids(self) -> list[str]:
        if self._model is not None:
            return [s.operator_id for s in self._model.operators]
        return sorted({op for (op, _f) in (self._operator_table or {})})

    @property
    def total_runs(self) -> int:
        return self.operator_runs + self.coding_runs

    # -- queries -----------------------------------------------------------

    def _measure_operator(self, operator_id: str, f: FidelityOption) -> tuple[float, float]:
        if self._model is not None:
            return self._model.operator_point(operator_id, f)
        if operator_id not in self.operator_ids:
            raise UnknownOperator(operator_id)
        try:
            return self._operator_table[(operator_id, f)]
        except KeyError:
            raise MissingProfilePoint(f"operator {operator_id!r} at {f}") from None

    def _measure_coding(self, f: FidelityOption, c: CodingOption) -> tuple[float, float, float]:
        if self._model is not None:
            return self._model.coding_point(f, c)
        try:
            return self._coding_table[(f, c)]
        except KeyError:
            raise MissingProfilePoint(f"coding {c} at {f}") from None

    def query_operator(self, operator_id: str, f: FidelityOption) -> OperatorProfilePoint:
        key = (operator_id, f)
        with self._lock:
            if self._memoize and key in self._op_cache:
                acc, speed = self._op_cache[key]
            else:
                acc, speed = self._measure_operator(operator_id, f)
                self.operator_runs += 1
                if self._memoize:
                    self._op_cache[key] = (acc, speed)
        return OperatorProfilePoint(operator_id, f, acc, speed)

    def is_operator_cached(self, operator_id: str, f: FidelityOption) -> bool:
        with self._lock:
            return (operator_id, f) in self._op_cache

    def query_coding(self, f: FidelityOption, c: CodingOption,
                     sampling_interval: int = 1) -> CodingProfilePoint:
        key = (f, c)
        with self._lock:
            if self._memoize and key in self._coding_cache:
                encode_cost, base_decode, bitrate = self._coding_cache[key]
            else:
                encode_cost, base_decode, bitrate = self._measure_coding(f, c)
                self.coding_runs += 1
                if self._memoize:
                    self._coding_cache[key] = (encode_cost, base_decode, bitrate)
        kf = self.domains.keyframe.annotations[c.keyframe] if not c.bypass else 0.0
        decode = effective_decode_speed(base_decode, kf, sampling_interval)
        return CodingProfilePoint(f, c, sampling_interval, encode_cost, decode, bitrate)

    # -- validation --------------------------------------------------------

    def validate_monotonicity(self) -> list[str]:
        """Report observation violations in the (possibly loaded) tables.

        Violations are warnings: search treats the table as authoritative.
        """
        warnings = []
        quantity_knobs = ("sampling", "resolution", "crop")
        for op in self.operator_ids:
            for f in enumerate_fidelities(self.domains):
                base = self._peek_operator(op, f)
                if base is None:
                    continue
                for ki, knob in enumerate(FIDELITY_KNOBS):
                    idx = f.as_tuple()[ki]
                    if idx + 1 >= len(self.domains.fidelity_domain(knob)):
                        continue
                    richer = f.replace(**{knob: idx + 1})
                    up = self._peek_operator(op, richer)
                    if up is None:
                        continue
                    if up[0] < base[0] - 1e-12:
                        warnings.append(
                            f"{op}: accuracy decreases when raising {knob} from {f} to {richer}")
                    if knob in quantity_knobs and up[1] > base[1] + 1e-9:
                        warnings.append(
                            f"{op}: consumption speed increases when raising {knob} at {f}")
        return warnings

    def _peek_operator(self, op: str, f: FidelityOption):
        try:
            return self._measure_operator(op, f)
        except (MissingProfilePoint, UnknownOperator):
            return None


def generate_synthetic(seed: int, domains: KnobDomains,
                       operator_specs: list[OperatorSpec] | None = None) -> ProfileStore:
    """Build a memoizing store backed by the deterministic synthetic model."""
    return ProfileStore.from_model(SyntheticProfileModel.generate(seed, domains, operator_specs))


# -- profile file format ----------------------------------------------------
#
# One UTF-8 delimiter-separated table, one header line. Operator rows and
# coding rows share the header; fields not applicable to a row kind are
# empty. Knob values are spelled with their domain labels.

_COLUMNS = [
    "kind", "operator_id", "sampling", "resolution", "crop", "quality",
    "speed_step", "keyframe", "bypass", "accuracy", "consumption_speed",
    "encode_cost", "decode_speed", "bitrate",
]
_DELIM = ","


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return repr(float(x))


def save_profiles(store: ProfileStore, path: str | Path) -> None:
    """Materialize every profile point to a delimited table.

    Row order is deterministic: operator rows sorted by id then fidelity
    index, followed by coding rows sorted by fidelity then coding index.
    """
    d = store.domains
    lines = [_DELIM.join(_COLUMNS)]
    for op in sorted(store.operator_ids):
        for f in enumerate_fidelities(d):
            acc, speed = store._measure_operator(op, f)
            row = {
                "kind": "operator", "operator_id": op,
                "sampling": d.sampling.values[f.sampling],
                "resolution": d.resolution.values[f.resolution],
                "crop": d.crop.values[f.crop],
                "quality": d.quality.values[f.quality],
                "accuracy": _fmt(acc), "consumption_speed": _fmt(speed),
            }
            lines.append(_DELIM.join(row.get(c, "") for c in _COLUMNS))
    for f in enumerate_fidelities(d):
        for c in enumerate_codings(d):
            encode_cost, decode, bitrate = store._measure_coding(f, c)
            row = {
                "kind": "coding",
                "sampling": d.sampling.values[f.sampling],
                "resolution": d.resolution.values[f.resolution],
                "crop": d.crop.values[f.crop],
                "quality": d.quality.values[f.quality],
                "speed_step": "" if c.bypass else d.speed_step.values[c.speed_step],
                "keyframe": "" if c.bypass else d.keyframe.values[c.keyframe],
                "bypass": "1" if c.bypass else "0",
                "encode_cost": _fmt(encode_cost),
                "decode_speed": _fmt(decode),
                "bitrate": _fmt(bitrate),
            }
            lines.append(_DELIM.join(row.get(c_, "") for c_ in _COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _knob_index(domains: KnobDomains, knob: str, label: str, lineno: int) -> int:
    dom = domains.fidelity_domain(knob) if knob in FIDELITY_KNOBS else getattr(domains, knob)
    try:
        return dom.index_of(label)
    except KeyError:
        raise DomainMismatch(f"line {lineno}: {label!r} is not a value of knob {knob!r}") from None


def _parse_float(text: str, column: str, lineno: int) -> float:
    if text == "inf":
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"bad numeric field {column}={text!r}", line=lineno) from None


def load_profiles(path: str | Path, domains: KnobDomains) -> tuple[ProfileStore, list[str]]:
    """Load a saved profile table.

    Returns the store plus the monotonicity validation report (warnings,
    never errors).
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read profile file {path}: {e}") from None
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty profile file", line=1)
    header = lines[0].split(_DELIM)
    if header != _COLUMNS:
        raise ParseError(f"unexpected header {lines[0]!r}", line=1)

    operator_table: dict = {}
    coding_table: dict = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(_DELIM)
        if len(parts) != len(_COLUMNS):
            raise ParseError(f"expected {len(_COLUMNS)} fields, got {len(parts)}", line=lineno)
        row = dict(zip(_COLUMNS, parts))
        f = FidelityOption(
            _knob_index(domains, "sampling", row["sampling"], lineno),
            _knob_index(domains, "resolution", row["resolution"], lineno),
            _knob_index(domains, "crop", row["crop"], lineno),
            _knob_index(domains, "quality", row["quality"], lineno),
        )
        if row["kind"] == "operator":
            if not row["operator_id"]:
                raise ParseError("operator row without operator_id", line=lineno)
            operator_table[(row["operator_id"], f)] = (
                _parse_float(row["accuracy"], "accuracy", lineno),
                _parse_float(row["consumption_speed"], "consumption_speed", lineno),
            )
        elif row["kind"] == "coding":
            if row["bypass"] == "1":
                c = CodingOption.raw()
            else:
                c = CodingOption(
                    _knob_index(domains, "speed_step", row["speed_step"], lineno),
                    _knob_index(domains, "keyframe", row["keyframe"], lineno),
                )
            coding_table[(f, c)] = (
                _parse_float(row["encode_cost"], "encode_cost", lineno),
                _parse_float(row["decode_speed"], "decode_speed", lineno),
                _parse_float(row["bitrate"], "bitrate", lineno),
            )
        else:
            raise ParseError(f"unknown row kind {row['kind']!r}", line=lineno)

    store = ProfileStore(domains, operator_table=operator_table, coding_table=coding_table)
    return store, store.validate_monotonicity()
