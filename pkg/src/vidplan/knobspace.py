"""Knob domains, format types and the richer-than partial order.

Video formats are points in a small discrete knob space. Four fidelity
knobs (frame sampling, resolution, crop factor, image quality) control how
much visual information a format carries; three coding knobs (speed step,
keyframe interval, coding bypass) control how it is encoded on disk.
Knob values are kept as ordered indexes into their domain plus a numeric
annotation used by the cost models, so the exact value lists are a
configuration concern, not a code one.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterator


@dataclass(frozen=True)
class KnobDomain:
    """One knob: ordered values, poorest first, with numeric annotations.

    ``annotations[i]`` is the number the cost models use for value ``i``
    (pixel count, sampling fraction, frames per keyframe, ...). Annotations
    must be strictly increasing so that richness comparisons on indexes and
    on annotations agree.
    """

    name: str
    values: tuple[str, ...]
    annotations: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError(f"knob {self.name!r}: empty value list")
        if len(self.values) != len(self.annotations):
            raise ValueError(f"knob {self.name!r}: values/annotations length mismatch")
        for a, b in itertools.pairwise(self.annotations):
            if not b > a:
                raise ValueError(f"knob {self.name!r}: annotations not strictly increasing")

    def __len__(self):
        return len(self.values)

    @property
    def richest(self) -> int:
        return len(self.values) - 1

    def index_of(self, value: str) -> int:
        try:
            return self.values.index(value)
        except ValueError:
            raise KeyError(f"{value!r} not in knob {self.name!r}") from None


FIDELITY_KNOBS = ("sampling", "resolution", "crop", "quality")


@dataclass(frozen=True)
class KnobDomains:
    """The full set of knob domains one planner instance works in."""

    sampling: KnobDomain
    resolution: KnobDomain
    crop: KnobDomain
    quality: KnobDomain
    speed_step: KnobDomain
    keyframe: KnobDomain

    def fidelity_domain(self, knob: str) -> KnobDomain:
        return getattr(self, knob)

    def fidelity_shape(self) -> tuple[int, int, int, int]:
        return (len(self.sampling), len(self.resolution), len(self.crop), len(self.quality))

    def n_fidelity(self) -> int:
        n = 1
        for k in self.fidelity_shape():
            n *= k
        return n

    def n_coding_encoded(self) -> int:
        return len(self.speed_step) * len(self.keyframe)

    def n_formats(self) -> int:
        # one raw variant per fidelity on top of all encoded codings
        return self.n_fidelity() * (self.n_coding_encoded() + 1)

    def richest_fidelity(self) -> "FidelityOption":
        return FidelityOption(
            self.sampling.richest, self.resolution.richest,
            self.crop.richest, self.quality.richest,
        )

    def sampling_interval(self, f: "FidelityOption") -> int:
        """Frames between consumed samples at this fidelity."""
        return max(1, round(1.0 / self.sampling.annotations[f.sampling]))


def default_domains() -> KnobDomains:
    """The shipped knob domains.

    Sizes 5/5/3/4 on fidelity and 5/5 on coding give 300 fidelity options
    and 7800 formats including the raw variants.
    """
    return KnobDomains(
        sampling=KnobDomain(
            "sampling",
            ("1/30", "1/10", "1/5", "1/2", "1"),
            (1 / 30, 1 / 10, 1 / 5, 1 / 2, 1.0),
        ),
        resolution=KnobDomain(
            "resolution",
            ("180p", "360p", "540p", "720p", "1080p"),
            (320 * 180, 640 * 360, 960 * 540, 1280 * 720, 1920 * 1080),
        ),
        crop=KnobDomain("crop", ("25%", "50%", "100%"), (0.25, 0.5, 1.0)),
        quality=KnobDomain("quality", ("bad", "fair", "good", "best"), (0.25, 0.5, 0.75, 1.0)),
        speed_step=KnobDomain(
            "speed_step",
            ("placebo", "veryslow", "medium", "fast", "ultrafast"),
            (1.0, 2.0, 6.0, 15.0, 40.0),
        ),
        keyframe=KnobDomain("keyframe", ("1", "2", "5", "10", "30"), (1.0, 2.0, 5.0, 10.0, 30.0)),
    )


class Ordering(enum.Enum):
    RICHER = "richer"
    EQUAL = "equal"
    POORER = "poorer"
    INCOMPARABLE = "incomparable"


@dataclass(frozen=True, order=True)
class FidelityOption:
    """Indexes into the four fidelity knob domains."""

    sampling: int
    resolution: int
    crop: int
    quality: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.sampling, self.resolution, self.crop, self.quality)

    def validate(self, domains: KnobDomains) -> None:
        for knob, idx in zip(FIDELITY_KNOBS, self.as_tuple()):
            dom = domains.fidelity_domain(knob)
            if not 0 <= idx < len(dom):
                raise ValueError(f"{knob} index {idx} out of range for domain {dom.name!r}")

    def replace(self, **kw) -> "FidelityOption":
        vals = dict(zip(FIDELITY_KNOBS, self.as_tuple()))
        vals.update(kw)
        return FidelityOption(**vals)

    def label(self, domains: KnobDomains) -> str:
        return "-".join(
            domains.fidelity_domain(k).values[i]
            for k, i in zip(FIDELITY_KNOBS, self.as_tuple())
        )


@dataclass(frozen=True, order=True)
class CodingOption:
    """Indexes into the coding knob domains, or raw bypass.

    A bypassed coding ignores speed step and keyframe interval, so both are
    canonicalized to 0: there is exactly one raw coding per fidelity.
    """

    speed_step: int
    keyframe: int
    bypass: bool = False

    def __post_init__(self):
        if self.bypass and (self.speed_step != 0 or self.keyframe != 0):
            object.__setattr__(self, "speed_step", 0)
            object.__setattr__(self, "keyframe", 0)

    @classmethod
    def raw(cls) -> "CodingOption":
        return cls(0, 0, bypass=True)

    def label(self, domains: KnobDomains) -> str:
        if self.bypass:
            return "raw"
        return (
            f"{domains.speed_step.values[self.speed_step]}"
            f"-kf{domains.keyframe.values[self.keyframe]}"
        )


@dataclass(frozen=True, order=True)
class StorageFormat:
    """An on-disk video version: fidelity plus coding."""

    fidelity: FidelityOption
    coding: CodingOption

    @property
    def is_raw(self) -> bool:
        return self.coding.bypass

    def label(self, domains: KnobDomains) -> str:
        return f"{self.fidelity.label(domains)}/{self.coding.label(domains)}"


@dataclass(frozen=True, order=True)
class ConsumptionFormat:
    """The fidelity of the raw frames handed to a consumer."""

    fidelity: FidelityOption

    def label(self, domains: KnobDomains) -> str:
        return self.fidelity.label(domains)


@dataclass(frozen=True, order=True)
class Consumer:
    """An operator run at a target accuracy (F1 score in (0, 1])."""

    operator_id: str
    target_accuracy: float

    def __post_init__(self):
        if not 0 < self.target_accuracy <= 1:
            raise ValueError(f"target accuracy {self.target_accuracy} not in (0, 1]")


def compare_fidelity(a: FidelityOption, b: FidelityOption) -> Ordering:
    """Richer-than partial order: knob-wise index comparison."""
    ta, tb = a.as_tuple(), b.as_tuple()
    if ta == tb:
        return Ordering.EQUAL
    if all(x >= y for x, y in zip(ta, tb)):
        return Ordering.RICHER
    if all(x <= y for x, y in zip(ta, tb)):
        return Ordering.POORER
    return Ordering.INCOMPARABLE


def can_degrade(src: FidelityOption, dst: FidelityOption) -> bool:
    """A source can be downgraded to dst only if it is at least as rich."""
    return compare_fidelity(src, dst) in (Ordering.RICHER, Ordering.EQUAL)


def knobwise_max(a: FidelityOption, b: FidelityOption) -> FidelityOption:
    """The join of the partial order: per-knob maximum."""
    return FidelityOption(*(max(x, y) for x, y in zip(a.as_tuple(), b.as_tuple())))


def enumerate_fidelities(domains: KnobDomains) -> Iterator[FidelityOption]:
    ns, nr, nc, nq = domains.fidelity_shape()
    for s, r, c, q in itertools.product(range(ns), range(nr), range(nc), range(nq)):
        yield FidelityOption(s, r, c, q)


def enumerate_codings(domains: KnobDomains, include_raw: bool = True) -> Iterator[CodingOption]:
    for step, kf in itertools.product(range(len(domains.speed_step)), range(len(domains.keyframe))):
        yield CodingOption(step, kf)
    if include_raw:
        yield CodingOption.raw()


def enumerate_formats(domains: KnobDomains) -> Iterator[StorageFormat]:
    """All storage formats, each exactly once; raw canonicalized per fidelity."""
    for f in enumerate_fidelities(domains):
        for c in enumerate_codings(domains):
            yield StorageFormat(f, c)
