import itertools

import pytest
from hypothesis import given, strategies as st

from vidplan.knobspace import (
    CodingOption,
    Consumer,
    FidelityOption,
    KnobDomain,
    KnobDomains,
    Ordering,
    can_degrade,
    compare_fidelity,
    default_domains,
    enumerate_formats,
    knobwise_max,
)

D = default_domains()


def small_domains():
    return KnobDomains(
        sampling=KnobDomain("sampling", ("a", "b"), (0.5, 1.0)),
        resolution=KnobDomain("resolution", ("lo", "hi"), (100.0, 200.0)),
        crop=KnobDomain("crop", ("full",), (1.0,)),
        quality=KnobDomain("quality", ("q",), (1.0,)),
        speed_step=KnobDomain("speed_step", ("s",), (1.0,)),
        keyframe=KnobDomain("keyframe", ("k",), (1.0,)),
    )


fidelities = st.builds(
    FidelityOption,
    st.integers(0, 4), st.integers(0, 4), st.integers(0, 2), st.integers(0, 3))


def test_domain_rejects_non_monotone_annotations():
    with pytest.raises(ValueError):
        KnobDomain("x", ("a", "b"), (2.0, 1.0))


def test_compare_examples():
    base = FidelityOption(2, 3, 1, 2)  # 720p-ish
    poorer_res = base.replace(resolution=0)
    assert compare_fidelity(base, poorer_res) is Ordering.RICHER
    assert compare_fidelity(poorer_res, base) is Ordering.POORER
    assert compare_fidelity(base, base) is Ordering.EQUAL
    # good-50%-720p-1/2 vs bad-100%-540p-1: crossing knobs are incomparable
    a = FidelityOption(3, 3, 1, 2)
    b = FidelityOption(4, 2, 2, 0)
    assert compare_fidelity(a, b) is Ordering.INCOMPARABLE


def test_can_degrade_matches_dominance_oracle_exhaustively():
    sd = small_domains()
    options = [FidelityOption(s, r, 0, 0)
               for s in range(len(sd.sampling)) for r in range(len(sd.resolution))]
    for a, b in itertools.product(options, options):
        dominates = all(x >= y for x, y in zip(a.as_tuple(), b.as_tuple()))
        assert can_degrade(a, b) == dominates


@given(fidelities, fidelities)
def test_knobwise_max_is_the_join(a, b):
    j = knobwise_max(a, b)
    assert can_degrade(j, a) and can_degrade(j, b)
    # least upper bound: j is dominated by every common upper bound
    for s in range(5):
        for r in range(5):
            ub = FidelityOption(s, r, 2, 3)
            if can_degrade(ub, a) and can_degrade(ub, b):
                assert can_degrade(ub, j)


@given(fidelities, fidelities, fidelities)
def test_partial_order_properties(a, b, c):
    assert compare_fidelity(a, a) is Ordering.EQUAL
    if compare_fidelity(a, b) is Ordering.RICHER:
        assert compare_fidelity(b, a) is Ordering.POORER
    if can_degrade(a, b) and can_degrade(b, a):
        assert a == b
    if can_degrade(a, b) and can_degrade(b, c):
        assert can_degrade(a, c)


def test_knobwise_max_idempotent():
    f = FidelityOption(1, 2, 0, 3)
    assert knobwise_max(f, f) == f


def test_knobwise_max_dominates_1000_sampled_pairs():
    import numpy as np

    rng = np.random.default_rng(2)
    shape = D.fidelity_shape()
    for _ in range(1000):
        a = FidelityOption(*(int(rng.integers(n)) for n in shape))
        b = FidelityOption(*(int(rng.integers(n)) for n in shape))
        j = knobwise_max(a, b)
        assert can_degrade(j, a) and can_degrade(j, b)


def test_enumerate_counts_on_shipped_domains():
    formats = list(enumerate_formats(D))
    assert len(formats) == 300 * 26 == 7800
    assert len(set(formats)) == len(formats)
    assert D.n_formats() == 7800


def test_enumerate_counts_single_value_domains():
    sd = small_domains()
    tiny = KnobDomains(
        sampling=KnobDomain("sampling", ("a",), (1.0,)),
        resolution=sd.crop.__class__("resolution", ("r",), (1.0,)),
        crop=sd.crop, quality=sd.quality, speed_step=sd.speed_step, keyframe=sd.keyframe)
    formats = list(enumerate_formats(tiny))
    assert len(formats) == 2  # one encoded, one raw
    assert sum(1 for f in formats if f.is_raw) == 1


def test_raw_coding_canonicalized():
    assert CodingOption(3, 2, bypass=True) == CodingOption.raw()


def test_consumer_validates_accuracy():
    with pytest.raises(ValueError):
        Consumer("op", 0.0)
    with pytest.raises(ValueError):
        Consumer("op", 1.2)


def test_sampling_interval():
    assert D.sampling_interval(FidelityOption(0, 0, 0, 0)) == 30
    assert D.sampling_interval(FidelityOption(4, 0, 0, 0)) == 1
