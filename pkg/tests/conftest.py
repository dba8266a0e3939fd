import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from vidplan import Consumer, default_domains, generate_synthetic
from vidplan.cf_search import derive_all
from vidplan.sf_coalesce import make_subscribers

DISK_READ_BW = 1000.0  # MB/s, commodity HDD array
ACCURACY_LEVELS = (0.95, 0.9, 0.8, 0.7)


@pytest.fixture(scope="session")
def domains():
    return default_domains()


def full_library_consumers(store):
    return [Consumer(op, a) for op in store.operator_ids for a in ACCURACY_LEVELS]


def derived_scenario(seed, domains):
    """Full derivation pipeline on one synthetic profile."""
    store = generate_synthetic(seed, domains)
    consumers = full_library_consumers(store)
    assignments, report = derive_all(store, consumers)
    subscribers = make_subscribers(store, assignments)
    return store, consumers, assignments, subscribers, report


@pytest.fixture(scope="session")
def scenario0(domains):
    return derived_scenario(0, domains)
