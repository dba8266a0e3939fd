"""Profile-driven configuration planner for tiered video-analytics storage."""

from .knobspace import (
    CodingOption,
    Consumer,
    ConsumptionFormat,
    FidelityOption,
    KnobDomain,
    KnobDomains,
    Ordering,
    StorageFormat,
    can_degrade,
    compare_fidelity,
    default_domains,
    enumerate_formats,
    knobwise_max,
)
from .profiles import ProfileStore, generate_synthetic, load_profiles, save_profiles

__all__ = [
    "CodingOption", "Consumer", "ConsumptionFormat", "FidelityOption",
    "KnobDomain", "KnobDomains", "Ordering", "StorageFormat",
    "can_degrade", "compare_fidelity", "default_domains", "enumerate_formats",
    "knobwise_max", "ProfileStore", "generate_synthetic", "load_profiles",
    "save_profiles",
]

__version__ = "0.1.0"
