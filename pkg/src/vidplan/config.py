"""Planner configuration file loading and the derived-configuration format.

The config file is YAML. Every command takes the same file; each command
reads the sections it needs and validates them on load. Derived video
format configurations are written to and read from a JSON hand-off file so
commands compose via files on disk.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ParseError
from .knobspace import (
    CodingOption,
    Consumer,
    ConsumptionFormat,
    FidelityOption,
    KnobDomain,
    KnobDomains,
    StorageFormat,
    default_domains,
)
from .perfmodel import CodecSpec, HardwareSpec, IStream, QuerySpec, StorageTier, Temperature, Workload
from .planner import HardwareCatalog
from .simstore import (
    DeviceSpec,
    IngestSpec,
    MigrationSpec,
    RetrievalStream,
    Scenario,
    SimQuery,
)


@dataclass
class PlannerConfig:
    path: Path
    raw: dict
    sha256: str
    seed: int
    domains: KnobDomains
    accuracy_levels: list[float]
    operator_base_speeds: dict[str, float] | None
    disk_read_bw: float
    ingest_budget: float | None
    storage_budget_gb: float | None
    lifespan_days: int
    hardware: HardwareSpec | None = None
    hardware_new: HardwareSpec | None = None
    workload: Workload | None = None
    catalog: HardwareCatalog | None = None
    scenario: Scenario | None = None


def _require(raw: dict, key: str, ctx: str):
    if key not in raw:
        raise ParseError(f"{ctx}: missing key {key!r}")
    return raw[key]


def _domains_from(raw) -> KnobDomains:
    if raw in (None, "default"):
        return default_domains()
    knobs = {}
    for name in ("sampling", "resolution", "crop", "quality", "speed_step", "keyframe"):
        spec = _require(raw, name, "domains")
        knobs[name] = KnobDomain(name, tuple(str(v) for v in spec["values"]),
                                 tuple(float(a) for a in spec["annotations"]))
    return KnobDomains(**knobs)


def _tier_from(raw: dict) -> StorageTier:
    return StorageTier(str(raw["name"]), float(raw["read_bw"]), float(raw["write_bw"]),
                       float(raw["capacity_gb"]), float(raw.get("cost", 0.0)))


def _codec_from(raw: dict) -> CodecSpec:
    return CodecSpec(float(raw["decode_fps"]), float(raw["transcode_fps"]),
                     float(raw.get("cost", 0.0)))


def _hardware_from(raw: dict | None) -> HardwareSpec | None:
    if raw is None:
        return None
    tiers = tuple(_tier_from(t) for t in _require(raw, "tiers", "hardware"))
    return HardwareSpec(tiers, _codec_from(_require(raw, "codec", "hardware")))


def _workload_from(raw: dict | None) -> Workload | None:
    if raw is None:
        return None
    istreams = tuple(
        IStream(str(i["name"]), float(i["encoded_bitrate"]), float(i["raw_bitrate"]),
                float(i["compute_fps"]), float(i["activation"]))
        for i in _require(raw, "istreams", "workload"))
    queries = tuple(
        QuerySpec(str(q["name"]), float(q["weight"]), tuple(int(s) for s in q["stages"]))
        for q in _require(raw, "queries", "workload"))
    temps = tuple(
        Temperature(str(t["name"]), float(t["span_s"]), float(t["weight"]))
        for t in _require(raw, "temperatures", "workload"))
    return Workload(int(raw.get("n_cam", 1)), float(raw.get("fps", 30.0)),
                    istreams, queries, temps)


def _catalog_from(raw: dict | None) -> HardwareCatalog | None:
    if raw is None:
        return None
    slots = tuple(
        tuple(_tier_from(t) for t in slot)
        for slot in _require(raw, "slots", "catalog"))
    codecs = tuple(_codec_from(c) for c in _require(raw, "codecs", "catalog"))
    return HardwareCatalog(slots, codecs, float(_require(raw, "budget", "catalog")))


def _scenario_from(raw: dict | None) -> Scenario | None:
    if raw is None:
        return None
    tiers = tuple(DeviceSpec(str(t["name"]), float(t["rate_mb_s"]))
                  for t in _require(raw, "tiers", "scenario"))
    codec = raw.get("codec")
    codec_dev = DeviceSpec(str(codec["name"]), float(codec["rate_mb_s"])) if codec else None
    istreams = tuple(RetrievalStream(str(i["name"]), str(i["tier"]), float(i["chunk_mb"]))
                     for i in raw.get("istreams", []))
    queries = tuple(SimQuery(str(q["name"]), tuple(str(s) for s in q["istreams"]))
                    for q in raw.get("queries", []))
    ingests = tuple(IngestSpec(str(i["name"]), str(i["tier"]), float(i["chunk_mb"]),
                               bool(i.get("transcode", False)))
                    for i in raw.get("ingests", []))
    migrations = tuple(MigrationSpec(str(m["name"]), str(m["src"]), str(m["dst"]),
                                     float(m["volume_mb"]), str(m.get("codec_op", "")))
                       for m in raw.get("migrations", []))
    scenario = Scenario(
        tiers=tiers, codec=codec_dev, istreams=istreams, queries=queries,
        ingests=ingests, migrations=migrations,
        horizon_s=float(raw.get("horizon_s", 600.0)),
        pause_threshold_s=float(raw.get("pause_threshold_s", 16.0)),
        seed=int(raw.get("seed", 0)))
    scenario.validate()
    return scenario


def load_config(path: str | Path) -> PlannerConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read config {path}: {e}") from None
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        raise ParseError(f"config {path}: {e}") from None
    if not isinstance(raw, dict):
        raise ParseError(f"config {path}: top level must be a mapping")

    sha = hashlib.sha256(text.encode("utf-8")).hexdigest()
    operators = raw.get("operators", {}) or {}
    levels = [float(a) for a in operators.get("accuracy_levels", [0.95, 0.9, 0.8, 0.7])]
    for a in levels:
        if not 0 < a <= 1:
            raise ParseError(f"accuracy level {a} outside (0, 1]")
    base_speeds = operators.get("base_speeds")
    if base_speeds is not None:
        base_speeds = {str(k): float(v) for k, v in base_speeds.items()}

    budgets = raw.get("budgets", {}) or {}
    ingest_budget = budgets.get("ingest_cores")
    storage_budget = budgets.get("storage_gb")

    return PlannerConfig(
        path=path, raw=raw, sha256=sha,
        seed=int(raw.get("seed", 0)),
        domains=_domains_from(raw.get("domains")),
        accuracy_levels=levels,
        operator_base_speeds=base_speeds,
        disk_read_bw=float(raw.get("disk_read_bw_mb_s", 1000.0)),
        ingest_budget=None if ingest_budget is None else float(ingest_budget),
        storage_budget_gb=None if storage_budget is None else float(storage_budget),
        lifespan_days=int(raw.get("lifespan_days", 10)),
        hardware=_hardware_from(raw.get("hardware")),
        hardware_new=_hardware_from(raw.get("hardware_new")),
        workload=_workload_from(raw.get("workload")),
        catalog=_catalog_from(raw.get("catalog")),
        scenario=_scenario_from(raw.get("scenario")),
    )


def consumers_from_config(cfg: PlannerConfig, operator_ids: list[str]) -> list[Consumer]:
    return [Consumer(op, acc) for op in sorted(operator_ids) for acc in cfg.accuracy_levels]


# -- derived-configuration hand-off file -------------------------------------


def _fidelity_obj(f: FidelityOption) -> list[int]:
    return list(f.as_tuple())


def _coding_obj(c: CodingOption) -> dict:
    return {"speed_step": c.speed_step, "keyframe": c.keyframe, "bypass": c.bypass}


def _sf_obj(sf: StorageFormat) -> dict:
    return {"fidelity": _fidelity_obj(sf.fidelity), "coding": _coding_obj(sf.coding)}


def save_configuration(path: str | Path, *, strategy: str,
                       assignments: dict[Consumer, ConsumptionFormat],
                       sfset, costs, config_sha: str, runs: dict) -> None:
    doc = {
        "strategy": strategy,
        "config_sha256": config_sha,
        "runs": runs,
        "consumers": [
            {"operator": c.operator_id, "accuracy": c.target_accuracy,
             "cf": _fidelity_obj(cf.fidelity)}
            for c, cf in sorted(assignments.items())
        ],
        "formats": [_sf_obj(sf) for sf in sfset.formats],
        "golden": _sf_obj(sfset.golden),
        "subscription": [
            {"cf": _fidelity_obj(cf.fidelity), "sf": _sf_obj(sf)}
            for cf, sf in sorted(sfset.subscription.items())
        ],
        "costs": {"storage_mb_per_s": costs.storage_cost,
                  "ingest_cores": costs.ingestion_cost},
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_configuration(path: str | Path):
    """Read back a derived configuration; returns (assignments, sfset, meta)."""
    from .sf_coalesce import SFSet  # local import to avoid a cycle

    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read configuration {path}: {e}") from None

    def fid(obj) -> FidelityOption:
        return FidelityOption(*obj)

    def sf(obj) -> StorageFormat:
        c = obj["coding"]
        coding = CodingOption.raw() if c["bypass"] else CodingOption(c["speed_step"], c["keyframe"])
        return StorageFormat(fid(obj["fidelity"]), coding)

    assignments = {
        Consumer(c["operator"], c["accuracy"]): ConsumptionFormat(fid(c["cf"]))
        for c in doc["consumers"]
    }
    sfset = SFSet(
        formats=[sf(s) for s in doc["formats"]],
        golden=sf(doc["golden"]),
        subscription={ConsumptionFormat(fid(e["cf"])): sf(e["sf"]) for e in doc["subscription"]},
    )
    return assignments, sfset, doc
