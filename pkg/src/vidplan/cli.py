"""Command-line entry point.

Subcommands derive a format configuration, plan erosion, plan hardware
purchases, plan a migration schedule, and run the runtime simulator. Each
writes CSV reports (first line carries the config hash) and, where a
figure helps, a deterministic SVG next to them. Commands compose via files
in the output directory: ``derive`` writes ``configuration.json`` which
``erode`` reads back.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config as cfgmod
from . import erosion, planner, plots, simstore
from .cf_search import derive_all
from .errors import VidplanError
from .knobspace import FIDELITY_KNOBS
from .profiles import draw_operator_specs, generate_synthetic, load_profiles
from .sf_coalesce import (
    derive_sfs_distance,
    derive_sfs_heuristic,
    make_subscribers,
)

GB_TO_MB = 1000.0


def _write_csv(path: Path, header: list[str], rows: list[list], config_sha: str) -> None:
    lines = [f"# config_sha256={config_sha}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cell(v) -> str:
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


def _load_store(cfg, args):
    if args.profiles:
        store, warnings = load_profiles(args.profiles, cfg.domains)
        for w in warnings:
            print(f"profile warning: {w}", file=sys.stderr)
        return store
    specs = draw_operator_specs(cfg.seed, cfg.operator_base_speeds)
    return generate_synthetic(cfg.seed, cfg.domains, specs)


def _fidelity_row(domains, f):
    return [domains.fidelity_domain(k).values[i] for k, i in zip(FIDELITY_KNOBS, f.as_tuple())]


def cmd_derive(cfg, args, out: Path) -> int:
    store = _load_store(cfg, args)
    consumers = cfgmod.consumers_from_config(cfg, store.operator_ids)
    assignments, report = derive_all(store, consumers)
    subscribers = make_subscribers(store, assignments)

    ingest_budget = args.budget_ingest if args.budget_ingest is not None else cfg.ingest_budget
    if args.strategy == "distance":
        sfset, costs, sf_runs = derive_sfs_distance(
            store, subscribers, cfg.disk_read_bw, ingest_budget)
    else:
        sfset, costs, sf_runs = derive_sfs_heuristic(
            store, subscribers, cfg.disk_read_bw, ingest_budget)

    problems = sfset.validate(store, subscribers, cfg.disk_read_bw)
    if problems:
        for p in problems:
            print(f"requirement violation: {p}", file=sys.stderr)
        return 1

    d = cfg.domains
    cf_rows = []
    for consumer, cf in sorted(assignments.items()):
        pt = store.query_operator(consumer.operator_id, cf.fidelity)
        cf_rows.append([consumer.operator_id, consumer.target_accuracy,
                        *_fidelity_row(d, cf.fidelity), pt.accuracy, pt.consumption_speed,
                        sfset.subscription[cf].label(d)])
    _write_csv(out / "cf_table.csv",
               ["operator", "target_accuracy", *FIDELITY_KNOBS,
                "accuracy", "consumption_speed_x", "subscribes_to"],
               cf_rows, cfg.sha256)

    sf_rows = []
    for sf in sfset.formats:
        pt = store.query_coding(sf.fidelity, sf.coding, 1)
        sf_rows.append([sf.label(d), *_fidelity_row(d, sf.fidelity),
                        sf.coding.label(d), int(sf == sfset.golden), int(sf.is_raw),
                        pt.encode_cost, pt.bitrate])
    _write_csv(out / "sf_table.csv",
               ["format", *FIDELITY_KNOBS, "coding", "golden", "raw",
                "ingest_cores", "bitrate_mb_s"],
               sf_rows, cfg.sha256)

    _write_csv(out / "costs.csv",
               ["strategy", "storage_mb_per_s", "ingest_cores",
                "operator_runs", "coding_runs"],
               [[args.strategy, costs.storage_cost, costs.ingestion_cost,
                 report.total_operator_runs, sf_runs]],
               cfg.sha256)

    cfgmod.save_configuration(
        out / "configuration.json", strategy=args.strategy, assignments=assignments,
        sfset=sfset, costs=costs, config_sha=cfg.sha256,
        runs={"operator": report.total_operator_runs, "coding": sf_runs})
    n_unique = len(set(assignments.values()))
    print(f"derived {n_unique} unique consumption formats for {len(assignments)} consumers, "
          f"{len(sfset.formats)} storage formats ({args.strategy})")
    return 0


def cmd_erode(cfg, args, out: Path) -> int:
    store = _load_store(cfg, args)
    conf_path = Path(args.configuration) if args.configuration else out / "configuration.json"
    assignments, sfset, _meta = cfgmod.load_configuration(conf_path)
    subscribers = make_subscribers(store, assignments)
    tree = erosion.build_fallback_tree(sfset, subscribers, store, cfg.disk_read_bw)

    budget_gb = args.budget_storage if args.budget_storage is not None else cfg.storage_budget_gb
    if budget_gb is None:
        print("no storage budget configured (budgets.storage_gb)", file=sys.stderr)
        return 1
    plan = erosion.plan_erosion(tree, cfg.lifespan_days, budget_gb * GB_TO_MB)

    d = cfg.domains
    labels = {sf: sf.label(d) for sf in sfset.formats}
    rows = []
    for age in plan.ages:
        for sf in sfset.formats:
            rows.append([age, labels[sf], plan.fractions[age].get(sf, 0.0)])
    _write_csv(out / "erosion_plan.csv", ["age_days", "format", "deleted_fraction"],
               rows, cfg.sha256)

    speeds = plan.overall_speeds(tree)
    _write_csv(out / "erosion_report.csv",
               ["k", "p_min", "accumulated_gb", "budget_gb", "lifespan_days"],
               [[plan.params.k, plan.params.p_min, plan.accumulated_mb / GB_TO_MB,
                 budget_gb, cfg.lifespan_days]],
               cfg.sha256)

    per_sf = {labels[sf]: [plan.fractions[age].get(sf, 0.0) for age in plan.ages]
              for sf in sfset.formats if sf != sfset.golden}
    fig = plots.decay_figure(plan.ages, [speeds[a] for a in plan.ages], per_sf, plan.params.k)
    plots.save_figure(fig, out / "decay_curve.svg")
    print(f"erosion plan: k={plan.params.k:.3f}, "
          f"{plan.accumulated_mb / GB_TO_MB:.1f} GB of {budget_gb:.1f} GB budget")
    return 0


def cmd_plan_hw(cfg, args, out: Path) -> int:
    if cfg.catalog is None or cfg.workload is None:
        print("plan-hw needs 'catalog' and 'workload' config sections", file=sys.stderr)
        return 1
    points, frontier = planner.plan_hardware(cfg.catalog, cfg.workload, args.grid_step)

    def rows_of(pts):
        return [[",".join(t.name for t in p.setup.tiers), p.setup.codec.decode_fps,
                 p.cost, p.utility] for p in pts]

    _write_csv(out / "setups.csv", ["tiers", "codec_decode_fps", "cost", "utility"],
               rows_of(points), cfg.sha256)
    _write_csv(out / "frontier.csv", ["tiers", "codec_decode_fps", "cost", "utility"],
               rows_of(frontier), cfg.sha256)

    scaled_xy = None
    if args.whatif_decoder_cost != 1.0 or args.whatif_tier_speed != 1.0:
        rep = planner.whatif_report(cfg.catalog, cfg.workload,
                                    args.whatif_decoder_cost, args.whatif_tier_speed,
                                    args.grid_step)
        _write_csv(out / "whatif_frontier.csv",
                   ["tiers", "codec_decode_fps", "cost", "utility"],
                   rows_of(rep.scaled_frontier), cfg.sha256)
        scaled_xy = [(p.cost, p.utility) for p in rep.scaled_frontier]

    fig = plots.pareto_figure([(p.cost, p.utility) for p in points],
                              [(p.cost, p.utility) for p in frontier], scaled_xy)
    plots.save_figure(fig, out / "frontier.svg")
    print(f"evaluated {len(points)} setups; frontier has {len(frontier)} points")
    return 0


def cmd_plan_migrate(cfg, args, out: Path) -> int:
    if cfg.workload is None or cfg.hardware is None or cfg.hardware_new is None:
        print("plan-migrate needs 'workload', 'hardware' and 'hardware_new' sections",
              file=sys.stderr)
        return 1
    from .perfmodel import POLICY_CSV_HEADER, solve, t_all

    old_policy, old_util = solve(cfg.workload, cfg.hardware, grid_step=args.grid_step)
    # the new hardware must address the old placement's tiers by name
    new_policy, _ = solve(cfg.workload, cfg.hardware_new, grid_step=args.grid_step)
    _write_csv(out / "old_policy.csv", POLICY_CSV_HEADER,
               old_policy.rows(cfg.workload, cfg.hardware), cfg.sha256)
    _write_csv(out / "new_policy.csv", POLICY_CSV_HEADER,
               new_policy.rows(cfg.workload, cfg.hardware_new), cfg.sha256)
    tasks = planner.diff_policies(old_policy, new_policy, cfg.workload, cfg.hardware_new)
    base = t_all(old_policy, cfg.workload, cfg.hardware_new)
    schedule = planner.schedule_greedy(tasks, base)
    schedule.buffer_gb = planner.required_buffer_gb(
        old_policy, schedule, cfg.workload, cfg.hardware_new)

    rows = [[t.istream, t.temperature, t.src, t.dst, t.fraction, t.volume_gb,
             int(t.transcode), t.duration_s, t.reward, t.score] for t in schedule.tasks]
    _write_csv(out / "schedule.csv",
               ["istream", "temperature", "src", "dst", "fraction", "volume_gb",
                "transcode", "duration_s", "reward", "score"],
               rows, cfg.sha256)
    _write_csv(out / "migration_summary.csv",
               ["tasks", "total_duration_s", "base_utility", "final_utility",
                "buffer_gb", "nonmonotone_steps"],
               [[len(schedule.tasks), schedule.total_duration(), base,
                 base + sum(t.reward for t in schedule.tasks), schedule.buffer_gb,
                 schedule.nonmonotone_steps()]],
               cfg.sha256)
    fig = plots.trajectory_figure(schedule.trajectory, base)
    plots.save_figure(fig, out / "trajectory.svg")
    print(f"planned {len(schedule.tasks)} migration tasks over "
          f"{schedule.total_duration():.1f} s (old utility {old_util:.1f})")
    return 0


def cmd_simulate(cfg, args, out: Path) -> int:
    if cfg.scenario is None:
        print("simulate needs a 'scenario' config section", file=sys.stderr)
        return 1
    metrics = simstore.run(cfg.scenario)

    rows = [["ingest_buffer_peak_mb", metrics.ingest_buffer_peak_mb],
            ["migration_completion_s", metrics.migration_completion_s],
            ["chunks_ingested", metrics.chunks_ingested]]
    for q, spread in sorted(metrics.max_watermark_spread_s.items()):
        rows.append([f"max_watermark_spread_s[{q}]", spread])
    for dev, u in sorted(metrics.device_utilization.items()):
        rows.append([f"utilization[{dev}]", u])
    for ist, n in sorted(metrics.chunks_delivered.items()):
        rows.append([f"chunks_delivered[{ist}]", n])
    _write_csv(out / "sim_metrics.csv", ["metric", "value"], rows, cfg.sha256)

    fig = plots.sim_figure(metrics.device_utilization, metrics.max_watermark_spread_s)
    plots.save_figure(fig, out / "sim_metrics.svg")
    print(f"simulated {cfg.scenario.horizon_s:.0f} s horizon; metrics in sim_metrics.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vidplan",
        description="Profile-driven configuration planner for tiered video-analytics storage")
    parser.add_argument("--config", required=True, help="planner YAML config")
    parser.add_argument("--profiles", help="profile table; omit to use the synthetic model")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out-dir", default=".", help="directory for reports and plots")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive", help="derive consumption and storage formats")
    p.add_argument("--strategy", choices=["heuristic", "distance"], default="heuristic")
    p.add_argument("--budget-ingest", type=float, default=None, help="transcode cores cap")

    p = sub.add_parser("erode", help="plan age-based data erosion")
    p.add_argument("--budget-storage", type=float, default=None, help="storage budget (GB)")
    p.add_argument("--configuration", help="configuration.json from derive")

    p = sub.add_parser("plan-hw", help="Pareto frontier over hardware setups")
    p.add_argument("--grid-step", type=float, default=0.05)
    p.add_argument("--whatif-decoder-cost", type=float, default=1.0)
    p.add_argument("--whatif-tier-speed", type=float, default=1.0)

    p = sub.add_parser("plan-migrate", help="schedule the reconfiguration migration")
    p.add_argument("--grid-step", type=float, default=0.05)

    sub.add_parser("simulate", help="run the runtime scheduling simulator")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        handler = {
            "derive": cmd_derive,
            "erode": cmd_erode,
            "plan-hw": cmd_plan_hw,
            "plan-migrate": cmd_plan_migrate,
            "simulate": cmd_simulate,
        }[args.command]
        return handler(cfg, args, out)
    except VidplanError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
