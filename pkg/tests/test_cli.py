import json
from pathlib import Path

from vidplan.cli import main

CONFIG = str(Path(__file__).resolve().parent.parent / "configs" / "demo.yaml")
GOLDEN = Path(__file__).resolve().parent / "data" / "sim_metrics_golden.csv"


def run_cli(*args) -> int:
    return main(list(args))


def body(path: Path) -> list[str]:
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


def test_derive_report_shape(tmp_path):
    assert run_cli("--config", CONFIG, "--out-dir", str(tmp_path), "derive") == 0
    cf_rows = body(tmp_path / "cf_table.csv")[1:]
    assert len(cf_rows) == 24
    sf_rows = body(tmp_path / "sf_table.csv")[1:]
    assert 3 <= len(sf_rows) <= 6
    golden_flags = [r.split(",")[6] for r in sf_rows]
    assert golden_flags.count("1") == 1
    raw_flags = [r.split(",")[7] for r in sf_rows]
    assert raw_flags.count("1") >= 1
    conf = json.loads((tmp_path / "configuration.json").read_text())
    assert len(conf["consumers"]) == 24
    assert len({tuple(c["cf"]) for c in conf["consumers"]}) <= 24


def test_derive_distance_strategy_labelled_and_pricier(tmp_path):
    h_dir, d_dir = tmp_path / "h", tmp_path / "d"
    run_cli("--config", CONFIG, "--out-dir", str(h_dir), "derive")
    run_cli("--config", CONFIG, "--out-dir", str(d_dir), "derive", "--strategy", "distance")
    h_cost = float(body(h_dir / "costs.csv")[1].split(",")[1])
    d_row = body(d_dir / "costs.csv")[1].split(",")
    assert d_row[0] == "distance"
    assert float(d_row[1]) >= h_cost - 1e-9


def test_missing_profiles_file_fails_cleanly(tmp_path, capsys):
    rc = run_cli("--config", CONFIG, "--profiles", "/definitely/not/here.csv",
                 "--out-dir", str(tmp_path), "derive")
    assert rc != 0
    assert "error" in capsys.readouterr().err.lower()


def test_erode_composes_with_derive(tmp_path):
    run_cli("--config", CONFIG, "--out-dir", str(tmp_path), "derive")
    assert run_cli("--config", CONFIG, "--out-dir", str(tmp_path), "erode") == 0
    assert (tmp_path / "decay_curve.svg").exists()
    report = body(tmp_path / "erosion_report.csv")
    k = float(report[1].split(",")[0])
    assert k >= 0.0


def test_erode_generous_budget_flat_curve(tmp_path):
    run_cli("--config", CONFIG, "--out-dir", str(tmp_path), "derive")
    assert run_cli("--config", CONFIG, "--out-dir", str(tmp_path),
                   "erode", "--budget-storage", "100000") == 0
    report = body(tmp_path / "erosion_report.csv")
    assert float(report[1].split(",")[0]) == 0.0
    plan_rows = body(tmp_path / "erosion_plan.csv")[1:]
    assert all(float(r.split(",")[2]) == 0.0 for r in plan_rows)


def test_erode_without_derive_fails(tmp_path):
    assert run_cli("--config", CONFIG, "--out-dir", str(tmp_path), "erode") != 0


def test_plan_hw_frontier_matches_dominance_oracle(tmp_path):
    assert run_cli("--config", CONFIG, "--out-dir", str(tmp_path), "plan-hw") == 0
    setups = body(tmp_path / "setups.csv")[1:]
    frontier = body(tmp_path / "frontier.csv")[1:]

    def parse(rows):
        return [(float(r.split(",")[-2]), float(r.split(",")[-1])) for r in rows]

    pts, front = parse(setups), parse(frontier)
    for cost, util in front:
        assert not any(c <= cost and u > util + 1e-9 for c, u in pts)
    costs = [c for c, _ in front]
    assert costs == sorted(costs)


def test_plan_hw_whatif_outputs(tmp_path):
    rc = run_cli("--config", CONFIG, "--out-dir", str(tmp_path),
                 "plan-hw", "--whatif-decoder-cost", "0.5")
    assert rc == 0
    base = body(tmp_path / "frontier.csv")[1:]
    scaled = body(tmp_path / "whatif_frontier.csv")[1:]
    assert scaled
    # cheaper decoders shift the frontier left at equal-or-better utility
    for row in base:
        cost, util = float(row.split(",")[-2]), float(row.split(",")[-1])
        assert any(
            float(s.split(",")[-2]) <= cost + 1e-9
            and float(s.split(",")[-1]) >= util - 1e-9
            for s in scaled)


def test_seed_flag_changes_synthetic_profiles(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli("--config", CONFIG, "--out-dir", str(a), "derive")
    run_cli("--config", CONFIG, "--seed", "3", "--out-dir", str(b), "derive")
    assert body(a / "cf_table.csv") != body(b / "cf_table.csv")


def test_plan_migrate_outputs(tmp_path):
    assert run_cli("--config", CONFIG, "--out-dir", str(tmp_path), "plan-migrate") == 0
    rows = body(tmp_path / "schedule.csv")[1:]
    assert rows
    scores = [float(r.split(",")[-1]) for r in rows if float(r.split(",")[-2]) >= 0]
    assert scores == sorted(scores, reverse=True)
    assert (tmp_path / "trajectory.svg").exists()


def test_simulate_matches_frozen_golden(tmp_path):
    assert run_cli("--config", CONFIG, "--out-dir", str(tmp_path), "simulate") == 0
    assert body(tmp_path / "sim_metrics.csv") == GOLDEN.read_text().splitlines()


def test_byte_determinism_across_runs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        for cmd in ("derive", "erode", "simulate"):
            assert run_cli("--config", CONFIG, "--out-dir", str(out), cmd) == 0
    for name in sorted(p.name for p in a.iterdir()):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_reports_embed_config_hash(tmp_path):
    run_cli("--config", CONFIG, "--out-dir", str(tmp_path), "derive")
    import hashlib

    sha = hashlib.sha256(Path(CONFIG).read_bytes()).hexdigest()
    for name in ("cf_table.csv", "sf_table.csv", "costs.csv"):
        first = (tmp_path / name).read_text().splitlines()[0]
        assert first == f"# config_sha256={sha}"


def test_custom_domains_from_config(tmp_path):
    custom = tmp_path / "custom.yaml"
    custom.write_text(
        "seed: 1\n"
        "domains:\n"
        "  sampling: {values: ['1/10', '1'], annotations: [0.1, 1.0]}\n"
        "  resolution: {values: [360p, 720p], annotations: [230400, 921600]}\n"
        "  crop: {values: ['100%'], annotations: [1.0]}\n"
        "  quality: {values: [fair, best], annotations: [0.5, 1.0]}\n"
        "  speed_step: {values: [slow, fast], annotations: [1.0, 10.0]}\n"
        "  keyframe: {values: ['1', '10'], annotations: [1.0, 10.0]}\n"
        "operators:\n"
        "  accuracy_levels: [0.9, 0.7]\n")
    assert run_cli("--config", str(custom), "--out-dir", str(tmp_path), "derive") == 0
    rows = body(tmp_path / "cf_table.csv")[1:]
    assert len(rows) == 12  # 6 operators x 2 accuracy levels
    for r in rows:
        assert r.split(",")[2] in ("1/10", "1")


def test_budget_ingest_flag(tmp_path):
    base = tmp_path / "base"
    run_cli("--config", CONFIG, "--out-dir", str(base), "derive")
    unbudgeted = float(body(base / "costs.csv")[1].split(",")[2])
    capped = tmp_path / "capped"
    rc = run_cli("--config", CONFIG, "--out-dir", str(capped), "derive",
                 "--budget-ingest", str(unbudgeted * 0.85))
    assert rc == 0
    got = float(body(capped / "costs.csv")[1].split(",")[2])
    assert got <= unbudgeted * 0.85 + 1e-9
