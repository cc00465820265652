"""Acceptance suite: every release criterion with its stated tolerance.

Each test records a PASS/FAIL line that pytest prints in the terminal
summary. Scenario seeds are frozen; directional checks compare ablation
arms on identical inputs.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

import pointtrack as pt
from pointtrack.assignment import dynamic_threshold, solve_assignment
from pointtrack.cli import main as cli_main
from pointtrack.ddcf import DcfConfig, localize, train_filter
from pointtrack.formats import parse_kv_text
from pointtrack.gog import GogConfig, build_graph, solve as gog_solve, solve_total_cost
from pointtrack.lifecycle import ScoreColumnValidator
from pointtrack.metrics import compute_sequence_metrics, pearson, t_ap, tr_mae, tr_nmae
from pointtrack.pipeline import TrackerConfig, run_sequence
from pointtrack.simulate import ScenarioConfig, generate

from conftest import record_acceptance
from test_assignment import brute_force as assignment_oracle
from test_ddcf import blob_map, center_patch, spatial_xcorr_argmax
from test_gog import best_disjoint_family
from test_motion import oracle_predict, oracle_update, random_state
from test_pipeline import oracle_from_bundle


@pytest.fixture
def record(request):
    crit = request.node.get_closest_marker("criterion")
    name = crit.args[0] if crit else request.node.name
    passed = {"value": False}
    yield passed
    record_acceptance(name, passed["value"])


def occlusion_scenario() -> ScenarioConfig:
    """Criterion 7/11 scenario: long staggered occlusions, detector noise,
    clutter and static ghosts, features enabled."""
    windows = []
    for a in range(1, 11):
        windows.append((a, 50 + 18 * (a - 1), 50 + 18 * (a - 1) + 24 + a))
        windows.append((a, 260 + 18 * (a - 1), 260 + 18 * (a - 1) + 20 + a))
        windows.append((a, 440 + 18 * (a - 1), 440 + 18 * (a - 1) + 28))
    return ScenarioConfig(
        n_agents=10, frames=600, arena_width=600, arena_height=600,
        agent_speed_sigma=1.3, turn_sigma=0.15, jitter_sigma=0.3,
        fn_rate=0.2, fp_clutter_rate=1.0, persistent_fp_count=5,
        occlusion_windows=tuple(windows),
        feature_channels=8, feature_stride=6.0, seed=101)


def occlusion_tracker_config(use_ddcf=True) -> TrackerConfig:
    # psr acceptance gate calibrated above the synthetic-feature noise floor
    return replace(TrackerConfig(), dcf=DcfConfig(patch_cells=16, psr_min=10.0),
                   use_ddcf=use_ddcf)


@pytest.mark.criterion("1: altitude gate exactness and monotonicity")
def test_criterion_1_dynamic_threshold(record):
    start = time.time()
    assert dynamic_threshold(100.0) == 10.0
    assert dynamic_threshold(50.0) == 20.0
    assert dynamic_threshold(200.0) == 10.0
    rng = np.random.default_rng(1)
    alts = np.sort(rng.uniform(0.5, 2000.0, 1000))
    gates = [dynamic_threshold(a) for a in alts]
    assert all(g2 <= g1 + 1e-15 for g1, g2 in zip(gates, gates[1:]))
    assert min(gates) >= 10.0
    assert dynamic_threshold(100.0) == 10.0  # equality at the reference
    assert time.time() - start < 1.0
    record["value"] = True


@pytest.mark.criterion("2: assignment equals brute force on 1000 matrices up to 7x7")
def test_criterion_2_assignment_optimality(record):
    start = time.time()
    rng = np.random.default_rng(2024)
    for trial in range(1000):
        n = int(rng.integers(1, 8))
        m = int(rng.integers(1, 8))
        costs = rng.uniform(0, 30, (n, m))
        gate = float(rng.uniform(5, 35)) if trial % 2 == 0 else 1e9
        result = solve_assignment(costs, gate)
        card, total = assignment_oracle(costs, gate)
        assert len(result.matches) == card
        assert sum(d for _, _, d in result.matches) == pytest.approx(total, abs=1e-9)
    assert time.time() - start < 10.0
    record["value"] = True


@pytest.mark.criterion("3: Kalman algebra matches the textbook oracle at 1e-10")
def test_criterion_3_kalman_oracle(record):
    cfg = pt.MotionConfig()
    rng = np.random.default_rng(3)
    for _ in range(100):
        s = random_state(rng)
        got = pt.predict(s, cfg)
        mean, cov = oracle_predict(list(s.mean), [list(r) for r in s.covariance], cfg)
        assert np.max(np.abs(got.mean - np.array(mean))) <= 1e-10
        assert np.max(np.abs(got.covariance - np.array(cov))) <= 1e-10
        z = rng.normal(0, 50, 2)
        got = pt.update(s, z, cfg)
        mean, cov = oracle_update(list(s.mean), [list(r) for r in s.covariance], list(z), cfg)
        assert np.max(np.abs(got.mean - np.array(mean))) <= 1e-10
        assert np.max(np.abs(got.covariance - np.array(cov))) <= 1e-10
    # covariance health over 100-step random op sequences
    for _ in range(20):
        s = pt.init_state(rng.normal(0, 100, 2), cfg)
        for _ in range(100):
            op = rng.integers(0, 3)
            if op == 0:
                s = pt.predict(s, cfg)
            elif op == 1:
                s = pt.update(s, rng.normal(0, 100, 2), cfg)
            else:
                th = rng.uniform(0, 2 * np.pi)
                s = pt.apply_affine(s, pt.AffineTransform(
                    np.cos(th), -np.sin(th), np.sin(th), np.cos(th),
                    rng.normal(0, 5), rng.normal(0, 5)))
            p = s.covariance
            assert np.max(np.abs(p - p.T)) <= 1e-9
            assert np.linalg.eigvalsh(p).min() >= -1e-9
    record["value"] = True


@pytest.mark.criterion("4: affine recovery exact without noise, 0.1 px with 30% outliers")
def test_criterion_4_cmc(record):
    rng = np.random.default_rng(4)
    th = np.radians(5.0)
    truth = pt.AffineTransform(np.cos(th), -np.sin(th), np.sin(th), np.cos(th), 4.0, -2.0)
    pts = rng.uniform(-300, 300, (10, 2))
    cur = pts @ truth.linear.T + truth.translation
    pairs = [pt.Correspondence(p[0], p[1], c[0], c[1]) for p, c in zip(pts, cur)]
    got = pt.estimate_affine(pairs, pt.RansacConfig(min_inliers=3))
    err = np.max(np.abs(np.array([got.m11, got.m12, got.m21, got.m22, got.t1, got.t2])
                        - np.array([truth.m11, truth.m12, truth.m21, truth.m22, truth.t1, truth.t2])))
    assert err <= 1e-8

    worst = 0.0
    for _ in range(50):
        pts = rng.uniform(-500, 500, (100, 2))
        cur = pts @ truth.linear.T + truth.translation + rng.normal(0, 0.2, (100, 2))
        pairs = [pt.Correspondence(p[0], p[1], c[0], c[1]) for p, c in zip(pts, cur)]
        for i in rng.choice(100, 30, replace=False):
            p = pairs[i]
            pairs[i] = pt.Correspondence(p.prev_x, p.prev_y,
                                         rng.uniform(-500, 500), rng.uniform(-500, 500))
        got = pt.estimate_affine(pairs, pt.RansacConfig(seed=int(rng.integers(1 << 32))))
        worst = max(worst, abs(got.t1 - truth.t1), abs(got.t2 - truth.t2))
    assert worst <= 0.1
    record["value"] = True


@pytest.mark.criterion("5: DCF shift recovery within 0.5 cell of the spatial oracle")
def test_criterion_5_dcf_shift_recovery(record):
    start = time.time()
    rng = np.random.default_rng(5)
    trials, hits = 200, 0
    for _ in range(trials):
        sig = rng.normal(size=8)
        sig /= np.linalg.norm(sig)
        sx, sy = int(rng.integers(-4, 5)), int(rng.integers(-4, 5))
        p_train = center_patch(blob_map(rng, 32, 32, signature=sig))
        p_test = center_patch(blob_map(rng, 32 + sx, 32 + sy, signature=sig))
        filt = train_filter(p_train)
        offset, _ = localize(filt, p_test)
        dx_o, dy_o = spatial_xcorr_argmax(p_train, p_test)
        err = max(abs(offset[0] / 4.0 - dx_o), abs(offset[1] / 4.0 - dy_o))
        hits += err <= 0.5
    assert hits >= 0.95 * trials
    assert time.time() - start < 30.0
    record["value"] = True


@pytest.mark.criterion("6: clean end-to-end run is exact (Tr-nMAE 0, ID-SW 0, T-AP@10 1)")
def test_criterion_6_clean_end_to_end(record, tmp_path, capsys):
    start = time.time()
    scenario = tmp_path / "scenario.txt"
    scenario.write_text(
        "n_agents = 10\nframes = 300\narena_width = 500\narena_height = 500\n"
        "agent_speed_sigma = 1.5\njitter_sigma = 0\nfn_rate = 0\n"
        "fp_clutter_rate = 0\nfeature_channels = 0\nseed = 600\n")
    bundle = tmp_path / "bundle"
    tracks = tmp_path / "tracks.csv"
    report = tmp_path / "report.txt"
    assert cli_main(["simulate", "--config", str(scenario), "--out", str(bundle)]) == 0
    assert cli_main(["track", "--bundle", str(bundle), "--out", str(tracks)]) == 0
    assert cli_main(["evaluate", "--gt", str(bundle / "gt.csv"), "--pred", str(tracks),
                     "--report", str(report)]) == 0
    capsys.readouterr()
    values = parse_kv_text(report.read_text())
    assert values["tr_nae"] == "0"
    assert values["id_sw"] == "0"
    assert values["t_ap_10"] == "1"
    assert time.time() - start < 60.0
    record["value"] = True


@pytest.fixture(scope="module")
def occlusion_runs():
    bundle = generate(occlusion_scenario())
    runs = {}
    for use_ddcf in (True, False):
        res = run_sequence(bundle.frames, occlusion_tracker_config(use_ddcf),
                           validator=ScoreColumnValidator())
        runs[use_ddcf] = compute_sequence_metrics(bundle.gt, res.to_trajectories())
    return bundle, runs


@pytest.mark.criterion("7: DDCF halves identity switches and lowers Tr-nMAE")
def test_criterion_7_ddcf_ablation(record, occlusion_runs):
    _, runs = occlusion_runs
    with_ddcf, without = runs[True], runs[False]
    assert with_ddcf.id_sw <= 0.5 * without.id_sw
    assert with_ddcf.tr_nae < without.tr_nae
    record["value"] = True


@pytest.mark.criterion("8: CMC never hurts ID-SW and tightens matches under camera motion")
def test_criterion_8_cmc_ablation(record):
    cfg = ScenarioConfig(
        n_agents=10, frames=200, arena_width=500, arena_height=500,
        agent_speed_sigma=1.2, turn_sigma=0.1, jitter_sigma=0.3,
        fn_rate=0.15, fp_clutter_rate=0.5,
        camera_translation_x=5.0, camera_translation_y=3.0,
        camera_rotation_deg=0.8, feature_channels=0, seed=71)
    bundle = generate(cfg)
    stats = {}
    for use_cmc in (True, False):
        res = run_sequence(bundle.frames, replace(TrackerConfig(), use_cmc=use_cmc),
                           validator=ScoreColumnValidator())
        m = compute_sequence_metrics(bundle.gt, res.to_trajectories())
        stats[use_cmc] = (m.id_sw, res.summary.mean_match_distance)
    assert stats[True][0] <= stats[False][0]
    assert stats[True][1] < stats[False][1]
    record["value"] = True


@pytest.mark.criterion("9: classification gate suppresses ghost trajectories")
def test_criterion_9_cls_ablation(record):
    cfg = ScenarioConfig(n_agents=6, frames=150, arena_width=400, arena_height=400,
                         jitter_sigma=0.2, persistent_fp_count=5,
                         feature_channels=0, seed=900)
    bundle = generate(cfg)
    oracle = oracle_from_bundle(bundle)
    with_cls = run_sequence(bundle.frames, TrackerConfig(), validator=oracle)
    without = run_sequence(bundle.frames, replace(TrackerConfig(), use_cls=False))
    y = len(bundle.gt)
    assert abs(with_cls.summary.trajectory_count - y) < abs(without.summary.trajectory_count - y)

    class Zero:
        def score(self, context):
            return 0.0

    nothing = run_sequence(bundle.frames, TrackerConfig(), validator=Zero())
    assert nothing.summary.trajectory_count == 0
    record["value"] = True


@pytest.mark.criterion("10: metric hand cases (Tr-MAE, Tr-nMAE, Pearson, T-AP)")
def test_criterion_10_metric_hand_cases(record):
    assert tr_nmae([100], [85]) == pytest.approx(0.15)
    assert tr_mae([5, 15, 25], [7, 10, 30]) == pytest.approx(4.0)
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [-2, -4, -6]) == pytest.approx(-1.0)
    with pytest.raises(pt.InvalidInputError):
        pearson([1, 2, 3], [5, 5, 5])
    gt = pt.TrajectorySet.from_rows(
        [(f, 1, float(f), 0.0) for f in range(30)] +
        [(f, 2, float(f), 200.0) for f in range(30)])
    pred = pt.TrajectorySet.from_rows([(f, 1, float(f), 0.0, 1.0) for f in range(30)])
    assert t_ap(gt, pred, 10) == pytest.approx(0.5)
    record["value"] = True


@pytest.mark.criterion("11: GOG is sound on small instances and loses to the online tracker")
def test_criterion_11_gog(record, occlusion_runs):
    rng = np.random.default_rng(11)
    exact_subset = 0
    for _ in range(80):
        n = int(rng.integers(1, 7))
        dets = [pt.Detection(frame=int(rng.integers(0, 6)),
                             x=float(rng.uniform(0, 40)), y=float(rng.uniform(0, 40)),
                             conf=float(rng.uniform(0.2, 0.95))) for _ in range(n)]
        cfg = GogConfig(entry_cost=float(rng.uniform(0.5, 3)),
                        exit_cost=float(rng.uniform(0.5, 3)),
                        gap_penalty=0.2, max_gap=6, gate=10.0)
        graph = build_graph(dets, cfg)
        greedy_cost = solve_total_cost(graph)
        oracle_cost, oracle_size = best_disjoint_family(graph)
        assert greedy_cost <= 1e-12
        assert greedy_cost >= oracle_cost - 1e-9
        result = gog_solve(graph)
        seen = set()
        for tid in result.ids:
            frames = [p.frame for p in result.tracks[tid]]
            assert frames == sorted(frames)
            for p in result.tracks[tid]:
                key = (p.frame, p.x, p.y)
                assert key not in seen
                seen.add(key)
        if oracle_size <= 1:
            assert greedy_cost == pytest.approx(oracle_cost, abs=1e-9)
            exact_subset += 1
    assert exact_subset > 0

    bundle, runs = occlusion_runs
    dets = [d for fi in bundle.frames for d in fi.detections]
    gates = {m.frame: dynamic_threshold(m.altitude) for m in bundle.metadata}
    gog_metrics = compute_sequence_metrics(
        bundle.gt, gog_solve(build_graph(dets, GogConfig(), gates)))
    assert runs[True].tr_nae < gog_metrics.tr_nae
    record["value"] = True


@pytest.mark.criterion("12: byte-identical CLI reruns and fuzzed format round-trips")
def test_criterion_12_determinism(record, tmp_path, capsys):
    import hashlib

    scenario = tmp_path / "scenario.txt"
    scenario.write_text(
        "n_agents = 5\nframes = 60\narena_width = 300\narena_height = 300\n"
        "agent_speed_sigma = 1.2\njitter_sigma = 0.3\nfn_rate = 0.1\n"
        "fp_clutter_rate = 0.5\npersistent_fp_count = 2\nfeature_channels = 4\n"
        "feature_stride = 4\ncamera_translation_x = 1\ncamera_rotation_deg = 0.1\n"
        "seed = 12\n")
    digests = []
    for name in ("a", "b"):
        root = tmp_path / name
        bundle = root / "bundle"
        assert cli_main(["simulate", "--config", str(scenario), "--out", str(bundle)]) == 0
        tracks = root / "tracks.csv"
        assert cli_main(["track", "--bundle", str(bundle), "--out", str(tracks)]) == 0
        gog_csv = root / "gog.csv"
        assert cli_main(["gog", "--bundle", str(bundle), "--out", str(gog_csv)]) == 0
        report = root / "report.txt"
        assert cli_main(["evaluate", "--gt", str(bundle / "gt.csv"), "--pred", str(tracks),
                         "--report", str(report)]) == 0
        svg = root / "overlay.svg"
        assert cli_main(["render", "--bundle", str(bundle), "--pred", str(tracks),
                         "--out", str(svg)]) == 0
        tree = {}
        for p in sorted(root.rglob("*")):
            if p.is_file():
                tree[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
        digests.append(tree)
    capsys.readouterr()
    assert digests[0] == digests[1]

    # fuzzed parser round-trips over every CSV family
    from test_formats import FAMILIES
    rng = np.random.default_rng(121)
    for writer, parser, make in FAMILIES:
        for _ in range(10):
            rows = [make(rng, f) for f in range(int(rng.integers(0, 30)))]
            text = writer(rows)
            assert writer(parser(text)) == text
    record["value"] = True
