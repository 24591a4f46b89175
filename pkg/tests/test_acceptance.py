"""Acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line (visible even without ``-s``)
and then asserts. Run just this module with ``pytest tests/test_acceptance.py -v``.
"""

import csv
import io
import math
import time

import numpy as np
import pytest

from eprsim.analysis import ExperimentConfig, chsh, correlation_scan, efficiency, visibility
from eprsim.cli import main
from eprsim.model import NoiseConfig
from eprsim.oracle import (
    CLASSES,
    class_probabilities,
    ideal_coincidence_probability,
    oracle_chsh,
    oracle_efficiency,
)
from eprsim.sweep import AxisSpec, SweepSpec, fraction_above, run_sweep

PI = math.pi


@pytest.fixture
def report(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok
    return emit


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    assert code == 0, err
    return out


def parse_rows(text):
    lines = [line for line in text.splitlines() if line and not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def comment(text, key):
    for line in text.splitlines():
        if line.startswith(f"# {key} = "):
            return line.split(" = ", 1)[1]
    raise KeyError(key)


@pytest.fixture(scope="module")
def default_sweep():
    start = time.perf_counter()
    grid = run_sweep(SweepSpec(metrics=("visibility", "violation")))
    return grid, time.perf_counter() - start


def test_criterion_1_ideal_sawtooth(capsys, report):
    start = time.perf_counter()
    out = run_cli(capsys, "correlation", "--decoherence", "0", "--threshold", "0", "--pairs", "10000")
    elapsed = time.perf_counter() - start
    rows = parse_rows(out)
    worst = 0.0
    for row in rows:
        n = int(row["n_total"])
        p = ideal_coincidence_probability(float(row["alpha_rad"]), 0.0)
        sigma = math.sqrt(n * p * (1 - p))
        dev = abs(int(row["n_pp"]) - n * p)
        worst = max(worst, dev / sigma if sigma > 0 else (math.inf if dev > 0 else 0.0))
    ok = len(rows) == 100 and worst <= 4.0 and elapsed < 5.0
    assert report("1 ideal sawtooth", ok, f"{len(rows)} settings, worst {worst:.2f} sigma, {elapsed:.2f} s")


def test_criterion_2_half_threshold_kill_switch(capsys, report):
    start = time.perf_counter()
    out = run_cli(capsys, "correlation", "--decoherence", "0.3", "--threshold", "0.5")
    elapsed = time.perf_counter() - start
    rows = parse_rows(out)
    all_lost = all(row["n_lost"] == row["n_total"] for row in rows)
    eff = comment(out, "efficiency")
    ok = all_lost and float(eff) == 0.0 and comment(out, "visibility") == "undef" and elapsed < 1.0
    assert report("2 threshold 0.5 kill switch", ok, f"all lost={all_lost}, efficiency {eff}, {elapsed:.2f} s")


def test_criterion_3_efficiency_anchor(report):
    start = time.perf_counter()
    cfg = ExperimentConfig(pairs_per_setting=1000, noise=NoiseConfig(0.0), threshold=0.1)
    total = correlation_scan(cfg).total()
    eff = efficiency(total)
    anchor_ok = total.n_total == 100_000 and abs(eff - 0.80) <= 0.03

    spec = SweepSpec(AxisSpec(0.0, 1.0, 6), AxisSpec(0.0, 0.5, 6), metrics=("efficiency",))
    grid = run_sweep(spec)
    n = spec.base_config.pairs_per_setting * len(spec.base_config.alphas())
    worst = 0.0
    for i, d in enumerate(grid.d_values):
        for j, t in enumerate(grid.t_values):
            p = oracle_efficiency(float(t), float(d))
            sigma = math.sqrt(max(p * (1 - p), 0.0) / n)
            dev = abs(float(grid["efficiency"][i, j]) - p)
            worst = max(worst, dev / sigma if sigma > 0 else (math.inf if dev > 1e-12 else 0.0))
    elapsed = time.perf_counter() - start
    subgrid_ok = worst <= 4.0

    report("3a efficiency anchor 0.80 +- 0.03", anchor_ok,
           f"efficiency {eff:.4f} over {total.n_total} pairs (exact {(1 - 2 / PI * math.asin(0.2)) ** 2:.4f})")
    report("3b MC vs oracle efficiency on 6x6 subgrid", subgrid_ok and elapsed < 30.0,
           f"worst {worst:.2f} sigma, {elapsed:.2f} s")
    assert subgrid_ok and elapsed < 30.0
    assert anchor_ok, f"efficiency {eff:.4f} outside 0.80 +- 0.03"


def test_criterion_4_visibility_anchor(report):
    start = time.perf_counter()
    cfg = ExperimentConfig(noise=NoiseConfig(0.2), threshold=0.13)
    # labels of cell (10, 13) in the default 51x51 sweep
    vis = visibility(correlation_scan(cfg, prefix=(0, 10, 13)))
    elapsed = time.perf_counter() - start
    ok = vis >= 0.93 and elapsed < 10.0
    assert report("4 visibility anchor at d=0.20, ds=0.13", ok, f"visibility {vis:.4f}, {elapsed:.2f} s")


def test_criterion_5_visibility_coverage(default_sweep, report):
    grid, elapsed = default_sweep
    frac = fraction_above(grid, "visibility", 0.99)
    ok = abs(frac - 0.25) <= 0.08 and elapsed < 600.0
    assert report("5 visibility > 0.99 coverage", ok, f"fraction {frac:.4f} of 51x51 cells, sweep {elapsed:.1f} s")


def test_criterion_6_chsh_boundary_and_limits(report):
    start = time.perf_counter()
    ideal = chsh(ExperimentConfig(noise=NoiseConfig(0.0), threshold=0.0))
    decoh = chsh(ExperimentConfig(noise=NoiseConfig(1.0), threshold=0.0))
    o_ideal = oracle_chsh(0.0, 0.0).s_value
    o_decoh = oracle_chsh(0.0, 1.0).s_value
    elapsed = time.perf_counter() - start
    ok = (abs(ideal.s_value - 2.0) <= 0.06 and abs(decoh.s_value) <= 0.1
          and abs(o_ideal - 2.0) <= 1e-3 and abs(o_decoh) <= 1e-3 and elapsed < 10.0)
    assert report("6 CHSH boundary and limits", ok,
                  f"MC S={ideal.s_value:.4f} / {decoh.s_value:.4f}, oracle S={o_ideal:.6f} / {o_decoh:.6f}, "
                  f"{elapsed:.2f} s")


def test_criterion_7_violation_range(default_sweep, report):
    grid, sweep_time = default_sweep
    start = time.perf_counter()
    cols = grid.t_values > 0.2
    vmax = float(grid["violation"][:, cols].max())
    ds = np.linspace(0.05, 1.0, 6)
    probe = [oracle_chsh(0.25, float(d)).violation for d in ds]
    monotone = all(b <= a + 1e-12 for a, b in zip(probe, probe[1:]))
    elapsed = sweep_time + time.perf_counter() - start
    ok = vmax > 1.5 and monotone and elapsed < 300.0
    assert report("7 violation range", ok,
                  f"max violation {vmax:.4f} for ds > 0.2, oracle probe {np.round(probe, 4).tolist()}, "
                  f"{elapsed:.1f} s")


def test_criterion_8_thread_determinism(tmp_path, capsys, report):
    start = time.perf_counter()
    outputs = {}
    for threads in (1, 2, 8):
        out = tmp_path / f"t{threads}.csv"
        run_cli(capsys, "sweep", "--seed", "11", "--metric", "efficiency,visibility,violation", "--pairs", "400",
                "--d-steps", "6", "--t-steps", "6", "--threads", str(threads), "--out", str(out))
        outputs[threads] = [
            [line for line in (tmp_path / f"t{threads}_{m}.csv").read_text().splitlines() if not line.startswith("#")]
            for m in ("efficiency", "visibility", "violation")
        ]
    elapsed = time.perf_counter() - start
    same = outputs[1] == outputs[2] == outputs[8]
    ok = same and elapsed < 60.0
    assert report("8 thread determinism", ok, f"1/2/8 threads identical={same}, {elapsed:.2f} s")


def test_criterion_9_oracle_self_consistency(report):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_sum = worst_shift = 0.0
    for _ in range(50):
        alpha, beta = rng.uniform(0, 2 * PI, 2)
        t, d, shift = rng.uniform(0, 0.5), rng.uniform(0, 1), rng.uniform(-10, 10)
        p = class_probabilities(alpha, beta, t, d)
        q = class_probabilities(alpha + shift, beta + shift, t, d)
        worst_sum = max(worst_sum, abs(sum(p.values()) - 1.0))
        worst_shift = max(worst_shift, max(abs(p[c] - q[c]) for c in CLASSES))
    elapsed = time.perf_counter() - start
    ok = worst_sum <= 1e-4 and worst_shift <= 1e-6 and elapsed < 30.0
    assert report("9 oracle self-consistency", ok,
                  f"max |sum-1| {worst_sum:.2e}, max shift change {worst_shift:.2e}, {elapsed:.2f} s")
