"""Release acceptance: the nine full-size criteria, one verdict line each.

Run `pytest tests/test_acceptance.py -v -s` to watch the per-criterion
lines; each test asserts its stated tolerance and, where one applies,
its wall-clock budget.
"""

import time

from softcover import suites
from softcover.linalg import LOG2E


def verdict(name: str, passed: bool, started: float) -> float:
    elapsed = time.monotonic() - started
    print(f"[acceptance] {name}: {'PASS' if passed else 'FAIL'} ({elapsed:.1f}s)",
          flush=True)
    return elapsed


def test_lemma_audit_battery():
    t0 = time.monotonic()
    rep = suites.lemma_battery(per_lemma=500)
    elapsed = verdict("lemma-audits", rep.passed, t0)
    assert rep.worst_slack >= -1e-8, rep.detail
    assert rep.passed, rep.detail
    assert len(rep.rows) == 13
    assert all(row["audits"] == 500 for row in rep.rows)
    assert elapsed < 300.0


def test_covering_monte_carlo_bound():
    t0 = time.monotonic()
    rep = suites.covering_battery(trials=500)
    elapsed = verdict("quantum-covering-bound", rep.passed, t0)
    assert rep.passed, rep.detail
    assert len(rep.rows) == 20
    assert all(row["slack"] >= -1e-8 for row in rep.rows)
    assert elapsed < 600.0


def test_block_decomposition_identity():
    t0 = time.monotonic()
    rep = suites.block_battery(draws=3)
    verdict("block-decomposition", rep.passed, t0)
    assert rep.passed, rep.detail
    assert len(rep.rows) == 60
    assert all(row["residual"] <= 1e-8 for row in rep.rows)
    assert all(row["block_gap"] >= -1e-9 for row in rep.rows)


def test_cq_exact_bound():
    t0 = time.monotonic()
    rep = suites.cq_battery(theta_max=5)
    elapsed = verdict("cq-exact-bound", rep.passed, t0)
    assert rep.passed, rep.detail
    # enumeration is exact, so the inequality holds without a noise term
    assert rep.worst_slack >= 0.0, rep.detail
    anchors = {row["theta"]: row["E_D"] for row in rep.rows
               if row["ensemble_id"] == "cq-binary-orthogonal"}
    assert abs(anchors[1] - 1.0) < 1e-12
    assert abs(anchors[2] - 0.5) < 1e-12
    assert elapsed < 120.0


def test_classical_specialization():
    t0 = time.monotonic()
    rep = suites.classical_battery(count=50)
    verdict("classical-specialization", rep.passed, t0)
    assert rep.passed, rep.detail
    assert len(rep.rows) == 50
    assert all(row["mode"] == "exact" for row in rep.rows)
    assert all(row["slack"] >= -1e-8 for row in rep.rows)


def test_decoupling_bound():
    t0 = time.monotonic()
    rep = suites.decoupling_battery(trials=200)
    verdict("decoupling-bound", rep.passed, t0)
    assert rep.passed, rep.detail
    assert len(rep.rows) == 10
    assert all(row["slack"] >= -1e-8 for row in rep.rows)
    anchor = next(row for row in rep.rows if row["instance_id"] == "dc-01")
    assert abs(anchor["mean"] - 1.0) <= 1e-9
    assert anchor["bound"] <= 2.0 * LOG2E + 1e-9


def test_haar_moment_checks():
    t0 = time.monotonic()
    rep = suites.moment_battery(draws=10_000)
    verdict("haar-moments", rep.passed, t0)
    assert rep.passed, rep.detail
    assert {row["check"] for row in rep.rows} == {
        "covering-joint-mean", "decoupling-joint-mean", "design-moments"
    }
    assert all(row["draws"] == 10_000 for row in rep.rows)


def test_min_entropy_solver():
    t0 = time.monotonic()
    rep = suites.min_entropy_battery(count=50)
    verdict("min-entropy-solver", rep.passed, t0)
    assert rep.passed, rep.detail
    grid_rows = [row for row in rep.rows if row["check"].startswith("grid-")]
    assert len(grid_rows) == 50
    assert all(abs(row["sdp"] - row["oracle"]) <= 1e-4 for row in grid_rows)


def test_tensor_power_trend():
    t0 = time.monotonic()
    rep = suites.tensor_power_battery()
    verdict("tensor-power-trend", rep.passed, t0)
    assert rep.passed, rep.detail
    bounds = [row["bound"] for row in rep.rows]
    assert len(bounds) == 3
    assert bounds[0] >= bounds[1] >= bounds[2]
