"""Release battery: fixture registries and the checks run over them.

Each battery function exercises one family of inequalities on a frozen
fixture set and returns a report with the worst observed slack, where
slack is how far the measured side sits below its bound (negative means
a violation).  The smoke preset shrinks trial counts so a fresh checkout
can be vetted in under a minute; bounds and tolerances never change
between presets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import cqcover, decouple, qcover
from .channels import (
    CQEnsemble,
    QuantumChannel,
    depolarizing_channel,
    identity_channel,
    random_channel,
)
from .entropic import (
    aep_rate,
    classical_relative_entropy,
    h_min,
    h_min_bloch_grid,
    relative_entropy,
)
from .errors import NumericalError
from .linalg import (
    LN2,
    LOG2E,
    BipartiteState,
    as_rng,
    derive_seed,
    haar_unitary,
    random_density,
    trace_norm,
)

SLACK_TOL = -1e-8


@dataclass(frozen=True)
class CriterionReport:
    name: str
    passed: bool
    worst_slack: float
    detail: str
    rows: tuple = ()


@dataclass(frozen=True)
class SuiteReport:
    preset: str
    passed: bool
    reports: tuple

    def summary_lines(self) -> list:
        lines = [f"suite preset={self.preset}: {'PASS' if self.passed else 'FAIL'}"]
        for r in self.reports:
            status = "PASS" if r.passed else "FAIL"
            lines.append(
                f"  {r.name}: {status} worst_slack={r.worst_slack:.3e} {r.detail}"
            )
        return lines


# ---------------------------------------------------------------------------
# fixture registries


@dataclass(frozen=True)
class CoverSpec:
    instance_id: str
    dim: int
    kind: str
    theta: int
    seed: int


def quantum_cover_registry() -> tuple:
    """Twenty covering fixtures.

    Every dimension in {2, 4, 6} appears with every channel family, and
    every divisor of each dimension appears as a code size with at least
    one channel.  Identity and depolarizing fixtures use the maximally
    mixed input so their closed-form anchors apply; random-channel
    fixtures draw a full-rank seeded input.
    """
    table = (
        (2, "identity", 1),
        (2, "identity", 2),
        (2, "depolarizing", 1),
        (2, "depolarizing", 2),
        (2, "random-2k", 1),
        (2, "random-2k", 2),
        (4, "identity", 1),
        (4, "identity", 4),
        (4, "depolarizing", 2),
        (4, "depolarizing", 4),
        (4, "random-3k", 1),
        (4, "random-3k", 2),
        (4, "random-3k", 4),
        (6, "identity", 2),
        (6, "identity", 6),
        (6, "depolarizing", 1),
        (6, "depolarizing", 3),
        (6, "random-2k", 3),
        (6, "random-2k", 6),
        (6, "random-3k", 1),
    )
    return tuple(
        CoverSpec(f"qc-{k + 1:02d}", d, kind, theta, 1000 + k)
        for k, (d, kind, theta) in enumerate(table)
    )


def build_cover_instance(spec: CoverSpec):
    if spec.kind == "identity":
        channel = identity_channel(spec.dim)
        rho = np.eye(spec.dim, dtype=complex) / spec.dim
    elif spec.kind == "depolarizing":
        channel = depolarizing_channel(spec.dim)
        rho = np.eye(spec.dim, dtype=complex) / spec.dim
    elif spec.kind in ("random-2k", "random-3k"):
        n_kraus = 2 if spec.kind == "random-2k" else 3
        channel = random_channel(spec.dim, spec.dim, n_kraus, seed=spec.seed)
        rho = random_density(spec.dim, spec.dim, seed=derive_seed(spec.seed, 1)).matrix
    else:
        raise ValueError(f"unknown channel kind {spec.kind!r}")
    return qcover.build_instance(rho, channel)


@dataclass(frozen=True)
class DecoupleSpec:
    instance_id: str
    d_a: int
    d_b: int
    d_e: int
    kind: str
    seed: int


def decouple_registry() -> tuple:
    """Ten decoupling fixtures with input dimension up to six.

    The first is the identity-channel pure-product anchor whose trial
    divergence is the constant 1."""
    table = (
        (2, 2, 2, "anchor"),
        (2, 2, 2, "depolarizing"),
        (2, 2, 2, "random-2k"),
        (3, 3, 2, "identity"),
        (3, 2, 2, "random-2k"),
        (4, 4, 2, "depolarizing"),
        (4, 3, 2, "random-2k"),
        (4, 2, 3, "random-3k"),
        (6, 3, 2, "random-2k"),
        (6, 6, 2, "depolarizing"),
    )
    return tuple(
        DecoupleSpec(f"dc-{k + 1:02d}", d_a, d_b, d_e, kind, 2000 + k)
        for k, (d_a, d_b, d_e, kind) in enumerate(table)
    )


def build_decouple_instance(spec: DecoupleSpec):
    if spec.kind == "anchor":
        rho_a = np.diag([1.0, 0.0]).astype(complex)
        rho_e = random_density(spec.d_e, spec.d_e, seed=spec.seed).matrix
        return decouple.build_instance(np.kron(rho_a, rho_e), identity_channel(2))
    if spec.kind == "identity":
        channel = identity_channel(spec.d_a)
    elif spec.kind == "depolarizing":
        channel = depolarizing_channel(spec.d_a)
    elif spec.kind in ("random-2k", "random-3k"):
        n_kraus = 2 if spec.kind == "random-2k" else 3
        channel = random_channel(spec.d_a, spec.d_b, n_kraus, seed=spec.seed)
    else:
        raise ValueError(f"unknown channel kind {spec.kind!r}")
    rho = random_density(spec.d_a * spec.d_e, spec.d_a * spec.d_e, seed=derive_seed(spec.seed, 1))
    state = BipartiteState(rho.matrix, (spec.d_a, spec.d_e))
    return decouple.build_instance(state, channel)


def _trine_states():
    out = []
    for k in range(3):
        angle = 2.0 * math.pi * k / 3.0
        v = np.array([math.cos(angle / 2.0), math.sin(angle / 2.0)], dtype=complex)
        out.append(np.outer(v, v.conj()))
    return tuple(out)


def cq_registry() -> tuple:
    """Named ensembles with at most three symbols on at most three levels."""
    rng = as_rng(3000)
    plus = np.full((2, 2), 0.5, dtype=complex)
    entries = [
        ("cq-binary-orthogonal", CQEnsemble(
            ("0", "1"),
            np.array([0.5, 0.5]),
            (np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)),
        )),
        ("cq-binary-tilted", CQEnsemble(
            ("0", "+"),
            np.array([0.5, 0.5]),
            (np.diag([1.0, 0.0]).astype(complex), plus),
        )),
        ("cq-qubit-trine", CQEnsemble(
            ("a", "b", "c"), np.full(3, 1.0 / 3.0), _trine_states()
        )),
        ("cq-singleton", CQEnsemble(
            ("x",), np.array([1.0]), (random_density(2, 2, seed=3001).matrix,)
        )),
    ]
    pmf = rng.dirichlet(np.ones(3))
    entries.append(("cq-qutrit-random", CQEnsemble(
        tuple("pqr"),
        pmf / pmf.sum(),
        tuple(random_density(3, 3, seed=3002 + k).matrix for k in range(3)),
    )))
    pmf = rng.dirichlet(np.ones(2))
    entries.append(("cq-qubit-mixed", CQEnsemble(
        ("u", "v"),
        pmf / pmf.sum(),
        tuple(random_density(2, 2, seed=3010 + k).matrix for k in range(2)),
    )))
    entries.append(("cq-qutrit-flat-ranks", CQEnsemble(
        ("f", "g"),
        np.array([0.5, 0.5]),
        tuple(random_density(3, 2, seed=3020 + k).matrix for k in range(2)),
    )))
    return tuple(entries)


def classical_registry(count: int = 50) -> tuple:
    """Seeded classical channels spanning input sizes two to four."""
    out = []
    for k in range(count):
        rng = as_rng(derive_seed(4000, k))
        n_in = int(rng.integers(2, 5))
        n_out = int(rng.integers(2, 5))
        w = rng.dirichlet(np.ones(n_out), size=n_in)
        q = rng.dirichlet(np.ones(n_in))
        theta = int(rng.integers(1, 4))
        out.append((f"cl-{k + 1:02d}", w, q / q.sum(), theta))
    return tuple(out)


# ---------------------------------------------------------------------------
# battery runners


def lemma_battery(per_lemma: int = 500, tolerance: float = SLACK_TOL) -> CriterionReport:
    """Audit every registered inequality on seeded instances."""
    from .lemmas import LEMMA_IDS, lemma_audit

    worst = math.inf
    worst_at = ""
    rows = []
    for lemma_id in LEMMA_IDS:
        lemma_worst = math.inf
        lemma_seed = -1
        for seed in range(per_lemma):
            rec = lemma_audit(lemma_id, seed)
            if rec.slack < lemma_worst:
                lemma_worst = rec.slack
                lemma_seed = seed
        rows.append({"lemma_id": lemma_id, "audits": per_lemma,
                     "worst_slack": lemma_worst, "worst_seed": lemma_seed})
        if lemma_worst < worst:
            worst = lemma_worst
            worst_at = f"{lemma_id} at seed {lemma_seed}"
    passed = worst >= tolerance
    detail = f"worst at {worst_at}" if worst_at else ""
    if not passed:
        detail = f"violation in {worst_at}: slack {worst:.3e} < {tolerance:.3e}"
    return CriterionReport("lemma-audits", passed, worst, detail, tuple(rows))


def covering_battery(trials: int = 500, master_seed: int = 2026) -> CriterionReport:
    """Monte Carlo mean against the collision bound on all covering fixtures."""
    worst = math.inf
    worst_at = ""
    anchors_ok = True
    detail_bits = []
    rows = []
    for idx, spec in enumerate(quantum_cover_registry()):
        inst = build_cover_instance(spec)
        seed = derive_seed(master_seed, idx)
        mean, se = qcover.mc_expectation(inst, spec.theta, trials, seed)
        bound = qcover.expected_divergence_bound(inst, spec.theta)
        slack = bound + 3.0 * se - mean
        rows.append({"instance_id": spec.instance_id, "D": spec.dim,
                     "theta": spec.theta, "mean": mean, "stderr": se,
                     "bound": bound, "slack": slack, "seed": seed})
        if slack < worst:
            worst = slack
            worst_at = f"{spec.instance_id} (seed {seed})"
        if spec.kind == "identity":
            q2 = qcover.q2_target(inst)
            if abs(q2 - spec.dim) > 1e-9:
                anchors_ok = False
                detail_bits.append(f"{spec.instance_id}: q2 {q2!r} != {spec.dim}")
        if spec.kind == "depolarizing" and abs(mean) > 1e-10:
            anchors_ok = False
            detail_bits.append(f"{spec.instance_id}: mean {mean!r} not 0")
    passed = worst >= SLACK_TOL and anchors_ok
    detail = f"worst at {worst_at}" + ("; " + "; ".join(detail_bits) if detail_bits else "")
    return CriterionReport("quantum-covering-bound", passed, worst, detail, tuple(rows))


def block_battery(draws: int = 3, master_seed: int = 2027) -> CriterionReport:
    """Per-draw decomposition identity, code-size rank cap, and block pick."""
    worst = math.inf
    worst_at = ""
    max_residual = 0.0
    rows = []
    for idx, spec in enumerate(quantum_cover_registry()):
        inst = build_cover_instance(spec)
        m_count = spec.dim // spec.theta
        for k in range(draws):
            seed = derive_seed(master_seed, idx * draws + k)
            code = qcover.sample_block_code(spec.dim, spec.theta, seed)
            out = qcover.simulate(inst, code)
            per_block = math.fsum(
                w * relative_entropy(s, inst.rho_b.matrix).value
                for w, s in zip(out.block_weights, out.block_states)
                if w > 0.0
            )
            label = classical_relative_entropy(
                np.asarray(out.block_weights), np.full(m_count, 1.0 / m_count)
            ).value
            residual = abs(out.d_value - (per_block + label))
            max_residual = max(max_residual, residual)
            block, pick = qcover.extract_block(out)
            block_gap = out.d_value - relative_entropy(
                block.matrix, inst.rho_b.matrix
            ).value
            slack = min(1e-8 - residual, block_gap)
            rows.append({"instance_id": spec.instance_id, "draw": k,
                         "residual": residual, "picked_block": pick,
                         "block_gap": block_gap, "seed": seed})
            if slack < worst:
                worst = slack
                worst_at = f"{spec.instance_id} draw {k} (seed {seed})"
    passed = worst >= SLACK_TOL
    return CriterionReport(
        "block-decomposition", passed, worst,
        f"worst at {worst_at}; max chain residual {max_residual:.3e}", tuple(rows),
    )


def cq_battery(theta_max: int = 5) -> CriterionReport:
    """Exact enumeration against the collision bound on every ensemble."""
    worst = math.inf
    worst_at = ""
    anchors_ok = True
    detail_bits = []
    rows = []
    for name, ens in cq_registry():
        for theta in range(1, theta_max + 1):
            exact = cqcover.exact_expectation(ens, theta)
            bound = cqcover.expected_divergence_bound(ens, theta)
            slack = bound - exact
            rows.append({"ensemble_id": name, "theta": theta, "mode": "exact",
                         "E_D": exact, "bound": bound, "slack": slack, "seed": -1})
            if slack < worst:
                worst = slack
                worst_at = f"{name} theta={theta}"
            if name == "cq-binary-orthogonal" and theta in (1, 2):
                want = 1.0 if theta == 1 else 0.5
                if abs(exact - want) > 1e-12:
                    anchors_ok = False
                    detail_bits.append(f"{name} theta={theta}: {exact!r} != {want}")
    passed = worst >= SLACK_TOL and anchors_ok
    detail = f"worst at {worst_at}" + ("; " + "; ".join(detail_bits) if detail_bits else "")
    return CriterionReport("cq-exact-bound", passed, worst, detail, tuple(rows))


def classical_battery(count: int = 50) -> CriterionReport:
    """Diagonal-embedding agreement and the collision bound, all classical."""
    worst = math.inf
    worst_at = ""
    broken = []
    rows = []
    for name, w, q, theta in classical_registry(count):
        try:
            e_d, bound = cqcover.classical_bound(w, q, theta)
        except NumericalError as exc:
            broken.append(f"{name}: {exc}")
            continue
        slack = bound - e_d
        rows.append({"ensemble_id": name, "theta": theta, "mode": "exact",
                     "E_D": e_d, "bound": bound, "slack": slack, "seed": -1})
        if slack < worst:
            worst = slack
            worst_at = name
    passed = worst >= SLACK_TOL and not broken
    detail = f"worst at {worst_at}" + ("; " + "; ".join(broken) if broken else "")
    return CriterionReport("classical-specialization", passed, worst, detail, tuple(rows))


def decoupling_battery(trials: int = 200, pinsker_draws: int = 5,
                       master_seed: int = 2028) -> CriterionReport:
    """Monte Carlo mean against the product bound, anchor, and Pinsker."""
    worst = math.inf
    worst_at = ""
    anchors_ok = True
    detail_bits = []
    rows = []
    for idx, spec in enumerate(decouple_registry()):
        inst = build_decouple_instance(spec)
        seed = derive_seed(master_seed, idx)
        mean, se = decouple.mc_expectation(inst, trials, seed)
        bound = decouple.q2_product_bound(inst)
        slack = bound + 3.0 * se - mean
        rows.append({"instance_id": spec.instance_id, "d_A": spec.d_a,
                     "d_B": spec.d_b, "d_E": spec.d_e, "mean": mean,
                     "stderr": se, "bound": bound, "slack": slack, "seed": seed})
        if slack < worst:
            worst = slack
            worst_at = f"{spec.instance_id} (seed {seed})"
        if spec.kind == "anchor":
            if abs(mean - 1.0) > 1e-9 or bound > 2.0 * LOG2E + 1e-9:
                anchors_ok = False
                detail_bits.append(f"{spec.instance_id}: mean {mean!r}, bound {bound!r}")
        for k in range(pinsker_draws):
            u = haar_unitary(spec.d_a, derive_seed(seed, trials + k))
            sigma, value = decouple.decouple_trial(inst, u)
            if math.isinf(value):
                continue
            gap = trace_norm(sigma.matrix - inst.rho_be_target.matrix)
            pinsker_slack = value - gap * gap / (2.0 * LN2)
            if pinsker_slack < worst:
                worst = pinsker_slack
                worst_at = f"{spec.instance_id} pinsker draw {k}"
    passed = worst >= SLACK_TOL and anchors_ok
    detail = f"worst at {worst_at}" + ("; " + "; ".join(detail_bits) if detail_bits else "")
    return CriterionReport("decoupling-bound", passed, worst, detail, tuple(rows))


def moment_battery(draws: int = 10_000, master_seed: int = 2029) -> CriterionReport:
    """Haar averages of the measured joint states and the two design moments."""
    detail_bits = []
    worst = math.inf
    rows = []

    cover_inst = qcover.build_instance(
        random_density(4, 4, seed=5001).matrix, random_channel(4, 3, 2, seed=5002)
    )
    mean, se = qcover.haar_mean_sigma_bm(cover_inst, 2, draws, derive_seed(master_seed, 0))
    target = np.kron(cover_inst.rho_b.matrix, np.eye(2, dtype=complex) / 2.0)
    dev_re = np.abs(mean.real - target.real) - (3.0 * se.real + 1e-9)
    dev_im = np.abs(mean.imag - target.imag) - (3.0 * se.imag + 1e-9)
    cover_worst = -float(max(dev_re.max(), dev_im.max()))
    worst = min(worst, cover_worst)
    rows.append({"check": "covering-joint-mean", "draws": draws, "slack": cover_worst})
    if cover_worst < 0:
        detail_bits.append("covering joint mean drifted beyond 3 SE")

    dec_inst = build_decouple_instance(
        DecoupleSpec("dc-moment", 4, 2, 2, "random-2k", 5003)
    )
    mean, se = decouple.haar_mean_sigma_be(dec_inst, draws, derive_seed(master_seed, 1))
    target = dec_inst.rho_be_target.matrix
    dev_re = np.abs(mean.real - target.real) - (3.0 * se.real + 1e-9)
    dev_im = np.abs(mean.imag - target.imag) - (3.0 * se.imag + 1e-9)
    dec_worst = -float(max(dev_re.max(), dev_im.max()))
    worst = min(worst, dec_worst)
    rows.append({"check": "decoupling-joint-mean", "draws": draws, "slack": dec_worst})
    if dec_worst < 0:
        detail_bits.append("decoupling joint mean drifted beyond 3 SE")

    alpha_hat, alpha_se, beta_hat, beta_se = qcover.haar_moment_estimates(
        4, 2, draws, derive_seed(master_seed, 2)
    )
    alpha, beta = qcover.haar_moment_formulas(4, 2)
    alpha_slack = 3.0 * alpha_se + 1e-9 - abs(alpha_hat - alpha)
    beta_slack = 3.0 * beta_se + 1e-9 - abs(beta_hat - beta)
    worst = min(worst, alpha_slack, beta_slack)
    rows.append({"check": "design-moments", "draws": draws,
                 "slack": min(alpha_slack, beta_slack)})
    if min(alpha_slack, beta_slack) < 0:
        detail_bits.append("design moment estimate off by more than 3 SE")

    passed = worst >= 0.0
    detail = "; ".join(detail_bits) if detail_bits else "all moments within 3 SE"
    return CriterionReport("haar-moments", passed, worst, detail, tuple(rows))


def min_entropy_battery(count: int = 50) -> CriterionReport:
    """Solver versus the qubit grid oracle and two closed forms."""
    worst = math.inf
    worst_at = ""
    rows = []
    for k in range(count):
        d_a = 2 if k % 2 == 0 else 3
        state = BipartiteState(
            random_density(d_a * 2, d_a * 2, seed=derive_seed(6000, k)).matrix,
            (d_a, 2),
        )
        sdp = h_min(state)
        grid = h_min_bloch_grid(state)
        slack = 1e-4 - abs(sdp - grid)
        rows.append({"check": f"grid-{k:02d}", "d_A": d_a, "sdp": sdp,
                     "oracle": grid, "slack": slack})
        if slack < worst:
            worst = slack
            worst_at = f"grid instance {k}"
    for d in (2, 3):
        vec = np.zeros(d * d, dtype=complex)
        vec[:: d + 1] = 1.0 / math.sqrt(d)
        state = BipartiteState(np.outer(vec, vec.conj()), (d, d))
        slack = 1e-6 - abs(h_min(state) - (-math.log2(d)))
        rows.append({"check": f"max-entangled-{d}", "d_A": d, "slack": slack})
        if slack < worst:
            worst = slack
            worst_at = f"maximally entangled d={d}"
    for k, d_a in enumerate((2, 3)):
        rho_a = random_density(d_a, d_a, seed=derive_seed(6100, k)).matrix
        rho_b = random_density(2, 2, seed=derive_seed(6200, k)).matrix
        state = BipartiteState(np.kron(rho_a, rho_b), (d_a, 2))
        want = -math.log2(float(np.linalg.eigvalsh(rho_a)[-1]))
        slack = 1e-6 - abs(h_min(state) - want)
        rows.append({"check": f"product-{d_a}", "d_A": d_a, "slack": slack})
        if slack < worst:
            worst = slack
            worst_at = f"product d_A={d_a}"
    passed = worst >= 0.0
    return CriterionReport(
        "min-entropy-solver", passed, worst, f"worst at {worst_at}", tuple(rows)
    )


def tensor_power_battery() -> CriterionReport:
    """Per-copy bound trend on the maximally mixed qubit and the rate anchor."""
    inst = qcover.build_instance(np.eye(2, dtype=complex) / 2.0, identity_channel(2))
    values = [qcover.per_copy_bound(inst, n) for n in (1, 2, 3)]
    # code sizes are ceil(2^{1.5 n}) = 3, 8, 23 for this fixture
    frozen = (2.0 * LOG2E / 3.0, LOG2E / 4.0, 8.0 * LOG2E / 69.0)
    worst = math.inf
    detail_bits = []
    for n, (got, want) in enumerate(zip(values, frozen), start=1):
        slack = 1e-9 - abs(got - want)
        worst = min(worst, slack)
        if slack < 0:
            detail_bits.append(f"n={n}: {got!r} != {want!r}")
    trend = min(values[0] - values[1], values[1] - values[2])
    worst = min(worst, trend)
    if trend < 0:
        detail_bits.append("per-copy bound increased with n")

    sigma = random_density(2, 2, seed=7001).matrix
    rho = random_density(2, 2, seed=7002).matrix
    rate = aep_rate(sigma, rho, 5, math.sqrt(0.5))
    exact = relative_entropy(sigma, rho).value
    if rate != exact:
        detail_bits.append(f"rate anchor {rate!r} != divergence {exact!r}")
        worst = min(worst, -abs(rate - exact))
    rows = tuple({"n": n, "bound": v} for n, v in enumerate(values, start=1))
    passed = worst >= 0.0 and not detail_bits
    detail = "; ".join(detail_bits) if detail_bits else "trend and rate anchor exact"
    return CriterionReport("tensor-power-trend", passed, worst, detail, rows)


# ---------------------------------------------------------------------------
# suite orchestration


def run_suite(preset: str, lemma_tolerance: float = SLACK_TOL) -> SuiteReport:
    """Run every battery at the preset's sizes and aggregate the verdicts."""
    if preset == "smoke":
        sizes = dict(per_lemma=40, cover_trials=60, block_draws=1, classical=12,
                     decouple_trials=60, moment_draws=600, min_entropy=6)
    elif preset == "full":
        sizes = dict(per_lemma=500, cover_trials=500, block_draws=3, classical=50,
                     decouple_trials=200, moment_draws=10_000, min_entropy=50)
    else:
        raise ValueError(f"preset must be 'smoke' or 'full', got {preset!r}")
    reports = (
        lemma_battery(sizes["per_lemma"], tolerance=lemma_tolerance),
        covering_battery(sizes["cover_trials"]),
        block_battery(sizes["block_draws"]),
        cq_battery(),
        classical_battery(sizes["classical"]),
        decoupling_battery(sizes["decouple_trials"]),
        moment_battery(sizes["moment_draws"]),
        min_entropy_battery(sizes["min_entropy"]),
        tensor_power_battery(),
    )
    return SuiteReport(preset, all(r.passed for r in reports), reports)
