"""Command line front end: seeded experiment runs and release suites.

Every run writes one result file in which each measured quantity sits in
the same row as the bound it is checked against, and exits nonzero when
any inequality is violated beyond tolerance.  Output is a pure function
of (config, master_seed): reruns produce identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import cqcover, decouple, qcover, suites
from .channels import (
    QuantumChannel,
    _matrix_from_json,
    depolarizing_channel,
    ensemble_from_json,
    identity_channel,
    random_channel,
)
from .errors import (
    MalformedInputError,
    ResourceLimitError,
    SoftcoverError,
    UnknownNameError,
)
from .lemmas import LEMMA_IDS, lemma_audit
from .linalg import BipartiteState, derive_seed, haar_unitary, random_density

MODES = ("audit-lemmas", "cover-quantum", "cover-cq", "cover-classical", "decouple")
SLACK_TOL = suites.SLACK_TOL

# headers are part of the artifact contract and must not drift
AUDIT_COLUMNS = ("lemma_id", "instance_seed", "lhs", "rhs", "slack")
QUANTUM_COLUMNS = ("instance_id", "D", "theta", "M", "trial",
                   "d_value", "q2_target", "bound", "seed")
CQ_COLUMNS = ("ensemble_id", "theta", "mode", "E_D", "bound", "slack", "seed")
DECOUPLE_COLUMNS = ("instance_id", "d_A", "d_B", "d_E", "trial",
                    "d_value", "bound", "excluded_flag", "seed")


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    instance: dict | None = None
    theta: int = 1
    trials: int = 200
    epsilon: float | None = None
    eta: float | None = None
    master_seed: int = 0
    out: str = "results.csv"
    fmt: str = "csv"

    def __post_init__(self):
        if self.mode not in MODES:
            raise MalformedInputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.fmt not in ("csv", "json"):
            raise MalformedInputError(f"format must be csv or json, got {self.fmt!r}")
        if self.theta < 1:
            raise MalformedInputError(f"theta must be a positive integer, got {self.theta}")
        if self.trials < 2:
            raise MalformedInputError(f"trials must be at least 2, got {self.trials}")
        if self.master_seed < 0:
            raise MalformedInputError(f"master_seed must be a non-negative integer")
        if (self.epsilon is None) != (self.eta is None) and self.mode in (
            "cover-quantum", "cover-cq"
        ):
            raise MalformedInputError(
                "the smoothed covering terms need both epsilon and eta"
            )
        if self.epsilon is not None:
            hi = 1.0 / 16.0 if self.mode == "decouple" else 1.0 / 24.0
            if not 0.0 <= self.epsilon < hi:
                raise MalformedInputError(
                    f"epsilon must lie in [0, {hi:.6g}) for {self.mode}, got {self.epsilon}"
                )
        if self.eta is not None and not 0.0 < self.eta < 1.0 / 24.0:
            raise MalformedInputError(
                f"eta must lie in (0, 1/24), got {self.eta}"
            )


def load_instance_doc(spec: str) -> dict:
    """Parse an instance spec given inline or as a file path."""
    text = spec
    source = "inline config"
    if not spec.lstrip().startswith("{"):
        if not os.path.exists(spec):
            raise MalformedInputError(f"config file not found: {spec}")
        with open(spec, "r", encoding="utf-8") as fh:
            text = fh.read()
        source = spec
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInputError(
            f"{source}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise MalformedInputError(f"{source}: top level must be a JSON object")
    return doc


def _matrix_field(doc: dict, key: str) -> np.ndarray:
    try:
        return _matrix_from_json(doc[key])
    except (TypeError, ValueError, IndexError):
        raise MalformedInputError(
            f"field {key!r} must be a [real_rows, imag_rows] matrix pair"
        ) from None


def _channel_field(value, dim: int, master_seed: int) -> QuantumChannel:
    if value == "identity":
        return identity_channel(dim)
    if value == "depolarizing":
        return depolarizing_channel(dim)
    if isinstance(value, dict) and value.get("kind") == "random":
        return random_channel(
            dim,
            int(value.get("d_out", dim)),
            int(value.get("n_kraus", 2)),
            seed=int(value.get("seed", derive_seed(master_seed, 0xC))),
        )
    if isinstance(value, dict) and "kraus" in value:
        return QuantumChannel(tuple(_matrix_from_json(k) for k in value["kraus"]))
    raise MalformedInputError(
        "field 'channel' must be 'identity', 'depolarizing', "
        "{'kind': 'random', ...}, or {'kraus': [...]}"
    )


# ---------------------------------------------------------------------------
# per-mode runners: each returns (columns, rows, violations)


def _run_audit_lemmas(cfg: ExperimentConfig):
    rows = []
    violations = 0
    for i, lemma_id in enumerate(LEMMA_IDS):
        for k in range(cfg.trials):
            seed = derive_seed(cfg.master_seed, i * cfg.trials + k)
            rec = lemma_audit(lemma_id, seed)
            rows.append((lemma_id, seed, rec.lhs, rec.rhs, rec.slack))
            if rec.slack < SLACK_TOL:
                violations += 1
    return AUDIT_COLUMNS, rows, violations


def _mean_stderr(values) -> tuple:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def _run_cover_quantum(cfg: ExperimentConfig):
    doc = cfg.instance or {"dim": 2, "channel": "identity"}
    dim = int(doc.get("dim", 2))
    channel = _channel_field(doc.get("channel", "identity"), dim, cfg.master_seed)
    if "rho" in doc:
        rho = _matrix_field(doc, "rho")
    else:
        rho = np.eye(dim, dtype=complex) / dim
    if dim % cfg.theta:
        raise MalformedInputError(
            f"theta must divide the input dimension, got {cfg.theta} and {dim}"
        )
    inst = qcover.build_instance(rho, channel)
    q2 = qcover.q2_target(inst)
    bound = qcover.expected_divergence_bound(inst, cfg.theta)
    m_count = dim // cfg.theta
    rows = []
    d_values = []
    for k in range(cfg.trials):
        seed = derive_seed(cfg.master_seed, k)
        outcome = qcover.simulate(inst, qcover.sample_block_code(dim, cfg.theta, seed))
        d_values.append(outcome.d_value)
        rows.append(("cli-quantum", dim, cfg.theta, m_count, k,
                     outcome.d_value, q2, bound, seed))
    mean, se = _mean_stderr(d_values)
    violations = 1 if bound + 3.0 * se - mean < SLACK_TOL else 0
    if cfg.epsilon is not None:
        terms = qcover.theorem1_terms(inst, cfg.epsilon, cfg.eta)
        print(f"smoothed covering terms: log_theta_bound={terms.log_theta_bound:.6g} "
              f"delta_bound={terms.delta_bound:.6g}")
    return QUANTUM_COLUMNS, rows, violations


_CQ_ALIASES = {"binary_orthogonal": "cq-binary-orthogonal"}


def _resolve_ensemble(doc: dict):
    value = doc.get("ensemble", "binary_orthogonal")
    if isinstance(value, str):
        name = _CQ_ALIASES.get(value, value)
        for reg_name, ens in suites.cq_registry():
            if reg_name == name:
                return name, ens
        raise UnknownNameError(f"no fixture ensemble named {value!r}")
    if isinstance(value, dict):
        return "cli-ensemble", ensemble_from_json(json.dumps(value))
    raise MalformedInputError("field 'ensemble' must be a fixture name or an object")


def _run_cover_cq(cfg: ExperimentConfig):
    name, ens = _resolve_ensemble(cfg.instance or {})
    bound = cqcover.expected_divergence_bound(ens, cfg.theta)
    try:
        e_d = cqcover.exact_expectation(ens, cfg.theta)
        mode, slack, seed = "exact", bound - e_d, -1
    except ResourceLimitError:
        e_d, se = cqcover.mc_expectation(ens, cfg.theta, cfg.trials, cfg.master_seed)
        mode, slack, seed = "mc", bound + 3.0 * se - e_d, cfg.master_seed
    rows = [(name, cfg.theta, mode, e_d, bound, slack, seed)]
    violations = 1 if slack < SLACK_TOL else 0
    if cfg.epsilon is not None:
        terms = cqcover.theorem3_terms(ens, cfg.epsilon, cfg.eta)
        print(f"smoothed covering terms: log_theta_bound={terms.log_theta_bound:.6g} "
              f"delta_bound={terms.delta_bound:.6g}")
    return CQ_COLUMNS, rows, violations


def _run_cover_classical(cfg: ExperimentConfig):
    doc = cfg.instance or {
        "w": [[0.89, 0.11], [0.11, 0.89]],
        "q": [0.5, 0.5],
    }
    if "w" not in doc or "q" not in doc:
        raise MalformedInputError("classical config needs fields 'w' and 'q'")
    w = np.asarray(doc["w"], dtype=float)
    q = np.asarray(doc["q"], dtype=float)
    e_d, bound = cqcover.classical_bound(
        w, q, cfg.theta, trials=cfg.trials, seed=cfg.master_seed
    )
    exact = q.size**cfg.theta <= cqcover.ENUMERATION_GUARD
    mode = "exact" if exact else "mc"
    seed = -1 if exact else cfg.master_seed
    rows = [("cli-classical", cfg.theta, mode, e_d, bound, bound - e_d, seed)]
    violations = 1 if bound - e_d < SLACK_TOL else 0
    return CQ_COLUMNS, rows, violations


def _run_decouple(cfg: ExperimentConfig):
    doc = cfg.instance or {"d_a": 2, "d_e": 2, "channel": "depolarizing"}
    d_a = int(doc.get("d_a", 2))
    d_e = int(doc.get("d_e", 2))
    channel = _channel_field(doc.get("channel", "depolarizing"), d_a, cfg.master_seed)
    if "rho" in doc:
        rho = _matrix_field(doc, "rho")
    else:
        rho = random_density(d_a * d_e, d_a * d_e,
                             derive_seed(cfg.master_seed, 0xA)).matrix
    inst = decouple.build_instance(BipartiteState(rho, (d_a, d_e)), channel)
    bound = decouple.q2_product_bound(inst)
    d_b = inst.dims[1]
    rows = []
    finite = []
    excluded = 0
    for k in range(cfg.trials):
        seed = derive_seed(cfg.master_seed, k)
        _, value = decouple.decouple_trial(inst, haar_unitary(d_a, seed))
        flag = 1 if math.isinf(value) else 0
        excluded += flag
        if not flag:
            finite.append(value)
        rows.append(("cli-decouple", d_a, d_b, d_e, k, value, bound, flag, seed))
    if not finite:
        raise SoftcoverError("every trial leaked outside the target support")
    if excluded > decouple.EXCLUSION_LIMIT * cfg.trials:
        raise SoftcoverError(
            f"{excluded} of {cfg.trials} trials leaked support; the average is invalid"
        )
    mean, se = _mean_stderr(finite)
    violations = 1 if bound + 3.0 * se - mean < SLACK_TOL else 0
    if cfg.epsilon is not None:
        print(f"smoothed decoupling bound: {decouple.theorem5_terms(inst, cfg.epsilon):.6g}")
    return DECOUPLE_COLUMNS, rows, violations


_RUNNERS = {
    "audit-lemmas": _run_audit_lemmas,
    "cover-quantum": _run_cover_quantum,
    "cover-cq": _run_cover_cq,
    "cover-classical": _run_cover_classical,
    "decouple": _run_decouple,
}


# ---------------------------------------------------------------------------
# serialization: identical bytes for identical runs


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: str, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _json_scalar(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f) or math.isinf(f):
            return "null"
        return format(f, ".17g")
    return json.dumps(v)


def render_json(mode: str, master_seed: int, columns, rows, violations: int) -> str:
    # built by hand so floats keep 17 significant digits round-trip
    lines = ["{",
             f'  "mode": {json.dumps(mode)},',
             f'  "master_seed": {master_seed},',
             f'  "columns": [{", ".join(json.dumps(c) for c in columns)}],',
             '  "rows": [']
    for i, row in enumerate(rows):
        comma = "," if i + 1 < len(rows) else ""
        lines.append(f'    [{", ".join(_json_scalar(v) for v in row)}]{comma}')
    lines.append("  ],")
    lines.append(f'  "violations": {violations}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_result(cfg: ExperimentConfig, columns, rows, violations: int) -> None:
    if cfg.fmt == "csv":
        write_csv(cfg.out, columns, rows)
    else:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_json(cfg.mode, cfg.master_seed, columns, rows, violations))


def run(config: ExperimentConfig) -> int:
    """Execute one experiment, write its result file, report the verdict."""
    columns, rows, violations = _RUNNERS[config.mode](config)
    write_result(config, columns, rows, violations)
    print(f"{config.mode}: {len(rows)} rows, {violations} violations -> {config.out}")
    return 1 if violations else 0


def suite(preset: str, lemma_tolerance: float = SLACK_TOL) -> suites.SuiteReport:
    """Run the named release battery and return its aggregated report."""
    return suites.run_suite(preset, lemma_tolerance=lemma_tolerance)


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softcover",
        description="Randomized covering and decoupling experiments with "
                    "certified bounds in every output row.",
    )
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--mode", choices=MODES, help="experiment to run")
    group.add_argument("--suite", choices=("smoke", "full"),
                       help="run a release battery instead of one experiment")
    parser.add_argument("--config", help="instance spec: inline JSON or a file path")
    parser.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    parser.add_argument("--trials", type=int, default=200,
                        help="Monte Carlo trials, or audits per lemma (default 200)")
    parser.add_argument("--theta", type=int, default=1,
                        help="code size per draw (default 1)")
    parser.add_argument("--epsilon", type=float, default=None,
                        help="smoothing radius for the one-shot terms")
    parser.add_argument("--eta", type=float, default=None,
                        help="tail weight for the one-shot covering terms")
    parser.add_argument("--out", default=None,
                        help="result path (default results.csv / results.json)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        dest="fmt", help="result file format (default csv)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.suite:
            report = suite(args.suite)
            for line in report.summary_lines():
                print(line)
            if args.out:
                with open(args.out, "w", encoding="utf-8", newline="") as fh:
                    fh.write("\n".join(report.summary_lines()) + "\n")
            return 0 if report.passed else 1
        instance = load_instance_doc(args.config) if args.config else None
        cfg = ExperimentConfig(
            mode=args.mode,
            instance=instance,
            theta=args.theta,
            trials=args.trials,
            epsilon=args.epsilon,
            eta=args.eta,
            master_seed=args.seed,
            out=args.out or f"results.{args.fmt}",
            fmt=args.fmt,
        )
        return run(cfg)
    except SoftcoverError as exc:
        # KeyError subclasses repr-quote their str(); show the message itself
        message = exc.args[0] if exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
