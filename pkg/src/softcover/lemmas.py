"""Seeded audits for the toolkit's catalog of inequalities.

Each audit draws one random instance satisfying the hypotheses of the
named inequality, evaluates both sides numerically, and returns a record
with the slack ``rhs - lhs``.  A valid inequality never drives the slack
below roundoff, so large seeded sweeps double as regression checks on
the entropic layer.

The two integral bounds are evaluated by Gauss-Legendre quadrature with
400 nodes under the substitution t = u / (1 - u), which maps the
half-line onto the unit interval.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .channels import apply_matrix, random_channel
from .entropic import (
    min_dmax_over_marginal,
    minus_xlog2x,
    purified_distance,
    q2_tilde,
    relative_entropy,
    renyi_divergence,
    shannon_entropy,
    smooth_bound,
    von_neumann_entropy,
)
from .errors import NumericalError, UnknownNameError
from .linalg import (
    LN2,
    LOG2E,
    as_rng,
    derive_seed,
    eigh_sorted,
    haar_unitary,
    partial_trace,
    psd_log2,
    psd_power,
    random_density,
    random_hermitian,
    trace_norm,
)

LEMMA_IDS = (
    "pinsker",
    "purified_distance_trace_norm",
    "trace_norm_partial_trace",
    "trace_norm_channel",
    "continuity_relative_entropy",
    "quad_upper_bound",
    "dual_states",
    "dual_sub",
    "max_information_smoothing",
    "continuity_classical_entropy",
    "continuity_quantum_entropy",
    "integral_B1",
    "integral_B2",
)


@dataclass(frozen=True)
class LemmaAuditRecord:
    lemma_id: str
    lhs: float
    rhs: float
    slack: float
    instance_seed: int


# Quadrature grid, shared by both integral audits.
_QUAD_X, _QUAD_RAW_W = np.polynomial.legendre.leggauss(400)
_QUAD_U = 0.5 * (_QUAD_X + 1.0)
_QUAD_T = _QUAD_U / (1.0 - _QUAD_U)
_QUAD_W = 0.5 * _QUAD_RAW_W / (1.0 - _QUAD_U) ** 2


def _resolvent_kernel(evals: np.ndarray) -> np.ndarray:
    """K[i, j] = integral of 1 / ((a_i + t)(a_j + t)) over t >= 0."""
    inv = 1.0 / (evals[:, None] + _QUAD_T[None, :])
    return (inv * _QUAD_W) @ inv.T


def _integral_resolvent_sandwich(rho: np.ndarray, delta: np.ndarray) -> np.ndarray:
    evals, vecs = eigh_sorted(rho)
    mid = vecs.conj().T @ delta @ vecs
    out = mid * _resolvent_kernel(evals)
    return vecs @ out @ vecs.conj().T


def _integral_quadratic_trace(rho: np.ndarray, delta: np.ndarray) -> float:
    evals, vecs = eigh_sorted(rho)
    mid = vecs.conj().T @ delta @ vecs
    return float(np.sum(np.abs(mid) ** 2 * _resolvent_kernel(evals)))


def _pick_dim(rng) -> int:
    return int(rng.integers(2, 7))


_SPLITS = ((2, 2), (2, 3), (3, 2))


def _pick_split(rng) -> tuple[int, int]:
    return _SPLITS[int(rng.integers(len(_SPLITS)))]


def _random_rank(rng, d: int) -> int:
    return int(rng.integers(1, d + 1))


def _spread_positive(rng, d: int, lo: float, hi: float) -> np.ndarray:
    """Full-rank positive matrix with eigenvalues drawn uniformly from [lo, hi]."""
    v = haar_unitary(d, rng)
    evals = rng.uniform(lo, hi, size=d)
    return (v * evals) @ v.conj().T


def _shrunk_hermitian(rng, rho: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Hermitian perturbation with operator norm in [lo, hi] times the
    smallest eigenvalue of rho, so rho + delta stays positive."""
    d = rho.shape[0]
    floor = float(eigh_sorted(rho)[0][0])
    h = random_hermitian(d, rng)
    hnorm = float(np.max(np.abs(np.linalg.eigvalsh(h))))
    return rng.uniform(lo, hi) * floor / hnorm * h


def _audit_pinsker(rng):
    d = _pick_dim(rng)
    sigma = random_density(d, _random_rank(rng, d), rng).matrix
    rho = float(rng.uniform(0.5, 1.0)) * random_density(d, d, rng).matrix
    lhs = trace_norm(sigma - rho) ** 2 / (2.0 * LN2)
    rhs = relative_entropy(sigma, rho).value
    return lhs, rhs


def _audit_purified_distance(rng):
    d = _pick_dim(rng)
    tau = float(rng.uniform(0.4, 1.0)) * random_density(d, _random_rank(rng, d), rng).matrix
    rho = float(rng.uniform(0.4, 1.0)) * random_density(d, _random_rank(rng, d), rng).matrix
    eps = purified_distance(tau, rho)
    return trace_norm(tau - rho), 2.0 * eps


def _audit_trace_norm_partial_trace(rng):
    d_a, d_b = _pick_split(rng)
    d = d_a * d_b
    rho = float(rng.uniform(0.3, 1.5)) * random_density(d, _random_rank(rng, d), rng).matrix
    sigma = float(rng.uniform(0.3, 1.5)) * random_density(d, _random_rank(rng, d), rng).matrix
    dims = (d_a, d_b)
    lhs = trace_norm(partial_trace(rho, dims, 0) - partial_trace(sigma, dims, 0))
    rhs = trace_norm(rho - sigma)
    return lhs, rhs


def _audit_trace_norm_channel(rng):
    d_in = int(rng.integers(2, 5))
    d_out = int(rng.integers(2, 5))
    # The dilation needs d_out * n_kraus >= d_in.
    n_lo = -(-d_in // d_out)
    ch = random_channel(d_in, d_out, int(rng.integers(n_lo, 4)), rng)
    rho = float(rng.uniform(0.3, 1.5)) * random_density(d_in, _random_rank(rng, d_in), rng).matrix
    sigma = float(rng.uniform(0.3, 1.5)) * random_density(d_in, _random_rank(rng, d_in), rng).matrix
    lhs = trace_norm(apply_matrix(ch, rho) - apply_matrix(ch, sigma))
    rhs = trace_norm(rho - sigma)
    return lhs, rhs


def _floored_member(rng, d: int) -> np.ndarray:
    """Random density with its in-support spectrum floored, so mixture
    weights stay well above the support cutoff of the divergence code."""
    raw = random_density(d, _random_rank(rng, d), rng).matrix
    evals, vecs = eigh_sorted(raw)
    keep = evals > 1e-12
    proj = (vecs[:, keep]) @ (vecs[:, keep]).conj().T
    r = int(np.count_nonzero(keep))
    return 0.98 * raw + 0.02 * proj / r


def _audit_continuity_relative_entropy(rng):
    d = _pick_dim(rng)
    k = int(rng.integers(2, 9))
    weights = 0.2 / k + 0.8 * rng.dirichlet(np.ones(k))
    members = [_floored_member(rng, d) for _ in range(k)]
    targets = [_spread_positive(rng, d, 0.1, 1.0) for _ in range(k)]
    targets = [t / np.real(np.trace(t)) for t in targets]
    mix = rng.uniform(0.02, 0.3, size=k)
    hatted = [(1.0 - t) * s + t * m for t, s, m in zip(mix, members, targets)]

    eps_sigma = sum(w * trace_norm(s - h) for w, s, h in zip(weights, members, hatted))
    if eps_sigma > 0.45:
        # Shrink every perturbation by a common factor; the expected
        # trace distance scales linearly with it.
        f = 0.45 / eps_sigma
        hatted = [s + f * (h - s) for s, h in zip(members, hatted)]
        eps_sigma = sum(w * trace_norm(s - h) for w, s, h in zip(weights, members, hatted))

    rho = sum(w * s for w, s in zip(weights, members))
    rho_hat = sum(w * h for w, h in zip(weights, hatted))
    eps_rho = trace_norm(rho - rho_hat)

    mean_d = sum(w * relative_entropy(s, rho).value for w, s in zip(weights, members))
    mean_d_hat = sum(w * relative_entropy(h, rho_hat).value for w, h in zip(weights, hatted))
    lhs = abs(mean_d - mean_d_hat)
    rhs = (eps_sigma + eps_rho) * math.log2(d) + minus_xlog2x(eps_sigma) + minus_xlog2x(eps_rho)
    return lhs, rhs


def _audit_quad_upper_bound(rng):
    d = _pick_dim(rng)
    rho = _spread_positive(rng, d, 0.15, 1.2)
    rho *= float(rng.uniform(0.3, 1.5)) / np.real(np.trace(rho))
    sigma = float(rng.uniform(0.3, 1.5)) * random_density(d, _random_rank(rng, d), rng).matrix
    lhs = relative_entropy(sigma, rho).value / LOG2E
    rhs = q2_tilde(sigma, rho) - float(np.real(np.trace(sigma)))
    return lhs, rhs


def _dual_instance(rng, trace_span=None):
    d_a, d_b = _pick_split(rng)
    d = d_a * d_b
    rho_ab = random_density(d, _random_rank(rng, d), rng).matrix
    if trace_span is not None:
        rho_ab = float(rng.uniform(*trace_span)) * rho_ab
    tau_a = _spread_positive(rng, d_a, 0.3, 1.5)
    rho_b = partial_trace(rho_ab, (d_a, d_b), 1)
    return rho_ab, (d_a, d_b), tau_a, np.kron(tau_a, rho_b)


def _audit_dual_states(rng):
    rho_ab, dims, tau_a, ref = _dual_instance(rng)
    lhs = renyi_divergence(rho_ab, ref, 2.0, variant="sandwiched").value
    rhs = min_dmax_over_marginal(rho_ab, dims, tau_a)
    return lhs, rhs


def _audit_dual_sub(rng):
    rho_ab, dims, tau_a, ref = _dual_instance(rng, trace_span=(0.3, 1.4))
    lhs = math.log2(q2_tilde(rho_ab, ref))
    rhs = min_dmax_over_marginal(rho_ab, dims, tau_a)
    return lhs, rhs


def _smooth_max_information_lower(rho: np.ndarray, dims, radius: float) -> float:
    """Certified lower bound on the smooth max-mutual information at the
    given smoothing radius.

    Jointly relaxes the minimization: the candidate ranges over the
    sub-normalized purified-distance ball (a fidelity LMI) and the
    conditioning marginal is freed from the candidate's own marginal.
    Both relaxations only lower the minimum, so the optimum never
    exceeds the smooth max-mutual information itself.
    """
    d_a, d_b = dims
    d = d_a * d_b
    rho_a = partial_trace(rho, dims, 0)
    zeta = cp.Variable((d_b, d_b), hermitian=True)
    root_fid = math.sqrt(max(1.0 - radius**2, 0.0))
    if root_fid >= 1.0:
        # Zero radius pins the candidate to rho itself; the fidelity
        # constraint would have no strict interior, so solve the
        # unsmoothed program directly.
        constraints = [
            zeta >> 0,
            cp.kron(cp.Constant(rho_a), zeta) - cp.Constant(rho) >> 0,
        ]
    else:
        cand = cp.Variable((d, d), hermitian=True)
        cross = cp.Variable((d, d), complex=True)
        constraints = [
            cand >> 0,
            zeta >> 0,
            cp.real(cp.trace(cand)) <= 1.0,
            cp.bmat([[cand, cross], [cross.H, cp.Constant(rho)]]) >> 0,
            cp.real(cp.trace(cross)) >= root_fid,
            cp.kron(cp.Constant(rho_a), zeta) - cand >> 0,
        ]
    problem = cp.Problem(cp.Minimize(cp.real(cp.trace(zeta))), constraints)
    attempts = []
    for solver, opts in (
        ("CLARABEL", {"tol_gap_abs": 1e-10, "tol_gap_rel": 1e-10}),
        ("CVXOPT", {"abstol": 1e-9}),
    ):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                problem.solve(solver=solver, **opts)
        except Exception as exc:
            attempts.append(f"{solver}: {exc}")
            continue
        if problem.status in ("optimal", "optimal_inaccurate") and problem.value is not None:
            return math.log2(max(float(problem.value), 1e-300))
        attempts.append(f"{solver}: status {problem.status}")
    raise NumericalError("smoothed max-information program failed: " + "; ".join(attempts))


def _audit_max_information_smoothing(rng):
    # Free parameter fixed to half the ball radius, matching how the
    # bound is consumed downstream.
    d_a, d_b = _pick_split(rng)
    d = d_a * d_b
    rho = random_density(d, d, rng).matrix
    eps = float(rng.uniform(0.05, 0.2))
    dims = (d_a, d_b)
    rho_a = partial_trace(rho, dims, 0)
    rho_b = partial_trace(rho, dims, 1)
    lhs = _smooth_max_information_lower(rho, dims, 2.0 * eps)
    cert = smooth_bound("d_max_eps", rho, np.kron(rho_a, rho_b), eps)
    rhs = cert.bound_value + math.log2(3.0 / eps**2)
    return lhs, rhs


def _audit_continuity_classical(rng):
    d = _pick_dim(rng)
    p = rng.uniform(0.0, 1.0, size=d)
    step = rng.uniform(-1.0, 1.0, size=d)
    step *= rng.uniform(0.05, 0.5) / np.sum(np.abs(step))
    q = np.clip(p + step, 0.0, 1.0)
    t = float(np.sum(np.abs(p - q)))
    lhs = abs(shannon_entropy(p) - shannon_entropy(q))
    rhs = t * math.log2(d) + minus_xlog2x(t)
    return lhs, rhs


def _audit_continuity_quantum(rng):
    d = _pick_dim(rng)
    rho = float(rng.uniform(0.4, 1.0)) * random_density(d, _random_rank(rng, d), rng).matrix
    other = float(rng.uniform(0.4, 1.0)) * random_density(d, _random_rank(rng, d), rng).matrix
    gap = trace_norm(other - rho)
    scale = min(1.0, float(rng.uniform(0.02, 0.5)) / max(gap, 1e-12))
    sigma = rho + scale * (other - rho)
    t = trace_norm(sigma - rho)
    lhs = abs(von_neumann_entropy(rho) - von_neumann_entropy(sigma))
    rhs = t * math.log2(d) + minus_xlog2x(t)
    return lhs, rhs


def _audit_integral_b1(rng):
    d = _pick_dim(rng)
    rho = _spread_positive(rng, d, 0.2, 1.5)
    delta = _shrunk_hermitian(rng, rho, 0.1, 0.9)
    jump = psd_log2(rho + delta) - psd_log2(rho)
    integral = LOG2E * _integral_resolvent_sandwich(rho, delta)
    lhs = float(np.max(np.linalg.eigvalsh(jump - integral)))
    return lhs, 0.0


def _audit_integral_b2(rng):
    d = _pick_dim(rng)
    rho = _spread_positive(rng, d, 0.15, 1.6)
    delta = _shrunk_hermitian(rng, rho, 0.1, 0.999)
    lhs = _integral_quadratic_trace(rho, delta)
    inv_root = psd_power(rho, -0.5)
    rhs = float(np.real(np.trace(delta @ inv_root @ delta @ inv_root)))
    return lhs, rhs


_EVALUATORS = {
    "pinsker": _audit_pinsker,
    "purified_distance_trace_norm": _audit_purified_distance,
    "trace_norm_partial_trace": _audit_trace_norm_partial_trace,
    "trace_norm_channel": _audit_trace_norm_channel,
    "continuity_relative_entropy": _audit_continuity_relative_entropy,
    "quad_upper_bound": _audit_quad_upper_bound,
    "dual_states": _audit_dual_states,
    "dual_sub": _audit_dual_sub,
    "max_information_smoothing": _audit_max_information_smoothing,
    "continuity_classical_entropy": _audit_continuity_classical,
    "continuity_quantum_entropy": _audit_continuity_quantum,
    "integral_B1": _audit_integral_b1,
    "integral_B2": _audit_integral_b2,
}

assert tuple(_EVALUATORS) == LEMMA_IDS


def lemma_audit(lemma_id: str, instance_seed: int) -> LemmaAuditRecord:
    """Audit one seeded instance of the named inequality.

    The per-instance generator is derived from both the seed and the
    lemma's registry position, so audits of different lemmas under the
    same seed see independent draws.
    """
    try:
        evaluate = _EVALUATORS[lemma_id]
    except KeyError:
        raise UnknownNameError(
            f"unknown lemma id {lemma_id!r}; known ids: {', '.join(LEMMA_IDS)}"
        ) from None
    rng = as_rng(derive_seed(int(instance_seed), LEMMA_IDS.index(lemma_id)))
    lhs, rhs = evaluate(rng)
    lhs = float(lhs)
    rhs = float(rhs)
    return LemmaAuditRecord(
        lemma_id=lemma_id,
        lhs=lhs,
        rhs=rhs,
        slack=rhs - lhs,
        instance_seed=int(instance_seed),
    )
