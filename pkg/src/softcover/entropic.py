"""Entropies, divergences, distances, min-entropy solvers, and smoothing.

All logarithms are base 2; natural-log conversion constants are explicit.
Divergences follow the unnormalized convention: no 1/Tr[sigma] factor is
applied to relative entropy, while the Renyi families divide by Tr[sigma]
inside the logarithm.  Functions accept plain arrays or the operator types
from :mod:`softcover.linalg`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import (
    MalformedInputError,
    NumericalError,
    PreconditionError,
    SupportError,
    UnknownNameError,
)
from .linalg import (
    SUPPORT_LEAK_TOL,
    BipartiteState,
    DensityOperator,
    as_matrix,
    eigh_sorted,
    partial_trace,
    psd_log2,
    psd_power,
    support_cutoff,
    swap_bipartite,
)

__all__ = [
    "DivergenceResult",
    "SmoothingCertificate",
    "relative_entropy",
    "renyi_divergence",
    "q2_tilde",
    "d_max",
    "generalized_fidelity",
    "purified_distance",
    "von_neumann_entropy",
    "shannon_entropy",
    "minus_xlog2x",
    "classical_relative_entropy",
    "classical_renyi_divergence",
    "coherent_information",
    "holevo_information",
    "info_variance",
    "aep_rate",
    "h_min",
    "h_min_bloch_grid",
    "min_dmax_over_marginal",
    "smooth_bound",
]

SDP_GAP_TOL = 1e-7


@dataclass(frozen=True)
class DivergenceResult:
    """Value of a divergence plus the support verdict that certifies it.

    ``value`` is finite exactly when ``support_ok`` is True; an infinite
    divergence is tagged through the flag, never through a float sentinel
    that callers might mistake for data.  ``lhs_trace`` records Tr[sigma]
    of the first argument, needed by unnormalized-convention consumers.
    """

    value: float
    support_ok: bool
    lhs_trace: float


@dataclass(frozen=True)
class SmoothingCertificate:
    """A feasible smoothing candidate and the one-sided bound it certifies."""

    kind: str
    candidate: DensityOperator
    epsilon_used: float
    bound_value: float


# ---------------------------------------------------------------------------
# spectral bookkeeping


def _weights_in_basis(sigma: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Diagonal of sigma expressed in the given orthonormal eigenbasis."""
    return np.real(np.einsum("ij,jk,ki->i", vecs.conj().T, sigma, vecs))


def _support_split(sigma, rho):
    """Eigendata of both operators plus the sigma-mass outside supp(rho)."""
    s = as_matrix(sigma)
    r = as_matrix(rho)
    if s.shape != r.shape:
        raise MalformedInputError(f"shape mismatch {s.shape} vs {r.shape}")
    s_evals, s_vecs = eigh_sorted(s)
    r_evals, r_vecs = eigh_sorted(r)
    d = s.shape[0]
    r_cut = support_cutoff(d, float(r_evals[-1]))
    w = _weights_in_basis(s, r_vecs)
    leak = float(np.sum(w[r_evals <= r_cut]))
    tr_s = float(np.real(np.trace(s)))
    return s, r, (s_evals, s_vecs), (r_evals, r_vecs, r_cut), w, max(leak, 0.0), tr_s


def _leak_ok(leak: float, tr_s: float) -> bool:
    return leak <= SUPPORT_LEAK_TOL * max(tr_s, 1e-300)


# ---------------------------------------------------------------------------
# divergences


def relative_entropy(sigma, rho) -> DivergenceResult:
    """Tr[sigma (log2 sigma - log2 rho)] for positive operators.

    No 1/Tr[sigma] normalization is applied.  Returns a tagged infinity
    when sigma carries weight outside the support of rho.
    """
    s, _r, (s_evals, _), (r_evals, _, r_cut), w, leak, tr_s = _support_split(sigma, rho)
    if not _leak_ok(leak, tr_s):
        return DivergenceResult(math.inf, False, tr_s)
    d = s.shape[0]
    s_cut = support_cutoff(d, float(s_evals[-1]))
    pos = s_evals[s_evals > s_cut]
    t1 = float(np.sum(pos * np.log2(pos)))
    mask = r_evals > r_cut
    t2 = float(np.sum(w[mask] * np.log2(r_evals[mask])))
    return DivergenceResult(t1 - t2, True, tr_s)


def renyi_divergence(sigma, rho, alpha: float, variant: str = "sandwiched") -> DivergenceResult:
    """Order-alpha Renyi divergence, with Tr[sigma] normalized inside the log.

    Variants: 'petz' uses Tr[sigma^a rho^(1-a)]; 'sandwiched' uses the
    two-sided conjugation by rho^((1-a)/2a); 'classical' requires both
    inputs diagonal and evaluates the probability-vector formula.
    alpha = inf delegates to the max-divergence.
    """
    if math.isinf(alpha):
        return d_max(sigma, rho)
    if not (alpha > 0.0) or alpha == 1.0:
        raise PreconditionError(f"alpha must be positive and != 1, got {alpha}")
    s = as_matrix(sigma)
    r = as_matrix(rho)
    if s.shape != r.shape:
        raise MalformedInputError(f"shape mismatch {s.shape} vs {r.shape}")
    tr_s = float(np.real(np.trace(s)))

    if variant == "classical":
        for name, m in (("sigma", s), ("rho", r)):
            off = m - np.diag(np.diagonal(m))
            scale = max(float(np.max(np.abs(np.diagonal(m)))), 1e-300)
            if float(np.max(np.abs(off))) > 1e-10 * scale:
                raise PreconditionError(f"classical variant requires diagonal {name}")
        return classical_renyi_divergence(
            np.real(np.diagonal(s)), np.real(np.diagonal(r)), alpha
        )

    if alpha > 1.0:
        # finite only if supp(sigma) is inside supp(rho)
        leak = _support_split(s, r)[5]
        if not _leak_ok(leak, tr_s):
            return DivergenceResult(math.inf, False, tr_s)

    if variant == "petz":
        q = float(np.real(np.trace(psd_power(s, alpha) @ psd_power(r, 1.0 - alpha))))
        if q <= 0.0:
            return DivergenceResult(math.inf, False, tr_s)
        value = (math.log2(q) - math.log2(tr_s)) / (alpha - 1.0)
        return DivergenceResult(float(value), True, tr_s)

    if variant == "sandwiched":
        g = psd_power(r, (1.0 - alpha) / (2.0 * alpha))
        m_evals, _ = eigh_sorted(g @ s @ g)
        cut = support_cutoff(m_evals.size, float(m_evals[-1]) if m_evals.size else 0.0)
        pos = m_evals[m_evals > cut]
        if pos.size == 0:
            return DivergenceResult(math.inf, False, tr_s)
        top = float(pos[-1])
        # log-domain sum avoids overflow at large alpha
        log2_q = alpha * math.log2(top) + math.log2(float(np.sum((pos / top) ** alpha)))
        value = (log2_q - math.log2(tr_s)) / (alpha - 1.0)
        return DivergenceResult(float(value), True, tr_s)

    raise UnknownNameError(f"unknown Renyi variant {variant!r}")


def q2_tilde(sigma, rho) -> float:
    """Tr[sigma rho^(-1/2) sigma rho^(-1/2)], pseudo-inverse on supp(rho)."""
    s, _r, _sd, _rd, _w, leak, tr_s = _support_split(sigma, rho)
    if not _leak_ok(leak, tr_s):
        raise SupportError("sigma has weight outside supp(rho); the overlap diverges")
    x = psd_power(_r, -0.5)
    return float(np.real(np.trace(s @ x @ s @ x)))


def d_max(sigma, rho) -> DivergenceResult:
    """log2 of the smallest c with sigma <= c * rho (tagged inf if none exists)."""
    s, r, _sd, _rd, _w, leak, tr_s = _support_split(sigma, rho)
    if not _leak_ok(leak, tr_s):
        return DivergenceResult(math.inf, False, tr_s)
    x = psd_power(r, -0.5)
    lam = float(np.linalg.eigvalsh(x @ s @ x)[-1])
    if lam <= 0.0:
        raise PreconditionError("d_max needs a nonzero sigma")
    return DivergenceResult(float(math.log2(lam)), True, tr_s)


# ---------------------------------------------------------------------------
# fidelity and distance


def _check_subnormalized(name: str, tr: float):
    if tr > 1.0 + 1e-9 or tr < -1e-12:
        raise PreconditionError(f"{name} must have trace in [0, 1], got {tr!r}")


def generalized_fidelity(tau, rho) -> float:
    """Uhlmann fidelity extended to sub-normalized operators.

    F = (||sqrt(tau) sqrt(rho)||_1 + sqrt((1 - Tr tau)(1 - Tr rho)))^2.
    """
    t = as_matrix(tau)
    r = as_matrix(rho)
    tr_t = float(np.real(np.trace(t)))
    tr_r = float(np.real(np.trace(r)))
    _check_subnormalized("tau", tr_t)
    _check_subnormalized("rho", tr_r)
    cross = psd_power(t, 0.5) @ psd_power(r, 0.5)
    root_fid = float(np.sum(np.linalg.svd(cross, compute_uv=False)))
    bonus = math.sqrt(max(1.0 - tr_t, 0.0) * max(1.0 - tr_r, 0.0))
    return min((root_fid + bonus) ** 2, 1.0)


def purified_distance(tau, rho) -> float:
    """sqrt(1 - F) with F the generalized fidelity; a metric on sub-normalized states."""
    return math.sqrt(max(0.0, 1.0 - generalized_fidelity(tau, rho)))


# ---------------------------------------------------------------------------
# entropies


def von_neumann_entropy(rho) -> float:
    """-Tr[rho log2 rho], evaluated as-is on sub-normalized operators."""
    evals = np.linalg.eigvalsh(as_matrix(rho))
    cut = support_cutoff(evals.size, float(evals[-1]) if evals.size else 0.0)
    pos = evals[evals > cut]
    return float(-np.sum(pos * np.log2(pos)))


def shannon_entropy(p) -> float:
    """Termwise -sum p_i log2 p_i over nonnegative entries (need not sum to 1)."""
    v = np.asarray(p, dtype=float).reshape(-1)
    if np.any(v < -1e-12):
        raise PreconditionError("entries must be nonnegative")
    pos = v[v > 0.0]
    return float(-np.sum(pos * np.log2(pos)))


def minus_xlog2x(x: float) -> float:
    """-x log2 x with the continuous extension 0 at x = 0."""
    if x < 0.0:
        raise PreconditionError(f"need x >= 0, got {x}")
    return 0.0 if x == 0.0 else float(-x * math.log2(x))


def classical_relative_entropy(p, q) -> DivergenceResult:
    """sum p_i log2(p_i / q_i) for nonnegative vectors, tagged inf on support failure."""
    pv = np.asarray(p, dtype=float).reshape(-1)
    qv = np.asarray(q, dtype=float).reshape(-1)
    if pv.shape != qv.shape:
        raise PreconditionError("length mismatch")
    tr_p = float(np.sum(pv))
    leak = float(np.sum(pv[qv <= 0.0]))
    if leak > SUPPORT_LEAK_TOL * max(tr_p, 1e-300):
        return DivergenceResult(math.inf, False, tr_p)
    mask = pv > 0.0
    val = float(np.sum(pv[mask] * (np.log2(pv[mask]) - np.log2(qv[mask]))))
    return DivergenceResult(val, True, tr_p)


def classical_renyi_divergence(p, q, alpha: float) -> DivergenceResult:
    """Order-alpha divergence of probability vectors with Tr normalization inside the log."""
    if not (alpha > 0.0) or alpha == 1.0:
        raise PreconditionError(f"alpha must be positive and != 1, got {alpha}")
    pv = np.asarray(p, dtype=float).reshape(-1)
    qv = np.asarray(q, dtype=float).reshape(-1)
    tr_p = float(np.sum(pv))
    if alpha > 1.0:
        leak = float(np.sum(pv[qv <= 0.0]))
        if leak > SUPPORT_LEAK_TOL * max(tr_p, 1e-300):
            return DivergenceResult(math.inf, False, tr_p)
    mask = (pv > 0.0) & (qv > 0.0)
    s = float(np.sum(pv[mask] ** alpha * qv[mask] ** (1.0 - alpha)))
    if s <= 0.0:
        return DivergenceResult(math.inf, False, tr_p)
    val = (math.log2(s) - math.log2(tr_p)) / (alpha - 1.0)
    return DivergenceResult(float(val), True, tr_p)


# ---------------------------------------------------------------------------
# derived information quantities


def coherent_information(state: BipartiteState, target: int = 0) -> float:
    """H(target marginal) - H(joint), cross-checked against the divergence form.

    With the default target=0 and a state on B (x) R this is the amount by
    which holding R can beat a fresh preparation of B: H(B) - H(BR).
    """
    if len(state.dims) != 2:
        raise PreconditionError("coherent_information expects a bipartite state")
    if target not in (0, 1):
        raise PreconditionError("target must be 0 or 1")
    if not state.normalized:
        raise PreconditionError("coherent_information expects a normalized state")
    marg = state.marginal(target)
    ent_form = von_neumann_entropy(marg) - von_neumann_entropy(state.matrix)
    other = state.dims[1 - target]
    eye = np.eye(other, dtype=complex)
    ref = np.kron(eye, marg) if target == 1 else np.kron(marg, eye)
    div_form = relative_entropy(state.matrix, ref)
    if not div_form.support_ok or abs(div_form.value - ent_form) > 1e-9:
        raise NumericalError(
            f"coherent information forms disagree: {ent_form} vs {div_form.value}"
        )
    return float(ent_form)


def _ensemble_parts(ens):
    pmf = getattr(ens, "pmf", None)
    states = getattr(ens, "states", None)
    if pmf is None or states is None:
        pmf, states = ens
    pmf = np.asarray(pmf, dtype=float).reshape(-1)
    mats = [as_matrix(s) for s in states]
    if len(mats) != pmf.size:
        raise PreconditionError("pmf length does not match number of states")
    return pmf, mats


def holevo_information(ens) -> float:
    """H(avg) - sum p H(rho_x), cross-checked against sum p D(rho_x || avg)."""
    pmf, mats = _ensemble_parts(ens)
    avg = sum(p * m for p, m in zip(pmf, mats))
    ent_form = von_neumann_entropy(avg) - float(
        np.sum([p * von_neumann_entropy(m) for p, m in zip(pmf, mats)])
    )
    div_form = 0.0
    for p, m in zip(pmf, mats):
        if p <= 0.0:
            continue
        r = relative_entropy(m, avg)
        if not r.support_ok:
            raise NumericalError("ensemble member leaves the support of the average")
        div_form += p * r.value
    if abs(div_form - ent_form) > 1e-9:
        raise NumericalError(f"holevo forms disagree: {ent_form} vs {div_form}")
    return float(ent_form)


def info_variance(sigma, rho) -> float:
    """Tr[sigma (log2 sigma - log2 rho)^2] - D(sigma||rho)^2.

    Logarithms are support-restricted (zero on kernels); exact whenever
    sigma has full rank, the standard numerical convention otherwise.
    """
    s = as_matrix(sigma)
    r = as_matrix(rho)
    if abs(float(np.real(np.trace(s))) - 1.0) > 1e-6:
        raise PreconditionError("info_variance expects a normalized sigma")
    rel = relative_entropy(s, r)
    if not rel.support_ok:
        raise SupportError("info_variance requires supp(sigma) within supp(rho)")
    delta = psd_log2(s) - psd_log2(r)
    second = float(np.real(np.trace(s @ delta @ delta)))
    return float(second - rel.value**2)


def aep_rate(sigma, rho, n: int, eps: float) -> float:
    """Second-order rate D - sqrt(V/n) * InverseGaussCdf(eps^2), per copy."""
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise PreconditionError(f"n must be a positive integer, got {n!r}")
    if not (0.0 < eps < 1.0):
        raise PreconditionError(f"eps must lie in (0, 1), got {eps}")
    rel = relative_entropy(sigma, rho)
    if not rel.support_ok:
        raise SupportError("aep_rate requires supp(sigma) within supp(rho)")
    v = info_variance(sigma, rho)
    quantile = eps * eps
    # no double squares to exactly one half; within one rounding step of
    # the median the correction vanishes by antisymmetry of the quantile
    if abs(quantile - 0.5) <= 2.0**-53:
        quantile = 0.5
    return float(rel.value - math.sqrt(max(v, 0.0) / n) * ndtri(quantile))


# ---------------------------------------------------------------------------
# conditional min-entropy: SDP with an independently solved dual certificate


def _certified_dual_value(y_raw, rho: np.ndarray, d_a: int, d_b: int):
    """Project a candidate multiplier into the dual feasible set and score it.

    Any psd Y with Tr_A[Y] <= I gives the valid lower bound Tr[Y rho], so
    the candidate is clipped to psd and rescaled; a bad candidate just
    yields a weak bound, never an invalid one.
    """
    if y_raw is None:
        return None
    y = np.asarray(y_raw, dtype=complex)
    if y.shape != rho.shape:
        return None
    y = (y + y.conj().T) / 2.0
    evals, vecs = np.linalg.eigh(y)
    y = (vecs * np.clip(evals, 0.0, None)) @ vecs.conj().T
    marg = partial_trace(y, (d_a, d_b), (1,))
    top = float(np.linalg.eigvalsh(marg)[-1])
    if top > 1.0:
        y = y / top
    return float(np.real(np.trace(y @ rho)))


def _solve_semidefinite_pair(rho: np.ndarray, d_a: int, d_b: int, tighten=True):
    """min Tr[xi] s.t. I_A (x) xi >= rho, xi >= 0, self-certified.

    Returns (optimal trace, optimizer xi, certified gap).  The solver's
    answer is never trusted directly: the primal point is shifted onto the
    feasible set, the dual multiplier is projected into its feasible set,
    and the reported value is the repaired feasible trace, so the gap is a
    bound between two certified points.  When the multiplier alone cannot
    close the gap, the dual program is solved separately and repaired the
    same way.  Raises NumericalError if no solver meets SDP_GAP_TOL.
    """
    import cvxpy as cp

    eye_a = np.eye(d_a)
    attempts = []
    solver_plans = [
        ("CLARABEL", dict(tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)),
        ("CVXOPT", dict(abstol=1e-9, reltol=1e-9, feastol=1e-9)),
    ]
    if not tighten:
        solver_plans = [("CLARABEL", {}), ("CVXOPT", {})]
    for solver, opts in solver_plans:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                xi = cp.Variable((d_b, d_b), hermitian=True)
                cover = cp.kron(eye_a, xi) >> rho
                primal = cp.Problem(
                    cp.Minimize(cp.real(cp.trace(xi))), [cover, xi >> 0]
                )
                primal.solve(solver=solver, **opts)
        except Exception as exc:  # solver blew up: try the next one
            attempts.append(f"{solver}: {exc!r}")
            continue
        if xi.value is None:
            attempts.append(f"{solver}: no primal point (status {primal.status})")
            continue
        xi_val = (xi.value + xi.value.conj().T) / 2.0
        shortfall = float(np.linalg.eigvalsh(np.kron(eye_a, xi_val) - rho)[0])
        if shortfall < 0.0:
            xi_val = xi_val - shortfall * np.eye(d_b)
        p = float(np.real(np.trace(xi_val)))
        scale = max(1.0, abs(p))
        lower = _certified_dual_value(cover.dual_value, rho, d_a, d_b)
        if lower is not None and p - lower <= SDP_GAP_TOL * scale:
            return p, xi_val, p - lower
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                y = cp.Variable((d_a * d_b, d_a * d_b), hermitian=True)
                dual = cp.Problem(
                    cp.Maximize(cp.real(cp.trace(y @ rho))),
                    [y >> 0, np.eye(d_b) >> cp.partial_trace(y, [d_a, d_b], axis=0)],
                )
                dual.solve(solver=solver, **opts)
        except Exception as exc:
            attempts.append(f"{solver}: dual solve {exc!r}")
            continue
        from_dual = _certified_dual_value(y.value, rho, d_a, d_b)
        if from_dual is not None:
            lower = from_dual if lower is None else max(lower, from_dual)
        if lower is not None and p - lower <= SDP_GAP_TOL * scale:
            return p, xi_val, p - lower
        attempts.append(
            f"{solver}: certified gap {p - (lower if lower is not None else -math.inf):.3e}"
        )
    raise NumericalError(
        "semidefinite solve failed the gap certificate: " + "; ".join(attempts)
    )


def _ordered_bipartite(state, cond: int):
    """Matrix and (d_first, d_cond) with the conditioning system moved second."""
    if not isinstance(state, BipartiteState):
        raise PreconditionError("expected a BipartiteState")
    if len(state.dims) != 2:
        raise PreconditionError("conditional entropies need exactly two subsystems")
    if cond not in (0, 1):
        raise PreconditionError("cond must be 0 or 1")
    m = state.matrix
    da, db = state.dims
    if cond == 0:
        m = swap_bipartite(m, state.dims)
        da, db = db, da
    return m, da, db


def h_min(state: BipartiteState, cond: int = 1) -> float:
    """Conditional min-entropy of the non-conditioned system given subsystem ``cond``.

    Solved as a semidefinite program with an independently solved dual;
    the primal-dual gap is certified below 1e-7.
    """
    m, da, db = _ordered_bipartite(state, cond)
    p, _xi, _gap = _solve_semidefinite_pair(m, da, db)
    return float(-math.log2(p))


def _h_min_with_optimizer(state: BipartiteState, cond: int = 1):
    m, da, db = _ordered_bipartite(state, cond)
    p, xi, gap = _solve_semidefinite_pair(m, da, db)
    return float(-math.log2(p)), xi, gap


def min_dmax_over_marginal(rho_ab, dims, tau_a) -> float:
    """inf over xi_B of Dmax(rho_AB || tau_A (x) xi_B), for full-rank tau_A.

    Evaluated exactly through the same semidefinite machinery after
    conjugating by tau_A^(-1/2) on the first factor.
    """
    m = as_matrix(rho_ab)
    da, db = int(dims[0]), int(dims[1])
    t = as_matrix(tau_a)
    t_evals = np.linalg.eigvalsh(t)
    if float(t_evals[0]) <= support_cutoff(da, float(t_evals[-1])):
        raise PreconditionError("tau_A must have full rank")
    x = np.kron(psd_power(t, -0.5), np.eye(db, dtype=complex))
    m2 = x @ m @ x
    m2 = (m2 + m2.conj().T) / 2.0
    p, _xi, _gap = _solve_semidefinite_pair(m2, da, db)
    return float(math.log2(p))


def h_min_bloch_grid(state: BipartiteState, cond: int = 1, stages: int = 7, base: int = 13) -> float:
    """Grid-search oracle for h_min when the conditioning system is a qubit.

    Scans sub-normalized candidates sigma(v) = (I + v . pauli)/2 over zoomed
    cubes inside the Bloch ball; independent of the semidefinite solver.
    """
    m, da, db = _ordered_bipartite(state, cond)
    if db != 2:
        raise PreconditionError("the Bloch-grid oracle needs a qubit conditioner")
    pauli = [
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]], dtype=complex),
        np.array([[1, 0], [0, -1]], dtype=complex),
    ]
    eye_a = np.eye(da, dtype=complex)
    r_max = 1.0 - 1e-9

    def dmax_at(v):
        sig = 0.5 * (np.eye(2, dtype=complex) + v[0] * pauli[0] + v[1] * pauli[1] + v[2] * pauli[2])
        ev, vec = np.linalg.eigh(sig)
        if ev[0] <= 0.0:
            return math.inf
        inv_half = (vec * (ev**-0.5)) @ vec.conj().T
        x = np.kron(eye_a, inv_half)
        lam = float(np.linalg.eigvalsh(x @ m @ x)[-1])
        return math.log2(lam)

    center = np.zeros(3)
    width = 1.0
    best_val = math.inf
    best_v = center
    for _stage in range(stages):
        axis = np.linspace(-width, width, base)
        for dx in axis:
            for dy in axis:
                for dz in axis:
                    v = center + np.array([dx, dy, dz])
                    norm = float(np.linalg.norm(v))
                    if norm > r_max:
                        v = v * (r_max / norm)
                    val = dmax_at(v)
                    if val < best_val:
                        best_val = val
                        best_v = v
        center = best_v
        width *= 2.2 / (base - 1)
    return float(-best_val)


# ---------------------------------------------------------------------------
# one-sided smoothing over purified-distance balls


def _golden_min(fn, lo: float, hi: float, iters: int):
    """Golden-section minimization; returns the best probed (x, fn(x))."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fn(c), fn(d)
    best_x, best_f = (c, fc) if fc <= fd else (d, fd)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
        for x, f in ((c, fc), (d, fd)):
            if f < best_f:
                best_x, best_f = x, f
    return best_x, best_f


def _capped_candidate(g_evals, g_vecs, w_half, r_weights, lam: float, refill: bool, budget: float):
    """Candidate w^(1/2) min(c G, lam) w^(1/2) with c from the trace budget.

    r_weights[k] = <g_k| w |g_k> so the candidate trace is
    sum_k min(c g_k, lam) r_weights[k], piecewise linear in c.
    """
    g = np.clip(g_evals, 0.0, None)
    if not refill:
        c = 1.0
    else:
        # walk the breakpoints lam/g_k of the piecewise-linear trace curve
        pos = g > 0.0
        tr_sat = lam * float(np.sum(r_weights[pos]))
        if tr_sat <= budget:
            c = math.inf
        else:
            # the trace saturates above budget, so the walk always terminates
            bps = sorted(lam / g[pos])
            c = 1.0
            for i, bp in enumerate(bps):
                tr_at = float(np.sum(np.minimum(bp * g, lam) * r_weights))
                if tr_at >= budget:
                    lo_bp = bps[i - 1] if i > 0 else 0.0
                    tr_lo = float(np.sum(np.minimum(lo_bp * g, lam) * r_weights))
                    slope_mask = lo_bp * g < lam
                    slope = float(np.sum(g[slope_mask] * r_weights[slope_mask]))
                    c = lo_bp if slope <= 0 else lo_bp + (budget - tr_lo) / slope
                    break
        c = max(c, 1.0)
    if math.isinf(c):
        vals = np.where(g > 0.0, lam, 0.0)
    else:
        vals = np.minimum(c * g, lam)
    mid = (g_vecs * vals) @ g_vecs.conj().T
    cand = w_half @ mid @ w_half
    cand = (cand + cand.conj().T) / 2.0
    tr = float(np.real(np.trace(cand)))
    if tr > budget:
        cand = cand * (budget / tr)
    return cand


def _cap_family(sigma_mat, weight_mat, eps: float, budget: float = 1.0):
    """Feasible candidates built by capping the weighted ratio spectrum.

    Returns (candidate, purified distance, None) triples; the bound value
    slot is left empty for the caller to fill.
    """
    w_half = psd_power(weight_mat, 0.5)
    w_inv_half = psd_power(weight_mat, -0.5)
    g_mat = w_inv_half @ sigma_mat @ w_inv_half
    g_mat = (g_mat + g_mat.conj().T) / 2.0
    g_evals, g_vecs = np.linalg.eigh(g_mat)
    lam_top = float(g_evals[-1])
    if lam_top <= 0.0:
        return []
    r_weights = _weights_in_basis(weight_mat, g_vecs)

    def probe(lam, refill):
        cand = _capped_candidate(g_evals, g_vecs, w_half, r_weights, lam, refill, budget)
        dist = purified_distance(cand, sigma_mat)
        return cand, dist, dist <= eps + 1e-12

    out = []
    for refill in (False, True):
        lo, hi = lam_top * 2.0**-24, lam_top
        cand, dist, ok = probe(hi, refill)
        if not ok:
            continue
        _c, _d, deep_ok = probe(lo, refill)
        if deep_ok:
            out.append((_c, _d, None))
            continue
        for _ in range(60):  # bisect the feasibility boundary in lam
            mid = math.sqrt(lo * hi)
            if probe(mid, refill)[2]:
                hi = mid
            else:
                lo = mid
        for bump in (1.0, 1.02, 1.1, 1.5):
            cand, dist, ok = probe(hi * bump, refill)
            if ok:
                out.append((cand, dist, None))
    return out


def _mix_family(sigma_mat, direction_mat, eps: float, score_fn, iters: int = 48):
    """Feasible candidates (1-w) sigma + w direction, w located by golden section.

    ``score_fn(candidate)`` is the quantity being minimized; infeasible
    weights are penalized so the search tracks the feasibility boundary.
    Scores are recorded so callers never re-evaluate them.
    """
    seen = []

    def objective(w):
        cand = (1.0 - w) * sigma_mat + w * direction_mat
        cand = (cand + cand.conj().T) / 2.0
        dist = purified_distance(cand, sigma_mat)
        if dist > eps + 1e-12:
            return math.inf
        score = score_fn(cand)
        seen.append((cand, dist, score))
        return score

    _golden_min(objective, 0.0, 1.0, iters)
    return seen


def smooth_bound(kind: str, target, reference, epsilon: float) -> SmoothingCertificate:
    """Certified one-sided smoothing bound.

    kind='d_max_eps': an UPPER bound on the smoothed max-divergence of
    ``target`` from ``reference``, witnessed by a feasible candidate in the
    sub-normalized purified-distance ball.  kind='h_min_eps': a LOWER bound
    on the smoothed min-entropy of a bipartite ``target`` conditioned on its
    second subsystem (``reference`` optionally overrides the mixing anchor).
    epsilon = 0 returns the exact unsmoothed quantity.
    """
    if kind == "d_max_eps":
        return _smooth_dmax(target, reference, epsilon)
    if kind == "h_min_eps":
        return _smooth_hmin(target, reference, epsilon)
    raise UnknownNameError(f"unknown smoothing kind {kind!r}")


def _as_density(mat) -> DensityOperator:
    return DensityOperator(mat) if not isinstance(mat, DensityOperator) else mat


def _smooth_dmax(target, reference, epsilon: float) -> SmoothingCertificate:
    s = as_matrix(target)
    r = as_matrix(reference)
    tr_s = float(np.real(np.trace(s)))
    _check_subnormalized("target", tr_s)
    if epsilon < 0.0 or epsilon > math.sqrt(tr_s) + 1e-12:
        raise PreconditionError(
            f"epsilon must lie in [0, sqrt(Tr target)] = [0, {math.sqrt(tr_s):.6f}]"
        )
    base = d_max(s, r)
    if epsilon == 0.0:
        return SmoothingCertificate("d_max_eps", _as_density(s), 0.0, base.value)

    def dmax_score(cand):
        res = d_max(cand, r)
        return res.value if res.support_ok else math.inf

    candidates = []
    if base.support_ok:
        candidates.append((s, 0.0, base.value))
    candidates.extend(_cap_family(s, r, epsilon))
    scale = tr_s / max(float(np.real(np.trace(r))), 1e-300)
    candidates.extend(_mix_family(s, scale * r, epsilon, dmax_score))

    best = None
    for cand, dist, val in candidates:
        if val is None:
            val = dmax_score(cand)
        if best is None or val < best[2]:
            best = (cand, dist, val)
    if best is None:
        # nothing feasible: fall back to the support projection of the target
        proj = psd_power(r, 0.0)
        cand = proj @ s @ proj
        return SmoothingCertificate(
            "d_max_eps", _as_density(cand), purified_distance(cand, s), math.inf
        )
    cand, dist, val = best
    return SmoothingCertificate("d_max_eps", _as_density(cand), float(dist), float(val))


def _smooth_hmin(target: BipartiteState, reference, epsilon: float) -> SmoothingCertificate:
    if not isinstance(target, BipartiteState):
        raise PreconditionError("h_min_eps smoothing expects a BipartiteState target")
    da, db = target.dims
    s = target.matrix
    tr_s = target.trace
    if epsilon < 0.0 or epsilon > math.sqrt(tr_s) + 1e-12:
        raise PreconditionError(
            f"epsilon must lie in [0, sqrt(Tr target)] = [0, {math.sqrt(tr_s):.6f}]"
        )
    exact, xi_opt, _gap = _h_min_with_optimizer(target)
    if epsilon == 0.0:
        return SmoothingCertificate("h_min_eps", target, 0.0, exact)

    def hmin_of(mat) -> float:
        return float(-math.log2(_solve_semidefinite_pair(mat, da, db)[0]))

    candidates = [(s, 0.0, exact)]
    weight = np.kron(np.eye(da, dtype=complex), xi_opt)
    candidates.extend(_cap_family(s, weight, epsilon))

    if reference is None:
        rho_b = partial_trace(s, (da, db), [1])
        direction = np.kron(np.eye(da, dtype=complex) / da, rho_b)
    else:
        direction = as_matrix(reference)
    # golden section on the mixing weight, maximizing the resulting min-entropy;
    # each probe costs one semidefinite solve, so the iteration count stays low
    mixed = _mix_family(s, direction, epsilon, lambda c: -hmin_of(c), iters=16)
    candidates.extend((cand, dist, -score) for cand, dist, score in mixed)

    best = None
    for cand, dist, val in candidates:
        if val is None:
            val = hmin_of(cand)
        if best is None or val > best[2]:
            best = (cand, dist, val)
    cand, dist, val = best
    return SmoothingCertificate(
        "h_min_eps",
        BipartiteState(cand, (da, db)),
        float(dist),
        float(val),
    )
