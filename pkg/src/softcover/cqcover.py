"""Randomized covering for ensembles of quantum states.

A codebook of size theta is drawn i.i.d. from the ensemble's pmf, the
encoded state is the uniform mixture of the drawn members, and the
covering error is its relative entropy to the ensemble average.  The
expected error admits a closed collision-divergence bound, an exact
small-alphabet enumeration oracle, and a classical specialization where
every member state is diagonal.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channels import CQEnsemble
from .entropic import (
    classical_relative_entropy,
    d_max,
    minus_xlog2x,
    q2_tilde,
    relative_entropy,
    smooth_bound,
)
from .errors import (
    MalformedInputError,
    NumericalError,
    PreconditionError,
    ResourceLimitError,
    SupportError,
    UnknownNameError,
)
from .linalg import (
    LOG2E,
    SUPPORT_LEAK_TOL,
    BipartiteState,
    DensityOperator,
    as_rng,
    derive_seed,
    partial_trace,
    psd_log2,
    psd_power,
    support_cutoff,
)

ENUMERATION_GUARD = 10**6
ROUTE_TOL = 1e-9


@dataclass(frozen=True)
class Codebook:
    """Ordered list of theta ensemble symbols; repetition is allowed."""

    symbols: tuple
    theta: int

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if self.theta < 1 or len(self.symbols) != self.theta:
            raise MalformedInputError(
                f"need exactly theta >= 1 symbols, got {len(self.symbols)} for theta {self.theta}"
            )


@dataclass(frozen=True)
class CQJoint:
    """Joint classical-quantum state of the symbol register and the output."""

    phi_xb: BipartiteState
    q_x: np.ndarray
    rho_avg: DensityOperator

    def __post_init__(self):
        q = np.asarray(self.q_x, dtype=float).reshape(-1)
        q.flags.writeable = False
        object.__setattr__(self, "q_x", q)
        x_dim, d = self.phi_xb.dims
        if q.size != x_dim:
            raise MalformedInputError("pmf length does not match the symbol register")
        blocks = self.phi_xb.matrix.reshape(x_dim, d, x_dim, d)
        off = blocks.copy()
        for k in range(x_dim):
            off[k, :, k, :] = 0.0
        if np.max(np.abs(off)) > 1e-12:
            raise MalformedInputError("joint state must be block-diagonal in the symbol basis")
        x_marg = partial_trace(self.phi_xb.matrix, (x_dim, d), (0,))
        if np.max(np.abs(x_marg - np.diag(q))) > 1e-10:
            raise MalformedInputError("symbol marginal does not match the pmf")
        b_marg = partial_trace(self.phi_xb.matrix, (x_dim, d), (1,))
        if np.max(np.abs(b_marg - self.rho_avg.matrix)) > 1e-10:
            raise MalformedInputError("output marginal does not match the average state")


def cq_joint(ens: CQEnsemble) -> CQJoint:
    """Assemble sum_x Q(x) |x><x| (x) rho_x with its marginals."""
    x_dim = ens.size
    d = ens.dim
    phi = np.zeros((x_dim * d, x_dim * d), dtype=complex)
    for k, (p, s) in enumerate(zip(ens.pmf, ens.states)):
        phi[k * d : (k + 1) * d, k * d : (k + 1) * d] = p * s
    return CQJoint(
        phi_xb=BipartiteState(phi, (x_dim, d)),
        q_x=ens.pmf.copy(),
        rho_avg=DensityOperator(ens.average_state()),
    )


def _symbol_index(ens: CQEnsemble) -> dict:
    return {sym: k for k, sym in enumerate(ens.alphabet)}


def _lookup(ens: CQEnsemble, symbols) -> list:
    index = _symbol_index(ens)
    out = []
    for sym in symbols:
        if sym not in index:
            raise UnknownNameError(f"symbol {sym!r} is not in the ensemble alphabet")
        out.append(index[sym])
    return out


def mix_codebook(ens: CQEnsemble, code: Codebook) -> DensityOperator:
    """Uniform mixture of the codebook's member states."""
    picks = _lookup(ens, code.symbols)
    mix = sum(ens.states[k] for k in picks) / code.theta
    return DensityOperator(mix)


def _check_member_support(ens: CQEnsemble) -> None:
    """Every positively weighted member must live inside supp(average)."""
    rho = ens.average_state()
    evals, vecs = np.linalg.eigh(rho)
    cutoff = support_cutoff(ens.dim, float(evals[-1]))
    kernel = vecs[:, evals <= cutoff]
    if kernel.shape[1] == 0:
        return
    for sym, p, s in zip(ens.alphabet, ens.pmf, ens.states):
        if p <= 0.0:
            continue
        leak = float(np.real(np.trace(kernel.conj().T @ s @ kernel)))
        if leak > SUPPORT_LEAK_TOL:
            raise SupportError(
                f"state for symbol {sym!r} leaks outside the support of the average"
            )


def q2_cq(ens: CQEnsemble) -> float:
    """Collision-type divergence of the joint state from Q_X (x) average.

    Computed twice: on the joint state directly, and as the per-symbol
    sum sum_x Q(x) Tr[rho_x X rho_x X] with X the support inverse square
    root of the average.  The routes must agree to 1e-9.
    """
    _check_member_support(ens)
    rho = ens.average_state()
    x = psd_power(rho, -0.5)
    per_symbol = math.fsum(
        p * float(np.real(np.trace(s @ x @ s @ x)))
        for p, s in zip(ens.pmf, ens.states)
        if p > 0.0
    )
    joint = cq_joint(ens)
    ref = np.kron(np.diag(joint.q_x), rho)
    direct = q2_tilde(joint.phi_xb.matrix, ref)
    if abs(direct - per_symbol) > ROUTE_TOL * max(1.0, abs(direct)):
        raise NumericalError(
            f"collision divergence routes disagree: joint {direct!r}, per-symbol {per_symbol!r}"
        )
    return direct


def sample_codebook(ens: CQEnsemble, theta: int, seed) -> Codebook:
    """Draw theta symbols i.i.d. from the ensemble pmf."""
    if theta < 1:
        raise PreconditionError(f"theta must be at least 1, got {theta}")
    rng = as_rng(seed)
    picks = rng.choice(ens.size, size=theta, p=ens.pmf)
    return Codebook(symbols=tuple(ens.alphabet[int(k)] for k in picks), theta=theta)


def _enumeration_size(ens: CQEnsemble, theta: int) -> int:
    count = ens.size**theta
    if count > ENUMERATION_GUARD:
        raise ResourceLimitError(
            f"{count} codebooks exceed the exact-enumeration guard of {ENUMERATION_GUARD}"
        )
    return count


def _multiset_weight(pmf: np.ndarray, combo: tuple, theta: int) -> float:
    weight = 1.0
    for k in combo:
        weight *= float(pmf[k])
    if weight <= 0.0:
        return 0.0
    counts = {}
    for k in combo:
        counts[k] = counts.get(k, 0) + 1
    perms = math.factorial(theta)
    for c in counts.values():
        perms //= math.factorial(c)
    return weight * float(perms)


def _exact_chunk(ens: CQEnsemble, theta: int, rho: np.ndarray, combos: list) -> float:
    terms = []
    for combo in combos:
        weight = _multiset_weight(ens.pmf, combo, theta)
        if weight == 0.0:
            continue
        mix = sum(ens.states[k] for k in combo) / theta
        res = relative_entropy(mix, rho)
        if not res.support_ok:
            raise SupportError("codebook mixture leaks outside the average's support")
        terms.append(weight * res.value)
    return math.fsum(terms)


def exact_expectation(ens: CQEnsemble, theta: int, workers: int = 1) -> float:
    """Exact E D(mixture || average) over all size-theta codebooks.

    All |X|^theta ordered codebooks enter with product weights; orderings
    of the same multiset share one divergence, so the sum is factored
    through multiset counts.  Guarded at 10^6 codebooks.  The multiset
    list is split into contiguous ranges; with workers > 1 the ranges run
    on a thread pool, and either way the partial sums are reduced in range
    order so the result does not depend on scheduling.
    """
    if theta < 1:
        raise PreconditionError(f"theta must be at least 1, got {theta}")
    _enumeration_size(ens, theta)
    rho = ens.average_state()
    combos = list(itertools.combinations_with_replacement(range(ens.size), theta))
    step = max(1, min(256, (len(combos) + 3) // 4))
    chunks = [combos[i : i + step] for i in range(0, len(combos), step)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(lambda c: _exact_chunk(ens, theta, rho, c), chunks))
    else:
        partials = [_exact_chunk(ens, theta, rho, c) for c in chunks]
    return math.fsum(partials)


def mc_expectation(ens: CQEnsemble, theta: int, trials: int, seed) -> tuple:
    """Sample mean and standard error of the covering error over codebooks."""
    if trials < 2:
        raise PreconditionError("need at least two trials for a standard error")
    rho = ens.average_state()
    values = []
    for t in range(trials):
        code = sample_codebook(ens, theta, derive_seed(seed, t))
        res = relative_entropy(mix_codebook(ens, code).matrix, rho)
        if not res.support_ok:
            raise SupportError("codebook mixture leaks outside the average's support")
        values.append(res.value)
    mean = math.fsum(values) / trials
    var = math.fsum((v - mean) ** 2 for v in values) / (trials * (trials - 1))
    return mean, math.sqrt(var)


def expected_divergence_bound(ens: CQEnsemble, theta: int) -> float:
    """Bound on the expected covering error at codebook size theta."""
    if theta < 1:
        raise PreconditionError(f"theta must be at least 1, got {theta}")
    return (LOG2E / theta) * q2_cq(ens)


def jensen_intermediate(ens: CQEnsemble, theta: int) -> float:
    """The tighter mid-chain quantity between the exact expectation and
    the collision bound: sum_x Q(x) Tr[rho_x (log(rho_x/theta + rho) - log rho)]."""
    if theta < 1:
        raise PreconditionError(f"theta must be at least 1, got {theta}")
    _check_member_support(ens)
    rho = ens.average_state()
    log_rho = psd_log2(rho)
    total = 0.0
    for p, s in zip(ens.pmf, ens.states):
        if p <= 0.0:
            continue
        shifted = psd_log2(s / theta + rho)
        total += p * float(np.real(np.trace(s @ (shifted - log_rho))))
    return total


@dataclass(frozen=True)
class Theorem3Terms:
    log_theta_bound: float
    delta_bound: float


def theorem3_terms(ens: CQEnsemble, eps: float, eta: float) -> Theorem3Terms:
    """One-shot covering terms for ensembles at smoothing eps and slack eta.

    The code-size bound uses the certified upper bound on the smoothed
    max-divergence of the joint state from Q_X (x) average, so the value
    is valid though possibly loose.  eps = 0 gives the exact unsmoothed
    limit, where the error-term formula degenerates to infinity.
    """
    if not 0.0 <= eps < 1.0 / 24.0:
        raise PreconditionError(f"eps must lie in [0, 1/24), got {eps}")
    if not 0.0 < eta < 1.0 / 24.0:
        raise PreconditionError(f"eta must lie in (0, 1/24), got {eta}")
    joint = cq_joint(ens)
    ref = np.kron(np.diag(joint.q_x), joint.rho_avg.matrix)
    cert = smooth_bound("d_max_eps", joint.phi_xb.matrix, ref, eps)
    log_theta = max(0.0, cert.bound_value - math.log2(eta))
    if eps == 0.0:
        delta = math.inf
    else:
        delta = (
            3.0 * LOG2E / (eps * eps) * eta
            + 16.0 * eps * math.log2(ens.dim)
            + minus_xlog2x(12.0 * eps)
            + minus_xlog2x(4.0 * eps)
        )
    return Theorem3Terms(log_theta_bound=float(log_theta), delta_bound=float(delta))


def converse_certificate(ens: CQEnsemble, code: Codebook) -> float:
    """Max-divergence witness that any size-theta codebook obeys the converse.

    A position register maximally correlated with a codeword copy has
    max-divergence exactly log2(theta) from the product of its marginals;
    sending the copy through the ensemble map can only shrink it.  Returns
    the post-channel value and asserts both facts.
    """
    theta = code.theta
    picks = _lookup(ens, code.symbols)
    diag = np.zeros(theta * theta)
    diag[[i * theta + i for i in range(theta)]] = 1.0 / theta
    coupled = np.diag(diag)
    product = np.eye(theta * theta) / (theta * theta)
    pre = d_max(coupled, product)
    if not pre.support_ok or abs(pre.value - math.log2(theta)) > 1e-12:
        raise NumericalError(
            f"coupling witness is off: {pre.value!r} vs log2({theta})"
        )
    d = ens.dim
    omega_xb = np.zeros((theta * d, theta * d), dtype=complex)
    for i, k in enumerate(picks):
        omega_xb[i * d : (i + 1) * d, i * d : (i + 1) * d] = ens.states[k] / theta
    mix = mix_codebook(ens, code)
    ref = np.kron(np.eye(theta) / theta, mix.matrix)
    post = d_max(omega_xb, ref)
    if not post.support_ok:
        raise SupportError("codebook state leaks outside its own mixture support")
    if post.value > math.log2(theta) + 1e-9:
        raise NumericalError(
            f"data processing violated: {post.value!r} > log2({theta})"
        )
    return float(post.value)


def _check_stochastic(w: np.ndarray) -> None:
    if w.ndim != 2 or w.size == 0:
        raise MalformedInputError("conditional pmf matrix must be 2-dimensional")
    if np.any(w < -1e-12):
        raise MalformedInputError("conditional pmf entries must be nonnegative")
    rows = w.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > 1e-9:
        raise MalformedInputError("every conditional pmf row must sum to 1")


def classical_bound(w, q, theta: int, trials: int = 2000, seed=0) -> tuple:
    """Covering error and collision bound for a classical channel.

    Returns (E D(P_Y || Q_Y), (log2 e / theta) * collision sum), with the
    expectation exact whenever the enumeration guard allows and Monte
    Carlo otherwise.  The collision sum is cross-checked against the
    diagonal-ensemble embedding to 1e-9.
    """
    w = np.asarray(w, dtype=float)
    _check_stochastic(w)
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != w.shape[0]:
        raise MalformedInputError("input pmf length does not match the channel rows")
    if np.any(q < 0.0) or abs(float(q.sum()) - 1.0) > 1e-9:
        raise MalformedInputError("input pmf entries must be nonnegative and sum to 1")
    if theta < 1:
        raise PreconditionError(f"theta must be at least 1, got {theta}")
    q_y = q @ w
    collision = 0.0
    for x in range(w.shape[0]):
        if q[x] <= 0.0:
            continue
        mask = w[x] > 0.0
        collision += q[x] * float(np.sum(w[x, mask] ** 2 / q_y[mask]))
    ens = CQEnsemble(
        alphabet=tuple(range(w.shape[0])),
        pmf=q,
        states=tuple(np.diag(row).astype(complex) for row in w),
    )
    embedded = q2_cq(ens)
    if abs(embedded - collision) > ROUTE_TOL * max(1.0, abs(collision)):
        raise NumericalError(
            f"diagonal embedding disagrees: {embedded!r} vs {collision!r}"
        )
    if w.shape[0] ** theta <= ENUMERATION_GUARD:
        e_d = _classical_exact(w, q, q_y, theta)
    else:
        values = []
        rng_master = seed
        for t in range(trials):
            rng = as_rng(derive_seed(rng_master, t))
            picks = rng.choice(w.shape[0], size=theta, p=q)
            p_y = w[picks].mean(axis=0)
            values.append(classical_relative_entropy(p_y, q_y).value)
        e_d = math.fsum(values) / trials
    return float(e_d), float((LOG2E / theta) * collision)


def _classical_exact(w: np.ndarray, q: np.ndarray, q_y: np.ndarray, theta: int) -> float:
    terms = []
    for combo in itertools.combinations_with_replacement(range(w.shape[0]), theta):
        weight = _multiset_weight(q, combo, theta)
        if weight == 0.0:
            continue
        p_y = w[list(combo)].mean(axis=0)
        terms.append(weight * classical_relative_entropy(p_y, q_y).value)
    return math.fsum(terms)
