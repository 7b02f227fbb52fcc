"""Randomized covering experiments for quantum channels.

Pipeline: purify the input state, push it through the channel's dilation
to get the joint output/reference state and its block decomposition,
scramble the reference side with a Haar unitary, measure a fixed
rank-theta block projection, and measure how far the measured joint
state sits from the ideal product in relative entropy.  The expected
divergence over the unitary draw is bounded by the collision-type
divergence of the joint state, and the per-outcome blocks realize
small covering codes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channels import QuantumChannel, apply, stinespring
from .entropic import (
    classical_relative_entropy,
    coherent_information,
    h_min,
    minus_xlog2x,
    q2_tilde,
    relative_entropy,
    smooth_bound,
)
from .errors import (
    MalformedInputError,
    NumericalError,
    PreconditionError,
    SupportError,
)
from .linalg import (
    LOG2E,
    BipartiteState,
    DensityOperator,
    as_matrix,
    derive_seed,
    haar_unitary,
    psd_power,
    swap_bipartite,
)

_log = logging.getLogger(__name__)

RECONSTRUCT_TOL = 1e-10
CHAIN_TOL = 1e-8
# Rank assertions count eigenvalues above this fraction of the largest.
RANK_CUTOFF = 1e-9


def _frozen(m: np.ndarray) -> np.ndarray:
    out = np.array(m, dtype=complex)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class QCoverInstance:
    """One covering setup: input state, channel, and derived joint data.

    ``omega`` maps a reference-basis index pair (i, j) to the channel
    image of sqrt(rho_A) |i><j| sqrt(rho_A).  The off-diagonal blocks are
    not Hermitian (omega[i, j] is the adjoint of omega[j, i]), so they
    are stored as plain matrices.
    """

    rho_a: DensityOperator
    channel: QuantumChannel
    rho_br: BipartiteState
    omega: dict
    rho_b: DensityOperator

    def __post_init__(self):
        d = self.rho_a.dim
        d_b = self.channel.d_out
        block_sum = sum(self.omega[i, i] for i in range(d))
        if np.max(np.abs(block_sum - self.rho_b.matrix)) > RECONSTRUCT_TOL:
            raise MalformedInputError("diagonal blocks do not sum to the output state")
        rebuilt = np.zeros((d_b * d, d_b * d), dtype=complex)
        for (i, j), block in self.omega.items():
            e_ij = np.zeros((d, d), dtype=complex)
            e_ij[i, j] = 1.0
            rebuilt += np.kron(block, e_ij)
        if np.max(np.abs(rebuilt - self.rho_br.matrix)) > RECONSTRUCT_TOL:
            raise MalformedInputError("blocks do not reconstruct the joint state")
        if abs(self.rho_br.trace - 1.0) > RECONSTRUCT_TOL:
            raise MalformedInputError("joint state must have unit trace")

    @property
    def dim(self) -> int:
        return self.rho_a.dim


@dataclass(frozen=True)
class BlockCode:
    """Haar unitary plus a fixed rank-theta block resolution of identity."""

    u: np.ndarray
    projectors: tuple
    theta: int
    m_count: int

    def __post_init__(self):
        object.__setattr__(self, "u", _frozen(self.u))
        object.__setattr__(self, "projectors", tuple(_frozen(p) for p in self.projectors))
        d = self.u.shape[0]
        if self.theta * self.m_count != d:
            raise MalformedInputError("projector ranks must tile the dimension exactly")
        if np.max(np.abs(self.u.conj().T @ self.u - np.eye(d))) > 1e-10:
            raise MalformedInputError("code matrix is not unitary")
        total = sum(self.projectors)
        if np.max(np.abs(total - np.eye(d))) != 0.0:
            raise MalformedInputError("projectors must sum to identity exactly")
        for p in self.projectors:
            if round(float(np.real(np.trace(p)))) != self.theta:
                raise MalformedInputError("every projector must have rank theta")


@dataclass(frozen=True)
class CoverOutcome:
    """Measured joint state and its block decomposition for one draw.

    Beyond the decomposition itself the outcome carries the context
    needed to certify the extracted block: the rank-theta input-side
    realizations whose channel images the blocks are, the block rank
    budget, and the covering target.
    """

    sigma_bm: BipartiteState
    block_weights: tuple
    block_states: tuple
    d_value: float
    block_inputs: tuple = field(repr=False, default=())
    theta: int = 0
    rho_b: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        weights = np.asarray(self.block_weights, dtype=float)
        if abs(float(weights.sum()) - 1.0) > RECONSTRUCT_TOL:
            raise MalformedInputError("block weights must sum to one")
        d_b, m = self.sigma_bm.dims
        rebuilt = np.zeros((d_b * m, d_b * m), dtype=complex)
        for k, (w, s) in enumerate(zip(self.block_weights, self.block_states)):
            e_kk = np.zeros((m, m), dtype=complex)
            e_kk[k, k] = 1.0
            rebuilt += w * np.kron(s, e_kk)
        if np.max(np.abs(rebuilt - self.sigma_bm.matrix)) > RECONSTRUCT_TOL:
            raise MalformedInputError("weights and states do not rebuild the joint state")


def build_instance(rho_a, channel: QuantumChannel) -> QCoverInstance:
    """Assemble the covering instance for an input state and channel.

    The joint state is built from the channel's dilation: the column
    W sqrt(rho_A) |i>, reshaped to (output, environment), gives the
    factor V_i, and block (i, j) is V_i V_j^dag.
    """
    rho_a = rho_a if isinstance(rho_a, DensityOperator) else DensityOperator(as_matrix(rho_a))
    d = rho_a.dim
    if channel.d_in != d:
        raise MalformedInputError(
            f"channel expects input dimension {channel.d_in}, state has {d}"
        )
    if abs(rho_a.trace - 1.0) > 1e-9:
        raise PreconditionError("input state must be normalized")
    d_b = channel.d_out
    env = channel.env_dim
    w = stinespring(channel)
    cols = (w @ psd_power(rho_a.matrix, 0.5)).reshape(d_b, env, d)
    omega = {}
    for i in range(d):
        for j in range(d):
            omega[i, j] = _frozen(cols[:, :, i] @ cols[:, :, j].conj().T)
    joint = np.einsum("bei,cej->bicj", cols, cols.conj()).reshape(d_b * d, d_b * d)
    rho_b = apply(channel, rho_a)
    return QCoverInstance(
        rho_a=rho_a,
        channel=channel,
        rho_br=BipartiteState(joint, (d_b, d)),
        omega=omega,
        rho_b=rho_b,
    )


def _omega_tensor(inst: QCoverInstance) -> np.ndarray:
    d = inst.dim
    d_b = inst.channel.d_out
    t = np.empty((d, d, d_b, d_b), dtype=complex)
    for (i, j), block in inst.omega.items():
        t[i, j] = block
    return t


def q2_target(inst: QCoverInstance) -> float:
    """Collision-type divergence of the joint state from rho_B (x) I.

    Computed twice: directly from the joint state, and as the block sum
    Tr[omega_ij X omega_ji X] with X the support inverse square root of
    rho_B.  The routes must agree to 1e-9.
    """
    d = inst.dim
    direct = q2_tilde(inst.rho_br.matrix, np.kron(inst.rho_b.matrix, np.eye(d)))
    x = psd_power(inst.rho_b.matrix, -0.5)
    t = _omega_tensor(inst)
    blocks = np.einsum("ijab,bc,jicd,da->", t, x, t, x)
    blocks = float(np.real(blocks))
    if abs(direct - blocks) > 1e-9 * max(1.0, abs(direct)):
        raise NumericalError(
            f"collision divergence routes disagree: direct {direct!r}, blocks {blocks!r}"
        )
    return direct


def sample_block_code(d: int, theta: int, seed) -> BlockCode:
    """Haar unitary with computational-basis block projectors of rank theta."""
    if d < 1 or theta < 1 or d % theta:
        raise PreconditionError(f"theta must divide the dimension, got {theta} and {d}")
    m_count = d // theta
    projectors = []
    for m in range(m_count):
        p = np.zeros((d, d), dtype=complex)
        idx = range(m * theta, (m + 1) * theta)
        p[idx, idx] = 1.0
        projectors.append(p)
    return BlockCode(
        u=haar_unitary(d, seed),
        projectors=tuple(projectors),
        theta=theta,
        m_count=m_count,
    )


def simulate(inst: QCoverInstance, code: BlockCode) -> CoverOutcome:
    """Run one draw: measure the scrambled reference, collect the blocks.

    Validates the decomposition identity on every call: the divergence
    to the ideal product equals the weighted block divergences plus the
    divergence of the weights from uniform, to 1e-8.
    """
    d = inst.dim
    if code.u.shape[0] != d:
        raise MalformedInputError(
            f"code dimension {code.u.shape[0]} does not match instance dimension {d}"
        )
    d_b = inst.channel.d_out
    m_count = code.m_count
    theta = code.theta
    t = _omega_tensor(inst)
    sqrt_a = psd_power(inst.rho_a.matrix, 0.5)

    weights = []
    states = []
    inputs = []
    sigma = np.zeros((d_b * m_count, d_b * m_count), dtype=complex)
    for m in range(m_count):
        rows = code.u[m * theta : (m + 1) * theta, :]
        a_m = rows.conj().T @ rows
        block = np.einsum("ijab,ji->ab", t, a_m)
        block = (block + block.conj().T) / 2.0
        w = float(np.real(np.trace(block)))
        source = sqrt_a @ a_m.T @ sqrt_a
        if w > 1e-14:
            states.append(block / w)
            inputs.append(source / w)
        else:
            w = 0.0
            states.append(np.zeros_like(block))
            inputs.append(np.zeros_like(source))
        weights.append(w)
        e_mm = np.zeros((m_count, m_count), dtype=complex)
        e_mm[m, m] = 1.0
        sigma += np.kron(block, e_mm)

    rho_bm = np.kron(inst.rho_b.matrix, np.eye(m_count) / m_count)
    res = relative_entropy(sigma, rho_bm)
    if not res.support_ok:
        raise SupportError("measured state leaked outside the support of the target")
    d_value = res.value

    per_block = 0.0
    for w, s in zip(weights, states):
        if w <= 0.0:
            continue
        term = relative_entropy(s, inst.rho_b.matrix)
        if not term.support_ok:
            raise SupportError("a block state leaked outside the support of the target")
        per_block += w * term.value
    w_arr = np.asarray(weights)
    label_term = classical_relative_entropy(w_arr, np.full(m_count, 1.0 / m_count)).value
    if abs(d_value - (per_block + label_term)) > CHAIN_TOL:
        raise NumericalError(
            f"block decomposition identity violated: {d_value!r} vs "
            f"{per_block + label_term!r}"
        )

    return CoverOutcome(
        sigma_bm=BipartiteState(sigma, (d_b, m_count)),
        block_weights=tuple(weights),
        block_states=tuple(_frozen(s) for s in states),
        d_value=d_value,
        block_inputs=tuple(_frozen(s) for s in inputs),
        theta=theta,
        rho_b=_frozen(inst.rho_b.matrix),
    )


def sigma_bm_projected(inst: QCoverInstance, code: BlockCode) -> np.ndarray:
    """Alternate route to the measured joint state, for cross-checks:
    project the reference side of the joint state directly and trace it
    out, block by block."""
    d = inst.dim
    d_b = inst.channel.d_out
    m_count = code.m_count
    joint = inst.rho_br.matrix.reshape(d_b, d, d_b, d)
    out = np.zeros((d_b * m_count, d_b * m_count), dtype=complex)
    for m in range(m_count):
        pu = code.projectors[m] @ code.u
        chunk = np.einsum("ri,bicj,sj->brcs", pu, joint, pu.conj())
        block = np.trace(chunk, axis1=1, axis2=3)
        e_mm = np.zeros((m_count, m_count), dtype=complex)
        e_mm[m, m] = 1.0
        out += np.kron(block, e_mm)
    return out


def _matrix_rank(m: np.ndarray) -> int:
    evals = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
    top = float(evals[-1])
    if top <= 0.0:
        return 0
    return int(np.count_nonzero(evals > RANK_CUTOFF * top))


def extract_block(outcome: CoverOutcome):
    """Pick the block closest to the covering target in relative entropy.

    Returns (state, m).  Certifies that the chosen block is a valid
    small covering code: its divergence never exceeds the draw's total
    (every term in the decomposition is non-negative), and the
    input-side realization whose channel image it is uses at most theta
    directions.  The support of the channel image itself can be larger
    whenever the channel increases rank, so the code-size check lives on
    the input side.
    """
    divergences = []
    for w, s in zip(outcome.block_weights, outcome.block_states):
        if w > 0.0:
            divergences.append(relative_entropy(s, outcome.rho_b).value)
        else:
            divergences.append(math.inf)
    m = int(np.argmin(divergences))
    if divergences[m] > outcome.d_value + 1e-9:
        raise NumericalError(
            f"best block divergence {divergences[m]!r} exceeds the total {outcome.d_value!r}"
        )
    rank = _matrix_rank(outcome.block_inputs[m])
    if rank > outcome.theta:
        raise NumericalError(
            f"input realization has rank {rank}, budget is {outcome.theta}"
        )
    return DensityOperator(outcome.block_states[m]), m


def mc_expectation(inst: QCoverInstance, theta: int, trials: int, master_seed: int):
    """Sample mean and standard error of the divergence over Haar draws.

    Draws whose measured state leaks outside the target's support are
    discarded and redrawn from a reserved seed stream, with the count
    logged; the estimate stays unbiased conditional on support.
    """
    if trials < 2:
        raise PreconditionError("need at least two trials for a standard error")
    d = inst.dim
    values = []
    aborts = 0
    for k in range(trials):
        seed = derive_seed(master_seed, k)
        while True:
            try:
                outcome = simulate(inst, sample_block_code(d, theta, seed))
            except SupportError:
                aborts += 1
                seed = derive_seed(master_seed, trials + aborts)
                continue
            break
        values.append(outcome.d_value)
    if aborts:
        _log.info("resampled %d covering draws on support failure", aborts)
    mean = math.fsum(values) / trials
    var = math.fsum((v - mean) ** 2 for v in values) / (trials * (trials - 1))
    return mean, math.sqrt(var)


def expected_divergence_bound(inst: QCoverInstance, theta: int) -> float:
    """Bound on the expected divergence of one draw at block rank theta."""
    return (LOG2E / theta) * q2_target(inst)


@dataclass(frozen=True)
class Theorem1Terms:
    log_theta_bound: float
    delta_bound: float
    converse_log_theta: float


def _state_rb(inst: QCoverInstance) -> BipartiteState:
    d = inst.dim
    d_b = inst.channel.d_out
    flipped = swap_bipartite(inst.rho_br.matrix, (d_b, d))
    return BipartiteState(flipped, (d, d_b))


def theorem1_terms(inst: QCoverInstance, eps: float, eta: float) -> Theorem1Terms:
    """One-shot covering terms at smoothing eps and slack eta.

    The code-size bound uses the certified lower bound on the smoothed
    min-entropy of the reference conditioned on the output, so the
    reported value is valid though possibly loose.  The converse field
    evaluates the unsmoothed min-entropy at this instance's input state
    only (the true converse also optimizes over inputs).
    """
    if not 0.0 <= eps < 0.125:
        raise PreconditionError(f"eps must lie in [0, 1/8), got {eps}")
    if not 0.0 < eta < 0.125:
        raise PreconditionError(f"eta must lie in (0, 1/8), got {eta}")
    state = _state_rb(inst)
    cert = smooth_bound("h_min_eps", state, None, eps)
    log_theta = max(0.0, -cert.bound_value - math.log2(eta))
    d_b = inst.channel.d_out
    delta = LOG2E * eta + 6.0 * eps * math.log2(d_b) + minus_xlog2x(4.0 * eps) + minus_xlog2x(2.0 * eps)
    converse = max(0.0, -h_min(state, cond=1))
    return Theorem1Terms(
        log_theta_bound=float(log_theta),
        delta_bound=float(delta),
        converse_log_theta=float(converse),
    )


def coherent_info_rate(inst: QCoverInstance) -> float:
    """Asymptotic covering rate of this instance's joint state."""
    return coherent_information(inst.rho_br, target=0)


def per_copy_bound(inst: QCoverInstance, n: int, rate_offset: float = 0.5) -> float:
    """Per-copy expected-divergence bound for n independent copies.

    The block rank grows as ceil(2^(n r)) with r the coherent-information
    rate plus the offset.  The collision divergence of the n-fold state
    is computed on the explicit tensor power, so n stays small.
    """
    if not 1 <= n <= 3:
        raise PreconditionError(f"tensor powers are built explicitly; n must be 1..3, got {n}")
    d = inst.dim
    rate = coherent_info_rate(inst) + rate_offset
    grid = 2.0 ** (n * rate)
    # the code size is an integer ceiling; ulp-level rounding in the
    # entropy must not bump it past an exactly attained power
    if abs(grid - round(grid)) <= 1e-12 * max(1.0, grid):
        grid = float(round(grid))
    theta_n = math.ceil(grid)
    joint = inst.rho_br.matrix
    ref = np.kron(inst.rho_b.matrix, np.eye(d))
    joint_n = joint
    ref_n = ref
    for _ in range(n - 1):
        joint_n = np.kron(joint_n, joint)
        ref_n = np.kron(ref_n, ref)
    q2_n = q2_tilde(joint_n, ref_n)
    return (LOG2E / theta_n) * q2_n / n


def haar_mean_sigma_bm(inst: QCoverInstance, theta: int, draws: int, master_seed: int):
    """Entrywise mean and standard error of the measured joint state
    over Haar draws, for moment checks against the ideal product."""
    if draws < 2:
        raise PreconditionError("need at least two draws for a standard error")
    d = inst.dim
    first = None
    second = None
    for k in range(draws):
        outcome = simulate(inst, sample_block_code(d, theta, derive_seed(master_seed, k)))
        s = outcome.sigma_bm.matrix
        parts = np.stack([s.real, s.imag])
        if first is None:
            first = np.zeros_like(parts)
            second = np.zeros_like(parts)
        first += parts
        second += parts**2
    mean = first / draws
    var = (second / draws - mean**2) / (draws - 1)
    se = np.sqrt(np.maximum(var, 0.0))
    return mean[0] + 1j * mean[1], se[0] + 1j * se[1]


def haar_moment_estimates(d: int, theta: int, draws: int, master_seed: int):
    """Monte-Carlo estimates of the two second-moment scalars of a
    conjugated rank-theta projector, with standard errors.

    Uses entries of A = U^dag P U: the cross moment E[|A[1,0]|^2] is the
    off-target scalar and E[A[0,0] A[1,1]] is the aligned one.
    """
    if d < 2:
        raise PreconditionError("need dimension at least 2 to form both moments")
    if draws < 2:
        raise PreconditionError("need at least two draws for a standard error")
    p = np.zeros((d, d), dtype=complex)
    idx = range(theta)
    p[idx, idx] = 1.0
    alpha_samples = np.empty(draws)
    beta_samples = np.empty(draws)
    for k in range(draws):
        u = haar_unitary(d, derive_seed(master_seed, k))
        a = u.conj().T @ p @ u
        alpha_samples[k] = float(np.abs(a[1, 0]) ** 2)
        beta_samples[k] = float(np.real(a[0, 0] * a[1, 1]))
    alpha_hat = float(alpha_samples.mean())
    beta_hat = float(beta_samples.mean())
    alpha_se = float(alpha_samples.std(ddof=1) / math.sqrt(draws))
    beta_se = float(beta_samples.std(ddof=1) / math.sqrt(draws))
    return alpha_hat, alpha_se, beta_hat, beta_se


def haar_moment_formulas(d: int, theta: int) -> tuple[float, float]:
    """Exact second-moment scalars for a rank-theta projector at dimension d."""
    denom = d * (d * d - 1.0)
    alpha = (d * theta - theta * theta) / denom
    beta = (d * theta * theta - theta) / denom
    return alpha, beta
