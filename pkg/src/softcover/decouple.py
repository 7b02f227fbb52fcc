"""Haar-randomized decoupling experiments.

A state shared with an environment register is scrambled by a random
unitary and pushed through a channel; ideally the output then carries no
correlation with the environment.  The distance to the ideal product
target is measured in relative entropy, and its Haar average obeys a
product bound assembled from two collision divergences: one for the
channel through its Choi state, one for the input state itself.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .channels import QuantumChannel, apply, apply_partial, choi
from .entropic import minus_xlog2x, q2_tilde, relative_entropy, smooth_bound
from .errors import MalformedInputError, NumericalError, PreconditionError, SupportError
from .linalg import (
    LOG2E,
    BipartiteState,
    derive_seed,
    haar_unitary,
    partial_trace,
    psd_power,
)

_log = logging.getLogger(__name__)

RECONSTRUCT_TOL = 1e-10
TILDE_TOL = 1e-9
# Fraction of support-failed trials beyond which an average is meaningless.
EXCLUSION_LIMIT = 0.01


@dataclass(frozen=True)
class DecoupleInstance:
    """Input state, scrambling channel, and the derived reference objects.

    tau_ab is the channel's normalized Choi state and rho_be_target the
    ideal product of the Choi output marginal with the environment
    marginal; both are pinned to the channel and input at construction.
    """

    rho_ae: BipartiteState
    channel: QuantumChannel
    tau_ab: BipartiteState
    rho_be_target: BipartiteState

    def __post_init__(self):
        d_a, d_e = self.rho_ae.dims
        if self.channel.d_in != d_a:
            raise MalformedInputError(
                f"channel expects input dim {self.channel.d_in}, state has {d_a}"
            )
        ref = choi(self.channel)
        if np.max(np.abs(self.tau_ab.matrix - ref.matrix)) > RECONSTRUCT_TOL:
            raise MalformedInputError("stored Choi state does not match the channel")
        tau_b = apply(self.channel, np.eye(d_a, dtype=complex) / d_a)
        rho_e = partial_trace(self.rho_ae.matrix, (d_a, d_e), (1,))
        target = np.kron(tau_b.matrix, rho_e)
        if np.max(np.abs(self.rho_be_target.matrix - target)) > RECONSTRUCT_TOL:
            raise MalformedInputError(
                "stored target is not the Choi output marginal tensor the environment"
            )

    @property
    def dims(self) -> tuple:
        d_a, d_e = self.rho_ae.dims
        return d_a, self.channel.d_out, d_e


def build_instance(rho_ae, channel: QuantumChannel) -> DecoupleInstance:
    """Validate the shared state and assemble the derived reference objects."""
    if isinstance(rho_ae, BipartiteState):
        state = rho_ae
    else:
        m = np.asarray(rho_ae, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % channel.d_in:
            raise MalformedInputError(
                "cannot infer the environment dimension from the matrix shape"
            )
        state = BipartiteState(m, (channel.d_in, m.shape[0] // channel.d_in))
    if state.dims[0] != channel.d_in:
        raise MalformedInputError(
            f"channel expects input dim {channel.d_in}, state has {state.dims[0]}"
        )
    if abs(state.trace - 1.0) > 1e-9:
        raise PreconditionError(f"shared state must be normalized, trace {state.trace!r}")
    d_a, d_e = state.dims
    tau_ab = choi(channel)
    tau_b = apply(channel, np.eye(d_a, dtype=complex) / d_a)
    rho_e = partial_trace(state.matrix, (d_a, d_e), (1,))
    target = BipartiteState(np.kron(tau_b.matrix, rho_e), (channel.d_out, d_e))
    return DecoupleInstance(
        rho_ae=state, channel=channel, tau_ab=tau_ab, rho_be_target=target
    )


def decouple_trial(inst: DecoupleInstance, u) -> tuple:
    """Scramble with one unitary and score the output against the target.

    Returns the output joint state and its divergence from the target;
    the divergence is +inf when the output leaks outside the target's
    support, and the trial is logged rather than raised so a Monte Carlo
    sweep can apply its exclusion policy.
    """
    d_a, d_b, d_e = inst.dims
    u = np.asarray(u, dtype=complex)
    if u.shape != (d_a, d_a):
        raise MalformedInputError(f"unitary must be {d_a} x {d_a}, got {u.shape}")
    if np.max(np.abs(u @ u.conj().T - np.eye(d_a))) > 1e-9:
        raise PreconditionError("scrambling matrix is not unitary")
    big_u = np.kron(u, np.eye(d_e, dtype=complex))
    rotated = big_u @ inst.rho_ae.matrix @ big_u.conj().T
    out = apply_partial(inst.channel, rotated, (d_a, d_e), 0)
    sigma_be = BipartiteState(out, (d_b, d_e))
    res = relative_entropy(sigma_be.matrix, inst.rho_be_target.matrix)
    if not res.support_ok:
        _log.info("decoupling trial leaked outside the target support")
        return sigma_be, math.inf
    return sigma_be, res.value


def _tilde_conjugate(joint: np.ndarray, dims: tuple, marginal: np.ndarray) -> np.ndarray:
    quarter = psd_power(marginal, -0.25)
    op = np.kron(np.eye(dims[0], dtype=complex), quarter)
    return op @ joint @ op


def q2_factors(inst: DecoupleInstance) -> tuple:
    """The two collision terms of the product bound, channel then input.

    Each factor is computed twice, as a collision divergence against the
    identity-tensor-marginal reference and as the purity of the quarter
    conjugated operator, whose own marginal must be the square root of
    the original one; disagreement on either route fails the audit.
    """
    d_a, d_b, d_e = inst.dims
    factors = []
    for label, joint, dims in (
        ("channel", inst.tau_ab.matrix, (d_a, d_b)),
        ("input", inst.rho_ae.matrix, (d_a, d_e)),
    ):
        marginal = partial_trace(joint, dims, (1,))
        ref = np.kron(np.eye(dims[0], dtype=complex), marginal)
        try:
            direct = q2_tilde(joint, ref)
        except SupportError as exc:
            raise SupportError(f"{label} factor: {exc}") from exc
        tilde = _tilde_conjugate(joint, dims, marginal)
        purity = float(np.real(np.trace(tilde @ tilde)))
        if abs(purity - direct) > TILDE_TOL * max(1.0, abs(direct)):
            raise NumericalError(
                f"{label} factor routes disagree: {direct!r} vs purity {purity!r}"
            )
        tilde_marg = partial_trace(tilde, dims, (1,))
        root = psd_power(marginal, 0.5)
        if np.max(np.abs(tilde_marg - root)) > TILDE_TOL:
            raise NumericalError(
                f"{label} factor: conjugated marginal is not the square root"
            )
        factors.append(direct)
    return factors[0], factors[1]


def q2_product_bound(inst: DecoupleInstance) -> float:
    """Bound on the Haar-expected divergence from the target."""
    chan, inp = q2_factors(inst)
    return LOG2E * chan * inp


def additive_slack(eps: float, d_b: int, d_e: int) -> float:
    """Continuity overhead of the smoothed bound at width eps."""
    if not 0.0 <= eps < 1.0 / 16.0:
        raise PreconditionError(f"eps must lie in [0, 1/16), got {eps}")
    return (
        12.0 * eps * math.log2(d_b * d_e)
        + minus_xlog2x(8.0 * eps)
        + minus_xlog2x(4.0 * eps)
    )


def theorem5_terms(inst: DecoupleInstance, eps: float) -> float:
    """Smoothed decoupling bound at width eps.

    The two conditional min-entropies enter through certified lower
    bounds, so the exponential term is a valid upper bound; eps = 0
    reduces to the exact min-entropies with no continuity overhead.
    """
    if not 0.0 <= eps < 1.0 / 16.0:
        raise PreconditionError(f"eps must lie in [0, 1/16), got {eps}")
    _, d_b, d_e = inst.dims
    h_chan = smooth_bound("h_min_eps", inst.tau_ab, None, eps).bound_value
    h_input = smooth_bound("h_min_eps", inst.rho_ae, None, eps).bound_value
    return LOG2E * 2.0 ** (-h_chan - h_input) + additive_slack(eps, d_b, d_e)


def mc_expectation(inst: DecoupleInstance, trials: int, seed) -> tuple:
    """Haar Monte Carlo of the trial divergence, with the exclusion policy.

    Support-failed trials are dropped and logged; once they pass one
    percent of the batch the average is declared invalid.  The sample
    mean is also checked against the product bound within three standard
    errors before being returned.
    """
    if trials < 2:
        raise PreconditionError("need at least two trials for a standard error")
    d_a = inst.dims[0]
    values = []
    excluded = 0
    for k in range(trials):
        _, value = decouple_trial(inst, haar_unitary(d_a, derive_seed(seed, k)))
        if math.isinf(value):
            excluded += 1
        else:
            values.append(value)
    if not values:
        raise NumericalError("every trial leaked outside the target support")
    if excluded > EXCLUSION_LIMIT * trials:
        raise NumericalError(
            f"{excluded} of {trials} trials excluded for support failure; "
            "instance flagged invalid"
        )
    if excluded:
        _log.info("excluded %d of %d decoupling trials", excluded, trials)
    n = len(values)
    mean = math.fsum(values) / n
    if n > 1:
        var = math.fsum((v - mean) ** 2 for v in values) / (n * (n - 1))
        stderr = math.sqrt(var)
    else:
        stderr = 0.0
    bound = q2_product_bound(inst)
    if mean > bound + 3.0 * stderr + 1e-9:
        raise NumericalError(
            f"sample mean {mean!r} exceeds the product bound {bound!r} "
            f"by more than three standard errors"
        )
    return mean, stderr


def haar_mean_sigma_be(inst: DecoupleInstance, draws: int, master_seed: int):
    """Entrywise mean and standard error of the output joint state over
    Haar draws, for moment checks against the ideal target."""
    if draws < 2:
        raise PreconditionError("need at least two draws for a standard error")
    d_a = inst.dims[0]
    first = None
    second = None
    for k in range(draws):
        sigma, _ = decouple_trial(inst, haar_unitary(d_a, derive_seed(master_seed, k)))
        parts = np.stack([sigma.matrix.real, sigma.matrix.imag])
        if first is None:
            first = np.zeros_like(parts)
            second = np.zeros_like(parts)
        first += parts
        second += parts**2
    mean = first / draws
    var = (second / draws - mean**2) / (draws - 1)
    se = np.sqrt(np.maximum(var, 0.0))
    return mean[0] + 1j * mean[1], se[0] + 1j * se[1]
