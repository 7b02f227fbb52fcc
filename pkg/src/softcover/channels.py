"""Channel representations: Kraus, Stinespring, Choi, and classical-quantum maps."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedInputError, PreconditionError
from .linalg import (
    BipartiteState,
    DensityOperator,
    as_matrix,
    as_rng,
    eigh_sorted,
    partial_trace,
    psd_power,
    support_cutoff,
)

__all__ = [
    "QuantumChannel",
    "CQEnsemble",
    "apply",
    "apply_partial",
    "stinespring",
    "choi",
    "channel_from_choi",
    "identity_channel",
    "depolarizing_channel",
    "random_channel",
    "cq_as_channel",
    "channel_to_json",
    "channel_from_json",
    "ensemble_to_json",
    "ensemble_from_json",
]

TP_TOL = 1e-10


@dataclass(frozen=True)
class QuantumChannel:
    """Completely positive trace-preserving map in Kraus form.

    Complete positivity is automatic from the representation; trace
    preservation (sum K^dag K = I within 1e-10) is enforced on construction.
    """

    kraus: tuple
    d_in: int = field(init=False)
    d_out: int = field(init=False)

    def __post_init__(self):
        if not self.kraus:
            raise MalformedInputError("a channel needs at least one Kraus operator")
        mats = tuple(as_matrix(k) for k in self.kraus)
        d_out, d_in = mats[0].shape
        for m in mats:
            if m.shape != (d_out, d_in):
                raise MalformedInputError("Kraus operators must share one shape")
            if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
                raise MalformedInputError("Kraus operator contains non-finite entries")
            m.setflags(write=False)
        total = sum(m.conj().T @ m for m in mats)
        dev = float(np.max(np.abs(total - np.eye(d_in))))
        if dev > TP_TOL:
            raise MalformedInputError(
                f"channel is not trace preserving: |sum K^dag K - I| = {dev:.3e}"
            )
        object.__setattr__(self, "kraus", mats)
        object.__setattr__(self, "d_in", int(d_in))
        object.__setattr__(self, "d_out", int(d_out))

    @property
    def env_dim(self) -> int:
        return len(self.kraus)

    def __repr__(self):
        return f"QuantumChannel(d_in={self.d_in}, d_out={self.d_out}, env_dim={self.env_dim})"


@dataclass(frozen=True)
class CQEnsemble:
    """Classical symbols with a pmf and one quantum state per symbol."""

    alphabet: tuple
    pmf: np.ndarray
    states: tuple

    def __post_init__(self):
        alphabet = tuple(self.alphabet)
        pmf = np.asarray(self.pmf, dtype=float).reshape(-1)
        states = tuple(as_matrix(s) for s in self.states)
        if not (len(alphabet) == pmf.size == len(states)):
            raise MalformedInputError("alphabet, pmf, and states must have equal length")
        if len(set(alphabet)) != len(alphabet):
            raise MalformedInputError("alphabet symbols must be distinct")
        if np.any(pmf < 0.0) or abs(float(np.sum(pmf)) - 1.0) > 1e-12:
            raise MalformedInputError("pmf entries must be nonnegative and sum to 1")
        d = states[0].shape[0]
        for s in states:
            dop = DensityOperator(s)
            if dop.dim != d or not dop.normalized:
                raise MalformedInputError("ensemble states must be normalized, equal dim")
            s.setflags(write=False)
        pmf.setflags(write=False)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states[0].shape[0]

    @property
    def size(self) -> int:
        return len(self.alphabet)

    def average_state(self) -> np.ndarray:
        return sum(p * s for p, s in zip(self.pmf, self.states))

    def __repr__(self):
        return f"CQEnsemble(size={self.size}, dim={self.dim})"


# ---------------------------------------------------------------------------
# application


def apply_matrix(ch: QuantumChannel, m) -> np.ndarray:
    """Kraus action on a raw matrix; no density-operator wrapping."""
    a = as_matrix(m)
    if a.shape != (ch.d_in, ch.d_in):
        raise MalformedInputError(f"input dim {a.shape} does not match d_in={ch.d_in}")
    return sum(k @ a @ k.conj().T for k in ch.kraus)


def apply(ch: QuantumChannel, rho) -> DensityOperator:
    """Channel output as a density operator; trace and positivity preserved."""
    return DensityOperator(apply_matrix(ch, rho))


def apply_partial(ch: QuantumChannel, m, dims, subsystem: int) -> np.ndarray:
    """Act with the channel on one factor of a bipartite operator."""
    a = as_matrix(m)
    da, db = int(dims[0]), int(dims[1])
    if a.shape != (da * db, da * db):
        raise MalformedInputError("operator shape does not match dims")
    if subsystem == 0:
        if ch.d_in != da:
            raise MalformedInputError("channel input dim does not match subsystem 0")
        full = [np.kron(k, np.eye(db, dtype=complex)) for k in ch.kraus]
    elif subsystem == 1:
        if ch.d_in != db:
            raise MalformedInputError("channel input dim does not match subsystem 1")
        full = [np.kron(np.eye(da, dtype=complex), k) for k in ch.kraus]
    else:
        raise PreconditionError("subsystem must be 0 or 1")
    return sum(k @ a @ k.conj().T for k in full)


# ---------------------------------------------------------------------------
# representations


def stinespring(ch: QuantumChannel) -> np.ndarray:
    """Isometry W: d_in -> d_out (x) env with Tr_env[W rho W^dag] = ch(rho).

    Output index ordering is (out, env): row (b, e) holds K_e[b, :].
    """
    w = np.zeros((ch.d_out * ch.env_dim, ch.d_in), dtype=complex)
    for e, k in enumerate(ch.kraus):
        for b in range(ch.d_out):
            w[b * ch.env_dim + e, :] = k[b, :]
    return w


def choi(ch: QuantumChannel) -> BipartiteState:
    """Normalized Choi state on input (x) output."""
    stack = np.stack(ch.kraus)  # (env, out, in)
    j = np.einsum("eai,ebj->iajb", stack, stack.conj()) / ch.d_in
    d = ch.d_in * ch.d_out
    return BipartiteState(j.reshape(d, d), (ch.d_in, ch.d_out))


def channel_from_choi(state: BipartiteState) -> QuantumChannel:
    """Rebuild a Kraus channel from its normalized Choi state."""
    if len(state.dims) != 2:
        raise MalformedInputError("Choi state must be bipartite")
    d_in, d_out = state.dims
    evals, vecs = eigh_sorted(state.matrix * d_in)
    cut = support_cutoff(evals.size, float(evals[-1]) if evals.size else 0.0)
    kraus = []
    for mu, v in zip(evals, vecs.T):
        if mu <= cut:
            continue
        # vector index is (i, a): Kraus entry [a, i]
        kraus.append(math.sqrt(float(mu)) * v.reshape(d_in, d_out).T)
    return QuantumChannel(tuple(kraus))


# ---------------------------------------------------------------------------
# constructors


def identity_channel(d: int) -> QuantumChannel:
    return QuantumChannel((np.eye(d, dtype=complex),))


def _weyl_unitaries(d: int):
    omega = np.exp(2j * np.pi / d)
    shift = np.zeros((d, d), dtype=complex)
    for i in range(d):
        shift[(i + 1) % d, i] = 1.0
    clock = np.diag(omega ** np.arange(d))
    for a in range(d):
        for b in range(d):
            yield np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)


def depolarizing_channel(d: int, p: float = 1.0) -> QuantumChannel:
    """(1-p) id + p (Tr[.] I/d), in the Weyl-unitary Kraus form."""
    if not (0.0 <= p <= 1.0):
        raise PreconditionError(f"p must lie in [0, 1], got {p}")
    kraus = []
    for idx, u in enumerate(_weyl_unitaries(d)):
        weight = 1.0 - p + p / d**2 if idx == 0 else p / d**2
        if weight > 0.0:
            kraus.append(math.sqrt(weight) * u)
    return QuantumChannel(tuple(kraus))


def random_channel(d_in: int, d_out: int, n_kraus: int, seed=None) -> QuantumChannel:
    """Haar-style random channel from an isometry into out (x) env."""
    if n_kraus < 1 or d_out * n_kraus < d_in:
        raise PreconditionError("need d_out * n_kraus >= d_in for an isometry")
    rng = as_rng(seed)
    g = rng.normal(size=(d_out * n_kraus, d_in)) + 1j * rng.normal(size=(d_out * n_kraus, d_in))
    w = g @ psd_power(g.conj().T @ g, -0.5)
    kraus = tuple(w.reshape(d_out, n_kraus, d_in)[:, e, :] for e in range(n_kraus))
    return QuantumChannel(kraus)


def cq_as_channel(ens: CQEnsemble) -> QuantumChannel:
    """Channel sending |x><x| to rho_x; off-diagonal inputs are dephased."""
    kraus = []
    for x_index, s in enumerate(ens.states):
        evals, vecs = eigh_sorted(s)
        cut = support_cutoff(evals.size, float(evals[-1]))
        basis_bra = np.zeros((1, ens.size), dtype=complex)
        basis_bra[0, x_index] = 1.0
        for mu, v in zip(evals, vecs.T):
            if mu <= cut:
                continue
            kraus.append(math.sqrt(float(mu)) * v.reshape(-1, 1) @ basis_bra)
    return QuantumChannel(tuple(kraus))


# ---------------------------------------------------------------------------
# serialization


def _matrix_to_json(m: np.ndarray):
    return [np.real(m).tolist(), np.imag(m).tolist()]


def _matrix_from_json(pair) -> np.ndarray:
    re, im = pair
    return np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)


def channel_to_json(ch: QuantumChannel) -> str:
    doc = {
        "d_in": ch.d_in,
        "d_out": ch.d_out,
        "kraus": [_matrix_to_json(k) for k in ch.kraus],
    }
    return json.dumps(doc)


def channel_from_json(text: str) -> QuantumChannel:
    doc = json.loads(text)
    ch = QuantumChannel(tuple(_matrix_from_json(pair) for pair in doc["kraus"]))
    if ch.d_in != doc["d_in"] or ch.d_out != doc["d_out"]:
        raise MalformedInputError("declared channel dims do not match the Kraus data")
    return ch


def ensemble_to_json(ens: CQEnsemble) -> str:
    doc = {
        "alphabet": list(ens.alphabet),
        "pmf": list(map(float, ens.pmf)),
        "states": [_matrix_to_json(s) for s in ens.states],
    }
    return json.dumps(doc)


def ensemble_from_json(text: str) -> CQEnsemble:
    doc = json.loads(text)
    return CQEnsemble(
        tuple(doc["alphabet"]),
        np.asarray(doc["pmf"], dtype=float),
        tuple(_matrix_from_json(pair) for pair in doc["states"]),
    )
