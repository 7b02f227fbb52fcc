"""Dense linear algebra primitives for finite dimensional quantum states.

All operators are explicit complex numpy arrays on spaces of dimension
d <= 64.  Every spectral routine funnels through numpy's ``eigh`` so that
support detection follows one uniform cutoff policy: an eigenvalue counts
as nonzero when it exceeds ``dim * machine_eps * lambda_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MalformedInputError, PreconditionError

LOG2E = math.log2(math.e)
LN2 = math.log(2.0)

# Relative tolerance used when checking that one support contains another.
SUPPORT_LEAK_TOL = 1e-9

_EPS = float(np.finfo(float).eps)


def support_cutoff(dim: int, lam_max: float) -> float:
    """Eigenvalues at or below this threshold are treated as exact zeros."""
    return dim * _EPS * max(lam_max, 0.0)


def as_matrix(x) -> np.ndarray:
    """Pull a plain complex matrix out of any operator-like object."""
    if isinstance(x, np.ndarray):
        return np.asarray(x, dtype=complex)
    for attr in ("matrix", "entries"):
        m = getattr(x, attr, None)
        if m is not None:
            return np.asarray(m, dtype=complex)
    return np.asarray(x, dtype=complex)


def _square_complex(entries) -> np.ndarray:
    try:
        m = as_matrix(entries)
    except (TypeError, ValueError) as exc:
        raise MalformedInputError(f"cannot interpret input as a matrix: {exc}") from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise MalformedInputError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise MalformedInputError("matrix contains non-finite entries")
    return m


@dataclass(frozen=True)
class HermitianOperator:
    """Square complex matrix forced to exact Hermitian symmetry on construction.

    ``herm_tol`` bounds the allowed entrywise deviation |H - H^dag| of the
    input; anything worse is rejected rather than silently symmetrized.
    """

    entries: np.ndarray
    herm_tol: float = 1e-8

    def __post_init__(self):
        m = _square_complex(self.entries)
        dev = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        if dev > self.herm_tol:
            raise MalformedInputError(
                f"matrix deviates from Hermitian symmetry by {dev:.3e} > {self.herm_tol:.3e}"
            )
        m = (m + m.conj().T) / 2.0
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.entries


class DensityOperator:
    """Positive semidefinite operator with trace in (0, 1].

    Sub-normalized operators (trace < 1) are first-class citizens; the
    ``normalized`` flag records whether the trace is 1 up to 1e-9.
    """

    def __init__(self, entries, herm_tol: float = 1e-8):
        op = entries if isinstance(entries, HermitianOperator) else HermitianOperator(
            entries, herm_tol
        )
        evals = np.linalg.eigvalsh(op.entries)
        lam_max = float(evals[-1])
        cutoff = support_cutoff(op.dim, lam_max)
        if float(evals[0]) < -100.0 * max(cutoff, 1e-300):
            raise MalformedInputError(
                f"matrix is not positive semidefinite (min eigenvalue {evals[0]:.3e})"
            )
        tr = float(np.real(np.trace(op.entries)))
        if not (0.0 < tr <= 1.0 + 1e-9):
            raise MalformedInputError(f"trace {tr!r} outside (0, 1]")
        self.op = op
        self.trace = tr
        self.normalized = abs(tr - 1.0) <= 1e-9
        self.support_rank = int(np.count_nonzero(evals > cutoff))

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def matrix(self) -> np.ndarray:
        return self.op.entries

    def __repr__(self):
        return (
            f"DensityOperator(dim={self.dim}, trace={self.trace:.6f}, "
            f"rank={self.support_rank})"
        )


class BipartiteState(DensityOperator):
    """Density operator on a tensor product with subsystem dimensions recorded."""

    def __init__(self, entries, dims, herm_tol: float = 1e-8):
        super().__init__(entries, herm_tol)
        dims = tuple(int(d) for d in dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise MalformedInputError(f"need at least two subsystem dims >= 1, got {dims}")
        if math.prod(dims) != self.dim:
            raise MalformedInputError(
                f"subsystem dims {dims} do not multiply to total dim {self.dim}"
            )
        self.dims = dims

    def marginal(self, *keep: int) -> np.ndarray:
        return partial_trace(self.matrix, self.dims, keep)

    def __repr__(self):
        return f"BipartiteState(dims={self.dims}, trace={self.trace:.6f})"


@dataclass(frozen=True)
class Purification:
    """Pure vector on system (x) reference whose system marginal is ``marginal``."""

    vector: np.ndarray
    marginal: DensityOperator
    d_R: int

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=complex).reshape(-1)
        v.flags.writeable = False
        object.__setattr__(self, "vector", v)


# ---------------------------------------------------------------------------
# spectral functions


def eigh_sorted(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvectors of the symmetrized input."""
    a = as_matrix(m)
    a = (a + a.conj().T) / 2.0
    return np.linalg.eigh(a)


def psd_power(m, p: float) -> np.ndarray:
    """Spectral power of a PSD operator.

    Eigenvalues at or below the support cutoff are mapped to zero for every
    exponent, so negative powers act as pseudo-inverses on the support and
    p = 0 yields the support projector.
    """
    evals, vecs = eigh_sorted(m)
    cutoff = support_cutoff(evals.size, float(evals[-1]) if evals.size else 0.0)
    out = np.zeros_like(evals)
    mask = evals > cutoff
    out[mask] = evals[mask] ** p
    return (vecs * out) @ vecs.conj().T


def psd_log2(m) -> np.ndarray:
    """Base-2 logarithm on the support; the kernel block is set to zero."""
    evals, vecs = eigh_sorted(m)
    cutoff = support_cutoff(evals.size, float(evals[-1]) if evals.size else 0.0)
    out = np.zeros_like(evals)
    mask = evals > cutoff
    out[mask] = np.log2(evals[mask])
    return (vecs * out) @ vecs.conj().T


def herm_exp2(m) -> np.ndarray:
    """2**H for Hermitian H (full spectrum, no support restriction)."""
    evals, vecs = eigh_sorted(m)
    return (vecs * np.exp2(evals)) @ vecs.conj().T


def operator_function(rho, name: str, p: float | None = None) -> np.ndarray:
    """Apply a named spectral function: 'power' (with exponent p), 'log2', 'exp2'."""
    if name == "power":
        if p is None:
            raise PreconditionError("operator_function('power', ...) needs exponent p")
        return psd_power(rho, p)
    if name == "log2":
        return psd_log2(rho)
    if name == "exp2":
        return herm_exp2(rho)
    from .errors import UnknownNameError

    raise UnknownNameError(f"unknown operator function {name!r}")


def trace_norm(h) -> float:
    """Sum of absolute eigenvalues of a Hermitian operator."""
    a = as_matrix(h)
    dev = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if dev > 1e-8:
        raise PreconditionError(f"trace_norm expects Hermitian input (deviation {dev:.3e})")
    return float(np.sum(np.abs(np.linalg.eigvalsh((a + a.conj().T) / 2.0))))


# ---------------------------------------------------------------------------
# tensor algebra


def partial_trace(m, dims, keep) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep`` (indices, order kept ascending)."""
    a = as_matrix(m)
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    total = math.prod(dims)
    if a.shape != (total, total):
        raise MalformedInputError(f"matrix shape {a.shape} does not match dims {dims}")
    keep = sorted(set(int(k) for k in np.atleast_1d(np.asarray(keep, dtype=int))))
    if any(k < 0 or k >= n for k in keep):
        raise PreconditionError(f"keep indices {keep} out of range for {n} subsystems")
    t = a.reshape(dims + dims)
    cur_dims = list(dims)
    for ax in sorted(set(range(n)) - set(keep), reverse=True):
        k = len(cur_dims)
        t = np.trace(t, axis1=ax, axis2=ax + k)
        del cur_dims[ax]
    dk = math.prod(cur_dims) if cur_dims else 1
    return t.reshape(dk, dk)


def swap_bipartite(m, dims) -> np.ndarray:
    """Exchange the two tensor factors of a bipartite operator."""
    a = as_matrix(m)
    da, db = int(dims[0]), int(dims[1])
    t = a.reshape(da, db, da, db).transpose(1, 0, 3, 2)
    return t.reshape(db * da, db * da)


def canonical_purification(rho) -> Purification:
    """Purify rho on system (x) reference via sqrt(rho) applied to the unnormalized
    maximally entangled vector; the reference marginal equals rho transposed."""
    dop = rho if isinstance(rho, DensityOperator) else DensityOperator(rho)
    root = psd_power(dop.matrix, 0.5)
    # vector[(a, r)] = sqrt(rho)[a, r]
    vec = root.reshape(-1)
    return Purification(vector=vec, marginal=dop, d_R=dop.dim)


# ---------------------------------------------------------------------------
# random sampling


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derive_seed(master_seed: int, index: int) -> int:
    """Deterministic per-trial seed from a master seed and a trial index."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def ginibre(d_out: int, d_in: int, rng) -> np.ndarray:
    rng = as_rng(rng)
    return (
        rng.standard_normal((d_out, d_in)) + 1j * rng.standard_normal((d_out, d_in))
    ) / math.sqrt(2.0)


def haar_unitary(d: int, seed) -> np.ndarray:
    """Haar random unitary: complex Ginibre then QR, with the R diagonal's
    phases pushed into Q so the factorization is unique."""
    if d < 1:
        raise PreconditionError(f"dimension must be >= 1, got {d}")
    g = ginibre(d, d, seed)
    q, r = np.linalg.qr(g)
    diag = np.diagonal(r).copy()
    phases = diag / np.abs(diag)
    return q * phases


def random_density(d: int, rank: int, seed) -> DensityOperator:
    """Trace-normalized G G^dag with G a d x rank complex Ginibre matrix."""
    if not (1 <= rank <= d):
        raise PreconditionError(f"rank must lie in [1, {d}], got {rank}")
    g = ginibre(d, rank, seed)
    m = g @ g.conj().T
    return DensityOperator(m / np.real(np.trace(m)))


def random_pure(d: int, seed) -> DensityOperator:
    return random_density(d, 1, seed)


def random_hermitian(d: int, seed, scale: float = 1.0) -> np.ndarray:
    g = ginibre(d, d, seed)
    h = (g + g.conj().T) / 2.0
    return scale * h
