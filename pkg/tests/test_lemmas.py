"""Tests for the seeded inequality audits."""

import math

import numpy as np
import pytest

from softcover.entropic import min_dmax_over_marginal, q2_tilde, relative_entropy
from softcover.errors import UnknownNameError
from softcover.lemmas import (
    LEMMA_IDS,
    LemmaAuditRecord,
    _integral_quadratic_trace,
    _integral_resolvent_sandwich,
    _smooth_max_information_lower,
    lemma_audit,
)
from softcover.linalg import LOG2E, haar_unitary, random_density, random_hermitian


class TestRegistry:
    def test_thirteen_ids(self):
        assert len(LEMMA_IDS) == 13
        assert len(set(LEMMA_IDS)) == 13

    def test_unknown_id_rejected(self):
        with pytest.raises(UnknownNameError):
            lemma_audit("not_a_lemma", 0)

    def test_record_fields(self):
        rec = lemma_audit("pinsker", 7)
        assert isinstance(rec, LemmaAuditRecord)
        assert rec.lemma_id == "pinsker"
        assert rec.instance_seed == 7
        assert rec.slack == rec.rhs - rec.lhs

    def test_deterministic(self):
        a = lemma_audit("quad_upper_bound", 123)
        b = lemma_audit("quad_upper_bound", 123)
        assert a == b

    def test_lemmas_draw_independently(self):
        # Same seed, different lemma index: the underlying instances differ.
        a = lemma_audit("pinsker", 5)
        b = lemma_audit("quad_upper_bound", 5)
        assert a.lhs != b.lhs


FAST_IDS = [
    "pinsker",
    "purified_distance_trace_norm",
    "trace_norm_partial_trace",
    "trace_norm_channel",
    "continuity_relative_entropy",
    "quad_upper_bound",
    "continuity_classical_entropy",
    "continuity_quantum_entropy",
    "integral_B1",
    "integral_B2",
]


class TestSlacks:
    @pytest.mark.parametrize("lemma_id", FAST_IDS)
    def test_fast_audits_hold(self, lemma_id):
        for seed in range(40):
            rec = lemma_audit(lemma_id, seed)
            assert rec.slack >= -1e-8, (lemma_id, seed, rec)

    @pytest.mark.parametrize("lemma_id", ["dual_states", "dual_sub"])
    def test_duality_audits_hold(self, lemma_id):
        for seed in range(10):
            rec = lemma_audit(lemma_id, seed)
            assert rec.slack >= -1e-8, (lemma_id, seed, rec)

    def test_smoothing_audit_holds(self):
        for seed in range(6):
            rec = lemma_audit("max_information_smoothing", seed)
            assert rec.slack >= -1e-8, (seed, rec)
            # The additive overhead term is at least log2(3 / 0.04) - 1 bits
            # after subtracting whatever the smoothing gains back.
            assert rec.rhs > rec.lhs + 1.0


class TestQuadUpperBoundOracle:
    def test_matches_commuting_chi_square_gap(self):
        # Diagonal pair: both sides reduce to elementary sums.
        s = np.array([0.5, 0.3, 0.1])
        r = np.array([0.3, 0.4, 0.3])
        sigma = np.diag(s).astype(complex)
        rho = np.diag(r).astype(complex)
        lhs = relative_entropy(sigma, rho).value / LOG2E
        assert lhs == pytest.approx(float(np.sum(s * np.log(s / r))), abs=1e-12)
        rhs = q2_tilde(sigma, rho) - float(s.sum())
        assert rhs == pytest.approx(float(np.sum(s**2 / r) - s.sum()), abs=1e-12)
        assert lhs <= rhs


class TestIntegralQuadrature:
    def test_sandwich_exact_for_proportional_direction(self):
        # delta = c * rho turns the integrand into c * (rho + t)^-2 rho,
        # whose integral is exactly c * I.
        rng = np.random.default_rng(9)
        v = haar_unitary(4, rng)
        rho = (v * rng.uniform(0.2, 1.0, 4)) @ v.conj().T
        c = 0.37
        out = _integral_resolvent_sandwich(rho, c * rho)
        assert np.max(np.abs(out - c * np.eye(4))) < 1e-10

    def test_quadratic_trace_matches_closed_form_kernel(self):
        rng = np.random.default_rng(11)
        for d in (2, 4, 6):
            v = haar_unitary(d, rng)
            evals = rng.uniform(0.05, 2.0, d)
            rho = (v * evals) @ v.conj().T
            delta = random_hermitian(d, rng)
            got = _integral_quadratic_trace(rho, delta)
            mid = v.conj().T @ delta @ v
            a = evals[:, None]
            b = evals[None, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                kernel = np.where(
                    np.isclose(a, b), 1.0 / a, np.log(a / b) / (a - b)
                )
            want = float(np.sum(np.abs(mid) ** 2 * kernel))
            assert got == pytest.approx(want, abs=1e-6)

    def test_repeated_eigenvalue_kernel(self):
        # Degenerate spectrum: the diagonal kernel limit is 1 / lambda.
        rho = 0.5 * np.eye(3, dtype=complex)
        delta = random_hermitian(3, 21)
        got = _integral_quadratic_trace(rho, delta)
        want = float(np.real(np.trace(delta @ delta))) / 0.5
        assert got == pytest.approx(want, abs=1e-8)


class TestSmoothMaxInformationProgram:
    def test_product_state_needs_no_conditioner_mass(self):
        rho_a = random_density(2, 2, 3).matrix
        rho_b = random_density(2, 2, 4).matrix
        rho = np.kron(rho_a, rho_b)
        val = _smooth_max_information_lower(rho, (2, 2), 0.2)
        assert val <= 1e-6

    def test_zero_radius_matches_marginal_optimization(self):
        # With no smoothing allowed, the program reduces to the same
        # minimization the duality audits solve.
        psi = np.zeros(4, dtype=complex)
        psi[0] = psi[3] = 1.0 / math.sqrt(2.0)
        phi = np.outer(psi, psi.conj())
        val = _smooth_max_information_lower(phi, (2, 2), 0.0)
        ref = min_dmax_over_marginal(phi, (2, 2), 0.5 * np.eye(2, dtype=complex))
        assert val == pytest.approx(2.0, abs=1e-6)
        assert val == pytest.approx(ref, abs=1e-6)

    def test_smoothing_only_helps(self):
        rho = random_density(4, 4, 8).matrix
        tight = _smooth_max_information_lower(rho, (2, 2), 0.0)
        loose = _smooth_max_information_lower(rho, (2, 2), 0.3)
        assert loose <= tight + 1e-7
