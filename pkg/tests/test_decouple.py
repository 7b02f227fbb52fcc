"""Scrambling, channel output, and the product bound."""

import math

import numpy as np
import pytest

from softcover.channels import depolarizing_channel, identity_channel, random_channel
from softcover.decouple import (
    DecoupleInstance,
    additive_slack,
    build_instance,
    decouple_trial,
    haar_mean_sigma_be,
    mc_expectation,
    q2_factors,
    q2_product_bound,
    theorem5_terms,
)
from softcover.errors import MalformedInputError, PreconditionError
from softcover.linalg import (
    LN2,
    LOG2E,
    BipartiteState,
    derive_seed,
    haar_unitary,
    partial_trace,
    random_density,
    trace_norm,
)


def product_instance(rho_a, rho_e, channel):
    return build_instance(np.kron(rho_a, rho_e), channel)


def pure_product_instance(seed=0):
    rho_a = np.diag([1.0, 0.0]).astype(complex)
    rho_e = random_density(2, 2, seed).matrix
    return product_instance(rho_a, rho_e, identity_channel(2))


def random_instance(d_a, d_b, d_e, n_kraus, seed):
    rho = random_density(d_a * d_e, d_a * d_e, seed)
    state = BipartiteState(rho.matrix, (d_a, d_e))
    return build_instance(state, random_channel(d_a, d_b, n_kraus, seed + 1))


class TestBuildInstance:
    def test_assembles_choi_and_target(self):
        inst = random_instance(2, 3, 2, 2, seed=1)
        assert inst.dims == (2, 3, 2)
        assert inst.tau_ab.dims == (2, 3)
        assert inst.rho_be_target.dims == (3, 2)

    def test_environment_dim_inferred_from_matrix(self):
        rho = random_density(6, 6, seed=2)
        inst = build_instance(rho.matrix, identity_channel(2))
        assert inst.rho_ae.dims == (2, 3)

    def test_bad_matrix_shape_rejected(self):
        with pytest.raises(MalformedInputError):
            build_instance(random_density(5, 5, seed=3).matrix, identity_channel(2))

    def test_channel_dim_mismatch(self):
        state = BipartiteState(np.eye(4, dtype=complex) / 4, (2, 2))
        with pytest.raises(MalformedInputError):
            build_instance(state, identity_channel(3))

    def test_subnormalized_state_rejected(self):
        state = BipartiteState(np.eye(4, dtype=complex) / 8, (2, 2))
        with pytest.raises(PreconditionError):
            build_instance(state, identity_channel(2))

    def test_tampered_choi_rejected(self):
        inst = random_instance(2, 2, 2, 2, seed=4)
        wrong = BipartiteState(np.eye(4, dtype=complex) / 4, (2, 2))
        with pytest.raises(MalformedInputError):
            DecoupleInstance(inst.rho_ae, inst.channel, wrong, inst.rho_be_target)

    def test_tampered_target_rejected(self):
        inst = random_instance(2, 2, 2, 2, seed=5)
        wrong = BipartiteState(np.eye(4, dtype=complex) / 4, (2, 2))
        with pytest.raises(MalformedInputError):
            DecoupleInstance(inst.rho_ae, inst.channel, inst.tau_ab, wrong)


class TestDecoupleTrial:
    def test_depolarizing_hits_the_target_for_every_unitary(self):
        rho = random_density(4, 4, seed=6)
        inst = build_instance(BipartiteState(rho.matrix, (2, 2)), depolarizing_channel(2))
        for k in range(3):
            sigma, value = decouple_trial(inst, haar_unitary(2, seed=k))
            assert np.max(np.abs(sigma.matrix - inst.rho_be_target.matrix)) < 1e-12
            assert value < 1e-10

    def test_identity_on_pure_product_is_one_bit(self):
        # D(U rho_A U' || I/2) = 1 - H(rho_A), and a pure state has H = 0
        inst = pure_product_instance(seed=7)
        for k in range(3):
            _, value = decouple_trial(inst, haar_unitary(2, seed=10 + k))
            assert abs(value - 1.0) < 1e-9

    def test_identity_on_mixed_product_loses_the_entropy(self):
        rho_a = np.diag([0.75, 0.25]).astype(complex)
        rho_e = random_density(2, 2, seed=8).matrix
        inst = product_instance(rho_a, rho_e, identity_channel(2))
        expect = 1.0 + 0.75 * math.log2(0.75) + 0.25 * math.log2(0.25)
        for k in range(2):
            _, value = decouple_trial(inst, haar_unitary(2, seed=20 + k))
            assert abs(value - expect) < 1e-9

    def test_environment_marginal_never_moves(self):
        inst = random_instance(3, 2, 2, 2, seed=9)
        rho_e = partial_trace(inst.rho_ae.matrix, (3, 2), (1,))
        sigma, _ = decouple_trial(inst, haar_unitary(3, seed=30))
        assert np.max(np.abs(sigma.marginal(1) - rho_e)) < 1e-12

    def test_wrong_unitary_shape_rejected(self):
        inst = pure_product_instance(seed=10)
        with pytest.raises(MalformedInputError):
            decouple_trial(inst, haar_unitary(3, seed=0))

    def test_non_unitary_rejected(self):
        inst = pure_product_instance(seed=11)
        with pytest.raises(PreconditionError):
            decouple_trial(inst, np.diag([1.0, 0.5]))


class TestProductBound:
    def test_identity_channel_factor_is_the_dimension(self):
        for d in (2, 3):
            rho = random_density(d * 2, d * 2, seed=d)
            inst = build_instance(BipartiteState(rho.matrix, (d, 2)), identity_channel(d))
            chan, _ = q2_factors(inst)
            assert abs(chan - d) < 1e-9

    def test_pure_product_input_factor_is_one(self):
        inst = pure_product_instance(seed=12)
        chan, inp = q2_factors(inst)
        assert abs(inp - 1.0) < 1e-9
        assert abs(q2_product_bound(inst) - 2.0 * LOG2E) < 1e-9

    def test_product_input_factor_is_the_purity(self):
        rho_a = random_density(3, 3, seed=13).matrix
        rho_e = random_density(2, 2, seed=14).matrix
        inst = product_instance(rho_a, rho_e, identity_channel(3))
        _, inp = q2_factors(inst)
        purity = float(np.real(np.trace(rho_a @ rho_a)))
        assert abs(inp - purity) < 1e-9

    def test_depolarizing_channel_factor_is_inverse_dimension(self):
        # Choi of the full depolarizer is I/(D d_B), so the conjugated
        # purity collapses to 1/D, not 1: the reference keeps the
        # unnormalized identity on the input side.
        for d in (2, 3):
            rho = random_density(d * 2, d * 2, seed=40 + d)
            inst = build_instance(BipartiteState(rho.matrix, (d, 2)), depolarizing_channel(d))
            chan, _ = q2_factors(inst)
            assert abs(chan - 1.0 / d) < 1e-12

    def test_bound_dominates_depolarizing_expectation(self):
        rho = random_density(4, 4, seed=15)
        inst = build_instance(BipartiteState(rho.matrix, (2, 2)), depolarizing_channel(2))
        assert q2_product_bound(inst) >= 0.0


class TestTheorem5:
    def test_parameter_range(self):
        inst = pure_product_instance(seed=16)
        for eps in (-0.01, 1.0 / 16.0, 0.5):
            with pytest.raises(PreconditionError):
                theorem5_terms(inst, eps)

    def test_exact_limit_on_the_anchor(self):
        # H_min(A|B) of the maximally entangled Choi is -1 and the pure
        # product input gives 0, so the bound is 2 log2 e
        inst = pure_product_instance(seed=17)
        assert abs(theorem5_terms(inst, 0.0) - 2.0 * LOG2E) < 1e-5

    def test_additive_slack_plug_in(self):
        eps = 1.0 / 32.0
        expect = (12.0 / 32.0) * 2.0
        expect += -0.25 * math.log2(0.25) - 0.125 * math.log2(0.125)
        assert abs(additive_slack(eps, 2, 2) - expect) < 1e-12
        assert additive_slack(0.0, 2, 2) == 0.0

    def test_smoothing_only_adds_the_slack(self):
        inst = pure_product_instance(seed=18)
        eps = 1.0 / 32.0
        smoothed = theorem5_terms(inst, eps)
        assert smoothed >= additive_slack(eps, 2, 2) - 1e-12
        assert smoothed <= theorem5_terms(inst, 0.0) + additive_slack(eps, 2, 2) + 1e-9

    def test_dominates_measured_expectation(self):
        inst = random_instance(2, 2, 2, 2, seed=19)
        mean, se = mc_expectation(inst, trials=60, seed=77)
        assert mean <= theorem5_terms(inst, 0.0) + 3.0 * se + 1e-6


class TestMonteCarlo:
    def test_depolarizing_gives_zero_mean_and_spread(self):
        rho = random_density(4, 4, seed=20)
        inst = build_instance(BipartiteState(rho.matrix, (2, 2)), depolarizing_channel(2))
        mean, se = mc_expectation(inst, trials=20, seed=3)
        assert abs(mean) < 1e-10
        assert se < 1e-10

    def test_identity_pure_product_is_constant_one(self):
        inst = pure_product_instance(seed=21)
        mean, se = mc_expectation(inst, trials=25, seed=4)
        assert abs(mean - 1.0) < 1e-9
        assert mean <= 2.0 * LOG2E
        assert se < 1e-9

    def test_random_instance_respects_the_bound(self):
        inst = random_instance(4, 2, 2, 2, seed=22)
        mean, se = mc_expectation(inst, trials=500, seed=5)
        assert mean <= q2_product_bound(inst) + 3.0 * se + 1e-9

    def test_deterministic_per_seed(self):
        inst = random_instance(2, 2, 2, 1, seed=23)
        assert mc_expectation(inst, 30, seed=6) == mc_expectation(inst, 30, seed=6)

    def test_needs_two_trials(self):
        inst = pure_product_instance(seed=24)
        with pytest.raises(PreconditionError):
            mc_expectation(inst, trials=1, seed=0)

    def test_pinsker_holds_per_trial(self):
        inst = random_instance(3, 2, 2, 2, seed=25)
        for k in range(20):
            sigma, value = decouple_trial(inst, haar_unitary(3, derive_seed(8, k)))
            gap = trace_norm(sigma.matrix - inst.rho_be_target.matrix)
            assert gap * gap / (2.0 * LN2) <= value + 1e-9

    def test_haar_mean_matches_target(self):
        inst = random_instance(2, 2, 2, 2, seed=26)
        mean, se = haar_mean_sigma_be(inst, draws=400, master_seed=9)
        target = inst.rho_be_target.matrix
        assert np.all(np.abs(mean.real - target.real) <= 3.0 * se.real + 1e-9)
        assert np.all(np.abs(mean.imag - target.imag) <= 3.0 * se.imag + 1e-9)
