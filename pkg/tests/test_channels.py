"""Tests for channel representations and conversions."""

import json
import math

import numpy as np
import pytest

import softcover as sc
from softcover import channels as chn
from softcover.errors import MalformedInputError, PreconditionError
from softcover.linalg import as_matrix, canonical_purification, partial_trace


def dens(d, seed):
    return as_matrix(sc.random_density(d, d, seed=seed))


class TestQuantumChannel:
    def test_trace_preservation_enforced(self):
        with pytest.raises(MalformedInputError):
            chn.QuantumChannel((np.eye(2) * 0.5,))

    def test_shape_consistency_enforced(self):
        with pytest.raises(MalformedInputError):
            chn.QuantumChannel((np.eye(2), np.zeros((3, 2))))

    def test_identity(self):
        ch = chn.identity_channel(3)
        r = dens(3, 1)
        assert np.allclose(chn.apply_matrix(ch, r), r)
        assert ch.env_dim == 1

    def test_depolarizing_fully_mixing(self):
        ch = chn.depolarizing_channel(3, 1.0)
        out = chn.apply_matrix(ch, dens(3, 2))
        assert np.max(np.abs(out - np.eye(3) / 3)) < 1e-12

    def test_depolarizing_partial(self):
        r = dens(2, 3)
        out = chn.apply_matrix(chn.depolarizing_channel(2, 0.3), r)
        want = 0.7 * r + 0.3 * np.eye(2) / 2
        assert np.max(np.abs(out - want)) < 1e-12

    def test_apply_returns_density_operator(self):
        out = chn.apply(chn.depolarizing_channel(2, 0.5), sc.random_density(2, 2, seed=4))
        assert isinstance(out, sc.DensityOperator)
        assert abs(out.trace - 1.0) < 1e-9

    def test_random_channel_is_tp(self):
        for seed in range(5):
            ch = chn.random_channel(3, 2, 3, seed=seed)
            total = sum(k.conj().T @ k for k in ch.kraus)
            assert np.max(np.abs(total - np.eye(3))) < 1e-10


class TestStinespring:
    def test_isometry_and_round_trip(self):
        rng = np.random.default_rng(7)
        for seed in range(10):
            ch = chn.random_channel(3, 2, 3, seed=seed + 50)
            w = chn.stinespring(ch)
            assert np.max(np.abs(w.conj().T @ w - np.eye(3))) < 1e-10
            for _ in range(10):
                r = as_matrix(sc.random_density(3, 3, seed=int(rng.integers(2**31))))
                via_w = partial_trace(w @ r @ w.conj().T, (2, ch.env_dim), [0])
                assert np.max(np.abs(via_w - chn.apply_matrix(ch, r))) < 1e-9

    def test_identity_dilation(self):
        w = chn.stinespring(chn.identity_channel(2))
        assert w.shape == (2, 2)
        assert np.allclose(w, np.eye(2))


class TestChoi:
    def test_identity_choi_is_maximally_entangled(self):
        j = chn.choi(chn.identity_channel(2))
        v = np.zeros(4, dtype=complex)
        v[0] = v[3] = 2**-0.5
        assert np.max(np.abs(j.matrix - np.outer(v, v.conj()))) < 1e-12

    def test_depolarizing_choi_is_maximally_mixed(self):
        j = chn.choi(chn.depolarizing_channel(2, 1.0))
        assert np.max(np.abs(j.matrix - np.eye(4) / 4)) < 1e-12

    def test_output_marginal_is_channel_on_maximally_mixed(self):
        ch = chn.random_channel(3, 2, 2, seed=11)
        j = chn.choi(ch)
        assert abs(j.trace - 1.0) < 1e-9
        tau = j.marginal(1)
        want = chn.apply_matrix(ch, np.eye(3) / 3)
        assert np.max(np.abs(tau - want)) < 1e-10

    def test_choi_round_trip(self):
        rng = np.random.default_rng(13)
        for seed in range(10):
            ch = chn.random_channel(2, 3, 2, seed=seed + 90)
            back = chn.channel_from_choi(chn.choi(ch))
            for _ in range(10):
                r = as_matrix(sc.random_density(2, 2, seed=int(rng.integers(2**31))))
                a = chn.apply_matrix(ch, r)
                b = chn.apply_matrix(back, r)
                assert np.max(np.abs(a - b)) < 1e-9


class TestApplyPartial:
    def test_purification_consistency(self):
        # (N (x) id) applied to a purification leaves the output marginal N(rho)
        r = sc.random_density(3, 3, seed=21)
        pur = canonical_purification(r)
        ch = chn.random_channel(3, 2, 2, seed=22)
        joint = np.outer(pur.vector, pur.vector.conj())
        moved = chn.apply_partial(ch, joint, (3, pur.d_R), 0)
        marg = partial_trace(moved, (2, pur.d_R), [0])
        assert np.max(np.abs(marg - chn.apply_matrix(ch, as_matrix(r)))) < 1e-10

    def test_subsystem_dim_checks(self):
        ch = chn.identity_channel(2)
        with pytest.raises(MalformedInputError):
            chn.apply_partial(ch, np.eye(6) / 6, (3, 2), 0)
        with pytest.raises(PreconditionError):
            chn.apply_partial(ch, np.eye(4) / 4, (2, 2), 2)

    def test_second_subsystem(self):
        ra, rb = dens(2, 31), dens(3, 32)
        ch = chn.depolarizing_channel(3, 1.0)
        out = chn.apply_partial(ch, np.kron(ra, rb), (2, 3), 1)
        assert np.max(np.abs(out - np.kron(ra, np.eye(3) / 3))) < 1e-12


class TestTripleConsistency:
    def test_kraus_choi_stinespring_agree(self):
        rng = np.random.default_rng(17)
        for case in range(20):
            d_in = int(rng.integers(2, 4))
            d_out = int(rng.integers(2, 4))
            nk = int(rng.integers(max(1, -(-d_in // d_out)), 4))
            ch = chn.random_channel(d_in, d_out, nk, seed=1000 + case)
            back = chn.channel_from_choi(chn.choi(ch))
            w = chn.stinespring(ch)
            for _ in range(5):
                r = as_matrix(sc.random_density(d_in, d_in, seed=int(rng.integers(2**31))))
                a = chn.apply_matrix(ch, r)
                b = chn.apply_matrix(back, r)
                c = partial_trace(w @ r @ w.conj().T, (d_out, ch.env_dim), [0])
                assert np.max(np.abs(a - b)) < 1e-9
                assert np.max(np.abs(a - c)) < 1e-9


class TestCQEnsemble:
    def binary_orthogonal(self):
        return chn.CQEnsemble(
            ("0", "1"),
            np.array([0.5, 0.5]),
            (np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)),
        )

    def test_validation(self):
        with pytest.raises(MalformedInputError):
            chn.CQEnsemble(("a",), np.array([0.9]), (np.diag([1.0, 0.0]),))  # pmf sum
        with pytest.raises(MalformedInputError):
            chn.CQEnsemble(("a", "a"), np.array([0.5, 0.5]),
                           (np.eye(2) / 2, np.eye(2) / 2))  # repeated symbol
        with pytest.raises(MalformedInputError):
            chn.CQEnsemble(("a", "b"), np.array([0.5, 0.5]),
                           (np.eye(2) / 2, np.eye(3) / 3))  # dim mismatch

    def test_cq_channel_maps_basis_to_states(self):
        ens = self.binary_orthogonal()
        ch = chn.cq_as_channel(ens)
        e0 = np.diag([1.0, 0.0]).astype(complex)
        assert np.max(np.abs(chn.apply_matrix(ch, e0) - ens.states[0])) < 1e-12

    def test_cq_channel_average_input(self):
        rng = np.random.default_rng(23)
        states = tuple(dens(3, 600 + i) for i in range(3))
        ens = chn.CQEnsemble(("a", "b", "c"), np.array([0.2, 0.3, 0.5]), states)
        ch = chn.cq_as_channel(ens)
        avg_in = np.diag(ens.pmf).astype(complex)
        out = chn.apply_matrix(ch, avg_in)
        assert np.max(np.abs(out - ens.average_state())) < 1e-12

    def test_cq_channel_dephases(self):
        ens = self.binary_orthogonal()
        ch = chn.cq_as_channel(ens)
        plus = np.full((2, 2), 0.5, dtype=complex)
        out = chn.apply_matrix(ch, plus)
        want = 0.5 * ens.states[0] + 0.5 * ens.states[1]
        assert np.max(np.abs(out - want)) < 1e-12


class TestSerialization:
    def test_channel_round_trip_exact(self):
        ch = chn.random_channel(2, 3, 2, seed=41)
        text = chn.channel_to_json(ch)
        back = chn.channel_from_json(text)
        for a, b in zip(ch.kraus, back.kraus):
            assert np.array_equal(a, b)
        # declared dims are validated
        doc = json.loads(text)
        doc["d_in"] = 5
        with pytest.raises(MalformedInputError):
            chn.channel_from_json(json.dumps(doc))

    def test_ensemble_round_trip_exact(self):
        states = tuple(dens(2, 700 + i) for i in range(2))
        ens = chn.CQEnsemble(("x", "y"), np.array([0.25, 0.75]), states)
        back = chn.ensemble_from_json(chn.ensemble_to_json(ens))
        assert back.alphabet == ens.alphabet
        assert np.array_equal(back.pmf, ens.pmf)
        for a, b in zip(ens.states, back.states):
            assert np.array_equal(a, b)

    def test_json_serialization_deterministic(self):
        ch = chn.random_channel(2, 2, 2, seed=43)
        assert chn.channel_to_json(ch) == chn.channel_to_json(ch)
