"""Amplitude amplification: closed forms, rotation structure, embedded runs."""

import math

import numpy as np
import pytest

from qrobot.errors import ConfigError
from qrobot.grover import (
    GroverParams,
    diffusion_on_memory,
    final_record_state,
    grover_abstract,
    grover_embedded,
    optimal_iterations,
    q_matrix,
    record_variant,
    rotation_params,
    success_probability,
    uniform_state,
)
from qrobot.machine import TaskConfig, run_coherent
from qrobot.state import SparseState, inner, norm


def dense_grover(M, target, m):
    """Independent dense-matrix oracle for the abstract engine."""
    phi = np.full(M, 1.0 / math.sqrt(M))
    i_omega = np.eye(M)
    i_omega[target, target] = -1.0
    i_phi = np.eye(M) - 2.0 * np.outer(phi, phi)
    q = -i_phi @ i_omega
    vec = phi.copy()
    for _ in range(m):
        vec = q @ vec
    return vec, float(abs(vec[target]) ** 2)


class TestUniformState:
    def test_two_elements(self):
        state = uniform_state(2)
        assert state.amplitude(0) == pytest.approx(1 / math.sqrt(2))
        assert state.amplitude(1) == pytest.approx(1 / math.sqrt(2))

    def test_sixteen_elements_quarter_amplitudes(self):
        state = uniform_state(16)
        assert len(state) == 16
        for i in range(16):
            assert state.amplitude(i) == pytest.approx(0.25, abs=1e-12)
        assert norm(state) == pytest.approx(1.0, abs=1e-12)

    def test_overlap_with_any_basis_term(self):
        for M in (2, 8, 64):
            state = uniform_state(M)
            assert inner(state, SparseState.basis(3 % M)) == pytest.approx(
                1 / math.sqrt(M)
            )

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ConfigError):
            uniform_state(6)


class TestRotationParams:
    def test_four_elements_sixty_degrees(self):
        theta, beta = rotation_params(4)
        assert theta == pytest.approx(math.pi / 3, abs=1e-12)
        assert beta == pytest.approx(math.pi / 6, abs=1e-12)

    def test_sixteen_elements(self):
        theta, beta = rotation_params(16)
        assert math.cos(theta) == pytest.approx(0.875, abs=1e-12)
        assert theta == pytest.approx(0.5053605102841573, abs=1e-9)

    def test_sin_cos_consistency(self):
        for k in range(1, 13):
            M = 2**k
            theta, beta = rotation_params(M)
            assert math.sin(theta) == pytest.approx(
                2 * math.sqrt(M - 1) / M, abs=1e-12
            )
            assert theta == pytest.approx(2 * beta, abs=1e-12)
            assert math.sin(beta) == pytest.approx(1 / math.sqrt(M), abs=1e-12)


class TestOptimalIterations:
    def test_four(self):
        assert optimal_iterations(4) == 1

    def test_sixteen(self):
        assert optimal_iterations(16) == 3

    def test_upper_bound(self):
        for k in range(1, 13):
            M = 2**k
            assert optimal_iterations(M) <= math.ceil(math.pi / 4 * math.sqrt(M))


class TestSuccessProbability:
    def test_four_one_iteration_exact(self):
        assert success_probability(4, 1) == pytest.approx(1.0, abs=1e-12)

    def test_sixteen_three_iterations(self):
        assert success_probability(16, 3) == pytest.approx(0.9613189697265625, abs=1e-12)

    def test_no_iterations_is_initial_overlap(self):
        assert success_probability(16, 0) == pytest.approx(0.0625, abs=1e-15)


class TestGroverAbstract:
    def test_four_one_iteration_certain(self):
        for target in range(4):
            _, p = grover_abstract(4, target, 1)
            assert p == pytest.approx(1.0, abs=1e-12)

    def test_sixteen_three_iterations(self):
        _, p = grover_abstract(16, 7, 3)
        assert p == pytest.approx(0.9613189697265625, abs=1e-9)

    def test_over_rotation_loses_probability(self):
        _, p3 = grover_abstract(16, 7, 3)
        _, p7 = grover_abstract(16, 7, 7)
        assert p7 < p3
        _, dense_p7 = dense_grover(16, 7, 7)
        assert p7 == pytest.approx(dense_p7, abs=1e-10)

    def test_matches_dense_oracle_state(self):
        vec, _ = dense_grover(32, 11, 4)
        state, _ = grover_abstract(32, 11, 4)
        for i in range(32):
            assert state.amplitude(i) == pytest.approx(vec[i], abs=1e-10)

    def test_closed_form_sweep(self):
        for k in range(2, 11):
            M = 2**k
            best = optimal_iterations(M)
            for m in range(0, 2 * best + 1):
                _, p = grover_abstract(M, M // 3, m)
                assert p == pytest.approx(success_probability(M, m), abs=1e-9)

    def test_unitary(self):
        state, _ = grover_abstract(64, 5, 9)
        assert norm(state) == pytest.approx(1.0, abs=1e-10)


class TestRotationMatrix:
    @pytest.mark.parametrize("M", [4, 16, 64])
    def test_q_matches_rotation_form(self, M):
        theta, _ = rotation_params(M)
        expected = np.array(
            [
                [math.cos(theta), math.sin(theta)],
                [-math.sin(theta), math.cos(theta)],
            ]
        )
        assert np.abs(q_matrix(M) - expected).max() < 1e-12


class TestGroverParams:
    def test_auto_iterations(self):
        params = GroverParams.build(16, 5)
        assert params.m == 3
        assert params.theta == pytest.approx(2 * params.beta, abs=1e-12)
        assert 0 < params.theta <= math.pi

    def test_rejects_negative_m(self):
        with pytest.raises(ConfigError):
            GroverParams.build(16, 5, -1)


class TestComponentActionOfMover:
    def test_non_target_component(self):
        # U|x> = (2/sqrt(M)) * uniform - |x> for non-target memory values,
        # with sqrt(M) = N^(d/2) the normalization of the uniform state
        config = TaskConfig(d=2, N=4, target=(1, 2))
        M = config.sites
        zeros = (0,) * config.d
        from qrobot.state import ConfigLabel

        basis = SparseState.basis(ConfigLabel(zeros, (3, 0), zeros, "dn", 0, 0, 0))
        moved = diffusion_on_memory(basis, config)
        for lbl, amp in moved.terms.items():
            expected = 2.0 / M
            if lbl.memory == (3, 0):
                expected -= 1.0
            assert amp == pytest.approx(expected, abs=1e-12)

    def test_target_component_mirrors(self):
        config = TaskConfig(d=2, N=4, target=(1, 2))
        M = config.sites
        zeros = (0,) * config.d
        from qrobot.state import ConfigLabel

        target_lbl = ConfigLabel(zeros, (1, 2), zeros, "dn", 0, 0, 0)
        # oracle sign then diffusion: U|x0> = -(2/sqrt(M)) uniform + |x0>
        flipped = SparseState({target_lbl: -1.0})
        moved = diffusion_on_memory(flipped, config)
        for lbl, amp in moved.terms.items():
            expected = -2.0 / M
            if lbl.memory == (1, 2):
                expected += 1.0
            assert amp == pytest.approx(expected, abs=1e-12)


def stepwise_embedded(config, m):
    """Oracle: the after-return amplification driven step by step through the
    machine, with no reduced-key shortcut."""
    state = None
    ledgers = []
    for _ in range(m):
        run = run_coherent(config, initial=state)
        ledgers.append(run.ledger)
        state = diffusion_on_memory(run.final_state, config)
        state = SparseState(
            {lbl._replace(control=1): amp for lbl, amp in state.terms.items()}
        )
    # disarm for comparison with the shipped path (resting labels)
    state = SparseState({lbl._replace(control=0): amp for lbl, amp in state.terms.items()})
    return state, ledgers


class TestGroverEmbedded:
    def test_diagnostic_run_reduces_to_abstract(self):
        config = TaskConfig(d=2, N=4, target=(1, 2))
        result = grover_embedded(config, 3, diagnostic_disentangle=True)
        assert result.probability == pytest.approx(0.9613189697265625, abs=1e-6)
        # per-amplitude equality of the memory marginal with the abstract
        # state (target amplitude on the target, the common non-target
        # amplitude everywhere else)
        abstract, _ = grover_abstract(16, 0, 3)
        target_amp = abstract.amplitude(0)
        other_amp = abstract.amplitude(1)
        by_memory = {}
        for lbl, amp in result.final_state.terms.items():
            by_memory[lbl.memory] = by_memory.get(lbl.memory, 0j) + amp
        for memory in config.lattice():
            expected = target_amp if memory == config.target else other_amp
            assert by_memory[memory] == pytest.approx(expected, abs=1e-9)

    def test_honest_run_stays_below_abstract(self):
        config = TaskConfig(d=2, N=4, target=(1, 2))
        honest = grover_embedded(config, 3)
        assert honest.probability < 0.9613189697265625
        assert honest.probability == pytest.approx(0.22440338134765625, abs=1e-12)
        assert norm(honest.final_state) == pytest.approx(1.0, abs=1e-10)
        # the trace climbs only through residual timing-tie coherence
        trace = honest.probability_trace
        assert trace[0] == pytest.approx(1 / 16)
        assert all(b > a for a, b in zip(trace, trace[1:]))

    def test_honest_run_matches_stepwise_oracle(self):
        config = TaskConfig(d=2, N=4, target=(1, 2))
        fast = grover_embedded(config, 2)
        slow_state, slow_ledgers = stepwise_embedded(config, 2)
        assert fast.final_state.terms.keys() == slow_state.terms.keys()
        for lbl, amp in slow_state.terms.items():
            assert fast.final_state.amplitude(lbl) == pytest.approx(amp, abs=1e-12)

    def test_ledger_accounts_iterations(self):
        config = TaskConfig(d=2, N=4, target=(1, 2))
        result = grover_embedded(config, 3)
        round_trip = run_coherent(config).ledger.total
        assert result.ledger.grover_iterations == 3
        assert result.ledger.total >= 3 * round_trip
        dk = config.d * config.bits_per_axis
        assert result.ledger.total == 3 * round_trip + 3 * dk + 2  # + re-arms

    def test_iteration_triples(self):
        config = TaskConfig(d=2, N=4, target=(1, 2))
        result = grover_embedded(config, 3)
        triples = result.iteration_triples
        assert [i for i, _, _ in triples] == [0, 1, 2, 3]
        assert triples[0][2] == 0
        steps = [s for _, _, s in triples]
        assert steps == sorted(steps)
        assert steps[-1] <= result.ledger.total
        assert [p for _, p, _ in triples] == result.probability_trace

    def test_rejects_record_mode(self):
        config = TaskConfig(d=2, N=4, target=(1, 2), recording="record_qubit")
        with pytest.raises(ConfigError):
            grover_embedded(config, 1)

    def test_endpoint_variant_does_not_amplify(self):
        config = TaskConfig(d=2, N=4, target=(1, 2))
        endpoint = grover_embedded(config, 3, variant="at_endpoint")
        honest = grover_embedded(config, 3)
        assert endpoint.probability <= honest.probability + 1e-12
        # iterations after the first act on a stale position oracle
        assert max(endpoint.probability_trace) < 0.25
        assert norm(endpoint.final_state) == pytest.approx(1.0, abs=1e-10)

    def test_endpoint_first_iteration_trace_starts_at_uniform(self):
        config = TaskConfig(d=2, N=4, target=(1, 2))
        endpoint = grover_embedded(config, 1, variant="at_endpoint")
        assert endpoint.probability_trace[0] == pytest.approx(1 / 16, abs=1e-12)

    def test_endpoint_release_walks_components_home(self):
        # before any diffusion, position mirrors memory, so the release
        # must bring every component back to the origin and rest it
        from qrobot.grover import _release_from_endpoint
        from qrobot.machine import build_machine, endpoint_hold_state

        config = TaskConfig(d=2, N=4, target=(1, 2))
        machine = build_machine(config)
        held, _ = endpoint_hold_state(config, machine)
        released = _release_from_endpoint(config, machine, held)
        assert len(released) == 16
        for lbl in released.terms:
            assert lbl.position == (0, 0)
            assert lbl.output == "dn" and lbl.comp == (0, 0)


class TestRecordVariant:
    def test_initial_probability_is_one_over_m(self):
        config = TaskConfig(d=2, N=4, target=(1, 2), recording="record_qubit")
        result = record_variant(config, 0)
        assert result.probabilities[0] == pytest.approx(0.0625, abs=1e-15)

    def test_flagged_state_matches_search_outcome(self):
        config = TaskConfig(d=2, N=4, target=(1, 2), recording="record_qubit")
        state = final_record_state(config)
        assert len(state) == 16
        for (memory, flag), amp in state.terms.items():
            assert flag == (1 if memory == (1, 2) else 0)
            assert amp == pytest.approx(0.25, abs=1e-12)

    def test_no_amplification_with_flag_recording(self):
        config = TaskConfig(d=2, N=4, target=(1, 2), recording="record_qubit")
        result = record_variant(config, 16)
        assert result.max_probability < 0.5
        # the flagged amplitude is a fixed point of the mover: frozen value
        assert result.max_probability == pytest.approx(0.0625, abs=1e-12)

    def test_mover_is_unitary_throughout(self):
        config = TaskConfig(d=2, N=4, target=(1, 2), recording="record_qubit")
        result = record_variant(config, 16)
        for value in result.norms:
            assert value == pytest.approx(1.0, abs=1e-12)

    def test_matches_dense_mover_oracle(self):
        # dense 2M-dimensional iteration of -I_phi_i I_(r=1)
        config = TaskConfig(d=2, N=4, target=(1, 2), recording="record_qubit")
        M = config.sites
        lattice = config.lattice()
        t_idx = lattice.index(config.target)
        dim = 2 * M  # (memory, flag) with flag the low bit
        psi = np.zeros(dim)
        for i in range(M):
            psi[2 * i + (1 if i == t_idx else 0)] = 1 / math.sqrt(M)
        phi_i = np.zeros(dim)
        for i in range(M):
            phi_i[2 * i] = 1 / math.sqrt(M)
        i_flag = np.diag([(-1.0 if k % 2 else 1.0) for k in range(dim)])
        i_phi = np.eye(dim) - 2.0 * np.outer(phi_i, phi_i)
        u = -i_phi @ i_flag
        probs = [float(psi[2 * t_idx + 1] ** 2)]
        vec = psi
        for _ in range(10):
            vec = u @ vec
            probs.append(float(vec[2 * t_idx + 1] ** 2))
        result = record_variant(config, 10)
        for mine, oracle in zip(result.probabilities, probs):
            assert mine == pytest.approx(oracle, abs=1e-10)

    def test_rejects_sign_mode(self):
        config = TaskConfig(d=2, N=4, target=(1, 2))
        with pytest.raises(ConfigError):
            record_variant(config, 4)
