"""Amplitude amplification: abstract form and machine-embedded form.

The abstract engine iterates Q = -I_phi I_omega on a uniform superposition
over M elements, where I_phi reflects about the uniform state and I_omega
flips the sign of the marked element.  On the two-dimensional span of the
marked element and the uniform complement, Q is a rotation by theta with
cos(theta) = 1 - 2/M, so the success probability after m iterations is
sin^2((2m+1) * beta) with beta = theta/2.

The embedded engine replaces the unit-cost sign oracle with the physical
realization: one full coherent round trip of the search machine per
iteration, charged at the machine tariff.  Two failure mechanisms are kept
separate on purpose:

* timing entanglement -- components finish a round trip at different steps,
  leaving memory--ballast correlations that decohere the memory register.  A
  clearly non-physical diagnostic flag resets ballast between iterations to
  isolate this effect (with it on, the embedded run reproduces the abstract
  engine exactly);
* oracle cost -- each iteration costs a full round trip, so iteration counts
  that scale like sqrt(M) do not beat a classical sweep in two dimensions.

An endpoint variant applies the reflections while the robot is still at the
path endpoints (positions correlated with memory); only the first iteration
sees a faithful oracle there, so amplification dies -- measured, not assumed.

The record-bit variant amplifies against a flag qubit instead of a sign.
The mover U = -I_phi_i I_(r=1) has no two-dimensional invariant plane
containing the flagged component, and the flagged amplitude is a fixed point
of U, so its probability never grows.  The variant reports that trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .machine import (
    TARIFF,
    StepLedger,
    TaskConfig,
    TaskMachine,
    build_machine,
    endpoint_hold_state,
    reset_ballast,
    run_component,
)
from .state import ConfigLabel, SparseState, inner, norm


def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def uniform_state(M: int) -> SparseState:
    """Uniform superposition over M = 2^n elements, built the physical way:
    one basis-mixing rotation per qubit applied to the all-zero register."""
    if not is_power_of_two(M) or M < 2:
        raise ConfigError(f"element count must be a power of two >= 2, got {M}")
    n = M.bit_length() - 1
    terms = {0: 1.0 + 0j}
    inv = 1.0 / math.sqrt(2.0)
    for q in range(n):
        bit = 1 << q
        out: dict[int, complex] = {}
        for idx, amp in terms.items():
            # (sigma_z + sigma_x)/sqrt(2): |0> -> (|0>+|1>)/sqrt(2), |1> -> (|0>-|1>)/sqrt(2)
            if idx & bit:
                out[idx & ~bit] = out.get(idx & ~bit, 0j) + amp * inv
                out[idx] = out.get(idx, 0j) - amp * inv
            else:
                out[idx] = out.get(idx, 0j) + amp * inv
                out[idx | bit] = out.get(idx | bit, 0j) + amp * inv
        terms = out
    return SparseState(terms)


def rotation_params(M: int) -> tuple[float, float]:
    """Rotation angle theta (cos theta = 1 - 2/M) and half-angle beta."""
    if M < 2:
        raise ConfigError(f"element count must be >= 2, got {M}")
    theta = math.acos(1.0 - 2.0 / M)
    return theta, theta / 2.0


def optimal_iterations(M: int) -> int:
    """Iteration count closest to a quarter turn: round(pi/(4 beta) - 1/2),
    round-half-to-even, clamped to >= 0."""
    _, beta = rotation_params(M)
    return max(0, round(math.pi / (4.0 * beta) - 0.5))


def success_probability(M: int, m: int) -> float:
    """Closed-form marked-element probability after m iterations."""
    _, beta = rotation_params(M)
    return math.sin((2 * m + 1) * beta) ** 2


def reflect_about(state: SparseState, axis: SparseState) -> SparseState:
    """(1 - 2 |axis><axis|) applied to state (axis must be normalized)."""
    overlap = inner(axis, state)
    out = dict(state.terms)
    for label, amp in axis.terms.items():
        out[label] = out.get(label, 0j) - 2.0 * overlap * amp
    return SparseState(out)


def _sign_flip(state: SparseState, marked) -> SparseState:
    out = dict(state.terms)
    if marked in out:
        out[marked] = -out[marked]
    return SparseState(out)


def grover_abstract(M: int, target_index: int, m: int) -> tuple[SparseState, float]:
    """Iterate Q = -I_phi I_omega m times on the uniform state; returns the
    final state and the measured marked-element probability."""
    if not 0 <= target_index < M:
        raise ConfigError(f"target index {target_index} outside 0..{M - 1}")
    phi = uniform_state(M)
    state = phi
    for _ in range(m):
        state = _sign_flip(state, target_index)
        state = reflect_about(state, phi)
        state = state.map_amplitudes(lambda _, a: -a)
    return state, abs(state.amplitude(target_index)) ** 2


def q_matrix(M: int, target_index: int = 0):
    """Matrix of one iterate on the ordered basis (marked element, uniform
    complement); equals the rotation [[cos, sin], [-sin, cos]] exactly."""
    import numpy as np

    omega = SparseState.basis(target_index)
    amp = 1.0 / math.sqrt(M - 1)
    alpha = SparseState({i: amp for i in range(M) if i != target_index})
    phi = uniform_state(M)

    def apply_q(state: SparseState) -> SparseState:
        state = _sign_flip(state, target_index)
        state = reflect_about(state, phi)
        return state.map_amplitudes(lambda _, a: -a)

    basis = (omega, alpha)
    out = np.zeros((2, 2), dtype=complex)
    for col, vec in enumerate(basis):
        image = apply_q(vec)
        for row, bra in enumerate(basis):
            out[row, col] = inner(bra, image)
    return out


@dataclass(frozen=True)
class GroverParams:
    """Element count, marked index, iteration count and rotation angles."""

    M: int
    target_index: int
    m: int
    theta: float
    beta: float

    @classmethod
    def build(cls, M: int, target_index: int, m: int | None = None) -> "GroverParams":
        theta, beta = rotation_params(M)
        if m is None:
            m = optimal_iterations(M)
        if m < 0:
            raise ConfigError(f"iteration count must be >= 0, got {m}")
        return cls(M=M, target_index=target_index, m=m, theta=theta, beta=beta)


def target_element_index(config: TaskConfig) -> int:
    """Lexicographic rank of the target site among memory values."""
    return config.lattice().index(config.target)


def diffusion_on_memory(state: SparseState, config: TaskConfig) -> SparseState:
    """-(1 - 2 P_uniform) on the memory register, identity elsewhere.

    Grouped by the non-memory part of each label; every group fans out to
    the full memory lattice, which is where honest runs pay for timing
    entanglement.
    """
    lattice = config.lattice()
    M = config.sites
    groups: dict[tuple, dict[tuple[int, ...], complex]] = {}
    for label, amp in state.terms.items():
        rest = label._replace(memory=None)
        groups.setdefault(rest, {})[label.memory] = amp
    out: dict[ConfigLabel, complex] = {}
    for rest, vec in groups.items():
        mean2 = 2.0 * sum(vec.values()) / M
        for mem in lattice:
            new_amp = mean2 - vec.get(mem, 0j)
            if new_amp != 0:
                out[rest._replace(memory=mem)] = new_amp
    return SparseState(out)


def memory_probability(state: SparseState, memory_value: tuple[int, ...]) -> float:
    """Probability that a memory-register measurement returns the value."""
    return sum(
        abs(amp) ** 2 for lbl, amp in state.terms.items() if lbl.memory == memory_value
    )


@dataclass
class EmbeddedResult:
    final_state: SparseState
    probability: float
    ledger: StepLedger
    probability_trace: list[float] = field(default_factory=list)
    steps_trace: list[int] = field(default_factory=list)

    @property
    def iteration_triples(self) -> list[tuple[int, float, int]]:
        """(iteration, probability, cumulative steps) per recorded point."""
        return [
            (i, p, s)
            for i, (p, s) in enumerate(zip(self.probability_trace, self.steps_trace))
        ]


def grover_embedded(
    config: TaskConfig,
    m: int | None = None,
    variant: str = "after_return",
    diagnostic_disentangle: bool = False,
) -> EmbeddedResult:
    """Amplitude amplification with the oracle realized by the machine.

    ``after_return``: each iteration is one full coherent round trip (the
    sign oracle is the site inspection) followed by the memory diffusion,
    applied after every component is back at the origin.  ``at_endpoint``:
    all reflections happen while components are held at their path
    endpoints; later iterations can only flip the sign by robot position,
    which is stale after the first diffusion.

    The diagnostic flag resets ballast between iterations.  It is not a
    physical operation; it exists to show the embedded run reproduces the
    abstract engine once timing correlations are erased.
    """
    if config.recording != "sign_flip":
        raise ConfigError("embedded amplification requires sign_flip recording")
    if config.ballast_mode != "unbounded":
        raise ConfigError("embedded amplification requires unbounded ballast")
    if m is None:
        m = optimal_iterations(config.sites)
    if variant == "after_return":
        return _embedded_after_return(config, m, diagnostic_disentangle)
    if variant == "at_endpoint":
        return _embedded_at_endpoint(config, m)
    raise ConfigError(f"unknown embedded variant {variant!r}")


def _embedded_after_return(config, m, diagnostic) -> EmbeddedResult:
    # Between reflections every label is resting at the origin with cleared
    # registers, so the state lives on (memory, ballast) pairs; full labels
    # are materialized once at the end.  Equivalence with stepping the full
    # machine label by label is covered by tests.
    machine = build_machine(config)
    runs = {mem: run_component(config, mem, machine) for mem in config.lattice()}
    t_max = max(r.steps for r in runs.values())
    gap = {mem: t_max - r.steps for mem, r in runs.items()}
    sign = {mem: r.sign for mem, r in runs.items()}
    worst = max(runs.values(), key=lambda r: (r.ledger.total, r.trajectory[0].memory))
    lattice = config.lattice()
    M = config.sites
    dk = config.d * config.bits_per_axis

    amp0 = 1.0 / math.sqrt(M)
    state: dict[tuple, complex] = {(mem, 0): amp0 for mem in lattice}

    def probability(s: dict) -> float:
        return sum(abs(a) ** 2 for (mem, _), a in s.items() if mem == config.target)

    ledger = StepLedger()
    trace = [probability(state)]
    steps_trace = [0]
    for i in range(m):
        moved: dict[tuple, complex] = {}
        for (mem, b), amp in state.items():
            key = (mem, 0 if diagnostic else b + gap[mem])
            moved[key] = moved.get(key, 0j) + amp * sign[mem]
        ledger.merge(worst.ledger)
        # reflection about the uniform memory state, one ballast group at a time
        groups: dict[int, dict] = {}
        for (mem, b), amp in moved.items():
            groups.setdefault(b, {})[mem] = amp
        state = {}
        for b, vec in groups.items():
            mean2 = 2.0 * sum(vec.values()) / M
            for mem in lattice:
                new_amp = mean2 - vec.get(mem, 0j)
                if abs(new_amp) >= 1e-14:
                    state[(mem, b)] = new_amp
        ledger.charge(comp=dk * TARIFF["diffusion_per_qubit"])
        trace.append(probability(state))
        steps_trace.append(ledger.total)
        if i + 1 < m:
            ledger.charge(comp=TARIFF["rearm"])
    ledger.grover_iterations = m
    zeros = (0,) * config.d
    control = 1 if m == 0 else 0  # never run = still armed
    final = SparseState(
        {
            ConfigLabel(zeros, mem, zeros, "dn", control, 0, b): amp
            for (mem, b), amp in state.items()
        }
    )
    return EmbeddedResult(
        final_state=final,
        probability=memory_probability(final, config.target),
        ledger=ledger,
        probability_trace=trace,
        steps_trace=steps_trace,
    )


def _embedded_at_endpoint(config, m) -> EmbeddedResult:
    machine = build_machine(config)
    state, outbound = endpoint_hold_state(config, machine)
    ledger = StepLedger()
    ledger.merge(outbound)
    dk = config.d * config.bits_per_axis

    def position_oracle(s: SparseState) -> SparseState:
        return SparseState(
            {
                lbl: (-amp if lbl.position == config.target else amp)
                for lbl, amp in s.terms.items()
            }
        )

    trace = [memory_probability(state, config.target)]
    steps_trace = [ledger.total]
    for i in range(m):
        if i > 0:
            # The only locally available oracle flips on the robot's site,
            # which no longer tracks the memory register after a diffusion.
            state = position_oracle(state)
            ledger.charge(comp=TARIFF["record"])
        state = diffusion_on_memory(state, config)
        ledger.charge(comp=dk * TARIFF["diffusion_per_qubit"])
        trace.append(memory_probability(state, config.target))
        steps_trace.append(ledger.total)
    ledger.grover_iterations = m
    state = _release_from_endpoint(config, machine, state)
    return EmbeddedResult(
        final_state=state,
        probability=memory_probability(state, config.target),
        ledger=ledger,
        probability_trace=trace,
        steps_trace=steps_trace,
    )


def _release_from_endpoint(config: TaskConfig, machine: TaskMachine, state: SparseState) -> SparseState:
    """Walk every held component home and rest it.

    After a diffusion the memory register no longer matches the robot
    position, so the walk is applied as a derived map: the return leg is
    driven entirely by the memory/scratch comparison, the position is dragged
    back by the memory value (sites wrap), and idle components tick ballast
    until the slowest return finishes.  The walk duration and charges equal
    those of a matched return with the same memory value.
    """
    hooked = lambda lbl: lbl.output == "look" and lbl.control == 1
    return_steps: dict[tuple[int, ...], int] = {}
    for mem in config.lattice():
        out_run = run_component(config, mem, machine, stop=hooked)
        full_run = run_component(config, mem, machine)
        return_steps[mem] = full_run.steps - out_run.steps
    t_max = max(return_steps.values())
    n = config.N
    out: dict[ConfigLabel, complex] = {}
    for lbl, amp in state.terms.items():
        pos = tuple((p - mv) % n for p, mv in zip(lbl.position, lbl.memory))
        new = lbl._replace(
            position=pos,
            comp=(0,) * config.d,
            output="dn",
            control=0,
            ballast=lbl.ballast + t_max - return_steps[lbl.memory],
        )
        if new in out:
            raise ConfigError(f"endpoint release collision at {new}")
        out[new] = amp
    return SparseState(out)


@dataclass
class RecordResult:
    probabilities: list[float]
    max_probability: float
    norms: list[float]


def final_record_state(config: TaskConfig) -> SparseState:
    """Memory (x) record state after one coherent search with the flag qubit.

    Timing correlations are stripped (ballast reset) so the state is exactly
    the uniform superposition with the target component flagged; the point
    of the variant is that amplification fails even on this clean state.
    """
    if config.recording != "record_qubit":
        raise ConfigError("record variant requires record_qubit recording")
    from .machine import run_coherent

    run = run_coherent(config)
    clean = reset_ballast(run.final_state)
    out: dict[tuple, complex] = {}
    for lbl, amp in clean.terms.items():
        key = (lbl.memory, lbl.record)
        out[key] = out.get(key, 0j) + amp
    return SparseState(out)


def record_variant(config: TaskConfig, m_max: int) -> RecordResult:
    """Iterate U = -I_phi_i I_(r=1) on the memory (x) record register and
    report the flagged-target probability after each iteration."""
    state = final_record_state(config)
    M = config.sites
    phi_i = SparseState({(mem, 0): 1.0 / math.sqrt(M) for mem in config.lattice()})
    target_key = (config.target, 1)

    def flag_reflect(s: SparseState) -> SparseState:
        return SparseState(
            {k: (-a if k[1] == 1 else a) for k, a in s.terms.items()}
        )

    probs = [abs(state.amplitude(target_key)) ** 2]
    norms = [norm(state)]
    for _ in range(m_max):
        state = flag_reflect(state)
        state = reflect_about(state, phi_i)
        state = state.map_amplitudes(lambda _, a: -a)
        probs.append(abs(state.amplitude(target_key)) ** 2)
        norms.append(norm(state))
    return RecordResult(probabilities=probs, max_probability=max(probs), norms=norms)
