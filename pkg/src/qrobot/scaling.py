"""Step-count scaling measurements, baselines, fits and entropy profiles.

Everything here is a deterministic measurement of the machine: no sampling,
no noise model.  Rows produced by :func:`sweep` are reproducible bit for bit
given the same configuration, which the CLI layer relies on for file-level
determinism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GuardError
from .grover import grover_embedded
from .machine import (
    StepLedger,
    TaskConfig,
    build_machine,
    endpoint_hold_state,
    is_resting,
    run_component,
    run_coherent,
    step,
    step_guard,
    uniform_memory_state,
)
from .state import (
    SparseState,
    bipartition_entropy_bits,
    entropy_bits,
    initial_label,
    reduced_density,
)

DENSE_ENTROPY_CAP = 256  # largest memory dimension for dense partial traces
BYTES_PER_TERM = 200  # rough per-amplitude footprint used by the budget guard


@dataclass(frozen=True)
class ScalingRow:
    """One measured point of a scaling experiment."""

    variant: str
    d: int
    N: int
    M: int
    grover_iterations: int
    steps_total: int
    computation_steps: int
    action_steps: int
    carry_ops: int
    max_entropy_bits: float

    def __post_init__(self):
        if self.steps_total <= 0:
            raise ConfigError("scaling rows must have positive step counts")
        if self.M != self.N**self.d:
            raise ConfigError("site count must equal N^d")


@dataclass
class SweepResult:
    rows: list[ScalingRow] = field(default_factory=list)
    skipped: list[tuple[str, int, int, str]] = field(default_factory=list)


VARIANTS = ("coherent_search", "grover_after_return", "classical")


def classical_baseline(config: TaskConfig) -> StepLedger:
    """Deterministic robot sweeping every site with the same machinery.

    The robot hops site to site in lexicographic order; each hop runs the
    per-path micro-program on the coordinate change to the next site (walk
    the delta, inspect, rewind the bookkeeping).  Worst-case placement is
    assumed, so every site is charged.  Hop costs depend only on the
    absolute per-axis delta and are cached.
    """
    machine = build_machine(config)
    cache: dict[tuple[int, ...], StepLedger] = {}
    total = StepLedger()
    previous = (0,) * config.d
    for site in config.lattice():
        delta = tuple(abs(a - b) for a, b in zip(site, previous))
        if delta not in cache:
            cache[delta] = run_component(config, delta, machine).ledger
        total.merge(cache[delta])
        previous = site
    return total


def coherent_marginal_entropy(state: SparseState) -> float:
    """Memory-register entropy for states with one branch per component.

    During a plain coherent run each memory value rides exactly one
    configuration of the other registers, so the marginal is diagonal up to
    groups of components whose other registers coincide; the entropy is the
    group-size distribution's.  Falls back to the general route otherwise.
    """
    rests: dict[tuple, list[tuple]] = {}
    total = 0.0
    seen_memories: set = set()
    for label, amp in state.terms.items():
        if label.memory in seen_memories:
            return bipartition_entropy_bits(state, "memory")
        seen_memories.add(label.memory)
        rest = label._replace(memory=None)
        rests.setdefault(rest, []).append(abs(amp) ** 2)
    entropy = 0.0
    for weights in rests.values():
        p = sum(weights)
        if p > 1e-15:
            entropy -= p * math.log2(p)
    return entropy


def _coherent_row(config: TaskConfig) -> ScalingRow:
    machine = build_machine(config)
    state = uniform_memory_state(config)
    max_entropy = coherent_marginal_entropy(state)
    t = 0
    guard = step_guard(config) * 4
    while not all(is_resting(lbl) for lbl in state.terms):
        state = step(machine, state)
        t += 1
        max_entropy = max(max_entropy, coherent_marginal_entropy(state))
        if t > guard:
            raise GuardError("coherent sweep row exceeded its step guard")
    run = run_coherent(config, machine=machine)
    return ScalingRow(
        variant="coherent_search",
        d=config.d,
        N=config.N,
        M=config.sites,
        grover_iterations=0,
        steps_total=run.ledger.total,
        computation_steps=run.ledger.computation_steps,
        action_steps=run.ledger.action_steps,
        carry_ops=run.ledger.carry_ops,
        max_entropy_bits=max_entropy,
    )


def _grover_row(config: TaskConfig) -> ScalingRow:
    result = grover_embedded(config, m=None, variant="after_return")
    entropy = bipartition_entropy_bits(result.final_state, "memory")
    led = result.ledger
    return ScalingRow(
        variant="grover_after_return",
        d=config.d,
        N=config.N,
        M=config.sites,
        grover_iterations=led.grover_iterations,
        steps_total=led.total,
        computation_steps=led.computation_steps,
        action_steps=led.action_steps,
        carry_ops=led.carry_ops,
        max_entropy_bits=entropy,
    )


def _classical_row(config: TaskConfig) -> ScalingRow:
    led = classical_baseline(config)
    return ScalingRow(
        variant="classical",
        d=config.d,
        N=config.N,
        M=config.sites,
        grover_iterations=0,
        steps_total=led.total,
        computation_steps=led.computation_steps,
        action_steps=led.action_steps,
        carry_ops=led.carry_ops,
        max_entropy_bits=0.0,
    )


def _estimated_terms(variant: str, M: int) -> int:
    if variant == "grover_after_return":
        return M * M  # reflections fan every timing branch over the lattice
    if variant == "classical":
        return 1  # one component at a time
    return M


def sweep(
    variants: list[str],
    d_list: list[int],
    N_list: list[int],
    budget_mb: int = 512,
) -> SweepResult:
    """One row per (variant, d, N), deterministic and reproducible.

    Rows whose estimated state size exceeds the memory budget are skipped
    with a reason instead of failing the whole sweep.  The target site is
    pinned to the far corner so runs are worst-case and reproducible.
    """
    builders = {
        "coherent_search": _coherent_row,
        "grover_after_return": _grover_row,
        "classical": _classical_row,
    }
    for v in variants:
        if v not in builders:
            raise ConfigError(f"unknown sweep variant {v!r}; expected one of {VARIANTS}")
    result = SweepResult()
    for variant in variants:
        for d in d_list:
            for n in N_list:
                estimated = _estimated_terms(variant, n**d) * BYTES_PER_TERM
                if estimated > budget_mb * (1 << 20):
                    result.skipped.append(
                        (variant, d, n, f"estimated {estimated >> 20} MiB exceeds budget {budget_mb} MiB")
                    )
                    continue
                config = TaskConfig(d=d, N=n, target=(n - 1,) * d)
                result.rows.append(builders[variant](config))
    return result


@dataclass
class FitResult:
    p_hat: float
    intercept: float
    max_rel_residual: float


def fit_scaling(rows: list[ScalingRow]) -> FitResult:
    """Least-squares fit of log(steps / (log2 N + 1)) = p log N + const.

    Rows must share one (variant, d) pair and cover at least three side
    lengths; the residual is the worst relative error in step space.
    """
    if len(rows) < 3:
        raise GuardError(f"scaling fit needs at least 3 rows, got {len(rows)}")
    keys = {(r.variant, r.d) for r in rows}
    if len(keys) != 1:
        raise ConfigError(f"scaling fit rows must share (variant, d); got {sorted(keys)}")
    x = np.array([math.log(r.N) for r in rows])
    y = np.array([math.log(r.steps_total / (math.log2(r.N) + 1.0)) for r in rows])
    a = np.vstack([x, np.ones_like(x)]).T
    (p_hat, intercept), *_ = np.linalg.lstsq(a, y, rcond=None)
    worst = 0.0
    for r in rows:
        predicted = math.exp(p_hat * math.log(r.N) + intercept) * (math.log2(r.N) + 1.0)
        worst = max(worst, abs(predicted - r.steps_total) / r.steps_total)
    return FitResult(p_hat=float(p_hat), intercept=float(intercept), max_rel_residual=worst)


@dataclass
class EntanglementProfile:
    points: list[tuple[int, float]]
    endpoint_hold_step: int
    endpoint_hold_entropy: float
    final_entropy: float
    final_step: int


def entanglement_profile(config: TaskConfig, stride: int = 1) -> EntanglementProfile:
    """Memory-register entropy through a coherent search.

    Sampled every ``stride`` steps with the dense partial-trace route
    (capped at 256 memory values).  Also reports the held all-at-endpoint
    snapshot: the free dynamics never synchronizes components, so that state
    is produced by holding each one at the post-inspection hook; its entropy
    is exactly log2(M) because position then mirrors the memory value.
    """
    if config.sites > DENSE_ENTROPY_CAP:
        raise GuardError(
            f"entanglement profile capped at {DENSE_ENTROPY_CAP} memory values, got {config.sites}"
        )
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    machine = build_machine(config)
    state = uniform_memory_state(config)
    points = [(0, entropy_bits(reduced_density(state, "memory")))]
    t = 0
    guard = step_guard(config) * 4
    while not all(is_resting(lbl) for lbl in state.terms):
        state = step(machine, state)
        t += 1
        if t % stride == 0:
            points.append((t, entropy_bits(reduced_density(state, "memory"))))
        if t > guard:
            raise GuardError("entropy profile exceeded its step guard")
    final_entropy = entropy_bits(reduced_density(state, "memory"))
    if points[-1][0] != t:
        points.append((t, final_entropy))
    hold_state, _ = endpoint_hold_state(config, machine)
    hooked = lambda lbl: lbl.output == "look" and lbl.control == 1
    hold_step = max(
        run_component(config, m, machine, stop=hooked).steps for m in config.lattice()
    )
    return EntanglementProfile(
        points=points,
        endpoint_hold_step=hold_step,
        endpoint_hold_entropy=entropy_bits(reduced_density(hold_state, "memory")),
        final_entropy=final_entropy,
        final_step=t,
    )


@dataclass
class RecurrenceResult:
    found: bool
    step: int | None
    budget_steps: int


def recurrence_probe(
    config: TaskConfig,
    memory_value: tuple[int, ...] | None = None,
) -> RecurrenceResult:
    """First step at which a single component revisits its start label.

    With a cyclic ballast counter the orbit is finite, so the full
    configuration recurs after completion plus one counter period; with an
    unbounded counter the ballast grows forever and no recurrence exists
    within any budget.  Guarded to tiny instances.
    """
    if config.sites > 4:
        raise GuardError("recurrence probe guarded to instances with at most 4 sites")
    if config.ballast_mode == "cyclic" and config.ballast_qubits > 3:
        raise GuardError("recurrence probe guarded to ballast counters of at most 3 qubits")
    memory_value = memory_value if memory_value is not None else (0,) * config.d
    machine = build_machine(config)
    t_max = max(
        run_component(config, m, machine).steps for m in config.lattice()
    )
    period = 1 << config.ballast_qubits if config.ballast_mode == "cyclic" else 8
    budget = 4 * period * t_max
    start = initial_label(memory_value, config.d)
    label = start
    for t in range(1, budget + 1):
        label = machine.advance(label).label
        if label == start:
            return RecurrenceResult(found=True, step=t, budget_steps=budget)
    return RecurrenceResult(found=False, step=None, budget_steps=budget)
