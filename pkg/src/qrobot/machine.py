"""Reversible search-task dynamics: step operator, micro-program, accounting.

The machine walks a robot over a d-dimensional grid of side N (a power of
two).  One full configuration is a :class:`ConfigLabel`; the single-step
operator splits on the control bit into a computation part (control=1, never
moves the robot) and an action part (control=0, never touches the memory or
scratch registers).  Every advertised step is a permutation of labels times a
sign, so states stay sparse and exactly representable.

Per-component program, with the memory register holding the destination:

  copy memory onto the scratch register; walk out axis by axis (test the
  scratch axis, ripple-borrow a decrement, emit a move symbol, move one
  site); inspect the site when the scratch register hits zero, marking the
  target by a sign flip or a record-bit flip; walk back in reverse axis
  order (compare scratch against memory top axis down, ripple-carry an
  increment, move one site back); uncopy the scratch register, rest.

After the resting symbol reappears the component hands its motion to a
ballast counter which increments once per step; with a cyclic counter of
``2**M_b`` values the wrap-around re-arms the program, so the finished
configuration persists only for a finite stretch before the search restarts.

Step charges follow a fixed per-primitive tariff (see :data:`TARIFF`) so that
every scaling claim made by the measurement layer is reproducible.  Ripple
borrows and carries are separate steps of the computation phase, which is how
register values shape completion times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

from .errors import ConfigError, MicroProgramError, NonInjectiveMapError, RegisterUnderflowError
from .state import (
    OUTPUT_DONE,
    OUTPUT_LOOK,
    ConfigLabel,
    SparseState,
    initial_label,
    move_symbol,
    output_alphabet,
)

# Unit charges per elementary primitive.  All ones by construction; the table
# is echoed into provenance blocks so measured fits stay interpretable.
TARIFF = {
    "copy_per_qubit": 1,
    "zero_test": 1,
    "borrow": 1,
    "carry": 1,
    "compare_per_qubit": 1,
    "set_output": 1,
    "record": 1,
    "move": 1,
    "look": 1,
    "ballast_tick": 1,
    "uncopy_per_qubit": 1,
    "diffusion_per_qubit": 1,
    "rearm": 1,
}

RECORDING_MODES = ("sign_flip", "record_qubit")
BALLAST_MODES = ("unbounded", "cyclic")


def decrement(register_value: int, width: int) -> tuple[int, int]:
    """Subtract one by borrow propagation; returns (new_value, borrows).

    Borrows = 1 + number of trailing zero bits: the ripple flips each
    trailing zero to one before clearing the lowest set bit.
    """
    if register_value == 0:
        raise RegisterUnderflowError("decrement of zero register (program tests for zero first)")
    if register_value >= (1 << width):
        raise ConfigError(f"value {register_value} does not fit in {width} bits")
    borrows = 1 + _trailing_zeros(register_value)
    return register_value - 1, borrows


def increment(register_value: int, width: int) -> tuple[int, int]:
    """Add one by carry propagation; returns (new_value, carries)."""
    if register_value + 1 > (1 << width) - 1:
        raise ConfigError(f"increment of {register_value} overflows {width} bits")
    carries = 1 + _trailing_ones(register_value)
    return register_value + 1, carries


def _trailing_zeros(v: int) -> int:
    return (v & -v).bit_length() - 1 if v else 0


def _trailing_ones(v: int) -> int:
    n = 0
    while v & 1:
        n += 1
        v >>= 1
    return n


@dataclass(frozen=True)
class TaskConfig:
    """Search-task parameters.

    N must be a power of two so the uniform memory state is preparable by
    single-qubit rotations alone; the target site must lie inside the grid.
    """

    d: int
    N: int
    target: tuple[int, ...]
    recording: str = "sign_flip"
    ballast_mode: str = "unbounded"
    ballast_qubits: int | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.d}")
        if self.N < 2 or self.N & (self.N - 1):
            raise ConfigError(f"side length must be a power of two >= 2, got {self.N}")
        target = tuple(int(c) for c in self.target)
        object.__setattr__(self, "target", target)
        if len(target) != self.d or any(c < 0 or c >= self.N for c in target):
            raise ConfigError(f"target {target} outside the {self.N}^{self.d} grid")
        if self.recording not in RECORDING_MODES:
            raise ConfigError(f"recording mode must be one of {RECORDING_MODES}")
        if self.ballast_mode not in BALLAST_MODES:
            raise ConfigError(f"ballast mode must be one of {BALLAST_MODES}")
        if self.ballast_mode == "cyclic":
            if not self.ballast_qubits or self.ballast_qubits < 1:
                raise ConfigError("cyclic ballast requires a positive qubit count")
        elif self.ballast_qubits is not None:
            raise ConfigError("ballast_qubits only applies to cyclic mode")

    @property
    def bits_per_axis(self) -> int:
        return self.N.bit_length() - 1

    @property
    def sites(self) -> int:
        return self.N**self.d

    def lattice(self) -> list[tuple[int, ...]]:
        """All memory values in lexicographic order."""
        values: list[tuple[int, ...]] = [()]
        for _ in range(self.d):
            values = [v + (c,) for v in values for c in range(self.N)]
        return sorted(values)


@dataclass
class StepLedger:
    """Counts of elementary steps split by phase kind; the currency of all
    complexity claims.  ``carry_ops`` sub-counts borrow/carry propagations."""

    total: int = 0
    computation_steps: int = 0
    action_steps: int = 0
    carry_ops: int = 0
    grover_iterations: int = 0

    def charge(self, comp: int = 0, action: int = 0, carries: int = 0) -> None:
        self.total += comp + action
        self.computation_steps += comp
        self.action_steps += action
        self.carry_ops += carries

    def merge(self, other: "StepLedger") -> None:
        self.charge(other.computation_steps, other.action_steps, other.carry_ops)
        self.grover_iterations += other.grover_iterations


class Transition(NamedTuple):
    label: ConfigLabel
    sign: int
    comp: int
    action: int
    carries: int


class PhaseKind:
    """Phase routing is determined solely by the control bit."""

    COMPUTATION = "computation"
    ACTION = "action"

    @staticmethod
    def of(label: ConfigLabel) -> str:
        return PhaseKind.COMPUTATION if label.control == 1 else PhaseKind.ACTION


def _axis_of(symbol: str) -> int:
    return int(symbol[2:]) - 1


class TaskMachine:
    """Immutable transition system for one task configuration.

    ``gamma_c`` and ``gamma_a`` are injective label maps (with a per-label
    sign) realizing the computation and action parts of the step operator;
    both are total on labels reachable from valid component starts.
    """

    def __init__(self, config: TaskConfig):
        self.config = config
        self.alphabet = output_alphabet(config.d)
        self._corrupt_comp: Callable[[ConfigLabel], ConfigLabel] | None = None
        self._corrupt_action: Callable[[ConfigLabel], ConfigLabel] | None = None

    # -- step operator halves ------------------------------------------------

    def gamma_c(self, label: ConfigLabel) -> Transition | None:
        """Computation half: defined on control=1 labels, else annihilates."""
        if label.control != 1:
            return None
        tr = self._computation_step(label)
        if self._corrupt_comp is not None:
            tr = tr._replace(label=self._corrupt_comp(tr.label))
        return tr

    def gamma_a(self, label: ConfigLabel) -> Transition | None:
        """Action half: defined on control=0 labels, else annihilates."""
        if label.control != 0:
            return None
        tr = self._action_step(label)
        if self._corrupt_action is not None:
            tr = tr._replace(label=self._corrupt_action(tr.label))
        return tr

    def advance(self, label: ConfigLabel) -> Transition:
        """Full step operator applied to one basis label."""
        tr = self.gamma_c(label) if label.control == 1 else self.gamma_a(label)
        assert tr is not None
        return tr

    # -- computation phase ---------------------------------------------------

    def _computation_step(self, label: ConfigLabel) -> Transition:
        o = label.output
        if o == OUTPUT_DONE:
            zeros = (0,) * self.config.d
            if label.comp == zeros and label.memory == zeros:
                # Degenerate copy: the whole outbound leg for the origin
                # component is one phase ending at the inspection symbol.
                return self._record_and_look(label, tests=self.config.d, copy=True)
            if label.comp == zeros:
                return self._copy_in(label)
            return self._outbound(label, scan_from=0)
        if o == OUTPUT_LOOK or o.startswith("-"):
            return self._inbound(label)
        if o.startswith("+"):
            return self._outbound(label, scan_from=_axis_of(o))
        raise MicroProgramError(f"unknown output symbol {o!r}")

    def _copy_in(self, label: ConfigLabel) -> Transition:
        k = self.config.bits_per_axis
        comp = tuple(c ^ m for c, m in zip(label.comp, label.memory))
        new = label._replace(comp=comp)
        return Transition(new, 1, self.config.d * k, 0, 0)

    def _outbound(self, label: ConfigLabel, scan_from: int) -> Transition:
        cfg = self.config
        deviants = [
            j
            for j in range(cfg.d)
            if label.comp[j] + label.position[j] != label.memory[j]
        ]
        if deviants:
            if len(deviants) > 1:
                raise MicroProgramError(f"label off the outbound program: {label}")
            j = deviants[0]
            delta = label.comp[j] + label.position[j] - label.memory[j]
            return self._ripple(label, j, delta, forward=True)
        # Fresh cycle: test axes from the current one, stop at the first with
        # sites left to walk, and start its decrement.
        for tests, j in enumerate(range(scan_from, cfg.d), start=1):
            if label.comp[j] > 0:
                return self._flip(label, j, bit=0, extra_comp=tests, forward=True)
        return self._record_and_look(label, tests=cfg.d - scan_from)

    def _record_and_look(self, label: ConfigLabel, tests: int, copy: bool = False) -> Transition:
        """Outbound leg exhausted: inspect the site during this computation
        phase, then emit the inspection symbol."""
        cfg = self.config
        sign = 1
        record = label.record
        if label.position == cfg.target:
            if cfg.recording == "sign_flip":
                sign = -1
            else:
                record ^= 1
        new = label._replace(output=OUTPUT_LOOK, control=0, record=record)
        comp_charge = tests + TARIFF["record"] + TARIFF["set_output"]
        if copy:
            comp_charge += cfg.d * cfg.bits_per_axis
        return Transition(new, sign, comp_charge, 0, 0)

    def _inbound(self, label: ConfigLabel) -> Transition:
        cfg = self.config
        deviants = [
            j
            for j in range(cfg.d)
            if label.comp[j] + label.position[j] != label.memory[j]
        ]
        if deviants:
            if len(deviants) > 1:
                raise MicroProgramError(f"label off the inbound program: {label}")
            j = deviants[0]
            delta = label.memory[j] - (label.comp[j] + label.position[j])
            return self._ripple(label, j, delta, forward=False)
        # Fresh cycle: compare against memory from the top axis down (the
        # already-restored axes are re-verified each pass), start the
        # increment at the first mismatch.
        k = cfg.bits_per_axis
        for compared, j in enumerate(reversed(range(cfg.d)), start=1):
            if label.comp[j] != label.memory[j]:
                if label.comp[j] > label.memory[j]:
                    raise MicroProgramError(f"scratch register overran memory: {label}")
                return self._flip(label, j, bit=0, extra_comp=compared * k, forward=False)
        # Round trip complete: uncopy the scratch register and rest.
        comp = tuple(c ^ m for c, m in zip(label.comp, label.memory))
        new = label._replace(comp=comp, output=OUTPUT_DONE, control=0)
        return Transition(new, 1, cfg.d * k + cfg.d * k + 1, 0, 0)

    def _ripple(self, label: ConfigLabel, j: int, delta: int, forward: bool) -> Transition:
        """Continue a borrow/carry ripple on axis j; delta = 2^i - 1 selects
        the next bit to flip."""
        if delta < 1 or (delta + 1) & delta:
            raise MicroProgramError(f"label off the ripple program: {label}")
        bit = (delta + 1).bit_length() - 1
        if bit >= self.config.bits_per_axis:
            raise MicroProgramError(f"ripple past register width: {label}")
        return self._flip(label, j, bit, extra_comp=0, forward=forward)

    def _flip(self, label: ConfigLabel, j: int, bit: int, extra_comp: int, forward: bool) -> Transition:
        """Flip one register bit of a borrow (forward) or carry (inbound)
        ripple.  The flip that absorbs the ripple also names the move symbol
        and closes the computation phase, so no post-arithmetic label exists
        separately from the move order."""
        absorbed = bool(label.comp[j] >> bit & 1) == forward
        comp = _flip_bit(label.comp, j, bit)
        new = label._replace(comp=comp)
        charge = extra_comp + 1
        if absorbed:
            new = new._replace(output=move_symbol(j, forward), control=0)
            charge += TARIFF["set_output"]
        return Transition(new, 1, charge, 0, 1)

    # -- action phase ----------------------------------------------------------

    def _action_step(self, label: ConfigLabel) -> Transition:
        cfg = self.config
        o = label.output
        if o == OUTPUT_DONE:
            # Motion rests in the ballast counter; the cyclic wrap-around ends
            # this action phase and re-arms the program.
            if cfg.ballast_mode == "cyclic":
                period = 1 << cfg.ballast_qubits
                ballast = (label.ballast + 1) % period
                control = 1 if ballast == 0 else 0
            else:
                ballast = label.ballast + 1
                control = 0
            new = label._replace(ballast=ballast, control=control)
            return Transition(new, 1, 0, 1, 0)
        if o == OUTPUT_LOOK:
            return Transition(label._replace(control=1), 1, 0, 1, 0)
        axis = _axis_of(o)
        step = 1 if o.startswith("+") else -1
        position = list(label.position)
        position[axis] = (position[axis] + step) % cfg.N
        new = label._replace(position=tuple(position), control=1)
        return Transition(new, 1, 0, 1, 0)

    # -- negative controls -----------------------------------------------------

    def corrupted(self, kind: str) -> "TaskMachine":
        """Deliberately broken copy of this machine, for verifier tests.

        ``move_in_computation`` makes the computation map drag the robot one
        site; ``memory_edit_in_action`` makes the action map flip a memory bit.
        """
        bad = TaskMachine(self.config)
        if kind == "move_in_computation":
            def shift(label: ConfigLabel) -> ConfigLabel:
                pos = list(label.position)
                pos[0] = (pos[0] + 1) % self.config.N
                return label._replace(position=tuple(pos))

            bad._corrupt_comp = shift
        elif kind == "memory_edit_in_action":
            def flip(label: ConfigLabel) -> ConfigLabel:
                return label._replace(memory=_flip_bit(label.memory, 0, 0))

            bad._corrupt_action = flip
        else:
            raise ConfigError(f"unknown corruption {kind!r}")
        return bad


def _flip_bit(vec: tuple[int, ...], axis: int, bit: int) -> tuple[int, ...]:
    out = list(vec)
    out[axis] ^= 1 << bit
    return tuple(out)


def build_machine(config: TaskConfig) -> TaskMachine:
    """Construct the transition system for a validated configuration."""
    return TaskMachine(config)


def step(machine: TaskMachine, state: SparseState) -> SparseState:
    """One global step: route each term through the phase selected by its
    control bit.  Injective (hence norm-preserving) on every reachable
    support; a collision indicates a machine construction bug."""
    out: dict[ConfigLabel, complex] = {}
    for label, amp in state.terms.items():
        tr = machine.advance(label)
        if tr.label in out:
            raise NonInjectiveMapError(f"step collision at {tr.label}")
        out[tr.label] = amp * tr.sign
    return SparseState(out)


def is_resting(label: ConfigLabel) -> bool:
    """Completed component: resting symbol with the action phase holding."""
    return label.output == OUTPUT_DONE and label.control == 0


@dataclass
class ComponentRun:
    """Single-component trajectory with full accounting."""

    trajectory: list[ConfigLabel]
    ledger: StepLedger
    sign: int
    steps: int  # label transitions to completion (the ballast clock)

    @property
    def final(self) -> ConfigLabel:
        return self.trajectory[-1]


def step_guard(config: TaskConfig) -> int:
    """Abort threshold for a single component, in tariff steps."""
    return 64 * config.d * config.N * (config.bits_per_axis + 2)


def run_component(
    config: TaskConfig,
    memory_value: Sequence[int],
    machine: TaskMachine | None = None,
    stop: Callable[[ConfigLabel], bool] = is_resting,
) -> ComponentRun:
    """Run one memory component from the armed start to its resting label.

    The ledger total is the completion step count T(memory_value); hitting
    the non-termination guard signals a program bug.
    """
    machine = machine or build_machine(config)
    memory_value = tuple(int(c) for c in memory_value)
    if len(memory_value) != config.d or any(c < 0 or c >= config.N for c in memory_value):
        raise ConfigError(f"memory value {memory_value} outside the grid")
    label = initial_label(memory_value, config.d)
    trajectory = [label]
    ledger = StepLedger()
    sign = 1
    guard = step_guard(config)
    steps = 0
    while not stop(label):
        tr = machine.advance(label)
        label = tr.label
        sign *= tr.sign
        ledger.charge(tr.comp, tr.action, tr.carries)
        trajectory.append(label)
        steps += 1
        if ledger.total > guard:
            raise MicroProgramError(
                f"component {memory_value} exceeded {guard} steps without completing"
            )
    return ComponentRun(trajectory=trajectory, ledger=ledger, sign=sign, steps=steps)


def completion_profile(config: TaskConfig) -> dict[tuple[int, ...], int]:
    """T(memory value) for every component, in tariff steps."""
    machine = build_machine(config)
    return {
        m: run_component(config, m, machine).ledger.total
        for m in config.lattice()
    }


def uniform_memory_state(config: TaskConfig) -> SparseState:
    """All memory components armed at the origin with equal amplitude."""
    amp = 1.0 / math.sqrt(config.sites)
    return SparseState(
        {initial_label(m, config.d): amp for m in config.lattice()}
    )


@dataclass
class CoherentRun:
    final_state: SparseState
    ledger: StepLedger
    steps: int
    snapshots: dict[int, SparseState]
    component_ledgers: dict[tuple[int, ...], StepLedger]
    completion_steps: dict[tuple[int, ...], int]


def run_coherent(
    config: TaskConfig,
    snapshots: Iterable[int] = (),
    machine: TaskMachine | None = None,
    initial: SparseState | None = None,
) -> CoherentRun:
    """Evolve all memory components together until every one is resting.

    Early finishers keep stepping their ballast counter, so completion-time
    differences stay in the state as ballast differences.  The reported
    ledger is wall-clock: the slowest component's tariff total (post-rest
    ballast ticks run concurrently and are not charged on top).
    """
    machine = machine or build_machine(config)
    state = initial if initial is not None else uniform_memory_state(config)
    wanted = sorted(set(int(s) for s in snapshots))
    shots: dict[int, SparseState] = {}
    if wanted and wanted[0] == 0:
        shots[0] = state
    tallies: dict[tuple[int, ...], StepLedger] = {}
    completion: dict[tuple[int, ...], int] = {}
    t = 0
    guard = step_guard(config) * 4
    last_wanted = wanted[-1] if wanted else 0
    while not all(is_resting(lbl) for lbl in state.terms) or t < last_wanted:
        out: dict[ConfigLabel, complex] = {}
        for label, amp in state.terms.items():
            resting_before = is_resting(label)
            tr = machine.advance(label)
            if tr.label in out:
                raise NonInjectiveMapError(f"coherent step collision at {tr.label}")
            out[tr.label] = amp * tr.sign
            if not resting_before:
                tallies.setdefault(label.memory, StepLedger()).charge(
                    tr.comp, tr.action, tr.carries
                )
                if is_resting(tr.label):
                    completion[label.memory] = t + 1
        state = SparseState(out)
        t += 1
        if t in wanted:
            shots[t] = state
        if t > guard:
            raise MicroProgramError(f"coherent run exceeded {guard} global steps")
    ledger = StepLedger()
    if tallies:
        slowest = max(tallies, key=lambda m: (tallies[m].total, m))
        worst = tallies[slowest]
        ledger.charge(worst.computation_steps, worst.action_steps, worst.carry_ops)
    return CoherentRun(
        final_state=state,
        ledger=ledger,
        steps=t,
        snapshots=shots,
        component_ledgers=tallies,
        completion_steps=completion,
    )


def endpoint_hold_state(config: TaskConfig, machine: TaskMachine | None = None) -> tuple[SparseState, StepLedger]:
    """All components held at their path endpoints just after inspection.

    The free dynamics never synchronizes components (path lengths differ), so
    this state is produced by holding each component at the post-inspection
    hook until the slowest arrives.  Position equals the memory value on
    every term; with sign recording the target component carries the flipped
    sign.  Returns the state and the outbound wall-clock ledger.
    """
    machine = machine or build_machine(config)
    at_hook = lambda lbl: lbl.output == OUTPUT_LOOK and lbl.control == 1
    amp = 1.0 / math.sqrt(config.sites)
    terms: dict[ConfigLabel, complex] = {}
    worst = StepLedger()
    for m in config.lattice():
        run = run_component(config, m, machine, stop=at_hook)
        terms[run.final] = amp * run.sign
        if run.ledger.total > worst.total:
            worst = run.ledger
    ledger = StepLedger()
    ledger.charge(worst.computation_steps, worst.action_steps, worst.carry_ops)
    return SparseState(terms), ledger


def reset_ballast(state: SparseState) -> SparseState:
    """Diagnostic only: zero every ballast counter (and therefore every
    timing correlation).  Not a physical operation of the machine; exists to
    separate the entanglement obstruction from oracle cost in experiments."""
    out: dict[ConfigLabel, complex] = {}
    for label, amp in state.terms.items():
        new = label._replace(ballast=0)
        out[new] = out.get(new, 0j) + amp
    return SparseState(out)


@dataclass
class VerifyReport:
    labels_checked: int
    violations: list[tuple[str, ConfigLabel, ConfigLabel]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def reachable_labels(config: TaskConfig, machine: TaskMachine | None = None, extra_steps: int = 8) -> list[ConfigLabel]:
    """Every label reachable from the standard component starts.

    For cyclic ballast the orbits are finite and fully enumerated; for
    unbounded ballast enumeration stops ``extra_steps`` ticks past rest.
    """
    machine = machine or build_machine(config)
    seen: set[ConfigLabel] = set()
    for m in config.lattice():
        label = initial_label(m, config.d)
        ticks = 0
        guard = step_guard(config) * 8
        steps = 0
        while label not in seen:
            seen.add(label)
            label = machine.advance(label).label
            steps += 1
            if is_resting(label):
                ticks += 1
                if config.ballast_mode == "unbounded" and ticks > extra_steps:
                    break
            if steps > guard:
                raise MicroProgramError("reachability walk exceeded guard")
    return sorted(seen)


def verify_conds(
    machine: TaskMachine,
    trials: int = 200,
    seed: int = 7,
    exhaustive: bool = False,
) -> VerifyReport:
    """Check the phase-routing commutation requirements label by label.

    Computation steps must commute with every robot-position projector
    (position never changes while control=1); action steps must commute with
    every output projector and act as identity on the memory-side registers
    (output, memory, scratch, record never change while control=0).
    Violations are report content with the witnessing label, not errors.
    """
    if trials < 1:
        raise ConfigError("verify_conds needs at least one trial")
    # Enumerate the label sample space with a clean machine so that a
    # corrupted candidate cannot derail its own audit.
    labels = reachable_labels(machine.config, TaskMachine(machine.config))
    if not exhaustive:
        import random

        rng = random.Random(seed)
        labels = [labels[rng.randrange(len(labels))] for _ in range(trials)]
    report = VerifyReport(labels_checked=len(labels))
    for label in labels:
        if label.control == 1:
            tr = machine.gamma_c(label)
            if tr.label.position != label.position:
                report.violations.append(("computation_moved_robot", label, tr.label))
        else:
            tr = machine.gamma_a(label)
            if tr.label.output != label.output:
                report.violations.append(("action_changed_output", label, tr.label))
            if (
                tr.label.memory != label.memory
                or tr.label.comp != label.comp
                or tr.label.record != label.record
            ):
                report.violations.append(("action_edited_memory_side", label, tr.label))
    return report


TRACE_COLUMNS = ("step", "phase", "position", "comp", "output", "ballast")


def trajectory_rows(run: ComponentRun) -> list[tuple]:
    """Tab-separated dump rows: step index, phase kind, position vector,
    scratch register, output symbol, ballast."""
    rows = []
    for i, label in enumerate(run.trajectory):
        rows.append(
            (
                i,
                PhaseKind.of(label),
                ",".join(str(c) for c in label.position),
                ",".join(str(c) for c in label.comp),
                label.output,
                label.ballast,
            )
        )
    return rows
