"""Expansion of n-step evolution into alternating-phase compositions.

The n-th power of the step operator splits into a sum over compositions of n
into phase blocks: t alternating phases of durations h_1..h_t, the first
phase kind fixed by the input label's control bit.  Each block applies one
half of the step operator h times; the half annihilates terms whose control
bit selects the other phase, so intermediate sums run only over the reachable
support.  Summing block products over all compositions reproduces the
directly iterated evolution exactly, which is what the verification command
checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .errors import GuardError
from .machine import PhaseKind, TaskMachine, step
from .state import ConfigLabel, SparseState

MAX_PATH_STEPS = 12


@dataclass(frozen=True)
class PhasePath:
    """One composition of n into alternating phase blocks."""

    t: int
    h: tuple[int, ...]
    v1: str  # starting phase kind

    def __post_init__(self):
        if self.t != len(self.h) or any(d < 1 for d in self.h):
            raise ValueError(f"invalid phase durations {self.h}")

    @property
    def kinds(self) -> tuple[str, ...]:
        other = {
            PhaseKind.COMPUTATION: PhaseKind.ACTION,
            PhaseKind.ACTION: PhaseKind.COMPUTATION,
        }
        out = [self.v1]
        for _ in range(self.t - 1):
            out.append(other[out[-1]])
        return tuple(out)


def _compositions(n: int) -> Iterator[tuple[int, ...]]:
    if n == 0:
        yield ()
        return
    for first in range(1, n + 1):
        for rest in _compositions(n - first):
            yield (first,) + rest


def enumerate_phase_paths(n: int) -> list[PhasePath]:
    """All phase paths of n steps, for both starting kinds.

    There are exactly 2^(n-1) compositions per starting kind.  Guarded to
    n <= 12; beyond that the enumeration is combinatorially pointless.
    """
    if not 1 <= n <= MAX_PATH_STEPS:
        raise GuardError(f"phase-path enumeration guarded to 1..{MAX_PATH_STEPS}, got {n}")
    paths = []
    for v1 in (PhaseKind.COMPUTATION, PhaseKind.ACTION):
        for h in _compositions(n):
            paths.append(PhasePath(t=len(h), h=h, v1=v1))
    return paths


def _apply_half(machine: TaskMachine, state: SparseState, kind: str) -> SparseState:
    """One application of the selected step-operator half; terms whose
    control bit selects the other phase are annihilated."""
    gamma = machine.gamma_c if kind == PhaseKind.COMPUTATION else machine.gamma_a
    out: dict[ConfigLabel, complex] = {}
    for label, amp in state.terms.items():
        tr = gamma(label)
        if tr is None:
            continue
        out[tr.label] = out.get(tr.label, 0j) + amp * tr.sign
    return SparseState(out)


def apply_phase_block(machine: TaskMachine, state: SparseState, kind: str, h: int) -> SparseState:
    for _ in range(h):
        state = _apply_half(machine, state, kind)
        if not state.terms:
            break
    return state


def pathsum_element(
    machine: TaskMachine,
    w_out: ConfigLabel,
    w_in: ConfigLabel,
    n: int,
) -> complex:
    """Matrix element of the n-step evolution as a sum over phase paths.

    The starting kind is fixed by w_in's control bit; the final phase may be
    left incomplete, so every composition contributes regardless of where
    phase boundaries fall.
    """
    if not 1 <= n <= MAX_PATH_STEPS:
        raise GuardError(f"path-sum element guarded to 1..{MAX_PATH_STEPS}, got {n}")
    v1 = PhaseKind.of(w_in)
    total = 0j
    for h in _compositions(n):
        path = PhasePath(t=len(h), h=h, v1=v1)
        state = SparseState.basis(w_in)
        for kind, dur in zip(path.kinds, path.h):
            state = apply_phase_block(machine, state, kind, dur)
            if not state.terms:
                break
        total += state.amplitude(w_out)
    return total


def direct_element(
    machine: TaskMachine,
    w_out: ConfigLabel,
    w_in: ConfigLabel,
    n: int,
) -> complex:
    """Matrix element by direct n-fold application of the step operator."""
    state = SparseState.basis(w_in)
    for _ in range(n):
        state = step(machine, state)
    return state.amplitude(w_out)
