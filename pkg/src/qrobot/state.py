"""Exact sparse linear algebra over composite configuration labels.

A wavefunction is stored as an associative map from hashable basis labels to
complex amplitudes.  The machine simulator keys states by :class:`ConfigLabel`
(the full classical configuration of robot, registers and ballast); the
amplitude-amplification code keys states by plain integers or tuples.  All
operations are exact up to double precision: the dynamics simulated here is
permutation-plus-phase, so sparsity is preserved and pruning only removes
exact-zero residue left behind by projector arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import NonInjectiveMapError

PRUNE_THRESHOLD = 1e-14

# Output symbols understood by the task machine.  "+x1" moves one site along
# the first axis, "-x2" one site back along the second, "look" inspects the
# current site, "dn" is the resting symbol.
OUTPUT_DONE = "dn"
OUTPUT_LOOK = "look"


def move_symbol(axis: int, forward: bool) -> str:
    return ("+x" if forward else "-x") + str(axis + 1)


def output_alphabet(d: int) -> tuple[str, ...]:
    """Resting, per-axis moves, and the site-inspection symbol for dimension d."""
    symbols = [OUTPUT_DONE]
    for axis in range(d):
        symbols.append(move_symbol(axis, True))
        symbols.append(move_symbol(axis, False))
    symbols.append(OUTPUT_LOOK)
    return tuple(symbols)


class ConfigLabel(NamedTuple):
    """One classical configuration of the full system.

    Field order gives the lexicographic ordering used for deterministic
    iteration and reproducible output files.
    """

    position: tuple[int, ...]
    memory: tuple[int, ...]
    comp: tuple[int, ...]
    output: str
    control: int
    record: int
    ballast: int


def initial_label(memory: Sequence[int], d: int) -> ConfigLabel:
    """Component start label: robot at the origin, registers cleared, armed."""
    return ConfigLabel(
        position=(0,) * d,
        memory=tuple(memory),
        comp=(0,) * d,
        output=OUTPUT_DONE,
        control=1,
        record=0,
        ballast=0,
    )


class SparseState:
    """Associative label -> complex amplitude map; the simulated wavefunction.

    Instances are treated as immutable by all public operations, which return
    new states.  Construction prunes amplitudes below ``PRUNE_THRESHOLD``.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Hashable, complex] | None = None):
        pruned = {}
        if terms:
            for label, amp in terms.items():
                a = complex(amp)
                if abs(a) >= PRUNE_THRESHOLD:
                    pruned[label] = a
        self.terms = pruned

    @classmethod
    def basis(cls, label: Hashable) -> "SparseState":
        return cls({label: 1.0})

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def __eq__(self, other) -> bool:
        return isinstance(other, SparseState) and self.terms == other.terms

    def amplitude(self, label: Hashable) -> complex:
        return self.terms.get(label, 0j)

    def sorted_items(self) -> list[tuple[Hashable, complex]]:
        return sorted(self.terms.items(), key=lambda kv: kv[0])

    def map_amplitudes(self, f: Callable[[Hashable, complex], complex]) -> "SparseState":
        return SparseState({k: f(k, v) for k, v in self.terms.items()})


def norm(state: SparseState) -> float:
    """Euclidean norm sqrt(sum |amplitude|^2); 0.0 for the empty state."""
    return math.sqrt(sum((a.real * a.real + a.imag * a.imag) for a in state.terms.values()))


def inner(a: SparseState, b: SparseState) -> complex:
    """<a|b> = sum over shared labels of conj(a[k]) * b[k]."""
    if len(a.terms) > len(b.terms):
        return complex(sum(a.terms[k].conjugate() * v for k, v in b.terms.items() if k in a.terms))
    return complex(sum(v.conjugate() * b.terms[k] for k, v in a.terms.items() if k in b.terms))


def apply_component_map(
    state: SparseState,
    f: Callable[[Hashable], tuple[Hashable, complex]],
) -> SparseState:
    """Apply a permutation-with-phase operator term by term.

    ``f`` maps a label to ``(new_label, phase)`` and must be injective on the
    support of ``state``; a collision of two mapped labels signals a
    non-unitary map and raises :class:`NonInjectiveMapError`.
    """
    out: dict[Hashable, complex] = {}
    for label, amp in state.terms.items():
        new_label, phase = f(label)
        if new_label in out:
            raise NonInjectiveMapError(
                f"two support labels map to {new_label!r}; component map is not injective"
            )
        out[new_label] = amp * phase
    return SparseState(out)


@dataclass
class DensityMatrix:
    """Dense reduced density matrix over an explicit kept-register basis."""

    basis: tuple[Hashable, ...]
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.basis)

    def validate(self, atol: float = 1e-12) -> None:
        m = self.matrix
        if m.shape != (self.dim, self.dim):
            raise ValueError(f"matrix shape {m.shape} does not match basis size {self.dim}")
        if not np.allclose(m, m.conj().T, atol=atol):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > atol or abs(np.trace(m).imag) > atol:
            raise ValueError(f"density matrix trace {np.trace(m)} is not 1")
        eigs = np.linalg.eigvalsh(m)
        if eigs.min() < -atol:
            raise ValueError(f"density matrix has negative eigenvalue {eigs.min()}")


def _split_label(label: Hashable, keep) -> tuple[Hashable, Hashable]:
    """Split a label into (kept part, traced-out part) per the selector.

    ``keep`` is a ConfigLabel field name, a sequence of field names, or a
    callable returning the pair directly.
    """
    if callable(keep):
        return keep(label)
    if isinstance(keep, str):
        keep = (keep,)
    fields = type(label)._fields
    kept = tuple(getattr(label, name) for name in keep)
    rest = tuple(getattr(label, name) for name in fields if name not in keep)
    if len(kept) == 1:
        kept = kept[0]
    return kept, rest


def reduced_density(state: SparseState, keep="memory") -> DensityMatrix:
    """Partial trace of |psi><psi| onto the kept register.

    Kept values are enumerated lazily from the support, never over the full
    product space.  The trace of the result equals norm(state)**2.
    """
    groups: dict[Hashable, dict[Hashable, complex]] = {}
    kept_values: set = set()
    for label, amp in state.terms.items():
        kept, rest = _split_label(label, keep)
        kept_values.add(kept)
        groups.setdefault(rest, {})[kept] = amp
    basis = tuple(sorted(kept_values))
    index = {k: i for i, k in enumerate(basis)}
    rho = np.zeros((len(basis), len(basis)), dtype=complex)
    for vec in groups.values():
        for k1, a1 in vec.items():
            i = index[k1]
            for k2, a2 in vec.items():
                rho[i, index[k2]] += a1 * a2.conjugate()
    return DensityMatrix(basis=basis, matrix=rho)


def entropy_bits(rho: DensityMatrix) -> float:
    """Von Neumann entropy -sum(lam * log2 lam) over positive eigenvalues."""
    eigs = np.linalg.eigvalsh(rho.matrix)
    eigs = eigs[eigs > 1e-15]
    return float(-(eigs * np.log2(eigs)).sum()) if eigs.size else 0.0


def bipartition_entropy_bits(state: SparseState, keep="memory") -> float:
    """Entanglement entropy of the kept register, via singular values.

    Independent of the dense partial-trace route: builds the amplitude matrix
    A[kept, rest] and returns the entropy of its squared singular values.
    Scales with the support, not with the kept-register dimension squared.
    """
    kept_values: set = set()
    rest_values: set = set()
    entries = []
    for label, amp in state.terms.items():
        kept, rest = _split_label(label, keep)
        kept_values.add(kept)
        rest_values.add(rest)
        entries.append((kept, rest, amp))
    kept_index = {k: i for i, k in enumerate(sorted(kept_values))}
    rest_index = {r: i for i, r in enumerate(sorted(rest_values))}
    a = np.zeros((len(kept_index), len(rest_index)), dtype=complex)
    for kept, rest, amp in entries:
        a[kept_index[kept], rest_index[rest]] += amp
    lam = np.linalg.svd(a, compute_uv=False) ** 2
    lam = lam[lam > 1e-15]
    return float(-(lam * np.log2(lam)).sum()) if lam.size else 0.0
