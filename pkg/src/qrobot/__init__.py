"""Sparse simulator for a reversible grid-search machine.

A mobile register machine walks a d-dimensional grid of side N under
strictly alternating computation and action phases, marks a target site, and
returns; an amplitude-amplification layer processes the search result with
honest per-iteration oracle costs.  The measurement layer fits step-count
scaling, profiles memory-register entanglement, and probes finite-ballast
recurrence.
"""

from .errors import (
    ConfigError,
    GuardError,
    MicroProgramError,
    NonInjectiveMapError,
    QRobotError,
    RegisterUnderflowError,
)
from .grover import (
    GroverParams,
    grover_abstract,
    grover_embedded,
    optimal_iterations,
    record_variant,
    rotation_params,
    success_probability,
    uniform_state,
)
from .machine import (
    TARIFF,
    ComponentRun,
    StepLedger,
    TaskConfig,
    TaskMachine,
    build_machine,
    completion_profile,
    decrement,
    endpoint_hold_state,
    increment,
    run_coherent,
    run_component,
    step,
    verify_conds,
)
from .phasepaths import PhasePath, direct_element, enumerate_phase_paths, pathsum_element
from .scaling import (
    ScalingRow,
    classical_baseline,
    entanglement_profile,
    fit_scaling,
    recurrence_probe,
    sweep,
)
from .state import (
    ConfigLabel,
    DensityMatrix,
    SparseState,
    apply_component_map,
    bipartition_entropy_bits,
    entropy_bits,
    initial_label,
    inner,
    norm,
    reduced_density,
)

__version__ = "0.1.0"
