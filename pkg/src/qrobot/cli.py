"""Batch command-line surface.

Non-interactive by design: every command parses flags, runs one experiment,
writes one output file (or stdout) in the declared format, and exits.  Exit
statuses: 0 success, 2 parse/usage error, 3 guard or budget error, 4 I/O
error.  Each error path prints a single machine-greppable line to stderr
with a ``qrobot: <kind>:`` prefix.

The environment variable ``QROBOT_BUDGET_MB`` (default 512) caps estimated
state sizes; oversized sweep rows are skipped with a reason, oversized
single runs are refused with exit 3.

With ``--plot`` the report commands also render a figure next to the
delimited output; figures are a convenience companion and never replace the
delimited data.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, fields

from .errors import ConfigError, GuardError, QRobotError
from .grover import (
    GroverParams,
    grover_abstract,
    grover_embedded,
    optimal_iterations,
    record_variant,
    success_probability,
)
from .machine import (
    TaskConfig,
    build_machine,
    reachable_labels,
    run_coherent,
    run_component,
    trajectory_rows,
)
from .phasepaths import MAX_PATH_STEPS, direct_element, enumerate_phase_paths, pathsum_element
from .reporting import (
    provenance,
    render_json,
    render_pairs_csv,
    render_series_figure,
    render_sweep_csv,
    render_sweep_figure,
    render_trace_figure,
    render_trace_tsv,
)
from .scaling import (
    BYTES_PER_TERM,
    entanglement_profile,
    recurrence_probe,
    sweep,
)

COMMANDS = (
    "trace",
    "coherent",
    "grover",
    "record-demo",
    "pathsum-verify",
    "sweep",
    "entropy",
    "recurrence",
)

DEFAULT_BUDGET_MB = 512

_FORMATS = {
    "trace": ("tsv",),
    "coherent": ("json",),
    "grover": ("json",),
    "record-demo": ("json", "csv"),
    "pathsum-verify": ("json",),
    "sweep": ("csv", "json"),
    "entropy": ("json", "csv"),
    "recurrence": ("json",),
}


class CLIParseError(QRobotError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit; raise instead
        raise CLIParseError(message)


@dataclass
class RunConfig:
    """Parsed and validated run request for one command."""

    command: str
    d_list: tuple[int, ...]
    n_list: tuple[int, ...]
    target: tuple[int, ...] | None
    memory: tuple[int, ...] | None
    recording: str
    ballast_mode: str
    ballast_qubits: int | None
    iterations: int | str
    snapshots: tuple[int, ...]
    stride: int
    variants: tuple[str, ...]
    grover_variant: str
    diagnostic: bool
    trials: int
    output_path: str | None
    format: str
    plot: str | None
    budget_mb: int

    @property
    def d(self) -> int:
        return self.d_list[0]

    @property
    def n(self) -> int:
        return self.n_list[0]

    def task(self) -> TaskConfig:
        target = self.target if self.target is not None else (self.n - 1,) * self.d
        return TaskConfig(
            d=self.d,
            N=self.n,
            target=target,
            recording=self.recording,
            ballast_mode=self.ballast_mode,
            ballast_qubits=self.ballast_qubits,
        )

    def to_argv(self) -> list[str]:
        """Equivalent argv; parse_cli on it reproduces this config."""
        argv = [self.command, "--d", ",".join(map(str, self.d_list)), "--n", ",".join(map(str, self.n_list))]
        if self.target is not None:
            argv += ["--target", ",".join(map(str, self.target))]
        if self.memory is not None:
            argv += ["--memory", ",".join(map(str, self.memory))]
        argv += ["--recording", "sign" if self.recording == "sign_flip" else "record"]
        if self.ballast_mode == "cyclic":
            argv += ["--ballast", f"cyclic:{self.ballast_qubits}"]
        else:
            argv += ["--ballast", "unbounded"]
        argv += ["--iterations", str(self.iterations)]
        if self.snapshots:
            argv += ["--snapshots", ",".join(map(str, self.snapshots))]
        argv += ["--stride", str(self.stride)]
        argv += ["--variants", ",".join(self.variants)]
        argv += ["--variant", self.grover_variant]
        if self.diagnostic:
            argv += ["--diagnostic"]
        argv += ["--trials", str(self.trials)]
        if self.output_path:
            argv += ["--out", self.output_path]
        argv += ["--format", self.format]
        if self.plot:
            argv += ["--plot", self.plot]
        return argv

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


def _int_vector(text: str, flag: str) -> tuple[int, ...]:
    try:
        parts = [p.strip() for p in text.split(",")]
        return tuple(int(p) for p in parts if p != "")
    except ValueError:
        raise CLIParseError(f"malformed vector for {flag}: {text!r} (expected comma-separated integers)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="qrobot", description=__doc__, add_help=True)
    sub = parser.add_subparsers(dest="command", metavar="|".join(COMMANDS))
    for name in COMMANDS:
        p = sub.add_parser(name, prog=f"qrobot {name}")
        p.add_argument("--d", default="2", help="spatial dimension (sweep: comma list)")
        p.add_argument("--n", required=True, help="grid side, power of two (sweep: comma list)")
        p.add_argument("--target", default=None, help="target site, comma-separated coordinates")
        p.add_argument("--memory", default=None, help="memory value for single-component commands")
        p.add_argument("--recording", default="sign", choices=("sign", "record"))
        p.add_argument("--ballast", default="unbounded", help="unbounded or cyclic:K")
        p.add_argument("--iterations", default="auto", help="amplification iterations, or auto")
        p.add_argument("--snapshots", default=None, help="comma-separated step indices")
        p.add_argument("--stride", default="1", help="entropy sampling stride")
        p.add_argument(
            "--variants",
            default="coherent_search,grover_after_return,classical",
            help="sweep variants, comma list",
        )
        p.add_argument("--variant", default="after_return", choices=("after_return", "at_endpoint"))
        p.add_argument("--diagnostic", action="store_true", help="reset timing correlations between iterations (non-physical)")
        p.add_argument("--trials", default="50", help="randomized pairs per step count (pathsum-verify)")
        p.add_argument("--out", default=None, help="output file path (default stdout)")
        p.add_argument("--format", default=None, choices=("json", "csv", "tsv"))
        p.add_argument("--plot", nargs="?", const="", default=None, help="render a figure (optional path)")
    return parser


def parse_cli(argv: list[str]) -> RunConfig:
    """Parse and validate argv into a RunConfig; raises CLIParseError."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise CLIParseError(f"missing command; expected one of {', '.join(COMMANDS)}")

    d_list = _int_vector(ns.d, "--d")
    n_list = _int_vector(ns.n, "--n")
    if not d_list or not n_list:
        raise CLIParseError("--d and --n must be non-empty")
    if ns.command != "sweep" and (len(d_list) > 1 or len(n_list) > 1):
        raise CLIParseError(f"{ns.command} takes single --d and --n values")

    target = _int_vector(ns.target, "--target") if ns.target is not None else None
    memory = _int_vector(ns.memory, "--memory") if ns.memory is not None else None

    recording = "sign_flip" if ns.recording == "sign" else "record_qubit"
    ballast_mode, ballast_qubits = "unbounded", None
    if ns.ballast != "unbounded":
        if not ns.ballast.startswith("cyclic:"):
            raise CLIParseError(f"--ballast must be 'unbounded' or 'cyclic:K', got {ns.ballast!r}")
        try:
            ballast_qubits = int(ns.ballast.split(":", 1)[1])
        except ValueError:
            raise CLIParseError(f"malformed cyclic ballast width: {ns.ballast!r}")
        ballast_mode = "cyclic"

    if ns.iterations == "auto":
        iterations: int | str = "auto"
    else:
        try:
            iterations = int(ns.iterations)
        except ValueError:
            raise CLIParseError(f"--iterations must be 'auto' or an integer, got {ns.iterations!r}")
        if iterations < 0:
            raise CLIParseError("--iterations must be >= 0")

    snapshots = _int_vector(ns.snapshots, "--snapshots") if ns.snapshots else ()
    try:
        stride = int(ns.stride)
        trials = int(ns.trials)
    except ValueError:
        raise CLIParseError("--stride and --trials must be integers")

    variants = tuple(v.strip() for v in ns.variants.split(",") if v.strip())

    fmt = ns.format or _FORMATS[ns.command][0]
    if fmt not in _FORMATS[ns.command]:
        raise CLIParseError(
            f"format {fmt!r} is not legal for {ns.command}; allowed: {', '.join(_FORMATS[ns.command])}"
        )

    plot = None
    if ns.plot is not None:
        if ns.plot:
            plot = ns.plot
        elif ns.out:
            plot = os.path.splitext(ns.out)[0] + ".png"
        else:
            raise CLIParseError("--plot without a path requires --out to derive the figure name")

    config = RunConfig(
        command=ns.command,
        d_list=d_list,
        n_list=n_list,
        target=target,
        memory=memory,
        recording=recording,
        ballast_mode=ballast_mode,
        ballast_qubits=ballast_qubits,
        iterations=iterations,
        snapshots=snapshots,
        stride=stride,
        variants=variants,
        grover_variant=ns.variant,
        diagnostic=ns.diagnostic,
        trials=trials,
        output_path=ns.out,
        format=fmt,
        plot=plot,
        budget_mb=int(os.environ.get("QROBOT_BUDGET_MB", DEFAULT_BUDGET_MB)),
    )
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    for n in config.n_list:
        if n < 2 or n & (n - 1):
            raise CLIParseError(f"--n values must be powers of two >= 2, got {n}")
    for d in config.d_list:
        if d < 1:
            raise CLIParseError(f"--d values must be >= 1, got {d}")
    if config.command in ("trace",) and config.memory is None:
        raise CLIParseError("trace requires --memory")
    if config.command in ("trace", "coherent", "grover", "record-demo", "entropy") and config.target is None:
        raise CLIParseError(f"{config.command} requires --target")
    if config.command != "sweep":
        if config.target is not None:
            if len(config.target) != config.d or any(c < 0 or c >= config.n for c in config.target):
                raise CLIParseError(
                    f"target {','.join(map(str, config.target))} outside the {config.n}^{config.d} grid"
                )
        if config.memory is not None:
            if len(config.memory) != config.d or any(c < 0 or c >= config.n for c in config.memory):
                raise CLIParseError(
                    f"memory {','.join(map(str, config.memory))} outside the {config.n}^{config.d} grid"
                )
    if config.command == "grover" and config.recording != "sign_flip":
        raise CLIParseError("grover requires --recording sign")
    if config.command == "record-demo" and config.recording != "record_qubit":
        raise CLIParseError("record-demo requires --recording record")


def _check_budget(terms: int, budget_mb: int) -> None:
    estimated = terms * BYTES_PER_TERM
    if estimated > budget_mb * (1 << 20):
        raise GuardError(
            f"estimated state size {estimated >> 20} MiB exceeds budget {budget_mb} MiB "
            f"(set QROBOT_BUDGET_MB to raise)"
        )


# -- command implementations --------------------------------------------------


def _cmd_trace(config: RunConfig):
    run = run_component(config.task(), config.memory)
    rows = trajectory_rows(run)
    body = render_trace_tsv(rows)
    figure = (lambda path: render_trace_figure(rows, config.d, path)) if config.plot else None
    return body, figure


def _cmd_coherent(config: RunConfig):
    task = config.task()
    _check_budget(task.sites, config.budget_mb)
    run = run_coherent(task, snapshots=config.snapshots)
    components = [
        {
            "memory": list(lbl.memory),
            "ballast": lbl.ballast,
            "amplitude_re": amp.real,
            "amplitude_im": amp.imag,
        }
        for lbl, amp in run.final_state.sorted_items()
    ]
    payload = {
        "config": config.echo(),
        "provenance": provenance(),
        "steps_total": run.ledger.total,
        "computation_steps": run.ledger.computation_steps,
        "action_steps": run.ledger.action_steps,
        "carry_ops": run.ledger.carry_ops,
        "label_steps": run.steps,
        "completion_label_steps": {
            ",".join(map(str, m)): t for m, t in sorted(run.completion_steps.items())
        },
        "final_components": components,
        "snapshot_steps": sorted(run.snapshots),
    }
    return render_json(payload), None


def _cmd_grover(config: RunConfig):
    task = config.task()
    M = task.sites
    _check_budget(M * M, config.budget_mb)
    m = optimal_iterations(M) if config.iterations == "auto" else config.iterations
    params = GroverParams.build(M, task.lattice().index(task.target), m)
    result = grover_embedded(
        task, m, variant=config.grover_variant, diagnostic_disentangle=config.diagnostic
    )
    _, abstract_p = grover_abstract(M, params.target_index, m)
    payload = {
        "config": config.echo(),
        "provenance": provenance(),
        "M": M,
        "m": m,
        "theta": params.theta,
        "beta": params.beta,
        "probability_closed_form": success_probability(M, m),
        "probability_abstract_measured": abstract_p,
        "probability_measured": result.probability,
        "probability_trace": [
            {"m": i, "probability": p, "steps_total": s}
            for i, p, s in result.iteration_triples
        ],
        "steps_total": result.ledger.total,
        "computation_steps": result.ledger.computation_steps,
        "action_steps": result.ledger.action_steps,
        "carry_ops": result.ledger.carry_ops,
        "grover_iterations": result.ledger.grover_iterations,
    }
    figure = None
    if config.plot:
        points = [(i, p) for i, p, _ in result.iteration_triples]

        def figure(path, points=points):
            render_series_figure(points, path, "iteration", "target probability")

    return render_json(payload), figure


def _cmd_record_demo(config: RunConfig):
    task = config.task()
    M = task.sites
    m_max = (
        4 * int(math.isqrt(M)) if config.iterations == "auto" else config.iterations
    )
    result = record_variant(task, m_max)
    rows = [(i, p) for i, p in enumerate(result.probabilities)]
    if config.format == "csv":
        return render_pairs_csv(("m", "probability"), rows), (
            (lambda path: render_series_figure(rows, path, "iteration", "flagged-target probability"))
            if config.plot
            else None
        )
    payload = {
        "config": config.echo(),
        "provenance": provenance(),
        "M": M,
        "m_max": m_max,
        "probabilities": result.probabilities,
        "max_probability": result.max_probability,
        "worst_norm_error": max(abs(n - 1.0) for n in result.norms),
    }
    figure = None
    if config.plot:
        def figure(path, rows=rows):
            render_series_figure(rows, path, "iteration", "flagged-target probability")

    return render_json(payload), figure


def _cmd_pathsum_verify(config: RunConfig):
    import random

    task = config.task()
    n_max = config.iterations if isinstance(config.iterations, int) else 6
    if not 1 <= n_max <= MAX_PATH_STEPS:
        raise GuardError(f"pathsum-verify step count must be 1..{MAX_PATH_STEPS}, got {n_max}")
    machine = build_machine(task)
    labels = reachable_labels(task, machine)
    rng = random.Random(2027)
    per_n = []
    for n in range(1, n_max + 1):
        worst = 0.0
        for _ in range(config.trials):
            w_in = labels[rng.randrange(len(labels))]
            if rng.random() < 0.5:
                lbl = w_in
                for _ in range(n):
                    lbl = machine.advance(lbl).label
                w_out = lbl
            else:
                w_out = labels[rng.randrange(len(labels))]
            dev = abs(
                pathsum_element(machine, w_out, w_in, n)
                - direct_element(machine, w_out, w_in, n)
            )
            worst = max(worst, dev)
        per_kind = sum(1 for p in enumerate_phase_paths(n) if p.v1 == "computation")
        per_n.append(
            {
                "n": n,
                "max_abs_deviation": worst,
                "compositions_per_kind": per_kind,
                "expected_compositions": 2 ** (n - 1),
            }
        )
    payload = {
        "config": config.echo(),
        "provenance": provenance(),
        "trials_per_n": config.trials,
        "results": per_n,
        "max_abs_deviation": max(r["max_abs_deviation"] for r in per_n),
    }
    return render_json(payload), None


def _cmd_sweep(config: RunConfig):
    result = sweep(list(config.variants), list(config.d_list), list(config.n_list), config.budget_mb)
    for variant, d, n, reason in result.skipped:
        print(f"qrobot: skipped {variant} d={d} N={n}: {reason}", file=sys.stderr)
    figure = (lambda path: render_sweep_figure(result.rows, path)) if config.plot else None
    if config.format == "json":
        payload = {
            "config": config.echo(),
            "provenance": provenance(),
            "rows": [
                {
                    "variant": r.variant,
                    "d": r.d,
                    "N": r.N,
                    "M": r.M,
                    "grover_iterations": r.grover_iterations,
                    "steps_total": r.steps_total,
                    "computation_steps": r.computation_steps,
                    "action_steps": r.action_steps,
                    "carry_ops": r.carry_ops,
                    "max_entropy_bits": r.max_entropy_bits,
                }
                for r in result.rows
            ],
            "skipped": [
                {"variant": v, "d": d, "N": n, "reason": reason}
                for v, d, n, reason in result.skipped
            ],
        }
        return render_json(payload), figure
    return render_sweep_csv(result.rows), figure


def _cmd_entropy(config: RunConfig):
    task = config.task()
    profile = entanglement_profile(task, stride=config.stride)
    rows = [(step, bits) for step, bits in profile.points]
    figure = (
        (lambda path: render_series_figure(rows, path, "step", "memory entropy (bits)"))
        if config.plot
        else None
    )
    if config.format == "csv":
        return render_pairs_csv(("step", "entropy_bits"), rows), figure
    payload = {
        "config": config.echo(),
        "provenance": provenance(),
        "points": [{"step": s, "entropy_bits": b} for s, b in profile.points],
        "endpoint_hold_step": profile.endpoint_hold_step,
        "endpoint_hold_entropy_bits": profile.endpoint_hold_entropy,
        "final_step": profile.final_step,
        "final_entropy_bits": profile.final_entropy,
    }
    return render_json(payload), figure


def _cmd_recurrence(config: RunConfig):
    memory = config.memory if config.memory is not None else (0,) * config.d
    result = recurrence_probe(config.task(), memory)
    payload = {
        "config": config.echo(),
        "provenance": provenance(),
        "memory": list(memory),
        "found": result.found,
        "recurrence_step": result.step,
        "budget_steps": result.budget_steps,
    }
    return render_json(payload), None


_RUNNERS = {
    "trace": _cmd_trace,
    "coherent": _cmd_coherent,
    "grover": _cmd_grover,
    "record-demo": _cmd_record_demo,
    "pathsum-verify": _cmd_pathsum_verify,
    "sweep": _cmd_sweep,
    "entropy": _cmd_entropy,
    "recurrence": _cmd_recurrence,
}


def emit(body: str, config: RunConfig, figure=None) -> int:
    """Write the rendered body (and optional figure); returns exit status."""
    try:
        if config.output_path:
            with open(config.output_path, "w", encoding="utf-8", newline="") as fh:
                fh.write(body)
        else:
            sys.stdout.write(body)
        if figure is not None and config.plot:
            figure(config.plot)
    except OSError as exc:
        print(f"qrobot: io-error: {exc}", file=sys.stderr)
        return 4
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        config = parse_cli(argv)
    except CLIParseError as exc:
        print(f"qrobot: parse-error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"qrobot: parse-error: {exc}", file=sys.stderr)
        return 2
    try:
        body, figure = _RUNNERS[config.command](config)
    except (GuardError,) as exc:
        print(f"qrobot: guard-error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"qrobot: parse-error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"qrobot: io-error: {exc}", file=sys.stderr)
        return 4
    return emit(body, config, figure)


if __name__ == "__main__":
    sys.exit(main())
