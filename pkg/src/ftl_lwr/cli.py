"""Command-line entry point: presets, JSON configs, and CSV/JSON artifacts.

Three subcommands share one config schema (see SimConfig):

    ftl-lwr simulate --preset figure12 --out results/
    ftl-lwr converge --config study.json --out results/
    ftl-lwr validate --preset constant

Exit codes: 0 success, 2 config error, 3 invariant violation, 4 numerical
failure. Identical configs produce byte-identical files: every artifact is
written to a temp file in the target directory and renamed into place.
"""

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .analysis import (
    DISCRETE_TOL,
    ODE_TOL,
    ExactRiemannOracle,
    GodunovOracle,
    StudyConfig,
    check_discrete_run,
    check_trajectory,
    convergence_study,
    default_k_grid,
    entropy_residual_history,
)
from .ftl_euler import exact_landing_steps, run_discrete, step_sequence
from .ftl_ode import (
    LagrangianState,
    Leader,
    Periodic,
    StepRejected,
    integrate,
    leader_gap,
    positions_from_state,
)
from .lagrange_euler import eulerian_density, place_vehicles, rho0_from_config
from .velocity_models import model_from_config


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 2."""


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_NUMERICAL = 4

# Matching absolute times to step multiples of dt
_TIME_ATOL = 1e-9


PRESETS = {
    # Periodic cosine bump, run with dt = ell so T=2 lands on step 40.
    "figure12": {
        "velocity": {"kind": "linear", "v_max": 1.0},
        "rho0": {"kind": "cosine", "offset": 0.5, "amplitude": 0.5},
        "boundary": {"kind": "periodic", "a": -1.0, "b": 1.0},
        "N": 20,
        "T": 2.0,
        "mode": "euler",
        "lam": 1.0,
        "record_every": 1,
        "density_times": [0.0, 2.0],
        "ladder": [40, 80, 160, 320, 640],
        "oracle": {"kind": "godunov", "resolution": 8192, "cfl": 0.9},
    },
    # Equilibrium control: nothing moves relative to the profile.
    "constant": {
        "velocity": {"kind": "linear", "v_max": 1.0},
        "rho0": {"kind": "constant", "value": 0.5},
        "boundary": {"kind": "periodic", "a": 0.0, "b": 1.0},
        "N": 10,
        "T": 1.0,
        "mode": "euler",
        "lam": 0.9,
        "record_every": 1,
        "density_times": [0.0, 1.0],
        "ladder": [10, 20, 40],
        "oracle": {"kind": "godunov", "resolution": 4096, "cfl": 0.9},
    },
    # Jam dissolving behind a fast leader: rarefaction fan.
    "riemann-rarefaction": {
        "velocity": {"kind": "linear", "v_max": 1.0},
        "rho0": {"kind": "constant", "value": 1.0},
        "boundary": {"kind": "leader", "M": 4.0, "domain": [-1.0, 0.0]},
        "N": 41,
        "T": 0.8,
        "mode": "euler",
        "lam": 0.9,
        "record_every": 1,
        "density_times": [0.0, 0.8],
        "ladder": [41, 81, 161, 321, 641],
        "oracle": {"kind": "exact-riemann", "left": 1.0, "right": 0.25, "split": 0.0},
    },
    # Light traffic catching up with a dense platoon: moving shock.
    "riemann-shock": {
        "velocity": {"kind": "linear", "v_max": 1.0},
        "rho0": {"kind": "riemann", "left": 0.2, "right": 0.8, "split": 0.0},
        "boundary": {"kind": "leader", "M": 1.25, "domain": [-1.0, 1.0]},
        "N": 201,
        "T": 0.8,
        "mode": "euler",
        "lam": 0.9,
        "record_every": 1,
        "density_times": [0.0, 0.8],
        "ladder": [201, 401, 801],
        "oracle": {"kind": "exact-riemann", "left": 0.2, "right": 0.8, "split": 0.0},
    },
}


@dataclass(frozen=True)
class SimConfig:
    """Validated run description shared by all subcommands."""

    model: object  # VelocityModel
    rho0: object  # callable rho0(z)
    boundary: object  # Periodic | Leader
    domain: Tuple[float, float]
    N: int
    T: float
    mode: str
    lam: Optional[float]
    dt: Optional[float]
    record_every: int
    density_times: Tuple[float, ...]
    ladder: Tuple[int, ...]
    oracle: object
    out_dir: Optional[str]


def _need(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing required key {key!r}")
    return cfg[key]


def _parse_boundary(raw) -> Tuple[object, Tuple[float, float]]:
    if not isinstance(raw, dict):
        raise ConfigError("boundary must be an object")
    kind = raw.get("kind")
    if kind == "periodic":
        try:
            a, b = float(_need(raw, "a")), float(_need(raw, "b"))
            return Periodic(a=a, b=b), (a, b)
        except ValueError as exc:
            raise ConfigError(f"boundary: {exc}") from exc
    if kind == "leader":
        try:
            mode = Leader(M=float(_need(raw, "M")))
        except ValueError as exc:
            raise ConfigError(f"boundary: {exc}") from exc
        dom = _need(raw, "domain")
        if not (isinstance(dom, (list, tuple)) and len(dom) == 2):
            raise ConfigError("boundary.domain must be [a, b]")
        a, b = float(dom[0]), float(dom[1])
        if not a < b:
            raise ConfigError(f"boundary.domain needs a < b, got [{a}, {b}]")
        return mode, (a, b)
    raise ConfigError(f"boundary.kind must be periodic|leader, got {kind!r}")


def _parse_oracle(raw) -> object:
    if raw is None:
        return GodunovOracle()
    if not isinstance(raw, dict):
        raise ConfigError("oracle must be an object")
    kind = raw.get("kind", "godunov")
    if kind == "godunov":
        res = int(raw.get("resolution", 8192))
        cfl = float(raw.get("cfl", 0.9))
        if res < 2 or not 0 < cfl <= 1:
            raise ConfigError(f"oracle: bad resolution/cfl ({res}, {cfl})")
        return GodunovOracle(resolution=res, cfl=cfl)
    if kind == "exact-riemann":
        return ExactRiemannOracle(
            left=float(_need(raw, "left")),
            right=float(_need(raw, "right")),
            split=float(raw.get("split", 0.0)),
        )
    raise ConfigError(f"oracle.kind must be godunov|exact-riemann, got {kind!r}")


def parse_config(raw: dict, mode_override: Optional[str] = None,
                 unsafe: bool = False) -> SimConfig:
    """Validate a raw JSON mapping into a SimConfig.

    Raises ConfigError with the offending key in the message. The CFL guard
    for euler mode lives here: configs asking for lam*L_v > 1 are refused
    unless unsafe is set (the validate --unsafe escape hatch).
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    known = {
        "velocity", "rho0", "boundary", "N", "T", "mode", "lam", "dt",
        "record_every", "density_times", "ladder", "oracle", "out",
    }
    stray = sorted(set(raw) - known)
    if stray:
        raise ConfigError(f"unknown config keys: {stray}")

    try:
        model = model_from_config(_need(raw, "velocity"))
    except ValueError as exc:
        raise ConfigError(f"velocity: {exc}") from exc
    try:
        rho0 = rho0_from_config(_need(raw, "rho0"))
    except ValueError as exc:
        raise ConfigError(f"rho0: {exc}") from exc
    boundary, domain = _parse_boundary(_need(raw, "boundary"))

    N = _need(raw, "N")
    if not (isinstance(N, int) and N >= 2):
        raise ConfigError(f"N must be an integer >= 2, got {N!r}")
    T = float(_need(raw, "T"))
    if not T >= 0:
        raise ConfigError(f"T must be nonnegative, got {T}")

    mode = mode_override or raw.get("mode", "euler")
    if mode not in ("euler", "ode"):
        raise ConfigError(f"mode must be euler|ode, got {mode!r}")

    lam = raw.get("lam")
    if lam is not None:
        lam = float(lam)
        if not lam > 0:
            raise ConfigError(f"lam must be positive, got {lam}")
    dt = raw.get("dt")
    if dt is not None:
        dt = float(dt)
        if not dt > 0:
            raise ConfigError(f"dt must be positive, got {dt}")

    record_every = raw.get("record_every", 1)
    if not (isinstance(record_every, int) and record_every >= 1):
        raise ConfigError(f"record_every must be a positive integer, got {record_every!r}")

    times = raw.get("density_times", [0.0, T])
    if not isinstance(times, (list, tuple)):
        raise ConfigError("density_times must be a list of times")
    density_times = tuple(float(t) for t in times)
    for t in density_times:
        if t < -_TIME_ATOL or t > T + _TIME_ATOL:
            raise ConfigError(f"density time {t} outside [0, {T}]")

    ladder = tuple(raw.get("ladder", ()))
    if any(not isinstance(n, int) or n < 2 for n in ladder):
        raise ConfigError(f"ladder entries must be integers >= 2, got {list(ladder)}")

    oracle = _parse_oracle(raw.get("oracle"))
    out_dir = raw.get("out")

    cfg = SimConfig(
        model=model, rho0=rho0, boundary=boundary, domain=domain,
        N=N, T=T, mode=mode, lam=lam, dt=dt, record_every=record_every,
        density_times=density_times, ladder=ladder, oracle=oracle,
        out_dir=out_dir,
    )
    if mode == "euler" and not unsafe:
        lam_req = lam if lam is not None else 0.9 / model.L_v
        if lam_req * model.L_v > 1.0 + 1e-12:
            raise ConfigError(
                f"lam*L_v = {lam_req * model.L_v} > 1 breaks the step-size "
                f"guard (only validate --unsafe may run such configs)"
            )
    return cfg


def load_config(path: Optional[str], preset: Optional[str],
                mode_override: Optional[str] = None,
                unsafe: bool = False) -> SimConfig:
    if (path is None) == (preset is None):
        raise ConfigError("exactly one of --config and --preset is required")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; available: {sorted(PRESETS)}"
            )
        raw = PRESETS[preset]
    else:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_config(raw, mode_override, unsafe)


# ------------------------------------------------------------ file emission


def _atomic_write(path: str, text: str):
    """Write-complete-then-rename so readers never see a partial file."""
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _trajectory_rows(states: Sequence[LagrangianState]):
    for s in states:
        z = positions_from_state(s)
        gaps = np.append(s.y, leader_gap(s))
        for i in range(s.n_vehicles):
            yield (float(s.t), i + 1, float(gaps[i]), float(z[i]))


def _grid_rows(states: Sequence[LagrangianState], record_every: int):
    for idx, s in enumerate(states):
        z = positions_from_state(s)
        for i in range(s.n_vehicles):
            yield (idx * record_every, float(s.t), i + 1,
                   float(i * s.ell), float(z[i]))


def _density_rows(states: Sequence[LagrangianState], times: Sequence[float]):
    recorded = np.array([s.t for s in states])
    for t_req in times:
        k = int(np.argmin(np.abs(recorded - t_req)))
        if abs(recorded[k] - t_req) > _TIME_ATOL * max(1.0, abs(t_req)):
            raise ConfigError(
                f"density time {t_req} is not a recorded level "
                f"(nearest: {recorded[k]}); adjust record_every or the times"
            )
        density = eulerian_density(states[k])
        # rows carry the requested time, not the accumulated float level
        for lo, hi, v in zip(density.edges[:-1], density.edges[1:], density.values):
            yield (float(t_req), float(lo), float(hi), float(v))


def _initial_state(cfg: SimConfig) -> LagrangianState:
    try:
        return place_vehicles(cfg.rho0, cfg.domain, cfg.N, cfg.boundary)
    except ValueError as exc:
        raise ConfigError(f"placement: {exc}") from exc


def _run_states(cfg: SimConfig) -> Tuple[List[LagrangianState], int, List[dict]]:
    """Produce recorded states, the record stride, and invariant violations."""
    state0 = _initial_state(cfg)
    ell = state0.ell
    if cfg.mode == "euler":
        lam0 = cfg.lam if cfg.lam is not None else 0.9 / cfg.model.L_v
        if cfg.T == 0:
            return [state0], cfg.record_every, []
        _, lam = exact_landing_steps(cfg.model, ell, cfg.T, lam0)
        run = run_discrete(cfg.model, state0, cfg.T, lam,
                           record_every=cfg.record_every)
        violations = check_discrete_run(cfg.model, run)
        return list(run.states), run.record_every, violations
    dt = cfg.dt if cfg.dt is not None else 0.9 * ell / cfg.model.L_v
    states = integrate(cfg.model, state0, cfg.T, dt)
    violations = check_trajectory(cfg.model, states)
    recorded = states[:: cfg.record_every]
    if states[-1].t != recorded[-1].t:
        recorded.append(states[-1])
    return recorded, cfg.record_every, violations


def _resolve_out(cfg: SimConfig, out_flag: Optional[str]) -> str:
    out = out_flag or cfg.out_dir
    if out is None:
        raise ConfigError("an output directory is required (--out DIR)")
    os.makedirs(out, exist_ok=True)
    return out


def cmd_simulate(cfg: SimConfig, out_flag: Optional[str]) -> int:
    """Run one trajectory and emit trajectory/grid/density CSVs."""
    out = _resolve_out(cfg, out_flag)
    states, stride, violations = _run_states(cfg)
    _atomic_write(
        os.path.join(out, "trajectory.csv"),
        _csv_text(("t", "i", "y_i", "z_i"), _trajectory_rows(states)),
    )
    _atomic_write(
        os.path.join(out, "grid.csv"),
        _csv_text(("n", "t", "i", "x_left", "z_i"), _grid_rows(states, stride)),
    )
    _atomic_write(
        os.path.join(out, "density.csv"),
        _csv_text(("t", "z_left", "z_right", "rho"),
                  _density_rows(states, cfg.density_times)),
    )
    tol = DISCRETE_TOL if cfg.mode == "euler" else ODE_TOL
    _atomic_write(
        os.path.join(out, "invariants.json"),
        _json_text({"tolerance": tol, "violations": violations}),
    )
    if violations:
        print(f"invariant violations: {len(violations)} (see invariants.json)",
              file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_converge(cfg: SimConfig, out_flag: Optional[str]) -> int:
    """Run the refinement ladder and emit report.json + report.csv."""
    out = _resolve_out(cfg, out_flag)
    if not cfg.ladder:
        raise ConfigError("converge needs a nonempty ladder")
    study = StudyConfig(
        model=cfg.model,
        rho0=cfg.rho0,
        domain=cfg.domain,
        boundary=cfg.boundary,
        ladder=cfg.ladder,
        T=cfg.T,
        mode=cfg.mode,
        lam=cfg.lam,
        oracle=cfg.oracle,
        max_workers=_worker_cap(len(cfg.ladder)),
    )
    try:
        report = convergence_study(study)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    payload = {
        "ladder": [{"N": n, "ell": e, "dt": d} for n, e, d in report.ladder],
        "errors": report.errors,
        "orders": report.orders,
        "invariants": {
            str(n): summary
            for (n, _, _), summary in zip(report.ladder, report.invariant_summaries)
        },
        "flagged": [report.ladder[i][0] for i in report.flagged],
    }
    _atomic_write(os.path.join(out, "report.json"), _json_text(payload))
    rows = []
    for k, (n, e, d) in enumerate(report.ladder):
        order = repr(report.orders[k - 1]) if k else ""
        rows.append((n, repr(e), repr(d), repr(report.errors[k]), order))
    _atomic_write(
        os.path.join(out, "report.csv"),
        _csv_text(("N", "ell", "dt", "L1_error", "order"), rows),
    )
    if report.flagged:
        print(f"flagged rungs: {payload['flagged']}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _unsafe_report(cfg: SimConfig) -> dict:
    """Invariant audit with the step-size guard disabled (euler only).

    Runs the raw update kernel on the gap history, then applies the bounds /
    variation-diminishing / entropy checks directly to the array. Gaps may
    leave the admissible range entirely; that is what this mode exists to
    demonstrate.
    """
    state0 = _initial_state(cfg)
    ell = state0.ell
    lam = cfg.lam if cfg.lam is not None else 0.9 / cfg.model.L_v
    n = max(int(np.ceil(cfg.T / (lam * ell) - 1e-9)), 1)
    hist = step_sequence(cfg.model, state0.y, state0.boundary, ell, lam, n,
                         enforce_cfl=False)
    if isinstance(state0.boundary, Periodic):
        span = state0.boundary.b - state0.boundary.a
        closed = np.column_stack([hist, span / ell - hist.sum(axis=1)])
        tv = np.abs(np.diff(np.column_stack([closed, closed[:, :1]]), axis=1)).sum(axis=1)
    else:
        closed = np.column_stack([hist, np.full(hist.shape[0], state0.boundary.M)])
        tv = np.abs(np.diff(closed, axis=1)).sum(axis=1)
    violations = []
    lo0, hi0 = float(closed[0].min()), float(closed[0].max())
    for step in range(1, closed.shape[0]):
        row = closed[step]
        over = max(lo0 - row.min(), row.max() - hi0)
        if over > DISCRETE_TOL:
            violations.append(
                {"step": step, "invariant": "bounds", "magnitude": float(over)}
            )
        if tv[step] > tv[step - 1] + DISCRETE_TOL:
            violations.append(
                {"step": step, "invariant": "tv_diminishing",
                 "magnitude": float(tv[step] - tv[step - 1])}
            )
    k_grid = default_k_grid(max(1.0, float(hist.max())))
    residual = entropy_residual_history(
        cfg.model, hist, state0.boundary, ell, lam, k_grid
    )
    if residual > DISCRETE_TOL:
        violations.append(
            {"step": -1, "invariant": "entropy", "magnitude": float(residual)}
        )
    return {
        "mode": "euler",
        "tolerance": DISCRETE_TOL,
        "cfl": lam * cfg.model.L_v,
        "guard": "disabled",
        "steps": int(n),
        "violations": violations,
    }


def cmd_validate(cfg: SimConfig, out_flag: Optional[str], unsafe: bool) -> int:
    """Run the configured trajectory and print the invariant report as JSON."""
    if unsafe:
        if cfg.mode != "euler":
            raise ConfigError("--unsafe only applies to euler mode")
        payload = _unsafe_report(cfg)
    else:
        _, _, violations = _run_states(cfg)
        payload = {
            "mode": cfg.mode,
            "tolerance": DISCRETE_TOL if cfg.mode == "euler" else ODE_TOL,
            "guard": "enforced",
            "violations": violations,
        }
    text = _json_text(payload)
    if out_flag or cfg.out_dir:
        out = _resolve_out(cfg, out_flag)
        _atomic_write(os.path.join(out, "validate.json"), text)
    sys.stdout.write(text)
    return EXIT_INVARIANT if payload["violations"] else EXIT_OK


def _worker_cap(n_jobs: int) -> int:
    raw = os.environ.get("FTL2LWR_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"FTL2LWR_THREADS must be an integer, got {raw!r}")
    return max(1, min(cap, n_jobs))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ftl-lwr",
        description="Particle-model traffic simulations and their "
        "density-convergence studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("simulate", "run one trajectory, write trajectory/grid/density CSVs"),
        ("converge", "run a refinement ladder, write report.json/report.csv"),
        ("validate", "run the invariant suites, print a JSON report"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--preset", metavar="NAME",
                       help=f"built-in config: {', '.join(sorted(PRESETS))}")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--mode", choices=("euler", "ode"),
                       help="override the configured time stepping")
        p.add_argument("--unsafe", action="store_true",
                       help="disable the step-size guard (validate only; "
                       "expect violations)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.unsafe and args.command != "validate":
            raise ConfigError("--unsafe is only accepted by validate")
        cfg = load_config(args.config, args.preset, args.mode, args.unsafe)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out)
        if args.command == "converge":
            return cmd_converge(cfg, args.out)
        return cmd_validate(cfg, args.out, args.unsafe)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepRejected, FloatingPointError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
