"""Command line harness: run scenarios, reference models, and experiment sweeps.

Every subcommand validates its inputs, writes CSV files under --out-dir, and
prints a one-line summary per run.  Exit status is 0 on success and 1 on any
validation or runtime error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys
from pathlib import Path

from .analysis import asymptotic_report, onset_family_state, sticky_sweep
from .core import BallState, ModelParams, energy, to_cm
from .engine import run_simulation
from .nonlinear import NonlinearParams, nonlinear_energy, run_nonlinear
from .rigid import (
    alpha_implicit_map_iterate,
    power_map_iterate,
    quadratic_map_iterate,
    rigid_bounce,
    stitched_restitution,
)
from .scenario import (
    ScenarioConfig,
    load_config,
    replace_config,
    write_bounces_csv,
    write_events_csv,
    write_map_csv,
    write_sweep_csv,
    write_trajectory_csv,
)

DEFAULT_EPSILONS = (
    1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 5e-5, 1e-5, 5e-6, 1e-6,
)

CARTESIAN_FLAGS = ("x0", "xdot0", "y0", "ydot0")
CM_FLAGS = ("psi0", "psidot0", "xi0", "xidot0")


def _parse_sample_dt(raw: str):
    return "auto" if raw == "auto" else float(raw)


def _add_model_flags(sp, with_nonlinear=True):
    sp.add_argument("--gamma", type=float, help="weight to spring-force ratio")
    sp.add_argument("--mu", type=float, help="damping coefficient")
    if with_nonlinear:
        sp.add_argument("--rho", type=float, help="spring strength of the nonlinear law")
        sp.add_argument("--a", type=float, help="spring exponent of the nonlinear law")
        sp.add_argument("--b", type=float, help="damping exponent of the nonlinear law")


def _add_ic_flags(sp):
    sp.add_argument("--x0", type=float, help="lower mass height")
    sp.add_argument("--xdot0", type=float, help="lower mass velocity")
    sp.add_argument("--y0", type=float, help="upper mass height")
    sp.add_argument("--ydot0", type=float, help="upper mass velocity")
    sp.add_argument("--psi0", type=float, help="center of mass coordinate")
    sp.add_argument("--psidot0", type=float, help="center of mass velocity")
    sp.add_argument("--xi0", type=float, help="half stretch coordinate")
    sp.add_argument("--xidot0", type=float, help="half stretch velocity")


def _add_engine_flags(sp):
    sp.add_argument("--t-max", type=float, help="simulated time budget")
    sp.add_argument("--max-impacts", type=int, help="event count budget")
    sp.add_argument("--tau-floor", type=float, help="shortest flight before stopping")
    sp.add_argument(
        "--sample-dt",
        type=_parse_sample_dt,
        help="trajectory grid step, a number or 'auto'",
    )


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    for flag, field in (
        ("model", "kind"),
        ("gamma", "gamma"),
        ("mu", "mu"),
        ("rho", "rho"),
        ("a", "a"),
        ("b", "b"),
        ("t_max", "t_max"),
        ("max_impacts", "max_impacts"),
        ("tau_floor", "tau_floor"),
        ("sample_dt", "sample_dt"),
        ("out_dir", "out_dir"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            changes[field] = value

    cart = [f for f in CARTESIAN_FLAGS if getattr(args, f, None) is not None]
    cm = [f for f in CM_FLAGS if getattr(args, f, None) is not None]
    if cart and cm:
        raise ValueError(
            f"initial-condition flags mix the two forms: {cart + cm}"
        )
    if cart:
        s = cfg.initial_state()
        base = [s.x, s.xdot, s.y, s.ydot]
        for i, f in enumerate(CARTESIAN_FLAGS):
            v = getattr(args, f)
            if v is not None:
                base[i] = v
        changes["ic_form"] = "cartesian"
        changes["ic"] = base
    elif cm:
        base = list(to_cm(cfg.initial_state()))
        for i, f in enumerate(CM_FLAGS):
            v = getattr(args, f)
            if v is not None:
                base[i] = v
        changes["ic_form"] = "cm"
        changes["ic"] = base
    return replace_config(cfg, **changes) if changes else cfg


def _restitution_law(cfg: ScenarioConfig):
    if cfg.r is not None:
        return cfg.r
    p = cfg.params()
    return lambda u: stitched_restitution(u, p)


def run_scenario(cfg: ScenarioConfig, out_dir) -> str:
    """Run one scenario, write its CSV files, and return the summary line."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.kind == "rigid":
        speeds, flights, times = rigid_bounce(
            cfg.u0, cfg.g, _restitution_law(cfg), cfg.n_bounces
        )
        write_bounces_csv(out / "bounces.csv", speeds, flights, times)
        return (
            f"bounces={len(flights)} total_time={times[-1]:.17g} "
            f"final_speed={speeds[-1]:.17g}"
        )

    p = cfg.params()
    initial = cfg.initial_state()
    if cfg.kind == "nonlinear":
        if cfg.resolved_sample_dt() is not None:
            raise ValueError(
                "trajectory sampling is only available for the linear model"
            )
        nl = NonlinearParams(base=p, rho=cfg.rho, a=cfg.a, b=cfg.b)
        log = run_nonlinear(initial, nl, cfg.engine_config())
        final_e = nonlinear_energy(log.final_state, nl)
    else:
        log = run_simulation(initial, p, cfg.engine_config())
        final_e = energy(log.final_state, p)
        if log.trajectory is not None:
            write_trajectory_csv(out / "traj.csv", log.trajectory, p)
    write_events_csv(out / "events.csv", log.events)
    return (
        f"impacts={len(log.events)} termination={log.termination} "
        f"final_energy={final_e:.17g}"
    )


def cmd_simulate(args) -> int:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    cfg = _apply_overrides(cfg, args)
    print(run_scenario(cfg, cfg.out_dir))
    return 0


def cmd_rigid(args) -> int:
    cfg = ScenarioConfig(
        kind="rigid",
        gamma=args.gamma if args.gamma is not None else 0.01,
        mu=args.mu if args.mu is not None else 0.1,
        r=args.r,
        u0=args.u0,
        g=args.g,
        n_bounces=args.n,
        out_dir=args.out_dir,
    )
    print(run_scenario(cfg, cfg.out_dir))
    return 0


def cmd_maps(args) -> int:
    if args.which == "quadratic":
        seq = quadratic_map_iterate(args.x0, args.alpha, args.n)
        scaled = ("n*x_n", args.n * seq.iterates[-1])
    elif args.which == "power":
        seq = power_map_iterate(args.x0, args.alpha, args.beta, args.n)
        scaled = (
            "n^(1/(beta-1))*x_n",
            args.n ** (1.0 / (args.beta - 1.0)) * seq.iterates[-1],
        )
    else:
        seq = alpha_implicit_map_iterate(args.alpha0, args.b, args.n)
        scaled = ("n*alpha_n", args.n * seq.iterates[-1])
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_map_csv(out / "map.csv", seq.iterates)
    name, value = scaled
    print(f"iterates={len(seq.iterates)} final={seq.iterates[-1]:.17g} {name}={value:.17g}")
    return 0


def cmd_sticky_sweep(args) -> int:
    p = ModelParams(
        args.gamma if args.gamma is not None else 0.01,
        args.mu if args.mu is not None else 0.1,
    )
    epsilons = (
        [float(tok) for tok in args.epsilons.split(",")]
        if args.epsilons
        else list(DEFAULT_EPSILONS)
    )
    base = onset_family_state(p, 0.0, ydot0=args.ydot0)
    result = sticky_sweep(epsilons, base, p, samples=args.samples)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out / "sweep.csv", result.rows)
    print(f"t_c={result.t_c:.17g} rows={len(result.rows)}")
    for row in result.rows:
        print(f"epsilon={row.epsilon:.17g} impacts={row.impacts} norm={row.norm:.17g}")
    return 0


def cmd_asymptotics(args) -> int:
    cfg = ScenarioConfig(
        t_max=1e9,
        max_impacts=200_000,
        tau_floor=2.5e-4,
    )
    cfg = _apply_overrides(cfg, args)
    if cfg.kind != "linear":
        raise ValueError("the asymptotics protocol runs the linear model only")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log = run_simulation(cfg.initial_state(), cfg.params(), cfg.engine_config())
    write_events_csv(out / "events.csv", log.events)
    report = asymptotic_report(log)
    print(f"impacts={len(log.events)} termination={log.termination} n_tail={report['n_tail']}")
    for key in ("tau_ratio", "speed_ratio", "speed_over_tau"):
        entry = report[key]
        print(f"{key} mean={entry['mean']:.17g} spread={entry['spread']:.17g}")
    print(f"tau_exponent={report['tau_exponent']:.17g}")
    return 0


def _sweep_worker(config_path: str, out_root: str) -> str:
    cfg = load_config(config_path)
    name = Path(config_path).stem
    summary = run_scenario(cfg, Path(out_root) / name)
    return f"{name}: {summary}"


def cmd_sweep(args) -> int:
    out_root = Path(args.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    jobs = args.jobs or min(len(args.configs), os.cpu_count() or 1)
    failures = 0
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = {
            pool.submit(_sweep_worker, str(path), str(out_root)): path
            for path in args.configs
        }
        for fut in concurrent.futures.as_completed(futures):
            path = futures[fut]
            try:
                print(fut.result())
            except Exception as exc:
                failures += 1
                print(f"{Path(path).stem}: failed: {exc}", file=sys.stderr)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softbounce",
        description="Deformable bouncing ball simulator and experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run one scenario and write its CSV logs")
    sp.add_argument("--config", help="scenario INI file; flags override its values")
    sp.add_argument("--model", choices=("linear", "nonlinear", "rigid"))
    _add_model_flags(sp)
    _add_ic_flags(sp)
    _add_engine_flags(sp)
    sp.add_argument("--out-dir", help="directory for events.csv and traj.csv")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("rigid", help="restitution-based reference bounces")
    sp.add_argument("--r", type=float, help="constant restitution; omit for the stitched law")
    sp.add_argument("--u0", type=float, default=1.0, help="initial takeoff speed")
    sp.add_argument("--g", type=float, default=1.0, help="gravity")
    sp.add_argument("--n", type=int, default=30, help="number of bounces")
    _add_model_flags(sp, with_nonlinear=False)
    sp.add_argument("--out-dir", default=".", help="directory for bounces.csv")
    sp.set_defaults(func=cmd_rigid)

    sp = sub.add_parser("maps", help="iterated maps of the slow stopping regime")
    sp.add_argument("which", choices=("quadratic", "power", "alpha"))
    sp.add_argument("--x0", type=float, default=0.01, help="starting value")
    sp.add_argument("--alpha", type=float, default=1.0, help="loss coefficient")
    sp.add_argument("--beta", type=float, default=1.2, help="power of the loss term")
    sp.add_argument("--alpha0", type=float, default=0.5, help="starting loss coefficient")
    sp.add_argument("--b", type=float, default=0.0, help="forcing term of the implicit map")
    sp.add_argument("--n", type=int, default=1000, help="number of iterations")
    sp.add_argument("--out-dir", default=".", help="directory for map.csv")
    sp.set_defaults(func=cmd_maps)

    sp = sub.add_parser("sticky-sweep", help="convergence of launches toward resting contact")
    _add_model_flags(sp, with_nonlinear=False)
    sp.add_argument("--ydot0", type=float, default=-0.1, help="upper mass launch velocity")
    sp.add_argument("--epsilons", help="comma separated launch speeds")
    sp.add_argument("--samples", type=int, default=2048, help="norm quadrature grid size")
    sp.add_argument("--out-dir", default=".", help="directory for sweep.csv")
    sp.set_defaults(func=cmd_sticky_sweep)

    sp = sub.add_parser("asymptotics", help="run into the slow regime and report tail ratios")
    _add_model_flags(sp, with_nonlinear=False)
    _add_ic_flags(sp)
    _add_engine_flags(sp)
    sp.add_argument("--out-dir", help="directory for events.csv")
    sp.set_defaults(func=cmd_asymptotics)

    sp = sub.add_parser("sweep", help="run several scenario files concurrently")
    sp.add_argument("--configs", nargs="+", required=True, help="scenario INI files")
    sp.add_argument("--out-dir", required=True, help="root directory, one subdirectory per scenario")
    sp.add_argument("--jobs", type=int, help="worker processes")
    sp.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
