"""Scenario files and CSV persistence.

A scenario is one flat INI file (sections of key = value pairs) naming the
model, its parameters, the initial condition in either position or
center-of-mass/stretch form, engine budgets, and output paths.  Parsing and
serializing round-trip losslessly; floats are written with repr.

CSV files carry a header row, comma delimiters, LF line endings, and floats
at 17 significant digits, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, replace

from .core import BallState, ModelParams, characteristic_times, energy, from_cm
from .engine import ContactEvent, EngineConfig

EVENT_COLUMNS = ("n", "t", "tau", "kind", "xdot_pre", "xdot_post", "y", "ydot", "E")
TRAJECTORY_COLUMNS = ("t", "x", "xdot", "y", "ydot", "E")
BOUNCE_COLUMNS = ("n", "u", "tau", "t")
MAP_COLUMNS = ("n", "x")
SWEEP_COLUMNS = ("epsilon", "impacts", "norm")

KINDS = ("linear", "nonlinear", "rigid")
IC_FORMS = ("cartesian", "cm")
CARTESIAN_KEYS = ("x", "xdot", "y", "ydot")
CM_KEYS = ("psi", "psidot", "xi", "xidot")


@dataclass(frozen=True, slots=True)
class ScenarioConfig:
    """One reproducible run: model, parameters, start state, budgets, outputs."""

    kind: str = "linear"
    gamma: float = 0.01
    mu: float = 0.1
    rho: float = 1.0
    a: float = 0.0
    b: float = 0.0
    ic_form: str = "cartesian"
    ic: tuple[float, float, float, float] = (1.0, 0.0, 2.0, 0.0)
    t_max: float = 1e4
    max_impacts: int = 1_000_000
    tau_floor: float = 1e-9
    sample_dt: float | str | None = None
    r: float | None = None
    u0: float = 1.0
    g: float = 1.0
    n_bounces: int = 30
    out_dir: str = "."

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"model kind must be one of {KINDS}, got {self.kind!r}")
        if self.ic_form not in IC_FORMS:
            raise ValueError(
                f"initial-condition form must be one of {IC_FORMS}, got {self.ic_form!r}"
            )
        if len(self.ic) != 4:
            raise ValueError(f"initial condition needs 4 numbers, got {len(self.ic)}")
        if isinstance(self.sample_dt, str) and self.sample_dt != "auto":
            raise ValueError(
                f"sample_dt must be a number, 'auto', or absent, got {self.sample_dt!r}"
            )

    def params(self) -> ModelParams:
        return ModelParams(self.gamma, self.mu)

    def initial_state(self, t: float = 0.0) -> BallState:
        if self.ic_form == "cartesian":
            x, xdot, y, ydot = self.ic
            return BallState(t, x, xdot, y, ydot)
        return from_cm(t, *self.ic)

    def resolved_sample_dt(self) -> float | None:
        """The trajectory grid step, with 'auto' meaning 200 samples per
        shortest characteristic time."""
        if self.sample_dt is None:
            return None
        if self.sample_dt == "auto":
            ct = characteristic_times(self.params())
            scales = [ct.t_fall]
            if ct.t_vibration is not None:
                scales.append(ct.t_vibration)
            return min(scales) / 200.0
        return float(self.sample_dt)

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            t_max=self.t_max,
            max_impacts=self.max_impacts,
            tau_floor=self.tau_floor,
            sample_dt=self.resolved_sample_dt(),
        )


def serialize_config(cfg: ScenarioConfig) -> str:
    """Render a scenario as INI text; parse_config inverts this exactly."""
    cp = configparser.ConfigParser()
    cp["model"] = {
        "kind": cfg.kind,
        "gamma": repr(cfg.gamma),
        "mu": repr(cfg.mu),
        "rho": repr(cfg.rho),
        "a": repr(cfg.a),
        "b": repr(cfg.b),
    }
    keys = CARTESIAN_KEYS if cfg.ic_form == "cartesian" else CM_KEYS
    cp["initial"] = {k: repr(v) for k, v in zip(keys, cfg.ic)}
    engine = {
        "t_max": repr(cfg.t_max),
        "max_impacts": str(cfg.max_impacts),
        "tau_floor": repr(cfg.tau_floor),
    }
    if cfg.sample_dt is not None:
        engine["sample_dt"] = (
            cfg.sample_dt if cfg.sample_dt == "auto" else repr(cfg.sample_dt)
        )
    cp["engine"] = engine
    rigid = {
        "u0": repr(cfg.u0),
        "g": repr(cfg.g),
        "n_bounces": str(cfg.n_bounces),
    }
    if cfg.r is not None:
        rigid["r"] = repr(cfg.r)
    cp["rigid"] = rigid
    cp["output"] = {"out_dir": cfg.out_dir}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def parse_config(text: str) -> ScenarioConfig:
    """Parse INI text into a ScenarioConfig; unknown keys are rejected."""
    cp = configparser.ConfigParser()
    cp.read_string(text)
    known = {
        "model": {"kind", "gamma", "mu", "rho", "a", "b"},
        "initial": set(CARTESIAN_KEYS) | set(CM_KEYS),
        "engine": {"t_max", "max_impacts", "tau_floor", "sample_dt"},
        "rigid": {"r", "u0", "g", "n_bounces"},
        "output": {"out_dir"},
    }
    for section in cp.sections():
        if section not in known:
            raise ValueError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in known[section]:
                raise ValueError(f"unknown key {key!r} in section [{section}]")

    fields: dict = {}

    def take(section, key, convert, field=None):
        if cp.has_option(section, key):
            fields[field or key] = convert(cp[section][key])

    take("model", "kind", str)
    take("model", "gamma", float)
    take("model", "mu", float)
    take("model", "rho", float)
    take("model", "a", float)
    take("model", "b", float)

    if cp.has_section("initial"):
        sec = cp["initial"]
        cart = [k for k in CARTESIAN_KEYS if k in sec]
        cm = [k for k in CM_KEYS if k in sec]
        if cart and cm:
            raise ValueError(
                f"initial condition mixes position and center-of-mass keys: "
                f"{cart + cm}"
            )
        if cart or cm:
            form, keys = ("cartesian", CARTESIAN_KEYS) if cart else ("cm", CM_KEYS)
            missing = [k for k in keys if k not in sec]
            if missing:
                raise ValueError(f"initial condition is missing {missing}")
            fields["ic_form"] = form
            fields["ic"] = tuple(float(sec[k]) for k in keys)

    take("engine", "t_max", float)
    take("engine", "max_impacts", int)
    take("engine", "tau_floor", float)
    if cp.has_option("engine", "sample_dt"):
        raw = cp["engine"]["sample_dt"]
        fields["sample_dt"] = "auto" if raw == "auto" else float(raw)

    take("rigid", "r", float)
    take("rigid", "u0", float)
    take("rigid", "g", float)
    take("rigid", "n_bounces", int)
    take("output", "out_dir", str)

    return ScenarioConfig(**fields)


def load_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(path, cfg: ScenarioConfig) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_config(cfg))


# ------------------------------------------------------------------ CSV side

def _fmt(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError(f"refusing to write non-finite value {v}")
    return f"{v:.17g}"


def _write_csv(path, header: tuple[str, ...], rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _check_header(line: str, expected: tuple[str, ...], path) -> None:
    got = tuple(line.rstrip("\n").split(","))
    if got != expected:
        raise ValueError(
            f"{path}: header mismatch: expected {','.join(expected)}, "
            f"got {','.join(got)}"
        )


def write_events_csv(path, events: list[ContactEvent]) -> None:
    rows = (
        (
            str(e.n),
            _fmt(e.t),
            _fmt(e.tau),
            e.kind,
            _fmt(e.xdot_pre),
            _fmt(e.xdot_post),
            _fmt(e.y),
            _fmt(e.ydot),
            _fmt(e.energy),
        )
        for e in events
    )
    _write_csv(path, EVENT_COLUMNS, rows)


def read_events_csv(path) -> list[ContactEvent]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    _check_header(lines[0], EVENT_COLUMNS, path)
    events = []
    for line in lines[1:]:
        n, t, tau, kind, pre, post, y, ydot, e = line.split(",")
        events.append(
            ContactEvent(
                n=int(n),
                t=float(t),
                tau=float(tau),
                kind=kind,
                xdot_pre=float(pre),
                xdot_post=float(post),
                y=float(y),
                ydot=float(ydot),
                energy=float(e),
            )
        )
    return events


def write_trajectory_csv(path, states: list[BallState], p: ModelParams) -> None:
    rows = (
        (
            _fmt(s.t),
            _fmt(s.x),
            _fmt(s.xdot),
            _fmt(s.y),
            _fmt(s.ydot),
            _fmt(energy(s, p)),
        )
        for s in states
    )
    _write_csv(path, TRAJECTORY_COLUMNS, rows)


def read_trajectory_csv(path) -> tuple[list[BallState], list[float]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    _check_header(lines[0], TRAJECTORY_COLUMNS, path)
    states = []
    energies = []
    for line in lines[1:]:
        t, x, xdot, y, ydot, e = map(float, line.split(","))
        states.append(BallState(t, x, xdot, y, ydot))
        energies.append(e)
    return states, energies


def write_bounces_csv(path, speeds, flights, times) -> None:
    rows = (
        (str(k), _fmt(u), _fmt(tau), _fmt(t))
        for k, (u, tau, t) in enumerate(zip(speeds, flights, times))
    )
    _write_csv(path, BOUNCE_COLUMNS, rows)


def write_map_csv(path, iterates) -> None:
    rows = ((str(k), _fmt(x)) for k, x in enumerate(iterates))
    _write_csv(path, MAP_COLUMNS, rows)


def write_sweep_csv(path, rows) -> None:
    """Persist sticky-sweep rows (epsilon, impacts, norm)."""
    out = ((_fmt(r.epsilon), str(r.impacts), _fmt(r.norm)) for r in rows)
    _write_csv(path, SWEEP_COLUMNS, out)


def replace_config(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    """dataclasses.replace that tolerates tuple ic passed as a list."""
    if "ic" in changes:
        changes["ic"] = tuple(changes["ic"])
    return replace(cfg, **changes)
