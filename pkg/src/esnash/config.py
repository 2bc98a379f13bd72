"""Run configuration files.

Line-oriented INI with fixed section names::

    [game]
    kind = builtin_example            # or: polynomial

    [player.1]
    k = 1.273
    b = 0.7
    omega_l = 0.9
    omega_h = 0.12
    omega = 2/1                       # exact ratio; decimals are rejected
    u_hat0 = 0.25

    [sim]
    horizon = 100
    step = 1e-3

    [analysis]
    u_star = 25/64, 5/8

    [outputs]
    dir = out

Polynomial games list one ``dynamics.r`` row per state and one ``payoff.i``
row per player. A row is a ``;``-separated list of ``coefficient @ exponents``
terms, the exponents running over ``x1..xn u1..uN``::

    [game]
    kind = polynomial
    state_dim = 1
    n_players = 1
    dynamics.1 = -1 @ 1 0; 1 @ 0 1        # x1' = -x1 + u1
    payoff.1 = -1 @ 2 0                   # J1 = -x1^2
    bounds.1 = -inf, inf

Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Optional

from esnash.controller import DEFAULT_A0, SeekerParams, as_frequency
from esnash.errors import InvalidArgumentError
from esnash.game import EXAMPLE_NASH, GameModel, builtin_example, polynomial_game
from esnash.sim import SimConfig

GAME_KINDS = ("builtin_example", "polynomial")
PLAYER_KEYS = ("k", "b", "omega_l", "omega_h", "omega", "phi", "u_hat0", "a0", "n0")
SIM_KEYS = tuple(f.name for f in fields(SimConfig))
ANALYSIS_KEYS = ("u_star", "epsilon", "tail_fraction", "fd_step", "grad_tol")
OUTPUT_KEYS = ("dir", "csv", "json")


class ConfigError(InvalidArgumentError):
    """A configuration file that cannot be parsed or validated."""


@dataclass
class AnalysisSettings:
    u_star: Optional[tuple] = None
    epsilon: float = 0.02
    tail_fraction: float = 0.1
    fd_step: float = 1e-4
    grad_tol: float = 1e-6


@dataclass
class OutputSettings:
    dir: str = "out"
    csv: bool = True
    json: bool = True


@dataclass
class RunConfig:
    game_kind: str
    players: list
    sim: SimConfig
    state_dim: int = 0
    n_players: int = 0
    dynamics_terms: tuple = ()
    payoff_terms: tuple = ()
    action_bounds: Optional[tuple] = None
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    outputs: OutputSettings = field(default_factory=OutputSettings)

    def build_game(self) -> GameModel:
        if self.game_kind == "builtin_example":
            return builtin_example()
        return polynomial_game(
            self.state_dim, self.n_players, self.dynamics_terms, self.payoff_terms, self.action_bounds
        )

    @property
    def u_star(self):
        if self.analysis.u_star is not None:
            return self.analysis.u_star
        if self.game_kind == "builtin_example":
            return EXAMPLE_NASH
        return None

    def canonical(self) -> dict:
        """Plain-data echo of every effective setting (the output directory excluded)."""
        game = {"kind": self.game_kind}
        if self.game_kind == "polynomial":
            game.update(
                state_dim=self.state_dim,
                n_players=self.n_players,
                dynamics=[_format_row(r) for r in self.dynamics_terms],
                payoffs=[_format_row(r) for r in self.payoff_terms],
                bounds=None if self.action_bounds is None else [
                    [v if math.isfinite(v) else None for v in b] for b in self.action_bounds
                ],
            )
        players = []
        for p in self.players:
            players.append(
                {
                    "k": p.k, "b": p.b, "omega_l": p.omega_l, "omega_h": p.omega_h,
                    "omega": f"{p.omega.numerator}/{p.omega.denominator}",
                    "phi": p.phi, "u_hat0": p.u_hat0, "a0": p.a0, "n0": p.n0,
                }
            )
        sim = {f.name: getattr(self.sim, f.name) for f in fields(SimConfig)}
        sim["x0"] = None if sim["x0"] is None else list(sim["x0"])
        analysis = dict(self.analysis.__dict__)
        analysis["u_star"] = None if analysis["u_star"] is None else list(analysis["u_star"])
        return {
            "game": game,
            "players": players,
            "sim": sim,
            "analysis": analysis,
            "outputs": {"csv": self.outputs.csv, "json": self.outputs.json},
        }

    def to_ini(self) -> str:
        """Serialise to config text that parses back to an equal RunConfig."""
        c = self.canonical()
        lines = ["[game]", f"kind = {self.game_kind}"]
        if self.game_kind == "polynomial":
            lines += [f"state_dim = {self.state_dim}", f"n_players = {self.n_players}"]
            lines += [f"dynamics.{r + 1} = {row}" for r, row in enumerate(c["game"]["dynamics"])]
            lines += [f"payoff.{i + 1} = {row}" for i, row in enumerate(c["game"]["payoffs"])]
            if self.action_bounds is not None:
                lines += [f"bounds.{i + 1} = {lo!r}, {hi!r}" for i, (lo, hi) in enumerate(self.action_bounds)]
        for i, p in enumerate(c["players"], start=1):
            lines += ["", f"[player.{i}]"]
            lines += [f"{key} = {_format_value(value)}" for key, value in p.items() if value is not None]
        for section in ("sim", "analysis", "outputs"):
            lines += ["", f"[{section}]"]
            lines += [f"{key} = {_format_value(value)}" for key, value in c[section].items() if value is not None]
        return "\n".join(lines) + "\n"

    def with_overrides(self, mode=None, allow_frequency_violations=None, epsilon=None, out=None):
        cfg = self
        if mode is not None:
            cfg = replace(cfg, sim=replace(cfg.sim, mode=mode))
        if allow_frequency_violations:
            cfg = replace(cfg, sim=replace(cfg.sim, allow_frequency_violations=True))
        if epsilon is not None:
            cfg = replace(cfg, analysis=replace(cfg.analysis, epsilon=epsilon))
        if out is not None:
            cfg = replace(cfg, outputs=replace(cfg.outputs, dir=out))
        return cfg


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _format_row(terms):
    return "; ".join(f"{float(c)!r} @ {' '.join(str(int(e)) for e in exps)}" for c, exps in terms)


def _locate(text, section, key):
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
        elif current == section and line.split("=", 1)[0].strip() == key:
            return lineno
    return None


class _Reader:
    def __init__(self, text, source):
        self.text = text
        self.source = source

    def fail(self, section, key, message):
        where = f"{section}.{key}" if key else section
        lineno = _locate(self.text, section, key) if key else None
        prefix = f"{self.source}:{lineno}: " if lineno else f"{self.source}: "
        raise ConfigError(f"{prefix}{where}: {message}")

    def number(self, section, key, raw, positive=False):
        try:
            value = float(Fraction(raw.strip())) if "/" in raw else float(raw)
        except (ValueError, ZeroDivisionError):
            self.fail(section, key, f"expected a number, got {raw!r}")
        if math.isnan(value):
            self.fail(section, key, "NaN is not allowed")
        if positive and not value > 0:
            self.fail(section, key, f"must be positive, got {raw.strip()}")
        return value

    def integer(self, section, key, raw):
        try:
            return int(raw)
        except ValueError:
            self.fail(section, key, f"expected an integer, got {raw!r}")

    def boolean(self, section, key, raw):
        v = raw.strip().lower()
        if v in ("true", "yes", "on", "1"):
            return True
        if v in ("false", "no", "off", "0"):
            return False
        self.fail(section, key, f"expected true/false, got {raw!r}")

    def vector(self, section, key, raw):
        return tuple(self.number(section, key, part) for part in raw.split(","))

    def terms(self, section, key, raw, n_vars):
        out = []
        for chunk in raw.split(";"):
            if not chunk.strip():
                continue
            if "@" not in chunk:
                self.fail(section, key, f"term {chunk.strip()!r} must look like 'coefficient @ exponents'")
            coef_text, exp_text = chunk.split("@", 1)
            coef = self.number(section, key, coef_text)
            try:
                exps = tuple(int(e) for e in exp_text.split())
            except ValueError:
                self.fail(section, key, f"exponents must be integers in {chunk.strip()!r}")
            if len(exps) != n_vars:
                self.fail(section, key, f"term {chunk.strip()!r} needs {n_vars} exponents (x1..xn u1..uN)")
            if any(e < 0 for e in exps):
                self.fail(section, key, f"negative exponent in {chunk.strip()!r}")
            out.append((coef, exps))
        return tuple(out)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse config text; any problem raises ConfigError naming the field."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",), strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    rd = _Reader(text, source)

    player_sections = {}
    for name in cp.sections():
        if name.startswith("player."):
            idx = name.split(".", 1)[1]
            if not idx.isdigit() or int(idx) < 1:
                rd.fail(name, None, "player sections are named [player.1], [player.2], ...")
            player_sections[int(idx)] = name
        elif name not in ("game", "sim", "analysis", "outputs"):
            rd.fail(name, None, "unknown section")
    if "game" not in cp:
        raise ConfigError(f"{source}: missing [game] section")
    if not player_sections:
        raise ConfigError(f"{source}: no [player.N] sections")
    if sorted(player_sections) != list(range(1, len(player_sections) + 1)):
        raise ConfigError(f"{source}: player sections must be numbered 1..N without gaps")

    g = cp["game"]
    kind = g.get("kind", "").strip()
    if kind not in GAME_KINDS:
        rd.fail("game", "kind", f"must be one of {GAME_KINDS}, got {kind!r}")
    n_players = len(player_sections)
    game_kwargs = {}
    if kind == "builtin_example":
        for key in g:
            if key != "kind":
                rd.fail("game", key, "unknown field for kind = builtin_example")
        if n_players != 2:
            raise ConfigError(f"{source}: builtin_example has 2 players, config has {n_players}")
    else:
        if "state_dim" not in g:
            rd.fail("game", "state_dim", "required for polynomial games")
        state_dim = rd.integer("game", "state_dim", g["state_dim"])
        if state_dim < 0:
            rd.fail("game", "state_dim", "must be non-negative")
        if "n_players" in g and rd.integer("game", "n_players", g["n_players"]) != n_players:
            rd.fail("game", "n_players", f"does not match the {n_players} [player.N] sections")
        n_vars = state_dim + n_players
        allowed = {"kind", "state_dim", "n_players"}
        allowed |= {f"dynamics.{r}" for r in range(1, state_dim + 1)}
        allowed |= {f"payoff.{i}" for i in range(1, n_players + 1)}
        allowed |= {f"bounds.{i}" for i in range(1, n_players + 1)}
        for key in g:
            if key not in allowed:
                rd.fail("game", key, "unknown field")
        for key in sorted(allowed - {"kind", "state_dim", "n_players"}):
            if not key.startswith("bounds") and key not in g:
                rd.fail("game", key, "missing")
        bounds = None
        if any(f"bounds.{i}" in g for i in range(1, n_players + 1)):
            bounds = []
            for i in range(1, n_players + 1):
                raw = g.get(f"bounds.{i}", "-inf, inf")
                lo_hi = rd.vector("game", f"bounds.{i}", raw)
                if len(lo_hi) != 2 or not lo_hi[0] <= lo_hi[1]:
                    rd.fail("game", f"bounds.{i}", "expected 'low, high' with low <= high")
                bounds.append(lo_hi)
            bounds = tuple(bounds)
        game_kwargs = dict(
            state_dim=state_dim,
            n_players=n_players,
            dynamics_terms=tuple(
                rd.terms("game", f"dynamics.{r}", g[f"dynamics.{r}"], n_vars) for r in range(1, state_dim + 1)
            ),
            payoff_terms=tuple(
                rd.terms("game", f"payoff.{i}", g[f"payoff.{i}"], n_vars) for i in range(1, n_players + 1)
            ),
            action_bounds=bounds,
        )

    players = [_parse_player(rd, cp[player_sections[i]], player_sections[i]) for i in range(1, n_players + 1)]
    sim = _parse_sim(rd, cp["sim"] if "sim" in cp else {})
    analysis = _parse_analysis(rd, cp["analysis"] if "analysis" in cp else {}, n_players)
    outputs = _parse_outputs(rd, cp["outputs"] if "outputs" in cp else {})
    cfg = RunConfig(game_kind=kind, players=players, sim=sim, analysis=analysis, outputs=outputs, **game_kwargs)
    if kind == "builtin_example":
        cfg.state_dim, cfg.n_players = 2, 2
    if sim.x0 is not None and len(sim.x0) != cfg.state_dim:
        rd.fail("sim", "x0", f"needs {cfg.state_dim} entries")
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))


def _parse_player(rd, sec, name):
    for key in sec:
        if key not in PLAYER_KEYS:
            rd.fail(name, key, "unknown field")
    for key in ("k", "b", "omega_l", "omega_h", "omega"):
        if key not in sec:
            rd.fail(name, key, "missing")
    try:
        omega = as_frequency(sec["omega"])
    except InvalidArgumentError as exc:
        rd.fail(name, "omega", str(exc))
    values = {}
    for key in ("k", "b", "omega_l", "omega_h", "phi", "u_hat0", "a0", "n0"):
        if key in sec:
            values[key] = rd.number(name, key, sec[key], positive=key in ("omega_l", "omega_h", "a0"))
    if values["k"] == 0:
        rd.fail(name, "k", "must be non-zero")
    if not omega > 0:
        rd.fail(name, "omega", "must be positive")
    values.setdefault("a0", DEFAULT_A0)
    try:
        return SeekerParams(omega=omega, **values)
    except InvalidArgumentError as exc:
        rd.fail(name, None, str(exc))


def _parse_sim(rd, sec):
    values = {}
    for key in sec:
        if key not in SIM_KEYS:
            rd.fail("sim", key, "unknown field")
        raw = sec[key]
        if key in ("horizon", "step", "divergence_bound"):
            values[key] = rd.number("sim", key, raw, positive=True)
        elif key == "sample_stride":
            values[key] = rd.integer("sim", key, raw)
            if values[key] < 1:
                rd.fail("sim", key, "must be a positive integer")
        elif key in ("enforce_action_bounds", "allow_frequency_violations"):
            values[key] = rd.boolean("sim", key, raw)
        elif key == "x0":
            values[key] = rd.vector("sim", key, raw)
        else:
            values[key] = raw.strip()
    try:
        return SimConfig(**values)
    except InvalidArgumentError as exc:
        msg = str(exc)
        key = next((k for k in SIM_KEYS if f"sim.{k}" in msg), None)
        rd.fail("sim", key, msg.replace(f"sim.{key} ", "") if key else msg)


def _parse_analysis(rd, sec, n_players):
    values = {}
    for key in sec:
        if key not in ANALYSIS_KEYS:
            rd.fail("analysis", key, "unknown field")
        if key == "u_star":
            values[key] = rd.vector("analysis", key, sec[key])
            if len(values[key]) != n_players:
                rd.fail("analysis", key, f"needs {n_players} entries")
        else:
            values[key] = rd.number("analysis", key, sec[key], positive=True)
    if "tail_fraction" in values and values["tail_fraction"] > 1:
        rd.fail("analysis", "tail_fraction", "must not exceed 1")
    return AnalysisSettings(**values)


def _parse_outputs(rd, sec):
    values = {}
    for key in sec:
        if key not in OUTPUT_KEYS:
            rd.fail("outputs", key, "unknown field")
        values[key] = sec[key].strip() if key == "dir" else rd.boolean("outputs", key, sec[key])
    return OutputSettings(**values)
