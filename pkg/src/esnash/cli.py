"""Command-line front end.

Exit codes: 0 ok, 2 config/argument error, 3 run ended early,
4 verification failed, 5 plant solve failed.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from esnash import __version__
from esnash.analysis import compute_metrics, stability_report, verify_averaging_integrals
from esnash.config import ConfigError, RunConfig, load_config
from esnash.controller import as_frequency, validate_frequencies
from esnash.errors import InvalidArgumentError, NumericalDomainError, PlantSolveError
from esnash.game import builtin_example, reduced_payoff
from esnash.io import ArmResult, SummaryReport, write_atomic, write_trajectory_csv
from esnash.sim import simulate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EARLY = 3
EXIT_VERIFY = 4
EXIT_PLANT = 5
INTEGRAL_ATOL = 1e-6

log = logging.getLogger("esnash")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _vector(text):
    try:
        return tuple(float(as_frequency(p)) if "/" in p else float(p) for p in text.replace(" ", "").split(","))
    except (ValueError, InvalidArgumentError) as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _freq(text):
    try:
        return as_frequency(text)
    except InvalidArgumentError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _freq_list(text):
    return [_freq(part) for part in text.split(",") if part.strip()]


def _float_list(text):
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from exc


def _flatten(groups):
    return None if groups is None else [v for g in groups for v in g]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="esnash", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"esnash {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="run configuration file")
        p.add_argument("--out", help="output directory (overrides [outputs] dir)")
        p.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")

    p = sub.add_parser("run", help="simulate one controller arm")
    common(p)
    p.add_argument("--mode", choices=("wsso", "classical"))
    p.add_argument("--allow-frequency-violations", action="store_true")
    p.add_argument("--epsilon", type=float, help="settling band in action units")

    p = sub.add_parser("compare", help="simulate the oscillation-free and classical arms side by side")
    common(p)
    p.add_argument("--allow-frequency-violations", action="store_true")
    p.add_argument("--epsilon", type=float, help="settling band in action units")

    p = sub.add_parser("verify-ne", help="check stationarity and Gershgorin stability of a candidate")
    common(p, config_required=False)
    p.add_argument("--u-star", type=_vector, required=True, help="candidate, e.g. 25/64,5/8")
    p.add_argument("--fd-step", type=float)
    p.add_argument("--grad-tol", type=float)

    p = sub.add_parser("check-freqs", help="check dither frequencies for resonances")
    p.add_argument("freqs", nargs="+", type=_freq, help="frequencies as p/q")
    p.add_argument("--out", help="directory for frequencies.json")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("avg-integrals", help="time averages of dither products")
    p.add_argument("--freqs", nargs="+", type=_freq_list, required=True, help="e.g. 2,3 or 2 3")
    p.add_argument("--phases", nargs="+", type=_float_list)
    p.add_argument("--T", type=float, dest="T", help="averaging horizon, rounded up to whole common periods")
    p.add_argument("--out", help="directory for integrals.csv")
    p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(format="esnash: %(levelname)s: %(message)s", stream=sys.stderr, level=logging.WARNING)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    handler = {
        "run": cmd_run,
        "compare": cmd_compare,
        "verify-ne": cmd_verify_ne,
        "check-freqs": cmd_check_freqs,
        "avg-integrals": cmd_avg_integrals,
    }[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


def _emit(args, text):
    if not args.quiet:
        sys.stdout.write(text)


def _load(args, **overrides) -> RunConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(out=args.out, epsilon=getattr(args, "epsilon", None), **overrides)


def _reference(cfg, game):
    u_star = cfg.u_star
    if u_star is None:
        return None, None, None
    try:
        j_star = reduced_payoff(game, u_star)
    except (PlantSolveError, NumericalDomainError) as exc:
        log.warning("reference payoff unavailable: %s", exc)
        return list(u_star), None, {"u_star": list(u_star), "j_star": None}
    return list(u_star), j_star.tolist(), {"u_star": list(u_star), "j_star": j_star.tolist()}


def _tail_guard(cfg):
    slowest = min(p.omega_float for p in cfg.players)
    period = 2.0 * math.pi / slowest
    if cfg.analysis.tail_fraction * cfg.sim.horizon < period:
        log.warning("tail window shorter than one perturbation period (%.4g < %.4g)",
                    cfg.analysis.tail_fraction * cfg.sim.horizon, period)


def _frequency_gate(cfg, report, out_dir, command):
    if report.ok or cfg.sim.allow_frequency_violations:
        if not report.ok:
            log.warning("dither frequencies violate non-resonance conditions; continuing as requested")
        return None
    desc = "; ".join(f"{v.condition} for players {list(v.players)}" for v in report.violations)
    msg = f"dither frequencies violate non-resonance conditions ({desc}); pass --allow-frequency-violations to run anyway"
    summary = SummaryReport(__version__, command, cfg.canonical(), report, error=msg)
    if cfg.outputs.json:
        write_atomic(out_dir / "summary.json", summary.to_json())
    log.error("%s", msg)
    return EXIT_CONFIG


def _run_arm(cfg, game, mode, u_star, j_star):
    from dataclasses import replace

    sim_cfg = replace(cfg.sim, mode=mode)
    try:
        traj = simulate(game, cfg.players, sim_cfg)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from exc
    metrics = compute_metrics(traj, u_star, j_star, cfg.analysis.epsilon, cfg.analysis.tail_fraction)
    arm = ArmResult(metrics, traj.terminated_early, traj.reason, traj.t_end, len(traj))
    if traj.terminated_early:
        log.warning("%s arm ended early: %s", mode, traj.reason)
    return traj, arm


def cmd_run(args) -> int:
    cfg = _load(args, mode=args.mode, allow_frequency_violations=args.allow_frequency_violations)
    out_dir = Path(cfg.outputs.dir)
    game = cfg.build_game()
    report = validate_frequencies([p.omega for p in cfg.players])
    code = _frequency_gate(cfg, report, out_dir, "run")
    if code is not None:
        return code
    _tail_guard(cfg)
    u_star, j_star, reference = _reference(cfg, game)
    traj, arm = _run_arm(cfg, game, cfg.sim.mode, u_star, j_star)
    summary = SummaryReport(__version__, "run", cfg.canonical(), report, reference, {cfg.sim.mode: arm})
    if not report.ok:
        summary.notes.append("frequency violations overridden")
    write_atomic(out_dir / "config.cfg", cfg.to_ini())
    if cfg.outputs.csv:
        write_trajectory_csv(traj, out_dir / "trajectory.csv")
    if cfg.outputs.json:
        write_atomic(out_dir / "summary.json", summary.to_json())
    _emit(args, summary.to_json())
    return EXIT_EARLY if traj.terminated_early else EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args, allow_frequency_violations=args.allow_frequency_violations)
    out_dir = Path(cfg.outputs.dir)
    game = cfg.build_game()
    report = validate_frequencies([p.omega for p in cfg.players])
    code = _frequency_gate(cfg, report, out_dir, "compare")
    if code is not None:
        return code
    _tail_guard(cfg)
    u_star, j_star, reference = _reference(cfg, game)
    arms, trajs = {}, {}
    for mode in ("wsso", "classical"):
        trajs[mode], arms[mode] = _run_arm(cfg, game, mode, u_star, j_star)
    ratio = []
    for c, w in zip(arms["classical"].metrics.residual_oscillation, arms["wsso"].metrics.residual_oscillation):
        ratio.append(c / w if w > 0 else None)
    summary = SummaryReport(__version__, "compare", cfg.canonical(), report, reference, arms, ratio)
    if any(r is None for r in ratio):
        summary.notes.append("ratio is null where the wsso residual oscillation is exactly zero")
    write_atomic(out_dir / "config.cfg", cfg.to_ini())
    if cfg.outputs.csv:
        for mode, traj in trajs.items():
            write_trajectory_csv(traj, out_dir / f"trajectory_{mode}.csv")
    if cfg.outputs.json:
        write_atomic(out_dir / "summary.json", summary.to_json())
    _emit(args, summary.to_json())
    return EXIT_EARLY if any(a.terminated_early for a in arms.values()) else EXIT_OK


def cmd_verify_ne(args) -> int:
    if args.config:
        cfg = _load(args)
        game = cfg.build_game()
        fd_step = args.fd_step or cfg.analysis.fd_step
        grad_tol = args.grad_tol or cfg.analysis.grad_tol
    else:
        cfg = None
        game = builtin_example()
        fd_step = args.fd_step or 1e-4
        grad_tol = args.grad_tol or 1e-6
    if len(args.u_star) != game.n_players:
        log.error("--u-star needs %d entries, got %d", game.n_players, len(args.u_star))
        return EXIT_CONFIG
    summary = SummaryReport(__version__, "verify-ne", None if cfg is None else cfg.canonical())
    code = EXIT_OK
    try:
        rep = stability_report(game, args.u_star, fd_step=fd_step, grad_tol=grad_tol)
    except InvalidArgumentError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (PlantSolveError, NumericalDomainError) as exc:
        summary.error = str(exc)
        code = EXIT_PLANT
        log.error("%s", exc)
    else:
        summary.stability = rep
        if not rep.stationary:
            summary.notes.append(f"not stationary: max |own-action gradient| = {np.max(np.abs(rep.gradient)):.6g}")
        if not rep.hurwitz_by_gershgorin:
            failing = [i + 1 for i, d in enumerate(rep.row_dominant) if not d]
            summary.notes.append(f"Gershgorin test fails; rows not strictly dominant: {failing}")
        code = EXIT_OK if rep.ok else EXIT_VERIFY
    if args.out:
        write_atomic(Path(args.out) / "stability.json", summary.to_json())
    _emit(args, summary.to_json())
    return code


def cmd_check_freqs(args) -> int:
    try:
        report = validate_frequencies(args.freqs)
    except InvalidArgumentError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    summary = SummaryReport(__version__, "check-freqs", frequency_report=report)
    if args.out:
        write_atomic(Path(args.out) / "frequencies.json", summary.to_json())
    _emit(args, summary.to_json())
    return EXIT_OK if report.ok else EXIT_VERIFY


def integrals_to_csv(report) -> str:
    lines = ["integrand,measured,expected,abs_error"]
    lines += [f"{r.integrand},{r.measured:.17g},{r.expected:.17g},{r.abs_error:.17g}" for r in report.rows]
    return "\n".join(lines) + "\n"


def cmd_avg_integrals(args) -> int:
    try:
        report = verify_averaging_integrals(_flatten(args.freqs), _flatten(args.phases), args.T)
    except InvalidArgumentError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    text = integrals_to_csv(report)
    if args.out:
        write_atomic(Path(args.out) / "integrals.csv", text)
    _emit(args, text)
    return EXIT_OK if report.ok(INTEGRAL_ATOL) else EXIT_VERIFY
