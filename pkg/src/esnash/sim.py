"""Closed-loop simulation of players running extremum-seeking controllers.

The integrated state is one flat vector laid out as

    [x_1..x_n, u_hat_1..u_hat_N, a_1..a_N, n_1..n_N]

This ordering is part of the public contract (golden files depend on it).
Payoffs are evaluated inside every Runge-Kutta stage, so the controllers see a
continuous-time measurement rather than a sampled-and-held one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from esnash._integrate import rk4_step
from esnash.controller import (
    FrequencyReport,
    SeekerParams,
    SeekerState,
    action,
    classical_es_derivatives,
    seeker_derivatives,
    validate_frequencies,
)
from esnash.errors import InvalidArgumentError, NumericalDomainError
from esnash.game import GameModel, eval_dynamics, eval_payoffs

__all__ = ["SimConfig", "Trajectory", "closed_loop_derivatives", "rk4_step", "simulate", "MODES"]

MODES = ("wsso", "classical")
MIN_STEPS_PER_PERIOD = 20


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    ``step_policy`` decides what happens when ``step`` resolves the fastest
    dither period with fewer than 20 steps: ``"error"`` raises, ``"warn"``
    emits a warning and carries on.
    """

    horizon: float = 100.0
    step: float = 1e-3
    sample_stride: int = 10
    divergence_bound: float = 1e6
    mode: str = "wsso"
    x0: Optional[tuple] = None
    step_policy: str = "error"
    enforce_action_bounds: bool = True
    allow_frequency_violations: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise InvalidArgumentError(f"sim.horizon must be positive, got {self.horizon!r}")
        if not (math.isfinite(self.step) and self.step > 0):
            raise InvalidArgumentError(f"sim.step must be positive, got {self.step!r}")
        if not self.step < self.horizon:
            raise InvalidArgumentError(f"sim.step ({self.step}) must be smaller than sim.horizon ({self.horizon})")
        if isinstance(self.sample_stride, bool) or int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise InvalidArgumentError(f"sim.sample_stride must be a positive integer, got {self.sample_stride!r}")
        object.__setattr__(self, "sample_stride", int(self.sample_stride))
        if not self.divergence_bound > 0:
            raise InvalidArgumentError(f"sim.divergence_bound must be positive, got {self.divergence_bound!r}")
        if self.mode not in MODES:
            raise InvalidArgumentError(f"sim.mode must be one of {MODES}, got {self.mode!r}")
        if self.step_policy not in ("error", "warn"):
            raise InvalidArgumentError(f"sim.step_policy must be 'error' or 'warn', got {self.step_policy!r}")
        n_steps = round(self.horizon / self.step)
        if abs(n_steps * self.step - self.horizon) > 1e-9 * self.horizon:
            raise InvalidArgumentError(
                f"sim.horizon ({self.horizon}) must be an integer multiple of sim.step ({self.step})"
            )
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))

    @property
    def n_steps(self) -> int:
        return round(self.horizon / self.step)

    def check_resolution(self, params: Sequence[SeekerParams]):
        fastest = max(p.omega_float for p in params)
        limit = 2.0 * math.pi / fastest / MIN_STEPS_PER_PERIOD
        if self.step > limit:
            msg = (
                f"sim.step={self.step:g} gives fewer than {MIN_STEPS_PER_PERIOD} steps per period of the "
                f"fastest dither (w={fastest:g}); use step <= {limit:.4g}"
            )
            if self.step_policy == "error":
                raise InvalidArgumentError(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=3)


@dataclass
class Trajectory:
    """Sampled closed-loop time series in original coordinates.

    Per-player arrays have shape ``(n_samples, N)``; ``states`` has shape
    ``(n_samples, n)``.
    """

    times: np.ndarray
    states: np.ndarray
    u: np.ndarray
    u_hat: np.ndarray
    a: np.ndarray
    n: np.ndarray
    J: np.ndarray
    terminated_early: bool = False
    reason: Optional[str] = None
    mode: str = "wsso"
    frequency_report: Optional[FrequencyReport] = None
    frequency_override: bool = False
    t_end: float = field(default=float("nan"))

    def __len__(self):
        return len(self.times)


def closed_loop_derivatives(game: GameModel, params: Sequence[SeekerParams], mode: str, x, seekers, t):
    """Right-hand side of the closed loop, player by player.

    Returns ``(dx, dseekers)`` where ``dseekers[i]`` is ``(u_hat', a', n')``.
    """
    if mode not in MODES:
        raise InvalidArgumentError(f"mode must be one of {MODES}, got {mode!r}")
    if len(params) != game.n_players or len(seekers) != game.n_players:
        raise InvalidArgumentError("need one parameter set and one seeker state per player")
    u = np.array([action(s, p, t) for s, p in zip(seekers, params)])
    J = eval_payoffs(game, x, u)
    dx = eval_dynamics(game, x, u)
    ctrl = seeker_derivatives if mode == "wsso" else classical_es_derivatives
    dseekers = [ctrl(s, float(Ji), p, t) for s, Ji, p in zip(seekers, J, params)]
    return dx, dseekers


def _flat_field(game, params, mode):
    """Vector field over the flat state, parametrised by the dither values.

    Returns ``(deriv_s, deriv_t, w, phi)``: ``deriv_s(s, y)`` takes the
    current ``sin(w t + phi)`` vector directly so the hot loop can reuse
    precomputed sines; ``deriv_t(t, y)`` is the ordinary time-parametrised
    form.
    """
    nx, N = game.state_dim, game.n_players
    k = np.array([p.k for p in params])
    b = np.array([p.b for p in params])
    wl = np.array([p.omega_l for p in params])
    wh = np.array([p.omega_h for p in params])
    w = np.array([p.omega_float for p in params])
    phi = np.array([p.phi for p in params])
    neg_wl, bwl, neg_wh = -wl, b * wl, -wh
    zeros = np.zeros(N)
    dynamics, payoffs = game.dynamics, game.payoffs
    i_u, i_a, i_n = nx, nx + N, nx + 2 * N
    wsso = mode == "wsso"
    empty = np.empty(0)

    # Same formulas and operation order as seeker_derivatives.
    def deriv_s(s, y):
        x = y[:i_u]
        a = y[i_a:i_n]
        n = y[i_n:]
        u = y[i_u:i_a] + a * s
        J = payoffs(x, u)
        e = J - n
        return np.concatenate((
            dynamics(x, u) if nx else empty,
            k * e * s,
            neg_wl * a + bwl * e if wsso else zeros,
            neg_wh * n + wh * J,
        ))

    def deriv_t(t, y):
        return deriv_s(np.sin(w * t + phi), y)

    return deriv_s, deriv_t, w, phi


def simulate(game: GameModel, params: Sequence[SeekerParams], cfg: Optional[SimConfig] = None) -> Trajectory:
    """Integrate the closed loop from its initial conditions to ``cfg.horizon``.

    Breaching ``cfg.divergence_bound`` or an action leaving the game's
    admissible set ends the run early; the returned trajectory then carries
    ``terminated_early=True`` and a reason string. Frequencies that fail the
    non-resonance check raise InvalidArgumentError unless
    ``cfg.allow_frequency_violations`` is set, in which case the override is
    recorded on the trajectory.
    """
    cfg = cfg or SimConfig()
    params = list(params)
    if len(params) != game.n_players:
        raise InvalidArgumentError(f"need {game.n_players} seeker parameter sets, got {len(params)}")
    cfg.check_resolution(params)
    report = validate_frequencies([p.omega for p in params])
    if not report.ok and not cfg.allow_frequency_violations:
        desc = "; ".join(f"{v.condition} for players {v.players}" for v in report.violations)
        raise InvalidArgumentError(f"dither frequencies violate non-resonance conditions: {desc}")

    nx, N = game.state_dim, game.n_players
    x0 = np.zeros(nx) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
    if x0.shape != (nx,):
        raise InvalidArgumentError(f"x0 must have {nx} entries, got {x0.shape}")
    uh0 = np.array([p.u_hat0 for p in params])
    a0 = np.array([p.a0 for p in params])
    deriv_s, deriv_t, w, phi = _flat_field(game, params, cfg.mode)
    J0 = eval_payoffs(game, x0, uh0 + a0 * np.sin(phi))
    n0 = np.array([J0[i] if p.n0 is None else p.n0 for i, p in enumerate(params)])
    y = np.concatenate((x0, uh0, a0, n0))

    h = cfg.step
    n_steps = cfg.n_steps
    stride = cfg.sample_stride
    n_samples = n_steps // stride + 1
    times = np.empty(n_samples)
    Y = np.empty((n_samples, y.size))
    Ju = np.empty((n_samples, 2 * N))  # payoffs and applied actions at each sample
    i_u, i_a, i_n = nx, nx + N, nx + 2 * N

    def record(j, t, y):
        times[j] = t
        Y[j] = y
        u = y[i_u:i_a] + y[i_a:i_n] * np.sin(w * t + phi)
        Ju[j, :N] = u
        Ju[j, N:] = payoffs(y[:nx], u)

    payoffs = game.payoffs
    record(0, 0.0, y)
    recorded = 1
    reason = None
    bounds = game.action_bounds if cfg.enforce_action_bounds else None
    if bounds is not None:
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
    # Dither values at every half step: index 2i is t_i, 2i + 1 is t_i + h/2.
    sines = list(np.sin(np.outer(np.arange(2 * n_steps + 1) * (0.5 * h), w) + phi))
    hh, h6 = 0.5 * h, h / 6.0
    t_end = 0.0
    for i in range(n_steps):
        s0, s1, s2 = sines[2 * i], sines[2 * i + 1], sines[2 * i + 2]
        k1 = deriv_s(s0, y)
        k2 = deriv_s(s1, y + hh * k1)
        k3 = deriv_s(s1, y + hh * k2)
        k4 = deriv_s(s2, y + h * k3)
        y_next = y + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = (i + 1) * h
        peak = np.max(np.abs(y_next))
        if not math.isfinite(peak):
            try:
                rk4_step(deriv_t, y, i * h, h)
                reason = f"non-finite state at t={t:.6g}"
            except NumericalDomainError as exc:
                reason = f"non-finite state: {exc}"
            break
        if peak > cfg.divergence_bound:
            reason = f"divergence: |state| exceeded {cfg.divergence_bound:g} at t={t:.6g}"
            break
        y = y_next
        t_end = t
        if bounds is not None:
            u = y[i_u:i_a] + y[i_a:i_n] * s2
            out = (u < lo) | (u > hi)
            if out.any():
                players = [int(m) + 1 for m in np.flatnonzero(out)]
                reason = f"action_bounds: player(s) {players} left the admissible set at t={t:.6g}"
                if (i + 1) % stride == 0:
                    record(recorded, t, y)
                    recorded += 1
                break
        if (i + 1) % stride == 0:
            record(recorded, t, y)
            recorded += 1

    Y = Y[:recorded]
    return Trajectory(
        times=times[:recorded],
        states=Y[:, :nx].copy(),
        u=Ju[:recorded, :N].copy(),
        u_hat=Y[:, i_u:i_a].copy(),
        a=Y[:, i_a:i_n].copy(),
        n=Y[:, i_n:].copy(),
        J=Ju[:recorded, N:].copy(),
        terminated_early=reason is not None,
        reason=reason,
        mode=cfg.mode,
        frequency_report=report,
        frequency_override=not report.ok,
        t_end=t_end,
    )
