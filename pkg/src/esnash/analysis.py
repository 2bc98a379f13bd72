"""Equilibrium verification, convergence metrics and dither-moment checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from itertools import combinations, permutations
from typing import Optional, Sequence

import numpy as np

from esnash.controller import as_frequency, validate_frequencies
from esnash.errors import InvalidArgumentError, PlantSolveError
from esnash.game import DEFAULT_BUDGET, GameModel, eval_payoffs, settle

DEFAULT_FD_STEP = 1e-4
DIFF_TOL = 1e-12
DEFAULT_EPSILON = 0.02
DEFAULT_TAIL_FRACTION = 0.1
DEFAULT_GRAD_TOL = 1e-6


class _ReducedPayoff:
    """Memoised reduced payoff with every plant solve warm-started at ``l(u0)``."""

    def __init__(self, game, u0, tol, budget):
        self.game = game
        self.tol = tol
        self.budget = budget
        self.cache = {}
        self.x_start = None
        if not game.is_static:
            self.x_start = self._settle(u0, None)

    def _settle(self, u, x0):
        try:
            return settle(self.game, u, self.tol, self.budget, x0)
        except PlantSolveError as exc:
            raise PlantSolveError(
                f"{exc}; quasi-steady state unverifiable here, so stationarity and stability cannot be checked"
            ) from exc

    def __call__(self, u):
        key = tuple(u)
        if key not in self.cache:
            if self.game.is_static:
                self.cache[key] = eval_payoffs(self.game, np.empty(0), u)
            else:
                self.cache[key] = eval_payoffs(self.game, self._settle(u, self.x_start), u)
        return self.cache[key]


def _probe_point(game, u, fd_step):
    # The candidate must be admissible; probes may step up to fd_step past a
    # bound, which is harmless whenever the plant still settles there.
    if not fd_step > 0:
        raise InvalidArgumentError(f"fd_step must be positive, got {fd_step!r}")
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape != (game.n_players,):
        raise InvalidArgumentError(f"u must have {game.n_players} entries")
    if not game.admissible(u):
        raise InvalidArgumentError(f"candidate u={u.tolist()} lies outside the admissible action set")
    return u


def nash_residual(game: GameModel, u, fd_step: float = DEFAULT_FD_STEP, tol: float = DIFF_TOL,
                  budget: float = DEFAULT_BUDGET) -> np.ndarray:
    """Own-action gradients ``d(j_i o l)/du_i`` by central differences.

    A Nash equilibrium makes every entry vanish.
    """
    u = _probe_point(game, u, fd_step)
    R = _ReducedPayoff(game, u, tol, budget)
    grad = np.empty(game.n_players)
    for i in range(game.n_players):
        e = np.zeros_like(u)
        e[i] = fd_step
        grad[i] = (R(u + e)[i] - R(u - e)[i]) / (2.0 * fd_step)
    return grad


def delta_matrix(game: GameModel, u, fd_step: float = DEFAULT_FD_STEP, tol: float = DIFF_TOL,
                 budget: float = DEFAULT_BUDGET) -> np.ndarray:
    """Second derivatives of the reduced payoffs; row ``i`` differentiates payoff ``i``.

    Entry ``(i, j)`` is ``d^2 (j_i o l) / du_i du_j`` from central second
    differences, which are exact (up to round-off) for quadratic payoffs.
    """
    u = _probe_point(game, u, fd_step)
    R = _ReducedPayoff(game, u, tol, budget)
    N = game.n_players
    h = fd_step
    E = np.eye(N) * h
    center = R(u)
    D = np.empty((N, N))
    for i in range(N):
        for j in range(N):
            if i == j:
                D[i, i] = (R(u + E[i])[i] - 2.0 * center[i] + R(u - E[i])[i]) / (h * h)
            else:
                D[i, j] = (
                    R(u + E[i] + E[j])[i] - R(u + E[i] - E[j])[i] - R(u - E[i] + E[j])[i] + R(u - E[i] - E[j])[i]
                ) / (4.0 * h * h)
    return D


@dataclass
class GershgorinVerdict:
    row_dominant: list
    own_curvature_negative: list
    hurwitz_by_gershgorin: bool
    marginal_rows: list = field(default_factory=list)
    eigenvalues: Optional[list] = None  # [[re, im], ...], only for 2x2


def _eig2(D):
    tr = D[0, 0] + D[1, 1]
    det = D[0, 0] * D[1, 1] - D[0, 1] * D[1, 0]
    disc = tr * tr / 4.0 - det
    if disc >= 0:
        r = math.sqrt(disc)
        return [[float(tr / 2.0 + r), 0.0], [float(tr / 2.0 - r), 0.0]]
    r = math.sqrt(-disc)
    return [[float(tr / 2.0), r], [float(tr / 2.0), -r]]


def check_assumption4(delta) -> GershgorinVerdict:
    """Strict row diagonal dominance plus negative diagonal, i.e. Hurwitz by Gershgorin.

    Rows whose diagonal exactly equals the off-diagonal sum count as not
    dominant and are listed in ``marginal_rows`` (1-based).
    """
    D = np.asarray(delta, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise InvalidArgumentError(f"delta must be square, got shape {D.shape}")
    diag = np.abs(np.diag(D))
    off = np.abs(D).sum(axis=1) - diag
    row_dominant = [bool(d > o) for d, o in zip(diag, off)]
    marginal = [i + 1 for i, (d, o) in enumerate(zip(diag, off)) if d == o]
    negative = [bool(v < 0) for v in np.diag(D)]
    return GershgorinVerdict(
        row_dominant=row_dominant,
        own_curvature_negative=negative,
        hurwitz_by_gershgorin=all(row_dominant) and all(negative),
        marginal_rows=marginal,
        eigenvalues=_eig2(D) if D.shape == (2, 2) else None,
    )


@dataclass
class StabilityReport:
    u_star: list
    gradient: list
    delta: list
    row_dominant: list
    own_curvature_negative: list
    hurwitz_by_gershgorin: bool
    stationary: bool
    grad_tol: float
    fd_step: float
    marginal_rows: list = field(default_factory=list)
    eigenvalues: Optional[list] = None

    @property
    def ok(self) -> bool:
        return self.stationary and self.hurwitz_by_gershgorin

    def to_dict(self):
        d = dict(self.__dict__)
        d["ok"] = self.ok
        return d

    @classmethod
    def from_dict(cls, d):
        d = {k: v for k, v in d.items() if k != "ok"}
        return cls(**d)


def stability_report(game: GameModel, u_star, fd_step: float = DEFAULT_FD_STEP,
                     grad_tol: float = DEFAULT_GRAD_TOL, tol: float = DIFF_TOL,
                     budget: float = DEFAULT_BUDGET) -> StabilityReport:
    """Check stationarity and Gershgorin stability of a candidate equilibrium.

    Raises PlantSolveError if any probe's plant solve fails to converge.
    """
    grad = nash_residual(game, u_star, fd_step, tol, budget)
    D = delta_matrix(game, u_star, fd_step, tol, budget)
    verdict = check_assumption4(D)
    return StabilityReport(
        u_star=[float(v) for v in np.asarray(u_star, dtype=float)],
        gradient=grad.tolist(),
        delta=D.tolist(),
        row_dominant=verdict.row_dominant,
        own_curvature_negative=verdict.own_curvature_negative,
        hurwitz_by_gershgorin=verdict.hurwitz_by_gershgorin,
        stationary=bool(np.max(np.abs(grad)) <= grad_tol),
        grad_tol=grad_tol,
        fd_step=fd_step,
        marginal_rows=verdict.marginal_rows,
        eigenvalues=verdict.eigenvalues,
    )


@dataclass
class RunMetrics:
    """Convergence summary of one trajectory.

    Error-based fields are ``None`` when no reference equilibrium was given.
    """

    settling_time: Optional[float]
    final_error: Optional[float]
    residual_oscillation: list
    final_amplitude: list
    payoff_error: Optional[float]
    epsilon: float = DEFAULT_EPSILON
    tail_window: tuple = (float("nan"), float("nan"))

    def to_dict(self):
        d = dict(self.__dict__)
        d["tail_window"] = list(self.tail_window)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["tail_window"] = tuple(d["tail_window"])
        return cls(**d)


def compute_metrics(traj, u_star=None, j_star=None, epsilon: float = DEFAULT_EPSILON,
                    tail_fraction: float = DEFAULT_TAIL_FRACTION) -> RunMetrics:
    """Settling time, final errors and residual oscillation of a trajectory.

    Settling time is the earliest sample time after which every later sample
    keeps ``max|u_hat - u_star| <= epsilon``. Residual oscillation is half the
    peak-to-peak range of each applied action over the last ``tail_fraction``
    of the recorded span.
    """
    if not epsilon > 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon!r}")
    if not 0 < tail_fraction <= 1:
        raise InvalidArgumentError(f"tail_fraction must lie in (0, 1], got {tail_fraction!r}")
    t = np.asarray(traj.times)
    if t.size == 0:
        raise InvalidArgumentError("empty trajectory")
    t0, T = float(t[0]), float(t[-1])
    start = T - tail_fraction * (T - t0)
    tail = t >= start
    u_tail = np.asarray(traj.u)[tail]
    residual = (0.5 * (u_tail.max(axis=0) - u_tail.min(axis=0))).tolist()

    settling = final_error = payoff_error = None
    if u_star is not None:
        err = np.max(np.abs(np.asarray(traj.u_hat) - np.asarray(u_star, dtype=float)), axis=1)
        outside = np.flatnonzero(err > epsilon)
        if outside.size == 0:
            settling = t0
        elif outside[-1] < t.size - 1:
            settling = float(t[outside[-1] + 1])
        final_error = float(err[-1])
    if j_star is not None:
        payoff_error = float(np.max(np.abs(np.asarray(traj.J)[-1] - np.asarray(j_star, dtype=float))))
    return RunMetrics(
        settling_time=settling,
        final_error=final_error,
        residual_oscillation=residual,
        final_amplitude=np.asarray(traj.a)[-1].tolist(),
        payoff_error=payoff_error,
        epsilon=epsilon,
        tail_window=(start, T),
    )


@dataclass
class IntegralRow:
    integrand: str
    measured: float
    expected: float
    abs_error: float


@dataclass
class IntegralReport:
    rows: list
    T: float
    common_period: float

    def ok(self, atol: float = 1e-6) -> bool:
        return all(r.abs_error <= atol for r in self.rows)

    def row(self, name: str) -> IntegralRow:
        for r in self.rows:
            if r.integrand == name:
                return r
        raise KeyError(name)


def common_period(freqs) -> Fraction:
    """Smallest ``L`` with every ``w_i * L`` an integer; the common period is ``2 pi L``."""
    ws = [as_frequency(f) for f in freqs]
    num = reduce(math.lcm, (w.denominator for w in ws))
    den = reduce(math.gcd, (w.numerator for w in ws))
    return Fraction(num, den)


def _name(*factors):
    parts = []
    for idx, power in factors:
        parts.append(f"eta{idx}" if power == 1 else f"eta{idx}^{power}")
    return "*".join(parts)


def _integrand_families(N):
    """(name, [(player, power), ...], expected mean) for every moment to check."""
    rows = []
    for i in range(N):
        for p, expected in ((1, 0.0), (2, 0.5), (3, 0.0), (4, 0.375)):
            rows.append(([(i, p)], expected))
    for i, j in combinations(range(N), 2):
        rows.append(([(i, 1), (j, 1)], 0.0))
    for i, j in permutations(range(N), 2):
        rows.append(([(i, 2), (j, 1)], 0.0))
    for i, j in permutations(range(N), 2):
        rows.append(([(i, 3), (j, 1)], 0.0))
    for i, j in combinations(range(N), 2):
        rows.append(([(i, 2), (j, 2)], 0.25))
    # Three-factor families: outer indices distinct, middle index free.
    # With N = 2 they coincide with products already listed above.
    for i, k in combinations(range(N), 2):
        for j in range(N):
            rows.append(([(i, 1), (j, 1), (k, 1)], 0.0))
    for i, k in combinations(range(N), 2):
        for j in range(N):
            rows.append(([(i, 1), (j, 2), (k, 1)], 0.0))
    return [(_name(*[(m + 1, p) for m, p in factors]), factors, e) for factors, e in rows]


def verify_averaging_integrals(freqs: Sequence, phases: Optional[Sequence] = None, T: Optional[float] = None,
                               nodes_per_period: Optional[int] = None) -> IntegralReport:
    """Time averages of products of the dither signals ``eta_i = sin(w_i t + phi_i)``.

    ``T`` is rounded up to a whole number of common periods (at least one),
    over which every integrand is a trigonometric polynomial. The average is
    taken with the uniform-node rectangle rule, which is exact for such
    polynomials once the node count exceeds the highest harmonic; the result is
    therefore limited only by round-off.

    ``expected`` holds the limiting value under non-resonant frequencies, so
    resonant inputs surface as large ``abs_error`` rows.
    """
    ws = [as_frequency(f) for f in freqs]
    if not ws:
        raise InvalidArgumentError("need at least one frequency")
    for w in ws:
        if not w > 0:
            raise InvalidArgumentError(f"frequencies must be positive, got {w}")
    N = len(ws)
    phases = np.zeros(N) if phases is None else np.asarray(phases, dtype=float)
    if phases.shape != (N,) or not np.all(np.isfinite(phases)):
        raise InvalidArgumentError(f"need {N} finite phases")
    L = common_period(ws)
    P = 2.0 * math.pi * float(L)
    if T is None:
        periods = 1
    else:
        if not (math.isfinite(T) and T > 0):
            raise InvalidArgumentError(f"T must be positive, got {T!r}")
        periods = max(1, math.ceil(T / P - 1e-9))
    harmonics = [int(w * L) for w in ws]
    M = nodes_per_period or max(256, 8 * max(harmonics) + 8)
    # Phase of eta_i at node m of period p is 2 pi m_i (p M + m) / M + phi_i;
    # exact integer harmonics keep the angle reduction free of drift.
    nodes = np.arange(periods * M)
    eta = np.empty((N, nodes.size))
    for i in range(N):
        eta[i] = np.sin(2.0 * math.pi * ((harmonics[i] * nodes) % M) / M + phases[i])
    rows = []
    for name, factors, expected in _integrand_families(N):
        prod = np.ones(nodes.size)
        for m, p in factors:
            prod = prod * eta[m] ** p
        measured = float(prod.mean())
        rows.append(IntegralRow(name, measured, expected, abs(measured - expected)))
    return IntegralReport(rows=rows, T=periods * P, common_period=P)
