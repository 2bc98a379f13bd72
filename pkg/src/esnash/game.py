"""Game models: plant dynamics, per-player payoffs and the quasi-steady-state map.

A game couples a plant ``x' = f(x, u)`` with payoff maps ``J = j(x, u)``. The
action vector ``u`` collects one scalar action per player. Static games have
``state_dim == 0``; their payoffs depend on ``u`` alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from esnash._integrate import rk4_step
from esnash.errors import DivergenceError, InvalidArgumentError, NumericalDomainError, PlantSolveError

DEFAULT_TOL = 1e-9
DEFAULT_BUDGET = 1e3
DEFAULT_DIVERGENCE_BOUND = 1e6
DEFAULT_PLANT_STEP = 1e-2

VectorField = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GameModel:
    """An N-player game played through a shared plant.

    Attributes
    ----------
    n_players : int
        Number of players ``N``; each owns one scalar action.
    state_dim : int
        Plant dimension ``n``. Zero means a static game.
    dynamics : callable
        ``dynamics(x, u) -> x'`` with shapes ``(n,), (N,) -> (n,)``.
    payoffs : callable
        ``payoffs(x, u) -> J`` with shapes ``(n,), (N,) -> (N,)``.
    action_bounds : sequence of (low, high) or None
        Closed admissible interval per player; ``None`` entries mean unbounded.
    name : str
        Label used in reports.
    """

    n_players: int
    state_dim: int
    dynamics: Optional[VectorField]
    payoffs: VectorField
    action_bounds: Optional[tuple] = None
    name: str = "game"

    def __post_init__(self):
        if int(self.n_players) != self.n_players or self.n_players < 1:
            raise InvalidArgumentError(f"n_players must be a positive integer, got {self.n_players!r}")
        if int(self.state_dim) != self.state_dim or self.state_dim < 0:
            raise InvalidArgumentError(f"state_dim must be a non-negative integer, got {self.state_dim!r}")
        if self.state_dim > 0 and self.dynamics is None:
            raise InvalidArgumentError("a dynamic game needs a dynamics map")
        if self.action_bounds is not None:
            bounds = tuple(
                (float("-inf") if lo is None else float(lo), float("inf") if hi is None else float(hi))
                for lo, hi in self.action_bounds
            )
            if len(bounds) != self.n_players:
                raise InvalidArgumentError("action_bounds needs one interval per player")
            for lo, hi in bounds:
                if not lo <= hi:
                    raise InvalidArgumentError(f"empty action interval [{lo}, {hi}]")
            object.__setattr__(self, "action_bounds", bounds)

    @property
    def is_static(self) -> bool:
        return self.state_dim == 0

    def admissible(self, u) -> bool:
        """True when every action lies in its closed interval."""
        if self.action_bounds is None:
            return True
        return all(lo <= ui <= hi for ui, (lo, hi) in zip(u, self.action_bounds))


def _as_vector(v, size, what):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0 and size == 1:
        arr = arr.reshape(1)
    if arr.shape != (size,):
        raise InvalidArgumentError(f"{what} must have shape ({size},), got {arr.shape}")
    return arr


def _finite_output(out, size, what):
    out = np.asarray(out, dtype=float).reshape(-1)
    if out.shape != (size,):
        raise InvalidArgumentError(f"{what} returned shape {out.shape}, expected ({size},)")
    if not np.all(np.isfinite(out)):
        raise NumericalDomainError(f"{what} returned non-finite values {out}")
    return out


def eval_dynamics(game: GameModel, x, u) -> np.ndarray:
    """Evaluate the plant vector field ``f(x, u)`` with dimension and finiteness checks."""
    x = _as_vector(x, game.state_dim, "state x")
    u = _as_vector(u, game.n_players, "action u")
    if game.is_static:
        return np.empty(0)
    return _finite_output(game.dynamics(x, u), game.state_dim, "dynamics")


def eval_payoffs(game: GameModel, x, u) -> np.ndarray:
    """Evaluate the payoff vector ``J`` at state ``x`` and action ``u``."""
    x = _as_vector(x, game.state_dim, "state x")
    u = _as_vector(u, game.n_players, "action u")
    return _finite_output(game.payoffs(x, u), game.n_players, "payoffs")


# Two-player oligopoly-style differential game with quasi-steady state
# x1 = 4 u1 / (16 - u2), x2 = u2 / 4. The plant Jacobian is Hurwitz for u2 < 16.

def _example_dynamics(x, u):
    x1, x2 = x.tolist()
    u1, u2 = u.tolist()
    return np.array([-4.0 * x1 + x1 * x2 + u1, -4.0 * x2 + u2])


def _example_payoffs(x, u):
    x1, x2 = x.tolist()
    j1 = (
        -16.0 * x1 * x1
        + 8.0 * x1 * x1 * x2
        - x1 * x1 * x2 * x2
        - 6.0 * x1 * x2 * x2
        + (773.0 / 32.0) * x1 * x2
        - 0.625 * x1
    )
    j2 = -64.0 * x2 ** 3 + 48.0 * x1 * x2 - 12.0 * x1 * x2 * x2
    return np.array([j1, j2])


# Coefficient tables of the same game, over monomials in (x1, x2, u1, u2).
EXAMPLE_DYNAMICS_TERMS = (
    ((-4.0, (1, 0, 0, 0)), (1.0, (1, 1, 0, 0)), (1.0, (0, 0, 1, 0))),
    ((-4.0, (0, 1, 0, 0)), (1.0, (0, 0, 0, 1))),
)
EXAMPLE_PAYOFF_TERMS = (
    (
        (-16.0, (2, 0, 0, 0)),
        (8.0, (2, 1, 0, 0)),
        (-1.0, (2, 2, 0, 0)),
        (-6.0, (1, 2, 0, 0)),
        (773.0 / 32.0, (1, 1, 0, 0)),
        (-0.625, (1, 0, 0, 0)),
    ),
    ((-64.0, (0, 3, 0, 0)), (48.0, (1, 1, 0, 0)), (-12.0, (1, 2, 0, 0))),
)

# Stable Nash equilibrium of the example and the payoffs it yields.
EXAMPLE_NASH = (25.0 / 64.0, 5.0 / 8.0)
EXAMPLE_UNSTABLE_NASH = (1.0 / 64.0, 1.0 / 8.0)


def builtin_example() -> GameModel:
    """The two-player, two-state differential game used throughout the docs.

    Actions are restricted to ``u1 >= 0`` and ``0 <= u2 < 16``; the open upper
    end is represented by the largest double below 16.
    """
    return GameModel(
        n_players=2,
        state_dim=2,
        dynamics=_example_dynamics,
        payoffs=_example_payoffs,
        action_bounds=((0.0, None), (0.0, float(np.nextafter(16.0, 0.0)))),
        name="builtin_example",
    )


@dataclass(frozen=True)
class _Polynomial:
    """Vector of polynomials sharing one monomial basis."""

    exponents: np.ndarray  # (n_monomials, n_vars)
    coefficients: np.ndarray  # (n_outputs, n_monomials)

    @classmethod
    def from_terms(cls, rows, n_vars):
        basis = {}
        for row in rows:
            for _, exps in row:
                exps = tuple(int(e) for e in exps)
                if len(exps) != n_vars:
                    raise InvalidArgumentError(
                        f"exponent tuple {exps} has {len(exps)} entries, expected {n_vars}"
                    )
                if any(e < 0 for e in exps):
                    raise InvalidArgumentError(f"negative exponent in {exps}")
                basis.setdefault(exps, len(basis))
        exponents = np.array(list(basis), dtype=float).reshape(len(basis), n_vars)
        coefficients = np.zeros((len(rows), len(basis)))
        for i, row in enumerate(rows):
            for coef, exps in row:
                coefficients[i, basis[tuple(int(e) for e in exps)]] += float(coef)
        return cls(exponents, coefficients)

    def __call__(self, z):
        if self.exponents.shape[0] == 0:
            return np.zeros(self.coefficients.shape[0])
        return self.coefficients @ np.prod(np.power(z, self.exponents), axis=1)


def polynomial_game(state_dim, n_players, dynamics_terms, payoff_terms, action_bounds=None, name="polynomial"):
    """Build a game whose dynamics and payoffs are polynomials in ``(x, u)``.

    ``dynamics_terms[r]`` and ``payoff_terms[i]`` are sequences of
    ``(coefficient, exponents)`` pairs, where ``exponents`` has one entry per
    variable in the order ``x1..xn, u1..uN``.
    """
    n_vars = state_dim + n_players
    if len(dynamics_terms) != state_dim:
        raise InvalidArgumentError(f"need {state_dim} dynamics rows, got {len(dynamics_terms)}")
    if len(payoff_terms) != n_players:
        raise InvalidArgumentError(f"need {n_players} payoff rows, got {len(payoff_terms)}")
    f_poly = _Polynomial.from_terms(dynamics_terms, n_vars)
    j_poly = _Polynomial.from_terms(payoff_terms, n_vars)

    def dynamics(x, u):
        return f_poly(np.concatenate((x, u)))

    def payoffs(x, u):
        return j_poly(np.concatenate((x, u)))

    return GameModel(
        n_players=n_players,
        state_dim=state_dim,
        dynamics=dynamics if state_dim > 0 else None,
        payoffs=payoffs,
        action_bounds=action_bounds,
        name=name,
    )


@dataclass
class EquilibriumMapResult:
    x_eq: np.ndarray
    converged: bool
    iterations_or_time: float
    residual_norm: float
    tol: float = field(default=DEFAULT_TOL, repr=False)


def equilibrium_map(
    game: GameModel,
    u,
    tol: float = DEFAULT_TOL,
    budget: float = DEFAULT_BUDGET,
    x0=None,
    step: float = DEFAULT_PLANT_STEP,
    divergence_bound: float = DEFAULT_DIVERGENCE_BOUND,
) -> EquilibriumMapResult:
    """Find the quasi-steady state ``l(u)`` by integrating the plant with ``u`` frozen.

    Integration (RK4, fixed ``step``) runs until ``max|f(x, u)| <= tol`` or the
    simulated time reaches ``budget``. An exhausted budget returns
    ``converged=False`` with the last iterate; leaving the ``divergence_bound``
    sup-norm ball raises :class:`DivergenceError`. ``x0`` warm-starts the
    search, which pays off when sweeping ``u``.
    """
    if not tol > 0:
        raise InvalidArgumentError(f"tol must be positive, got {tol!r}")
    if not budget > 0:
        raise InvalidArgumentError(f"budget must be positive, got {budget!r}")
    u = _as_vector(u, game.n_players, "action u")
    if game.is_static:
        return EquilibriumMapResult(np.empty(0), True, 0.0, 0.0, tol)

    x = np.zeros(game.state_dim) if x0 is None else _as_vector(x0, game.state_dim, "x0").copy()

    def field_(t, y):
        return game.dynamics(y, u)

    t = 0.0
    steps = 0
    residual = float(np.max(np.abs(eval_dynamics(game, x, u))))
    while residual > tol:
        if t >= budget:
            return EquilibriumMapResult(x, False, t, residual, tol)
        x = rk4_step(field_, x, t, step)
        steps += 1
        t = steps * step
        if np.max(np.abs(x)) > divergence_bound:
            raise DivergenceError(
                f"plant state left the ball |x| <= {divergence_bound:g} at t={t:g} for u={u.tolist()}"
            )
        residual = float(np.max(np.abs(eval_dynamics(game, x, u))))
    return EquilibriumMapResult(x, True, t, residual, tol)


# After converging to ``tol`` the plant solve keeps going for at most
# POLISH_BUDGET time units toward ``tol * POLISH_FACTOR``. Payoffs amplify the
# state error by their gradient, and finite differences amplify it further.
POLISH_FACTOR = 1e-3
POLISH_BUDGET = 20.0


def settle(game: GameModel, u, tol: float = DEFAULT_TOL, budget: float = DEFAULT_BUDGET, x0=None, **kwargs):
    """Quasi-steady state converged to ``tol`` and then polished; raises PlantSolveError on failure."""
    res = equilibrium_map(game, u, tol=tol, budget=budget, x0=x0, **kwargs)
    if not res.converged:
        raise PlantSolveError(
            f"quasi-steady state not reached for u={np.asarray(u, dtype=float).tolist()}: "
            f"residual {res.residual_norm:.3g} > tol {tol:g} after {res.iterations_or_time:g} time units"
        )
    fine = equilibrium_map(game, u, tol=tol * POLISH_FACTOR, budget=POLISH_BUDGET, x0=res.x_eq, **kwargs)
    return fine.x_eq if fine.residual_norm <= res.residual_norm else res.x_eq


def reduced_payoff(
    game: GameModel,
    u,
    tol: float = DEFAULT_TOL,
    budget: float = DEFAULT_BUDGET,
    x0=None,
    **kwargs,
) -> np.ndarray:
    """Payoffs at the quasi-steady state, ``j(l(u), u)``.

    Raises PlantSolveError when the plant does not settle within ``budget``.
    """
    u = _as_vector(u, game.n_players, "action u")
    if game.is_static:
        return eval_payoffs(game, np.empty(0), u)
    return eval_payoffs(game, settle(game, u, tol, budget, x0, **kwargs), u)
