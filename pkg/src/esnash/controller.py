"""Per-player extremum-seeking controllers.

Each player runs a washout filter ``n`` on its own payoff, demodulates the
filtered payoff with its sinusoidal dither to update the action estimate
``u_hat``, and (in the oscillation-free scheme) drives the dither amplitude
``a`` with a low-pass filter of the same filtered payoff, so the dither dies
out as the payoff stops changing:

    u_hat' = k (J - n) sin(w t + phi)
    u      = u_hat + a sin(w t + phi)
    a'     = -w_l a + b w_l (J - n)
    n'     = -w_h n + w_h J

``k > 0`` seeks a maximum of the payoff, ``k < 0`` a minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations
from typing import NamedTuple, Optional, Sequence

from esnash.errors import InvalidArgumentError, NumericalDomainError

DEFAULT_A0 = 0.2


def as_frequency(value) -> Fraction:
    """Coerce ``value`` to an exact rational frequency.

    Accepts ``Fraction``, ``int`` and strings of the form ``"p/q"`` or ``"p"``.
    Floats and decimal strings are rejected: the non-resonance conditions are
    equalities between frequencies and only make sense exactly.
    """
    if isinstance(value, bool):
        raise InvalidArgumentError(f"invalid frequency {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if any(c in text for c in ".eE"):
            raise InvalidArgumentError(
                f"frequency {value!r} is a decimal; write it as an exact ratio 'p/q' "
                "(the non-resonance conditions need rational frequency ratios)"
            )
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidArgumentError(f"cannot parse frequency {value!r} as 'p/q'") from exc
    raise InvalidArgumentError(
        f"frequency {value!r} of type {type(value).__name__} is not an exact rational; use Fraction or 'p/q'"
    )


@dataclass(frozen=True)
class SeekerParams:
    """Gains, filter corners, dither and initial conditions of one player.

    ``omega`` is stored exactly; ``omega_float`` is the value fed to ``sin``.
    ``n0=None`` starts the washout filter at the first measured payoff.
    """

    k: float
    b: float
    omega_l: float
    omega_h: float
    omega: Fraction
    phi: float = 0.0
    u_hat0: float = 0.0
    a0: float = DEFAULT_A0
    n0: Optional[float] = None
    omega_float: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "omega", as_frequency(self.omega))
        object.__setattr__(self, "omega_float", float(self.omega))
        for name in ("k", "b", "omega_l", "omega_h", "phi", "u_hat0", "a0"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidArgumentError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.n0 is not None:
            if not math.isfinite(self.n0):
                raise InvalidArgumentError(f"n0 must be finite, got {self.n0!r}")
            object.__setattr__(self, "n0", float(self.n0))
        if self.k == 0:
            raise InvalidArgumentError("k must be non-zero; its sign selects max or min seeking")
        for name in ("omega_l", "omega_h", "a0"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not self.omega > 0:
            raise InvalidArgumentError(f"omega must be positive, got {self.omega}")


class SeekerState(NamedTuple):
    u_hat: float
    a: float
    n: float


def _require_finite(*values):
    for v in values:
        if not math.isfinite(v):
            raise NumericalDomainError(f"non-finite controller input {v!r}")


def seeker_derivatives(state: SeekerState, J: float, params: SeekerParams, t: float):
    """Time derivatives ``(u_hat', a', n')`` of the oscillation-free seeker."""
    _require_finite(state.u_hat, state.a, state.n, J, t)
    e = J - state.n
    s = math.sin(params.omega_float * t + params.phi)
    return (
        params.k * e * s,
        -params.omega_l * state.a + params.b * params.omega_l * e,
        -params.omega_h * state.n + params.omega_h * J,
    )


def classical_es_derivatives(state: SeekerState, J: float, params: SeekerParams, t: float):
    """Fixed-amplitude baseline: same estimator and washout, ``a' = 0``."""
    _require_finite(state.u_hat, state.a, state.n, J, t)
    e = J - state.n
    s = math.sin(params.omega_float * t + params.phi)
    return (
        params.k * e * s,
        0.0,
        -params.omega_h * state.n + params.omega_h * J,
    )


def action(state: SeekerState, params: SeekerParams, t: float) -> float:
    """Applied action ``u_hat + a sin(w t + phi)``."""
    _require_finite(state.u_hat, state.a, t)
    return state.u_hat + state.a * math.sin(params.omega_float * t + params.phi)


@dataclass(frozen=True)
class FrequencyViolation:
    condition: str
    players: tuple  # 1-based indices in the order the condition names them
    values: tuple  # the offending frequencies as Fractions

    def to_dict(self):
        return {
            "condition": self.condition,
            "players": list(self.players),
            "values": [str(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["condition"], tuple(d["players"]), tuple(Fraction(v) for v in d["values"]))


@dataclass(frozen=True)
class FrequencyReport:
    violations: tuple
    all_ratios_rational: bool = True

    @property
    def ok(self) -> bool:
        return not self.violations and self.all_ratios_rational

    def to_dict(self):
        return {
            "ok": self.ok,
            "all_ratios_rational": self.all_ratios_rational,
            "violations": [v.to_dict() for v in self.violations],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(FrequencyViolation.from_dict(v) for v in d["violations"]), d["all_ratios_rational"])


# name, index arity, predicate that is True when the condition is violated
_CONDITIONS = (
    ("w_i == w_j", 2, lambda wi, wj: wi == wj),
    ("w_i == 2 w_j", 2, lambda wi, wj: wi == 2 * wj),
    ("w_i == 3 w_j", 2, lambda wi, wj: wi == 3 * wj),
    ("w_i == w_j + w_k", 3, lambda wi, wj, wk: wi == wj + wk),
    ("2 w_i == w_j + w_k", 3, lambda wi, wj, wk: 2 * wi == wj + wk),
    ("w_i == 2 w_j + w_k", 3, lambda wi, wj, wk: wi == 2 * wj + wk),
)
# Conditions symmetric in (j, k) are reported once per unordered pair.
_SYMMETRIC = {"w_i == w_j", "w_i == w_j + w_k", "2 w_i == w_j + w_k"}


def validate_frequencies(freqs: Sequence) -> FrequencyReport:
    """Check the dither frequencies against the non-resonance conditions.

    Every condition is tested over distinct player indices with exact rational
    arithmetic. Repeated indices reduce to the two-index conditions (for
    instance ``w_i = w_j + w_j`` is ``w_i = 2 w_j``), so nothing is lost.
    """
    ws = [as_frequency(f) for f in freqs]
    for i, w in enumerate(ws, start=1):
        if not w > 0:
            raise InvalidArgumentError(f"frequency of player {i} must be positive, got {w}")
    idx = range(len(ws))
    violations = []
    for name, arity, hit in _CONDITIONS:
        if arity == 2:
            tuples = combinations(idx, 2) if name in _SYMMETRIC else permutations(idx, 2)
        elif name in _SYMMETRIC:
            tuples = ((i, j, k) for i in idx for j, k in combinations(idx, 2) if i not in (j, k))
        else:
            tuples = permutations(idx, 3)
        for tup in tuples:
            vals = tuple(ws[m] for m in tup)
            if hit(*vals):
                violations.append(FrequencyViolation(name, tuple(m + 1 for m in tup), vals))
    return FrequencyReport(tuple(violations), True)
