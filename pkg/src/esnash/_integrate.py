import numpy as np

from esnash.errors import NumericalDomainError


def rk4_step(deriv, y, t, h):
    """Advance ``y' = deriv(t, y)`` by one classical Runge-Kutta step of size ``h``.

    Raises NumericalDomainError naming the first stage that produced a
    non-finite derivative.
    """
    if not h > 0:
        raise ValueError(f"step must be positive, got {h!r}")
    k1 = deriv(t, y)
    _check_stage(k1, 1, t)
    k2 = deriv(t + 0.5 * h, y + (0.5 * h) * k1)
    _check_stage(k2, 2, t)
    k3 = deriv(t + 0.5 * h, y + (0.5 * h) * k2)
    _check_stage(k3, 3, t)
    k4 = deriv(t + h, y + h * k3)
    _check_stage(k4, 4, t)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_stage(k, stage, t):
    if not np.all(np.isfinite(k)):
        raise NumericalDomainError(f"non-finite derivative in RK4 stage {stage} at t={t!r}")
