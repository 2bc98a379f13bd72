import cmath
import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esnash import (
    InvalidArgumentError,
    NumericalDomainError,
    SeekerParams,
    SeekerState,
    action,
    classical_es_derivatives,
    seeker_derivatives,
    validate_frequencies,
)
from esnash.controller import as_frequency


def params(**kw):
    base = dict(k=1.0, b=2.0, omega_l=1.0, omega_h=0.5, omega=Fraction(2), phi=0.0)
    base.update(kw)
    return SeekerParams(**base)


def test_rest_state_has_zero_derivative():
    p = params(k=1.273, b=0.7, omega_l=0.9, omega_h=0.12)
    for t in (0.0, 0.3, 17.0):
        assert seeker_derivatives(SeekerState(0.4, 0.0, 1.5), 1.5, p, t) == (0.0, 0.0, 0.0)


def test_direct_substitution():
    # omega t + phi = pi/2 so the dither is exactly 1
    p = params(omega=Fraction(1), phi=math.pi / 2)
    assert seeker_derivatives(SeekerState(0.0, 1.0, 0.0), 3.0, p, 0.0) == (3.0, 5.0, 1.5)


finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(J=finite, n=finite, uh=finite, a=finite, k=finite.filter(lambda v: v != 0), b=finite, t=st.floats(0, 1e3))
def test_sign_flip_identity(J, n, uh, a, k, b, t):
    p = params(k=k, b=b)
    q = params(k=-k, b=-b)
    du, da, dn = seeker_derivatives(SeekerState(uh, a, n), J, p, t)
    du2, da2, dn2 = seeker_derivatives(SeekerState(uh, a, -n), -J, q, t)
    assert (du2, da2, dn2) == (du, da, -dn)


@given(n=finite, uh=finite, a=finite, c1=finite, c2=finite, t=st.floats(0, 100))
def test_affine_in_filtered_payoff(n, uh, a, c1, c2, t):
    p = params(k=0.9046, b=0.5, omega_l=1.5)
    s = SeekerState(uh, a, n)
    pts = [(c, seeker_derivatives(s, n + c, p, t)) for c in (c1, c2, 0.5 * (c1 + c2))]
    slope_u = p.k * math.sin(p.omega_float * t + p.phi)
    slope_a = p.b * p.omega_l
    for c, (du, da, _) in pts:
        e = (n + c) - n
        assert du == pytest.approx(slope_u * e, abs=1e-9 * (1 + abs(e)))
        assert da == pytest.approx(-p.omega_l * a + slope_a * e, abs=1e-9 * (1 + abs(e) + abs(a)))


def test_filter_fixed_points():
    p = params(b=0.7, omega_l=0.9, omega_h=0.12)
    assert seeker_derivatives(SeekerState(0.0, 0.1, 2.5), 2.5, p, 1.0)[2] == 0.0
    c = 0.3
    assert seeker_derivatives(SeekerState(0.0, p.b * c, 1.0), 1.0 + c, p, 1.0)[1] == pytest.approx(0.0, abs=1e-15)


def test_pure_functions_bit_identical():
    p = params(k=1.273, b=0.7, omega_l=0.9, omega_h=0.12)
    s = SeekerState(0.25, 0.2, 0.1)
    assert seeker_derivatives(s, 0.3, p, 12.345) == seeker_derivatives(s, 0.3, p, 12.345)
    assert action(s, p, 12.345) == action(s, p, 12.345)


def test_non_finite_input_rejected():
    with pytest.raises(NumericalDomainError):
        seeker_derivatives(SeekerState(0.0, 0.0, 0.0), float("nan"), params(), 0.0)
    with pytest.raises(NumericalDomainError):
        classical_es_derivatives(SeekerState(0.0, float("inf"), 0.0), 0.0, params(), 0.0)


def test_action_examples():
    p = params(omega=Fraction(1))
    assert action(SeekerState(0.25, 0.0, 0.0), p, 1.234) == 0.25
    assert action(SeekerState(0.25, 0.1, 0.0), p, math.pi / 2) == pytest.approx(0.35, abs=1e-15)
    assert action(SeekerState(0.25, 0.1, 0.0), p, math.pi) == pytest.approx(0.25, abs=1e-15)


@given(J=finite, n=finite, uh=finite, a=finite, t=st.floats(0, 100))
def test_classical_shares_estimator_and_washout(J, n, uh, a, t):
    p = params(k=1.273, b=0.7, omega_l=0.9, omega_h=0.12)
    s = SeekerState(uh, a, n)
    du, da, dn = seeker_derivatives(s, J, p, t)
    cu, ca, cn = classical_es_derivatives(s, J, p, t)
    assert ca == 0.0
    assert (cu, cn) == (du, dn)


def test_classical_rest():
    assert classical_es_derivatives(SeekerState(1.0, 0.2, 0.7), 0.7, params(), 3.0) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize(
    "kw",
    [dict(k=0.0), dict(omega_l=0.0), dict(omega_h=-1.0), dict(a0=0.0), dict(omega=Fraction(0)), dict(b=float("nan"))],
)
def test_params_validation(kw):
    with pytest.raises(InvalidArgumentError):
        params(**kw)


def test_float_frequencies_rejected():
    with pytest.raises(InvalidArgumentError):
        params(omega=2.0)
    with pytest.raises(InvalidArgumentError):
        as_frequency("2.5")
    assert as_frequency("4/1") == 4
    assert as_frequency(" 7/3 ") == Fraction(7, 3)


def test_frequency_examples():
    assert validate_frequencies(["2", "3"]).ok
    rep = validate_frequencies([2, 4])
    assert not rep.ok
    assert ("w_i == 2 w_j", (2, 1)) in {(v.condition, v.players) for v in rep.violations}
    rep = validate_frequencies([1, 2, 3])
    assert ("w_i == w_j + w_k", (3, 1, 2)) in {(v.condition, v.players) for v in rep.violations}


def test_two_player_paper_frequencies_exhaustively_clear():
    # every pairwise condition evaluated by hand for w = (2, 3)
    w1, w2 = Fraction(2), Fraction(3)
    assert w1 != w2 and w1 != 2 * w2 and w2 != 2 * w1 and w1 != 3 * w2 and w2 != 3 * w1
    assert validate_frequencies([w1, w2]).violations == ()


def test_non_positive_frequency_rejected():
    with pytest.raises(InvalidArgumentError):
        validate_frequencies([2, 0])


def _resonant(ws, phases):
    """Oracle: some averaged dither product deviates from its non-resonant value.

    Means of sine products are computed exactly by expanding each sine into
    complex exponentials and keeping the zero-frequency terms.
    """
    N = len(ws)

    def mean(factors):
        total = 0
        expanded = [m for m, p in factors for _ in range(p)]
        for signs in product((1, -1), repeat=len(expanded)):
            if sum(s * ws[m] for s, m in zip(signs, expanded)) == 0:
                term = 1
                for s, m in zip(signs, expanded):
                    term *= s * cmath.exp(1j * s * phases[m]) / 2j
                total += term
        return total.real

    checks = []
    for i in range(N):
        for j in range(N):
            if i != j:
                checks += [([(i, 1), (j, 1)], 0), ([(i, 2), (j, 1)], 0), ([(i, 3), (j, 1)], 0),
                           ([(i, 2), (j, 2)], 0.25)]
            for k in range(N):
                if len({i, j, k}) == 3:
                    checks += [([(i, 1), (j, 1), (k, 1)], 0), ([(i, 1), (j, 2), (k, 1)], 0)]
    return any(abs(mean(f) - e) > 1e-9 for f, e in checks)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(1, 9), min_size=2, max_size=4), st.integers(1, 4))
def test_verdict_matches_moment_oracle(nums, den):
    ws = [Fraction(n, den) for n in nums]
    phases = [0.37 + 1.1 * i for i in range(len(ws))]
    assert validate_frequencies(ws).ok == (not _resonant(ws, phases))


@given(st.lists(st.integers(1, 12), min_size=2, max_size=5), st.randoms())
def test_verdict_permutation_invariant(nums, rnd):
    ws = [Fraction(n) for n in nums]
    perm = list(range(len(ws)))
    rnd.shuffle(perm)
    a = validate_frequencies(ws)
    b = validate_frequencies([ws[p] for p in perm])
    assert a.ok == b.ok
    assert sorted(map(_key, a.violations)) == sorted(map(_key, b.violations))


def _key(v):
    # symmetric conditions list their (j, k) pair in index order
    if v.condition == "w_i == w_j":
        return v.condition, tuple(sorted(v.values))
    if v.condition in ("w_i == w_j + w_k", "2 w_i == w_j + w_k"):
        return v.condition, (v.values[0], *sorted(v.values[1:]))
    return v.condition, v.values
