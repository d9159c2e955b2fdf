import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from submersion_solitons.ode_core import IntegratorOptions, integrate, ode_residual, rotator_pq
from submersion_solitons.phase_plane import (
    Equilibrium,
    IntegralCurve,
    PhaseField,
    PhasePlaneError,
    admissible_saddle,
    curve_to_solution,
    find_equilibria,
    manifold_launch,
    phase_portrait_svg,
    rotator_field,
    solution_interpolant,
)
from submersion_solitons.profiles import rotator_profile
from submersion_solitons.singular_launch import bowl_launch


def linear_field(ps, qx, shift=0.0):
    return PhaseField(
        p=lambda s: ps * (s - shift),
        dp=lambda s: ps,
        q=lambda s, x: qx * x,
        dq_ds=lambda s, x: 0.0,
        dq_dx=lambda s, x: qx,
    )


def bowl_from_manifold(n=2, offset=1e-6, s_end=5.0):
    field_ = rotator_field(n)
    (eq,) = find_equilibria(field_, (-0.5, 0.5, -1.0, 1.0))
    curve = manifold_launch(field_, eq, "unstable", +1, offset=offset, arc_length_max=0.5)
    sol = curve_to_solution(curve, field_, n=n)
    s, f, w = sol.s[-1], sol.f[-1], sol.w[-1]
    cont = integrate(rotator_profile(n), s, f, w, s_end)
    return curve, sol, cont


@pytest.mark.parametrize("n", [2, 3, 6])
def test_rotator_origin_equilibrium(n):
    eqs = find_equilibria(rotator_field(n), (-0.5, 0.5, -1.0, 1.0))
    assert len(eqs) == 1
    eq = eqs[0]
    assert abs(eq.location[0]) <= 1e-12 and abs(eq.location[1]) <= 1e-12
    assert eq.eigenvalues == (1.0, -2.0)
    assert np.array_equal(eq.jacobian, [[1.0, 0.0], [1.0, -2.0]])
    assert eq.admissible_saddle and admissible_saddle(eq)
    p, q = rotator_pq(n, *eq.location)
    assert abs(p) <= 1e-10 and abs(q) <= 1e-10


def test_no_equilibria_for_positive_s():
    assert find_equilibria(rotator_field(2), (0.5, 5.0, -1.0, 1.0)) == []


def test_translated_test_field():
    (eq,) = find_equilibria(linear_field(1.0, 1.0, shift=1.0), (0.0, 3.0, -1.0, 1.0))
    assert eq.location == pytest.approx((1.0, 0.0), abs=1e-12)
    assert not admissible_saddle(eq)


@pytest.mark.parametrize("ps, qx, expected", [(1.0, 1.0, False), (-1.0, 1.0, True)])
def test_admissibility_cases(ps, qx, expected):
    (eq,) = find_equilibria(linear_field(ps, qx), (-1.0, 1.5, -1.0, 1.5))
    assert admissible_saddle(eq) is expected
    assert eq.admissible_saddle is expected


def test_non_saddle_launch_rejected():
    (eq,) = find_equilibria(linear_field(1.0, 1.0), (-1.0, 1.5, -1.0, 1.5))
    with pytest.raises(PhasePlaneError):
        manifold_launch(linear_field(1.0, 1.0), eq)


def test_eigenvectors():
    (eq,) = find_equilibria(rotator_field(2), (-0.5, 0.5, -1.0, 1.0))
    unstable = eq.eigenvectors[:, 0]
    stable = eq.eigenvectors[:, 1]
    assert unstable[1] / unstable[0] == pytest.approx(1 / 3, rel=1e-15)
    assert np.array_equal(stable, [0.0, 1.0])
    j = eq.jacobian
    assert np.allclose(j @ unstable, 1.0 * unstable, atol=1e-15)
    assert np.allclose(j @ stable, -2.0 * stable, atol=1e-15)


def test_unstable_launch_moves_right():
    field_ = rotator_field(2)
    (eq,) = find_equilibria(field_, (-0.5, 0.5, -1.0, 1.0))
    curve = manifold_launch(field_, eq, "unstable", +1, arc_length_max=1.0)
    assert np.all(np.diff(curve.s) > 0)
    assert curve.s[0] > 0 and curve.x[0] > 0
    arc = np.sum(np.hypot(np.diff(curve.s), np.diff(curve.x)))
    assert arc == pytest.approx(1.0, rel=1e-6)


def test_stable_launch_runs_along_the_axis():
    field_ = rotator_field(2)
    (eq,) = find_equilibria(field_, (-0.5, 0.5, -1.0, 1.0))
    curve = manifold_launch(field_, eq, "stable", +1, arc_length_max=0.5)
    assert np.all(curve.s == 0.0)
    assert np.all(np.diff(curve.x) > 0)
    with pytest.raises(PhasePlaneError):
        curve_to_solution(curve)


def test_synthetic_curve_to_solution():
    r = np.linspace(-1.0, 1.0, 401)
    curve = IntegralCurve(r=r, s=np.exp(r), x=np.exp(2 * r))
    sol = curve_to_solution(curve, f_anchor=0.0)
    assert np.allclose(sol.w, sol.s**2, rtol=1e-15)
    # f = (s^3 - s_first^3)/3
    expected = (sol.s**3 - sol.s[0] ** 3) / 3
    assert np.max(np.abs(sol.f - expected)) < 1e-6
    field_ = PhaseField(
        p=lambda s: s, dp=lambda s: 1.0, q=lambda s, x: 2 * x,
        dq_ds=lambda s, x: 0.0, dq_dx=lambda s, x: 2.0,
    )
    sol2 = curve_to_solution(curve, field_)
    assert np.max(np.abs(sol2.f - expected)) < 1e-9
    interp = solution_interpolant(curve)
    assert float(interp(1.5)) == pytest.approx(2.25, rel=1e-5)


def test_fold_is_reported_at_its_index():
    s = np.array([0.0, 1.0, 2.0, 3.0, 2.5, 2.0])
    curve = IntegralCurve(r=np.arange(6.0), s=s, x=np.zeros(6))
    with pytest.raises(PhasePlaneError, match="index 4"):
        curve_to_solution(curve)


def test_anchor_shifts_f():
    r = np.linspace(0.0, 1.0, 50)
    curve = IntegralCurve(r=r, s=np.exp(r), x=np.ones(50))
    sol = curve_to_solution(curve, f_anchor=2.0, s_anchor=float(np.exp(r[10])))
    assert sol.f[10] == 2.0
    with pytest.raises(PhasePlaneError):
        curve_to_solution(curve, s_anchor=123.0)


def test_manifold_solution_slope_near_zero():
    _, sol, _ = bowl_from_manifold()
    interp = solution_interpolant(IntegralCurve(r=sol.s, s=sol.s, x=sol.w))
    ratios = [float(interp(s)) / s for s in (1e-2, 1e-3, 1e-4)]
    limit = ratios[-1] + (ratios[-1] - ratios[-2]) / 99.0
    assert abs(limit - 1 / 3) < 1e-4


def test_offset_halving():
    _, _, a = bowl_from_manifold(offset=1e-6)
    _, _, b = bowl_from_manifold(offset=5e-7)
    assert abs(a.interpolate(1.0)[1] - b.interpolate(1.0)[1]) <= 1e-7


def test_manifold_solution_residual():
    field_ = rotator_field(2)
    (eq,) = find_equilibria(field_, (-0.5, 0.5, -1.0, 1.0))
    curve = manifold_launch(field_, eq, "unstable", +1, arc_length_max=6.0)
    assert curve.s[-1] > 5.0
    sol = curve_to_solution(curve, field_, n=2)
    assert sol.launch == "manifold"
    assert ode_residual(rotator_profile(2), sol, 0.1, 5.0).max_abs < 1e-6


def test_manifold_agrees_with_series(bowl2):
    _, _, cont = bowl_from_manifold()
    assert abs(cont.interpolate(1.0)[1] - bowl2.interpolate(1.0)[1]) < 1e-6


def test_solution_is_integral_curve():
    # dense samples keep the cubic Hermite interpolant well below the tolerance
    bowl = bowl_launch(2, 0.0, 2.0, IntegratorOptions(max_step=5e-3))
    # s' = s^3 + s has s(r)^2 = a e^{2r} / (1 - a e^{2r}) with a = s0^2/(1+s0^2)
    field_ = rotator_field(2)
    s0 = 0.5
    a = s0 * s0 / (1 + s0 * s0)

    def s_of(r):
        e = a * math.exp(2 * r)
        return math.sqrt(e / (1 - e))

    def x_of(r):
        return float(bowl.interpolate(s_of(r))[1])

    h = 1e-4
    # finite-time blow-up at a e^{2r} = 1, so stay at s <= 1.5
    for r in np.linspace(0.0, 0.6, 21):
        s = s_of(r)
        ds = (s_of(r + h) - s_of(r - h)) / (2 * h)
        dx = (x_of(r + h) - x_of(r - h)) / (2 * h)
        target = field_(s, x_of(r))
        assert np.linalg.norm([ds, dx] - target) <= 1e-6 * np.linalg.norm(target)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(2, 6), s=st.floats(-3, 3), x=st.floats(-3, 3))
def test_rotator_field_partials(n, s, x):
    field_ = rotator_field(n)
    h = 1e-6
    dp = (field_.p(s + h) - field_.p(s - h)) / (2 * h)
    dqs = (field_.q(s + h, x) - field_.q(s - h, x)) / (2 * h)
    dqx = (field_.q(s, x + h) - field_.q(s, x - h)) / (2 * h)
    scale = 1.0 + abs(field_.q(s, x))
    assert abs(dp - field_.dp(s)) <= 1e-6 * (1 + abs(field_.dp(s)))
    assert abs(dqs - field_.dq_ds(s, x)) <= 1e-6 * max(scale, abs(field_.dq_ds(s, x)))
    assert abs(dqx - field_.dq_dx(s, x)) <= 1e-6 * max(scale, abs(field_.dq_dx(s, x)))


def test_equilibrium_jacobian_convention():
    eq = Equilibrium((0.0, 0.0), np.array([[1.0, 0.0], [1.0, -2.0]]))
    assert eq.eigenvalues == (1.0, -2.0)
    assert np.allclose(np.sort(np.linalg.eigvals(eq.jacobian)), [-2.0, 1.0])


def test_phase_svg(tmp_path):
    field_ = rotator_field(2)
    box = (-0.5, 5.0, -2.0, 2.0)
    eqs = find_equilibria(field_, box)
    curve = manifold_launch(field_, eqs[0], "unstable", +1, arc_length_max=4.0)
    one = phase_portrait_svg(field_, box, eqs, [curve], path=tmp_path / "a.svg")
    two = phase_portrait_svg(field_, box, eqs, [curve], path=tmp_path / "b.svg")
    assert one == two
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    assert 'width="800" height="600"' in one
    assert "nullcline-p" in one and "nullcline-q" in one
    assert one.count('class="equilibrium"') == 1
    assert 'class="manifold"' in one
