import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from submersion_solitons.geometry import (
    AmbientModel,
    GeometryError,
    HypersurfacePatch,
    conformal_connection,
    curve_svg,
    embed_gamma_patch,
    embed_rotator_curve,
    embed_rotator_patch,
    fiber_check,
    grad_pi,
    killing_eval,
    killing_lie_residual,
    mean_curvature_fd,
    metric_eval,
    polyline_patch,
    residual_json_text,
    rotator_param_points,
    soliton_residual,
    surface_frame,
    write_obj,
)
from submersion_solitons.ode_core import Trajectory, richardson_order
from submersion_solitons.singular_launch import glue_wing

M3 = AmbientModel(3, "rotation")


def flat_trajectory(lo=0.05, hi=4.0, n=2):
    s = np.linspace(lo, hi, 400)
    return Trajectory(profile_label="custom", s=s, f=np.zeros_like(s), w=np.zeros_like(s), n=n)


def richardson_extrapolate(values, ratio=2.0, order=2.0):
    a, b = values[-2], values[-1]
    return b + (b - a) / (ratio**order - 1)


# --- ambient evaluation ---------------------------------------------------------


def test_metric_examples():
    e1 = np.array([1.0, 0.0, 0.0])
    assert metric_eval(M3, [2.0, 0.0, 0.0], e1, e1) == 0.25
    X, Y = np.array([1.0, 2.0, 3.0]), np.array([-1.0, 0.5, 4.0])
    assert metric_eval(M3, [1.0, 5.0, -2.0], X, Y) == float(X @ Y)
    assert metric_eval(M3, [0.3, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, -1.0, 0.0]) == 0.0


@pytest.mark.parametrize("x1", [0.0, -1.0])
def test_metric_rejects_non_positive_height(x1):
    with pytest.raises(GeometryError):
        metric_eval(M3, [x1, 0.0, 0.0], [1, 0, 0], [1, 0, 0])


def test_killing_examples():
    assert np.array_equal(killing_eval(M3, [1.0, 2.0, 0.0]), [0.0, 0.0, 2.0])
    trans = AmbientModel(4, "translation")
    assert np.array_equal(killing_eval(trans, [0.5, 3.0, -1.0, 7.0]), [0, 0, 0, 1])
    dil = AmbientModel(3, "dilation")
    assert np.array_equal(killing_eval(dil, [1.0, 1.0, 1.0]), [1.0, 1.0, 1.0])
    with pytest.raises(GeometryError):
        AmbientModel(3, "screw")


def test_conformal_connection_examples():
    e1, e2 = np.eye(3)[0], np.eye(3)[1]
    zero = np.zeros(3)
    x = np.array([1.0, 0.0, 0.0])
    assert np.allclose(conformal_connection(M3, x, e1, e1, zero), -e1)
    assert np.allclose(conformal_connection(M3, x, e1, e2, zero), -e2)
    c = 2.5
    X = np.array([0.0, 0.6, 0.8])
    out = conformal_connection(M3, [c, 0.0, 0.0], X, X, zero, Xgamma=0.0, Ygamma=0.0, XYinner=1.0)
    assert np.allclose(out, e1 / c)
    with pytest.raises(GeometryError):
        conformal_connection(M3, [0.0, 0.0, 0.0], e1, e1, zero)


def test_grad_pi():
    rng = np.random.default_rng(17)
    for _ in range(100):
        n = int(rng.integers(2, 6))
        x = rng.uniform(0.1, 3.0, n)
        s = x[-1] / x[0]
        g = grad_pi(x)
        model = AmbientModel(n)
        assert metric_eval(model, x, g, g) == pytest.approx(1 + s * s, abs=1e-10 * (1 + s * s))
        h = 1e-6
        fd = np.array([
            ((x + h * e)[-1] / (x + h * e)[0] - (x - h * e)[-1] / (x - h * e)[0]) / (2 * h)
            for e in np.eye(n)
        ])
        assert np.allclose(g, x[0] ** 2 * fd, rtol=1e-7, atol=1e-8)


@pytest.mark.parametrize("family", ["rotation", "translation", "dilation"])
def test_killing_equation_order_two(family):
    rng = np.random.default_rng({"rotation": 1, "translation": 2, "dilation": 3}[family])
    model = AmbientModel(4, family)
    for _ in range(5):
        x = np.concatenate([[rng.uniform(0.5, 2.0)], rng.uniform(-1.5, 1.5, 3)])
        X, Y = rng.normal(size=4), rng.normal(size=4)
        res = [killing_lie_residual(model, x, X, Y, h) for h in (1e-2, 5e-3, 2.5e-3)]
        assert abs(res[-1]) < abs(res[0]) / 10
        assert abs(richardson_order(res) - 2.0) < 0.3


# --- embedding --------------------------------------------------------------


def test_embed_rotator_curve_examples():
    traj = Trajectory(profile_label="custom", s=np.array([1.0, 2.0]), f=np.array([0.0, math.pi / 2]), w=np.zeros(2))
    pts = embed_rotator_curve(traj)
    assert np.allclose(pts, [[1.0, 0.0], [0.0, 2.0]], atol=1e-15)


def test_embed_bowl_curve_starts_at_origin(bowl2):
    pts = embed_rotator_curve(bowl2)
    assert np.array_equal(pts[0], [0.0, 0.0])
    d = pts[1] - pts[0]
    assert abs(math.atan2(d[1], d[0])) < 1e-6


def test_embed_wing_curve_keeps_traversal(wing_unit):
    glued = glue_wing(wing_unit)
    pts = embed_rotator_curve(wing_unit)
    assert pts.shape == (len(glued), 2)
    assert np.allclose(np.hypot(pts[:, 0], pts[:, 1]), glued.s)


def test_patch_examples():
    patch = embed_rotator_patch(flat_trajectory(), 2)
    assert np.allclose(patch([1.0, 1.0]), [1.0, 1.0, 0.0])
    assert np.allclose(patch([2.0, 1.7]), 2 * patch([1.0, 1.7]))
    patch3 = embed_rotator_patch(flat_trajectory(n=3), 3)
    p = np.array([0.7, 0.3, 2.0])
    assert np.allclose(patch3([1.4, 0.3, 2.0]), 2 * patch3(p))
    assert patch3(p)[0] == 0.7


def test_patch_v_range_checked():
    with pytest.raises(GeometryError):
        embed_rotator_patch(flat_trajectory(0.5, 2.0), 2, {"v": (0.1, 1.0)})


def test_patch_interpolates_trajectory(bowl2):
    patch = embed_rotator_patch(bowl2, 2)
    for k in (10, 50, 100):
        v, f = bowl2.s[k], bowl2.f[k]
        assert np.allclose(patch([1.0, v]), [1.0, v * math.cos(f), v * math.sin(f)], atol=1e-14)


def test_interior_and_degenerate_errors():
    patch = embed_rotator_patch(flat_trajectory(), 2)
    with pytest.raises(GeometryError):
        surface_frame(patch, [0.5, 1.0], 1e-3)
    squashed = HypersurfacePatch(
        map=lambda p: np.array([1.0, p[0] + p[1], 0.0]),
        param_lo=np.array([-1.0, -1.0]),
        param_hi=np.array([1.0, 1.0]),
        orientation=lambda x: np.array([0.0, 0.0, 1.0]),
    )
    with pytest.raises(GeometryError):
        surface_frame(squashed, [0.0, 0.0])


# --- mean curvature -------------------------------------------------------------


def test_totally_geodesic_plane():
    patch = embed_rotator_patch(flat_trajectory(), 2)
    for p in ([1.0, 1.0], [0.8, 2.5], [1.5, 0.4]):
        assert abs(mean_curvature_fd(patch, p, 1e-3)) < 1e-9


def test_non_solution_control():
    patch = embed_rotator_patch(flat_trajectory(), 2)
    report = soliton_residual(patch, M3, [np.array([1.0, 1.0])], steps=[1e-3])
    # H = 0 and g(K, nu) = v / u = 1 at (u, v) = (1, 1)
    assert report.residuals[0, 0] == pytest.approx(-1.0, abs=1e-9)
    assert report.max_abs > 0.1


@pytest.mark.parametrize("n, s, expected", [(2, 1.0, 1 / math.sqrt(2)), (3, 0.1, 0.19900743804199783)])
def test_fiber_examples(n, s, expected):
    assert (n - 1) * s / math.sqrt(1 + s * s) == pytest.approx(expected, rel=1e-15)
    values = [fiber_check(n, s, h)[0] for h in (1e-2, 5e-3, 2.5e-3)]
    assert abs(richardson_extrapolate(values) - expected) <= 1e-6 * expected
    assert fiber_check(n, s)[1] == pytest.approx(1 + s * s, abs=1e-10)


def test_fiber_independent_of_base_point():
    a = fiber_check(3, 0.7, 5e-3, x1=1.0)[0]
    b = fiber_check(3, 0.7, 5e-3, x1=3.0)[0]
    assert a == pytest.approx(b, rel=1e-9)


def test_fiber_rejects_non_positive_s():
    with pytest.raises(GeometryError):
        fiber_check(2, 0.0)


def test_bowl_soliton_residual(bowl2):
    patch = embed_rotator_patch(bowl2, 2)
    points = rotator_param_points([0.2, 0.5, 1.0, 2.0], 2)
    report = soliton_residual(patch, M3, points)
    assert np.max(np.abs(report.residuals[:, -1])) <= 1e-4
    assert abs(report.order - 2.0) <= 0.3


def test_bowl_soliton_residual_n3():
    from submersion_solitons.singular_launch import bowl_launch

    traj = bowl_launch(3, 0.0, 3.0)
    patch = embed_rotator_patch(traj, 3)
    points = rotator_param_points([0.5, 1.0], 3, u=1.2, t=0.3)
    report = soliton_residual(patch, AmbientModel(4), points)
    assert report.max_abs <= 1e-4


def test_normal_and_frame(bowl2):
    patch = embed_rotator_patch(bowl2, 2)
    for p in rotator_param_points([0.2, 0.5, 1.0, 2.0], 2, u=0.9):
        fr = surface_frame(patch, p, 1e-3)
        x, nu = fr["x"], fr["nu"]
        assert abs(metric_eval(M3, x, nu, nu) - 1.0) <= 1e-10
        for e in fr["frame"]:
            assert abs(metric_eval(M3, x, nu, e)) <= 1e-8
        assert metric_eval(M3, x, nu, killing_eval(M3, x)) > 0
        other = surface_frame(patch, p, 1e-3, ordering=[1, 0])
        assert abs(other["H"] - fr["H"]) <= 1e-8


def test_wing_branch_residuals(wing_low):
    for branch in (wing_low.branch_plus, wing_low.branch_minus):
        patch = embed_rotator_patch(branch, 2)
        report = soliton_residual(patch, M3, rotator_param_points([0.2, 0.5, 1.0, 2.0], 2))
        assert np.max(np.abs(report.residuals[:, -1])) <= 1e-4
        assert abs(report.order - 2.0) <= 0.3


def test_wing_vertex_residual(wing_unit):
    patch = embed_gamma_patch(wing_unit, 2)
    r0 = wing_unit.r0
    points = [np.array([1.0, r]) for r in (r0 - 0.05, r0, r0 + 0.05)]
    report = soliton_residual(patch, M3, points)
    assert report.max_abs <= 1e-4


@settings(max_examples=30, deadline=None)
@given(u=st.floats(0.6, 1.9), v=st.floats(0.2, 4.5))
def test_bowl_residual_property(bowl2, u, v):
    patch = embed_rotator_patch(bowl2, 2)
    report = soliton_residual(patch, M3, [np.array([u, v])], steps=[1e-3])
    assert report.max_abs <= 1e-4


# --- exports ----------------------------------------------------------------


def test_obj_export(tmp_path, bowl2):
    patch = embed_rotator_patch(bowl2, 2)
    text = write_obj(patch, shape=(5, 7), path=tmp_path / "a.obj")
    lines = text.splitlines()
    assert sum(l.startswith("v ") for l in lines) == 35
    assert sum(l.startswith("f ") for l in lines) == 24
    assert sum(l.startswith("o ") for l in lines) == 1
    assert (tmp_path / "a.obj").read_text() == text
    verts = np.array([[float(c) for c in l.split()[1:]] for l in lines if l.startswith("v ")])
    assert np.all(verts[:, 0] > 0)
    two = write_obj([("a", patch), ("b", polyline_patch(bowl2.s, bowl2.f))], shape=(3, 4))
    faces = [l for l in two.splitlines() if l.startswith("f ")]
    assert sum(l.startswith("o ") for l in two.splitlines()) == 2
    assert max(int(i) for l in faces for i in l.split()[1:]) == 24


def test_curve_svg_deterministic(tmp_path, bowl2):
    pts = embed_rotator_curve(bowl2)
    a = curve_svg(pts, tmp_path / "a.svg", mirror=True)
    b = curve_svg(pts, tmp_path / "b.svg", mirror=True)
    assert a == b
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    assert 'width="800" height="800"' in a
    assert a.count("<polyline") == 2


def test_residual_json_keys(bowl2):
    patch = embed_rotator_patch(bowl2, 2)
    report = soliton_residual(patch, M3, rotator_param_points([0.5, 1.0], 2))
    data = json.loads(residual_json_text(report))
    assert {"points", "steps", "residuals", "max", "rms", "order"} <= set(data)
    assert data["steps"] == [4e-3, 2e-3, 1e-3]
    assert len(data["residuals"]) == 2
