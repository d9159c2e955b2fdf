"""Half-space hyperbolic geometry and extrinsic verification of solitons.

Hyperbolic space is ``{x_1 > 0}`` with ``g = <.,.> / x_1^2``; its Levi-Civita
connection is the Euclidean one corrected by the conformal factor
``gamma_conf = -log x_1``.  A hypersurface patch is checked against the
soliton equation ``H = g(K, nu)`` with ``H`` computed from finite differences
of the embedding only, so the check never touches the ODE machinery.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import BPoly

from .ode_core import ResidualReport, Trajectory, format_number, richardson_order

__all__ = [
    "KILLING_FAMILIES",
    "AmbientModel",
    "HypersurfacePatch",
    "GeometryError",
    "metric_eval",
    "killing_eval",
    "gamma_conf",
    "conformal_connection",
    "embed_rotator_curve",
    "embed_rotator_patch",
    "embed_gamma_patch",
    "rotator_param_points",
    "surface_frame",
    "mean_curvature_fd",
    "soliton_residual",
    "grad_pi",
    "fiber_patch",
    "fiber_check",
    "killing_lie_residual",
    "polyline_patch",
    "write_obj",
    "residual_json_text",
    "curve_svg",
    "write_residual_json",
]

KILLING_FAMILIES = ("rotation", "translation", "dilation")


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class AmbientModel:
    """Half-space model of dimension ``dim`` with a chosen Killing field."""

    dim: int
    killing: str = "rotation"

    def __post_init__(self):
        if self.dim < 2:
            raise GeometryError("ambient dimension must be >= 2")
        if self.killing not in KILLING_FAMILIES:
            raise GeometryError(f"unknown Killing family {self.killing!r}")

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise GeometryError(f"expected a point of dimension {self.dim}")
        if not x[0] > 0:
            raise GeometryError(f"x_1 = {x[0]!r} is not positive")
        return x


def metric_eval(model: AmbientModel, x, X, Y) -> float:
    x = model.check(x)
    return float(np.dot(X, Y)) / (x[0] * x[0])


def killing_eval(model: AmbientModel, x) -> np.ndarray:
    """Killing field at ``x``: rotation of the last two coordinates,
    translation along the last one, or the dilation ``sum x_i d_i``."""
    x = model.check(x)
    k = np.zeros_like(x)
    if model.killing == "rotation":
        k[-2] = -x[-1]
        k[-1] = x[-2]
    elif model.killing == "translation":
        k[-1] = 1.0
    else:
        k[:] = x
    return k


def gamma_conf(x) -> float:
    return -math.log(x[0])


def conformal_connection(
    model: AmbientModel, x, X, Y, DXY, Xgamma=None, Ygamma=None, XYinner=None
) -> np.ndarray:
    """Hyperbolic covariant derivative ``nabla_X Y``.

    ``DXY`` is the Euclidean derivative of ``Y`` along ``X``.  The derivatives
    ``X(gamma_conf)``, ``Y(gamma_conf)`` default to the exact ``-X_1/x_1`` and
    ``XYinner`` to the Euclidean ``<X, Y>``; callers may pass their own (e.g.
    finite-difference) values.
    """
    x = model.check(x)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Xgamma is None:
        Xgamma = -X[0] / x[0]
    if Ygamma is None:
        Ygamma = -Y[0] / x[0]
    out = np.asarray(DXY, dtype=float) + Xgamma * Y + Ygamma * X
    out = out.copy()
    if XYinner is None:
        XYinner = float(np.dot(X, Y))
    out[0] += XYinner / x[0]
    return out


# --- patches -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HypersurfacePatch:
    """Parametrised hypersurface in the half-space.

    ``orientation(x)`` returns a vector that the unit normal must pair
    positively with.
    """

    map: Callable[[np.ndarray], np.ndarray]
    param_lo: np.ndarray
    param_hi: np.ndarray
    orientation: Callable[[np.ndarray], np.ndarray]
    source: Optional[object] = None
    label: str = "patch"

    @property
    def param_dim(self) -> int:
        return len(self.param_lo)

    @property
    def ambient_dim(self) -> int:
        return self.param_dim + 1

    def __call__(self, params) -> np.ndarray:
        return self.map(np.asarray(params, dtype=float))


def _estimate_derivative(x: np.ndarray, y: np.ndarray, half: int = 2) -> np.ndarray:
    # derivative of the local interpolating polynomial through 2*half+1 samples
    out = np.empty_like(y)
    m = len(x)
    for k in range(m):
        a = min(max(k - half, 0), max(m - 2 * half - 1, 0))
        b = min(a + 2 * half + 1, m)
        xs = x[a:b]
        scale = max(abs(xs[-1] - xs[0]), 1e-300)
        t = (xs - x[k]) / scale
        coef = np.polyfit(t, y[a:b], len(xs) - 1)
        out[k] = np.polyval(np.polyder(coef), 0.0) / scale
    return out


def _profile_interpolant(s: np.ndarray, f: np.ndarray, w: np.ndarray) -> BPoly:
    """C^2 quintic Hermite interpolant of ``f`` from samples of ``f`` and ``f'``.

    ``f''`` at the knots is estimated from the ``w`` samples alone.
    """
    order = np.argsort(s)
    s, f, w = s[order], f[order], w[order]
    dw = _estimate_derivative(s, w)
    return BPoly.from_derivatives(s, np.column_stack([f, w, dw]), extrapolate=False)


def _source_arrays(traj):
    if isinstance(traj, Trajectory):
        return traj.s, traj.f, traj.w
    raise GeometryError("expected a Trajectory")


def _rotator_map(n, curve_fn):
    def fmap(params):
        u = params[0]
        t = params[1:-1]
        v = params[-1]
        angle, radius = curve_fn(v)
        return u * np.concatenate([[1.0], t, [radius * math.cos(angle), radius * math.sin(angle)]])

    return fmap


def _rotation_orientation(x):
    k = np.zeros_like(x)
    k[-2], k[-1] = -x[-1], x[-2]
    return k


def embed_rotator_patch(traj: Trajectory, n: int, grid: dict | None = None) -> HypersurfacePatch:
    """Patch ``(u, t_2..t_{n-1}, v) -> u (1, t, v cos f(v), v sin f(v))``.

    ``grid`` may set ``u`` and ``t`` ranges (pairs) and ``v``; the ``v`` range
    must lie inside the trajectory.  ``f`` between samples is the quintic
    Hermite interpolant of the samples.  The unit normal pairs positively with
    the rotation field, i.e. it is ``(-grad u + phi^{-1} d_theta)/W``.
    """
    if n < 2:
        raise GeometryError("n must be >= 2")
    s, f, w = _source_arrays(traj)
    grid = dict(grid or {})
    s_lo, s_hi = float(np.min(s)), float(np.max(s))
    v_lo, v_hi = grid.get("v", (s_lo, s_hi))
    if v_lo < s_lo or v_hi > s_hi:
        raise GeometryError(f"v range {(v_lo, v_hi)} outside trajectory range {(s_lo, s_hi)}")
    u_lo, u_hi = grid.get("u", (0.5, 2.0))
    t_lo, t_hi = grid.get("t", (-1.0, 1.0))
    interp = _profile_interpolant(np.asarray(s), np.asarray(f), np.asarray(w))

    def curve_fn(v):
        val = interp(v)
        if not math.isfinite(val):
            raise GeometryError(f"v={v!r} outside the trajectory")
        return float(val), v

    lo = np.array([u_lo] + [t_lo] * (n - 2) + [v_lo], dtype=float)
    hi = np.array([u_hi] + [t_hi] * (n - 2) + [v_hi], dtype=float)
    return HypersurfacePatch(
        map=_rotator_map(n, curve_fn),
        param_lo=lo,
        param_hi=hi,
        orientation=_rotation_orientation,
        source=traj,
        label=f"rotator(n={n})",
    )


def embed_gamma_patch(curve, n: int, grid: dict | None = None) -> HypersurfacePatch:
    """Wing patch near its vertex in the inverse chart ``s = gamma(r)``.

    ``(u, t, r) -> u (1, t, gamma(r) cos r, gamma(r) sin r)``; this chart is
    regular where the graph chart has ``f' = +-inf``.
    """
    arc = np.asarray(curve.gamma_arc)
    r, g, gp = arc[:, 0], arc[:, 1], arc[:, 2]
    interp = BPoly.from_derivatives(
        r, np.column_stack([g, gp, _estimate_derivative(r, gp)]), extrapolate=False
    )
    grid = dict(grid or {})
    r_lo, r_hi = grid.get("r", (float(r[0]), float(r[-1])))
    u_lo, u_hi = grid.get("u", (0.5, 2.0))
    t_lo, t_hi = grid.get("t", (-1.0, 1.0))

    def curve_fn(rr):
        radius = interp(rr)
        if not math.isfinite(radius):
            raise GeometryError(f"r={rr!r} outside the gamma arc")
        return rr, float(radius)

    def fmap(params):
        u = params[0]
        t = params[1:-1]
        angle, radius = curve_fn(params[-1])
        return u * np.concatenate([[1.0], t, [radius * math.cos(angle), radius * math.sin(angle)]])

    lo = np.array([u_lo] + [t_lo] * (n - 2) + [r_lo], dtype=float)
    hi = np.array([u_hi] + [t_hi] * (n - 2) + [r_hi], dtype=float)
    return HypersurfacePatch(fmap, lo, hi, _rotation_orientation, source=curve, label=f"wing-vertex(n={n})")


def rotator_param_points(s_values: Sequence[float], n: int, u: float = 1.0, t: float = 0.0) -> list[np.ndarray]:
    return [np.array([u] + [t] * (n - 2) + [float(v)]) for v in s_values]


def embed_rotator_curve(source) -> np.ndarray:
    """Planar curve ``(v cos f(v), v sin f(v))``: the slice ``x_1 = 1``.

    Accepts a Trajectory, a glued wing (``s``, ``f`` arrays in traversal
    order) or anything else with ``s`` and ``f`` attributes.
    """
    if hasattr(source, "branch_plus"):
        from .singular_launch import glue_wing

        source = glue_wing(source)
    v = np.asarray(source.s, dtype=float)
    f = np.asarray(source.f, dtype=float)
    return np.column_stack([v * np.cos(f), v * np.sin(f)])


# --- mean curvature ------------------------------------------------------------


def _steps(params, step):
    return step * np.maximum(1.0, np.abs(params))


def surface_frame(patch: HypersurfacePatch, params, step: float = 1e-3, ordering=None) -> dict:
    """Finite-difference frame, unit normal and mean curvature at ``params``.

    Returns a dict with ``x``, ``tangents`` (coordinate), ``frame``
    (g-orthonormal, Gram-Schmidt in ``ordering``), ``nu``, ``H``, ``g_K_nu``.
    """
    p = np.asarray(params, dtype=float)
    m = p.size
    if np.any(p - 2 * _steps(p, step) < patch.param_lo - 1e-15) or np.any(
        p + 2 * _steps(p, step) > patch.param_hi + 1e-15
    ):
        raise GeometryError(f"parameter point {p} is not interior by two steps")
    hs = _steps(p, step)
    basis = np.eye(m)
    x = patch(p)
    if not x[0] > 0:
        raise GeometryError("patch point leaves the half-space")
    model = AmbientModel(x.size, "rotation")

    fp = [patch(p + hs[a] * basis[a]) for a in range(m)]
    fm = [patch(p - hs[a] * basis[a]) for a in range(m)]
    tang = np.array([(fp[a] - fm[a]) / (2 * hs[a]) for a in range(m)])
    second = np.empty((m, m, x.size))
    for a in range(m):
        second[a, a] = (fp[a] - 2 * x + fm[a]) / hs[a] ** 2
        for b in range(a + 1, m):
            ea, eb = hs[a] * basis[a], hs[b] * basis[b]
            mixed = (
                patch(p + ea + eb) - patch(p + ea - eb) - patch(p - ea + eb) + patch(p - ea - eb)
            ) / (4 * hs[a] * hs[b])
            second[a, b] = second[b, a] = mixed

    order = list(range(m)) if ordering is None else list(ordering)
    if sorted(order) != list(range(m)):
        raise ValueError("ordering must be a permutation of the parameter indices")
    coeffs = np.zeros((m, m))  # frame_i = sum_a coeffs[i, a] * tang[a]
    for i, a in enumerate(order):
        c = np.zeros(m)
        c[a] = 1.0
        for j in range(i):
            v = coeffs[j] @ tang
            c = c - metric_eval(model, x, c @ tang, v) * coeffs[j]
        norm2 = metric_eval(model, x, c @ tang, c @ tang)
        if not norm2 > 1e-24 * (1.0 + x[0] ** -2):
            raise GeometryError("degenerate tangent frame (immersion fails)")
        coeffs[i] = c / math.sqrt(norm2)
    frame = coeffs @ tang

    _, _, vt = np.linalg.svd(tang)
    normal = vt[-1]
    nu = x[0] * normal / np.linalg.norm(normal)
    ref = patch.orientation(x)
    if np.dot(nu, ref) < 0:
        nu = -nu

    H = 0.0
    for i in range(m):
        c = coeffs[i]
        e = frame[i]
        dee = np.einsum("a,b,abk->k", c, c, second)
        cov = conformal_connection(model, x, e, e, dee)
        H += metric_eval(model, x, cov, nu)
    return {"x": x, "tangents": tang, "frame": frame, "nu": nu, "H": H}


def mean_curvature_fd(patch: HypersurfacePatch, params, step: float = 1e-3, ordering=None) -> float:
    """``H = sum_i g(nabla_{e_i} e_i, nu)`` by central differences (order 2)."""
    return surface_frame(patch, params, step, ordering)["H"]


def soliton_residual(
    patch: HypersurfacePatch,
    model: AmbientModel,
    points,
    steps: Sequence[float] = (4e-3, 2e-3, 1e-3),
    threshold: float = 1e-4,
) -> ResidualReport:
    """``H_FD - g(K, nu)`` per point and step; order from the last three rungs."""
    steps = [float(h) for h in steps]
    table = np.empty((len(points), len(steps)))
    for i, p in enumerate(points):
        for j, h in enumerate(steps):
            fr = surface_frame(patch, p, h)
            k = killing_eval(model, fr["x"])
            table[i, j] = fr["H"] - metric_eval(model, fr["x"], k, fr["nu"])
    orders = None
    order = None
    if len(steps) >= 3:
        ratio = steps[-2] / steps[-1]
        orders = [richardson_order(row, ratio) for row in table]
        finite = [o for o in orders if math.isfinite(o)]
        order = float(np.median(finite)) if finite else math.nan
    return ResidualReport(
        points=[np.asarray(p).tolist() for p in points],
        residuals=table,
        threshold=threshold,
        steps=steps,
        order=order,
        orders=orders,
    )


# --- fibre of the rotation submersion --------------------------------------------


def grad_pi(x) -> np.ndarray:
    """Hyperbolic gradient of ``pi = x_n / x_1`` on the n-dimensional half-space."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    g[0] = -x[-1]
    g[-1] = x[0]
    return g


def fiber_patch(n: int, s: float, x1: float = 1.0) -> HypersurfacePatch:
    """The fibre ``x_n = s x_1`` in ``H^n`` as ``(a, t) -> (x1 e^a, t, s x1 e^a)``.

    Oriented by ``-grad pi``.
    """

    def fmap(params):
        r = x1 * math.exp(params[0])
        return np.concatenate([[r], params[1:], [s * r]])

    lo = np.array([-1.0] + [-1.0] * (n - 2))
    hi = np.array([1.0] + [1.0] * (n - 2))
    return HypersurfacePatch(fmap, lo, hi, lambda x: -grad_pi(x), label=f"fibre(n={n}, s={s})")


def fiber_check(n: int, s: float, step: float = 1e-2, x1: float = 1.0) -> tuple[float, float]:
    """Numerical fibre mean curvature and ``||grad pi||^2`` at ``x_n/x_1 = s``."""
    if not s > 0:
        raise GeometryError("fiber_check needs s > 0")
    if n < 2:
        raise GeometryError("n must be >= 2")
    patch = fiber_patch(n, s, x1)
    h_num = mean_curvature_fd(patch, np.zeros(n - 1), step)
    x = patch(np.zeros(n - 1))
    model = AmbientModel(n, "rotation" if n >= 2 else "translation")
    gp = grad_pi(x)
    return h_num, metric_eval(model, x, gp, gp)


# --- Killing property ----------------------------------------------------------


def killing_lie_residual(model: AmbientModel, x, X, Y, step: float) -> float:
    """``g(nabla_X K, Y) + g(X, nabla_Y K)`` with every derivative by central
    differences (of ``K`` and of ``gamma_conf``); tends to 0 at order 2."""
    x = model.check(x)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    k = killing_eval(model, x)

    def along(v):
        hv = step * max(1.0, float(np.linalg.norm(x))) / max(float(np.linalg.norm(v)), 1e-300)
        dk = (killing_eval(model, x + hv * v) - killing_eval(model, x - hv * v)) / (2 * hv)
        dg = (gamma_conf(x + hv * v) - gamma_conf(x - hv * v)) / (2 * hv)
        return dk, dg

    dXK, Xg = along(X)
    dYK, Yg = along(Y)
    if np.linalg.norm(k) > 0:
        _, Kg = along(k)
    else:
        Kg = 0.0
    nabla_X_K = conformal_connection(model, x, X, k, dXK, Xg, Kg)
    nabla_Y_K = conformal_connection(model, x, Y, k, dYK, Yg, Kg)
    return metric_eval(model, x, nabla_X_K, Y) + metric_eval(model, x, X, nabla_Y_K)


# --- exports -----------------------------------------------------------------


def polyline_patch(v, f, u_range=(0.5, 2.0)) -> HypersurfacePatch:
    """Two-parameter patch ``(u, k) -> u (1, v_k cos f_k, v_k sin f_k)`` with
    ``k`` a fractional sample index (linear between samples).

    Meshes curves that are not graphs over ``v``, such as a glued wing.
    """
    v = np.asarray(v, dtype=float)
    f = np.asarray(f, dtype=float)
    idx = np.arange(v.size, dtype=float)

    def fmap(params):
        u, k = params
        vv = float(np.interp(k, idx, v))
        ff = float(np.interp(k, idx, f))
        return u * np.array([1.0, vv * math.cos(ff), vv * math.sin(ff)])

    return HypersurfacePatch(
        fmap,
        np.array([u_range[0], 0.0]),
        np.array([u_range[1], float(v.size - 1)]),
        _rotation_orientation,
        label="polyline",
    )


def write_obj(patches, shape=(40, 80), path: str | Path | None = None) -> str:
    """OBJ mesh of two-parameter patches (n = 2): one object per patch,
    vertices on a uniform parameter grid, quad faces.

    ``patches`` is a patch or a sequence of ``(name, patch)`` pairs.
    """
    if isinstance(patches, HypersurfacePatch):
        patches = [("soliton", patches)]
    nu_, nv_ = shape
    lines = []
    base = 0
    for name, patch in patches:
        if patch.param_dim != 2:
            raise GeometryError("OBJ export supports two-parameter patches (n = 2)")
        us = np.linspace(patch.param_lo[0], patch.param_hi[0], nu_)
        vs = np.linspace(patch.param_lo[1], patch.param_hi[1], nv_)
        lines.append(f"o {name}")
        for u in us:
            for v in vs:
                x = patch(np.array([u, v]))
                lines.append("v " + " ".join(format(c, ".9g") for c in x))
        for i in range(nu_ - 1):
            for j in range(nv_ - 1):
                a = base + i * nv_ + j + 1
                lines.append(f"f {a} {a + 1} {a + nv_ + 1} {a + nv_}")
        base += nu_ * nv_
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def curve_svg(points: np.ndarray, path: str | Path | None = None, size: int = 800, margin: int = 40, mirror: bool = False) -> str:
    """Polyline of a planar curve on an equal-aspect ``size x size`` canvas.

    ``mirror`` also draws the image under rotation by pi (the other half of a
    bowl).
    """
    pts = np.asarray(points, dtype=float)
    polys = [pts, -pts] if mirror else [pts]
    allp = np.vstack(polys)
    lo = allp.min(axis=0)
    hi = allp.max(axis=0)
    span = max(float(np.max(hi - lo)), 1e-12)
    centre = 0.5 * (lo + hi)
    scale = (size - 2 * margin) / span

    def px(p):
        return (size / 2 + (p[0] - centre[0]) * scale, size / 2 - (p[1] - centre[1]) * scale)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
    ]
    for poly in polys:
        d = " ".join("{:.3f},{:.3f}".format(*px(p)) for p in poly)
        out.append(f'<polyline points="{d}" fill="none" stroke="black" stroke-width="1.5"/>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def residual_json_text(report: ResidualReport) -> str:
    def clean(obj):
        if isinstance(obj, float):
            return float(format_number(obj)) if math.isfinite(obj) else None
        if isinstance(obj, list):
            return [clean(o) for o in obj]
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        return obj

    return json.dumps(clean(report.to_dict()), indent=2, sort_keys=True) + "\n"


def write_residual_json(report: ResidualReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(residual_json_text(report))
