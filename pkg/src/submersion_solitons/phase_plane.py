"""Planar field ``X(s, x) = (p(s), q(s, x))`` behind ``w' = q(s, w) / p(s)``.

Integral curves of ``X`` along which ``s`` is monotone are solutions after
reparametrisation by ``s``.  At a zero of ``X`` with ``p'(s0) dq/dx(s0, x0) < 0``
the equilibrium is a saddle; the invariant curve that is transverse to the
``x`` direction yields the solution through the singular point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from ._dopri import dopri5
from .ode_core import IntegratorOptions, Trajectory, rotator_pq, rotator_pq_partials

__all__ = [
    "PhaseField",
    "Equilibrium",
    "IntegralCurve",
    "PhasePlaneError",
    "rotator_field",
    "find_equilibria",
    "admissible_saddle",
    "manifold_launch",
    "curve_to_solution",
    "phase_portrait_svg",
]


class PhasePlaneError(ValueError):
    pass


@dataclass(frozen=True)
class PhaseField:
    """Triangular planar field with analytic partials."""

    p: Callable[[float], float]
    dp: Callable[[float], float]
    q: Callable[[float, float], float]
    dq_ds: Callable[[float, float], float]
    dq_dx: Callable[[float, float], float]
    label: str = "custom"

    def __call__(self, s, x):
        return np.array([self.p(s), self.q(s, x)])

    def jacobian(self, s, x) -> np.ndarray:
        return np.array([[self.dp(s), 0.0], [self.dq_ds(s, x), self.dq_dx(s, x)]])


def rotator_field(n: int) -> PhaseField:
    return PhaseField(
        p=lambda s: rotator_pq(n, s, 0.0)[0],
        dp=lambda s: rotator_pq_partials(n, s, 0.0)[0],
        q=lambda s, x: rotator_pq(n, s, x)[1],
        dq_ds=lambda s, x: rotator_pq_partials(n, s, x)[1],
        dq_dx=lambda s, x: rotator_pq_partials(n, s, x)[2],
        label=f"rotation(n={n})",
    )


@dataclass
class Equilibrium:
    location: tuple[float, float]
    jacobian: np.ndarray
    eigenvalues: tuple[float, float] = field(init=False)
    eigenvectors: np.ndarray = field(init=False)
    admissible_saddle: bool = field(init=False)

    def __post_init__(self):
        j = np.asarray(self.jacobian, dtype=float)
        self.jacobian = j
        # lower triangular: eigenvalues are the diagonal entries
        lam1, lam2 = float(j[0, 0]), float(j[1, 1])
        self.eigenvalues = (lam1, lam2)
        vecs = np.zeros((2, 2))
        vecs[:, 1] = (0.0, 1.0)
        if lam1 != lam2:
            v = np.array([lam1 - lam2, j[1, 0]])
            vecs[:, 0] = v / np.linalg.norm(v)
        elif j[1, 0] == 0.0:
            vecs[:, 0] = (1.0, 0.0)
        else:
            vecs[:, 0] = math.nan  # defective
        self.eigenvectors = vecs
        self.admissible_saddle = lam1 * lam2 < 0


def admissible_saddle(eq: Equilibrium) -> bool:
    """True iff ``p'(s0) * dq/dx(s0, x0) < 0``."""
    return bool(eq.jacobian[0, 0] * eq.jacobian[1, 1] < 0)


def _sign_change_roots(fn, lo, hi, grid, tol=1e-14):
    xs = np.linspace(lo, hi, grid + 1)
    vals = np.array([fn(x) for x in xs])
    roots = []
    for i in range(grid):
        a, b = xs[i], xs[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(float(a))
            continue
        if i == grid - 1 and fb == 0.0:
            roots.append(float(b))
        if fa * fb < 0:
            for _ in range(200):
                m = 0.5 * (a + b)
                fm = fn(m)
                if fm == 0.0 or b - a <= tol * (1.0 + abs(m)):
                    break
                if (fm < 0) == (fa < 0):
                    a, fa = m, fm
                else:
                    b = m
            roots.append(float(0.5 * (a + b)) if fm != 0.0 else float(m))
    return roots


def find_equilibria(field_: PhaseField, box, grid: int = 200, tol: float = 1e-12) -> list[Equilibrium]:
    """Zeros of ``X`` in ``box = (s_lo, s_hi, x_lo, x_hi)``.

    Sign changes of ``p`` on a grid are bisected; for each root ``s0`` the
    roots of ``q(s0, .)`` are bracketed likewise.  Each pair is then polished
    by Newton's method on ``X``.
    """
    s_lo, s_hi, x_lo, x_hi = map(float, box)
    found = []
    for s0 in _sign_change_roots(field_.p, s_lo, s_hi, grid):
        for x0 in _sign_change_roots(lambda x: field_.q(s0, x), x_lo, x_hi, grid):
            s, x = s0, x0
            for _ in range(50):
                fval = field_(s, x)
                if np.max(np.abs(fval)) <= tol:
                    break
                try:
                    delta = np.linalg.solve(field_.jacobian(s, x), fval)
                except np.linalg.LinAlgError:
                    break
                s, x = s - delta[0], x - delta[1]
            if np.max(np.abs(field_(s, x))) > 1e-10:
                continue
            if any(abs(e.location[0] - s) < 1e-9 and abs(e.location[1] - x) < 1e-9 for e in found):
                continue
            found.append(Equilibrium((float(s), float(x)), field_.jacobian(s, x)))
    return found


@dataclass(frozen=True, eq=False)
class IntegralCurve:
    """Samples ``(r, s(r), x(r))`` of an integral curve of the phase field."""

    r: np.ndarray
    s: np.ndarray
    x: np.ndarray
    which: str = "unstable"
    termination: str = "reached_end"


def manifold_launch(
    field_: PhaseField,
    eq: Equilibrium,
    which: str = "unstable",
    side: int = +1,
    offset: float = 1e-6,
    arc_length_max: float = 1.0,
    opts: IntegratorOptions | None = None,
    box: Optional[tuple] = None,
    r_max: float = 200.0,
) -> IntegralCurve:
    """Trace the stable or unstable invariant curve of a saddle.

    Starts at ``eq.location + side * offset * v`` with ``v`` the unit
    eigenvector of the Jacobian for the positive (unstable) or negative
    (stable) eigenvalue; the stable curve is followed in reversed time.
    Stops when the Euclidean arc length in the ``(s, x)`` plane reaches
    ``arc_length_max`` or the curve leaves ``box``.
    """
    if not admissible_saddle(eq):
        raise PhasePlaneError("manifold launch requires an admissible saddle")
    if which not in ("stable", "unstable"):
        raise ValueError("which must be 'stable' or 'unstable'")
    if side not in (+1, -1):
        raise ValueError("side must be +1 or -1")
    if not offset > 0:
        raise ValueError("offset must be positive")
    opts = opts or IntegratorOptions()

    lam = np.asarray(eq.eigenvalues)
    idx = int(np.argmax(lam)) if which == "unstable" else int(np.argmin(lam))
    v = eq.eigenvectors[:, idx]
    if not np.all(np.isfinite(v)) or np.linalg.norm(v) == 0:
        raise PhasePlaneError("degenerate eigenvector")
    v = v / np.linalg.norm(v)
    sign = 1.0 if which == "unstable" else -1.0
    start = np.array(eq.location) + side * offset * v

    def fun(_r, y):
        ds = field_.p(y[0])
        dx = field_.q(y[0], y[1])
        return sign * np.array([ds, dx, math.hypot(ds, dx)])

    def guard(_r, y):
        if box is not None:
            s_lo, s_hi, x_lo, x_hi = box
            if not (s_lo <= y[0] <= s_hi and x_lo <= y[1] <= x_hi):
                return "domain_boundary"
        if abs(y[1]) >= opts.w_blow_up_limit:
            return "blow_up"
        return None

    # a sign-flipped field makes the arc length grow in reversed time too
    res = dopri5(
        fun,
        0.0,
        np.array([start[0], start[1], 0.0]),
        r_max,
        rtol=opts.rel_tol,
        atol=opts.abs_tol,
        max_step=opts.max_step,
        min_step=opts.min_step,
        guard=guard,
        event=lambda _r, y: sign * y[2] - arc_length_max,
    )
    reason = {"event": "reached_end"}.get(res.reason, res.reason)
    return IntegralCurve(
        r=res.t, s=res.y[:, 0], x=res.y[:, 1], which=which, termination=reason
    )


def curve_to_solution(
    curve: IntegralCurve,
    field_: PhaseField | None = None,
    f_anchor: float = 0.0,
    s_anchor: float | None = None,
    profile_label: str = "rotation",
    n: int | None = None,
) -> Trajectory:
    """Reparametrise an integral curve by ``s``: ``w = x o s^{-1}``.

    The samples of the curve become trajectory samples; ``f`` is recovered by
    quadrature of ``w`` from ``f(s_anchor) = f_anchor`` (default: the first
    sample).  With ``field_`` given the quadrature is the fourth-order
    Hermite trapezoid using ``w' = q/p``, otherwise the monotone cubic
    interpolant of ``w`` is integrated.
    """
    s, x = np.asarray(curve.s, dtype=float), np.asarray(curve.x, dtype=float)
    if s.size < 2:
        raise PhasePlaneError("curve has fewer than two samples")
    d = np.diff(s)
    bad = np.nonzero(d * d[0] <= 0)[0]
    if d[0] == 0 or bad.size:
        k = 0 if d[0] == 0 else int(bad[0])
        raise PhasePlaneError(f"s is not strictly monotone along the curve (fold at index {k + 1})")

    if field_ is not None:
        dw = np.array([field_.q(a, b) / field_.p(a) for a, b in zip(s, x)])
        inc = 0.5 * d * (x[:-1] + x[1:]) + d * d / 12.0 * (dw[:-1] - dw[1:])
    else:
        dw = None
        order = slice(None) if d[0] > 0 else slice(None, None, -1)
        interp = PchipInterpolator(s[order], x[order])
        anti = interp.antiderivative()
        inc = np.diff(anti(s))
    f = np.concatenate([[0.0], np.cumsum(inc)])
    k = 0
    if s_anchor is not None:
        hits = np.nonzero(s == s_anchor)[0]
        if not hits.size:
            raise PhasePlaneError("s_anchor must be one of the curve samples")
        k = int(hits[0])
    f = f - f[k] + f_anchor
    return Trajectory(
        profile_label=profile_label,
        s=s,
        f=f,
        w=x,
        launch="manifold",
        termination=curve.termination if curve.termination != "event" else "reached_end",
        dw=dw,
        n=n,
    )


def solution_interpolant(curve: IntegralCurve) -> PchipInterpolator:
    """Monotone cubic ``w(s)`` through the curve samples."""
    order = np.argsort(curve.s)
    return PchipInterpolator(curve.s[order], curve.x[order])


# --- SVG -------------------------------------------------------------------------


def _nullcline_segments(fn, box, nx=120, ny=90):
    """Marching squares for the zero set of ``fn(s, x)`` on the box."""
    s_lo, s_hi, x_lo, x_hi = box
    ss = np.linspace(s_lo, s_hi, nx + 1)
    xs = np.linspace(x_lo, x_hi, ny + 1)
    vals = np.array([[fn(a, b) for b in xs] for a in ss])
    segs = []
    for i in range(nx):
        for j in range(ny):
            corners = [
                (ss[i], xs[j], vals[i, j]),
                (ss[i + 1], xs[j], vals[i + 1, j]),
                (ss[i + 1], xs[j + 1], vals[i + 1, j + 1]),
                (ss[i], xs[j + 1], vals[i, j + 1]),
            ]
            pts = []
            for k in range(4):
                a0, b0, v0 = corners[k]
                a1, b1, v1 = corners[(k + 1) % 4]
                if (v0 < 0) != (v1 < 0):
                    t = v0 / (v0 - v1)
                    pts.append((a0 + t * (a1 - a0), b0 + t * (b1 - b0)))
            if len(pts) == 2:
                segs.append(tuple(pts))
            elif len(pts) == 4:
                segs.append((pts[0], pts[1]))
                segs.append((pts[2], pts[3]))
    return segs


def phase_portrait_svg(
    field_: PhaseField,
    box,
    equilibria=(),
    curves=(),
    path: str | Path | None = None,
    width: int = 800,
    height: int = 600,
) -> str:
    """Nullclines ``p = 0`` (blue) and ``q = 0`` (red), equilibria and curves."""
    s_lo, s_hi, x_lo, x_hi = map(float, box)

    def px(s, x):
        return (
            (s - s_lo) / (s_hi - s_lo) * width,
            height - (x - x_lo) / (x_hi - x_lo) * height,
        )

    def fmt(v):
        return f"{v:.3f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if s_lo < 0 < s_hi:
        a, _ = px(0.0, 0.0)
        out.append(f'<line x1="{fmt(a)}" y1="0" x2="{fmt(a)}" y2="{height}" stroke="#bbb"/>')
    if x_lo < 0 < x_hi:
        _, b = px(0.0, 0.0)
        out.append(f'<line x1="0" y1="{fmt(b)}" x2="{width}" y2="{fmt(b)}" stroke="#bbb"/>')

    for s0 in _sign_change_roots(field_.p, s_lo, s_hi, 400):
        a, _ = px(s0, 0.0)
        out.append(
            f'<line class="nullcline-p" x1="{fmt(a)}" y1="0" x2="{fmt(a)}" y2="{height}" '
            'stroke="blue" stroke-width="1.5"/>'
        )
    segs = _nullcline_segments(field_.q, (s_lo, s_hi, x_lo, x_hi))
    if segs:
        d = " ".join(
            "M{} {} L{} {}".format(*map(fmt, (*px(*p0), *px(*p1)))) for p0, p1 in segs
        )
        out.append(f'<path class="nullcline-q" d="{d}" fill="none" stroke="red" stroke-width="1.5"/>')

    for curve in curves:
        s_c, x_c = (curve.s, curve.x) if isinstance(curve, IntegralCurve) else curve
        pts = [px(a, b) for a, b in zip(s_c, x_c) if s_lo <= a <= s_hi and x_lo <= b <= x_hi]
        if len(pts) >= 2:
            d = " ".join(f"{fmt(a)},{fmt(b)}" for a, b in pts)
            out.append(f'<polyline class="manifold" points="{d}" fill="none" stroke="black" stroke-width="2"/>')

    for eq in equilibria:
        a, b = px(*eq.location)
        colour = "green" if eq.admissible_saddle else "gray"
        out.append(f'<circle class="equilibrium" cx="{fmt(a)}" cy="{fmt(b)}" r="5" fill="{colour}"/>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
