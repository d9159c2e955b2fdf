"""Solutions through the singular locus of the rotator ODE.

* the bowl: the unique solution with ``f(0) = f0``, ``f'(0) = 0``, started
  from the series ``w ~ s/3`` just off the singular point ``s = 0``;
* wing-like curves: two branches with a common vertical tangent at an
  interior point ``(s0, r0)``, built from the inverse function ``gamma``
  (``s = gamma(r)``) and then continued in the ``(f, w)`` chart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._dopri import dopri5
from .ode_core import IntegratorOptions, Trajectory, integrate
from .profiles import rotator_profile

__all__ = [
    "BOWL_SLOPE",
    "LaunchError",
    "WingCurve",
    "GluedWing",
    "bowl_launch",
    "wing_gamma_rhs",
    "wing_launch",
    "glue_wing",
]

#: w(s) ~ BOWL_SLOPE * s near s = 0, for every n
BOWL_SLOPE = 1.0 / 3.0


class LaunchError(RuntimeError):
    pass


def bowl_launch(
    n: int,
    f0: float,
    s_max: float,
    opts: IntegratorOptions | None = None,
    eps: float = 1e-5,
) -> Trajectory:
    """Bowl solution on ``[0, s_max]``.

    Integration starts at ``s = eps`` from ``w = eps/3``, ``f = f0 + eps^2/6``;
    the exact boundary sample ``(0, f0, 0)`` is prepended.  A run that ends
    early is returned with its termination tag rather than raised.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not s_max > eps:
        raise ValueError("s_max must exceed the launch offset eps")
    profile = rotator_profile(n)
    traj = integrate(
        profile, eps, f0 + eps * eps / 6.0, BOWL_SLOPE * eps, s_max, opts, launch="series"
    )
    dw = None if traj.dw is None else np.concatenate([[BOWL_SLOPE], traj.dw])
    return traj.replace(
        s=np.concatenate([[0.0], traj.s]),
        f=np.concatenate([[f0], traj.f]),
        w=np.concatenate([[0.0], traj.w]),
        dw=dw,
    )


def wing_gamma_rhs(n: int, gamma: float, gamma_prime: float) -> float:
    """``gamma''`` for the inverse function ``s = gamma(r)`` of a solution."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    g, gp = gamma, gamma_prime
    g2 = g * g
    num = (2 * g2 + 1) * gp * gp - (g2 * g2 + g2 + gp * gp) * (g * gp - n * g2 - 1)
    return num / (g2 * g + g)


@dataclass(frozen=True, eq=False)
class WingCurve:
    """Two solution branches meeting with a vertical tangent at ``(s0, r0)``.

    ``gamma_arc`` has columns ``(r, gamma, gamma')`` sorted by ``r``.  Each
    branch starts with the inverted arc samples on its side (``s = gamma``,
    ``f = r``, ``w = 1/gamma'``) followed by the continuation in ``s``;
    ``switch_index`` is the position of the hand-off sample in each branch.
    """

    n: int
    s0: float
    r0: float
    branch_plus: Trajectory
    branch_minus: Trajectory
    gamma_arc: np.ndarray
    switch_plus: int
    switch_minus: int
    delta_switch: float


def _gamma_side(n, s0, r0, direction, delta, opts, first_step, r_span, max_step):
    def fun(_r, y):
        return np.array([y[1], wing_gamma_rhs(n, y[0], y[1])])

    def guard(_r, y):
        return "degenerate" if y[0] <= 0 else None

    res = dopri5(
        fun,
        r0,
        np.array([s0, 0.0]),
        r0 + direction * r_span,
        rtol=opts.rel_tol,
        atol=opts.abs_tol,
        max_step=min(opts.max_step, max_step),
        min_step=opts.min_step,
        first_step=first_step,
        guard=guard,
        event=lambda _r, y: abs(y[1]) - delta,
        max_steps=20_000,
    )
    if res.reason != "event":
        raise LaunchError(
            f"gamma arc did not reach |gamma'| = {delta} ({res.reason}); "
            "degenerate choice of s0"
        )
    return res.t, res.y


def wing_launch(
    n: int,
    s0: float,
    r0: float,
    s_max: float,
    opts: IntegratorOptions | None = None,
    delta_switch: float = 1.0,
    first_step: float = 1e-4,
    arc_max_step: float = 2e-3,
) -> WingCurve:
    """Wing-like pair of branches with vertical tangent at ``(s0, r0)``.

    ``arc_max_step`` caps the r-step on the gamma arc so that the inverted
    samples stay dense where ``f`` behaves like ``sqrt(s - s0)``.
    """
    if not s0 > 0:
        raise ValueError("s0 must be positive")
    if not s_max > s0:
        raise ValueError("s_max must exceed s0")
    opts = opts or IntegratorOptions()
    profile = rotator_profile(n)
    # gamma'' > 0 at r0, and |gamma'| = delta is reached within r ~ delta/gamma''(r0)
    r_span = 100.0 * (1.0 + delta_switch / (s0 * (n * s0 + 1)))

    sides = {}
    for direction in (+1, -1):
        r, y = _gamma_side(
            n, s0, r0, direction, delta_switch, opts, first_step, r_span, arc_max_step
        )
        if np.any(np.diff(y[:, 0]) <= 0):
            raise LaunchError("gamma arc is not strictly monotone; cannot invert")
        sides[direction] = (r, y)

    r_p, y_p = sides[+1]
    r_m, y_m = sides[-1]
    arc = np.concatenate(
        [
            np.column_stack([r_m[::-1], y_m[::-1, 0], y_m[::-1, 1]]),
            np.column_stack([r_p[1:], y_p[1:, 0], y_p[1:, 1]]),
        ]
    )

    branches = {}
    for direction, (r, y) in sides.items():
        g, gp = y[1:, 0], y[1:, 1]
        gpp = np.array([wing_gamma_rhs(n, a, b) for a, b in zip(g, gp)])
        s_sw, f_sw, w_sw = g[-1], r[-1], 1.0 / gp[-1]
        cont = integrate(profile, s_sw, f_sw, w_sw, s_max, opts, launch="inverse-branch")
        dw_arc = -gpp / gp**3
        dw = None
        if cont.dw is not None:
            dw = np.concatenate([dw_arc, cont.dw[1:]])
        branch = Trajectory(
            profile_label=profile.label,
            s=np.concatenate([g, cont.s[1:]]),
            f=np.concatenate([r[1:], cont.f[1:]]),
            w=np.concatenate([1.0 / gp, cont.w[1:]]),
            launch="inverse-branch",
            termination=cont.termination,
            tolerances=(opts.abs_tol, opts.rel_tol),
            dw=dw,
            n=n,
            message=cont.message,
        )
        branches[direction] = (branch, g.size - 1)

    return WingCurve(
        n=n,
        s0=float(s0),
        r0=float(r0),
        branch_plus=branches[+1][0],
        branch_minus=branches[-1][0],
        gamma_arc=arc,
        switch_plus=branches[+1][1],
        switch_minus=branches[-1][1],
        delta_switch=delta_switch,
    )


@dataclass(frozen=True, eq=False)
class GluedWing:
    """Ordered planar samples ``(s, f)`` of a glued wing curve."""

    s: np.ndarray
    f: np.ndarray
    branch: tuple[str, ...]
    tangent_mismatch: float

    def __len__(self):
        return self.s.size


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def glue_wing(curve: WingCurve, tol: float = 1e-6) -> GluedWing:
    """Single traversal: minus branch inward, the gamma arc, plus branch outward.

    Near ``s0`` the curve is emitted in the gamma chart (where f' is
    infinite) and elsewhere in the f chart.  Raises if the pieces do not meet
    with matching position and tangent direction.
    """
    plus, minus = curve.branch_plus, curve.branch_minus
    kp, km = curve.switch_plus, curve.switch_minus
    arc = curve.gamma_arc
    r, g, gp = arc[:, 0], arc[:, 1], arc[:, 2]

    mismatch = 0.0
    # minus branch meets the first arc sample; traversal moves toward decreasing s
    for (bs, bf, bw, sign), (ar, ag, agp) in (
        ((minus.s[km], minus.f[km], minus.w[km], -1.0), (r[0], g[0], gp[0])),
        ((plus.s[kp], plus.f[kp], plus.w[kp], +1.0), (r[-1], g[-1], gp[-1])),
    ):
        pos = math.hypot(bs - ag, bf - ar)
        if pos > tol * (1.0 + abs(bs) + abs(bf)):
            raise LaunchError(f"branch and arc endpoints differ by {pos:.3e}")
        t_branch = _unit([sign, sign * bw])
        t_arc = _unit([agp, 1.0])
        mismatch = max(mismatch, float(np.linalg.norm(t_branch - t_arc)))
    if mismatch > tol:
        raise LaunchError(f"tangent directions disagree by {mismatch:.3e} at a hand-off")

    s = np.concatenate([minus.s[:km:-1], g, plus.s[kp + 1 :]])
    f = np.concatenate([minus.f[:km:-1], r, plus.f[kp + 1 :]])
    labels = (
        ("minus",) * (minus.s.size - km - 1) + ("vertex",) * g.size + ("plus",) * (plus.s.size - kp - 1)
    )
    return GluedWing(s=s, f=f, branch=labels, tangent_mismatch=mismatch)
