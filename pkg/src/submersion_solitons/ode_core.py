"""The reduced soliton ODE, its rotator polynomial form and adaptive integration.

For a profile ``(alpha, phi_hat, h, n)`` the graph of ``u = f o pi`` is a
soliton iff

    f'' = (alpha + phi_hat f'^2) (1 - phi_hat' f' / (2 phi_hat alpha) - f' h / sqrt(alpha))
          + (f'/2) (alpha'/alpha - phi_hat'/phi_hat).

The right-hand side does not depend on ``f`` itself, so we integrate the first
order system ``(f, w)`` with ``w = f'``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from ._dopri import dopri5
from .profiles import DomainError, SubmersionProfile, rotator_profile

__all__ = [
    "IntegratorOptions",
    "Trajectory",
    "ResidualReport",
    "generic_rhs",
    "printed_rhs",
    "rotator_pq",
    "rotator_pq_partials",
    "integrate",
    "ode_residual",
    "cubic_bounds",
    "richardson_order",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "format_number",
]

LAUNCH_TAGS = ("series", "manifold", "interior", "inverse-branch")
TERMINATION_TAGS = ("reached_end", "blow_up", "domain_boundary", "step_underflow")


def format_number(x: float) -> str:
    """17 significant digits; lossless for binary64."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class IntegratorOptions:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_step: float = math.inf
    min_step: float = 1e-14
    w_blow_up_limit: float = 1e8
    dense_output: bool = True
    # distance kept from an open endpoint when the target lies beyond it
    boundary_margin: float = 1e-8

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.min_step > 0 or not self.min_step < self.max_step:
            raise ValueError("need 0 < min_step < max_step")
        if not self.w_blow_up_limit > 0:
            raise ValueError("w_blow_up_limit must be positive")
        if not self.boundary_margin > 0:
            raise ValueError("boundary_margin must be positive")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution ``(s, f, w = f')`` of the reduced ODE.

    ``dw`` holds ``w'`` at the samples when the trajectory came out of the
    integrator; hand-built or CSV-loaded trajectories leave it ``None``.
    """

    profile_label: str
    s: np.ndarray
    f: np.ndarray
    w: np.ndarray
    launch: str = "interior"
    termination: str = "reached_end"
    tolerances: tuple[float, float] = (1e-12, 1e-10)
    dw: Optional[np.ndarray] = None
    n: Optional[int] = None
    message: str = ""

    def __post_init__(self):
        arrays = {}
        for name in ("s", "f", "w"):
            a = np.array(getattr(self, name), dtype=float)
            if a.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            arrays[name] = a
        if not arrays["s"].size == arrays["f"].size == arrays["w"].size:
            raise ValueError("s, f, w must have equal length")
        if arrays["s"].size == 0:
            raise ValueError("a trajectory needs at least one sample")
        if arrays["s"].size > 1:
            d = np.diff(arrays["s"])
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ValueError("s must be strictly monotone")
        if self.launch not in LAUNCH_TAGS:
            raise ValueError(f"unknown launch tag {self.launch!r}")
        if self.termination not in TERMINATION_TAGS:
            raise ValueError(f"unknown termination tag {self.termination!r}")
        if self.dw is not None:
            dw = np.array(self.dw, dtype=float)
            if dw.shape != arrays["s"].shape:
                raise ValueError("dw must match s")
            arrays["dw"] = dw
        for name, a in arrays.items():
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return self.s.size

    @property
    def samples(self) -> list[tuple[float, float, float]]:
        return list(zip(self.s.tolist(), self.f.tolist(), self.w.tolist()))

    @property
    def increasing(self) -> bool:
        return self.s.size < 2 or self.s[1] > self.s[0]

    def replace(self, **changes) -> "Trajectory":
        fields = dict(
            profile_label=self.profile_label, s=self.s, f=self.f, w=self.w,
            launch=self.launch, termination=self.termination,
            tolerances=self.tolerances, dw=self.dw, n=self.n, message=self.message,
        )
        fields.update(changes)
        return Trajectory(**fields)

    def interpolate(self, s):
        """Dense output: cubic Hermite on ``(f, w)`` (and on ``(w, w')``)."""
        if self.dw is None:
            raise ValueError("dense output needs w' samples (integrator output)")
        order = slice(None) if self.increasing else slice(None, None, -1)
        ss = self.s[order]
        f = CubicHermiteSpline(ss, self.f[order], self.w[order], extrapolate=False)
        w = CubicHermiteSpline(ss, self.w[order], self.dw[order], extrapolate=False)
        return f(s), w(s)


@dataclass
class ResidualReport:
    """Residual samples with summary statistics.

    ``residuals`` is one row per point; with a step ladder it has one column
    per step (coarse to fine) and the summary refers to the finest step.
    """

    points: list
    residuals: np.ndarray
    threshold: float
    steps: Optional[list] = None
    order: Optional[float] = None
    orders: Optional[list] = None
    max_abs: float = field(init=False)
    rms: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        r = np.asarray(self.residuals, dtype=float)
        self.residuals = r
        final = r[:, -1] if r.ndim == 2 else r
        if final.size:
            self.max_abs = float(np.max(np.abs(final)))
            self.rms = float(np.sqrt(np.mean(final**2)))
        else:
            self.max_abs = self.rms = math.nan
        if self.steps is not None and len(self.steps) < 3:
            self.order = None
            self.orders = None
        self.passed = bool(final.size) and self.max_abs < self.threshold

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None or not math.isfinite(x) else float(x)

        pts = [list(map(float, np.atleast_1d(p))) if np.ndim(p) else float(p) for p in self.points]
        return {
            "points": pts,
            "steps": None if self.steps is None else [float(h) for h in self.steps],
            "residuals": self.residuals.tolist(),
            "max": num(self.max_abs),
            "rms": num(self.rms),
            "order": num(self.order),
            "threshold": float(self.threshold),
            "passed": self.passed,
        }


# --- right-hand sides ----------------------------------------------------------


def generic_rhs(profile: SubmersionProfile, s, w):
    """``f''`` from the reduced ODE; independent of ``f``."""
    if not profile.contains(s):
        raise DomainError(f"s={s!r} outside {profile.domain}")
    a = profile.alpha_fn(s)
    ap = profile.alpha_prime_fn(s)
    ph = profile.phi_hat_fn(s)
    php = profile.phi_hat_prime_fn(s)
    h = profile.h_fn(s)
    out = (a + ph * w * w) * (1.0 - php * w / (2.0 * ph * a) - w * h / np.sqrt(a)) + 0.5 * w * (
        ap / a - php / ph
    )
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite right-hand side at s={s!r}, w={w!r}")
    return out


def _fast_rhs(profile: SubmersionProfile):
    a_fn, ap_fn = profile.alpha_fn, profile.alpha_prime_fn
    ph_fn, php_fn, h_fn = profile.phi_hat_fn, profile.phi_hat_prime_fn, profile.h_fn

    def rhs(s, y):
        w = y[1]
        a = a_fn(s)
        ph = ph_fn(s)
        php = php_fn(s)
        dw = (a + ph * w * w) * (1.0 - php * w / (2.0 * ph * a) - w * h_fn(s) / math.sqrt(a)) + (
            0.5 * w * (ap_fn(s) / a - php / ph)
        )
        return np.array([w, dw])

    return rhs


def printed_rhs(label: str, n: int, s, w):
    """Closed-form family ODEs as written for the hyperbolic Killing fields."""
    if label == "rotation":
        return (((s**4 + s**2) * w**2 + 1) * (s - (n * s**2 + 1) * w) - (2 * s**2 + 1) * w) / (
            s * (1 + s**2)
        )
    if label == "translation":
        return (w**2 + 1) * (n * s * w + 1) / s**2
    if label == "dilation":
        return (
            (s**2 - (s**2 - 1) * w**2) * (((2 * n - 3) * s**2 + 1) * w + s) + s**2 * w
        ) / (s**3 * (1 - s**2))
    raise ValueError(f"no printed ODE for family {label!r}")


def rotator_pq(n: int, s, x):
    """``p(s) = s^3 + s`` and the expanded cubic ``q(s, x)``."""
    s2 = s * s
    p = s2 * s + s
    q = -s2 * (s2 + 1) * (n * s2 + 1) * x**3 + s2 * s * (s2 + 1) * x**2 - ((n + 2) * s2 + 2) * x + s
    return p, q


def rotator_pq_partials(n: int, s, x):
    """Analytic ``(p', dq/ds, dq/dx)``."""
    s2 = s * s
    dp = 3 * s2 + 1
    d_a = 6 * n * s2**2 * s + 4 * (n + 1) * s2 * s + 2 * s
    d_b = 5 * s2 * s2 + 3 * s2
    d_c = 2 * (n + 2) * s
    dq_ds = -d_a * x**3 + d_b * x**2 - d_c * x + 1
    big_a = s2 * (s2 + 1) * (n * s2 + 1)
    big_b = s2 * s * (s2 + 1)
    dq_dx = -3 * big_a * x**2 + 2 * big_b * x - ((n + 2) * s2 + 2)
    return dp, dq_ds, dq_dx


# --- integration ---------------------------------------------------------------


def integrate(
    profile: SubmersionProfile,
    s_start: float,
    f_start: float,
    w_start: float,
    s_end: float,
    opts: IntegratorOptions | None = None,
    launch: str = "interior",
) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) solution of the reduced ODE.

    The run ends with ``reached_end`` at ``s_end``; ``blow_up`` once
    ``|w| >= opts.w_blow_up_limit``; ``domain_boundary`` when ``s_end`` lies
    at or beyond an endpoint of the open domain and the integration has come
    within ``opts.boundary_margin`` of it; ``step_underflow`` if the step-size
    controller drops below ``opts.min_step``.
    """
    opts = opts or IntegratorOptions()
    if not profile.contains(s_start):
        raise DomainError(f"s_start={s_start!r} outside {profile.domain}")
    state = np.array([f_start, w_start], dtype=float)
    if not np.all(np.isfinite(state)) or not math.isfinite(s_start):
        raise ValueError("initial state must be finite")
    if math.isnan(s_end):
        raise ValueError("s_end is NaN")

    lo, hi = profile.domain
    target, end_reason = float(s_end), "reached_end"
    if s_end >= hi:
        target, end_reason = hi - opts.boundary_margin * max(1.0, abs(hi)), "domain_boundary"
    elif s_end <= lo:
        target, end_reason = lo + opts.boundary_margin * max(1.0, abs(lo)), "domain_boundary"
    if end_reason == "domain_boundary" and (target - s_start) * (s_end - s_start) <= 0:
        target = s_start

    limit = opts.w_blow_up_limit

    def guard(_s, y):
        if abs(y[1]) >= limit:
            return "blow_up"
        return None

    res = dopri5(
        _fast_rhs(profile),
        float(s_start),
        state,
        target,
        rtol=opts.rel_tol,
        atol=opts.abs_tol,
        max_step=opts.max_step,
        min_step=opts.min_step,
        guard=guard,
        end_reason=end_reason,
    )
    return Trajectory(
        profile_label=profile.label,
        s=res.t,
        f=res.y[:, 0],
        w=res.y[:, 1],
        launch=launch,
        termination=res.reason,
        tolerances=(opts.abs_tol, opts.rel_tol),
        dw=res.dy[:, 1] if opts.dense_output else None,
        n=profile.n,
        message=res.message,
    )


# --- verification ----------------------------------------------------------------


def _lagrange_weights(nodes: np.ndarray, x: float) -> np.ndarray:
    # weights of the interpolating polynomial through `nodes`, evaluated at x
    wts = np.ones_like(nodes)
    for j, xj in enumerate(nodes):
        others = np.delete(nodes, j)
        wts[j] = np.prod((x - others) / (xj - others))
    return wts


def ode_residual(
    profile: SubmersionProfile,
    traj: Trajectory,
    s_min: float | None = None,
    s_max: float | None = None,
    threshold: float = 1e-6,
    stencil: int = 7,
) -> ResidualReport:
    """Residual ``f''_FD - rhs(s, w)`` at interior samples.

    Around every sample the ``f`` values (never ``w`` or integrator internals)
    are resampled at ``s_k + j d``, ``j = -2..2``, through the local
    interpolating polynomial of the ``stencil`` nearest samples, with ``d``
    half the smaller adjacent gap; ``f''`` is the fourth-order central
    difference on that uniform stencil.
    """
    if len(traj) < 5:
        raise ValueError("ode_residual needs at least 5 samples")
    if stencil < 3 or stencil % 2 == 0:
        raise ValueError("stencil must be odd and >= 3")
    half = stencil // 2
    s, f, w = traj.s, traj.f, traj.w
    lo = -math.inf if s_min is None else s_min
    hi = math.inf if s_max is None else s_max
    pts, res = [], []
    for k in range(half, len(s) - half):
        sk = s[k]
        if not (lo <= sk <= hi) or not profile.contains(sk):
            continue
        idx = slice(k - half, k + half + 1)
        gap = min(abs(s[k + 1] - sk), abs(sk - s[k - 1]))
        scale = abs(s[k + 1] - s[k - 1])
        nodes = (s[idx] - sk) / scale
        d = 0.5 * gap / scale
        df = f[idx] - f[k]
        vals = [_lagrange_weights(nodes, j * d) @ df for j in (-2, -1, 1, 2)]
        fpp = (16.0 * (vals[1] + vals[2]) - (vals[0] + vals[3])) / (12.0 * (d * scale) ** 2)
        pts.append(float(sk))
        res.append(fpp - float(generic_rhs(profile, sk, w[k])))
    return ResidualReport(points=pts, residuals=np.array(res), threshold=threshold)


def richardson_order(values: Sequence[float], ratio: float = 2.0) -> float:
    """Observed convergence order from the last three rungs of a step ladder."""
    if len(values) < 3:
        raise ValueError("need at least three ladder rungs")
    a, b, c = values[-3:]
    d1, d2 = abs(a - b), abs(b - c)
    if d2 == 0.0 or d1 == 0.0:
        return math.nan
    return math.log(d1 / d2) / math.log(ratio)


def cubic_bounds(n: int, s: float) -> tuple[float, float]:
    """Extreme real roots of ``x -> q(s, x)`` (with 0 adjoined).

    The leading coefficient is negative for ``s > 0``, so ``q < 0`` beyond
    ``x_plus`` and ``q > 0`` below ``x_minus``.
    """
    if not s > 0:
        raise ValueError("cubic_bounds needs s > 0")
    s2 = s * s
    coeffs = [-s2 * (s2 + 1) * (n * s2 + 1), s2 * s * (s2 + 1), -((n + 2) * s2 + 2), s]
    roots = np.roots(coeffs)
    real = []
    for r in roots:
        if abs(r.imag) > 1e-7 * (1.0 + abs(r)):
            continue
        x = float(r.real)
        for _ in range(50):
            _, q = rotator_pq(n, s, x)
            _, _, dq = rotator_pq_partials(n, s, x)
            if dq == 0.0:
                break
            step = q / dq
            x -= step
            if abs(step) <= 1e-15 * (1.0 + abs(x)):
                break
        real.append(x)
    if not real:
        raise ArithmeticError(f"no real root of the cubic found at s={s!r}")
    x_plus = max(real + [0.0])
    x_minus = min(real + [0.0])
    return x_minus, x_plus


# --- CSV -----------------------------------------------------------------------


def trajectory_csv_text(traj: Trajectory) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["s", "f", "w"])
    for s, f, w in zip(traj.s, traj.f, traj.w):
        writer.writerow([format_number(s), format_number(f), format_number(w)])
    return buf.getvalue()


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(trajectory_csv_text(traj))


def read_trajectory_csv(path: str | Path, profile_label: str = "rotation", n: int | None = None) -> Trajectory:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header[:3]] != ["s", "f", "w"]:
            raise ValueError(f"{path}: expected header s,f,w")
        rows = [tuple(map(float, row[:3])) for row in reader if row]
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    return Trajectory(profile_label, arr[:, 0], arr[:, 1], arr[:, 2], n=n)


def rotator_integrate(n: int, *args, **kwargs) -> Trajectory:
    """Shorthand for ``integrate(rotator_profile(n), ...)``."""
    return integrate(rotator_profile(n), *args, **kwargs)
