"""Dormand-Prince 5(4) stepper with PI step-size control.

Internal engine shared by the reduced ODE, the inverse-function equation of
the wing construction and the planar phase field.  All emitted samples are
accepted integrator states; terminal events are located by re-stepping from
the last accepted state (secant on the step length), never by interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# Butcher tableau (Dormand & Prince 1980)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)

_SAFETY = 0.9
_ALPHA = 0.7 / 5.0
_BETA = 0.4 / 5.0
_FAC_MIN = 0.2
_FAC_MAX = 5.0


@dataclass
class DopriResult:
    t: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    reason: str
    message: str = ""


def _step(fun, t, y, k1, h):
    k = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], k))
        k.append(fun(t + _C[i] * h, yi))
    y_new = y + h * sum(b * kj for b, kj in zip(_B[:6], k[:6]))
    err = h * sum(e * kj for e, kj in zip(_E, k))
    return y_new, k[6], err


def _err_norm(err, y, y_new, atol, rtol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(fun, t0, y0, f0, direction, atol, rtol, h_max):
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, h_max)
    y1 = y0 + direction * h0 * f0
    f1 = fun(t0 + direction * h0, y1)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, h_max)


def dopri5(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_end: float,
    *,
    rtol: float,
    atol: float,
    max_step: float = math.inf,
    min_step: float = 1e-14,
    first_step: Optional[float] = None,
    guard: Optional[Callable[[float, np.ndarray], Optional[str]]] = None,
    event: Optional[Callable[[float, np.ndarray], float]] = None,
    end_reason: str = "reached_end",
    max_steps: int = 2_000_000,
) -> DopriResult:
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``t_end``.

    ``guard(t, y)`` is consulted after every accepted step and may return a
    termination tag.  ``event(t, y)`` is a terminal event function; the run
    stops on the state where it crosses zero (tag ``"event"``).  If a step is
    rejected below ``min_step`` the run stops with ``"step_underflow"``.
    """
    y0 = np.asarray(y0, dtype=float)
    ts = [float(t0)]
    ys = [y0.copy()]
    f = np.asarray(fun(t0, y0), dtype=float)
    dys = [f.copy()]
    if t_end == t0:
        return DopriResult(np.array(ts), np.array(ys), np.array(dys), end_reason)

    direction = 1.0 if t_end > t0 else -1.0
    t, y = float(t0), y0
    h_max = min(max_step, abs(t_end - t0))
    if first_step is not None:
        h = min(first_step, h_max)
    else:
        h = _initial_step(fun, t, y, f, direction, atol, rtol, h_max)
    err_prev = 1e-4
    g_prev = event(t, y) if event is not None else None

    for _ in range(max_steps):
        tiny = max(min_step, 4.0 * np.spacing(abs(t)))
        remaining = abs(t_end - t)
        last = False
        if h >= remaining:
            h = remaining
            last = True

        while True:
            if h < tiny and not last:
                return DopriResult(
                    np.array(ts), np.array(ys), np.array(dys), "step_underflow",
                    f"step {h:.3e} below minimum at t={t!r}",
                )
            y_new, f_new, err = _step(fun, t, y, f, direction * h)
            if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(f_new))):
                en = math.inf
            else:
                en = _err_norm(err, y, y_new, atol, rtol)
            if en <= 1.0:
                break
            last = False
            fac = _SAFETY * en ** (-0.2) if math.isfinite(en) else _FAC_MIN
            h *= max(_FAC_MIN, min(1.0, fac))

        t_new = t_end if last else t + direction * h

        if event is not None:
            g_new = event(t_new, y_new)
            if g_new == 0.0 or (g_prev != 0.0 and (g_prev < 0) != (g_new < 0)):
                t_ev, y_ev, f_ev = _locate(fun, event, t, y, f, direction * h, g_prev, g_new)
                ts.append(t_ev)
                ys.append(y_ev)
                dys.append(f_ev)
                return DopriResult(np.array(ts), np.array(ys), np.array(dys), "event")
            g_prev = g_new

        t, y, f = t_new, y_new, f_new
        ts.append(t)
        ys.append(y.copy())
        dys.append(f.copy())

        if guard is not None:
            tag = guard(t, y)
            if tag is not None:
                return DopriResult(np.array(ts), np.array(ys), np.array(dys), tag)
        if last:
            return DopriResult(np.array(ts), np.array(ys), np.array(dys), end_reason)

        en = max(en, 1e-10)
        fac = _SAFETY * en ** (-_ALPHA) * err_prev ** _BETA
        h = min(h * max(_FAC_MIN, min(_FAC_MAX, fac)), max_step)
        err_prev = en

    return DopriResult(
        np.array(ts), np.array(ys), np.array(dys), "step_underflow", "step budget exhausted"
    )


def _locate(fun, event, t, y, f, h, g0, g1, iters: int = 60):
    """Secant/bisection on the step length so the event value vanishes."""
    lo, hi = 0.0, h
    glo, ghi = g0, g1
    best = None
    for _ in range(iters):
        if ghi == glo:
            mid = 0.5 * (lo + hi)
        else:
            mid = hi - ghi * (hi - lo) / (ghi - glo)
            if not (min(lo, hi) < mid < max(lo, hi)):
                mid = 0.5 * (lo + hi)
        y_mid, f_mid, _ = _step(fun, t, y, f, mid)
        g_mid = event(t + mid, y_mid)
        best = (t + mid, y_mid, f_mid)
        if g_mid == 0.0 or abs(hi - lo) <= 4.0 * np.spacing(abs(t) + abs(h)):
            break
        if (g_mid < 0) == (glo < 0):
            lo, glo = mid, g_mid
        else:
            hi, ghi = mid, g_mid
        if abs(g_mid) <= 1e-15 * (1.0 + abs(g0)):
            break
    return best
