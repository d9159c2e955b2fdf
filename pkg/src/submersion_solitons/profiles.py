"""Submersion data (alpha, phi_hat, h, n) feeding the reduced soliton ODE.

A profile describes a Riemannian submersion onto a weighted interval
``(J, alpha(s) ds^2)`` together with the reduced warping function ``phi_hat``
and the (constant) mean curvature ``h(s)`` of each fibre.  Three families come
from the Killing fields of hyperbolic space (rotation, translation, dilation);
anything else can be described by a small JSON document.
"""

from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "DomainError",
    "ProfileError",
    "SubmersionProfile",
    "rotator_profile",
    "translator_profile",
    "dilation_profile",
    "custom_profile",
    "load_profile",
    "parse_expression",
]

ScalarFn = Callable[[Any], Any]


class DomainError(ValueError):
    """Evaluation outside the open domain of a profile."""


class ProfileError(ValueError):
    """A profile description is malformed or violates an invariant."""


def _central_difference(fn: ScalarFn, lo: float, hi: float) -> ScalarFn:
    # fourth-order five-point stencil; the step scales with the distance to the
    # open endpoints so the stencil stays inside and resolves 1/s-type growth
    def deriv(s):
        s = np.asarray(s, dtype=float)
        reach = 1.0 + np.abs(s)
        reach = np.minimum(reach, s - lo)
        if math.isfinite(hi):
            reach = np.minimum(reach, hi - s)
        h = 1e-3 * reach
        out = (8.0 * (fn(s + h) - fn(s - h)) - (fn(s + 2 * h) - fn(s - 2 * h))) / (12.0 * h)
        return float(out) if out.ndim == 0 else out

    return deriv


@dataclass(frozen=True)
class SubmersionProfile:
    """Data of a submersive warped product, restricted to the base interval.

    Evaluation methods reject points outside the open ``domain``; the
    endpoints are singular or degenerate for every built-in family, so they
    are never clamped.
    """

    n: int
    domain: tuple[float, float]
    alpha_fn: ScalarFn = field(repr=False)
    alpha_prime_fn: ScalarFn = field(repr=False)
    phi_hat_fn: ScalarFn = field(repr=False)
    phi_hat_prime_fn: ScalarFn = field(repr=False)
    h_fn: ScalarFn = field(repr=False)
    label: str = "custom"

    def contains(self, s) -> bool:
        lo, hi = self.domain
        s = np.asarray(s, dtype=float)
        return bool(np.all((s > lo) & (s < hi)))

    def _check(self, s):
        if not self.contains(s):
            raise DomainError(
                f"s={s!r} outside the open domain {self.domain} of the {self.label} profile"
            )

    def alpha(self, s):
        self._check(s)
        return self.alpha_fn(s)

    def alpha_prime(self, s):
        self._check(s)
        return self.alpha_prime_fn(s)

    def phi_hat(self, s):
        self._check(s)
        return self.phi_hat_fn(s)

    def phi_hat_prime(self, s):
        self._check(s)
        return self.phi_hat_prime_fn(s)

    def h(self, s):
        self._check(s)
        return self.h_fn(s)

    def sample_points(self, count: int = 100) -> np.ndarray:
        """Deterministic interior points; unbounded domains are mapped by t/(1-t)."""
        lo, hi = self.domain
        t = (np.arange(count) + 0.5) / count
        if math.isfinite(hi):
            return lo + (hi - lo) * t
        return lo + t / (1.0 - t)

    def validate(self, points=None, rtol: float = 1e-6) -> None:
        """Check positivity of alpha, phi_hat and consistency of the derivatives.

        Raises
        ------
        ProfileError
            Naming the first offending ``s``.
        """
        pts = self.sample_points() if points is None else np.asarray(points, dtype=float)
        lo, hi = self.domain
        for s in pts:
            s = float(s)
            a = self.alpha_fn(s)
            ph = self.phi_hat_fn(s)
            if not (math.isfinite(a) and a > 0):
                raise ProfileError(f"alpha is not positive at s={s!r} (alpha={a!r})")
            if not (math.isfinite(ph) and ph > 0):
                raise ProfileError(f"phi_hat is not positive at s={s!r} (phi_hat={ph!r})")
            if not math.isfinite(self.h_fn(s)):
                raise ProfileError(f"h is not finite at s={s!r}")
            step = 1e-6 * (1.0 + abs(s))
            step = min(step, 0.5 * (s - lo), 0.5 * (hi - s))
            for name, fn, dfn, val in (
                ("alpha", self.alpha_fn, self.alpha_prime_fn, a),
                ("phi_hat", self.phi_hat_fn, self.phi_hat_prime_fn, ph),
            ):
                fd = (fn(s + step) - fn(s - step)) / (2.0 * step)
                d = dfn(s)
                scale = max(abs(fd), abs(val) / (1.0 + abs(s)))
                if not abs(d - fd) <= rtol * scale:
                    raise ProfileError(
                        f"{name}_prime disagrees with central differences at s={s!r}: "
                        f"{d!r} vs {fd!r}"
                    )


def _require_dimension(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise ProfileError(f"dimension n must be an integer >= 2, got {n!r}")
    return int(n)


def rotator_profile(n: int) -> SubmersionProfile:
    """Rotation family: pi(x) = x_n / x_1 on the half-space, J = (0, inf)."""
    n = _require_dimension(n)
    return SubmersionProfile(
        n=n,
        domain=(0.0, math.inf),
        alpha_fn=lambda s: 1.0 / (1.0 + s * s),
        alpha_prime_fn=lambda s: -2.0 * s / (1.0 + s * s) ** 2,
        phi_hat_fn=lambda s: s * s,
        phi_hat_prime_fn=lambda s: 2.0 * s,
        h_fn=lambda s: (n - 1) * s / np.sqrt(1.0 + s * s),
        label="rotation",
    )


def translator_profile(n: int) -> SubmersionProfile:
    """Translation family along x_{n+1}: pi(x) = x_1, J = (0, inf)."""
    n = _require_dimension(n)
    return SubmersionProfile(
        n=n,
        domain=(0.0, math.inf),
        alpha_fn=lambda s: 1.0 / (s * s),
        alpha_prime_fn=lambda s: -2.0 / s**3,
        phi_hat_fn=lambda s: 1.0 / (s * s),
        phi_hat_prime_fn=lambda s: -2.0 / s**3,
        h_fn=lambda s: -(n - 1) + 0.0 * s,
        label="translation",
    )


def dilation_profile(n: int) -> SubmersionProfile:
    """Dilation family: pi(x) = x_1 on the upper unit hemisphere, J = (0, 1)."""
    n = _require_dimension(n)
    return SubmersionProfile(
        n=n,
        domain=(0.0, 1.0),
        alpha_fn=lambda s: 1.0 / (1.0 - s * s),
        alpha_prime_fn=lambda s: 2.0 * s / (1.0 - s * s) ** 2,
        phi_hat_fn=lambda s: 1.0 / (s * s),
        phi_hat_prime_fn=lambda s: -2.0 / s**3,
        h_fn=lambda s: -2.0 * (n - 1) * s / np.sqrt(1.0 - s * s),
        label="dilation",
    )


# --- expression grammar for custom profiles ---------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sqrt": np.sqrt, "log": np.log, "exp": np.exp}


def parse_expression(text: str, constants: dict[str, float] | None = None) -> ScalarFn:
    """Compile a restricted arithmetic expression in the variable ``s``.

    Supported: ``+ - * / ^`` (``**`` also accepted), ``sqrt``, ``log``,
    ``exp``, numeric literals, ``s`` and any names in ``constants``
    (custom profiles bind ``n``).  Unicode minus and middle dot are accepted.
    """
    constants = dict(constants or {})
    src = (
        text.replace("^", "**").replace("−", "-").replace("·", "*").replace("⋅", "*")
    )
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ProfileError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def check(node):
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            check(node.operand)
        elif isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
                raise ProfileError(f"unsupported function in {text!r}")
            if len(node.args) != 1 or node.keywords:
                raise ProfileError(f"functions take exactly one argument in {text!r}")
            check(node.args[0])
        elif isinstance(node, ast.Name):
            if node.id != "s" and node.id not in constants:
                raise ProfileError(f"unknown name {node.id!r} in {text!r}")
        elif isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ProfileError(f"unsupported literal in {text!r}")
        else:
            raise ProfileError(f"unsupported syntax {type(node).__name__} in {text!r}")

    check(tree)

    def evaluate(node, s):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](evaluate(node.left, s), evaluate(node.right, s))
        if isinstance(node, ast.UnaryOp):
            return _UNOPS[type(node.op)](evaluate(node.operand, s))
        if isinstance(node, ast.Call):
            return _FUNCS[node.func.id](evaluate(node.args[0], s))
        if isinstance(node, ast.Name):
            return s if node.id == "s" else constants[node.id]
        return float(node.value)

    body = tree.body

    def fn(s):
        s_arr = np.asarray(s, dtype=float)
        with np.errstate(all="ignore"):
            out = evaluate(body, s_arr) + 0.0 * s_arr
        return float(out) if np.ndim(out) == 0 else out

    return fn


def _component(desc, name: str, n: int) -> ScalarFn:
    if callable(desc):
        return desc
    if isinstance(desc, (int, float)) and not isinstance(desc, bool):
        value = float(desc)
        return lambda s: value + 0.0 * np.asarray(s, dtype=float)
    if isinstance(desc, str):
        return parse_expression(desc, {"n": float(n)})
    if isinstance(desc, dict) and "s" in desc and "values" in desc:
        xs = np.asarray(desc["s"], dtype=float)
        ys = np.asarray(desc["values"], dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 4:
            raise ProfileError(f"{name}: tabulated samples need matching 1-D arrays of length >= 4")
        if np.any(np.diff(xs) <= 0):
            raise ProfileError(f"{name}: tabulated s values must be strictly increasing")
        spline = CubicSpline(xs, ys)
        return lambda s: spline(s) + 0.0 if np.ndim(s) else float(spline(s))
    raise ProfileError(f"{name}: expected a number, expression string or {{'s','values'}} table")


def custom_profile(definition: dict) -> SubmersionProfile:
    """Build and validate a profile from a description.

    ``definition`` keys: ``n``, ``domain`` ([lo, hi], hi may be ``None``/``"inf"``),
    ``alpha``, ``phi_hat``, ``h`` and optionally ``alpha_prime``,
    ``phi_hat_prime`` and ``label``.  Components are numbers, expression
    strings, tabulated ``{"s": [...], "values": [...]}`` or callables.  Missing
    derivatives fall back to central differences.
    """
    try:
        n = _require_dimension(definition["n"])
        lo, hi = definition["domain"]
        alpha_desc, phi_desc, h_desc = definition["alpha"], definition["phi_hat"], definition["h"]
    except KeyError as exc:
        raise ProfileError(f"profile description lacks {exc.args[0]!r}") from None
    lo = float(lo)
    hi = math.inf if hi is None or hi in ("inf", "+inf", "Infinity") else float(hi)
    if not lo < hi:
        raise ProfileError(f"empty domain ({lo}, {hi})")

    alpha = _component(alpha_desc, "alpha", n)
    phi_hat = _component(phi_desc, "phi_hat", n)
    h = _component(h_desc, "h", n)
    if "alpha_prime" in definition:
        alpha_prime = _component(definition["alpha_prime"], "alpha_prime", n)
    else:
        alpha_prime = _central_difference(alpha, lo, hi)
    if "phi_hat_prime" in definition:
        phi_hat_prime = _component(definition["phi_hat_prime"], "phi_hat_prime", n)
    else:
        phi_hat_prime = _central_difference(phi_hat, lo, hi)

    profile = SubmersionProfile(
        n=n,
        domain=(lo, hi),
        alpha_fn=alpha,
        alpha_prime_fn=alpha_prime,
        phi_hat_fn=phi_hat,
        phi_hat_prime_fn=phi_hat_prime,
        h_fn=h,
        label=str(definition.get("label", "custom")),
    )
    profile.validate()
    return profile


def load_profile(path: str | Path) -> SubmersionProfile:
    """Read a custom profile from a JSON document."""
    with open(path, encoding="utf-8") as fh:
        definition = json.load(fh)
    if not isinstance(definition, dict):
        raise ProfileError("profile JSON must be an object")
    return custom_profile(definition)
