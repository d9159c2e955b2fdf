"""Command-line front end.

Every subcommand writes its artifacts into ``--out-dir``.  Exit status is 0 on
success, 1 on a validation error and 2 when an integration ended on a
numerical event (``blow_up`` or ``step_underflow``); artifacts are written in
that case too, with the termination recorded in the ``*_meta.json`` file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import geometry as geo
from .ode_core import (
    IntegratorOptions,
    ResidualReport,
    Trajectory,
    format_number,
    integrate,
    ode_residual,
    read_trajectory_csv,
    trajectory_csv_text,
)
from .phase_plane import find_equilibria, manifold_launch, phase_portrait_svg, rotator_field
from .profiles import dilation_profile, load_profile, rotator_profile, translator_profile
from .singular_launch import LaunchError, bowl_launch, glue_wing, wing_launch

SUBCOMMANDS = ("bowl", "wing", "trajectory", "phase", "verify", "fiber-check")
FAMILIES = ("rotation", "translation", "dilation", "custom")
NUMERICAL_EVENTS = ("blow_up", "step_underflow")
DEFAULT_SEED = 20240527

DEFAULTS = {
    "n": 2,
    "f0": 0.0,
    "s_max": None,
    "s0": 1.0,
    "r0": 0.0,
    "family": "rotation",
    "start": None,
    "to": None,
    "profile": None,
    "box": None,
    "input": None,
    "s": None,
    "s_min": 0.1,
    "verify": False,
    "abs_tol": 1e-12,
    "rel_tol": 1e-10,
    "max_step": math.inf,
    "steps": None,
    "points": [0.2, 0.5, 1.0, 2.0],
    "threshold": None,
    "out_dir": ".",
    "seed": DEFAULT_SEED,
}

# config-file aliases for keys whose flag name differs from the field
ALIASES = {"from": "start", "out-dir": "out_dir"}


class ValidationError(ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError("arguments", message)


# --- argument parsing ------------------------------------------------------------


def _floats(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _common(p):
    g = p.add_argument_group("common")
    g.add_argument("--config", help="JSON RunConfig; explicit flags override it")
    g.add_argument("--out-dir", dest="out_dir", help="directory for artifacts (default: .)")
    g.add_argument("--seed", type=int, help="seed for any random sampling")
    g.add_argument("--abs-tol", dest="abs_tol", type=float)
    g.add_argument("--rel-tol", dest="rel_tol", type=float)
    g.add_argument("--max-step", dest="max_step", type=float)


def _verification(p):
    p.add_argument("--verify", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("--steps", type=_floats, help="FD step ladder, coarse to fine")
    p.add_argument("--points", type=_floats, help="s values for the soliton residual")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="submersion-solitons", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("bowl", help="bowl soliton launched from s = 0")
    p.add_argument("--n", type=int)
    p.add_argument("--f0", type=float)
    p.add_argument("--s-max", dest="s_max", type=float)
    _verification(p)
    _common(p)

    p = sub.add_parser("wing", help="wing-like soliton with vertical tangent at s0")
    p.add_argument("--n", type=int)
    p.add_argument("--s0", type=float)
    p.add_argument("--r0", type=float)
    p.add_argument("--s-max", dest="s_max", type=float)
    _verification(p)
    _common(p)

    p = sub.add_parser("trajectory", help="integrate from interior initial data")
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--n", type=int)
    p.add_argument("--profile", help="JSON profile (family custom)")
    p.add_argument("--from", dest="start", type=_floats, help="S,F,W")
    p.add_argument("--to", type=float)
    p.add_argument("--verify", action="store_true", default=argparse.SUPPRESS)
    _common(p)

    p = sub.add_parser("phase", help="equilibria and phase portrait of the rotator field")
    p.add_argument("--n", type=int)
    p.add_argument("--box", type=_floats, help="S_LO,S_HI,X_LO,X_HI")
    _common(p)

    p = sub.add_parser("verify", help="residual reports for a trajectory CSV")
    p.add_argument("--input", required=False)
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--n", type=int)
    p.add_argument("--profile")
    p.add_argument("--s-min", dest="s_min", type=float)
    p.add_argument("--steps", type=_floats)
    p.add_argument("--points", type=_floats)
    _common(p)

    p = sub.add_parser("fiber-check", help="fibre mean curvature of the rotation submersion")
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--steps", type=_floats)
    _common(p)

    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sp in action.choices.values():
                for a in sp._actions:
                    if a.dest not in ("help", "verify"):
                        a.default = argparse.SUPPRESS
    return parser


def _load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError("config", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError("config", f"{path} is not valid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config", "top level must be an object")
    out = {}
    for key, value in data.items():
        k = ALIASES.get(key, key.replace("-", "_"))
        if k == "subcommand":
            out[k] = value
            continue
        if k not in DEFAULTS:
            raise ValidationError(key, "unknown config field")
        out[k] = value
    return out


_NUMBER_START = re.compile(r"^-(\d|\.\d|inf)")


def _join_negative_values(argv):
    # "--box -0.5,5,-2,2" would otherwise be read as an unknown flag
    out = []
    it = iter(range(len(argv)))
    for i in it:
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NUMBER_START.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            next(it, None)
        else:
            out.append(tok)
    return out


def resolve_config(argv) -> dict:
    """Defaults, then the ``--config`` file, then explicit flags."""
    ns = vars(build_parser().parse_args(_join_negative_values(list(argv))))
    sub = ns.pop("subcommand")
    cfg = dict(DEFAULTS)
    path = ns.pop("config", None)
    if path is not None:
        filecfg = _load_config(path)
        named = filecfg.pop("subcommand", sub)
        if named != sub:
            raise ValidationError("subcommand", f"config is for {named!r}, not {sub!r}")
        cfg.update(filecfg)
    cfg.update(ns)
    cfg["subcommand"] = sub
    return _validate(cfg)


# --- validation ------------------------------------------------------------------


def _real(cfg, key, positive=False, allow_inf=False):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(key, f"expected a number, got {v!r}")
    v = float(v)
    if math.isnan(v) or (math.isinf(v) and not allow_inf):
        raise ValidationError(key, "must be finite")
    if positive and not v > 0:
        raise ValidationError(key, "must be positive")
    cfg[key] = v
    return v


def _list(cfg, key, length=None):
    v = cfg[key]
    if isinstance(v, str):
        v = _floats(v)
    if not isinstance(v, (list, tuple)) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in v
    ):
        raise ValidationError(key, f"expected a list of finite numbers, got {v!r}")
    if length is not None and len(v) != length:
        raise ValidationError(key, f"expected {length} values, got {len(v)}")
    cfg[key] = [float(x) for x in v]
    return cfg[key]


def _validate(cfg: dict) -> dict:
    sub = cfg["subcommand"]
    n = cfg["n"]
    if isinstance(n, bool) or not isinstance(n, int) and not (isinstance(n, float) and n.is_integer()):
        raise ValidationError("n", f"expected an integer, got {n!r}")
    cfg["n"] = int(n)
    if cfg["n"] < 2:
        raise ValidationError("n", "must be >= 2")
    _real(cfg, "abs_tol", positive=True)
    _real(cfg, "rel_tol", positive=True)
    _real(cfg, "max_step", positive=True, allow_inf=True)
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        raise ValidationError("seed", "expected an integer")
    cfg["verify"] = bool(cfg["verify"])

    if cfg["steps"] is None:
        cfg["steps"] = [1e-2, 5e-3, 2.5e-3] if sub == "fiber-check" else [4e-3, 2e-3, 1e-3]
    steps = _list(cfg, "steps")
    if not steps or any(h <= 0 for h in steps) or any(b >= a for a, b in zip(steps, steps[1:])):
        raise ValidationError("steps", "must be positive and strictly decreasing")
    _list(cfg, "points")

    if sub == "bowl":
        if cfg["s_max"] is None:
            cfg["s_max"] = 5.0
        _real(cfg, "f0")
        if _real(cfg, "s_max", positive=True) <= 1e-5:
            raise ValidationError("s_max", "must exceed the launch offset 1e-5")
    elif sub == "wing":
        if cfg["s_max"] is None:
            cfg["s_max"] = 20.0
        _real(cfg, "s0", positive=True)
        _real(cfg, "r0")
        if _real(cfg, "s_max") <= cfg["s0"]:
            raise ValidationError("s_max", "must exceed s0")
    elif sub == "trajectory":
        if cfg["start"] is None:
            raise ValidationError("from", "initial data S,F,W is required")
        _list(cfg, "start", 3)
        if cfg["to"] is None:
            raise ValidationError("to", "target s is required")
        _real(cfg, "to", allow_inf=True)
        _family_check(cfg)
    elif sub == "phase":
        if cfg["box"] is None:
            cfg["box"] = [-0.5, 5.0, -2.0, 2.0]
        b = _list(cfg, "box", 4)
        if not (b[0] < b[1] and b[2] < b[3]):
            raise ValidationError("box", "expected S_LO < S_HI and X_LO < X_HI")
    elif sub == "verify":
        if not cfg["input"]:
            raise ValidationError("input", "a trajectory CSV is required")
        if not os.path.isfile(cfg["input"]):
            raise ValidationError("input", f"{cfg['input']} does not exist")
        _real(cfg, "s_min")
        _family_check(cfg)
    elif sub == "fiber-check":
        if cfg["s"] is None:
            raise ValidationError("s", "the fibre value s is required")
        _real(cfg, "s", positive=True)
        if len(steps) < 2:
            raise ValidationError("steps", "need at least two steps for extrapolation")

    out = Path(str(cfg["out_dir"]))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError("out_dir", f"cannot create {out}: {exc.strerror}") from exc
    if not os.access(out, os.W_OK):
        raise ValidationError("out_dir", f"{out} is not writable")
    cfg["out_dir"] = str(out)
    return cfg


def _family_check(cfg):
    if cfg["family"] not in FAMILIES:
        raise ValidationError("family", f"expected one of {', '.join(FAMILIES)}")
    if cfg["family"] == "custom" and not cfg["profile"]:
        raise ValidationError("profile", "family custom needs --profile")


def _profile(cfg):
    fam = cfg["family"]
    if fam == "rotation":
        return rotator_profile(cfg["n"])
    if fam == "translation":
        return translator_profile(cfg["n"])
    if fam == "dilation":
        return dilation_profile(cfg["n"])
    try:
        return load_profile(cfg["profile"])
    except OSError as exc:
        raise ValidationError("profile", f"cannot read {cfg['profile']}: {exc.strerror}") from exc


# --- output helpers ----------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [_clean(o) for o in obj]
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    return obj


def json_text(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def wing_csv_text(glued) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["s", "f", "branch"])
    for s, f, b in zip(glued.s, glued.f, glued.branch):
        writer.writerow([format_number(s), format_number(f), b])
    return buf.getvalue()


def _options(cfg) -> IntegratorOptions:
    return IntegratorOptions(abs_tol=cfg["abs_tol"], rel_tol=cfg["rel_tol"], max_step=cfg["max_step"])


def _public_config(cfg) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if k != "out_dir"}


def _meta(cfg, trajectories: dict) -> dict:
    return {
        "config": _public_config(cfg),
        "trajectories": {
            name: {
                "launch": t.launch,
                "termination": t.termination,
                "message": t.message,
                "samples": len(t),
                "s_range": [float(t.s[0]), float(t.s[-1])],
                "tolerances": list(t.tolerances) if t.tolerances is not None else None,
            }
            for name, t in trajectories.items()
        },
    }


def _status(trajectories) -> int:
    return 2 if any(t.termination in NUMERICAL_EVENTS for t in trajectories) else 0


def _emit(out: Path, name: str, text: str, written: list) -> None:
    _write(out / name, text)
    written.append(name)


# --- verification ------------------------------------------------------------------


def _usable_points(traj: Trajectory, points, steps, floor: float = 0.0):
    lo, hi = float(np.min(traj.s)), float(np.max(traj.s))
    margin = 2.0 * max(steps)
    return [p for p in points if p > floor and lo + margin * max(1.0, abs(p)) < p < hi - margin * max(1.0, abs(p))]


def rotator_soliton_report(traj: Trajectory, n: int, points, steps, threshold: float = 1e-4) -> ResidualReport:
    """Soliton residual of the rotator patch built from ``traj`` alone."""
    pts = _usable_points(traj, points, steps)
    if not pts:
        raise ValidationError("points", "no residual point lies inside the trajectory")
    patch = geo.embed_rotator_patch(traj, n)
    model = geo.AmbientModel(n + 1, "rotation")
    return geo.soliton_residual(patch, model, geo.rotator_param_points(pts, n), steps, threshold)


def _merge_reports(reports) -> ResidualReport:
    points = [p for r in reports for p in r.points]
    rows = np.vstack([np.atleast_2d(r.residuals) if r.residuals.ndim == 2 else r.residuals[:, None] for r in reports])
    orders = None
    order = None
    if all(r.orders is not None for r in reports):
        orders = [o for r in reports for o in r.orders]
        finite = [o for o in orders if math.isfinite(o)]
        order = float(np.median(finite)) if finite else math.nan
    return ResidualReport(points, rows, reports[0].threshold, reports[0].steps, order, orders)


def _ode_report_all(profile, trajs, s_min, s_max=None) -> ResidualReport:
    pts, res = [], []
    for t in trajs:
        r = ode_residual(profile, t, s_min, s_max)
        pts.extend(r.points)
        res.extend(np.asarray(r.residuals).tolist())
    return ResidualReport(pts, np.array(res), 1e-6)


# --- subcommands ---------------------------------------------------------------------


def run_bowl(cfg, out: Path, written: list) -> int:
    n = cfg["n"]
    traj = bowl_launch(n, cfg["f0"], cfg["s_max"], _options(cfg))
    _emit(out, "bowl.csv", trajectory_csv_text(traj), written)
    _emit(out, "bowl.svg", geo.curve_svg(geo.embed_rotator_curve(traj), mirror=True), written)
    _emit(out, "bowl_meta.json", json_text(_meta(cfg, {"bowl": traj})), written)
    if cfg["verify"]:
        _verify_rotator(traj, n, cfg, out, "bowl", written, ode_floor=cfg["s_min"])
        if n == 2:
            _emit(out, "bowl.obj", geo.write_obj([("bowl", geo.embed_rotator_patch(traj, 2))]), written)
    return _status([traj])


def _verify_rotator(traj, n, cfg, out, stem, written, ode_floor):
    threshold = cfg["threshold"] if cfg["threshold"] is not None else 1e-4
    rep = rotator_soliton_report(traj, n, cfg["points"], cfg["steps"], threshold)
    _emit(out, f"{stem}_residual.json", geo.residual_json_text(rep), written)
    ode = ode_residual(rotator_profile(n), traj, ode_floor)
    _emit(out, f"{stem}_ode_residual.json", geo.residual_json_text(ode), written)
    return rep, ode


def _wing_points(cfg, s0):
    pts = [p for p in cfg["points"] if p > s0 + 0.05]
    return pts or [s0 + d for d in (0.2, 0.5, 1.0, 2.0)]


def run_wing(cfg, out: Path, written: list) -> int:
    n = cfg["n"]
    try:
        curve = wing_launch(n, cfg["s0"], cfg["r0"], cfg["s_max"], _options(cfg))
        glued = glue_wing(curve)
    except LaunchError as exc:
        print(f"numerical event: {exc}", file=sys.stderr)
        return 2
    branches = {"plus": curve.branch_plus, "minus": curve.branch_minus}
    _emit(out, "wing.csv", wing_csv_text(glued), written)
    _emit(out, "wing.svg", geo.curve_svg(geo.embed_rotator_curve(glued)), written)
    meta = _meta(cfg, branches)
    meta["tangent_mismatch"] = glued.tangent_mismatch
    _emit(out, "wing_meta.json", json_text(meta), written)
    if cfg["verify"]:
        threshold = cfg["threshold"] if cfg["threshold"] is not None else 1e-4
        pts = _wing_points(cfg, curve.s0)
        reports = []
        for traj in branches.values():
            usable = _usable_points(traj, pts, cfg["steps"], floor=curve.s0)
            patch = geo.embed_rotator_patch(traj, n)
            model = geo.AmbientModel(n + 1, "rotation")
            reports.append(
                geo.soliton_residual(patch, model, geo.rotator_param_points(usable, n), cfg["steps"], threshold)
            )
        _emit(out, "wing_residual.json", geo.residual_json_text(_merge_reports(reports)), written)
        ode = _ode_report_all(rotator_profile(n), branches.values(), curve.s0 + 0.1)
        _emit(out, "wing_ode_residual.json", geo.residual_json_text(ode), written)
        if n == 2:
            patch = geo.polyline_patch(glued.s, glued.f)
            _emit(out, "wing.obj", geo.write_obj([("wing", patch)], shape=(40, 200)), written)
    return _status(branches.values())


def run_trajectory(cfg, out: Path, written: list) -> int:
    profile = _profile(cfg)
    s, f, w = cfg["start"]
    if not profile.contains(s):
        raise ValidationError("from", f"s={s!r} outside the profile domain {profile.domain}")
    traj = integrate(profile, s, f, w, cfg["to"], _options(cfg))
    _emit(out, "trajectory.csv", trajectory_csv_text(traj), written)
    _emit(out, "trajectory_meta.json", json_text(_meta(cfg, {"trajectory": traj})), written)
    if cfg["verify"] and len(traj) >= 5:
        rep = ode_residual(profile, traj, cfg["s_min"])
        _emit(out, "trajectory_ode_residual.json", geo.residual_json_text(rep), written)
    return _status([traj])


def run_phase(cfg, out: Path, written: list) -> int:
    field_ = rotator_field(cfg["n"])
    box = tuple(cfg["box"])
    eqs = find_equilibria(field_, box)
    curves = []
    diag = math.hypot(box[1] - box[0], box[3] - box[2])
    for eq in eqs:
        if not eq.admissible_saddle:
            continue
        for which in ("unstable", "stable"):
            for side in (+1, -1):
                curves.append(
                    manifold_launch(field_, eq, which, side, arc_length_max=diag, opts=_options(cfg), box=box)
                )
    doc = {
        "n": cfg["n"],
        "box": list(box),
        "equilibria": [
            {
                "location": list(eq.location),
                "eigenvalues": list(eq.eigenvalues),
                "eigenvectors": np.asarray(eq.eigenvectors).T.tolist(),
                "jacobian": np.asarray(eq.jacobian).tolist(),
                "admissible_saddle": bool(eq.admissible_saddle),
            }
            for eq in eqs
        ],
    }
    _emit(out, "phase_equilibria.json", json_text(doc), written)
    _emit(out, "phase.svg", phase_portrait_svg(field_, box, eqs, curves), written)
    return 0


def run_verify(cfg, out: Path, written: list) -> int:
    profile = _profile(cfg)
    traj = read_trajectory_csv(cfg["input"], profile.label, cfg["n"])
    stem = Path(cfg["input"]).stem
    if cfg["family"] == "rotation":
        rep, ode = _verify_rotator(traj, cfg["n"], cfg, out, stem, written, ode_floor=cfg["s_min"])
        print(f"soliton residual max {format_number(rep.max_abs)} order {format_number(rep.order)}")
    else:
        ode = ode_residual(profile, traj, cfg["s_min"])
        _emit(out, f"{stem}_ode_residual.json", geo.residual_json_text(ode), written)
    print(f"ode residual max {format_number(ode.max_abs)}")
    return 0


def fiber_report(n: int, s: float, steps, seed: int = DEFAULT_SEED) -> dict:
    """Fibre mean curvature ladder with Richardson extrapolation, and the
    gradient norm at 100 seeded points of the fibre."""
    values = [geo.fiber_check(n, s, h)[0] for h in steps]
    ratio = steps[-2] / steps[-1]
    extrap = values[-1] + (values[-1] - values[-2]) / (ratio**2 - 1.0)
    formula = (n - 1) * s / math.sqrt(1.0 + s * s)
    rng = np.random.default_rng(seed)
    model = geo.AmbientModel(n, "rotation")
    devs = []
    for x1 in rng.uniform(0.1, 10.0, 100):
        x = np.zeros(n)
        x[0] = x1
        x[-1] = s * x1
        if n > 2:
            x[1:-1] = rng.uniform(-5.0, 5.0, n - 2)
        gp = geo.grad_pi(x)
        devs.append(abs(geo.metric_eval(model, x, gp, gp) - (1.0 + s * s)))
    rel = abs(extrap - formula) / abs(formula)
    return {
        "n": n,
        "s": s,
        "steps": list(steps),
        "h_numeric": values,
        "h_richardson": extrap,
        "h_formula": formula,
        "rel_error": rel,
        "grad_pi_norm_sq": geo.fiber_check(n, s, steps[-1])[1],
        "one_plus_s2": 1.0 + s * s,
        "grad_pi_max_deviation": max(devs),
        "seed": seed,
        "passed": bool(rel <= 1e-6 and max(devs) <= 1e-10),
    }


def run_fiber(cfg, out: Path, written: list) -> int:
    doc = fiber_report(cfg["n"], cfg["s"], cfg["steps"], cfg["seed"])
    _emit(out, "fiber_check.json", json_text(doc), written)
    print(f"h_numeric {format_number(doc['h_richardson'])} formula {format_number(doc['h_formula'])}")
    return 0


RUNNERS = {
    "bowl": run_bowl,
    "wing": run_wing,
    "trajectory": run_trajectory,
    "phase": run_phase,
    "verify": run_verify,
    "fiber-check": run_fiber,
}


def run(cfg: dict) -> int:
    out = Path(cfg["out_dir"])
    written: list = []
    status = RUNNERS[cfg["subcommand"]](cfg, out, written)
    for name in written:
        print(out / name)
    return status


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = resolve_config(argv)
        return run(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
