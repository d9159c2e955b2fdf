# Wing-like solitons: two branches meeting with a vertical tangent at (s0, r0).
import sys
from pathlib import Path

import numpy as np

from submersion_solitons import geometry as geo
from submersion_solitons.singular_launch import glue_wing, wing_gamma_rhs, wing_launch

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out.mkdir(exist_ok=True)

# In the inverse chart s = gamma(r) the vertex is a regular point with gamma' = 0.
for n, s0 in ((2, 0.5), (2, 1.0), (3, 2.0)):
    print(f"n={n} s0={s0}: gamma''(r0) = {wing_gamma_rhs(n, s0, 0.0):g}")

curve = wing_launch(2, s0=1.0, r0=0.0, s_max=20.0)
print("hand-off at |gamma'| =", curve.delta_switch)
for name, branch in (("plus", curve.branch_plus), ("minus", curve.branch_minus)):
    print(f"{name}: w near s0 = {branch.w[0]:.4g}, f(20) = {branch.f[-1]:.6f}, {branch.termination}")

# Gluing walks the minus branch in, across the vertex, and the plus branch out.
glued = glue_wing(curve)
print("glued samples:", len(glued), "tangent mismatch:", glued.tangent_mismatch)
print("minimum s:", glued.s.min(), "at f =", glued.f[int(np.argmin(glued.s))])

geo.curve_svg(geo.embed_rotator_curve(glued), out / "wing.svg")
print("wrote", out / "wing.svg")
