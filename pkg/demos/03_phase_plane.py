# The planar system s' = p(s), x' = q(s, x) and its saddle at the origin.
import sys
from pathlib import Path

from submersion_solitons.ode_core import integrate
from submersion_solitons.phase_plane import (
    curve_to_solution,
    find_equilibria,
    manifold_launch,
    phase_portrait_svg,
    rotator_field,
)
from submersion_solitons.profiles import rotator_profile
from submersion_solitons.singular_launch import bowl_launch

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out.mkdir(exist_ok=True)

field = rotator_field(2)
box = (-0.5, 5.0, -2.0, 2.0)
eqs = find_equilibria(field, box)
for eq in eqs:
    print("equilibrium", eq.location, "eigenvalues", eq.eigenvalues, "saddle", eq.admissible_saddle)
    print("jacobian\n", eq.jacobian)

# The unstable curve leaves along (3, 1): slope 1/3, the bowl's initial slope.
saddle = eqs[0]
print("unstable direction", saddle.eigenvectors[:, 0])
curve = manifold_launch(field, saddle, "unstable", +1, arc_length_max=0.5)
sol = curve_to_solution(curve, field, n=2)
cont = integrate(rotator_profile(2), sol.s[-1], sol.f[-1], sol.w[-1], 1.5)
bowl = bowl_launch(2, 0.0, 1.5)
print("w(1) from the manifold:", float(cont.interpolate(1.0)[1]))
print("w(1) from the series:  ", float(bowl.interpolate(1.0)[1]))

curves = [manifold_launch(field, saddle, which, side, arc_length_max=8.0, box=box)
          for which in ("unstable", "stable") for side in (1, -1)]
phase_portrait_svg(field, box, eqs, curves, out / "phase.svg")
print("wrote", out / "phase.svg")
