# Check the soliton equation H = g(K, nu) on the embedded surface by finite differences.
import math

from submersion_solitons import geometry as geo
from submersion_solitons.singular_launch import bowl_launch, wing_launch

model = geo.AmbientModel(3, "rotation")
points = geo.rotator_param_points([0.2, 0.5, 1.0, 2.0], 2)

bowl = bowl_launch(2, 0.0, 5.0)
rep = geo.soliton_residual(geo.embed_rotator_patch(bowl, 2), model, points)
print("bowl residuals per step", rep.steps)
print(rep.residuals)
print("max", rep.max_abs, "order", rep.order)

wing = wing_launch(2, 0.1, 0.0, 20.0)
for name, branch in (("plus", wing.branch_plus), ("minus", wing.branch_minus)):
    r = geo.soliton_residual(geo.embed_rotator_patch(branch, 2), model, points)
    print(f"wing {name}: max {r.max_abs:.2e} order {r.order:.2f}")

# A plane through the axis is totally geodesic, so H = 0 while g(K, nu) is not.
frame = geo.surface_frame(geo.polyline_patch([0.5, 1.0, 2.0], [0.0, 0.0, 0.0]), [1.0, 1.0])
print("flat plane H =", frame["H"], " g(K, nu) =", geo.metric_eval(model, frame["x"], geo.killing_eval(model, frame["x"]), frame["nu"]))

# The fibres x_n = s x_1 of the submersion have mean curvature (n-1)s/sqrt(1+s^2).
for n, s in ((2, 1.0), (3, 0.1)):
    h, norm2 = geo.fiber_check(n, s)
    print(f"n={n} s={s}: fibre H {h:.10f} formula {(n - 1) * s / math.sqrt(1 + s * s):.10f} |grad pi|^2 {norm2:g}")

# The Killing equation holds up to an O(step^2) finite-difference error.
for family in geo.KILLING_FAMILIES:
    m = geo.AmbientModel(3, family)
    vals = [geo.killing_lie_residual(m, [1.2, 0.3, -0.4], [0.2, 1.0, 0.5], [1.0, -0.3, 0.7], h) for h in (1e-2, 5e-3)]
    print(family, "residuals", vals, "ratio", vals[0] / vals[1])
