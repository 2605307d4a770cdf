# %% [markdown]
# # Radial average from a single boundary point
# With every ray starting and ending at one point, only the radial average
# ``a_0`` is recoverable.  Long coprime orbits ``(n, m)`` see only harmonics
# divisible by ``n``, so their mean approaches the chord average ``g(z)``,
# which is inverted with the zeroth Abel transform.

# %%
import numpy as np
from scipy.integrate import trapezoid

from brokenray.field import phantom, uniform_grid
from brokenray.forward import simulate
from brokenray.reconstruct import build_singleton_plan, convergence_study, reconstruct_a0_singleton

grid = uniform_grid(512)
ring = phantom("ring", grid)

# %% [markdown]
# Mean along coprime orbits through the point minus the chord average: the
# ripple harmonics (orders 4 to 40) drop out once ``n`` exceeds 40.

# %%
for n, dev in convergence_study(ring, 0.0, [8, 16, 32, 41, 64, 128, 512]):
    print(f"n={n:4d}  max |G f - g(z)| = {dev:.2e}")

# %%
for n_min in (16, 64, 512):
    plan = build_singleton_plan(0.0, n_min=n_min)
    a0 = reconstruct_a0_singleton(simulate(ring, plan.rays), plan, grid)
    rel = np.sqrt(trapezoid((a0.values - ring.a[0]) ** 2, grid) / trapezoid(ring.a[0] ** 2, grid))
    print(f"n_min={n_min:4d}  rays={len(plan.rays)}  relative L2 error of a_0 = {rel:.2e}")

# %%
for r in (0.0, 0.3, 0.5, 0.6, 0.7, 0.9):
    i = int(round(r * 512))
    print(f"r={r:.1f}  a_0 true {ring.a[0][i]:+.6f}  recovered {a0.values[i]:+.6f}")
