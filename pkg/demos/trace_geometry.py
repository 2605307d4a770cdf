# %% [markdown]
# # Broken rays in the unit disk
# A broken ray enters at boundary angle ``iota``, reflects ``n - 1`` times
# with equal angles and leaves at ``kappa``.  Every chord sits at the same
# distance ``z = cos(alpha/2)`` from the origin.

# %%
import math

import numpy as np

from brokenray.geometry import make_ray, reflect_check, trace, trace_csv

# %%
for n, m, iota, kappa in [(3, 1, 0.0, 0.0), (2, 1, 0.4, 0.4), (7, 2, 0.1, 0.9), (40, 7, 0.1, 2.0)]:
    ray = make_ray(n, m, iota, kappa)
    pts = trace(ray)
    radii = np.hypot(pts[:, 0], pts[:, 1])
    print(f"n={n:3d} m={m:2d}  alpha={ray.alpha:.6f}  z={ray.z:.6f}  length={ray.length:.6f}  "
          f"max| |v|-1 |={np.max(np.abs(radii - 1)):.1e}  specular={reflect_check(ray)}")

# %% [markdown]
# The vertex list is plain CSV, ready for any plotting tool.

# %%
print(trace_csv(make_ray(5, 2, 0.0, 0.0)))

# %% [markdown]
# Closed orbits ``(n, m)`` with ``gcd(n, m) = g > 1`` retrace the orbit
# ``(n/g, m/g)`` ``g`` times, so they carry no new information.

# %%
a, b = trace(make_ray(6, 2, 0.3, 0.3)), trace(make_ray(3, 1, 0.3, 0.3))
print("retraced orbit matches:", np.allclose(a[:4], b, atol=1e-14), math.gcd(6, 2))
