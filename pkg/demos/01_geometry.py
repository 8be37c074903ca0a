"""Geometry tour: the Lorentz model, wrapped Gaussians and hyperbolic kernels.

Run: python3 demos/01_geometry.py
"""

import numpy as np
from scipy import integrate

from gphdm import kernels as kn
from gphdm import manifold as mf
from gphdm.kernels import KernelParams
from gphdm.stats import WrappedGaussian, log_density

rng = np.random.default_rng(0)

# --- points, exp/log, distances -------------------------------------------------------
mu = mf.origin(2)
v = np.array([1.5, -0.5])                      # tangent vector in local coordinates
x = mf.exp_local(mu, v)
print("exp_mu(v) =", x, " <x,x>_L =", mf.lorentz_inner(x, x))
print("log_mu(x) recovers v:", mf.local_log(mu, x))
print("d(mu, x) = |v| =", mf.distance(mu, x), np.linalg.norm(v))

# --- a wrapped Gaussian integrates to one ------------------------------------------------
d = WrappedGaussian(mu, np.array([[0.8, 0.3], [0.3, 0.4]]))


def density(r, th):
    p = mf.exp_local(mu, np.array([r * np.cos(th), r * np.sin(th)]))
    return np.exp(log_density(d, p)) * np.sinh(r)   # sinh(r) is the H2 area element


mass = integrate.dblquad(density, 0, 2 * np.pi, 0, 12)[0]
print(f"wrapped Gaussian mass over H2: {mass:.8f}")
samples = d.sample(5, rng)
print("five samples, Poincare disk:\n", mf.poincare_from_lorentz(samples))

# --- SE kernels decay with geodesic distance --------------------------------------------
p = KernelParams(lengthscale=1.0)
for rho in (0.0, 0.5, 1.0, 2.0, 3.0):
    z = mf.exp_local(mu, np.array([rho, 0.0]))
    z3 = mf.exp_local(mf.origin(3), np.array([rho, 0.0, 0.0]))
    print(f"rho={rho:3.1f}  k_H2={kn.se_kernel_h2(mu, z, p):.5f}  "
          f"k_H3={kn.se_kernel_h3(mf.origin(3), z3, p):.5f}  k_R={np.exp(-rho**2 / 2):.5f}")

pts = mf.random_points(rng, 200, 2)
print("min eigenvalue of a 200-point H2 Gram matrix:",
      np.linalg.eigvalsh(kn.gram(pts, p, "h2")).min())
