"""Simpson quadrature on boxes plus the small-strain elasticity kit.

Composite Simpson weights are exact for cubics along each axis, and the
tensor product keeps that exactness for separable integrands on boxes.
Faces reuse the same per-axis weights. The second half assembles strain,
stress, strain energy, and von Mises stress for the cantilever material
and prints the non-dimensional constants actually used in training.
"""

import numpy as np

from sepelast.mechanics import (
    lame_constants,
    nondim_forward,
    strain,
    stress,
    von_mises,
)
from sepelast.problems import beam_problem
from sepelast.quadrature import (
    BoxDomain,
    face_quadrature,
    simpson_weights,
    tensor_quadrature,
)

# -- one axis ---------------------------------------------------------------

xs = np.linspace(0.0, 2.0, 9)
w = simpson_weights(9, 0.0, 2.0)
print("axis [0, 2], 9 nodes")
for k in range(5):
    got = (w * xs**k).sum()
    want = 2.0 ** (k + 1) / (k + 1)
    print("  integral x^%d = %.12f  (exact %.12f)" % (k, got, want))
print("  cubics integrate exactly, quartics pick up the Simpson error")

# -- boxes and faces ----------------------------------------------------------

box = BoxDomain((0.0, 0.0, 0.0), (1.0, 0.1, 0.1), (33, 9, 9))
quad = tensor_quadrature(box)
print("\nbeam box: volume %.6f, weights sum %.6f" % (box.volume(), quad.weights.sum()))

face = face_quadrature(box, "z+")
print("top face: area %.6f, weights sum %.6f"
      % (0.1, face.tangent_weights.sum()))

# -- constitutive round trip ---------------------------------------------------

problem = beam_problem()
lam, mu = lame_constants(problem.material)
print("\nmaterial: E=%.3e  nu=%.2f  ->  lambda=%.4e  mu=%.4e"
      % (problem.material.youngs_modulus, problem.material.poisson_ratio, lam, mu))

g = np.array([[1e-4, 2e-5, 0.0], [2e-5, -3e-5, 1e-5], [0.0, 1e-5, 5e-5]])
eps = strain(g)
sig = stress(eps, lam, mu)
dens = 0.5 * sig.contract(eps)
print("sample displacement gradient:")
print("  tr(eps) = %.3e" % float(eps.trace()))
print("  energy density 0.5 sigma:eps = %.6e" % float(dens))
print("  von Mises = %.6e" % float(von_mises(sig)))

shift = 1e6
sig_shifted = stress(eps, lam, mu)
sig_shifted = type(sig)(sig.xx + shift, sig.yy + shift, sig.zz + shift,
                        sig.xy, sig.xz, sig.yz)
print("  von Mises after +1e6 hydrostatic shift = %.6e (unchanged)"
      % float(von_mises(sig_shifted)))

# -- non-dimensional constants --------------------------------------------------

nd = nondim_forward(problem.material, problem.scale)
print("\nnon-dimensional training constants (length %.1f m, displacement %.0e m):"
      % (problem.scale.length, problem.scale.displacement))
print("  lambda = %.6f   mu = %.6f" % (nd.lam, nd.mu))
print("  body force (self weight) = %.6f" % nd.rho_g)
print("  traction scale = %.6f" % nd.traction)
print("  stress scale sigma_c = %.6e Pa" % problem.scale.stress)
