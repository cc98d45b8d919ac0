"""Gradients from the in-package tape and dual numbers.

Reverse mode: run the computation on a Var payload, read d(loss)/d(theta)
for the whole flat vector from one backward sweep. Forward mode: push a
Dual with unit tangent through a function to get directional derivatives.
The training losses nest the two, so the script ends by differentiating
a loss that itself contains a derivative.
"""

import numpy as np

from sepelast import autodiff as ad
from sepelast.models import MlpSpec, init_params, mlp_apply, unflatten

rng = np.random.default_rng(0)

# -- reverse mode on a quadratic form -------------------------------------

A = rng.standard_normal((6, 6))
A = 0.5 * (A + A.T)
x0 = rng.standard_normal(6)


def quadratic(x):
    row = x.reshape(1, -1)
    return 0.5 * ((row @ A) * row).sum()


value, g = ad.value_and_grad(quadratic, x0)
print("quadratic form value      %.6f" % value)
print("|grad - A x| (analytic)   %.3e" % np.abs(g - A @ x0).max())

# -- reverse mode through a small network ----------------------------------

spec = MlpSpec((2, 16, 16, 1), "tanh")
theta0 = init_params(spec, seed=3).flat
X = rng.uniform(-1.0, 1.0, size=(64, 2))
target = np.sin(np.pi * X[:, 0]) * X[:, 1]


def fit_loss(theta):
    pred = mlp_apply(unflatten(theta, spec.layers()), spec.activation, X)
    r = pred.reshape(-1) - target
    return (r * r).sum() / X.shape[0]


value, g = ad.value_and_grad(fit_loss, theta0)
print("\nmlp fit loss              %.6f" % value)
print("gradient size             %d" % g.size)
probe = range(0, g.size, max(1, g.size // 16))
print("worst rel vs central FD   %.3e" % ad.check_gradient(fit_loss, theta0, indices=probe))

# -- forward mode ----------------------------------------------------------


def f(x):
    return ad.swish(3.0 * x) + ad.tanh(x)


vals, slopes = ad.forward_derivative(f, 0.7)
h = 1e-6
lo, hi = f(0.7 - h), f(0.7 + h)
print("\nforward mode at x=0.7     f=%.6f  df/dx=%.6f" % (vals[0], slopes[0]))
print("central FD slope          %.6f" % ((hi - lo) / (2 * h)))

# -- forward over reverse ---------------------------------------------------
# A loss on the slope of a network: duals produce d(net)/dx, the tape then
# differentiates that slope with respect to the weights.

spec1 = MlpSpec((1, 8, 8, 1), "tanh")
flat1 = init_params(spec1, seed=5).flat
xs = np.linspace(0.0, 1.0, 9).reshape(-1, 1)


def slope_loss(theta):
    layers = unflatten(theta, spec1.layers())
    out = mlp_apply(layers, "tanh", ad.Dual(xs, np.ones_like(xs)))
    s = out.tangent.reshape(-1) - 1.0  # push the slope toward 1 everywhere
    return (s * s).sum() / xs.size


value, g = ad.value_and_grad(slope_loss, flat1)
print("\nslope loss                %.6f" % value)
print("worst rel vs central FD   %.3e"
      % ad.check_gradient(slope_loss, flat1, indices=range(0, flat1.size, 7)))

# -- non-finite diagnostics --------------------------------------------------
# A rerun with per-node checking names the first offending operation.

try:
    with np.errstate(invalid="ignore"):
        ad.value_and_grad(lambda th: ad.log(th).sum(), np.array([2.0, -1.0]))
except ad.NonFiniteError as err:
    print("\ncaught NonFiniteError:", err)
