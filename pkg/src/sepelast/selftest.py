"""Built-in invariant suites, runnable via the CLI `selftest` subcommand.

Three suites cover the numerical core: reverse-mode gradients against
finite differences, composite Simpson exactness on polynomials, and the
separable grid evaluation against direct pointwise evaluation. Each
prints one pass/fail line; the return value counts failed suites so the
CLI can use it as the exit status.

`fault` injects a deliberate defect for testing the harness itself;
"perturb-quadrature" nudges one quadrature weight, which must make the
quadrature suite (and only that suite) fail.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .models import (
    SeparableSpec,
    init_separable,
    spinn_eval_grid,
    spinn_eval_grid_with_derivatives,
    spinn_eval_points,
)
from .problems import beam_problem
from .quadrature import BoxDomain, simpson_weights, tensor_quadrature
from .training import RunSettings, build_objective

FAULT_HOOKS = ("perturb-quadrature",)


def _suite_gradient(fault=None):
    """Tape gradients match central finite differences on a real objective."""
    obj = build_objective(
        beam_problem(grid=(5, 5, 5)),
        RunSettings(mode="spinn-dem", seed=0, hidden=(8, 8), rank=4),
    )
    theta = obj.init_params(seed=0)
    rng = np.random.default_rng(42)
    theta = theta + 0.05 * rng.standard_normal(theta.size)
    idx = rng.choice(theta.size, size=6, replace=False)
    worst = ad.check_gradient(lambda v: obj.loss(v, 0).total, theta, indices=idx)
    if not worst < 1e-5:
        raise AssertionError(f"gradient mismatch vs finite differences: {worst:.3e}")

    def scalar_fn(v):
        return (ad.tanh(v) * v + ad.exp(-(v * v))).sum()

    worst = ad.check_gradient(scalar_fn, rng.standard_normal(5))
    if not worst < 1e-6:
        raise AssertionError(f"elementary-op gradient mismatch: {worst:.3e}")


def _suite_quadrature(fault=None):
    """Composite Simpson integrates cubics exactly."""
    x = np.linspace(0.0, 2.0, 9)
    w = simpson_weights(9, 0.0, 2.0, "x")
    if fault == "perturb-quadrature":
        w = w.copy()
        w[3] += 1e-3
    for k in range(4):
        exact = 2.0 ** (k + 1) / (k + 1)
        got = float(w @ x**k)
        if abs(got - exact) > 1e-12 * max(1.0, abs(exact)):
            raise AssertionError(
                f"Simpson not exact on x^{k}: got {got!r}, want {exact!r}"
            )
    quad = tensor_quadrature(BoxDomain((0, 0, 0), (1, 2, 3), (5, 5, 7)))
    vol = float(quad.weights.sum())
    if abs(vol - 6.0) > 1e-12:
        raise AssertionError(f"tensor weights sum to {vol!r}, want 6.0")


def _suite_separable(fault=None):
    """Grid evaluation of a separable field equals pointwise evaluation."""
    spec = SeparableSpec(hidden=(8, 8), rank=4, output_count=2, activation="tanh")
    m = init_separable(spec, seed=11)
    axes = [np.linspace(0, 1, 4), np.linspace(0, 2, 3), np.linspace(0, 1, 5)]
    grid_vals = spinn_eval_grid(m, axes)
    pts = np.stack(
        [g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1
    )
    point_vals = spinn_eval_points(m, pts)
    for f in range(len(grid_vals)):
        diff = np.abs(grid_vals[f].ravel() - point_vals.values[f]).max()
        if diff > 1e-10:
            raise AssertionError(f"grid/pointwise mismatch on field {f}: {diff:.3e}")
    batch = spinn_eval_grid_with_derivatives(m, axes)
    h = 1e-6
    shifted = [a.copy() for a in axes]
    shifted[0] = axes[0] + h
    plus = spinn_eval_grid(m, shifted)
    shifted[0] = axes[0] - h
    minus = spinn_eval_grid(m, shifted)
    fd = (plus[0] - minus[0]) / (2 * h)
    rel = np.abs(batch.d_values[0][0].reshape(fd.shape) - fd).max() / max(
        np.abs(fd).max(), 1.0
    )
    if rel > 1e-7:
        raise AssertionError(f"merged x-derivative off by {rel:.3e} vs FD")


SUITES = (
    ("gradient", _suite_gradient),
    ("quadrature", _suite_quadrature),
    ("separable", _suite_separable),
)


def run_selftest(fault=None, log=print):
    """Run every suite; returns the number of failures (CLI exit status)."""
    if fault is not None and fault not in FAULT_HOOKS:
        raise ValueError(f"unknown fault hook {fault!r} (known: {FAULT_HOOKS})")
    failed = 0
    for name, fn in SUITES:
        try:
            fn(fault)
        except Exception as exc:
            failed += 1
            log(f"selftest {name}: FAIL ({exc})")
        else:
            log(f"selftest {name}: pass")
    return failed
