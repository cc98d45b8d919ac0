"""Three ways to train the same beam: energy vs residual losses.

spinn-dem minimizes potential energy on a fixed grid (one first-order
derivative pass). spinn-pde learns displacement and stress fields jointly
and drives the momentum residual plus a stress-strain coupling term to
zero on resampled collocation grids. pinn-pde does the same with
pointwise MLPs instead of separable models. Equal short budgets here,
so the point is the cost and convergence shape, not final accuracy.
"""

import numpy as np

from sepelast.problems import beam_problem, make_evaluator
from sepelast.training import RunSettings, build_objective, train

problem = beam_problem()
budgets = {
    "spinn-dem": dict(epochs=800, grid=(17, 17, 17)),
    "spinn-pde": dict(epochs=800, grid=(17, 17, 17)),
    "pinn-pde": dict(epochs=200, grid=(9, 9, 9)),
}

rows = {}
for mode, kw in budgets.items():
    settings = RunSettings(mode=mode, seed=0, eval_every=100, **kw)
    helper = build_objective(problem, settings)
    evaluator = make_evaluator(problem, helper.bundle, mode)
    print("training %-9s  grid %s, %d epochs, lambda_bc %s"
          % (mode, kw["grid"], kw["epochs"], problem.lambda_bc[mode]))
    rows[mode] = train(problem, settings, evaluator=evaluator)

print("\n%10s %12s %12s %14s %12s" % ("mode", "params", "s/100 ep", "final loss", "L2[uz]"))
for mode, r in rows.items():
    per100 = r.records[-1].elapsed / budgets[mode]["epochs"] * 100.0
    print("%10s %12d %12.2f %14.4e %12.4f"
          % (mode, r.params.size, per100, r.records[-1].total,
             r.records[-1].errors["uz"]))

print("\nL2[uz] trajectories (100-epoch cadence):")
for mode, r in rows.items():
    path = "  ".join("%.3f" % rec.errors["uz"] for rec in r.records)
    print("  %-9s %s" % (mode, path))

print("\nthe energy loss needs no stress net and no resampling, so its")
print("epochs are the cheapest and its error drops first; the residual")
print("modes carry 6 extra stress fields and catch up more slowly")
