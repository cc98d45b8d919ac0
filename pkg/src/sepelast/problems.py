"""Benchmark problem definitions, analytic oracle, reference data, export.

Two problems ship: a clamped cantilever box beam under gravity and a
downward face load, and a thin-walled L-section (two boxes sharing an
edge) under the same kind of loading. Both clamp the x = 0 face(s).

The beam has a classical sanity oracle: Euler-Bernoulli theory for a
cantilever under uniform line load q gives the tip deflection and the
centerline curve that evaluations fall back on when no reference field is
supplied. Reference fields arrive as CSV in SI units and are only ever
ingested, never computed here.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .losses import ConfigurationError
from .mechanics import (
    MaterialSpec,
    ScaleSpec,
    SymTensor3,
    dim_restore,
    strain,
    stress,
    von_mises,
    nondim_forward,
)
from .models import (
    MlpSpec,
    SeparableSpec,
    mlp_point_tensors,
    separable_point_tensors,
    unflatten,
)
from .quadrature import BoxDomain, angle_domain
from .training import relative_l2

QUANTITIES = ("ux", "uy", "uz", "um", "svm")


@dataclass(frozen=True)
class ProblemConfig:
    """Geometry, material, loading, and per-mode defaults of one benchmark."""

    name: str
    boxes: tuple
    material: MaterialSpec
    scale: ScaleSpec
    clamp_faces: tuple
    traction_faces: tuple
    traction_vector: tuple
    displacement_nets: tuple
    hidden: tuple
    rank: int
    modes: tuple
    lambda_bc: dict
    epochs: dict
    activation: str = "swish"
    free_faces: tuple = ()
    colloc_counts: tuple = (32, 32, 32)
    pinn_volume_counts: tuple = (16, 16, 16)
    pinn_surface_points: int = 512
    eval_resolution: tuple = None


def beam_problem(grid=None, constitutive="standard") -> ProblemConfig:
    """Cantilever box beam, clamped at x = 0, loaded on its top face.

    Dimensions 1 x 0.1 x 0.1 m, steel-like material, gravity plus a
    10 kPa downward traction on z = 0.1. Default grid is 33^3 (odd
    counts so the energy quadrature applies); pass ``grid`` to override.
    """
    mat = MaterialSpec(
        youngs_modulus=2.1e11,
        poisson_ratio=0.3,
        density=7.8e3,
        gravity=9.81,
        traction=1e4,
        constitutive=constitutive,
    )
    mu = mat.youngs_modulus / (2.0 * (1.0 + mat.poisson_ratio))
    scale = ScaleSpec(length=1.0, displacement=1e-4, shear=0.01 * mu)
    res = tuple(grid) if grid else (33, 33, 33)
    box = BoxDomain((0.0, 0.0, 0.0), (1.0, 0.1, 0.1), res)
    return ProblemConfig(
        name="beam",
        boxes=(box,),
        material=mat,
        scale=scale,
        clamp_faces=((0, "x-"),),
        traction_faces=((0, "z+"),),
        traction_vector=(0.0, 0.0, -mat.traction),
        free_faces=((0, "x+"), (0, "y-"), (0, "y+"), (0, "z-")),
        displacement_nets=(("u", 3),),
        hidden=(64, 64, 64),
        rank=64,
        modes=("pinn-pde", "spinn-pde", "spinn-dem"),
        lambda_bc={"pinn-pde": 10.0, "spinn-pde": 100.0, "spinn-dem": 100.0},
        epochs={"pinn-pde": 50000, "spinn-pde": 50000, "spinn-dem": 20000},
        eval_resolution=(65, 17, 17),
    )


def angle_problem(grids=None, constitutive="standard") -> ProblemConfig:
    """Thin-walled L-section cantilever: wall plus flange boxes.

    Both boxes clamp at x = 0; a 25 kPa downward traction loads the
    flange top (z = 0.06). Only the energy mode is supported; the
    per-component displacement networks are deeper than the beam's.
    Default grids are full scale (513 x 9 x 65 and 513 x 65 x 9).
    """
    mat = MaterialSpec(
        youngs_modulus=2.1e11,
        poisson_ratio=0.3,
        density=7.8e3,
        gravity=9.81,
        traction=2.5e4,
        constitutive=constitutive,
    )
    mu = mat.youngs_modulus / (2.0 * (1.0 + mat.poisson_ratio))
    scale = ScaleSpec(length=1.0, displacement=1e-4, shear=mu)
    boxes = tuple(angle_domain(grids))
    return ProblemConfig(
        name="angle",
        boxes=boxes,
        material=mat,
        scale=scale,
        clamp_faces=((0, "x-"), (1, "x-")),
        traction_faces=((1, "z+"),),
        traction_vector=(0.0, 0.0, -mat.traction),
        displacement_nets=(("ux", 1), ("uy", 1), ("uz", 1)),
        hidden=(64, 64, 64, 64, 64),
        rank=64,
        modes=("spinn-dem",),
        lambda_bc={"spinn-dem": 1000.0},
        epochs={"spinn-dem": 200000},
    )


PROBLEMS = {"beam": beam_problem, "angle": angle_problem}


def get_problem(name, **kwargs) -> ProblemConfig:
    if name not in PROBLEMS:
        raise ConfigurationError(
            f"unknown problem {name!r}; expected one of {tuple(PROBLEMS)}"
        )
    return PROBLEMS[name](**kwargs)


# -- Euler-Bernoulli oracle ----------------------------------------------


def _beam_line_load(problem: ProblemConfig):
    """Uniform line load q = T W + rho g W H on the cantilever (N/m)."""
    box = problem.boxes[0]
    w = box.hi[1] - box.lo[1]
    h = box.hi[2] - box.lo[2]
    mat = problem.material
    return mat.traction * w + mat.density * mat.gravity * w * h


def euler_bernoulli_tip_deflection(problem: ProblemConfig) -> float:
    """|u_z| at the free end: q L^4 / (8 E I), I = W H^3 / 12 (meters)."""
    box = problem.boxes[0]
    length = box.hi[0] - box.lo[0]
    w = box.hi[1] - box.lo[1]
    h = box.hi[2] - box.lo[2]
    inertia = w * h**3 / 12.0
    q = _beam_line_load(problem)
    return q * length**4 / (8.0 * problem.material.youngs_modulus * inertia)


def euler_bernoulli_centerline(problem: ProblemConfig, x) -> np.ndarray:
    """Signed u_z(x) along the beam axis (meters, negative = downward).

    w(x) = q x^2 (6 L^2 - 4 L x + x^2) / (24 E I) is the downward
    deflection; u_z = -w.
    """
    box = problem.boxes[0]
    length = box.hi[0] - box.lo[0]
    w_ = box.hi[1] - box.lo[1]
    h = box.hi[2] - box.lo[2]
    inertia = w_ * h**3 / 12.0
    q = _beam_line_load(problem)
    x = np.asarray(x, dtype=np.float64)
    defl = (
        q
        * x**2
        * (6.0 * length**2 - 4.0 * length * x + x**2)
        / (24.0 * problem.material.youngs_modulus * inertia)
    )
    return -defl


# -- reference fields ------------------------------------------------------


@dataclass
class ReferenceField:
    """Ingested reference solution in SI units.

    ``sigma`` is None when the file carried displacement columns only.
    """

    points: np.ndarray
    u: np.ndarray
    sigma: np.ndarray = None

    def magnitude(self):
        return np.linalg.norm(self.u, axis=1)

    def von_mises(self):
        if self.sigma is None:
            return None
        s = self.sigma
        t = SymTensor3(s[:, 0], s[:, 1], s[:, 2], s[:, 3], s[:, 4], s[:, 5])
        return np.asarray(von_mises(t))


def ingest_reference(path, problem: ProblemConfig = None) -> ReferenceField:
    """Parse a reference CSV: x,y,z,ux,uy,uz[,sxx,syy,szz,sxy,sxz,syz].

    '#' lines are comments; all values SI. Errors carry the offending line
    number. When a problem is given, points outside every box (1e-9
    tolerance) are rejected.
    """
    rows = []
    ncols = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = [p.strip() for p in body.split(",")]
            if len(parts) not in (6, 12):
                raise ValueError(
                    f"{path}:{lineno}: expected 6 or 12 columns, got {len(parts)}"
                )
            if ncols is None:
                ncols = len(parts)
            elif len(parts) != ncols:
                raise ValueError(
                    f"{path}:{lineno}: inconsistent column count "
                    f"({len(parts)} after {ncols})"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no data records")
    data = np.asarray(rows, dtype=np.float64)
    points = data[:, :3]
    if problem is not None:
        inside = np.zeros(len(points), dtype=bool)
        for box in problem.boxes:
            inside |= box.contains(points)
        if not np.all(inside):
            bad = int(np.flatnonzero(~inside)[0])
            raise ValueError(
                f"{path}: point {tuple(points[bad])} lies outside the "
                f"{problem.name} domain"
            )
    sigma = data[:, 6:12] if data.shape[1] == 12 else None
    return ReferenceField(points=points, u=data[:, 3:6], sigma=sigma)


# -- prediction and export --------------------------------------------------


def predict_at(problem: ProblemConfig, bundle, mode, theta, points):
    """Dimensional (u, sigma) predictions at SI points.

    ``bundle``/``theta`` come from a trained objective or a checkpoint.
    Stress derives from the stress network in the residual modes and from
    Hooke's law on the displacement gradient in the energy mode.
    """
    theta = np.asarray(theta, dtype=np.float64)
    pts_nd = np.asarray(points, dtype=np.float64) / problem.scale.length
    n = len(pts_nd)
    want_grad = mode == "spinn-dem"
    u_nd = np.zeros((n, 3))
    grad_nd = np.zeros((n, 3, 3)) if want_grad else None
    offset = 0
    for name, count in problem.displacement_nets:
        spec = bundle.nets[name]
        seg = bundle.sub(theta, name)
        if isinstance(spec, SeparableSpec):
            body = spec.body_spec()
            m = body.param_count()
            layers = [
                unflatten(seg[i * m : (i + 1) * m], body.layers()) for i in range(3)
            ]
            vals, ders = separable_point_tensors(
                spec, layers, pts_nd, with_derivatives=want_grad
            )
        else:
            layers = unflatten(seg, spec.layers())
            vals, ders = mlp_point_tensors(
                spec, layers, pts_nd, with_derivatives=want_grad
            )
        for lf in range(count):
            u_nd[:, offset + lf] = vals[lf]
            if want_grad:
                for axis in range(3):
                    grad_nd[:, offset + lf, axis] = ders[lf][axis]
        offset += count

    nd = nondim_forward(problem.material, problem.scale)
    if mode == "spinn-dem":
        eps = strain([[grad_nd[:, i, j] for j in range(3)] for i in range(3)])
        sig = stress(eps, nd.lam, nd.mu)
        sigma_nd = np.stack(sig.components(), axis=1)
    else:
        spec = bundle.nets["sigma"]
        seg = bundle.sub(theta, "sigma")
        if isinstance(spec, SeparableSpec):
            body = spec.body_spec()
            m = body.param_count()
            layers = [
                unflatten(seg[i * m : (i + 1) * m], body.layers()) for i in range(3)
            ]
            vals, _ = separable_point_tensors(spec, layers, pts_nd)
        else:
            layers = unflatten(seg, spec.layers())
            vals, _ = mlp_point_tensors(spec, layers, pts_nd)
        sigma_nd = np.stack([vals[f] for f in range(6)], axis=1)
    u, sigma = dim_restore(problem.scale, u=u_nd, sigma=sigma_nd)
    return u, sigma


def eval_points(problem: ProblemConfig):
    """Default evaluation/export point set (SI) covering every box."""
    pts = []
    for box in problem.boxes:
        res = problem.eval_resolution or box.resolution
        axes = box.axes(res)
        grids = np.meshgrid(*axes, indexing="ij")
        pts.append(np.stack([g.ravel() for g in grids], axis=1))
    return np.concatenate(pts, axis=0)


def export_prediction(path, points, u, sigma=None, header=None):
    """Write the reference CSV format, optionally with stress columns.

    ``header`` is a dict echoed as '# key: value' comment lines.
    """
    points = np.asarray(points, dtype=np.float64)
    cols = [points, np.asarray(u, dtype=np.float64)]
    names = "x,y,z,ux,uy,uz"
    if sigma is not None:
        cols.append(np.asarray(sigma, dtype=np.float64))
        names += ",sxx,syy,szz,sxy,sxz,syz"
    data = np.concatenate(cols, axis=1)
    buf = io.StringIO()
    for key, value in (header or {}).items():
        buf.write(f"# {key}: {value}\n")
    buf.write(f"# columns: {names}\n")
    np.savetxt(buf, data, fmt="%.10e", delimiter=",")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def make_evaluator(problem: ProblemConfig, bundle, mode, reference=None):
    """Periodic-evaluation callable: flat params -> {quantity: rel L2}.

    With a reference field every displacement quantity is scored (and von
    Mises when the reference carries stresses). Without one, the beam
    falls back to the analytic centerline oracle for u_z; the angle has
    no oracle, so all entries come back None.
    """
    if reference is not None:
        ref_u = reference.u
        ref_m = reference.magnitude()
        ref_vm = reference.von_mises()
        pts = reference.points

        def evaluate(theta):
            u, sigma = predict_at(problem, bundle, mode, theta, pts)
            errors = {
                "ux": relative_l2(u[:, 0], ref_u[:, 0]),
                "uy": relative_l2(u[:, 1], ref_u[:, 1]),
                "uz": relative_l2(u[:, 2], ref_u[:, 2]),
                "um": relative_l2(np.linalg.norm(u, axis=1), ref_m),
            }
            if ref_vm is not None:
                s = SymTensor3(*(sigma[:, i] for i in range(6)))
                errors["svm"] = relative_l2(np.asarray(von_mises(s)), ref_vm)
            else:
                errors["svm"] = None
            return errors

        return evaluate

    if problem.name == "beam":
        box = problem.boxes[0]
        res = problem.eval_resolution or box.resolution
        xs = np.linspace(box.lo[0], box.hi[0], res[0])
        mid_y = 0.5 * (box.lo[1] + box.hi[1])
        mid_z = 0.5 * (box.lo[2] + box.hi[2])
        line = np.stack(
            [xs, np.full_like(xs, mid_y), np.full_like(xs, mid_z)], axis=1
        )
        oracle = euler_bernoulli_centerline(problem, xs)

        def evaluate(theta):
            u, _ = predict_at(problem, bundle, mode, theta, line)
            err = relative_l2(u[:, 2], oracle)
            return {"ux": None, "uy": None, "uz": err, "um": None, "svm": None}

        return evaluate

    def evaluate(theta):
        return {q: None for q in QUANTITIES}

    return evaluate
