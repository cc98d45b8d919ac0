"""Training objectives: PDE residuals, stress-displacement coupling,
boundary penalties, and total potential energy.

Every loss is payload-generic: handed FieldBatches holding ndarrays it
returns floats (useful for tests and probes); handed tape Vars it returns a
Var the trainer can differentiate. Field order conventions: displacement
batches hold (ux, uy, uz); stress batches hold (xx, yy, zz, xy, xz, yz).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import value_of
from .mechanics import SymTensor3, strain, stress

MODES = ("pinn-pde", "spinn-pde", "spinn-dem")

PDE_MODES = ("pinn-pde", "spinn-pde")


class ConfigurationError(ValueError):
    """A mode/problem/flag combination that cannot be trained."""


def _count(payload):
    return float(value_of(payload).size)


def _mean_all(payload):
    return payload.sum() * (1.0 / _count(payload))


def _grad_u(batch):
    """3x3 nested payloads grad[i][j] = d u_i / d x_j from a FieldBatch."""
    if batch.d_values is None:
        raise ValueError("displacement batch needs derivatives")
    return [list(batch.d_values[f]) for f in range(3)]


def _stress_tensor(batch) -> SymTensor3:
    v = batch.values
    return SymTensor3(xx=v[0], yy=v[1], zz=v[2], xy=v[3], xz=v[4], yz=v[5])


def residual_loss(stress_batch, body_force):
    """Mean squared momentum-balance residual.

    R_i = sum_j d sigma_ij / d x_j + f_i, averaged over points with the
    three components summed per point.
    """
    d = stress_batch.d_values
    if d is None:
        raise ValueError("stress batch needs derivatives")
    fx, fy, fz = (float(c) for c in body_force)
    # d[k][axis]: field order (xx, yy, zz, xy, xz, yz)
    rx = d[0][0] + d[3][1] + d[4][2] + fx
    ry = d[3][0] + d[1][1] + d[5][2] + fy
    rz = d[4][0] + d[5][1] + d[2][2] + fz
    return _mean_all(rx**2 + ry**2 + rz**2)


def coupling_loss(u_batch, stress_batch, lam, mu):
    """Mean squared mismatch between the stress field and Hooke's law
    applied to the displacement gradient (full-tensor norm: off-diagonal
    terms count twice)."""
    eps = strain(_grad_u(u_batch))
    from_u = stress(eps, lam, mu)
    s = _stress_tensor(stress_batch)
    m = SymTensor3(
        xx=s.xx - from_u.xx,
        yy=s.yy - from_u.yy,
        zz=s.zz - from_u.zz,
        xy=s.xy - from_u.xy,
        xz=s.xz - from_u.xz,
        yz=s.yz - from_u.yz,
    )
    total = m.contract(m)  # = sum over the full 3x3 of squared entries
    return _mean_all(total)


def bc_dirichlet_loss(u_batch, target=(0.0, 0.0, 0.0)):
    """Mean squared displacement deviation on a clamped face.

    Averaged over components as well as points, so the value is a mean
    over 3N scalars.
    """
    parts = []
    for f in range(3):
        diff = u_batch.values[f] - float(target[f])
        parts.append((diff**2).sum())
    total = parts[0] + parts[1] + parts[2]
    n = _count(u_batch.values[0])
    return total * (1.0 / (3.0 * n))


def bc_traction_loss(faces):
    """Pooled mean squared traction mismatch over loaded and free faces.

    ``faces`` is a sequence of (stress_batch, normal, traction_vector);
    each point contributes |sigma . n - T|^2 and the mean runs over all
    points pooled across faces.
    """
    if not faces:
        raise ValueError("traction loss needs at least one face")
    total = None
    count = 0.0
    for stress_batch, normal, traction in faces:
        s = _stress_tensor(stress_batch)
        tx, ty, tz = s.dot_normal(normal)
        gx, gy, gz = (float(c) for c in traction)
        sq = (tx - gx) ** 2 + (ty - gy) ** 2 + (tz - gz) ** 2
        part = sq.sum()
        total = part if total is None else total + part
        count += _count(stress_batch.values[0])
    return total * (1.0 / count)


def strain_energy_density(u_batch, lam, mu):
    """0.5 sigma:eps as the quadratic form 0.5 (lam tr^2 + 2 mu eps:eps)."""
    eps = strain(_grad_u(u_batch))
    tr = eps.trace()
    sq = (
        eps.xx**2
        + eps.yy**2
        + eps.zz**2
        + 2.0 * (eps.xy**2 + eps.xz**2 + eps.yz**2)
    )
    return 0.5 * (lam * tr**2 + 2.0 * mu * sq)


def energy_loss(u_batch, weights, lam, mu, body_force, traction_faces=()):
    """Total potential energy of one box plus its loaded faces.

    E = int 0.5 sigma:eps dV - int f . u dV - sum_faces int T . u dA,
    each integral a weighted sum on its quadrature grid. ``weights`` must
    match the payload shapes in ``u_batch``; ``traction_faces`` holds
    (u_face_batch, face_weights, traction_vector) triples.
    """
    dens = strain_energy_density(u_batch, lam, mu)
    energy = (dens * weights).sum()
    for f, comp in enumerate(body_force):
        c = float(comp)
        if c != 0.0:
            energy = energy - c * (u_batch.values[f] * weights).sum()
    for face_batch, face_weights, traction in traction_faces:
        for f, comp in enumerate(traction):
            c = float(comp)
            if c != 0.0:
                energy = energy - c * (face_batch.values[f] * face_weights).sum()
    return energy


@dataclass
class LossBreakdown:
    """One training step's loss terms. ``total`` is always
    lambda_bc * bc + residual + coupling (PDE modes) or
    lambda_bc * bc + energy (energy mode); absent terms are None."""

    mode: str
    lambda_bc: float
    total: object
    bc: object
    residual: object = None
    coupling: object = None
    energy: object = None

    def floats(self):
        """Same breakdown with plain floats (for records and logs)."""
        pick = lambda v: None if v is None else float(value_of(v))
        return LossBreakdown(
            mode=self.mode,
            lambda_bc=self.lambda_bc,
            total=pick(self.total),
            bc=pick(self.bc),
            residual=pick(self.residual),
            coupling=pick(self.coupling),
            energy=pick(self.energy),
        )


def total_loss(mode, *, bc, lambda_bc, residual=None, coupling=None, energy=None):
    """Combine per-mode terms into a LossBreakdown; missing terms error."""
    if mode not in MODES:
        raise ConfigurationError(f"unknown mode {mode!r}; expected one of {MODES}")
    if bc is None:
        raise ConfigurationError(f"mode {mode!r} requires a boundary term")
    if mode in PDE_MODES:
        if residual is None or coupling is None:
            raise ConfigurationError(
                f"mode {mode!r} requires residual and coupling terms"
            )
        if energy is not None:
            raise ConfigurationError(f"mode {mode!r} does not take an energy term")
        total = lambda_bc * bc + residual + coupling
        return LossBreakdown(
            mode=mode,
            lambda_bc=float(lambda_bc),
            total=total,
            bc=bc,
            residual=residual,
            coupling=coupling,
        )
    if energy is None:
        raise ConfigurationError(f"mode {mode!r} requires an energy term")
    if residual is not None or coupling is not None:
        raise ConfigurationError(
            f"mode {mode!r} takes no residual or coupling terms"
        )
    total = lambda_bc * bc + energy
    return LossBreakdown(
        mode=mode,
        lambda_bc=float(lambda_bc),
        total=total,
        bc=bc,
        energy=energy,
    )


def shifted_batch(batch, delta, sign=1.0):
    """FieldBatch of u + sign * delta (values and derivatives)."""
    from .models import FieldBatch

    values = [
        batch.values[f] + sign * delta.values[f] for f in range(len(batch.values))
    ]
    d_values = None
    if batch.d_values is not None:
        d_values = [
            tuple(
                batch.d_values[f][a] + sign * delta.d_values[f][a]
                for a in range(3)
            )
            for f in range(len(batch.d_values))
        ]
    return FieldBatch(values=values, d_values=d_values, points=batch.points)


def stationarity_probe(energy_of, u_parts, delta_parts, tol):
    """Discrete convexity/stationarity check at a candidate minimizer.

    ``energy_of`` maps a tuple of FieldBatches (volume batches first, then
    face batches, in whatever layout the caller's closure expects) to a
    float energy. The probe requires
        E(u + d) + E(u - d) >= 2 E(u) - tol
    and returns (passed, gap, e0).
    """
    e0 = float(energy_of(u_parts))
    plus = tuple(shifted_batch(b, d, +1.0) for b, d in zip(u_parts, delta_parts))
    minus = tuple(shifted_batch(b, d, -1.0) for b, d in zip(u_parts, delta_parts))
    gap = float(energy_of(plus)) + float(energy_of(minus)) - 2.0 * e0
    return gap >= -float(tol), gap, e0
