"""Small-strain linear elasticity algebra and non-dimensionalization.

Everything here is plain algebra on payloads (ndarray, tape Var, or floats):
strain from a displacement gradient, Hooke stress, von Mises, and the
characteristic-scale transforms that map a dimensional problem onto the
O(1) variables the networks train in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import sqrt, value_of

CONSTITUTIVE_CONVENTIONS = ("standard", "halved")


@dataclass(frozen=True)
class MaterialSpec:
    """Isotropic material plus load constants (SI units).

    ``traction`` is the magnitude of the downward surface load on the
    loaded face; gravity acts along -z with density ``rho``. The
    ``constitutive`` switch selects the stress convention: "standard" is
    sigma = lambda tr(eps) I + 2 mu eps; "halved" uses the same formula
    at half moduli (a convention some references use).
    """

    youngs_modulus: float
    poisson_ratio: float
    density: float = 0.0
    gravity: float = 0.0
    traction: float = 0.0
    constitutive: str = "standard"

    def __post_init__(self):
        if self.youngs_modulus <= 0.0:
            raise ValueError("Young's modulus must be positive")
        if not 0.0 <= self.poisson_ratio < 0.5:
            raise ValueError("Poisson ratio must lie in [0, 0.5)")
        if self.density < 0.0 or self.gravity < 0.0:
            raise ValueError("density and gravity must be non-negative")
        if self.constitutive not in CONSTITUTIVE_CONVENTIONS:
            raise ValueError(
                f"constitutive must be one of {CONSTITUTIVE_CONVENTIONS}"
            )


def lame_constants(mat: MaterialSpec):
    """(lambda, mu) from (E, nu); errors for nu >= 0.5 (incompressible)."""
    e, nu = mat.youngs_modulus, mat.poisson_ratio
    if nu >= 0.5:
        raise ValueError("Poisson ratio >= 0.5 has no finite Lame constants")
    lam = nu * e / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = e / (2.0 * (1.0 + nu))
    return lam, mu


def effective_moduli(mat: MaterialSpec):
    """Moduli to plug into the standard Hooke formula under the chosen
    convention ("halved" is the standard formula at half moduli)."""
    lam, mu = lame_constants(mat)
    if mat.constitutive == "halved":
        return 0.5 * lam, 0.5 * mu
    return lam, mu


@dataclass(frozen=True)
class ScaleSpec:
    """Characteristic length, displacement, and shear-modulus scales."""

    length: float
    displacement: float
    shear: float

    def __post_init__(self):
        if self.length <= 0 or self.displacement <= 0 or self.shear <= 0:
            raise ValueError("characteristic scales must be positive")

    @property
    def stress(self):
        """Stress scale: sigma = stress_scale * sigma_tilde."""
        return self.shear * self.displacement / self.length


@dataclass
class SymTensor3:
    """Symmetric 3x3 tensor as six payload components."""

    xx: object
    yy: object
    zz: object
    xy: object
    xz: object
    yz: object

    def trace(self):
        return self.xx + self.yy + self.zz

    def components(self):
        return (self.xx, self.yy, self.zz, self.xy, self.xz, self.yz)

    def contract(self, other):
        """Full double contraction a:b (off-diagonals count twice)."""
        return (
            self.xx * other.xx
            + self.yy * other.yy
            + self.zz * other.zz
            + 2.0 * (self.xy * other.xy + self.xz * other.xz + self.yz * other.yz)
        )

    def dot_normal(self, n):
        """Traction vector t = sigma . n for a constant normal.

        Zero normal components contribute no terms, so an axis-aligned
        face only touches three stress components (the others may be
        left as None in a partially evaluated tensor).
        """
        rows = (
            (self.xx, self.xy, self.xz),
            (self.xy, self.yy, self.yz),
            (self.xz, self.yz, self.zz),
        )
        out = []
        for row in rows:
            acc = None
            for comp, nj in zip(row, n):
                nj = float(nj)
                if nj == 0.0:
                    continue
                term = comp * nj
                acc = term if acc is None else acc + term
            out.append(0.0 if acc is None else acc)
        return tuple(out)


def strain(grad_u) -> SymTensor3:
    """Symmetrized displacement gradient.

    ``grad_u`` is a 3x3 nested sequence with grad_u[i][j] = d u_i / d x_j.
    """
    return SymTensor3(
        xx=grad_u[0][0],
        yy=grad_u[1][1],
        zz=grad_u[2][2],
        xy=0.5 * (grad_u[0][1] + grad_u[1][0]),
        xz=0.5 * (grad_u[0][2] + grad_u[2][0]),
        yz=0.5 * (grad_u[1][2] + grad_u[2][1]),
    )


def stress(eps: SymTensor3, lam, mu) -> SymTensor3:
    """Isotropic Hooke law sigma = lam tr(eps) I + 2 mu eps."""
    tr = eps.trace()
    two_mu = 2.0 * mu
    return SymTensor3(
        xx=lam * tr + two_mu * eps.xx,
        yy=lam * tr + two_mu * eps.yy,
        zz=lam * tr + two_mu * eps.zz,
        xy=two_mu * eps.xy,
        xz=two_mu * eps.xz,
        yz=two_mu * eps.yz,
    )


def von_mises(sigma: SymTensor3):
    """sqrt(3/2 sigma:sigma - 1/2 tr(sigma)^2), clamped against tiny
    negative radicands from cancellation; a genuinely negative radicand
    raises instead of being hidden."""
    full = sigma.contract(sigma)
    tr = sigma.trace()
    radicand = 1.5 * full - 0.5 * tr * tr
    r = np.asarray(value_of(radicand), dtype=np.float64)
    floor = -1e-9 * max(float(np.max(np.abs(value_of(1.5 * full)))), 1e-30)
    if np.any(r < floor):
        raise ArithmeticError(
            f"von Mises radicand {float(r.min()):.3e} below cancellation floor"
        )
    return sqrt(np.maximum(r, 0.0))


def displacement_magnitude(u):
    """|u| from the three components (payload-generic)."""
    return sqrt(u[0] ** 2 + u[1] ** 2 + u[2] ** 2)


@dataclass(frozen=True)
class NondimConstants:
    """Dimensionless material and load constants the losses consume."""

    lam: float
    mu: float
    rho_g: float
    traction: float


def nondim_forward(mat: MaterialSpec, scale: ScaleSpec) -> NondimConstants:
    """Map dimensional material and loads to tilde variables.

    lambda~ = lambda / mu_c, mu~ = mu / mu_c,
    rho_g~ = L_c^2 rho g / (mu_c U_c), T~ = L_c T / (mu_c U_c).
    Uses the convention-adjusted moduli so both Hooke variants train
    consistently.
    """
    lam, mu = effective_moduli(mat)
    denom = scale.shear * scale.displacement
    return NondimConstants(
        lam=lam / scale.shear,
        mu=mu / scale.shear,
        rho_g=scale.length**2 * mat.density * mat.gravity / denom,
        traction=scale.length * mat.traction / denom,
    )


def nondim_points(points, scale: ScaleSpec):
    return np.asarray(points, dtype=np.float64) / scale.length


def dim_restore(scale: ScaleSpec, u=None, sigma=None):
    """Back to SI units: u = U_c u~, sigma = (mu_c U_c / L_c) sigma~.

    Returns whichever of (u, sigma) was given, in the same order; inputs
    may be arrays or SymTensor3.
    """
    out = []
    if u is not None:
        out.append(np.asarray(u, dtype=np.float64) * scale.displacement)
    if sigma is not None:
        s = scale.stress
        if isinstance(sigma, SymTensor3):
            out.append(
                SymTensor3(*(np.asarray(c) * s for c in sigma.components()))
            )
        else:
            out.append(np.asarray(sigma, dtype=np.float64) * s)
    return out[0] if len(out) == 1 else tuple(out)
