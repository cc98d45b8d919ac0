"""Loss-term tests against hand-computed closed forms.

Batches are built directly so each term is pinned in isolation: residual
and coupling from constant-derivative fields, the energy integral from
polynomial displacement fields Simpson integrates exactly.
"""

import numpy as np
import pytest

from sepelast.losses import (
    ConfigurationError,
    bc_dirichlet_loss,
    bc_traction_loss,
    coupling_loss,
    energy_loss,
    residual_loss,
    shifted_batch,
    stationarity_probe,
    strain_energy_density,
    total_loss,
)
from sepelast.mechanics import strain, stress
from sepelast.models import FieldBatch
from sepelast.quadrature import BoxDomain, face_quadrature, tensor_quadrature


def _const_stress_batch(n, values, derivs=None):
    """Stress FieldBatch with per-field constant values/derivatives."""
    d_values = None
    if derivs is not None:
        d_values = [
            tuple(np.full(n, derivs.get((f, a), 0.0)) for a in range(3))
            for f in range(6)
        ]
    return FieldBatch(
        values=[np.full(n, v) for v in values], d_values=d_values
    )


def _const_grad_batch(n, grad):
    d_values = [tuple(np.full(n, grad[i][j]) for j in range(3)) for i in range(3)]
    return FieldBatch(values=[np.zeros(n)] * 3, d_values=d_values)


class TestResidualLoss:
    def test_closed_form(self):
        derivs = {
            (0, 0): 1.0, (3, 1): 2.0, (4, 2): 3.0,   # rx = 6 + fx
            (3, 0): 0.5, (1, 1): -1.0, (5, 2): 0.25,  # ry = -0.25 + fy
            (4, 0): 0.0, (5, 1): 1.0, (2, 2): -2.0,   # rz = -1 + fz
        }
        batch = _const_stress_batch(4, [0.0] * 6, derivs)
        loss = residual_loss(batch, (0.0, 0.0, 0.5))
        assert loss == pytest.approx(6.0**2 + 0.25**2 + 0.5**2, rel=1e-14)

    def test_divergence_free_with_matching_force(self):
        derivs = {(0, 0): -1.5, (3, 1): 0.5, (4, 2): 1.0}
        batch = _const_stress_batch(3, [0.0] * 6, derivs)
        assert residual_loss(batch, (0.0, 0.0, 0.0)) == pytest.approx(0.0, abs=1e-30)

    def test_needs_derivatives(self):
        batch = _const_stress_batch(3, [1.0] * 6)
        with pytest.raises(ValueError, match="derivatives"):
            residual_loss(batch, (0.0, 0.0, 0.0))


class TestCouplingLoss:
    def test_zero_when_consistent(self):
        rng = np.random.default_rng(7)
        lam, mu = 2.5, 1.25
        for _ in range(5):
            g = rng.standard_normal((3, 3))
            u_batch = _const_grad_batch(4, g)
            eps = strain([[g[i, j] for j in range(3)] for i in range(3)])
            sig = stress(eps, lam, mu)
            s_batch = _const_stress_batch(4, [float(c) for c in sig.components()])
            assert coupling_loss(u_batch, s_batch, lam, mu) == pytest.approx(
                0.0, abs=1e-26
            )

    def test_off_diagonal_counts_twice(self):
        lam, mu = 2.5, 1.25
        g = np.zeros((3, 3))
        u_batch = _const_grad_batch(4, g)
        delta = 0.3
        vals = [0.0, 0.0, 0.0, delta, 0.0, 0.0]  # sigma_xy off by delta
        s_batch = _const_stress_batch(4, vals)
        assert coupling_loss(u_batch, s_batch, lam, mu) == pytest.approx(
            2.0 * delta**2, rel=1e-14
        )

    def test_diagonal_counts_once(self):
        lam, mu = 2.5, 1.25
        u_batch = _const_grad_batch(4, np.zeros((3, 3)))
        s_batch = _const_stress_batch(4, [0.4, 0.0, 0.0, 0.0, 0.0, 0.0])
        assert coupling_loss(u_batch, s_batch, lam, mu) == pytest.approx(
            0.4**2, rel=1e-14
        )


class TestBoundaryLosses:
    def test_dirichlet_mean_over_3n(self):
        batch = FieldBatch(
            values=[np.array([0.1, 0.3]), np.zeros(2), np.zeros(2)]
        )
        # (0.01 + 0.09) / 6
        assert bc_dirichlet_loss(batch) == pytest.approx(0.1 / 6.0, rel=1e-14)

    def test_dirichlet_target(self):
        batch = FieldBatch(values=[np.full(5, 1.0), np.full(5, 2.0), np.full(5, 3.0)])
        assert bc_dirichlet_loss(batch, target=(1.0, 2.0, 3.0)) == pytest.approx(
            0.0, abs=1e-30
        )

    def test_traction_single_face(self):
        vals = [0.0, 0.0, 3.0, 0.0, 1.0, 2.0]  # sigma.n for n=z+: (1, 2, 3)
        batch = _const_stress_batch(4, vals)
        loss = bc_traction_loss([(batch, (0.0, 0.0, 1.0), (0.0, 0.0, 3.0))])
        assert loss == pytest.approx(1.0 + 4.0, rel=1e-14)

    def test_traction_pools_across_faces(self):
        f1 = _const_stress_batch(2, [0.0, 0.0, 3.0, 0.0, 1.0, 2.0])
        f2 = _const_stress_batch(3, [0.0] * 6)
        faces = [
            (f1, (0.0, 0.0, 1.0), (0.0, 0.0, 3.0)),     # per-point sq = 5
            (f2, (0.0, 1.0, 0.0), (1.0, 1.0, 0.0)),     # per-point sq = 2
        ]
        assert bc_traction_loss(faces) == pytest.approx(16.0 / 5.0, rel=1e-14)

    def test_traction_needs_faces(self):
        with pytest.raises(ValueError, match="at least one face"):
            bc_traction_loss([])


def _grid_batch(quad, u_fn, grad_fn):
    """FieldBatch over a tensor grid from callables of (x, y, z) grids."""
    x, y, z = np.meshgrid(*quad.axes, indexing="ij")
    values = [np.asarray(v, dtype=np.float64) + np.zeros_like(x) for v in u_fn(x, y, z)]
    g = grad_fn(x, y, z)
    d_values = [
        tuple(np.asarray(g[i][j], dtype=np.float64) + np.zeros_like(x) for j in range(3))
        for i in range(3)
    ]
    return FieldBatch(values=values, d_values=d_values)


class TestEnergyLoss:
    def test_uniform_extension(self):
        # u = (a x, 0, 0) on the unit cube: E = (lam/2 + mu) a^2
        lam, mu, a = 150.0, 100.0, 0.03
        box = BoxDomain((0, 0, 0), (1, 1, 1), (5, 5, 5))
        quad = tensor_quadrature(box)
        batch = _grid_batch(
            quad,
            lambda x, y, z: (a * x, 0.0, 0.0),
            lambda x, y, z: [[a, 0, 0], [0, 0, 0], [0, 0, 0]],
        )
        e = energy_loss(batch, quad.weights, lam, mu, (0.0, 0.0, 0.0))
        assert float(e) == pytest.approx((lam / 2 + mu) * a**2, rel=1e-12)

    def test_quadratic_field_closed_form(self):
        # u = (0, 0, a z^2) on the unit cube: E = (2/3)(lam + 2 mu) a^2
        a = 0.05
        box = BoxDomain((0, 0, 0), (1, 1, 1), (5, 5, 9))
        quad = tensor_quadrature(box)
        batch = _grid_batch(
            quad,
            lambda x, y, z: (0.0, 0.0, a * z**2),
            lambda x, y, z: [[0, 0, 0], [0, 0, 0], [0, 0, 2 * a * z]],
        )
        for lam, mu in ((150.0, 100.0), (1.5, 1.0), (2.0, 0.75)):
            e = energy_loss(batch, quad.weights, lam, mu, (0.0, 0.0, 0.0))
            assert float(e) == pytest.approx(
                (2.0 / 3.0) * (lam + 2.0 * mu) * a**2, rel=1e-10
            )

    def test_body_force_and_traction_work(self):
        # constant u = (0, 0, c): zero strain energy, pure work terms
        c, rho_g, t = 0.02, 0.9, 0.12
        box = BoxDomain((0, 0, 0), (1.0, 0.5, 0.25), (5, 5, 5))
        quad = tensor_quadrature(box)
        batch = _grid_batch(
            quad,
            lambda x, y, z: (0.0, 0.0, c),
            lambda x, y, z: [[0, 0, 0], [0, 0, 0], [0, 0, 0]],
        )
        face = face_quadrature(box, "z+")
        ny, nx = face.tangent_weights.shape
        face_batch = FieldBatch(
            values=[np.zeros((ny, 1, nx)), np.zeros((ny, 1, nx)), np.full((ny, 1, nx), c)]
        )
        fw = face.tangent_weights.reshape(ny, 1, nx)
        e = energy_loss(
            batch,
            quad.weights,
            150.0,
            100.0,
            (0.0, 0.0, -rho_g),
            traction_faces=[(face_batch, fw, (0.0, 0.0, t))],
        )
        vol, area = box.volume(), 1.0 * 0.5
        assert float(e) == pytest.approx(rho_g * c * vol - t * c * area, rel=1e-13)

    def test_density_positive_for_random_strains(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            g = rng.standard_normal((3, 3))
            batch = _const_grad_batch(1, g)
            d = strain_energy_density(batch, 150.0, 100.0)
            if np.abs(g + g.T).max() > 1e-12:
                assert float(d[0]) > 0.0


class TestTotalLoss:
    def test_energy_mode_arithmetic(self):
        br = total_loss("spinn-dem", bc=0.02, lambda_bc=100.0, energy=-1.5)
        assert br.total == pytest.approx(0.5, rel=1e-14)
        assert br.residual is None and br.coupling is None

    def test_pde_mode_arithmetic(self):
        br = total_loss("spinn-pde", bc=0.1, lambda_bc=10.0, residual=2.0, coupling=3.0)
        assert br.total == pytest.approx(6.0, rel=1e-14)
        assert br.energy is None

    def test_breakdown_invariant(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            bc, r, c, e = rng.uniform(0.01, 2.0, size=4)
            lam = float(rng.choice([10.0, 100.0, 1000.0]))
            br = total_loss("pinn-pde", bc=bc, lambda_bc=lam, residual=r, coupling=c)
            assert br.total == pytest.approx(lam * br.bc + br.residual + br.coupling, rel=1e-12)
            br = total_loss("spinn-dem", bc=bc, lambda_bc=lam, energy=e)
            assert br.total == pytest.approx(lam * br.bc + br.energy, rel=1e-12)

    def test_floats_conversion(self):
        br = total_loss("spinn-dem", bc=np.float64(0.25), lambda_bc=4.0, energy=np.float64(-1.0))
        f = br.floats()
        assert isinstance(f.total, float) and f.total == pytest.approx(0.0, abs=1e-15)
        assert f.residual is None

    def test_mode_validation(self):
        with pytest.raises(ConfigurationError, match="unknown mode"):
            total_loss("dem", bc=0.1, lambda_bc=1.0, energy=1.0)
        with pytest.raises(ConfigurationError, match="boundary term"):
            total_loss("spinn-dem", bc=None, lambda_bc=1.0, energy=1.0)
        with pytest.raises(ConfigurationError, match="residual and coupling"):
            total_loss("pinn-pde", bc=0.1, lambda_bc=1.0, residual=2.0)
        with pytest.raises(ConfigurationError, match="does not take an energy"):
            total_loss("spinn-pde", bc=0.1, lambda_bc=1.0, residual=1.0, coupling=1.0, energy=1.0)
        with pytest.raises(ConfigurationError, match="requires an energy"):
            total_loss("spinn-dem", bc=0.1, lambda_bc=1.0)
        with pytest.raises(ConfigurationError, match="no residual"):
            total_loss("spinn-dem", bc=0.1, lambda_bc=1.0, energy=1.0, residual=0.5)

    def test_configuration_error_is_value_error(self):
        assert issubclass(ConfigurationError, ValueError)


class TestStationarityProbe:
    def _quadratic_energy(self, sign=1.0):
        def energy_of(parts):
            total = 0.0
            for b in parts:
                for v in b.values:
                    total += sign * float((v**2).sum())
            return total

        return energy_of

    def test_convex_minimum_passes(self):
        u = FieldBatch(values=[np.zeros(4)] * 3)
        d = FieldBatch(values=[np.full(4, 0.01)] * 3)
        ok, gap, e0 = stationarity_probe(self._quadratic_energy(), (u,), (d,), tol=1e-9)
        assert ok and e0 == 0.0
        # E(u+d) + E(u-d) - 2 E(u) = 2 sum d^2 = 2 * 12 * 1e-4
        assert gap == pytest.approx(2.4e-3, rel=1e-12)

    def test_concave_point_fails(self):
        u = FieldBatch(values=[np.zeros(4)] * 3)
        d = FieldBatch(values=[np.full(4, 0.01)] * 3)
        ok, gap, _ = stationarity_probe(
            self._quadratic_energy(sign=-1.0), (u,), (d,), tol=1e-9
        )
        assert not ok and gap < 0.0

    def test_linear_energy_in_tolerance(self):
        def linear(parts):
            return float(sum(v.sum() for b in parts for v in b.values))

        u = FieldBatch(values=[np.full(4, 0.5)] * 3)
        d = FieldBatch(values=[np.full(4, 0.01)] * 3)
        ok, gap, _ = stationarity_probe(linear, (u,), (d,), tol=1e-9)
        assert ok and gap == pytest.approx(0.0, abs=1e-12)


class TestShiftedBatch:
    def test_shift_values_and_derivatives(self):
        base = _const_grad_batch(3, np.eye(3))
        delta = _const_grad_batch(3, 0.5 * np.ones((3, 3)))
        delta = FieldBatch(
            values=[np.full(3, 0.1 * (f + 1)) for f in range(3)],
            d_values=delta.d_values,
        )
        plus = shifted_batch(base, delta, +1.0)
        minus = shifted_batch(base, delta, -1.0)
        for f in range(3):
            np.testing.assert_allclose(plus.values[f], 0.1 * (f + 1))
            np.testing.assert_allclose(minus.values[f], -0.1 * (f + 1))
            for a in range(3):
                expect = (1.0 if f == a else 0.0) + 0.5
                np.testing.assert_allclose(plus.d_values[f][a], expect)

    def test_values_only(self):
        base = FieldBatch(values=[np.ones(2)] * 3)
        delta = FieldBatch(values=[np.full(2, 0.25)] * 3)
        out = shifted_batch(base, delta)
        assert out.d_values is None
        np.testing.assert_allclose(out.values[0], 1.25)
