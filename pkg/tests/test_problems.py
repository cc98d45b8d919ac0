"""Benchmark definitions, the beam's analytic oracle, reference-field
ingest/export, and prediction plumbing."""

import dataclasses

import numpy as np
import pytest

from sepelast.losses import ConfigurationError
from sepelast.mechanics import SymTensor3, von_mises
from sepelast.problems import (
    QUANTITIES,
    ReferenceField,
    angle_problem,
    beam_problem,
    euler_bernoulli_centerline,
    euler_bernoulli_tip_deflection,
    eval_points,
    export_prediction,
    get_problem,
    ingest_reference,
    make_evaluator,
    predict_at,
)
from sepelast.training import RunSettings, build_objective

TINY = dict(rank=4, hidden=(8, 8))


class TestOracle:
    def test_frozen_tip_deflection(self):
        p = beam_problem()
        # q = T W + rho g W H = 1000 + 765.18, I = W H^3 / 12
        assert euler_bernoulli_tip_deflection(p) == pytest.approx(
            1.2608428571428572e-4, rel=1e-15
        )

    def test_line_load_decomposition(self):
        p = beam_problem()
        mat = dataclasses.replace(p.material, density=0.0)
        p0 = dataclasses.replace(p, material=mat)
        tip_t = euler_bernoulli_tip_deflection(p0)
        # traction-only tip: q = 1000 N/m
        assert tip_t == pytest.approx(
            1000.0 / 1765.18 * 1.2608428571428572e-4, rel=1e-12
        )

    def test_linearity_in_load(self):
        p = beam_problem()
        mat = dataclasses.replace(p.material, density=0.0)
        single = dataclasses.replace(p, material=mat)
        double = dataclasses.replace(
            p, material=dataclasses.replace(mat, traction=2e4)
        )
        assert euler_bernoulli_tip_deflection(double) == pytest.approx(
            2.0 * euler_bernoulli_tip_deflection(single), rel=1e-14
        )

    def test_centerline_anchors(self):
        p = beam_problem()
        uz = euler_bernoulli_centerline(p, [0.0, 0.5, 1.0])
        assert uz[0] == 0.0
        assert uz[2] == pytest.approx(-euler_bernoulli_tip_deflection(p), rel=1e-14)
        assert uz[1] < 0.0 and uz[1] > uz[2]

    def test_centerline_monotone(self):
        p = beam_problem()
        x = np.linspace(0.0, 1.0, 101)
        uz = euler_bernoulli_centerline(p, x)
        assert np.all(np.diff(uz) < 0.0)


class TestProblemConfigs:
    def test_beam_definition(self):
        p = beam_problem()
        assert p.name == "beam"
        assert p.modes == ("pinn-pde", "spinn-pde", "spinn-dem")
        assert p.lambda_bc == {"pinn-pde": 10.0, "spinn-pde": 100.0, "spinn-dem": 100.0}
        assert p.epochs == {"pinn-pde": 50000, "spinn-pde": 50000, "spinn-dem": 20000}
        assert p.hidden == (64, 64, 64) and p.rank == 64
        assert p.eval_resolution == (65, 17, 17)
        assert p.traction_vector == (0.0, 0.0, -1e4)
        assert p.clamp_faces == ((0, "x-"),)
        assert p.traction_faces == ((0, "z+"),)
        box = p.boxes[0]
        assert box.lo == (0.0, 0.0, 0.0) and box.hi == (1.0, 0.1, 0.1)
        assert box.resolution == (33, 33, 33)

    def test_beam_grid_override(self):
        p = beam_problem(grid=(5, 7, 9))
        assert p.boxes[0].resolution == (5, 7, 9)

    def test_angle_definition(self):
        p = angle_problem()
        assert p.name == "angle"
        assert p.modes == ("spinn-dem",)
        assert p.lambda_bc == {"spinn-dem": 1000.0}
        assert p.epochs == {"spinn-dem": 200000}
        assert p.displacement_nets == (("ux", 1), ("uy", 1), ("uz", 1))
        assert p.hidden == (64,) * 5
        assert p.traction_vector == (0.0, 0.0, -2.5e4)
        assert p.clamp_faces == ((0, "x-"), (1, "x-"))
        assert p.traction_faces == ((1, "z+"),)

    def test_get_problem(self):
        assert get_problem("beam").name == "beam"
        assert get_problem("beam", grid=(5, 5, 5)).boxes[0].resolution == (5, 5, 5)
        with pytest.raises(ConfigurationError, match="unknown problem"):
            get_problem("plate")


def _write_reference(path, n=8, with_sigma=True, comment=True):
    rng = np.random.default_rng(5)
    pts = rng.uniform((0, 0, 0), (1.0, 0.1, 0.1), size=(n, 3))
    u = rng.standard_normal((n, 3)) * 1e-4
    sigma = rng.standard_normal((n, 6)) * 1e4 if with_sigma else None
    export_prediction(
        path, pts, u, sigma, header={"problem": "beam"} if comment else None
    )
    return pts, u, sigma


class TestIngest:
    def test_roundtrip_with_sigma(self, tmp_path):
        path = tmp_path / "ref.csv"
        pts, u, sigma = _write_reference(path)
        ref = ingest_reference(path, beam_problem())
        np.testing.assert_allclose(ref.points, pts, rtol=1e-9)
        np.testing.assert_allclose(ref.u, u, rtol=1e-9)
        np.testing.assert_allclose(ref.sigma, sigma, rtol=1e-9)

    def test_roundtrip_displacement_only(self, tmp_path):
        path = tmp_path / "ref.csv"
        _, u, _ = _write_reference(path, with_sigma=False)
        ref = ingest_reference(path)
        assert ref.sigma is None
        np.testing.assert_allclose(ref.u, u, rtol=1e-9)

    def test_header_lines_are_comments(self, tmp_path):
        path = tmp_path / "ref.csv"
        _write_reference(path)
        head = path.read_text().splitlines()[:2]
        assert all(line.startswith("#") for line in head)
        assert "columns" in head[1] or "columns" in head[0]

    def test_inline_comment_and_blank_lines(self, tmp_path):
        path = tmp_path / "ref.csv"
        path.write_text(
            "\n# full-line comment\n"
            "0.5,0.05,0.05,1e-5,0.0,-2e-5  # trailing note\n\n"
        )
        ref = ingest_reference(path)
        assert len(ref.points) == 1
        assert ref.u[0, 2] == -2e-5

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0.1,0.2,0.3,1.0,2.0\n")
        with pytest.raises(ValueError, match=r"bad\.csv:1.*expected 6 or 12"):
            ingest_reference(path)

    def test_inconsistent_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "0.1,0.05,0.05,1.0,2.0,3.0\n"
            "0.2,0.05,0.05,1.0,2.0,3.0,4.0,5.0,6.0,7.0,8.0,9.0\n"
        )
        with pytest.raises(ValueError, match=":2.*inconsistent"):
            ingest_reference(path)

    def test_non_numeric_value(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# header\n0.1,0.05,0.05,1.0,two,3.0\n")
        with pytest.raises(ValueError, match=":2"):
            ingest_reference(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("# only a comment\n")
        with pytest.raises(ValueError, match="no data records"):
            ingest_reference(path)

    def test_out_of_domain_point(self, tmp_path):
        path = tmp_path / "outside.csv"
        path.write_text("2.0,0.0,0.0,1.0,2.0,3.0\n")
        with pytest.raises(ValueError, match="outside the beam domain"):
            ingest_reference(path, beam_problem())
        # without a problem the same file ingests fine
        assert len(ingest_reference(path).points) == 1

    def test_reference_field_derived_quantities(self):
        u = np.array([[3.0, 4.0, 0.0]])
        sigma = np.array([[1.0, 2.0, 3.0, 0.5, 0.25, 0.125]])
        ref = ReferenceField(points=np.zeros((1, 3)), u=u, sigma=sigma)
        assert ref.magnitude()[0] == pytest.approx(5.0, rel=1e-15)
        t = SymTensor3(*(sigma[0, i] for i in range(6)))
        assert ref.von_mises()[0] == pytest.approx(float(von_mises(t)), rel=1e-14)
        assert ReferenceField(points=ref.points, u=u).von_mises() is None


class TestPrediction:
    def _theta(self, problem, mode):
        obj = build_objective(problem, RunSettings(mode=mode, grid=(5, 5, 5), **TINY))
        return obj, obj.init_params(0)

    @pytest.mark.parametrize("mode", ["spinn-dem", "spinn-pde", "pinn-pde"])
    def test_shapes_and_finiteness(self, mode):
        p = beam_problem()
        obj, theta = self._theta(p, mode)
        pts = np.array([[0.5, 0.05, 0.05], [1.0, 0.1, 0.1]])
        u, sigma = predict_at(p, obj.bundle, mode, theta, pts)
        assert u.shape == (2, 3) and sigma.shape == (2, 6)
        assert np.all(np.isfinite(u)) and np.all(np.isfinite(sigma))

    def test_eval_points_cover_box(self):
        p = beam_problem()
        pts = eval_points(p)
        assert pts.shape == (65 * 17 * 17, 3)
        assert p.boxes[0].contains(pts).all()
        assert pts[:, 0].max() == 1.0 and pts[:, 0].min() == 0.0

    def test_eval_points_both_angle_boxes(self):
        p = angle_problem(((9, 5, 7), (9, 7, 5)))
        pts = eval_points(p)
        assert pts.shape == (9 * 5 * 7 + 9 * 7 * 5, 3)
        wall, flange = p.boxes
        in_wall = wall.contains(pts)
        in_flange = flange.contains(pts)
        assert (in_wall | in_flange).all()
        assert in_wall.any() and in_flange.any()

    def test_evaluator_zero_error_on_own_prediction(self, tmp_path):
        p = beam_problem()
        obj, theta = self._theta(p, "spinn-dem")
        pts = eval_points(p)[::40]
        u, sigma = predict_at(p, obj.bundle, "spinn-dem", theta, pts)
        ref = ReferenceField(points=pts, u=u, sigma=sigma)
        ev = make_evaluator(p, obj.bundle, "spinn-dem", reference=ref)
        errors = ev(theta)
        assert set(errors) == set(QUANTITIES)
        for q in QUANTITIES:
            assert errors[q] == pytest.approx(0.0, abs=1e-14)

    def test_evaluator_svm_none_without_stress_reference(self):
        p = beam_problem()
        obj, theta = self._theta(p, "spinn-dem")
        pts = eval_points(p)[::40]
        u, _ = predict_at(p, obj.bundle, "spinn-dem", theta, pts)
        ref = ReferenceField(points=pts, u=u)
        errors = make_evaluator(p, obj.bundle, "spinn-dem", reference=ref)(theta)
        assert errors["svm"] is None and errors["um"] == pytest.approx(0.0, abs=1e-14)

    def test_beam_fallback_scores_uz_only(self):
        p = beam_problem()
        obj, theta = self._theta(p, "spinn-dem")
        errors = make_evaluator(p, obj.bundle, "spinn-dem")(theta)
        assert isinstance(errors["uz"], float)
        assert errors["ux"] is None and errors["svm"] is None
        # an untrained network is nowhere near the oracle
        assert errors["uz"] > 0.5

    def test_angle_fallback_all_none(self):
        p = angle_problem(((5, 5, 5), (5, 5, 5)))
        obj = build_objective(p, RunSettings(mode="spinn-dem", **TINY))
        theta = obj.init_params(0)
        errors = make_evaluator(p, obj.bundle, "spinn-dem")(theta)
        assert all(errors[q] is None for q in QUANTITIES)

    def test_export_ingest_roundtrip_through_prediction(self, tmp_path):
        p = beam_problem()
        obj, theta = self._theta(p, "spinn-dem")
        pts = eval_points(p)[::100]
        u, sigma = predict_at(p, obj.bundle, "spinn-dem", theta, pts)
        path = tmp_path / "prediction.csv"
        export_prediction(path, pts, u, sigma, header={"mode": "spinn-dem"})
        ref = ingest_reference(path, p)
        np.testing.assert_allclose(ref.u, u, rtol=1e-9, atol=1e-300)
        np.testing.assert_allclose(ref.sigma, sigma, rtol=1e-9, atol=1e-300)
