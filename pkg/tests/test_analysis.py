import csv
import math

import numpy as np
import pytest
import scipy.linalg

from decwave.analysis import (
    audit_cfl,
    convergence_study,
    estimate_lambda_max,
    measure_frequency,
    rayleigh_quotient,
    sphere_mode_frequency,
    write_convergence_csv,
)
from decwave.errors import SolverError
from decwave.mesh import generate_flat_grid, generate_icosphere, generate_tetrahedron
from decwave.solvers import cfl_bound

from conftest import build


def _dense_lambda_max(op):
    # independent oracle: generalized symmetric eigenproblem K x = lambda P x
    K = -op.symmetric.toarray()
    return scipy.linalg.eigh(K, np.diag(op.dual_areas), eigvals_only=True)[-1]


@pytest.fixture(scope="module")
def flat_rows():
    return convergence_study("flat_standing_wave", 3)


class TestSpectrum:
    def test_tetrahedron(self, tet):
        est = estimate_lambda_max(tet[2])
        assert est.lambda_max == pytest.approx(16 / 3, abs=1e-9)
        assert est.gershgorin_bound == pytest.approx(8.0, abs=1e-12)
        assert est.residual < 1e-8

    @pytest.mark.parametrize("name", ["grid", "ico2", "ico3"])
    def test_matches_dense_oracle(self, request, name):
        op = request.getfixturevalue(name)[2]
        est = estimate_lambda_max(op)
        assert est.lambda_max == pytest.approx(_dense_lambda_max(op), rel=1e-9)
        assert 0 <= est.lambda_max <= est.gershgorin_bound * (1 + 1e-9)
        assert est.residual < 1e-8

    def test_stationary(self, ico3):
        op = ico3[2]
        est = estimate_lambda_max(op)
        rq = rayleigh_quotient(op, est.eigenvector)
        assert abs(rq - est.lambda_max) < 1e-8 * est.lambda_max

    def test_grid_checkerboard_limit(self):
        # free boundary halves both cells and weights, so the checkerboard
        # mode is an exact eigenvector and the Gershgorin value is attained
        h = 0.1
        mesh, _, op = build(generate_flat_grid(41, 41, h))
        i = np.rint(mesh.vertices[:, 0] / h) + np.rint(mesh.vertices[:, 1] / h)
        checker = (-1.0) ** i
        assert rayleigh_quotient(op, checker) == pytest.approx(8 / h**2, rel=1e-12)
        lam = estimate_lambda_max(op).lambda_max
        assert lam == pytest.approx(8 / h**2, rel=1e-9)

    def test_deterministic(self, ico2):
        a = estimate_lambda_max(ico2[2], seed=3)
        b = estimate_lambda_max(ico2[2], seed=3)
        assert a.lambda_max == b.lambda_max

    def test_refinement_failure_reported(self, ico3):
        # an impossible residual target cannot be met even after refinement
        with pytest.raises(SolverError):
            estimate_lambda_max(ico3[2], residual_tol=0.0, max_iterations=5)


class TestAudit:
    def test_tetrahedron(self, tet):
        a = audit_cfl(tet[2], 1.0)
        assert a.vertex_bound == pytest.approx(1 / math.sqrt(2), abs=1e-9)
        assert a.exact_bound == pytest.approx(2 / math.sqrt(16 / 3), abs=1e-9)
        assert a.ratio == pytest.approx(math.sqrt(2 / 3), abs=1e-9)
        assert a.is_conservative

    def test_grid_ratio_near_one(self):
        op = build(generate_flat_grid(41, 41, 0.1))[2]
        a = audit_cfl(op, 1.0)
        assert a.is_conservative
        assert 0.98 < a.ratio <= 1 + 1e-12

    @pytest.mark.parametrize("make", [
        lambda: generate_tetrahedron(0.7),
        lambda: generate_icosphere(1.0, 0),
        lambda: generate_icosphere(3.0, 2),
        lambda: generate_flat_grid(6, 11, 0.4),
    ])
    def test_conservative_everywhere(self, make):
        a = audit_cfl(build(make())[2], 2.5)
        assert a.vertex_bound <= a.exact_bound + 1e-12


class TestRayleigh:
    def test_constant(self, ico2):
        assert rayleigh_quotient(ico2[2], np.full(ico2[0].n_vertices, 2.0)) == pytest.approx(0.0, abs=1e-15)

    def test_tetrahedron_eigenvector(self, tet):
        assert rayleigh_quotient(tet[2], [3.0, -1.0, -1.0, -1.0]) == pytest.approx(16 / 3, abs=1e-12)

    def test_zero_field(self, tet):
        with pytest.raises(ValueError):
            rayleigh_quotient(tet[2], np.zeros(4))

    @pytest.mark.parametrize("radius", [1.0, 2.0])
    def test_sphere_degree_one(self, radius):
        mesh, _, op = build(generate_icosphere(radius, 4))
        rq = rayleigh_quotient(op, mesh.vertices[:, 2] / radius)
        assert rq == pytest.approx(2 / radius**2, rel=0.05)


class TestFrequency:
    def test_pure_cosine(self):
        t = np.linspace(0, 10, 4001)
        assert measure_frequency(t, np.cos(2.3 * t)) == pytest.approx(2.3, rel=1e-4)

    def test_too_short(self):
        with pytest.raises(SolverError):
            measure_frequency([0, 1, 2], [1.0, 0.5, 0.2])

    def test_sphere_mode(self, ico3):
        mesh, _, op = ico3
        omega = sphere_mode_frequency(op, mesh, c=1.0, radius=1.0)
        assert omega == pytest.approx(math.sqrt(2.0), rel=0.05)


class TestConvergence:
    def test_flat_second_order(self, flat_rows):
        assert [r.level for r in flat_rows] == [0, 1, 2]
        assert flat_rows[0].observed_order is None
        for r in flat_rows[1:]:
            assert 1.7 <= r.observed_order <= 2.3
        errs = [r.error_max for r in flat_rows]
        assert errs[0] > errs[1] > errs[2] >= 0
        hs = [r.h for r in flat_rows]
        assert hs == sorted(hs, reverse=True)
        assert flat_rows[0].dt == pytest.approx(0.4 * hs[0] / math.sqrt(2))

    def test_sphere_monotone(self):
        rows = convergence_study("sphere_harmonic_wave", 3)
        errs = [r.error_max for r in rows]
        assert errs[0] > errs[1] > errs[2]

    def test_time_refinement_stays_within_factor_two(self):
        rows = convergence_study("flat_standing_wave", 3, refine="time")
        assert len({r.h for r in rows}) == 1
        errs = [r.error_max for r in rows]
        assert max(errs) <= 2 * min(errs)

    def test_levels_minimum(self):
        with pytest.raises(ValueError):
            convergence_study("flat_standing_wave", 2)

    def test_unknown_problem(self):
        with pytest.raises(ValueError):
            convergence_study("torus_wave", 3)

    def test_csv(self, flat_rows, tmp_path):
        path = tmp_path / "conv.csv"
        write_convergence_csv(flat_rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "level,h,dt,error_max,observed_order"
        parsed = list(csv.DictReader(lines))
        assert len(parsed) == 3
        assert parsed[0]["observed_order"] == ""
        assert float(parsed[2]["error_max"]) == flat_rows[2].error_max
        assert float(parsed[1]["observed_order"]) == flat_rows[1].observed_order


def test_cfl_bound_tracks_sphere_radius():
    small = cfl_bound(build(generate_icosphere(1.0, 2))[2], 1.0).dt_max
    large = cfl_bound(build(generate_icosphere(4.0, 2))[2], 1.0).dt_max
    assert large == pytest.approx(4 * small, rel=1e-12)
