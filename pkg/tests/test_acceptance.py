"""Acceptance gate: one test per criterion, each recording a summary line.

The lines are printed at the end of the run by ``conftest.pytest_terminal_summary``.
"""

import math
import time

import numpy as np
import pytest

from decwave.analysis import audit_cfl, convergence_study, estimate_lambda_max, rayleigh_quotient, sphere_mode_frequency
from decwave.cli import main
from decwave.dec import apply_laplacian, assemble_laplacian, build_dual_metrics, cotan_crosscheck, laplacian_from_forms
from decwave.errors import SimulationOverflow, StabilityWarning
from decwave.mesh import generate_flat_grid, generate_icosphere, generate_tetrahedron
from decwave.solvers import (
    DirichletCondition,
    cfl_bound,
    heat_dt_bound,
    heat_init,
    heat_step,
    solve_laplace,
    solve_poisson,
    wave_energy,
    wave_init,
    wave_step,
)

import conftest

pytestmark = pytest.mark.acceptance


def _op(mesh):
    return assemble_laplacian(mesh, build_dual_metrics(mesh))


def _record(number, passed, text):
    conftest.ACCEPTANCE_RESULTS[f"{number:02d}"] = (passed, f"{number:>2}. {text}")
    assert passed, text


class _Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_01_tetrahedron_laplace_kernel():
    with _Clock() as clock:
        op = _op(generate_tetrahedron(1.0))
        residual = float(np.max(np.abs(apply_laplacian(op, np.full(4, 2.75)))))
        sol = solve_laplace(op)
    ok = residual < 1e-12 and sol.gauge_fixed and clock.elapsed < 1.0
    _record(1, ok, f"tetrahedron Laplace kernel: max|L const| = {residual:.1e} (< 1e-12), "
                   f"gauge flagged = {sol.gauge_fixed}, {clock.elapsed:.3f} s (< 1 s)")


def test_02_tetrahedron_poisson():
    H = 7.5
    with _Clock() as clock:
        op = _op(generate_tetrahedron(1.0))
        sol = solve_poisson(op, np.zeros(4), DirichletCondition([(0, H)]))
    err = float(np.max(np.abs(sol.u[1:] - H)))
    ok = err < 1e-10 and sol.u[0] == H and clock.elapsed < 1.0
    _record(2, ok, f"tetrahedron Poisson u_A = {H}: max|u_BCD - H| = {err:.1e} (< 1e-10), {clock.elapsed:.3f} s (< 1 s)")


def test_03_cfl_closed_form():
    tet = cfl_bound(_op(generate_tetrahedron(1.0)), 1.0).dt_max
    tet_err = abs(tet - 1 / math.sqrt(2))
    worst = 0.0
    for nx, h in [(9, 1.0), (17, 0.25), (12, 0.37)]:
        b = cfl_bound(_op(generate_flat_grid(nx, nx, h)), 1.0)
        interior = [i + nx * j for i in range(1, nx - 1) for j in range(1, nx - 1)]
        worst = max(worst, float(np.max(np.abs(b.per_vertex_dt[interior] - h / math.sqrt(2)))))
        worst = max(worst, abs(b.dt_max - h / math.sqrt(2)))
    ok = tet_err < 1e-12 and worst < 1e-12
    _record(3, ok, f"CFL closed form: tetrahedron |dt - 1/sqrt2| = {tet_err:.1e}, "
                   f"grid interior |dt - h/sqrt2| = {worst:.1e} (< 1e-12)")


def test_04_stability_bracketing():
    with _Clock() as clock:
        mesh = generate_icosphere(1.0, 3)
        op = _op(mesh)
        u0 = np.random.default_rng(42).uniform(-1.0, 1.0, mesh.n_vertices)
        dt = 0.9 * cfl_bound(op, 1.0).dt_max
        state = wave_init(op, u0, np.zeros_like(u0), dt, 1.0)
        e0 = wave_energy(state, op)
        peak, drift = float(np.max(np.abs(u0))), 0.0
        for _ in range(1999):
            state = wave_step(state, op)
            peak = max(peak, float(np.max(np.abs(state.u_curr))))
            drift = max(drift, abs(wave_energy(state, op) - e0) / e0)

        lam = estimate_lambda_max(op).lambda_max
        dt_bad = 1.05 * 2.0 / math.sqrt(lam)
        overflow_step = None
        with pytest.warns(StabilityWarning):
            state = wave_init(op, u0, np.zeros_like(u0), dt_bad, 1.0)
        try:
            for _ in range(1999):
                state = wave_step(state, op)
        except SimulationOverflow as exc:
            overflow_step = exc.time_index
    ok = peak < 100 and drift < 1e-6 and overflow_step is not None and clock.elapsed < 30.0
    _record(4, ok, f"stability bracketing (icosphere 3): stable max|u| = {peak:.3f} (< 100), "
                   f"energy drift = {drift:.1e} (< 1e-6); 1.05x spectral dt overflows at step "
                   f"{overflow_step} (<= 2000), {clock.elapsed:.2f} s (< 30 s)")


def test_05_gershgorin_conservative():
    meshes = [generate_tetrahedron(1.0), generate_tetrahedron(0.3)]
    meshes += [generate_icosphere(r, s) for r, s in [(1.0, 0), (1.0, 1), (2.0, 2), (1.0, 3), (1.0, 4)]]
    meshes += [generate_flat_grid(n, m, h) for n, m, h in [(2, 2, 1.0), (17, 17, 0.25), (9, 23, 0.1)]]
    margins = []
    for mesh in meshes:
        a = audit_cfl(_op(mesh), 1.0)
        margins.append(a.exact_bound + 1e-12 - a.vertex_bound)
    tet = audit_cfl(_op(generate_tetrahedron(1.0)), 1.0)
    tet_ok = (abs(tet.vertex_bound - 1 / math.sqrt(2)) < 1e-9
              and abs(tet.exact_bound - 2 / math.sqrt(16 / 3)) < 1e-9)
    ok = min(margins) >= 0 and tet_ok
    _record(5, ok, f"Gershgorin conservative on {len(meshes)} generated meshes (min margin {min(margins):.2e}); "
                   f"tetrahedron {tet.vertex_bound:.9f} vs {tet.exact_bound:.9f}, ratio {tet.ratio:.4f}")


def test_06_rectangular_grid_order():
    with _Clock() as clock:
        rows = convergence_study("flat_standing_wave", 3)
    orders = [r.observed_order for r in rows[1:]]
    ok = all(1.7 <= p <= 2.3 for p in orders) and clock.elapsed < 60.0
    _record(6, ok, f"flat standing-wave observed orders {', '.join(f'{p:.4f}' for p in orders)} "
                   f"(in [1.7, 2.3]), {clock.elapsed:.2f} s (< 60 s)")


def test_07_sphere_spectrum():
    with _Clock() as clock:
        mesh = generate_icosphere(1.0, 4)
        op = _op(mesh)
        rq = rayleigh_quotient(op, mesh.vertices[:, 2])
        omega = sphere_mode_frequency(op, mesh, c=1.0, radius=1.0)
    rq_err = abs(rq - 2.0) / 2.0
    om_err = abs(omega - math.sqrt(2.0)) / math.sqrt(2.0)
    ok = rq_err < 0.05 and om_err < 0.05 and clock.elapsed < 30.0
    _record(7, ok, f"sphere degree-1 mode (icosphere 4): rayleigh = {rq:.6f} ({rq_err:.2%} from 2), "
                   f"omega = {omega:.6f} ({om_err:.2%} from sqrt2), {clock.elapsed:.2f} s (< 30 s)")


def test_08_heat_conservation_positivity():
    with _Clock() as clock:
        mesh = generate_icosphere(1.0, 3)
        op = _op(mesh)
        u0 = np.random.default_rng(42).uniform(0.0, 1.0, mesh.n_vertices)
        state = heat_init(op, u0, 0.9 * heat_dt_bound(op, 1.0), 1.0)
        total0 = float(np.sum(op.dual_areas * u0))
        low = float(u0.min())
        for _ in range(1000):
            state = heat_step(state, op)
            low = min(low, float(state.u_curr.min()))
        drift = abs(float(np.sum(op.dual_areas * state.u_curr)) - total0) / total0
    ok = drift < 1e-9 and low >= -1e-12 and clock.elapsed < 10.0
    _record(8, ok, f"heat on icosphere 3, 1000 steps: weighted total drift = {drift:.1e} (< 1e-9), "
                   f"min u = {low:.3e} (>= -1e-12), {clock.elapsed:.2f} s (< 10 s)")


def test_09_operator_equivalences():
    worst_entry, worst_cot = 0.0, 0.0
    for mesh in (generate_tetrahedron(1.0), generate_flat_grid(17, 17, 0.25), generate_icosphere(1.0, 3)):
        metrics = build_dual_metrics(mesh)
        a = assemble_laplacian(mesh, metrics).matrix()
        b = laplacian_from_forms(mesh, metrics).matrix()
        diff = abs(a - b)
        worst_entry = max(worst_entry, float(diff.max()) if diff.nnz else 0.0)
        worst_cot = max(worst_cot, cotan_crosscheck(mesh, metrics))
    ok = worst_entry < 1e-12 and worst_cot < 1e-10
    _record(9, ok, f"operator equivalences: forms vs assembly max entry diff = {worst_entry:.1e} (< 1e-12), "
                   f"cotan cross-check = {worst_cot:.1e} (< 1e-10)")


def test_10_determinism(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("""
[mesh]
generator = icosphere
subdivisions = 3
[model]
type = wave
steps = 200
snapshot_every = 20
[source]
kind = gaussian_pulse
vertex = 5
t0 = 0.2
width = 0.05
[initial]
kind = random
amplitude = 0.5
""")
    for d in ("a", "b"):
        assert main(["--quiet", "simulate", str(cfg), "--seed", "42", "--output-dir", str(tmp_path / d)]) == 0
    names = sorted(p.name for p in (tmp_path / "a").glob("frame_*"))
    same = [(tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names]
    ok = len(names) == 11 and all(same)
    _record(10, ok, f"determinism: {sum(same)}/{len(names)} frame files byte-identical across two seeded runs")
