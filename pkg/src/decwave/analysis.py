"""Spectral estimates, stability audits and convergence studies."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .dec import LaplaceOperator, assemble_laplacian, build_dual_metrics
from .errors import SolverError
from .mesh import generate_flat_grid, generate_icosphere
from .solvers import DirichletCondition, cfl_bound, gershgorin_bound, wave_init, wave_step

logger = logging.getLogger(__name__)

DEFAULT_SEED = 42


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    lambda_max: float
    iterations: int
    residual: float
    gershgorin_bound: float
    eigenvector: np.ndarray


def rayleigh_quotient(op: LaplaceOperator, u) -> float:
    """``sum_e w_e (du_e)^2 / sum_v P_v u_v^2`` for the operator ``-L``."""
    u = np.asarray(u, dtype=np.float64)
    den = float(np.sum(op.dual_areas * u**2))
    if den == 0:
        raise ValueError("rayleigh quotient of the zero field is undefined")
    du = u[op.edges[:, 1]] - u[op.edges[:, 0]]
    return float(np.sum(op.weights * du**2)) / den


def estimate_lambda_max(op: LaplaceOperator, *, rtol=1e-10, residual_tol=1e-8,
                        max_iterations=10_000, seed=DEFAULT_SEED) -> SpectrumEstimate:
    """Largest eigenvalue of ``-L`` by power iteration in the P-inner product.

    ``-L = P^{-1} K`` is self-adjoint for ``<u, v> = sum P u v``, so the
    Rayleigh quotient is the eigenvalue estimate. Iteration stops once it
    changes by less than ``rtol`` (relative) with an eigen-residual
    ``|(-L)x - lambda x|_P / lambda`` below ``residual_tol``.

    Icosphere spectra have their top eigenvalues clustered to within 1e-5
    (relative) or closer, where plain power iteration cannot resolve the
    vector in ``max_iterations``. In that case the power iterate seeds a
    Lanczos solve (ARPACK) for the same generalized problem
    ``K x = lambda P x``; only a failure there is an error.
    """
    P = op.dual_areas
    K = (-op.symmetric).tocsr()
    lam_g = gershgorin_bound(op)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.n_vertices)
    x -= np.sum(P * x) / P.sum()
    x /= math.sqrt(np.sum(P * x * x))

    lam_old = 0.0
    residual = math.inf
    for it in range(1, max_iterations + 1):
        y = (K @ x) / P
        lam = float(np.sum(P * x * y))  # x is P-normalised
        if lam <= 0:
            return SpectrumEstimate(0.0, it, 0.0, lam_g, x)
        r = y - lam * x
        residual = math.sqrt(np.sum(P * r * r)) / lam
        if abs(lam - lam_old) <= rtol * lam and residual < residual_tol:
            return SpectrumEstimate(lam, it, residual, lam_g, x)
        lam_old = lam
        x = y / math.sqrt(np.sum(P * y * y))

    logger.debug("power iteration stalled (residual %.2e); refining with Lanczos", residual)
    try:
        _, vecs = eigsh(K.tocsc(), k=1, M=sp.diags(P).tocsc(), which="LA", v0=x)
    except ArpackNoConvergence as exc:
        raise SolverError(f"eigenvalue iteration did not converge: {exc}") from None
    x = vecs[:, 0] / math.sqrt(np.sum(P * vecs[:, 0] ** 2))
    y = (K @ x) / P
    lam = float(np.sum(P * x * y))
    r = y - lam * x
    residual = math.sqrt(np.sum(P * r * r)) / lam
    if not residual < residual_tol:
        raise SolverError(f"eigen-residual {residual:.2e} above {residual_tol:.0e} after refinement")
    return SpectrumEstimate(lam, max_iterations, residual, lam_g, x)


@dataclass(frozen=True)
class CflAudit:
    vertex_bound: float
    exact_bound: float
    ratio: float
    lambda_max: float
    gershgorin_bound: float

    @property
    def is_conservative(self) -> bool:
        return self.vertex_bound <= self.exact_bound + 1e-12


def audit_cfl(op: LaplaceOperator, c: float = 1.0, *, seed=DEFAULT_SEED, spectrum=None) -> CflAudit:
    """Compare the per-vertex bound with the spectral limit ``2 / (c sqrt(lambda_max))``."""
    spectrum = spectrum or estimate_lambda_max(op, seed=seed)
    per_vertex = cfl_bound(op, c).dt_max
    exact = 2.0 / (c * math.sqrt(spectrum.lambda_max))
    audit = CflAudit(per_vertex, exact, per_vertex / exact, spectrum.lambda_max, spectrum.gershgorin_bound)
    if not audit.is_conservative:
        logger.warning("per-vertex CFL bound %.6g exceeds spectral bound %.6g", per_vertex, exact)
    return audit


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    h: float
    dt: float
    error_max: float
    observed_order: float | None


def _with_orders(raw):
    rows = []
    for i, (level, h, dt, err) in enumerate(raw):
        order = None
        if i > 0:
            prev = raw[i - 1]
            if err > 0 and prev[3] > 0:
                order = math.log(prev[3] / err) / math.log(prev[1] / h if h != prev[1] else prev[2] / dt)
        rows.append(ConvergenceRow(level, h, dt, err, order))
    return rows


def _operator(mesh):
    return assemble_laplacian(mesh, build_dual_metrics(mesh))


def _flat_standing_wave(levels, nx0, c, length, final_time, refine):
    """Dirichlet square, mode sin(pi x/L) sin(pi y/L), exact cos(omega t) decay-free."""
    omega = c * math.pi * math.sqrt(2.0) / length
    h0 = length / (nx0 - 1)
    dt0 = 0.4 * h0 / (c * math.sqrt(2.0))
    n_steps0 = max(2, round(final_time / dt0))
    T = n_steps0 * dt0
    raw = []
    for level in range(levels):
        factor = 2**level
        nx = nx0 if refine == "time" else (nx0 - 1) * factor + 1
        h = length / (nx - 1)
        dt = dt0 / factor
        n_steps = n_steps0 * factor
        mesh = generate_flat_grid(nx, nx, h)
        op = _operator(mesh)
        x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
        mode = np.sin(math.pi * x / length) * np.sin(math.pi * y / length)
        on_boundary = (
            np.isclose(x, 0) | np.isclose(y, 0) | np.isclose(x, length) | np.isclose(y, length)
        )
        pins = DirichletCondition([(int(v), 0.0) for v in np.nonzero(on_boundary)[0]])
        state = wave_init(op, mode, np.zeros_like(mode), dt, c)
        pins.apply(state.u_curr)
        for _ in range(n_steps - 1):
            state = wave_step(state, op, constraints=pins)
        exact = math.cos(omega * T) * mode
        err = float(np.max(np.abs(state.u_curr - exact)))
        logger.info("flat level %d: nx=%d dt=%.4g error=%.3e", level, nx, dt, err)
        raw.append((level, h, dt, err))
    return _with_orders(raw)


def measure_frequency(times, signal) -> float:
    """Angular frequency from linearly interpolated zero crossings."""
    times = np.asarray(times)
    signal = np.asarray(signal)
    s0, s1 = signal[:-1], signal[1:]
    idx = np.nonzero((s0 > 0) & (s1 <= 0) | (s0 < 0) & (s1 >= 0))[0]
    if len(idx) < 2:
        raise SolverError("fewer than two zero crossings; run longer to measure a frequency")
    crossings = times[idx] + (times[idx + 1] - times[idx]) * s0[idx] / (s0[idx] - s1[idx])
    half_period = (crossings[-1] - crossings[0]) / (len(crossings) - 1)
    return math.pi / half_period


def sphere_mode_frequency(op: LaplaceOperator, mesh, c=1.0, radius=1.0, periods=3.0, dt=None) -> float:
    """Evolve ``u = z/R`` and measure the angular frequency of its projection."""
    dt = dt or 0.9 * cfl_bound(op, c).dt_max
    mode = mesh.vertices[:, 2] / radius
    weight = op.dual_areas * mode
    n_steps = int(math.ceil(periods * 2 * math.pi / (c * math.sqrt(2.0) / radius) / dt))
    state = wave_init(op, mode, np.zeros_like(mode), dt, c)
    times = [0.0, dt]
    signal = [float(weight @ state.u_prev), float(weight @ state.u_curr)]
    for _ in range(n_steps):
        state = wave_step(state, op)
        times.append(state.time)
        signal.append(float(weight @ state.u_curr))
    return measure_frequency(times, signal)


def _sphere_harmonic_wave(levels, subdivisions0, c, radius, refine):
    omega = c * math.sqrt(2.0) / radius
    raw = []
    dt0 = None
    for level in range(levels):
        s = subdivisions0 if refine == "time" else subdivisions0 + level
        mesh = generate_icosphere(radius, s)
        op = _operator(mesh)
        if refine == "time":
            dt0 = dt0 or 0.9 * cfl_bound(op, c).dt_max
            dt = dt0 / 2**level
        else:
            dt = 0.9 * cfl_bound(op, c).dt_max
        measured = sphere_mode_frequency(op, mesh, c, radius, dt=dt)
        err = abs(measured - omega) / omega
        h = float(mesh.edge_lengths().mean())
        logger.info("sphere level %d: subdivisions=%d omega=%.6f error=%.3e", level, s, measured, err)
        raw.append((level, h, dt, err))
    return _with_orders(raw)


PROBLEMS = ("flat_standing_wave", "sphere_harmonic_wave")


def convergence_study(problem: str, levels: int = 3, *, c: float = 1.0, refine: str = "space",
                      nx0: int = 17, length: float = 1.0, final_time: float = 1.0,
                      subdivisions0: int = 2, radius: float = 1.0):
    """Refinement study returning one :class:`ConvergenceRow` per level.

    ``refine="space"`` halves h (and dt with it); ``refine="time"`` keeps the
    coarsest mesh and only halves dt. ``error_max`` is the max-norm error at
    the final time for the flat problem and the relative angular-frequency
    error of the degree-1 mode for the sphere problem.
    """
    if levels < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    if refine not in ("space", "time"):
        raise ValueError(f"refine must be 'space' or 'time', got {refine!r}")
    if problem == "flat_standing_wave":
        return _flat_standing_wave(levels, nx0, c, length, final_time, refine)
    if problem == "sphere_harmonic_wave":
        return _sphere_harmonic_wave(levels, subdivisions0, c, radius, refine)
    raise ValueError(f"unknown problem {problem!r}; choose from {PROBLEMS}")


def write_convergence_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["level", "h", "dt", "error_max", "observed_order"])
        for r in rows:
            order = "" if r.observed_order is None else repr(r.observed_order)
            writer.writerow([r.level, repr(r.h), repr(r.dt), repr(r.error_max), order])
