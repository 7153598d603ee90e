"""Time stepping (wave, heat), elliptic solves and stability bounds.

All routines take a :class:`~decwave.dec.LaplaceOperator` and never modify
it. States are small immutable records; each step returns a new one.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .dec import NEGATIVE_DUAL_TOLERANCE, LaplaceOperator, apply_laplacian
from .errors import (
    IllShapedMeshError,
    IncompatibleRhsError,
    NonWellCenteredWarning,
    SimulationOverflow,
    SingularSystemError,
    SolverError,
    StabilityWarning,
)

logger = logging.getLogger(__name__)

OVERFLOW_THRESHOLD = 1e12
AUTO_DT_FACTOR = 0.9
CG_RTOL = 1e-12


# ---------------------------------------------------------------------------
# sources and boundary constraints
# ---------------------------------------------------------------------------

SOURCE_KINDS = ("gaussian_pulse", "sine", "constant", "none")


@dataclass(frozen=True)
class SourceSignal:
    """Point source injected at one vertex.

    ``gaussian_pulse``: ``amplitude * exp(-(t - center_time)**2 / (2 width**2))``;
    ``sine``: ``amplitude * sin(2 pi frequency t)``; ``constant``: ``amplitude``.
    ``hard`` injection overwrites the vertex value, ``additive`` adds to it.
    """

    kind: str = "none"
    vertex: int = 0
    amplitude: float = 1.0
    center_time: float = 0.0
    width: float = 1.0
    frequency: float = 1.0
    injection: str = "hard"

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.injection not in ("hard", "additive"):
            raise ValueError(f"unknown injection mode {self.injection!r}")
        if self.kind == "gaussian_pulse" and not self.width > 0:
            raise ValueError("gaussian pulse width must be positive")
        if self.vertex < 0:
            raise ValueError("source vertex must be non-negative")

    def value(self, t: float) -> float:
        if self.kind == "gaussian_pulse":
            return self.amplitude * math.exp(-((t - self.center_time) ** 2) / (2.0 * self.width**2))
        if self.kind == "sine":
            return self.amplitude * math.sin(2.0 * math.pi * self.frequency * t)
        if self.kind == "constant":
            return self.amplitude
        return 0.0

    def apply(self, u: np.ndarray, t: float) -> None:
        """Inject in place at time ``t``."""
        if self.kind == "none":
            return
        if self.vertex >= len(u):
            raise ValueError(f"source vertex {self.vertex} out of range for {len(u)} vertices")
        if self.injection == "hard":
            u[self.vertex] = self.value(t)
        else:
            u[self.vertex] += self.value(t)


NO_SOURCE = SourceSignal()


@dataclass(frozen=True)
class DirichletCondition:
    """Pinned vertex values, ``constrained = ((vertex, value), ...)``."""

    constrained: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "constrained", tuple((int(v), float(x)) for v, x in self.constrained))
        idx = [v for v, _ in self.constrained]
        if len(set(idx)) != len(idx):
            raise ValueError("constrained vertex indices must be unique")
        if any(v < 0 for v in idx):
            raise ValueError("constrained vertex indices must be non-negative")

    @property
    def vertices(self) -> np.ndarray:
        return np.array([v for v, _ in self.constrained], dtype=np.int64)

    @property
    def values(self) -> np.ndarray:
        return np.array([x for _, x in self.constrained], dtype=np.float64)

    def check(self, n_vertices: int) -> None:
        if len(self.constrained) and self.vertices.max() >= n_vertices:
            raise ValueError(f"constrained vertex {int(self.vertices.max())} out of range")

    def apply(self, u: np.ndarray) -> None:
        if self.constrained:
            u[self.vertices] = self.values

    def __bool__(self):
        return bool(self.constrained)


# ---------------------------------------------------------------------------
# stability bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StabilityBound:
    dt_max: float
    per_vertex_dt: np.ndarray
    argmin_vertex: int


def _warn_negative_weights(op):
    # zero-weight diagonals of right triangles come out as +-1e-17
    n = int(np.count_nonzero(op.weights < -NEGATIVE_DUAL_TOLERANCE * np.max(np.abs(op.weights))))
    if n:
        warnings.warn(
            f"{n} negative edge weight(s) (non-well-centered mesh) included as-is",
            NonWellCenteredWarning,
            stacklevel=3,
        )


def cfl_bound(op: LaplaceOperator, c: float) -> StabilityBound:
    """Per-vertex explicit wave step limit ``sqrt(2 P_v / sum w) / c``."""
    if not c > 0:
        raise ValueError("wave speed must be positive")
    _warn_negative_weights(op)
    wsum = op.weight_sums()
    radicand = np.full(op.n_vertices, np.inf)
    nz = wsum != 0
    radicand[nz] = 2.0 * op.dual_areas[nz] / wsum[nz]
    bad = np.nonzero(~(radicand > 0))[0]
    if len(bad):
        v = int(bad[0])
        raise IllShapedMeshError(
            f"stability radicand at vertex {v} is {radicand[v]:.3e} (non-positive)", vertex=v
        )
    per_vertex = np.sqrt(radicand) / c
    v = int(np.argmin(per_vertex))
    return StabilityBound(dt_max=float(per_vertex[v]), per_vertex_dt=per_vertex, argmin_vertex=v)


def gershgorin_bound(op: LaplaceOperator) -> float:
    """``max_v (2 / P_v) sum w``, an upper bound on the spectrum of ``-L``."""
    return float(np.max(2.0 * op.weight_sums() / op.dual_areas))


def heat_dt_bound(op: LaplaceOperator, c: float) -> float:
    """Forward-Euler heat step limit ``2 / (c * lambda_G)``."""
    if not c > 0:
        raise ValueError("diffusivity must be positive")
    _warn_negative_weights(op)
    lam = gershgorin_bound(op)
    if not lam > 0:
        raise IllShapedMeshError(f"Gershgorin bound {lam:.3e} is non-positive")
    return 2.0 / (c * lam)


# ---------------------------------------------------------------------------
# explicit time stepping
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WaveState:
    """Two consecutive layers: ``u_curr`` at ``time_index * dt``, ``u_prev`` one step earlier."""

    u_prev: np.ndarray
    u_curr: np.ndarray
    time_index: int
    dt: float
    c: float

    @property
    def time(self) -> float:
        return self.time_index * self.dt


@dataclass(frozen=True, eq=False)
class HeatState:
    u_curr: np.ndarray
    time_index: int
    dt: float
    c: float

    @property
    def time(self) -> float:
        return self.time_index * self.dt


def _field(u, n, name):
    u = np.array(u, dtype=np.float64)
    if u.shape != (n,):
        raise ValueError(f"{name} has shape {u.shape}, expected ({n},)")
    if not np.all(np.isfinite(u)):
        raise ValueError(f"{name} contains non-finite values")
    return u


def check_overflow(u, time_index, threshold=OVERFLOW_THRESHOLD):
    peak = np.max(np.abs(u))
    if not peak <= threshold:  # also catches nan
        raise SimulationOverflow(
            f"field magnitude {peak:.3e} exceeds {threshold:.0e} at time index {time_index}",
            time_index=time_index,
        )


def wave_init(op: LaplaceOperator, u0, v0, dt: float, c: float) -> WaveState:
    """Second-order Taylor start: ``u1 = u0 + dt v0 + (c dt)^2/2 L u0``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not c > 0:
        raise ValueError("wave speed must be positive")
    n = op.n_vertices
    u0 = _field(u0, n, "u0")
    v0 = _field(v0, n, "v0")
    limit = cfl_bound(op, c).dt_max
    if dt > limit:
        warnings.warn(f"dt = {dt:.6g} exceeds the CFL bound {limit:.6g}", StabilityWarning, stacklevel=2)
    u1 = u0 + dt * v0 + 0.5 * (c * dt) ** 2 * apply_laplacian(op, u0)
    return WaveState(u_prev=u0, u_curr=u1, time_index=1, dt=float(dt), c=float(c))


def wave_step(state: WaveState, op: LaplaceOperator, source: SourceSignal = NO_SOURCE,
              constraints: DirichletCondition | None = None) -> WaveState:
    """One leapfrog step ``u_new = 2 u - u_prev + (c dt)^2 L u``.

    The source is injected at the new time, then any Dirichlet constraints
    are re-imposed.
    """
    u = state.u_curr
    u_new = 2.0 * u - state.u_prev + (state.c * state.dt) ** 2 * apply_laplacian(op, u)
    n = state.time_index + 1
    source.apply(u_new, n * state.dt)
    if constraints:
        constraints.apply(u_new)
    check_overflow(u_new, n)
    return replace(state, u_prev=u, u_curr=u_new, time_index=n)


def wave_energy(state: WaveState, op: LaplaceOperator) -> float:
    """Discrete leapfrog energy, exactly conserved by source-free stepping.

    Kinetic part uses the staggered velocity ``(u_curr - u_prev)/dt``; the
    potential part pairs the two layers through the edge weights.
    """
    vel = (state.u_curr - state.u_prev) / state.dt
    kinetic = 0.5 * np.sum(op.dual_areas * vel**2)
    a, b = op.edges[:, 0], op.edges[:, 1]
    du_curr = state.u_curr[b] - state.u_curr[a]
    du_prev = state.u_prev[b] - state.u_prev[a]
    potential = 0.5 * state.c**2 * np.sum(op.weights * du_curr * du_prev)
    return float(kinetic + potential)


def heat_init(op: LaplaceOperator, u0, dt: float, c: float) -> HeatState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    u0 = _field(u0, op.n_vertices, "u0")
    limit = heat_dt_bound(op, c)
    if dt > limit:
        warnings.warn(f"dt = {dt:.6g} exceeds the heat bound {limit:.6g}", StabilityWarning, stacklevel=2)
    return HeatState(u_curr=u0, time_index=0, dt=float(dt), c=float(c))


def heat_step(state: HeatState, op: LaplaceOperator, source: SourceSignal = NO_SOURCE,
              constraints: DirichletCondition | None = None) -> HeatState:
    """Forward Euler ``u_new = u + c dt L u``."""
    u_new = state.u_curr + state.c * state.dt * apply_laplacian(op, state.u_curr)
    n = state.time_index + 1
    source.apply(u_new, n * state.dt)
    if constraints:
        constraints.apply(u_new)
    check_overflow(u_new, n)
    return replace(state, u_curr=u_new, time_index=n)


# ---------------------------------------------------------------------------
# elliptic problems
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EllipticSolution:
    """Result of :func:`solve_laplace` / :func:`solve_poisson`.

    ``gauge_fixed`` is set when the system had the constants in its kernel
    and the zero-mean (P-weighted) representative was chosen.
    """

    u: np.ndarray
    gauge_fixed: bool = False
    iterations: int = 0
    residual: float = 0.0
    notes: list = field(default_factory=list)


def conjugate_gradient(A, b, *, rtol=CG_RTOL, maxiter=None, x0=None):
    """Jacobi-preconditioned CG for symmetric positive (semi)definite ``A``.

    Returns ``(x, iterations, relative_residual)``; raises SolverError when
    the tolerance is not met within ``maxiter`` iterations.
    """
    n = len(b)
    maxiter = 10 * n if maxiter is None else maxiter
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), 0, 0.0
    diag = A.diagonal()
    inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
    r = b - A @ x
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if not pAp > 0:
            raise SolverError("conjugate gradient breakdown: operator is not positive definite")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / bnorm
        if res < rtol:
            return x, it, res
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"conjugate gradient did not converge in {maxiter} iterations (residual {res:.2e})")


def _components(op):
    graph = sp.csr_matrix(op.symmetric, copy=True)
    graph.setdiag(0)
    graph.eliminate_zeros()
    return connected_components(abs(graph), directed=False)


def solve_poisson(op: LaplaceOperator, rhs, condition: DirichletCondition | None = None) -> EllipticSolution:
    """Solve ``-L u = rhs`` with optional pinned vertices.

    Works on the symmetric form ``K u = P * rhs`` with ``K = -M``; pinned
    rows/columns are eliminated and moved to the right-hand side. Without
    constraints the surface must be connected and ``rhs`` must have zero
    P-weighted mean; the zero-mean solution is returned.
    """
    n = op.n_vertices
    rhs = _field(rhs, n, "rhs")
    condition = condition or DirichletCondition()
    condition.check(n)
    K = (-op.symmetric).tocsr()
    b = op.dual_areas * rhs

    n_comp, labels = _components(op)
    pinned = condition.vertices
    free_comps = set(range(n_comp)) - set(labels[pinned].tolist())

    if not condition:
        if n_comp > 1:
            raise SingularSystemError(
                f"mesh has {n_comp} connected components and no constraints; "
                "the kernel is larger than the constants"
            )
        scale = np.sum(np.abs(b))
        if abs(b.sum()) > 1e-10 * max(scale, np.finfo(float).tiny):
            raise IncompatibleRhsError(
                f"right-hand side has non-zero weighted mean ({b.sum():.3e}) on a closed, unconstrained surface"
            )
        b = b - op.dual_areas * (b.sum() / op.dual_areas.sum())
        if np.linalg.norm(b) == 0:
            return EllipticSolution(u=np.zeros(n), gauge_fixed=True, notes=["constant gauge: zero representative"])
        u, it, res = conjugate_gradient(K, b)
        u -= np.sum(op.dual_areas * u) / op.dual_areas.sum()
        return EllipticSolution(u=u, gauge_fixed=True, iterations=it, residual=res,
                                notes=["constant gauge: zero P-weighted mean"])

    if free_comps:
        raise SingularSystemError(
            f"{len(free_comps)} connected component(s) carry no constraint"
        )
    free = np.setdiff1d(np.arange(n), pinned)
    u = np.zeros(n)
    u[pinned] = condition.values
    if len(free) == 0:
        return EllipticSolution(u=u)
    K_ff = K[free][:, free]
    b_f = b[free] - K[free][:, pinned] @ condition.values
    u_f, it, res = conjugate_gradient(K_ff, b_f)
    u[free] = u_f
    return EllipticSolution(u=u, iterations=it, residual=res)


def solve_laplace(op: LaplaceOperator, condition: DirichletCondition | None = None) -> EllipticSolution:
    """Discrete harmonic field matching the constraints.

    With no constraints every constant solves the system; the zero field is
    returned with ``gauge_fixed`` set.
    """
    return solve_poisson(op, np.zeros(op.n_vertices), condition)


def auto_dt(bound: float) -> float:
    return AUTO_DT_FACTOR * bound
