"""Trapezoidal time stepping for the fractionally damped Westervelt equation.

At every step ``n >= 1`` the new coefficient vector ``u_{n+1}`` solves

    <(1 - 2k{u}_n) D^2 u_n, v> + <grad {u}_n, grad v>
        + a <beta *_dt D grad u_n, grad v> = 2k <(D u_n)^2, v> + <f(t_n), v>

for all test functions ``v``, with

    D u_n   = (u_{n+1} - u_{n-1}) / (2 dt)
    D^2 u_n = (u_{n+1} - 2 u_n + u_{n-1}) / dt^2
    {u}_n   = (u_{n+1} + 2 u_n + u_{n-1}) / 4

and ``D u_0 := v_0``. The nonlinear system is solved by Newton's method with
the exact Jacobian.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .cq import CqScheme
from .exceptions import (
    DegeneracyError,
    DomainError,
    NewtonDivergenceError,
    NotSPDError,
)
from .fem import (
    FeSpace,
    assemble_load,
    assemble_product_load,
    assemble_product_mass,
    assemble_weighted_mass,
    l2_project,
    values_at_quadrature,
)
from .kernels import KernelSpec
from .linalg import solve_spd

logger = logging.getLogger(__name__)

__all__ = [
    "RunConfig",
    "SimState",
    "Trajectory",
    "initialize",
    "step_residual",
    "step_jacobian",
    "advance",
    "run",
    "discrete_energies",
    "DEGENERACY_THRESHOLD",
]

# smallest admissible value of the leading coefficient 1 - 2k{u}
DEGENERACY_THRESHOLD = 1e-6

PointFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Physical and numerical parameters of one simulation.

    ``u0``, ``v0`` and ``u0_laplacian`` map points of shape ``(n, dim)`` to
    values. ``source`` is ``f(t, points)``. When ``u0_laplacian`` is omitted
    the discrete Laplacian of the projected initial datum is used.
    """

    space: FeSpace
    u0: PointFunction
    v0: PointFunction
    T: float
    dt: float
    a: float = 1.0
    k: float = 0.09
    kernel: KernelSpec = field(default_factory=KernelSpec)
    corrected: bool = False
    u0_laplacian: Optional[PointFunction] = None
    source: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    newton_tol: float = 1e-10
    newton_max: int = 20
    solver: Optional[str] = None

    def __post_init__(self):
        if not (self.T > 0 and self.dt > 0):
            raise DomainError("T and dt must be positive")
        if self.dt > self.T * (1 + 1e-12):
            raise DomainError("dt must not exceed T")
        if self.a < 0 or self.k < 0:
            raise DomainError("a and k must be nonnegative")
        n = round(self.T / self.dt)
        if abs(n * self.dt - self.T) >= 1e-12 * self.T:
            raise DomainError(f"T = {self.T} is not an integer multiple of dt = {self.dt}")

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(eq=False)
class SimState:
    """Mutable state of the stepper after ``n`` accepted steps.

    ``dhistory[j]`` holds ``D u_j`` for ``j < n`` (row 0 is the projected
    initial velocity). Rows from ``n`` on are unused scratch space.
    """

    n: int
    u_prev: np.ndarray
    u_curr: np.ndarray
    dhistory: np.ndarray
    scheme: CqScheme
    mass: object
    stiffness: object
    jac_const: object
    # per-step caches, refreshed by ``_prepare_step``
    conv_known: Optional[np.ndarray] = None
    load: Optional[np.ndarray] = None
    scale: float = 1.0


@dataclass(eq=False)
class Trajectory:
    """Result of :func:`run`.

    Attributes
    ----------
    times : ndarray, shape (N + 1,)
    u : ndarray, shape (N + 1, n_dof)
        Interior coefficients of ``u_0 .. u_N``.
    newton_iters : ndarray of int, shape (N + 1,)
        Linear solves spent on each step (0 for the two start values).
    energies : ndarray, shape (N,)
        Discrete energies ``E_0 .. E_{N-1}``.
    """

    config: RunConfig
    times: np.ndarray
    u: np.ndarray
    newton_iters: np.ndarray
    energies: np.ndarray
    complete: bool = True

    @property
    def dt(self):
        return self.config.dt

    @property
    def space(self):
        return self.config.space


def _check_coefficient(space, k, c, what, step=None, time=None):
    if k == 0:
        return
    umax = max(0.0, float(np.max(c))) if c.size else 0.0
    margin = 1.0 - 2.0 * k * umax
    if not margin > DEGENERACY_THRESHOLD:
        raise DegeneracyError(
            f"1 - 2k{what} = {margin:.3e} <= {DEGENERACY_THRESHOLD:g}: "
            "the leading coefficient degenerates (shock formation)",
            step=step,
            time=time,
        )


def initialize(cfg: RunConfig) -> SimState:
    """Project the initial data and compute ``u_1`` by a Taylor step."""
    space = cfg.space
    k, dt = cfg.k, cfg.dt
    N = cfg.n_steps
    pts = space.qpoints.reshape(-1, space.dim)
    shape = space.qpoints.shape[:2]

    u0q = np.asarray(cfg.u0(pts), dtype=float).reshape(shape)
    v0q = np.asarray(cfg.v0(pts), dtype=float).reshape(shape)
    u0 = l2_project(space, u0q)
    v0 = l2_project(space, v0q)
    coef = 1.0 - 2.0 * k * u0q
    if np.min(coef) <= 0 or (k > 0 and 1.0 - 2.0 * k * np.max(cfg.u0(space.coords), initial=0.0) <= 0):
        raise DegeneracyError("1 - 2k u0 is not positive", step=0, time=0.0)

    if cfg.u0_laplacian is not None:
        lap = np.asarray(cfg.u0_laplacian(pts), dtype=float).reshape(shape)
    else:
        lap_c = solve_spd(space.mass, -(space.stiffness @ u0), method=cfg.solver)
        lap = values_at_quadrature(space, lap_c)
    rhs = lap + 2.0 * k * v0q**2
    if cfg.source is not None:
        rhs = rhs + np.asarray(cfg.source(0.0, pts), dtype=float).reshape(shape)
    accel = l2_project(space, rhs / coef)
    u1 = u0 + dt * v0 + 0.5 * dt * dt * accel

    scheme = CqScheme.build(cfg.kernel, dt, N, corrected=cfg.corrected)
    dhist = np.zeros((N + 1, space.n_dof))
    dhist[0] = v0
    M, K = space.mass, space.stiffness
    jac_const = M / dt**2 + K * (0.25 + cfg.a * scheme.weights[0] / (2.0 * dt))
    return SimState(
        n=1,
        u_prev=u0,
        u_curr=u1,
        dhistory=dhist,
        scheme=scheme,
        mass=M,
        stiffness=K,
        jac_const=jac_const.tocsr(),
    )


def _prepare_step(state: SimState, cfg: RunConfig):
    """Cache the candidate-independent parts of the residual at step ``n``."""
    n = state.n
    scheme = state.scheme
    if cfg.a != 0:
        conv = scheme.weights[n:0:-1] @ state.dhistory[:n]
        if scheme.corrected:
            conv = conv + scheme.corrections[n] * state.dhistory[0]
        state.conv_known = state.stiffness @ conv
    else:
        state.conv_known = np.zeros_like(state.u_curr)
    if cfg.source is not None:
        space = cfg.space
        pts = space.qpoints.reshape(-1, space.dim)
        fq = np.asarray(cfg.source(n * cfg.dt, pts), dtype=float).reshape(space.qpoints.shape[:2])
        state.load = assemble_load(space, fq)
    else:
        state.load = np.zeros_like(state.u_curr)
    inertia = np.linalg.norm(state.mass @ state.u_curr) / cfg.dt**2
    state.scale = 1.0 + inertia + np.linalg.norm(state.load)


def _differences(state, cand, dt):
    ubar = 0.25 * (cand + 2.0 * state.u_curr + state.u_prev)
    d2 = (cand - 2.0 * state.u_curr + state.u_prev) / dt**2
    du = (cand - state.u_prev) / (2.0 * dt)
    return ubar, d2, du


def step_residual(state: SimState, cand, cfg: RunConfig, t_n: Optional[float] = None):
    """Residual of the step equation for the candidate ``u_{n+1}``.

    ``t_n`` only matters through the source term; when given and different
    from the cached step time the caches are rebuilt.
    """
    if state.conv_known is None or (t_n is not None and not math.isclose(t_n, state.n * cfg.dt)):
        _prepare_step(state, cfg)
    space = cfg.space
    k, a = cfg.k, cfg.a
    ubar, d2, du = _differences(state, cand, cfg.dt)
    F = state.mass @ d2 + state.stiffness @ ubar - state.load
    if k != 0:
        F -= 2.0 * k * (assemble_product_load(space, ubar, d2) + assemble_product_load(space, du, du))
    if a != 0:
        F += a * (state.conv_known + state.scheme.weights[0] * (state.stiffness @ du))
    return F


def step_jacobian(state: SimState, cand, cfg: RunConfig):
    """Exact, symmetric Jacobian of :func:`step_residual` with respect to ``cand``."""
    if cfg.k == 0:
        return state.jac_const
    dt = cfg.dt
    ubar, d2, du = _differences(state, cand, dt)
    # d/dc of -2k[<ubar d2, phi> + <du^2, phi>] collapses into one product mass
    w = ubar / dt**2 + 0.25 * d2 + du / dt
    return (state.jac_const - 2.0 * cfg.k * assemble_product_mass(cfg.space, w)).tocsr()


def advance(state: SimState, cfg: RunConfig) -> int:
    """Compute ``u_{n+1}`` by Newton's method and shift the state in place.

    Returns the number of linear solves used.
    """
    n, dt = state.n, cfg.dt
    t_n = n * dt
    _prepare_step(state, cfg)
    cand = 2.0 * state.u_curr - state.u_prev
    tol = cfg.newton_tol * state.scale
    trace = []
    iters = 0
    while True:
        F = step_residual(state, cand, cfg)
        norm = float(np.linalg.norm(F))
        trace.append(norm)
        if not math.isfinite(norm):
            raise NewtonDivergenceError(
                f"non-finite Newton residual at step {n}", step=n, time=t_n, trace=trace
            )
        if norm <= tol:
            break
        if iters >= cfg.newton_max:
            raise NewtonDivergenceError(
                f"Newton did not converge in {cfg.newton_max} iterations at step {n} "
                f"(residual {norm:.3e}, target {tol:.3e})",
                step=n,
                time=t_n,
                trace=trace,
            )
        J = step_jacobian(state, cand, cfg)
        try:
            delta = solve_spd(J, F, method=cfg.solver)
        except NotSPDError as exc:
            raise DegeneracyError(
                f"step Jacobian lost definiteness at step {n}: {exc}", step=n, time=t_n
            ) from exc
        cand = cand - delta
        iters += 1
        if not np.all(np.isfinite(cand)):
            raise NewtonDivergenceError(
                f"Newton iterate became non-finite at step {n}", step=n, time=t_n, trace=trace
            )

    ubar = 0.25 * (cand + 2.0 * state.u_curr + state.u_prev)
    _check_coefficient(cfg.space, cfg.k, ubar, "{u}_n", step=n, time=t_n)
    _check_coefficient(cfg.space, cfg.k, cand, "u_{n+1}", step=n + 1, time=t_n + dt)
    state.dhistory[n] = (cand - state.u_prev) / (2.0 * dt)
    state.u_prev, state.u_curr = state.u_curr, cand
    state.n = n + 1
    state.conv_known = None
    return iters


def discrete_energies(space: FeSpace, u, k, dt):
    """Energies ``E_0 .. E_{N-1}`` of the rows ``u_0 .. u_N``.

    ``E_n = |(u_{n+1} + u_n)/2|_{H1}^2 / 2
    + <(1 - 2k{u}_n) (u_{n+1} - u_n)/dt, (u_{n+1} - u_n)/dt> / 2``,
    where ``E_0`` borrows the average ``{u}_1``.
    """
    K = space.stiffness
    N = u.shape[0] - 1
    out = np.empty(N)
    for n in range(N):
        mid = 0.5 * (u[n + 1] + u[n])
        dtil = (u[n + 1] - u[n]) / dt
        m = max(n, 1)
        if m + 1 <= N:
            avg = 0.25 * (u[m + 1] + 2.0 * u[m] + u[m - 1])
        else:
            avg = u[m]
        A = assemble_weighted_mass(space, avg, k)
        out[n] = 0.5 * mid @ (K @ mid) + 0.5 * dtil @ (A @ dtil)
    return out


def run(cfg: RunConfig, progress: Optional[Callable[[int, int], None]] = None) -> Trajectory:
    """Integrate from ``t = 0`` to ``T``.

    On a breakdown the raised :class:`~fracwest.exceptions.BreakdownError`
    carries the partial trajectory in its ``trajectory`` attribute.
    """
    N = cfg.n_steps
    state = initialize(cfg)
    u = np.empty((N + 1, cfg.space.n_dof))
    u[0] = state.u_prev
    u[1] = state.u_curr
    iters = np.zeros(N + 1, dtype=int)
    for n in range(1, N):
        try:
            iters[n + 1] = advance(state, cfg)
        except (DegeneracyError, NewtonDivergenceError) as exc:
            exc.trajectory = _finish(cfg, u[: n + 1], iters[: n + 1], complete=False)
            raise
        u[n + 1] = state.u_curr
        if progress is not None:
            progress(n + 1, N)
    return _finish(cfg, u, iters, complete=True)


def _finish(cfg, u, iters, complete):
    times = cfg.dt * np.arange(u.shape[0])
    energies = discrete_energies(cfg.space, u, cfg.k, cfg.dt) if u.shape[0] > 1 else np.empty(0)
    return Trajectory(cfg, times, u.copy(), iters.copy(), energies, complete)
