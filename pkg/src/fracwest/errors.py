"""Error measures, the 2D manufactured solution and convergence-order fits."""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .exceptions import ConvergenceError, DomainError

__all__ = [
    "ErrorReport",
    "energy_error",
    "max_l2_error",
    "fit_slope",
    "fractional_integral",
    "Manufactured2D",
    "manufactured_2d",
]


@dataclass
class ErrorReport:
    """Errors of a step-size sweep together with the fitted order."""

    dts: np.ndarray
    errors: np.ndarray
    slope: float
    residual: float
    measure: str = "energy"
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_errors(cls, dts, errors, measure="energy", **metadata):
        order = np.argsort(dts)[::-1]
        dts = np.asarray(dts, dtype=float)[order]
        errors = np.asarray(errors, dtype=float)[order]
        slope, residual = fit_slope(dts, errors)
        return cls(dts, errors, slope, residual, measure, dict(metadata))

    def write_csv(self, fh):
        writer = csv.writer(fh)
        writer.writerow(["dt", "error", "fitted_slope_echo"])
        for dt, e in zip(self.dts, self.errors):
            writer.writerow([f"{dt:.17g}", f"{e:.17g}", f"{self.slope:.17g}"])

    def summary(self):
        lines = [f"measure: {self.measure}"]
        lines += [f"{k}: {v}" for k, v in self.metadata.items()]
        lines.append(f"{'dt':>14} {'error':>14} {'local rate':>11}")
        prev = None
        for dt, e in zip(self.dts, self.errors):
            rate = "" if prev is None else f"{math.log(prev[1] / e) / math.log(prev[0] / dt):11.3f}"
            lines.append(f"{dt:14.6e} {e:14.6e} {rate}")
            prev = (dt, e)
        lines.append(f"fitted slope: {self.slope:.4f} (rms deviation {self.residual:.2e})")
        return "\n".join(lines) + "\n"


def _reference_rows(traj, ref):
    """Reference coefficients sampled on the time grid of ``traj``."""
    n_rows = traj.u.shape[0]
    if callable(ref):
        from .fem import l2_project

        space = traj.space
        return np.array([l2_project(space, lambda p, t=t: ref(t, p)) for t in traj.times])
    ratio = traj.dt / ref.dt
    stride = round(ratio)
    if stride < 1 or abs(stride - ratio) > 1e-9 * ratio:
        raise DomainError(f"reference step {ref.dt} does not divide step {traj.dt}")
    rows = ref.u[::stride][:n_rows]
    if rows.shape[0] < n_rows:
        raise DomainError("reference trajectory is shorter than the trajectory")
    return rows


def energy_error(traj, ref, space=None):
    """Maximum-in-time discrete energy error.

    ``max_n |(e_n - e_{n-1})/dt|_{L2} + max_n |grad (e_n + e_{n-1})/2|_{L2}``
    with ``e_n = u_n - ref_n``. ``ref`` is a finer trajectory whose step
    divides ``traj.dt``, or a callable ``exact(t, points)`` that is
    L2-projected at every time level.
    """
    space = traj.space if space is None else space
    err = traj.u - _reference_rows(traj, ref)
    M, K = space.mass, space.stiffness
    vel = (err[1:] - err[:-1]) / traj.dt
    mid = 0.5 * (err[1:] + err[:-1])
    e1 = np.sqrt(np.max(np.einsum("ij,ij->i", vel, (M @ vel.T).T), initial=0.0))
    e2 = np.sqrt(np.max(np.einsum("ij,ij->i", mid, (K @ mid.T).T), initial=0.0))
    return float(e1 + e2)


def max_l2_error(traj, exact, space=None):
    """``max_{n >= 1} |u_n - I_h exact(t_n)|_{L2}`` with the nodal interpolant."""
    space = traj.space if space is None else space
    pts = space.coords
    best = 0.0
    for t, u in zip(traj.times[1:], traj.u[1:]):
        d = u - np.asarray(exact(t, pts), dtype=float)
        best = max(best, float(d @ (space.mass @ d)))
    return math.sqrt(best)


def fit_slope(dts, errs, finest=4):
    """Least-squares slope of ``log err`` against ``log dt``.

    Only the ``finest`` smallest step sizes enter the fit. Returns
    ``(slope, rms deviation of the fit in log space)``.
    """
    dts = np.asarray(dts, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if dts.shape != errs.shape or dts.size < 3:
        raise DomainError("need at least three (dt, error) pairs")
    if np.any(~(dts > 0)) or np.any(~(errs > 0)) or np.any(~np.isfinite(errs)):
        raise DomainError("step sizes and errors must be positive and finite")
    order = np.argsort(dts)[:finest]
    x, y = np.log(dts[order]), np.log(errs[order])
    if np.ptp(x) == 0:
        raise DomainError("step sizes must not all coincide")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(np.sqrt(np.mean(resid**2)))


def fractional_integral(g, t, mu, n=64):
    """Riemann-Liouville integral ``(1/Gamma(mu)) int_0^t (t-s)^(mu-1) g(s) ds``.

    Gauss-Jacobi quadrature carries the endpoint singularity in its weight,
    so the rule converges spectrally for smooth ``g`` and any ``mu``.
    """
    if t < 0:
        raise DomainError("fractional integral needs t >= 0")
    if t == 0:
        return 0.0
    x, w = _jacobi_rule(n, mu)
    vals = np.asarray(g(0.5 * t * (1.0 + x)), dtype=float)
    out = (0.5 * t) ** mu * np.dot(w, vals) * special.rgamma(mu)
    if not math.isfinite(out):
        raise ConvergenceError(f"fractional integral quadrature failed at t={t}")
    return float(out)


@functools.lru_cache(maxsize=16)
def _jacobi_rule(n, mu):
    # nodes and weights for the weight (1 - x)^(mu - 1) on (-1, 1)
    return special.roots_jacobi(n, mu - 1.0, 0.0)


class Manufactured2D:
    """Exact solution ``(sin 24t + cos 12t) sin(pi x) sin(pi y)`` and its source.

    The source makes the solution satisfy the damped Westervelt equation with
    the untempered power-law kernel of order ``mu``. Fractional integrals of
    the time factor are cached per time level.
    """

    def __init__(self, a=1.0, k=0.09, mu=0.5, quad_points=64):
        self.a, self.k, self.mu = float(a), float(k), float(mu)
        self.quad_points = quad_points
        self._cache = {}

    @staticmethod
    def time_factor(t):
        return np.sin(24 * t) + np.cos(12 * t)

    @staticmethod
    def time_factor_dt(t):
        return 24 * np.cos(24 * t) - 12 * np.sin(12 * t)

    @staticmethod
    def time_factor_dtt(t):
        return -576 * np.sin(24 * t) - 144 * np.cos(12 * t)

    @staticmethod
    def shape(p):
        p = np.atleast_2d(p)
        return np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])

    def damping_factor(self, t):
        """``I^mu[d/dt time_factor](t)``, cached."""
        key = float(t)
        if key not in self._cache:
            self._cache[key] = fractional_integral(self.time_factor_dt, key, self.mu, self.quad_points)
        return self._cache[key]

    def u(self, t, p):
        return self.time_factor(t) * self.shape(p)

    def ut(self, t, p):
        return self.time_factor_dt(t) * self.shape(p)

    def u0(self, p):
        return self.u(0.0, p)

    def v0(self, p):
        return self.ut(0.0, p)

    def u0_laplacian(self, p):
        return -2 * np.pi**2 * self.u0(p)

    def source(self, t, p):
        s = self.shape(p)
        u = self.time_factor(t) * s
        utt = self.time_factor_dtt(t) * s
        ut = self.time_factor_dt(t) * s
        lap = -2 * np.pi**2 * u
        damp = -2 * np.pi**2 * s * self.damping_factor(t)  # beta * d/dt Laplacian u
        return (1 - 2 * self.k * u) * utt - lap - self.a * damp - 2 * self.k * ut**2


def manufactured_2d(t, x, y, a=1.0, k=0.09, mu=0.5):
    """Return ``(u, f)`` of the manufactured 2D solution at one point."""
    m = Manufactured2D(a=a, k=k, mu=mu)
    p = np.array([[x, y]], dtype=float)
    return float(m.u(t, p)[0]), float(m.source(t, p)[0])
