"""BDF2 convolution quadrature for the damping kernels.

The discrete convolution

    [beta *_dt v]_n = sum_{j=0}^n omega_{n-j} v_j

uses the Taylor coefficients of ``zeta -> beta_hat(delta(zeta) / dt)`` with
the BDF2 symbol ``delta(zeta) = (1 - zeta) + (1 - zeta)**2 / 2``. The
corrected variant adds ``omega_{n,0} v_0`` so that constants are integrated
exactly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import ContourAccuracyError
from .kernels import KernelSpec, beta_hat, beta_integral

__all__ = [
    "CqScheme",
    "bdf2_delta",
    "cq_weights",
    "correction_weights",
    "convolve",
    "positivity_form",
    "write_weights_csv",
]

CONTOUR_EPS = 1e-16
IMAG_TOL = 1e-8


def bdf2_delta(zeta):
    """Generating polynomial of BDF2, ``(1 - zeta) + (1 - zeta)**2 / 2``."""
    w = 1.0 - np.asarray(zeta)
    out = w + 0.5 * w * w
    return out[()] if out.ndim == 0 else out


def _binomial_series(mu, n):
    """Coefficients of ``(1 - zeta)**(-mu)`` up to ``zeta**n``."""
    j = np.arange(1, n + 1, dtype=float)
    c = np.empty(n + 1)
    c[0] = 1.0
    c[1:] = np.cumprod((j - 1.0 + mu) / j)
    return c


def _weights_power_law(mu, dt, n):
    # delta(zeta) = 3/2 (1 - zeta)(1 - zeta/3)
    a = _binomial_series(mu, n)
    b = a * (1.0 / 3.0) ** np.arange(n + 1)
    return (2.0 * dt / 3.0) ** mu * np.convolve(a, b)[: n + 1]


def _weights_contour(spec, dt, n):
    L = 2 * (n + 1)
    rho = CONTOUR_EPS ** (1.0 / L)
    zeta = rho * np.exp(2j * np.pi * np.arange(L) / L)
    vals = beta_hat(spec, bdf2_delta(zeta) / dt)
    coef = np.fft.fft(vals)[: n + 1] / L
    w = coef * rho ** (-np.arange(n + 1, dtype=float))
    scale = np.linalg.norm(w.real)
    imag = np.max(np.abs(w.imag))
    if imag > IMAG_TOL * scale:
        raise ContourAccuracyError(
            f"contour weights have imaginary part {imag:.3e} "
            f"(tolerance {IMAG_TOL * scale:.3e})"
        )
    return w.real.copy()


def cq_weights(spec: KernelSpec, dt: float, N: int, method: str | None = None):
    """First ``N + 1`` BDF2 convolution weights of the kernel.

    Parameters
    ----------
    spec : KernelSpec
    dt : float
        Time step.
    N : int
        Highest weight index.
    method : {None, "exact", "contour"}
        ``"exact"`` uses the binomial product expansion and is only available
        for the untempered power law (family A, ``r = 0``). ``"contour"``
        evaluates the generating function on a circle and inverts with an FFT.
        ``None`` picks ``"exact"`` whenever possible.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    N = int(N)
    if N < 0:
        raise ValueError(f"N must be nonnegative, got {N}")
    exact_ok = spec.family == "A" and spec.r == 0.0
    if method is None:
        method = "exact" if exact_ok else "contour"
    if method == "exact":
        if not exact_ok:
            raise ValueError("exact weights need family A with r = 0")
        return _weights_power_law(spec.mu, dt, N)
    if method == "contour":
        return _weights_contour(spec, dt, N)
    raise ValueError(f"unknown weight method {method!r}")


def correction_weights(spec: KernelSpec, dt: float, N: int, weights):
    """Starting weights ``omega_{n,0}`` that make the rule exact on constants."""
    weights = np.asarray(weights, dtype=float)
    t = dt * np.arange(N + 1)
    return beta_integral(spec, t) - np.cumsum(weights[: N + 1])


def _readonly(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CqScheme:
    """Convolution weights for a fixed kernel, step size and horizon."""

    spec: KernelSpec
    dt: float
    n_steps: int
    weights: np.ndarray
    corrections: np.ndarray
    corrected: bool = False

    @classmethod
    def build(cls, spec, dt, n_steps, corrected=False, method=None):
        w = cq_weights(spec, dt, n_steps, method=method)
        c = correction_weights(spec, dt, n_steps, w)
        return cls(spec, float(dt), int(n_steps), _readonly(w), _readonly(c), bool(corrected))

    def times(self):
        return self.dt * np.arange(self.n_steps + 1)


def _stack(history):
    h = np.asarray(history, dtype=float)
    return h[:, None] if h.ndim == 1 else h


def convolve(scheme: CqScheme, history, n: int, corrected: bool | None = None):
    """Evaluate ``[beta *_dt v]_n`` (or its corrected variant) from ``v_0..v_n``.

    ``history`` is a sequence of equally shaped vectors (or scalars).
    ``corrected`` overrides the scheme's own flag.
    """
    if n < 0 or n > scheme.n_steps:
        raise IndexError(f"step {n} outside 0..{scheme.n_steps}")
    if len(history) < n + 1:
        raise IndexError(f"history has {len(history)} entries, need {n + 1}")
    scalar = np.ndim(history[0]) == 0
    h = _stack(history[: n + 1])
    out = scheme.weights[n::-1] @ h
    if scheme.corrected if corrected is None else corrected:
        out = out + scheme.corrections[n] * h[0]
    return float(out[0]) if scalar else out


def positivity_form(scheme: CqScheme, v, rho: float = 1.0, inner=None):
    """Both sides of the discrete positivity inequality for the plain CQ.

    Returns ``(lhs, rhs)`` with ``lhs = sum_j rho^(2j) <v_j, [beta*v]_j>`` and
    ``rhs = sum_j rho^(2j) |[beta*v]_j|^2``. ``inner`` is an optional SPD
    matrix defining the inner product (e.g. a finite element mass matrix).
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    h = _stack(v)
    m = h.shape[0]
    if m - 1 > scheme.n_steps:
        raise IndexError("sequence longer than the scheme horizon")
    w = scheme.weights[:m]
    # Toeplitz lower-triangular action, row j = sum_i w[j-i] h[i]
    conv = np.empty_like(h)
    for j in range(m):
        conv[j] = w[j::-1] @ h[: j + 1]
    g = rho ** (2.0 * np.arange(m))
    if inner is None:
        lhs = np.sum(g * np.einsum("ij,ij->i", h, conv))
        rhs = np.sum(g * np.einsum("ij,ij->i", conv, conv))
    else:
        lhs = np.sum(g * np.einsum("ij,ij->i", h, (inner @ conv.T).T))
        rhs = np.sum(g * np.einsum("ij,ij->i", conv, (inner @ conv.T).T))
    return float(lhs), float(rhs)


def write_weights_csv(scheme: CqScheme, fh):
    """Write ``j, omega_j, omega_j0`` rows to an open text file."""
    writer = csv.writer(fh)
    writer.writerow(["j", "omega_j", "omega_j0"])
    for j, (w, c) in enumerate(zip(scheme.weights, scheme.corrections)):
        writer.writerow([j, f"{w:.17g}", f"{c:.17g}"])
