"""Damping kernels and the Mittag-Leffler function.

Two memory kernels are supported:

* family ``A``, the tempered power law ``t**(mu-1) * exp(-r t) / Gamma(mu)``;
* family ``B``, the relaxation kernel ``-d/dt E_{mu,1}(-t**mu)``.

For each kernel we provide point values, the antiderivative from 0, the
Laplace transform and the weight ``gamma`` that appears in the continuous
positivity estimate of the convolution operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import special

from .exceptions import ConvergenceError, DomainError

__all__ = [
    "KernelSpec",
    "MlParams",
    "ml_eval",
    "mittag_leffler",
    "beta_eval",
    "beta_integral",
    "beta_hat",
    "gamma_weight",
]

# relative accuracy the Mittag-Leffler evaluator aims for
_ML_RTOL = 1e-14
# give up on the series when cancellation would need more digits than this
_ML_MAX_DIGITS = 400
_ML_MAX_ASYMPTOTIC_TERMS = 2000


@dataclass(frozen=True)
class KernelSpec:
    """Which damping kernel to use.

    Parameters
    ----------
    family : {"A", "B"}
        Tempered power law (A) or Mittag-Leffler relaxation kernel (B).
    mu : float
        Order, ``0 < mu < 1``.
    r : float
        Tempering rate for family A. Ignored (and stored as 0) for family B.
    """

    family: str = "A"
    mu: float = 0.5
    r: float = 0.0

    def __post_init__(self):
        family = str(self.family).upper()
        if family not in ("A", "B"):
            raise DomainError(f"unknown kernel family {self.family!r}")
        mu = float(self.mu)
        if not 0.0 < mu < 1.0:
            raise DomainError(f"mu must lie in (0, 1), got {mu}")
        r = float(self.r)
        if family == "B":
            r = 0.0
        elif not (r >= 0.0 and math.isfinite(r)):
            raise DomainError(f"r must be a finite nonnegative number, got {r}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "r", r)


@dataclass(frozen=True)
class MlParams:
    """Parameters ``(mu, gamma)`` of the two-parameter Mittag-Leffler function."""

    mu: float
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.mu > 0.0 and math.isfinite(self.mu)):
            raise DomainError(f"Mittag-Leffler mu must be positive, got {self.mu}")
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise DomainError(f"Mittag-Leffler gamma must be positive, got {self.gamma}")


def _ml_asymptotic(x, mu, gamma):
    """Algebraic expansion of E(-x) for large x > 0 and 0 < mu < 1.

    Returns ``None`` when the optimally truncated expansion cannot reach
    ``_ML_RTOL``.
    """
    logx = math.log(x)
    total = 0.0
    terms = []
    smallest = math.inf
    for k in range(1, _ML_MAX_ASYMPTOTIC_TERMS):
        rg = special.rgamma(gamma - mu * k)
        term = 0.0 if rg == 0.0 else -((-1.0) ** k) * rg * math.exp(-k * logx)
        terms.append(term)
        total += term
        # look at a window of terms: individual ones vanish at poles of Gamma
        window = max(abs(t) for t in terms[-4:])
        if k >= 4:
            if window <= _ML_RTOL * 1e-2 * abs(total):
                return math.fsum(terms)
            if window > 4 * smallest:
                return None
            smallest = min(smallest, window)
    return None


def _ml_series(z, mu, gamma):
    ax = abs(z)
    if ax == 0.0:
        return float(special.rgamma(gamma))
    logx = math.log(ax)
    # locate the largest term to size the working precision
    kpeak = 0
    logmax = -special.gammaln(gamma)
    k = 1
    while True:
        logterm = k * logx - special.gammaln(mu * k + gamma)
        if logterm > logmax:
            logmax, kpeak = logterm, k
        elif k > 2 * kpeak + 10 and logterm < logmax - 60.0:
            break
        k += 1
        if k > 10**6:
            raise ConvergenceError("Mittag-Leffler series does not converge")
    loss = max(0.0, logmax / math.log(10.0))
    if loss <= 2.0:
        terms = []
        k = 0
        while True:
            lt = k * logx - special.gammaln(mu * k + gamma)
            sign = -1.0 if (z < 0 and k % 2) else 1.0
            terms.append(sign * math.exp(lt))
            if k > kpeak and lt < logmax - 45.0:
                break
            k += 1
        return math.fsum(terms)
    digits = int(loss) + 25
    if digits > _ML_MAX_DIGITS:
        raise ConvergenceError(
            f"Mittag-Leffler series at z={z} needs {digits} digits; "
            "asymptotic regime also unavailable"
        )
    with mpmath.workdps(digits):
        zz = mpmath.mpf(z)
        mmu = mpmath.mpf(mu)
        mg = mpmath.mpf(gamma)
        total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        cutoff = mpmath.mpf(10) ** (-(digits - int(loss)))
        k = 0
        while True:
            term = power * mpmath.rgamma(mmu * k + mg)
            total += term
            if k > kpeak and abs(term) < cutoff * max(abs(total), mpmath.mpf(10) ** -30):
                break
            power *= zz
            k += 1
        return float(total)


def ml_eval(p: MlParams, z: float) -> float:
    """Evaluate the Mittag-Leffler function ``E_{mu,gamma}(z)`` for real ``z``.

    For ``z < 0`` and ``mu < 1`` the algebraic asymptotic expansion is used
    wherever its optimal truncation meets the accuracy target; elsewhere the
    power series is summed, in extended precision when the terms cancel.
    """
    z = float(z)
    if not math.isfinite(z):
        raise DomainError(f"argument must be finite, got {z}")
    if z < 0.0 and p.mu < 1.0 and -z > 1.0:
        value = _ml_asymptotic(-z, p.mu, p.gamma)
        if value is not None:
            return value
    return _ml_series(z, p.mu, p.gamma)


def mittag_leffler(z, mu, gamma=1.0):
    """Vectorised convenience wrapper around :func:`ml_eval`."""
    p = MlParams(float(mu), float(gamma))
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        return ml_eval(p, float(z))
    return np.array([ml_eval(p, float(v)) for v in z.ravel()]).reshape(z.shape)


def _as_array(t):
    arr = np.asarray(t, dtype=float)
    return arr, arr.ndim == 0


def beta_eval(spec: KernelSpec, t):
    """Point values of the damping kernel for ``t > 0``."""
    t, scalar = _as_array(t)
    if np.any(~(t > 0)):
        raise DomainError("the damping kernel is only defined for t > 0")
    mu = spec.mu
    if spec.family == "A":
        out = t ** (mu - 1.0) * np.exp(-spec.r * t) * special.rgamma(mu)
    else:
        # -d/dt E_{mu,1}(-t^mu) = t^(mu-1) E_{mu,mu}(-t^mu)
        ml = mittag_leffler(-(t**mu), mu, mu)
        out = t ** (mu - 1.0) * ml
    return float(out) if scalar else out


def beta_integral(spec: KernelSpec, t):
    """Antiderivative ``int_0^t beta(s) ds`` for ``t >= 0``."""
    t, scalar = _as_array(t)
    if np.any(~(t >= 0)):
        raise DomainError("the kernel integral needs t >= 0")
    mu = spec.mu
    if spec.family == "A":
        if spec.r == 0.0:
            out = t**mu * special.rgamma(mu + 1.0)
        else:
            out = special.gammainc(mu, spec.r * t) / spec.r**mu
    else:
        # 1 - E_{mu,1}(-s) = s E_{mu,mu+1}(-s) avoids cancellation near t = 0
        s = t**mu
        out = s * mittag_leffler(-s, mu, mu + 1.0)
    out = np.asarray(out, dtype=float)
    return float(out) if scalar else out


def beta_hat(spec: KernelSpec, z):
    """Laplace transform of the kernel, principal branch, for ``Re z > 0``."""
    z = np.asarray(z, dtype=complex)
    if np.any(~(z.real > 0)):
        raise DomainError("the Laplace transform is evaluated for Re z > 0 only")
    if spec.family == "A":
        out = (z + spec.r) ** (-spec.mu)
    else:
        out = 1.0 / (z**spec.mu + 1.0)
    return complex(out) if out.ndim == 0 else out


def gamma_weight(spec: KernelSpec, t):
    """Weight ``gamma(t)`` of the continuous positivity lower bound."""
    t, scalar = _as_array(t)
    if np.any(~(t > 0)):
        raise DomainError("gamma(t) is defined for t > 0")
    mu = spec.mu
    rg = special.rgamma(1.0 - mu)
    if spec.family == "A":
        r = spec.r
        out = np.exp(-r * t) * t ** (-mu) * rg
        if r > 0.0:
            # r / Gamma(1-mu) * int_0^t s^-mu e^(-r s) ds
            out = out + r**mu * special.gammainc(1.0 - mu, r * t)
    else:
        out = t ** (-mu) * rg + 1.0
    return float(out) if scalar else out
