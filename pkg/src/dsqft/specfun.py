"""Special functions: complex Gamma, Gauss 2F1 series, Gegenbauer polynomials
and the dimension / addition-theorem data of spherical harmonics."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PoleError

__all__ = [
    "gamma_complex",
    "log_gamma_complex",
    "hyp2f1",
    "hyp2f1_with_derivatives",
    "gegenbauer",
    "gegenbauer_table",
    "harmonic_dim",
    "addition_coefficient",
    "harmonic_data",
    "HarmonicData",
    "GegenbauerIndex",
    "sphere_area",
    "zonal",
]

# Lanczos coefficients, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _check_pole(z: complex) -> None:
    if z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real):
        raise PoleError(f"Gamma has a pole at z = {z.real:g}")


def _log_gamma_right(z: complex) -> complex:
    # valid for Re z >= 1/2
    z = z - 1.0
    x = _LANCZOS[0]
    for i in range(1, len(_LANCZOS)):
        x += _LANCZOS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * cmath.log(t) - t + cmath.log(x)


def _sin_pi(z: complex) -> complex:
    # reduce by the nearest integer first: z - n is exact, pi * z is not
    n = round(z.real)
    v = cmath.sin(math.pi * complex(z.real - n, z.imag))
    return -v if n % 2 else v


def log_gamma_complex(z: complex) -> complex:
    """Logarithm of Gamma (one branch; the real part is always log|Gamma(z)|)."""
    z = complex(z)
    _check_pole(z)
    if z.real >= 0.5:
        return _log_gamma_right(z)
    return math.log(math.pi) - cmath.log(_sin_pi(z)) - _log_gamma_right(1.0 - z)


def gamma_complex(z: complex) -> complex:
    """Gamma function for complex argument.

    Lanczos approximation on Re z >= 1/2 and the reflection formula
    Gamma(z) Gamma(1-z) = pi / sin(pi z) elsewhere.

    Raises
    ------
    PoleError
        If z is zero or a negative integer.
    """
    z = complex(z)
    _check_pole(z)
    if z.real >= 0.5:
        return cmath.exp(_log_gamma_right(z))
    return math.pi / (_sin_pi(z) * cmath.exp(_log_gamma_right(1.0 - z)))


def _hyp2f1_series(a, b, c, z, tol=1e-16, max_terms=100000):
    term = 1.0 + 0.0j
    total = term
    k = 0
    az = abs(z)
    while True:
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        total += term
        k += 1
        if term == 0:
            break
        # once the term ratio has settled below |z| the tail is geometric
        ratio = abs((a + k) * (b + k) / ((c + k) * (k + 1.0)))
        if ratio * az < 1.0:
            tail = abs(term) * ratio * az / (1.0 - ratio * az)
            if k > abs(a) + abs(b) and tail <= tol * abs(total):
                break
        if k >= max_terms:
            raise RuntimeError("hyp2f1 series did not converge")
    return total


def hyp2f1(a: complex, b: complex, c: complex, z: complex) -> complex:
    """Gauss hypergeometric function by its power series, |z| < 1 only.

    The series sum_k (a)_k (b)_k / (c)_k z^k / k! is summed until the
    geometric tail bound drops below 1e-16 of the partial sum.
    """
    z = complex(z)
    c = complex(c)
    if abs(z) >= 1.0:
        raise DomainError(f"hyp2f1 series requires |z| < 1, got |z| = {abs(z):.6g}")
    if c.imag == 0.0 and c.real <= 0.0 and c.real == math.floor(c.real):
        raise PoleError("hyp2f1: c is a nonpositive integer")
    return _hyp2f1_series(complex(a), complex(b), c, z)


def hyp2f1_with_derivatives(a, b, c, z):
    """Return F, dF/dz and d2F/dz2 at z, all from the series."""
    F0 = hyp2f1(a, b, c, z)
    F1 = a * b / c * hyp2f1(a + 1, b + 1, c + 1, z)
    F2 = a * (a + 1) * b * (b + 1) / (c * (c + 1)) * hyp2f1(a + 2, b + 2, c + 2, z)
    return F0, F1, F2


@dataclass(frozen=True)
class GegenbauerIndex:
    s: int
    lam: float

    def __post_init__(self):
        if self.s < 0:
            raise DomainError("Gegenbauer degree must be nonnegative")
        if not self.lam > 0:
            raise DomainError("Gegenbauer index must be positive (d >= 3)")


def gegenbauer_table(s_max: int, lam: float, t) -> np.ndarray:
    """C_s^lam(t) for s = 0..s_max, shape (s_max + 1,) + shape(t)."""
    t = np.asarray(t, dtype=float)
    out = np.empty((s_max + 1,) + t.shape)
    out[0] = 1.0
    if s_max >= 1:
        out[1] = 2.0 * lam * t
    for s in range(2, s_max + 1):
        out[s] = (2.0 * t * (s + lam - 1.0) * out[s - 1] - (s + 2.0 * lam - 2.0) * out[s - 2]) / s
    return out


def gegenbauer(idx: GegenbauerIndex | int, t, lam: float | None = None):
    """Gegenbauer polynomial C_s^lam(t) via the three-term recurrence.

    Accepts either a GegenbauerIndex or ``(s, t, lam=...)``.
    """
    if not isinstance(idx, GegenbauerIndex):
        idx = GegenbauerIndex(int(idx), float(lam))
    val = gegenbauer_table(idx.s, idx.lam, t)[idx.s]
    return float(val) if np.ndim(val) == 0 else val


def harmonic_dim(s: int, d: int) -> int:
    """Dimension of the degree-s spherical harmonics on S^{d-1}."""
    if s < 0 or d < 3:
        raise DomainError("need s >= 0 and d >= 3")
    if s == 0:
        return 1
    return (2 * s + d - 2) * math.comb(s + d - 3, s) // (d - 2)


def addition_coefficient(s: int, d: int) -> float:
    """A(s, d) = (2s + d - 2) Gamma(d/2) / (2 pi^{d/2} (d - 2))."""
    if d < 3:
        raise DomainError("need d >= 3")
    return (2 * s + d - 2) * math.gamma(d / 2.0) / (2.0 * math.pi ** (d / 2.0) * (d - 2))


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere S^{d-1} in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def zonal(s: int, d: int, t):
    """Reproducing kernel of degree-s harmonics on S^{d-1}: A(s,d) C_s^{(d-2)/2}(t)."""
    return addition_coefficient(s, d) * gegenbauer(s, t, lam=(d - 2) / 2.0)


@dataclass(frozen=True)
class HarmonicData:
    s: int
    d: int
    h: int
    A: float


def harmonic_data(s: int, d: int) -> HarmonicData:
    return HarmonicData(s=s, d=d, h=harmonic_dim(s, d), A=addition_coefficient(s, d))
