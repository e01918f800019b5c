"""Mode functions T^{+/-}_p of the separated Klein-Gordon equation and the
pointwise (Abel-damped) mode sum for the two-point function.

The tau-equation for degree-s harmonics is

    T'' + (d - 2) tan(tau) T' + (s (s + d - 2) + frak_m^2 / cos^2 tau) T = 0,

solved on |tau| <= pi/2 - eps by piecewise Chebyshev spectral integration
(unknown T'' on each panel, T' and T recovered by exact polynomial
integration).  Initial data at tau = 0 come from the hypergeometric
expression for u^{+/-}_p.
"""

from __future__ import annotations

import cmath
import csv
import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import DomainError, ResidualExceeded
from .geometry import HALF_PI, DeSitterPoint, ModelParams
from .specfun import (addition_coefficient, gegenbauer_table, hyp2f1_with_derivatives,
                      log_gamma_complex)

CHEB_N = 32
RESIDUAL_TOL = 1e-8
DEFAULT_DOMAIN_EPS = 1e-7


class SeriesType(enum.Enum):
    COMPLEMENTARY = "Complementary"
    PRINCIPAL = "Principal"


@dataclass(frozen=True)
class MuParameter:
    mu: complex
    series_type: SeriesType


def compute_mu(params: ModelParams) -> MuParameter:
    """mu = (1 - sqrt((d-1)^2 - 4 frak_m^2)) / 2 with its series type."""
    disc = (params.d - 1) ** 2 - 4.0 * params.frak_m**2
    if disc >= 0:
        return MuParameter(complex(0.5 * (1.0 - math.sqrt(disc)), 0.0), SeriesType.COMPLEMENTARY)
    return MuParameter(complex(0.5, -0.5 * math.sqrt(-disc)), SeriesType.PRINCIPAL)


# ------------------------------------------------------------------ hypergeometric data


def _z_of_tau(tau, p, reading, sign):
    """Argument of F and its first two tau-derivatives for one reading."""
    c = math.cos(tau)
    t = math.tan(tau)
    if reading == "exp_i_tau":
        z = 0.5 * (1.0 + sign * 1j * t)
        z1 = sign * 0.5j / c**2
        z2 = sign * 1j * math.sin(tau) / c**3
    else:  # "exp_i_p_tau"
        z = cmath.exp(sign * 1j * p * tau) / (2.0 * c)
        k = sign * 1j * p + t
        z1 = z * k
        z2 = z1 * k + z / c**2
    return z, z1, z2


def mode_normalisation(p: float, mu: complex) -> float:
    """(p!)^{-1} sqrt(Gamma(p + mu) Gamma(p - mu + 1)), computed in logs."""
    lg = log_gamma_complex(p + mu) + log_gamma_complex(p - mu + 1.0) - 2.0 * log_gamma_complex(p + 1.0)
    return math.exp(0.5 * lg.real)


def formula_mode(tau: float, d: int, frak_m2: float, s: int, reading: str = "exp_i_tau",
                 sign: int = 1):
    """T^{sign}_p and its first two derivatives from the closed hypergeometric form.

    Only valid where |z| < 1, i.e. cos(tau) > 1/2.
    """
    lam = (d - 2) / 2.0
    p = s + lam
    mu = compute_mu(ModelParams.from_frak_m(d, frak_m2=frak_m2)).mu
    N = mode_normalisation(p, mu)
    z, z1, z2 = _z_of_tau(tau, p, reading, sign)
    F, F1, F2 = hyp2f1_with_derivatives(mu, 1.0 - mu, p + 1.0, z)
    E = cmath.exp(sign * 1j * p * tau)
    ip = sign * 1j * p
    u = N * E * F
    u1 = N * E * (ip * F + F1 * z1)
    u2 = N * E * (ip * ip * F + 2.0 * ip * F1 * z1 + F2 * z1 * z1 + F1 * z2)
    c, t = math.cos(tau), math.tan(tau)
    Cc = c**lam
    C1 = -lam * t * Cc
    C2 = Cc * (lam * lam * t * t - lam / c**2)
    return Cc * u, C1 * u + Cc * u1, C2 * u + 2.0 * C1 * u1 + Cc * u2


def ode_coefficients(tau, d: int, frak_m2: float, s: int):
    """P, Q of T'' + P T' + Q T = 0."""
    tau = np.asarray(tau, dtype=float)
    c = np.cos(tau)
    return (d - 2) * np.tan(tau), s * (s + d - 2) + frak_m2 / c**2


def ode_residual(tau, T, dT, d2T, d: int, frak_m2: float, s: int):
    """Relative residual |T'' + P T' + Q T| / (|T''| + |P T'| + |Q T|)."""
    P, Q = ode_coefficients(tau, d, frak_m2, s)
    res = d2T + P * dT + Q * T
    scale = np.abs(d2T) + np.abs(P * dT) + np.abs(Q * T)
    return np.abs(res) / np.where(scale > 0, scale, 1.0)


# ------------------------------------------------------------------ Chebyshev panels


@functools.lru_cache(maxsize=None)
def _cheb_ops(n: int = CHEB_N):
    x = np.cos(np.pi * np.arange(n + 1) / n)[::-1]  # ascending Lobatto points
    V = C.chebvander(x, n)
    Vinv = np.linalg.inv(V)
    # indefinite integral from -1, values -> coefficients (degree n+1)
    Icoef = np.zeros((n + 2, n + 1))
    for j in range(n + 1):
        e = np.zeros(n + 1)
        e[j] = 1.0
        Icoef[:, j] = C.chebint(e, lbnd=-1.0)
    J = C.chebvander(x, n + 1) @ Icoef @ Vinv
    return x, Vinv, Icoef, J


def _clenshaw_rows(coef: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate sum_k coef[i, k] T_k(x[i]) row-wise."""
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    x2 = 2.0 * x
    for k in range(coef.shape[1] - 1, 0, -1):
        b1, b2 = coef[:, k] + x2 * b1 - b2, b1
    return coef[:, 0] + x * b1 - b2


def _breaks(p: float, eps: float) -> np.ndarray:
    wmax = min(0.1, 8.0 / max(p, 1.0))
    c_sw = 0.25
    pts = [0.0]
    edge = HALF_PI - c_sw
    n_in = max(1, math.ceil(edge / wmax))
    pts += list(np.linspace(0.0, edge, n_in + 1)[1:])
    c = c_sw
    while c > eps:
        c_next = max(0.5 * c, eps)
        if c_next < 1.5 * eps:
            c_next = eps
        a, b = HALF_PI - c, HALF_PI - c_next
        k = max(1, math.ceil((b - a) / wmax))
        pts += list(np.linspace(a, b, k + 1)[1:])
        c = c_next
    return np.asarray(pts)


def _solve_panels(d, frak_m2, s, breaks, y0, dy0):
    """March one real solution across the panels; return coefficient arrays."""
    x, Vinv, Icoef, J = _cheb_ops()
    n = CHEB_N
    ncoef = n + 3
    cy = np.zeros((len(breaks) - 1, ncoef))
    cdy = np.zeros((len(breaks) - 1, ncoef))
    cd2y = np.zeros((len(breaks) - 1, ncoef))
    I = np.eye(n + 1)
    for k in range(len(breaks) - 1):
        a, b = breaks[k], breaks[k + 1]
        h = 0.5 * (b - a)
        tau = a + h * (x + 1.0)
        P, Q = ode_coefficients(tau, d, frak_m2, s)
        Jh = h * J
        J2 = Jh @ Jh
        A = I + P[:, None] * Jh + Q[:, None] * J2
        rhs = -(P * dy0 + Q * (y0 + dy0 * (tau - a)))
        u = np.linalg.solve(A, rhs)
        cu = Vinv @ u
        c1 = h * (Icoef @ cu)
        c1[0] += dy0
        c0 = h * C.chebint(c1, lbnd=-1.0)
        c0[0] += y0
        c0[1] += dy0 * 0.0  # linear term already contained in integral of c1
        cd2y[k, : n + 1] = cu
        cdy[k, : n + 2] = c1
        cy[k, : n + 3] = c0
        y0 = float(C.chebval(1.0, c0))
        dy0 = float(C.chebval(1.0, c1))
    return cy, cdy, cd2y


@dataclass(frozen=True, eq=False)
class ModeFunction:
    """T^{+/-}_p for one harmonic degree, as a dense piecewise-polynomial interpolant.

    T^+ = T0 y1 + dT0 y2 with y1, y2 the real even/odd fundamental solutions;
    T^- is its complex conjugate.
    """

    d: int
    frak_m2: float
    s: int
    domain_eps: float
    mu: complex
    reading: str
    T0: complex
    dT0: complex
    breaks: np.ndarray
    coef: dict  # name -> (n_panels, ncoef) arrays for y1, dy1, d2y1, y2, dy2, d2y2
    wronskian: complex
    wronskian_drift: float
    formula_residual: float

    @property
    def p(self) -> float:
        return self.s + (self.d - 2) / 2.0

    @property
    def kappa2(self) -> float:
        return self.s * (self.s + self.d - 2)

    def _basis(self, tau):
        tau = np.asarray(tau, dtype=float)
        at = np.abs(tau)
        if np.any(at > HALF_PI - self.domain_eps * (1 - 1e-12)):
            raise DomainError(f"tau outside mode domain |tau| <= pi/2 - {self.domain_eps:g}")
        flat = at.ravel()
        idx = np.clip(np.searchsorted(self.breaks, flat, side="right") - 1, 0, len(self.breaks) - 2)
        a, b = self.breaks[idx], self.breaks[idx + 1]
        xx = (2.0 * flat - a - b) / (b - a)
        out = {}
        for name, arr in self.coef.items():
            out[name] = _clenshaw_rows(arr[idx], xx).reshape(tau.shape)
        sgn = np.sign(tau)
        sgn = np.where(sgn == 0, 1.0, sgn)
        # y1 even, y2 odd
        out["dy1"] = out["dy1"] * sgn
        out["y2"] = out["y2"] * sgn
        out["d2y2"] = out["d2y2"] * sgn
        return out

    def plus(self, tau, derivatives: int = 0):
        """T^+ (and derivatives up to the requested order) at tau."""
        B = self._basis(tau)
        T = self.T0 * B["y1"] + self.dT0 * B["y2"]
        if derivatives == 0:
            return T
        dT = self.T0 * B["dy1"] + self.dT0 * B["dy2"]
        if derivatives == 1:
            return T, dT
        d2T = self.T0 * B["d2y1"] + self.dT0 * B["d2y2"]
        return T, dT, d2T

    def minus(self, tau, derivatives: int = 0):
        r = self.plus(tau, derivatives)
        return np.conj(r) if derivatives == 0 else tuple(np.conj(v) for v in r)

    def residual(self, tau):
        T, dT, d2T = self.plus(tau, 2)
        return ode_residual(np.asarray(tau, float), T, dT, d2T, self.d, self.frak_m2, self.s)

    def wronskian_at(self, tau):
        tau = np.asarray(tau, float)
        B = self._basis(tau)
        w12 = np.cos(tau) ** (2 - self.d) * (B["y1"] * B["dy2"] - B["y2"] * B["dy1"])
        return self.wronskian * w12

    def wronskian_drift_at(self, tau):
        """|W(tau) - W(0)| relative to the size of the products it is formed from.

        Near the boundary both basis products can be much larger than their
        difference, so roundoff alone limits the attainable absolute accuracy.
        """
        tau = np.asarray(tau, float)
        B = self._basis(tau)
        cw = np.cos(tau) ** (2 - self.d)
        w12 = cw * (B["y1"] * B["dy2"] - B["y2"] * B["dy1"])
        size = cw * (np.abs(B["y1"] * B["dy2"]) + np.abs(B["y2"] * B["dy1"]))
        return np.abs(w12 - 1.0) / np.maximum(1.0, size)

    def check_nodes(self, per_panel: int = 7) -> np.ndarray:
        """Off-collocation test points (Gauss nodes of every panel), both signs."""
        g, _ = np.polynomial.legendre.leggauss(per_panel)
        a, b = self.breaks[:-1], self.breaks[1:]
        t = (0.5 * (b - a)[:, None] * (g[None, :] + 1.0) + a[:, None]).ravel()
        return np.concatenate([-t[::-1], t])

    def max_residual(self) -> float:
        return float(np.max(self.residual(self.check_nodes())))

    def table(self, tau) -> np.ndarray:
        """Columns tau, Re T+, Im T+, Re T-, Im T-, residual."""
        tau = np.asarray(tau, float)
        T = self.plus(tau)
        return np.column_stack([tau, T.real, T.imag, T.real, -T.imag, self.residual(tau)])

    def to_csv(self, path, tau) -> None:
        rows = self.table(tau)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "re_Tplus", "im_Tplus", "re_Tminus", "im_Tminus", "residual"])
            for row in rows:
                w.writerow([repr(float(v)) for v in row])


READINGS = ("exp_i_tau", "exp_i_p_tau")


def select_reading(d: int, frak_m2: float, s: int, taus=(-0.3, -0.1, 0.1, 0.3)):
    """Pick the hypergeometric argument reading whose closed form solves the ODE.

    Returns (reading, max relative residual); raises ResidualExceeded if none does.
    """
    best = None
    for reading in READINGS:
        worst = 0.0
        for t in taus:
            T, dT, d2T = formula_mode(t, d, frak_m2, s, reading)
            worst = max(worst, float(ode_residual(t, T, dT, d2T, d, frak_m2, s)))
        if best is None or worst < best[1]:
            best = (reading, worst)
        if worst < RESIDUAL_TOL:
            return reading, worst
    raise ResidualExceeded(f"no reading of the mode formula solves the ODE (best {best})")


@functools.lru_cache(maxsize=4096)
def _build_mode_cached(d: int, frak_m2: float, s: int, domain_eps: float) -> ModeFunction:
    params = ModelParams.from_frak_m(d, frak_m2=frak_m2)
    mu = compute_mu(params).mu
    reading, fres = select_reading(d, frak_m2, s)
    T0, dT0, _ = formula_mode(0.0, d, frak_m2, s, reading)
    p = s + (d - 2) / 2.0
    br = _breaks(p, domain_eps)
    c1 = _solve_panels(d, frak_m2, s, br, 1.0, 0.0)
    c2 = _solve_panels(d, frak_m2, s, br, 0.0, 1.0)
    coef = {"y1": c1[0], "dy1": c1[1], "d2y1": c1[2], "y2": c2[0], "dy2": c2[1], "d2y2": c2[2]}
    W = T0 * np.conj(dT0) - np.conj(T0) * dT0
    mf = ModeFunction(d, frak_m2, s, domain_eps, mu, reading, complex(T0), complex(dT0), br,
                      coef, complex(W), 0.0, fres)
    drift = float(np.max(mf.wronskian_drift_at(mf.check_nodes())))
    object.__setattr__(mf, "wronskian_drift", drift)
    return mf


def build_mode(params: ModelParams, s: int, domain_eps: float = DEFAULT_DOMAIN_EPS,
               check: bool = False) -> ModeFunction:
    """Construct T^{+/-}_p for degree s (p = s + (d-2)/2).

    With ``check=True`` the ODE residual and Wronskian drift are verified
    and ResidualExceeded is raised on failure.
    """
    if s < 0:
        raise DomainError("degree must be nonnegative")
    if not domain_eps > 0:
        raise DomainError("domain_eps must be positive")
    mf = _build_mode_cached(params.d, float(params.frak_m) ** 2, int(s), float(domain_eps))
    if check:
        res = mf.max_residual()
        if res > RESIDUAL_TOL or mf.wronskian_drift > RESIDUAL_TOL:
            raise ResidualExceeded(
                f"mode s={s}: residual {res:.3g}, wronskian drift {mf.wronskian_drift:.3g}")
    return mf


# ------------------------------------------------------------------ pointwise kernel


@dataclass(frozen=True)
class KernelValue:
    value: complex
    tail_bound: float
    terms: int


def kernel_point(params: ModelParams, x1: DeSitterPoint, x2: DeSitterPoint, eta: float,
                 s_max: int, domain_eps: float = DEFAULT_DOMAIN_EPS) -> KernelValue:
    """Abel-damped partial sum of the two-point mode series.

    sum_{s <= s_max} exp(-p eta) r^{2-d} T+_p(tau1) T-_p(tau2) A(s,d) C_s^{(d-2)/2}(alpha1.alpha2)

    The undamped pointwise series only converges as a distribution, so eta > 0
    is required.  The tail bound extrapolates the last term geometrically with
    ratio exp(-eta) times the polynomial growth of the terms.
    """
    if not eta > 0:
        raise DomainError("pointwise evaluation requires a damping eta > 0")
    d = params.d
    lam = params.lam
    t = float(np.clip(np.dot(x1.alpha_array, x2.alpha_array), -1.0, 1.0))
    G = gegenbauer_table(s_max, lam, t)
    total = 0.0 + 0.0j
    last = 0.0
    for s in range(s_max + 1):
        mf = build_mode(params, s, domain_eps)
        p = mf.p
        Tp = mf.plus(x1.tau)
        Tm = np.conj(mf.plus(x2.tau))
        term = math.exp(-p * eta) * Tp * Tm * addition_coefficient(s, d) * G[s]
        total += complex(term)
        last = abs(complex(term))
    pm = s_max + lam
    q = math.exp(-eta) * ((pm + 1.0) / pm) ** (d - 2)
    tail = last * q / (1.0 - q) if q < 1 else math.inf
    return KernelValue(params.r ** (2 - d) * total, params.r ** (2 - d) * tail, s_max + 1)
