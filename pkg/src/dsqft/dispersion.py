"""Integrability of half-smeared two-point kernels near the conformal boundary.

The n-point integrals exist when  int_M |D+(f, x)|^n dx < inf.  For a
single-harmonic f the kernel factorises as A(tau) Z_s(beta . alpha), so the
integral splits into a one-dimensional sphere integral (Gauss-Jacobi in
t = beta . alpha) and a tau integral, which is accumulated shell by shell
towards |tau| = pi/2 - eps.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi

from .errors import BudgetExceeded, DomainError, PreconditionViolation
from .geometry import HALF_PI, GridSpec, ModelParams, tau_rule, volume_weight
from .modes import compute_mu
from .kernels import DEFAULT_S_MAX, KernelKind, SmearedKernel, _zonal_values
from .specfun import sphere_area
from .testfn import TestFunction
from .wightman import Loc, truncated_npoint

MIN_EPSILON = 1e-10
R2_THRESHOLD = 0.99
CAUCHY_TOL = 1e-3
FIT_WINDOW = 5


@dataclass(frozen=True)
class ThresholdVerdict:
    d: int
    n: int
    exponent: float
    passes: bool

    @property
    def boundary_power(self) -> float:
        # n(d-2)/2 - d, the same number as the exponent
        return self.exponent

    def to_dict(self) -> dict:
        return {"d": self.d, "n": self.n, "exponent": self.exponent,
                "boundary_power": self.boundary_power, "passes": self.passes}


def threshold(d: int, n: int) -> ThresholdVerdict:
    """Power-counting verdict: the integrand behaves like cos^{(dn-2n-2d)/2} tau."""
    if d < 3 or n < 3:
        raise DomainError("need d >= 3 and n >= 3")
    e = (d * n - 2 * n - 2 * d) / 2
    return ThresholdVerdict(d, n, e, e > -1)


class Verdict(enum.Enum):
    CONVERGES = "Converges"
    DIVERGES_LOG = "DivergesLog"
    DIVERGES_POWER = "DivergesPower"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True, eq=False)
class ConvergenceScan:
    f: TestFunction
    n: int
    eps_sequence: np.ndarray
    I_values: np.ndarray
    I_errors: np.ndarray
    verdict: Verdict
    diagnostics: dict = field(default_factory=dict)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.I_values, prepend=0.0)

    def rows(self) -> list:
        res = self.diagnostics.get("log_fit_residuals", {})
        return [(float(e), float(v), float(i), res.get(k, float("nan")))
                for k, (e, v, i) in enumerate(zip(self.eps_sequence, self.I_values, self.increments))]

    def to_csv(self, path=None) -> str:
        lines = ["epsilon,I_value,increment,fit_residual"]
        lines += [f"{e!r},{v!r},{i!r},{r!r}" for e, v, i, r in self.rows()]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        return {"n": self.n, "eps": self.eps_sequence.tolist(), "I": self.I_values.tolist(),
                "I_error": self.I_errors.tolist(), "verdict": self.verdict.value,
                "diagnostics": {k: v for k, v in self.diagnostics.items() if k != "log_fit_residuals"}}


def _single_harmonic(f: TestFunction) -> tuple:
    if not f.is_single_harmonic:
        raise PreconditionViolation("a single-harmonic test function is required")
    return f.terms[0].s, f.d


def _sphere_power_integral(s: int, d: int, n: int, nodes: int = 200) -> float:
    """int_{S^{d-1}} |Z_s(beta . alpha)|^n dalpha with Z_s(1) normalised to 1."""
    a = (d - 3) / 2.0
    t, w = roots_jacobi(nodes, a, a)
    z = _zonal_values(s, d, t) / _zonal_values(s, d, np.array([1.0]))[0]
    return float(sphere_area(d - 1) * np.sum(w * np.abs(z) ** n))


def _radial_amplitude(f: TestFunction, params: ModelParams, tau, s_max: int, domain_eps: float):
    """|A(tau)| with D+(f, (tau, alpha)) = A(tau) Z_s(beta . alpha) / Z_s(1)."""
    k = SmearedKernel(KernelKind.DPLUS, f, params, s_max, domain_eps=domain_eps)
    pole = np.asarray(f.terms[0].pole, float)
    return np.abs(k.evaluate(tau, np.repeat(pole[None, :], len(tau), axis=0)))


def _linear_fit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return coef, resid, r2


def scan_In(f: TestFunction, n: int, params: ModelParams, eps_sequence, grid_spec: GridSpec | None = None,
            s_max: int = DEFAULT_S_MAX) -> ConvergenceScan:
    """Partial integrals I(eps) = int_{|tau| < pi/2 - eps} int |D+(f, x)|^n dV.

    The verdict is read from the data alone: Converges when the last relative
    increment is below 1e-3; otherwise increments per unit log(1/eps) are
    fitted against eps over the last FIT_WINDOW points.  A flat law (|q| < 0.1)
    with an R^2 > 0.99 logarithmic fit of I is DivergesLog, a clear power law
    (q < -0.1) is DivergesPower.
    """
    s, d = _single_harmonic(f)
    eps = np.asarray(eps_sequence, float)
    if eps.ndim != 1 or len(eps) < 2 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise DomainError("eps_sequence must be strictly decreasing and positive")
    if eps[0] >= HALF_PI:
        raise DomainError("eps values must be below pi/2")
    if eps[-1] < MIN_EPSILON:
        raise BudgetExceeded(f"eps={eps[-1]:g} is below the resolvable cutoff {MIN_EPSILON:g}")
    spec = grid_spec or GridSpec(tau_order=24)
    brk = set(spec.extra_breaks)
    brk.update(float(HALF_PI - e) for e in eps)
    brk.update(float(-HALF_PI + e) for e in eps)
    spec = spec.replace(epsilon_cut=float(eps[-1]), extra_breaks=tuple(sorted(brk)),
                        c_switch=max(min(spec.c_switch, float(eps[0])), float(eps[-1]) * 2))
    domain_eps = min(1e-7, 0.5 * float(eps[-1]))
    sph = _sphere_power_integral(s, d, n)

    def partials(order):
        t, w, _ = tau_rule(spec, order)
        A = _radial_amplitude(f, params, t, s_max, domain_eps)
        integrand = (A ** n) * w * volume_weight(t, params) * sph
        c = HALF_PI - np.abs(t)
        out, acc, prev = [], 0.0, HALF_PI
        for e in eps:
            shell = (c > e) & (c <= prev)
            acc = acc + float(np.sum(integrand[shell]))
            out.append(acc)
            prev = e
        return np.array(out)

    I = partials(spec.tau_order)
    I_coarse = partials(max(4, (2 * spec.tau_order) // 3))
    err = np.abs(I - I_coarse)
    verdict, diag = _classify(eps, I)
    diag["threshold"] = threshold(d, n).to_dict() if d >= 3 and n >= 3 else None
    diag["mu"] = [_mu(params).real, _mu(params).imag]
    return ConvergenceScan(f, n, eps, I, err, verdict, diag)


def _mu(params):
    return compute_mu(params).mu


def _classify(eps, I) -> tuple:
    diag: dict = {}
    inc = np.diff(I)
    last_rel = float(inc[-1] / I[-1]) if I[-1] > 0 else 0.0
    diag["tail_relative_increment"] = last_rel
    w = min(FIT_WINDOW, len(eps))
    L = np.log(1.0 / eps[-w:])
    coef, resid, r2 = _linear_fit(L, I[-w:])
    diag["log_fit"] = {"a": float(coef[1]), "b": float(coef[0]), "r2": r2, "window": w}
    diag["log_fit_residuals"] = {len(eps) - w + k: float(r) for k, r in enumerate(resid)}
    if last_rel < CAUCHY_TOL:
        return Verdict.CONVERGES, diag
    dl = np.diff(np.log(1.0 / eps))
    rate = inc / dl
    ok = rate[-(w - 1):] > 0
    if np.count_nonzero(ok) >= 2:
        x = np.log(eps[1:][-(w - 1):][ok])
        y = np.log(rate[-(w - 1):][ok])
        pc, _, pr2 = _linear_fit(x, y)
        q = float(pc[0])
        diag["power_fit"] = {"slope": q, "r2": pr2, "growth_exponent": q}
        if abs(q) < 0.1 and r2 > R2_THRESHOLD:
            return Verdict.DIVERGES_LOG, diag
        if q < -0.1 and pr2 > R2_THRESHOLD:
            return Verdict.DIVERGES_POWER, diag
    return Verdict.INCONCLUSIVE, diag


def scan_matches_threshold(scan: ConvergenceScan, d: int) -> bool:
    v = threshold(d, scan.n)
    return (scan.verdict is Verdict.CONVERGES) == v.passes


@dataclass(frozen=True)
class EnvelopeFit:
    slope: float
    intercept: float
    r2: float
    reference: float
    indicial: float
    n_points: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def envelope_fit(f: TestFunction, params: ModelParams, tau_grid=None, s_max: int = DEFAULT_S_MAX) -> EnvelopeFit:
    """Slope of log sup_alpha |D+(f, (tau, alpha))| against log cos tau near the boundary.

    The default window takes 20 points per side with cos tau log-spaced in
    [1e-6, 1e-2].  Reported next to the envelope exponent (d-2)/2 and the
    indicial exponent (d-2)/2 + Re mu.
    """
    _single_harmonic(f)
    if tau_grid is None:
        c = np.logspace(-6, -2, 20)
        tau_grid = np.concatenate([-(HALF_PI - c), HALF_PI - c])
    tau = np.asarray(tau_grid, float)
    c = np.cos(tau)
    if len(tau) < 4 or np.ptp(np.log(c)) < math.log(10.0):
        raise PreconditionViolation("window too small for a slope fit (need >= 4 points over a decade)")
    if np.any(HALF_PI - np.abs(tau) < 1e-7):
        raise PreconditionViolation("window reaches beyond the mode domain")
    A = _radial_amplitude(f, params, tau, s_max, 1e-7)
    if np.any(A <= 0):
        raise PreconditionViolation("kernel vanishes inside the window")
    coef, _, r2 = _linear_fit(np.log(c), np.log(A))
    lam = params.lam
    return EnvelopeFit(float(coef[0]), float(coef[1]), r2, lam, lam + float(np.real(_mu(params))), len(tau))


def dominated_convergence_probe(f: TestFunction, coefficients, n: int, params: ModelParams,
                                grid=None, s_max: int = DEFAULT_S_MAX, tol: float = 1e-3) -> dict:
    """Scale one slot of a truncated n-point function by c_l and watch the values.

    The dominating function is F(x) = max_l |c_l| * C cos^{(d-2)/2} tau with C the
    grid-wise envelope constant of D+(f, .), checked at every grid node.
    """
    from .wightman import resolve_grid

    c = np.asarray(coefficients, float)
    if len(c) < 2:
        raise DomainError("need at least two coefficients")
    g = resolve_grid(grid, [f], params)
    base = SmearedKernel(KernelKind.DPLUS, f, params, s_max)
    C = base.envelope_constant(g.tau, g.alpha)
    F = np.max(np.abs(c)) * C * np.cos(g.tau) ** params.lam
    bound_ok = True
    values, errors = [], []
    for cl in c:
        fl = f.scale(cl)
        k = SmearedKernel(KernelKind.DPLUS, fl, params, s_max)
        v = np.abs(k.on_grid(g.tau, g.alpha)).max(axis=1)
        bound_ok &= bool(np.all(v <= F * (1 + 1e-12) + 1e-300))
        r = truncated_npoint([Loc(fl)] + [Loc(f)] * (n - 1), params, g, s_max)
        values.append(r.value)
        errors.append(r.error)
    values = np.array(values)
    ref = values[0] / c[0] if c[0] != 0 else np.nan
    lin = float(np.max(np.abs(values - c * ref)) / max(np.max(np.abs(values)), 1e-300))
    peak = float(np.max(np.abs(values)))
    converges = bool(abs(values[-1]) <= tol * peak) if peak > 0 else True
    return {"coefficients": c.tolist(), "values": [complex(v) for v in values], "errors": errors,
            "bound_holds": bound_ok, "envelope_constant": C, "linearity_defect": lin,
            "converges_to_zero": converges}
