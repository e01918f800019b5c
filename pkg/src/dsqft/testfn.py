"""Compactly supported test functions on de Sitter space.

A test function is a finite sum of separable terms coef * a(tau) * Y(alpha)
where a is a smooth bump on [tau_lo, tau_hi] and the angular factor Y is
either the degree-s zonal kernel Z_s(alpha . beta) or a smooth cap window
w(angle(alpha, beta)) of angular radius theta_c.  Caps have compact support
on the sphere, which zonal harmonics never do; their degree-s components are
obtained from the Funk-Hecke formula.

Terms may carry a Klein-Gordon flag, meaning the operator (box + m^2) has
been applied to them; derivatives are analytic throughout.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError
from .geometry import HALF_PI, ModelParams
from .specfun import addition_coefficient, gegenbauer_table, harmonic_dim, sphere_area


# ------------------------------------------------------------------ profiles


def _bump_u(u):
    """exp(-1/(1-u^2)) and its first two u-derivatives, zero for |u| >= 1."""
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1.0
    uu = np.where(inside, u, 0.0)
    q = 1.0 - uu * uu
    b = np.where(inside, np.exp(-1.0 / q), 0.0)
    p1 = -2.0 * uu / q**2
    p2 = -2.0 / q**2 - 8.0 * uu * uu / q**3
    return b, b * p1, b * (p2 + p1 * p1)


@dataclass(frozen=True)
class Bump:
    """Standard bump exp(-1/(1-u^2)) rescaled to [lo, hi] in tau."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (-HALF_PI < self.lo < self.hi < HALF_PI):
            raise DomainError("bump support must satisfy -pi/2 < lo < hi < pi/2")

    def _u(self, tau):
        return (2.0 * np.asarray(tau, float) - self.lo - self.hi) / (self.hi - self.lo)

    def __call__(self, tau, derivatives: int = 0):
        b, b1, b2 = _bump_u(self._u(tau))
        k = 2.0 / (self.hi - self.lo)
        if derivatives == 0:
            return b
        return b, k * b1, k * k * b2


@dataclass(frozen=True)
class Cap:
    """Smooth window exp(-1/(1-(theta/theta_c)^2)) around a pole."""

    theta_c: float

    def __post_init__(self):
        if not 0 < self.theta_c < math.pi:
            raise DomainError("cap radius must lie in (0, pi)")

    def window(self, t):
        theta = np.arccos(np.clip(np.asarray(t, float), -1.0, 1.0))
        return _bump_u(theta / self.theta_c)[0]

    def laplacian(self, t, d: int):
        """Laplace-Beltrami operator on S^{d-1} applied to the window, as a function of alpha . beta."""
        theta = np.arccos(np.clip(np.asarray(t, float), -1.0, 1.0))
        v = theta / self.theta_c
        b, b1, b2 = _bump_u(v)
        inside = np.abs(v) < 1.0
        q = np.where(inside, 1.0 - v * v, 1.0)
        w_tt = b2 / self.theta_c**2
        # w_theta / theta in closed form, regular at theta = 0
        w_t_over_t = np.where(inside, -2.0 * b / (self.theta_c**2 * q**2), 0.0)
        st = np.sin(theta)
        theta_cot = np.where(theta > 1e-8, theta * np.cos(theta) / np.where(st > 0, st, 1.0), 1.0)
        return w_tt + (d - 2) * w_t_over_t * theta_cot

    def degree_coefficients(self, d: int, s_max: int) -> np.ndarray:
        return _cap_coefficients(self.theta_c, d, s_max)


@functools.lru_cache(maxsize=256)
def _cap_coefficients(theta_c: float, d: int, s_max: int) -> np.ndarray:
    """c_s with w(alpha . beta) = sum_s c_s Z_s(alpha . beta)  (Funk-Hecke)."""
    n = max(400, 6 * s_max)
    x, wq = np.polynomial.legendre.leggauss(n)
    theta = 0.5 * theta_c * (x + 1.0)
    wq = 0.5 * theta_c * wq
    t = np.cos(theta)
    wv = _bump_u(theta / theta_c)[0]
    lam = (d - 2) / 2.0
    G = gegenbauer_table(s_max, lam, t)
    A = np.array([addition_coefficient(s, d) for s in range(s_max + 1)])
    Zs = A[:, None] * G
    integ = Zs @ (wq * wv * np.sin(theta) ** (d - 2))
    z1 = np.array([harmonic_dim(s, d) for s in range(s_max + 1)]) / sphere_area(d)
    out = sphere_area(d - 1) * integ / z1
    out.setflags(write=False)
    return out


# ------------------------------------------------------------------ terms


@dataclass(frozen=True)
class Term:
    """One separable term.  Exactly one of ``s`` (harmonic degree) or ``cap`` is set.

    ``kg`` is None for a plain term, or (frak_m^2, r) when (box + m^2) has
    been applied.
    """

    coef: complex
    profile: Bump
    pole: tuple
    s: int | None = None
    cap: Cap | None = None
    kg: tuple | None = None

    def __post_init__(self):
        if (self.s is None) == (self.cap is None):
            raise DomainError("a term needs exactly one of a harmonic degree or a cap")
        if self.s is not None and self.s < 0:
            raise DomainError("harmonic degree must be nonnegative")
        p = np.asarray(self.pole, float)
        if abs(np.linalg.norm(p) - 1.0) > 1e-12:
            raise DomainError("pole must be a unit vector")
        object.__setattr__(self, "pole", tuple(float(v) for v in p))
        object.__setattr__(self, "coef", complex(self.coef))

    @property
    def d(self) -> int:
        return len(self.pole)

    @property
    def support(self) -> tuple:
        """(tau_lo, tau_hi, pole, angular radius); radius pi means the whole sphere."""
        rad = math.pi if self.cap is None else self.cap.theta_c
        return (self.profile.lo, self.profile.hi, np.asarray(self.pole), rad)

    def tau_profile(self, tau, s: int):
        """Real tau factor of the degree-s component (the Klein-Gordon image if flagged)."""
        if self.kg is None:
            return self.profile(tau)
        frak_m2, r = self.kg
        tau = np.asarray(tau, float)
        a, a1, a2 = self.profile(tau, 2)
        c, sn = np.cos(tau), np.sin(tau)
        d = self.d
        return (c * c * a2 + (d - 2) * sn * c * a1 + (s * (s + d - 2) * c * c + frak_m2) * a) / r**2

    def degree_weights(self, s_max: int):
        """[(s, weight)] such that the angular factor is sum_s weight * Z_s(alpha . beta)."""
        if self.s is not None:
            return [(self.s, 1.0)]
        c = self.cap.degree_coefficients(self.d, s_max)
        return [(s, float(c[s])) for s in range(s_max + 1)]

    def evaluate(self, tau, alpha):
        """Pointwise values; tau shape (m,), alpha shape (m, d)."""
        tau = np.asarray(tau, float)
        t = np.asarray(alpha, float) @ np.asarray(self.pole)
        d = self.d
        if self.s is not None:
            Z = addition_coefficient(self.s, d) * gegenbauer_table(self.s, (d - 2) / 2.0, t)[self.s]
            return self.coef * self.tau_profile(tau, self.s) * Z
        w = self.cap.window(t)
        if self.kg is None:
            return self.coef * self.profile(tau) * w
        frak_m2, r = self.kg
        a, a1, a2 = self.profile(tau, 2)
        c, sn = np.cos(tau), np.sin(tau)
        lap = self.cap.laplacian(t, d)
        val = c * c * a2 * w + (d - 2) * sn * c * a1 * w - c * c * a * lap + frak_m2 * a * w
        return self.coef * val / r**2


@dataclass(frozen=True)
class TestFunction:
    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        terms = tuple(self.terms)
        if len({t.d for t in terms}) > 1:
            raise DomainError("all terms must live in the same dimension")
        object.__setattr__(self, "terms", terms)

    @property
    def d(self) -> int:
        return self.terms[0].d

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return TestFunction(self.terms + other.terms)

    def scale(self, c: complex) -> "TestFunction":
        return TestFunction(tuple(replace(t, coef=c * t.coef) for t in self.terms))

    __rmul__ = scale

    def conj(self) -> "TestFunction":
        return TestFunction(tuple(replace(t, coef=t.coef.conjugate()) for t in self.terms))

    @property
    def is_real(self) -> bool:
        return all(t.coef.imag == 0.0 for t in self.terms)

    @property
    def is_single_harmonic(self) -> bool:
        return len(self.terms) == 1 and self.terms[0].s is not None

    @property
    def max_degree(self) -> int | None:
        """Largest harmonic degree, or None when a cap makes the expansion infinite."""
        if any(t.cap is not None for t in self.terms):
            return None
        return max(t.s for t in self.terms)

    @property
    def tau_support(self) -> tuple:
        return (min(t.profile.lo for t in self.terms), max(t.profile.hi for t in self.terms))

    def supports(self) -> list:
        return [t.support for t in self.terms]

    def evaluate(self, tau, alpha):
        tau = np.asarray(tau, float)
        alpha = np.asarray(alpha, float)
        out = np.zeros(np.broadcast_shapes(tau.shape, alpha.shape[:-1]), dtype=complex)
        for t in self.terms:
            out = out + t.evaluate(tau, alpha)
        return out

    def evaluate_point(self, x) -> complex:
        return complex(self.evaluate(np.array([x.tau]), np.array([x.alpha]))[0])

    def evaluate_grid(self, tau, alpha):
        """Values on the tensor grid tau (n,) x alpha (k, d)."""
        T = np.repeat(np.asarray(tau, float), len(alpha))
        A = np.tile(np.asarray(alpha, float), (len(tau), 1))
        return self.evaluate(T, A).reshape(len(tau), len(alpha))

    # -------------------------------------------------------------- json
    def to_dict(self) -> dict:
        out = []
        for t in self.terms:
            out.append({
                "coef": [t.coef.real, t.coef.imag],
                "interval": [t.profile.lo, t.profile.hi],
                "pole": list(t.pole),
                "degree": t.s,
                "cap_radius": None if t.cap is None else t.cap.theta_c,
                "kg": None if t.kg is None else list(t.kg),
            })
        return {"terms": out}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data) -> "TestFunction":
        terms = []
        for e in data["terms"]:
            terms.append(Term(
                coef=complex(*e["coef"]),
                profile=Bump(*e["interval"]),
                pole=tuple(e["pole"]),
                s=e.get("degree"),
                cap=None if e.get("cap_radius") is None else Cap(e["cap_radius"]),
                kg=None if e.get("kg") is None else tuple(e["kg"]),
            ))
        return cls(tuple(terms))

    @classmethod
    def from_json(cls, text: str) -> "TestFunction":
        return cls.from_dict(json.loads(text))


# ------------------------------------------------------------------ constructors


def make_bump(tau_minus: float, tau_plus: float, s: int, pole, coef: complex = 1.0) -> TestFunction:
    """Single-harmonic test function coef * bump(tau) * Z_s(alpha . pole)."""
    pole = np.asarray(pole, float)
    return TestFunction((Term(coef, Bump(tau_minus, tau_plus), tuple(pole / np.linalg.norm(pole)), s=s),))


def make_cap(tau_minus: float, tau_plus: float, theta_c: float, pole, coef: complex = 1.0) -> TestFunction:
    """coef * bump(tau) * w(angle(alpha, pole)) with w supported in the cap of radius theta_c."""
    pole = np.asarray(pole, float)
    return TestFunction((Term(coef, Bump(tau_minus, tau_plus), tuple(pole / np.linalg.norm(pole)),
                              cap=Cap(theta_c)),))


def apply_kg(f: TestFunction, params: ModelParams) -> TestFunction:
    """(box + m^2) f.

    In global coordinates the operator is
    r^{-2} [cos^d tau d_tau cos^{2-d} tau d_tau - cos^2 tau Delta_S + frak_m^2],
    applied term by term.  Only one application is supported.
    """
    out = []
    for t in f.terms:
        if t.kg is not None:
            raise DomainError("the Klein-Gordon operator can be applied only once")
        if t.d != params.d:
            raise DomainError("test function dimension does not match the model")
        out.append(replace(t, kg=(params.frak_m**2, params.r)))
    return TestFunction(tuple(out))


def rotate(f: TestFunction, R) -> TestFunction:
    """f(R^{-1} x): poles mapped beta -> R beta."""
    R = np.asarray(R, float)
    if R.shape != (f.d, f.d):
        raise DomainError("rotation has the wrong shape")
    if not np.allclose(R @ R.T, np.eye(f.d), atol=1e-12) or np.linalg.det(R) < 0:
        raise DomainError("matrix is not a rotation")
    out = []
    for t in f.terms:
        p = R @ np.asarray(t.pole)
        out.append(replace(t, pole=tuple(p / np.linalg.norm(p))))
    return TestFunction(tuple(out))
