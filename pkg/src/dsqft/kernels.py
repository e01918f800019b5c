"""Smeared fundamental kernels D+, D-, D, G_r, G_a as mode sums.

For one degree-s component  w * g(tau) * Z_s(alpha . beta)  of a test
function f the half-smeared kernels reduce to one-dimensional integrals

    J(tau_y) = int_{max(tau_y, lo)}^{hi} g T+_p cos^{-d} dtau,   J_full = J(-pi/2),

    D+(f, y) = r^2 w J_full T-_p(tau_y) Z_s(beta . alpha_y)
    D-(f, y) = r^2 w conj(J_full) T+_p(tau_y) Z_s(beta . alpha_y)
    G_r(f, y) = r^2 w / W [T+(tau_y) conj J(tau_y) - T-(tau_y) J(tau_y)] Z_s(beta . alpha_y)

with W = cos^{2-d}(T+ T-' - T- T+') = -2i, so that G_r - G_a = D = Im D+.
Sphere integrals of products of two zonal kernels are done exactly with the
reproducing property  int Z_s(a.b) Z_t(a.c) da = delta_st Z_s(b.c).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .geometry import DeSitterPoint, ModelParams, QuadratureGrid
from .modes import DEFAULT_DOMAIN_EPS, ModeFunction, build_mode
from .specfun import addition_coefficient, gegenbauer_table
from .testfn import TestFunction

DEFAULT_S_MAX = 160
TAU_ORDER = 20


class KernelKind(enum.Enum):
    DPLUS = "Dplus"
    DMINUS = "Dminus"
    DCOMM = "Dcomm"
    GRET = "Gret"
    GADV = "Gadv"


class TruncationWarning(UserWarning):
    pass


# ------------------------------------------------------------------ mode value cache

_MODE_CACHE: dict = {}


def mode_values(mode: ModeFunction, tau: np.ndarray) -> np.ndarray:
    tau = np.ascontiguousarray(tau, dtype=float)
    key = (id(mode), tau.shape, hash(tau.tobytes()))
    hit = _MODE_CACHE.get(key)
    if hit is None:
        if len(_MODE_CACHE) > 2048:
            _MODE_CACHE.clear()
        hit = mode.plus(tau)
        hit.setflags(write=False)
        _MODE_CACHE[key] = hit
    return hit


# ------------------------------------------------------------------ tau transforms


class TauTransform:
    """Integrals of g(tau) T+_p(tau) cos^{-d}(tau) over (parts of) [lo, hi]."""

    def __init__(self, g, lo: float, hi: float, mode: ModeFunction, order: int = TAU_ORDER):
        self.g, self.lo, self.hi, self.mode, self.order = g, lo, hi, mode, order
        self.d = mode.d
        npan = max(12, math.ceil(mode.p * (hi - lo) / 1.5))
        self.breaks = np.linspace(lo, hi, npan + 1)
        x, w = np.polynomial.legendre.leggauss(order)
        self._x, self._w = x, w
        a, b = self.breaks[:-1], self.breaks[1:]
        h = 0.5 * (b - a)
        self.nodes = (h[:, None] * (x[None, :] + 1.0) + a[:, None])
        self.weights = h[:, None] * w[None, :]
        self.gvals = g(self.nodes)
        self.Tp = mode.plus(self.nodes)
        vals = self.gvals * self.Tp * np.cos(self.nodes) ** (-self.d)
        self.panel = np.sum(vals * self.weights, axis=1)
        self.full = complex(np.sum(self.panel))
        # suffix sums: upper[k] = sum_{j >= k} panel[j]
        self.upper_tab = np.concatenate([np.cumsum(self.panel[::-1])[::-1], [0.0]])
        xl, wl = np.polynomial.legendre.leggauss(max(4, (2 * order) // 3))
        nl = h[:, None] * (xl[None, :] + 1.0) + a[:, None]
        low = np.sum(g(nl) * mode.plus(nl) * np.cos(nl) ** (-self.d) * (h[:, None] * wl[None, :]))
        self.error = abs(low - self.full) + 1e-15 * float(np.sum(np.abs(vals * self.weights)))

    def upper(self, tau) -> np.ndarray:
        """int_{max(tau, lo)}^{hi} g T+ cos^{-d}."""
        tau = np.asarray(tau, float)
        flat = tau.ravel()
        out = np.zeros(flat.shape, dtype=complex)
        below = flat <= self.lo
        out[below] = self.full
        inside = (flat > self.lo) & (flat < self.hi)
        if np.any(inside):
            t = flat[inside]
            k = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, len(self.breaks) - 2)
            b = self.breaks[k + 1]
            h = 0.5 * (b - t)
            nodes = h[:, None] * (self._x[None, :] + 1.0) + t[:, None]
            vals = self.g(nodes) * self.mode.plus(nodes) * np.cos(nodes) ** (-self.d)
            out[inside] = np.sum(vals * (h[:, None] * self._w[None, :]), axis=1) + self.upper_tab[k + 1]
        return out.reshape(tau.shape)

    def lower(self, tau) -> np.ndarray:
        """int_{lo}^{min(tau, hi)} g T+ cos^{-d}."""
        return self.full - self.upper(tau)


_TAU_CACHE: dict = {}


def tau_transform(term, s: int, mode: ModeFunction) -> TauTransform:
    key = (term.profile, term.kg, term.d, s, id(mode))
    hit = _TAU_CACHE.get(key)
    if hit is None:
        if len(_TAU_CACHE) > 20000:
            _TAU_CACHE.clear()
        hit = TauTransform(lambda t, _term=term, _s=s: _term.tau_profile(t, _s),
                           term.profile.lo, term.profile.hi, mode)
        _TAU_CACHE[key] = hit
    return hit


# ------------------------------------------------------------------ degree components


@dataclass(frozen=True, eq=False)
class Piece:
    s: int
    weight: complex
    pole: np.ndarray
    tt: TauTransform
    in_tail_window: bool


def spectral_pieces(f: TestFunction, params: ModelParams, s_max: int = DEFAULT_S_MAX,
                    domain_eps: float = DEFAULT_DOMAIN_EPS) -> list:
    """Degree components of f up to s_max, each with its tau transform."""
    if f.d != params.d:
        raise ContractError("test function dimension does not match the model")
    out = []
    for term in f.terms:
        if term.s is not None and term.s > s_max:
            warnings.warn(f"degree {term.s} exceeds s_max={s_max}; term dropped", TruncationWarning)
            continue
        for s, c in term.degree_weights(s_max):
            if c == 0.0:
                continue
            mode = build_mode(params, s, domain_eps)
            window = term.cap is not None and s > 0.75 * s_max
            out.append(Piece(s, term.coef * c, np.asarray(term.pole), tau_transform(term, s, mode), window))
    return out


def _zonal_values(s: int, d: int, t) -> np.ndarray:
    return addition_coefficient(s, d) * gegenbauer_table(s, (d - 2) / 2.0, t)[s]


_SPHERE_CACHE: dict = {}


def _zonal_table(pole: np.ndarray, alpha: np.ndarray, s_max: int) -> np.ndarray:
    """A(s,d) C_s(alpha . pole) for s <= s_max, shape (s_max+1, n)."""
    alpha = np.ascontiguousarray(alpha, float)
    key = (tuple(pole), alpha.shape, hash(alpha.tobytes()))
    hit = _SPHERE_CACHE.get(key)
    if hit is None or hit.shape[0] <= s_max:
        if len(_SPHERE_CACHE) > 256:
            _SPHERE_CACHE.clear()
        d = len(pole)
        G = gegenbauer_table(s_max, (d - 2) / 2.0, alpha @ pole)
        A = np.array([addition_coefficient(s, d) for s in range(s_max + 1)])
        hit = A[:, None] * G
        _SPHERE_CACHE[key] = hit
    return hit


# ------------------------------------------------------------------ half-smeared kernels


def _tau_factor(piece: Piece, kind: KernelKind, tau: np.ndarray, r: float) -> np.ndarray:
    mode = piece.tt.mode
    Tp = mode_values(mode, tau)
    r2 = r * r
    if kind is KernelKind.DPLUS:
        return (r2 * piece.weight * piece.tt.full) * np.conj(Tp)
    if kind is KernelKind.DMINUS:
        return (r2 * piece.weight * np.conj(piece.tt.full)) * Tp
    W = mode.wronskian
    if kind is KernelKind.GRET:
        J = piece.tt.upper(tau)
        return (r2 * piece.weight / W) * (Tp * np.conj(J) - np.conj(Tp) * J)
    if kind is KernelKind.GADV:
        K = piece.tt.lower(tau)
        return (r2 * piece.weight / W) * (np.conj(Tp) * K - Tp * np.conj(K))
    raise ContractError(f"no tau factor for {kind}")


class SmearedKernel:
    """y -> K(f, y) for one kernel kind, with error metadata.

    ``evaluate`` works on paired arrays (tau_i, alpha_i); ``on_grid`` on the
    tensor product of tau nodes and sphere nodes.  Errors combine the tau
    quadrature estimate of every component with, for cap terms, the sum of
    the components in the top quarter of the degree range as a tail proxy.
    """

    def __init__(self, kind: KernelKind | str, f: TestFunction, params: ModelParams,
                 s_max: int = DEFAULT_S_MAX, domain_eps: float = DEFAULT_DOMAIN_EPS):
        self.kind = KernelKind(kind)
        self.f = f
        self.params = params
        self.s_max = s_max
        self.pieces = spectral_pieces(f, params, s_max, domain_eps)
        if self.kind in (KernelKind.GRET, KernelKind.GADV) and not f.terms:
            raise ContractError("empty test function")

    def _components(self, kind, tau, Z_of):
        """Yield (tau factor, sphere factor, piece) per degree component."""
        for pc in self.pieces:
            yield _tau_factor(pc, kind, tau, self.params.r), Z_of(pc), pc

    def _combine(self, kind, tau, Z_of, reducer):
        if kind is KernelKind.DCOMM:
            vp, ep = self._combine(KernelKind.DPLUS, tau, Z_of, reducer)
            vm, em = self._combine(KernelKind.DMINUS, tau, Z_of, reducer)
            return -0.5j * (vp - vm), 0.5 * (ep + em)
        val = None
        err = None
        for tf, zf, pc in self._components(kind, tau, Z_of):
            v = reducer(tf, zf)
            a = reducer(np.abs(tf), np.abs(zf)).real
            e = a * (pc.tt.error / max(abs(pc.tt.full), 1e-300) + 1e-14)
            if pc.in_tail_window:
                e = e + a
            val = v if val is None else val + v
            err = e if err is None else err + e
        if val is None:
            shape = reducer(np.zeros_like(tau), np.zeros(Z_of(None).shape if False else 1)).shape
            return np.zeros(shape, complex), np.zeros(shape)
        return val, err

    def evaluate(self, tau, alpha, with_error: bool = False):
        tau = np.atleast_1d(np.asarray(tau, float))
        alpha = np.atleast_2d(np.asarray(alpha, float))
        if not self.pieces:
            z = np.zeros(tau.shape, complex)
            return (z, np.zeros(tau.shape)) if with_error else z
        smax = max(pc.s for pc in self.pieces)
        tabs = {}

        def Z_of(pc):
            key = tuple(pc.pole)
            if key not in tabs:
                tabs[key] = _zonal_table(pc.pole, alpha, smax)
            return tabs[key][pc.s]

        val, err = self._combine(self.kind, tau, Z_of, lambda a, b: a * b)
        return (val, err) if with_error else val

    def at(self, y: DeSitterPoint, with_error: bool = False):
        r = self.evaluate(np.array([y.tau]), np.array([y.alpha]), with_error)
        return (complex(r[0][0]), float(r[1][0])) if with_error else complex(r[0])

    def on_grid(self, tau, alpha, with_error: bool = False):
        """Values on tau (n,) x alpha (k, d); returns (n, k) arrays."""
        tau = np.asarray(tau, float)
        alpha = np.asarray(alpha, float)
        if not self.pieces:
            z = np.zeros((len(tau), len(alpha)), complex)
            return (z, np.zeros(z.shape)) if with_error else z
        smax = max(pc.s for pc in self.pieces)
        tabs = {}

        def Z_of(pc):
            key = tuple(pc.pole)
            if key not in tabs:
                tabs[key] = _zonal_table(pc.pole, alpha, smax)
            return tabs[key][pc.s]

        def outer(a, b):
            if np.iscomplexobj(a):
                return np.multiply.outer(a.real, b) + 1j * np.multiply.outer(a.imag, b)
            return np.multiply.outer(a, b)

        val, err = self._combine(self.kind, tau, Z_of, outer)
        return (val, err) if with_error else val

    def on(self, grid: QuadratureGrid, with_error: bool = False):
        return self.on_grid(grid.tau, grid.alpha, with_error)

    def envelope_constant(self, tau, alpha) -> float:
        """max |K| / cos^{(d-2)/2} tau over the given tensor grid."""
        v = np.abs(self.on_grid(tau, alpha))
        lam = self.params.lam
        return float(np.max(v.max(axis=1) / np.cos(tau) ** lam))


def smeared(kind, f, params, s_max: int = DEFAULT_S_MAX, **kw) -> SmearedKernel:
    return SmearedKernel(kind, f, params, s_max, **kw)


def smear_plus(params, f, x2: DeSitterPoint, s_max: int = DEFAULT_S_MAX):
    return SmearedKernel(KernelKind.DPLUS, f, params, s_max).at(x2)


def smear_minus(params, f, x2: DeSitterPoint, s_max: int = DEFAULT_S_MAX):
    return SmearedKernel(KernelKind.DMINUS, f, params, s_max).at(x2)


def smear_comm(params, f, x2: DeSitterPoint, s_max: int = DEFAULT_S_MAX):
    return SmearedKernel(KernelKind.DCOMM, f, params, s_max).at(x2)


def smear_retarded(params, f, y: DeSitterPoint, s_max: int = DEFAULT_S_MAX):
    return SmearedKernel(KernelKind.GRET, f, params, s_max).at(y)


def smear_advanced(params, f, y: DeSitterPoint, s_max: int = DEFAULT_S_MAX):
    return SmearedKernel(KernelKind.GADV, f, params, s_max).at(y)


# ------------------------------------------------------------------ fully smeared kernels


@dataclass(frozen=True)
class Smeared2:
    value: complex
    error: float


def _pairs(f, h, params, s_max):
    pf = spectral_pieces(f, params, s_max)
    ph = spectral_pieces(h, params, s_max)
    by_s = {}
    for pj in ph:
        by_s.setdefault(pj.s, []).append(pj)
    d = params.d
    for pi in pf:
        for pj in by_s.get(pi.s, ()):
            Z = float(_zonal_values(pi.s, d, float(np.clip(pi.pole @ pj.pole, -1.0, 1.0))))
            yield pi, pj, Z


def _finish(terms):
    val = 0.0 + 0.0j
    err = 0.0
    for v, a, rel, tail in terms:
        val += v
        err += a * (rel + 1e-14) + (a if tail else 0.0)
    return Smeared2(complex(val), float(err))


def pair_kernel(kind: KernelKind | str, f: TestFunction, h: TestFunction, params: ModelParams,
                s_max: int = DEFAULT_S_MAX) -> Smeared2:
    """K(f, h) = int K(f, y) h(y) dV(y) with the sphere integral done exactly."""
    kind = KernelKind(kind)
    if kind is KernelKind.DMINUS:
        return pair_kernel(KernelKind.DPLUS, h, f, params, s_max)
    if kind is KernelKind.DCOMM:
        p = pair_kernel(KernelKind.DPLUS, f, h, params, s_max)
        m = pair_kernel(KernelKind.DPLUS, h, f, params, s_max)
        return Smeared2(complex(-0.5j * (p.value - m.value)), 0.5 * (p.error + m.error))
    r, d = params.r, params.d
    scale = r ** (d + 2)
    terms = []
    for pi, pj, Z in _pairs(f, h, params, s_max):
        c = scale * pi.weight * pj.weight * Z
        tail = pi.in_tail_window or pj.in_tail_window
        rel_i = pi.tt.error / max(abs(pi.tt.full), 1e-300)
        rel_j = pj.tt.error / max(abs(pj.tt.full), 1e-300)
        if kind is KernelKind.DPLUS:
            v = c * pi.tt.full * np.conj(pj.tt.full)
            terms.append((v, abs(v), rel_i + rel_j, tail))
            continue
        # G_r / G_a: tau integral over the support of the h component
        tt = pj.tt
        t = tt.nodes.ravel()
        Tp = tt.Tp.ravel()
        meas = (tt.gvals * np.cos(tt.nodes) ** (-d) * tt.weights).ravel()
        W = pi.tt.mode.wronskian
        if kind is KernelKind.GRET:
            J = pi.tt.upper(t)
            integrand = (Tp * np.conj(J) - np.conj(Tp) * J) / W
        else:
            K = pi.tt.lower(t)
            integrand = (np.conj(Tp) * K - Tp * np.conj(K)) / W
        v = c * np.sum(integrand * meas)
        a = abs(c) * float(np.sum(np.abs(integrand * meas)))
        terms.append((v, a, rel_i + rel_j, tail))
    return _finish(terms)


def inner_product(f: TestFunction, h: TestFunction, params: ModelParams,
                  s_max: int = DEFAULT_S_MAX) -> Smeared2:
    """int f h dV, sphere part exact, tau part by Gauss-Legendre on the common support."""
    r, d = params.r, params.d
    terms = []
    x, w = np.polynomial.legendre.leggauss(60)
    for pi, pj, Z in _pairs(f, h, params, s_max):
        lo = max(pi.tt.lo, pj.tt.lo)
        hi = min(pi.tt.hi, pj.tt.hi)
        if hi <= lo:
            continue
        br = np.linspace(lo, hi, 17)
        a, b = br[:-1], br[1:]
        t = (0.5 * (b - a)[:, None] * (x[None, :] + 1.0) + a[:, None])
        ww = 0.5 * (b - a)[:, None] * w[None, :]
        val = np.sum(pi.tt.g(t) * pj.tt.g(t) * np.cos(t) ** (-d) * ww)
        v = r**d * pi.weight * pj.weight * Z * val
        terms.append((v, abs(v), 1e-12, pi.in_tail_window or pj.in_tail_window))
    return _finish(terms)


def green_identity(f: TestFunction, h: TestFunction, params: ModelParams,
                   s_max: int = DEFAULT_S_MAX) -> dict:
    """Compare G_r((box + m^2) f, h) with int f h dV."""
    from .testfn import apply_kg

    lhs = pair_kernel(KernelKind.GRET, apply_kg(f, params), h, params, s_max)
    rhs = inner_product(f, h, params, s_max)
    rel = abs(lhs.value - rhs.value) / max(abs(rhs.value), 1e-300)
    return {"lhs": lhs.value, "rhs": rhs.value, "relative_error": rel,
            "error_estimate": lhs.error + rhs.error}
