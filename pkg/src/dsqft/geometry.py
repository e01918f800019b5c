"""Global coordinates on d-dimensional de Sitter space, causal relations,
the volume element and the quadrature grids used for space-time integrals.

Points are (tau, alpha) with conformal time tau in (-pi/2, pi/2) and alpha on
the unit sphere S^{d-1}; the embedding into (d+1)-dimensional Minkowski space
is (r tan tau, r alpha / cos tau).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm, qmc

from .errors import DomainError
from .specfun import sphere_area

HALF_PI = 0.5 * math.pi
LIGHTLIKE_BAND = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Model constants (d, r, m, b, b_n).

    ``b_n`` maps n -> interaction constant; orders not listed default to 1.
    """

    d: int
    r: float = 1.0
    m: float = 1.0
    b: float | None = None
    b_n: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 3:
            raise DomainError("space-time dimension d must be an integer >= 3")
        if not (self.r > 0 and self.m > 0):
            raise DomainError("r and m must be positive")
        if self.b is None:
            object.__setattr__(self, "b", self.m)
        if not self.b > 0:
            raise DomainError("b must be positive")
        object.__setattr__(self, "b_n", dict(self.b_n))

    @classmethod
    def from_frak_m(cls, d, frak_m=None, frak_m2=None, r=1.0, **kw):
        """Build from the dimensionless mass m r (or its square)."""
        if frak_m is None:
            if frak_m2 is None:
                raise DomainError("give frak_m or frak_m2")
            frak_m = math.sqrt(frak_m2)
        return cls(d=d, r=r, m=frak_m / r, **kw)

    @property
    def frak_m(self) -> float:
        return self.m * self.r

    @property
    def lam(self) -> float:
        """Gegenbauer index (d - 2) / 2, also the offset p - s."""
        return (self.d - 2) / 2.0

    @property
    def two_point_factor(self) -> float:
        return self.b**2 / self.m**2

    def coupling(self, n: int) -> float:
        return float(self.b_n.get(n, 1.0))

    def key(self) -> tuple:
        return (self.d, self.r, self.m, self.b, tuple(sorted(self.b_n.items())))

    def to_dict(self) -> dict:
        return {"d": self.d, "r": self.r, "m": self.m, "b": self.b,
                "b_n": {str(k): v for k, v in sorted(self.b_n.items())}}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelParams":
        data = dict(data)
        bn = {int(k): float(v) for k, v in dict(data.pop("b_n", {})).items()}
        if "frak_m" in data or "frak_m2" in data:
            return cls.from_frak_m(int(data.pop("d")), frak_m=data.pop("frak_m", None),
                                   frak_m2=data.pop("frak_m2", None), b_n=bn, **data)
        return cls(d=int(data.pop("d")), b_n=bn, **data)


@dataclass(frozen=True)
class DeSitterPoint:
    tau: float
    alpha: tuple

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 1 or abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise DomainError("alpha must be a unit vector")
        if not abs(self.tau) < HALF_PI:
            raise DomainError("tau must lie in (-pi/2, pi/2)")
        object.__setattr__(self, "alpha", tuple(float(v) for v in a))

    @classmethod
    def make(cls, tau, alpha) -> "DeSitterPoint":
        """Normalise ``alpha`` before constructing."""
        a = np.asarray(alpha, dtype=float)
        return cls(float(tau), tuple(a / np.linalg.norm(a)))

    @property
    def dim(self) -> int:
        return len(self.alpha)

    @property
    def alpha_array(self) -> np.ndarray:
        return np.asarray(self.alpha)


class CausalRelation(enum.Enum):
    SPACELIKE = "Spacelike"
    LIGHTLIKE_FUTURE = "LightlikeFuture"
    LIGHTLIKE_PAST = "LightlikePast"
    TIMELIKE_FUTURE = "TimelikeFuture"
    TIMELIKE_PAST = "TimelikePast"
    COINCIDENT = "Coincident"

    def reversed(self) -> "CausalRelation":
        swap = {
            CausalRelation.LIGHTLIKE_FUTURE: CausalRelation.LIGHTLIKE_PAST,
            CausalRelation.LIGHTLIKE_PAST: CausalRelation.LIGHTLIKE_FUTURE,
            CausalRelation.TIMELIKE_FUTURE: CausalRelation.TIMELIKE_PAST,
            CausalRelation.TIMELIKE_PAST: CausalRelation.TIMELIKE_FUTURE,
        }
        return swap.get(self, self)

    @property
    def causal(self) -> bool:
        return self not in (CausalRelation.SPACELIKE,)


def embed(x: DeSitterPoint, params: ModelParams | float = 1.0) -> np.ndarray:
    """Ambient Minkowski coordinates (r tan tau, r alpha / cos tau)."""
    r = params.r if isinstance(params, ModelParams) else float(params)
    if not abs(x.tau) < HALF_PI:
        raise DomainError("tau must lie in (-pi/2, pi/2)")
    c = math.cos(x.tau)
    return np.concatenate(([r * math.tan(x.tau)], r * x.alpha_array / c))


def minkowski_square(v: np.ndarray) -> float:
    return float(v[0] ** 2 - np.dot(v[1:], v[1:]))


def ambient_interval(x: DeSitterPoint, y: DeSitterPoint, r: float = 1.0) -> float:
    """Minkowski square of X(y) - X(x) for the embedded points."""
    return minkowski_square(embed(y, r) - embed(x, r))


def causal_classify(x: DeSitterPoint, y: DeSitterPoint, r: float = 1.0,
                    band: float = LIGHTLIKE_BAND) -> CausalRelation:
    """Causal relation of y relative to x from the ambient interval.

    |s^2| <= band * r^2 counts as lightlike; Future means y is later than x.
    """
    if x.tau == y.tau and x.alpha == y.alpha:
        return CausalRelation.COINCIDENT
    s2 = ambient_interval(x, y, r)
    if abs(s2) <= band * r * r:
        return CausalRelation.LIGHTLIKE_FUTURE if y.tau >= x.tau else CausalRelation.LIGHTLIKE_PAST
    if s2 < 0:
        return CausalRelation.SPACELIKE
    return CausalRelation.TIMELIKE_FUTURE if y.tau > x.tau else CausalRelation.TIMELIKE_PAST


def volume_weight(tau, params: ModelParams):
    """Density r^d cos^{-d}(tau) of the invariant volume in (tau, alpha)."""
    t = np.asarray(tau, dtype=float)
    if np.any(np.abs(t) >= HALF_PI):
        raise DomainError("volume weight undefined at |tau| >= pi/2")
    w = params.r ** params.d * np.cos(t) ** (-params.d)
    return float(w) if w.ndim == 0 else w


# --------------------------------------------------------------------------- grids


@dataclass(frozen=True)
class GridSpec:
    """Sizes and seed of a space-time quadrature grid.

    ``tau_panels`` uniform Gauss-Legendre panels cover |tau| <= pi/2 - c_switch;
    beyond that, panels are graded geometrically (ratio 1/2 in cos-distance to
    the boundary) down to the cutoff ``epsilon_cut`` and integrated in the
    logarithmic variable.  The sphere carries ``sphere_points`` scrambled Sobol
    points split into ``sphere_replicates`` independent, antipodally
    symmetrised replicates.
    """

    tau_panels: int = 24
    tau_order: int = 16
    sphere_points: int = 1024
    seed: int = 20240601
    epsilon_cut: float = 1e-6
    sphere_replicates: int = 8
    c_switch: float = 0.25
    tau_range: tuple | None = None
    extra_breaks: tuple = ()

    def __post_init__(self):
        if self.tau_panels < 1 or self.tau_order < 1 or self.sphere_points < 1:
            raise DomainError("grid sizes must be >= 1")
        if not 0 < self.epsilon_cut < HALF_PI:
            raise DomainError("epsilon_cut must lie in (0, pi/2)")
        if self.sphere_replicates < 1 or self.sphere_points % (2 * self.sphere_replicates):
            raise DomainError("sphere_points must be a multiple of 2 * sphere_replicates")
        if not 0 < self.c_switch < HALF_PI:
            raise DomainError("c_switch must lie in (0, pi/2)")
        if self.tau_range is not None:
            lo, hi = self.tau_range
            if not (-HALF_PI < lo < hi < HALF_PI):
                raise DomainError("tau_range must be an ordered sub-interval of (-pi/2, pi/2)")
            object.__setattr__(self, "tau_range", (float(lo), float(hi)))
        object.__setattr__(self, "extra_breaks", tuple(sorted(float(b) for b in self.extra_breaks)))

    def to_json(self) -> str:
        d = asdict(self)
        d["extra_breaks"] = list(self.extra_breaks)
        if self.tau_range is not None:
            d["tau_range"] = list(self.tau_range)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str | Mapping) -> "GridSpec":
        data = json.loads(text) if isinstance(text, str) else dict(text)
        if data.get("tau_range") is not None:
            data["tau_range"] = tuple(data["tau_range"])
        data["extra_breaks"] = tuple(data.get("extra_breaks", ()))
        return cls(**data)

    def replace(self, **kw) -> "GridSpec":
        d = asdict(self)
        d.update(kw)
        return GridSpec(**d)


def _gl(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _tau_panels(spec: GridSpec):
    """Sorted panel list [(lo, hi, logmap)] covering the tau domain."""
    eps, csw = spec.epsilon_cut, spec.c_switch
    edge = HALF_PI - csw
    panels = []
    if eps < csw:
        inner = np.linspace(-edge, edge, spec.tau_panels + 1)
        for a, b in zip(inner[:-1], inner[1:]):
            panels.append((a, b, False))
        c = csw
        outer = []
        while c > eps:
            c_next = max(0.5 * c, eps)
            if c_next < 1.5 * eps:
                c_next = eps
            outer.append((c_next, c))
            c = c_next
        for cl, ch in outer:
            panels.append((HALF_PI - ch, HALF_PI - cl, True))
            panels.append((-HALF_PI + cl, -HALF_PI + ch, True))
    else:
        inner = np.linspace(-HALF_PI + eps, HALF_PI - eps, spec.tau_panels + 1)
        for a, b in zip(inner[:-1], inner[1:]):
            panels.append((a, b, False))
    panels.sort()
    cuts = list(spec.extra_breaks)
    if spec.tau_range is not None:
        cuts += list(spec.tau_range)
    for t in cuts:
        out = []
        for a, b, lg in panels:
            if a < t < b:
                out += [(a, t, lg), (t, b, lg)]
            else:
                out.append((a, b, lg))
        panels = out
    if spec.tau_range is not None:
        lo, hi = spec.tau_range
        panels = [p for p in panels if p[0] >= lo - 1e-15 and p[1] <= hi + 1e-15]
    return panels


def tau_rule(spec: GridSpec, order: int | None = None):
    """Nodes and d(tau)-weights of the composite tau rule (no volume factor)."""
    order = spec.tau_order if order is None else order
    x, w = _gl(order)
    nodes, weights, panel_id = [], [], []
    for k, (a, b, logmap) in enumerate(_tau_panels(spec)):
        if logmap:
            # integrate in sigma = log(pi/2 - |tau|)
            sgn = 1.0 if b > 0 else -1.0
            ca, cb = HALF_PI - abs(a), HALF_PI - abs(b)
            sa, sb = math.log(min(ca, cb)), math.log(max(ca, cb))
            sig = 0.5 * (sb - sa) * x + 0.5 * (sb + sa)
            c = np.exp(sig)
            t = sgn * (HALF_PI - c)
            ww = 0.5 * (sb - sa) * w * c
        else:
            t = 0.5 * (b - a) * x + 0.5 * (b + a)
            ww = 0.5 * (b - a) * w
        nodes.append(t)
        weights.append(ww)
        panel_id.append(np.full(order, k))
    t = np.concatenate(nodes)
    idx = np.argsort(t, kind="stable")
    return t[idx], np.concatenate(weights)[idx], np.concatenate(panel_id)[idx]


def sphere_rule(d: int, spec: GridSpec):
    """Scrambled-Sobol points on S^{d-1} with equal weights and replicate labels."""
    per = spec.sphere_points // spec.sphere_replicates
    half = per // 2
    children = np.random.SeedSequence(spec.seed).spawn(spec.sphere_replicates)
    pts, labels = [], []
    for k, child in enumerate(children):
        eng = qmc.Sobol(d=d, scramble=True, seed=np.random.default_rng(child))
        if half & (half - 1) == 0:
            u = eng.random_base2(int(round(math.log2(half)))) if half > 1 else eng.random(1)
        else:
            u = eng.random(half)
        u = np.clip(u, 1e-15, 1 - 1e-15)
        g = norm.ppf(u)
        a = g / np.linalg.norm(g, axis=1, keepdims=True)
        pts.append(np.vstack([a, -a]))
        labels.append(np.full(2 * half, k))
    alpha = np.vstack(pts)
    w = np.full(alpha.shape[0], sphere_area(d) / alpha.shape[0])
    return alpha, w, np.concatenate(labels)


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Immutable tensor grid: tau nodes x sphere nodes."""

    spec: GridSpec
    d: int
    tau: np.ndarray
    tau_w: np.ndarray
    tau_panel: np.ndarray
    alpha: np.ndarray
    alpha_w: np.ndarray
    replicate: np.ndarray

    @property
    def tau_nodes(self):
        return list(zip(self.tau.tolist(), self.tau_w.tolist()))

    @property
    def sphere_nodes(self):
        return list(zip(map(tuple, self.alpha.tolist()), self.alpha_w.tolist()))

    @property
    def seed(self) -> int:
        return self.spec.seed

    @property
    def epsilon_cut(self) -> float:
        return self.spec.epsilon_cut

    def measure(self, params: ModelParams) -> np.ndarray:
        """tau weights times the volume density, shape (n_tau,)."""
        return self.tau_w * volume_weight(self.tau, params)

    def rotated(self, R: np.ndarray) -> "QuadratureGrid":
        """Same grid with every sphere node mapped alpha -> R alpha."""
        return QuadratureGrid(self.spec, self.d, self.tau, self.tau_w, self.tau_panel,
                              self.alpha @ np.asarray(R, dtype=float).T, self.alpha_w, self.replicate)

    def coarse(self) -> "QuadratureGrid":
        """Companion grid with a lower tau order on the same panels (error estimation)."""
        order = max(2, (2 * self.spec.tau_order) // 3)
        t, w, pid = tau_rule(self.spec, order)
        return QuadratureGrid(self.spec, self.d, t, w, pid, self.alpha, self.alpha_w, self.replicate)

    def integrate(self, values: np.ndarray, params: ModelParams):
        """Integrate node values (n_tau, n_sphere) against dV.

        Returns (value, sphere_error) where the error is the standard error of
        the mean over sphere replicates.
        """
        tw = self.measure(params)
        R = self.spec.sphere_replicates
        per_rep = np.empty(R, dtype=complex)
        col = np.sum(values * tw[:, None], axis=0)
        for k in range(R):
            sel = self.replicate == k
            per_rep[k] = np.sum(col[sel]) * sphere_area(self.d) / np.count_nonzero(sel)
        val = per_rep.mean()
        err = float(np.std(per_rep, ddof=1) / math.sqrt(R)) if R > 1 else 0.0
        return val, err


def make_grid(spec: GridSpec, params: ModelParams | int) -> QuadratureGrid:
    """Build the tau x sphere grid described by ``spec`` for dimension d."""
    d = params.d if isinstance(params, ModelParams) else int(params)
    t, w, pid = tau_rule(spec)
    alpha, aw, rep = sphere_rule(d, spec)
    return QuadratureGrid(spec, d, t, w, pid, alpha, aw, rep)


def random_rotation(d: int, seed=None) -> np.ndarray:
    """Haar-random element of SO(d)."""
    from scipy.stats import special_ortho_group

    return special_ortho_group.rvs(d, random_state=seed)


def unit(d: int, k: int | None = None, sign: float = 1.0) -> np.ndarray:
    """Basis vector e_k (default the last axis, the 'north pole')."""
    e = np.zeros(d)
    e[d - 1 if k is None else k] = sign
    return e


def random_unit(d: int, rng) -> np.ndarray:
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def cap_distance(b1, b2) -> float:
    """Great-circle angle between unit vectors."""
    return float(math.acos(max(-1.0, min(1.0, float(np.dot(b1, b2))))))


def hull_corner_points(tau_lo, tau_hi, pole, radius, toward) -> list:
    """Extreme points of a (tau-interval x spherical cap) support facing ``toward``.

    The returned points are the cap boundary point nearest to ``toward`` at
    both tau endpoints; a full-sphere support (radius >= pi) returns the
    point ``toward`` itself.
    """
    pole = np.asarray(pole, float)
    toward = np.asarray(toward, float)
    ang = cap_distance(pole, toward)
    if radius >= math.pi or ang <= radius:
        a = toward
    else:
        perp = toward - np.dot(toward, pole) * pole
        nrm = np.linalg.norm(perp)
        if nrm < 1e-14:
            perp = np.roll(pole, 1) - np.dot(np.roll(pole, 1), pole) * pole
            nrm = np.linalg.norm(perp)
        perp /= nrm
        a = math.cos(radius) * pole + math.sin(radius) * perp
    return [DeSitterPoint.make(t, a) for t in (tau_lo, tau_hi)]


def supports_spacelike(supp1, supp2, r: float = 1.0) -> bool:
    """True if two (tau_lo, tau_hi, pole, radius) supports are spacelike separated.

    Uses the conformal criterion |dtau| < angle on the extreme pairs and
    confirms every corner pair with ``causal_classify``.
    """
    t1l, t1h, p1, r1 = supp1
    t2l, t2h, p2, r2 = supp2
    gap = cap_distance(p1, p2) - r1 - r2
    if gap <= 0:
        return False
    if max(abs(t1h - t2l), abs(t2h - t1l)) >= gap:
        return False
    c1 = hull_corner_points(t1l, t1h, p1, r1, p2)
    c2 = hull_corner_points(t2l, t2h, p2, r2, p1)
    return all(causal_classify(x, y, r) is CausalRelation.SPACELIKE for x in c1 for y in c2)


def point_support_relation(y: DeSitterPoint, support) -> tuple:
    """(in causal past of support, in causal future of support) for a (tau_lo, tau_hi, pole, radius) set.

    Uses the conformal flatness of de Sitter space onto the Einstein cylinder:
    two points are causally related iff |d tau| >= great-circle angle.
    """
    lo, hi, pole, rad = support
    dist = max(0.0, cap_distance(y.alpha_array, pole) - rad)
    past = hi - y.tau >= dist
    future = y.tau - lo >= dist
    return past, future
