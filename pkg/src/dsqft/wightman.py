"""Truncated n-point functions of in/loc/out fields, scattering amplitudes and
the structural checks built on them (Hermiticity, locality, rotation
invariance, Yang-Feldman consistency).

For n >= 3 the truncated function of slots (a_1, f_1) ... (a_n, f_n) is

    b_n sum_k int prod_{l<k} D-(f_l, y) K_k(f_k, y) prod_{l>k} D+(f_l, y) dV(y)

with K = G_r for local slots, K = D for out slots and no term for in slots.
A current slot j(f) = phi((box + m^2) f) carries no D+/D- factor (both kernels
solve the Klein-Gordon equation) and the function f(y) itself as its K; the
variant with ``retarded=True`` carries G_r(f, y) instead.  For n = 2 the
truncated function is (b^2/m^2) D+(f_1, f_2) for every tag.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, PreconditionViolation
from .geometry import (DeSitterPoint, GridSpec, ModelParams, QuadratureGrid, make_grid,
                       point_support_relation, supports_spacelike)
from .kernels import DEFAULT_S_MAX, KernelKind, SmearedKernel, pair_kernel
from .testfn import TestFunction, rotate


class Tag(enum.Enum):
    IN = "In"
    LOC = "Loc"
    OUT = "Out"
    CURRENT = "Current"


@dataclass(frozen=True)
class FieldSlot:
    tag: Tag
    f: TestFunction
    retarded: bool = False

    def __post_init__(self):
        object.__setattr__(self, "tag", Tag(self.tag))
        if self.retarded and self.tag is not Tag.CURRENT:
            raise ContractError("only current slots carry a retarded payload")

    def star(self) -> "FieldSlot":
        return replace(self, f=self.f.conj())

    def rotated(self, R) -> "FieldSlot":
        return replace(self, f=rotate(self.f, R))


def In(f):
    return FieldSlot(Tag.IN, f)


def Loc(f):
    return FieldSlot(Tag.LOC, f)


def Out(f):
    return FieldSlot(Tag.OUT, f)


def Current(f, retarded: bool = False):
    return FieldSlot(Tag.CURRENT, f, retarded)


class GridWarning(UserWarning):
    pass


@dataclass(frozen=True)
class NPointResult:
    value: complex
    error: float
    term_breakdown: tuple = ()
    exact: bool = False
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "value_re": float(np.real(self.value)),
            "value_im": float(np.imag(self.value)),
            "error": float(self.error),
            "exact": self.exact,
            "terms": [{k: ({"re": v.real, "im": v.imag} if isinstance(v, complex) else v)
                       for k, v in t.items()} for t in self.term_breakdown],
            "notes": list(self.notes),
        }


def _exact_zero(note: str = "") -> NPointResult:
    return NPointResult(0j, 0.0, (), True, (note,) if note else ())


# ------------------------------------------------------------------ grids and slot arrays


def default_grid_spec(fns) -> GridSpec:
    degs = [f.max_degree for f in fns]
    if any(dg is None for dg in degs):
        pts = 2048
    elif max(degs) == 0:
        pts = 16
    else:
        pts = 1024
    return GridSpec(sphere_points=pts)


_GRIDS: dict = {}


def resolve_grid(grid, fns, params: ModelParams) -> QuadratureGrid:
    """Use a given grid as is; otherwise build one with breaks at all support ends."""
    if isinstance(grid, QuadratureGrid):
        return grid
    spec = default_grid_spec(fns) if grid is None else grid
    breaks = set(spec.extra_breaks)
    for f in fns:
        for t in f.terms:
            breaks.update((t.profile.lo, t.profile.hi))
    spec = spec.replace(extra_breaks=tuple(sorted(breaks)))
    key = (spec.to_json(), params.d)
    if key not in _GRIDS:
        if len(_GRIDS) > 64:
            _GRIDS.clear()
        _GRIDS[key] = make_grid(spec, params)
    return _GRIDS[key]


_KERNELS: dict = {}


def kernel(kind: KernelKind, f: TestFunction, params: ModelParams, s_max: int) -> SmearedKernel:
    key = (kind, f, params.key(), s_max)
    hit = _KERNELS.get(key)
    if hit is None:
        if len(_KERNELS) > 512:
            _KERNELS.clear()
        hit = SmearedKernel(kind, f, params, s_max)
        _KERNELS[key] = hit
    return hit


def _slot_arrays(slot: FieldSlot, params, tau, alpha, s_max):
    """(minus, plus, K) arrays with their error arrays; None marks an identically zero factor."""
    def on(kind):
        return kernel(kind, slot.f, params, s_max).on_grid(tau, alpha, with_error=True)

    if slot.tag is Tag.CURRENT:
        if slot.retarded:
            K = on(KernelKind.GRET)
        else:
            K = (slot.f.evaluate_grid(tau, alpha), np.zeros((len(tau), len(alpha))))
        return None, None, K
    M = on(KernelKind.DMINUS)
    P = on(KernelKind.DPLUS)
    if slot.tag is Tag.IN:
        K = None
    elif slot.tag is Tag.LOC:
        K = on(KernelKind.GRET)
    else:
        K = on(KernelKind.DCOMM)
    return M, P, K


def _product_term(factors):
    """Value and propagated error integrands of a product of (value, error) factors."""
    val = factors[0][0]
    for v, _ in factors[1:]:
        val = val * v
    err = np.zeros(val.shape)
    absvals = [np.abs(v) for v, _ in factors]
    for i, (_, e) in enumerate(factors):
        if not np.any(e):
            continue
        prod = e
        for j, a in enumerate(absvals):
            if j != i:
                prod = prod * a
        err = err + prod
    return val, err


def _term_integrals(slots, params, grid: QuadratureGrid, s_max, integrands):
    """Integrate each integrand builder on the fine and coarse tau rules.

    ``integrands(arrays)`` returns {key: list of factors or None}.  Returns
    {key: (value, error)} with error = |fine - coarse| + sphere s.e. + kernel errors.
    """
    out = {}
    coarse = grid.coarse()
    results = []
    for g in (grid, coarse):
        arrays = [_slot_arrays(s, params, g.tau, g.alpha, s_max) for s in slots]
        vals = {}
        for key, factors in integrands(arrays).items():
            if factors is None:
                vals[key] = None
                continue
            v, e = _product_term(factors)
            iv, se = g.integrate(v, params)
            ie, _ = g.integrate(e, params)
            vals[key] = (complex(iv), float(se), float(abs(ie)))
        results.append(vals)
    fine, crs = results
    for key, v in fine.items():
        if v is None:
            out[key] = None
            continue
        iv, se, ke = v
        out[key] = (iv, abs(iv - crs[key][0]) + se + ke)
    return out


# ------------------------------------------------------------------ truncated functions


def _dispersion_note(d: int, n: int) -> str:
    if (d * n - 2 * n - 2 * d) / 2.0 > -1:
        return ""
    return (f"dispersion integral for d={d}, n={n} does not converge at the boundary; "
            "the value depends on epsilon_cut")


def truncated_npoint(slots, params: ModelParams, grid=None, s_max: int = DEFAULT_S_MAX) -> NPointResult:
    """Truncated vacuum expectation value of the ordered product of field slots."""
    slots = [s if isinstance(s, FieldSlot) else FieldSlot(*s) for s in slots]
    n = len(slots)
    if n < 2:
        raise ContractError("truncated functions need n >= 2 (one-point functions vanish)")
    if n == 2:
        if any(s.tag is Tag.CURRENT for s in slots):
            return _exact_zero("current in a two-point function: D+ solves the Klein-Gordon equation")
        v = pair_kernel(KernelKind.DPLUS, slots[0].f, slots[1].f, params, s_max)
        c = params.two_point_factor
        return NPointResult(c * v.value, c * v.error, ({"k": None, "tag": "two-point",
                                                         "value": c * v.value, "error": c * v.error},))
    if sum(s.tag is Tag.CURRENT for s in slots) >= 2:
        return _exact_zero("two or more currents")
    active = [k for k, s in enumerate(slots) if s.tag is not Tag.IN]
    if not active:
        return _exact_zero("all slots incoming: quasi-free")
    g = resolve_grid(grid, [s.f for s in slots], params)

    def integrands(arrays):
        out = {}
        for k in active:
            factors = []
            for l, (M, P, K) in enumerate(arrays):
                fac = M if l < k else (K if l == k else P)
                if fac is None:
                    factors = None
                    break
                factors.append(fac)
            out[k] = factors
        return out

    ints = _term_integrals(slots, params, g, s_max, integrands)
    bn = params.coupling(n)
    terms = []
    for k in active:
        if ints[k] is None:
            terms.append({"k": k, "tag": slots[k].tag.value, "value": 0j, "error": 0.0, "exact": True})
        else:
            v, e = ints[k]
            terms.append({"k": k, "tag": slots[k].tag.value, "value": bn * v, "error": abs(bn) * e,
                          "exact": False})
    value = sum((t["value"] for t in terms), 0j)
    error = sum(t["error"] for t in terms)
    notes = []
    nd = _dispersion_note(params.d, n)
    if nd:
        notes.append(nd)
    if error > 0.1 * abs(value) and error > 0:
        warnings.warn(f"grid insufficient: error {error:.3g} vs |value| {abs(value):.3g}", GridWarning)
        notes.append("grid-insufficient")
    return NPointResult(complex(value), float(error), tuple(terms), all(t.get("exact") for t in terms),
                        tuple(notes))


def full_npoint(slots, params: ModelParams, grid=None, s_max: int = DEFAULT_S_MAX) -> NPointResult:
    """Non-truncated expectation value via the cluster expansion (one-point functions vanish)."""
    from .cluster import TruncatedCache

    slots = list(slots)
    g = None if len(slots) < 3 else resolve_grid(grid, [s.f for s in slots], params)

    def compute(idx):
        r = truncated_npoint([slots[i] for i in idx], params, g, s_max)
        return r

    cache = TruncatedCache(compute)
    from .cluster import set_partitions

    val = 0j
    err = 0.0
    for part in set_partitions(list(range(len(slots)))):
        if any(len(b) == 1 for b in part):
            continue
        pv = 1.0 + 0j
        rel = 0.0
        for b in part:
            r = cache[tuple(b)]
            pv *= r.value
            rel += r.error / max(abs(r.value), 1e-300) if r.value != 0 else 0.0
        val += pv
        err += abs(pv) * rel
    return NPointResult(complex(val), float(err))


def smatrix_element(in_fns, out_fns, params: ModelParams, grid=None,
                    s_max: int = DEFAULT_S_MAX) -> NPointResult:
    """Truncated amplitude < phi_in(f_1)...phi_in(f_k) phi_out(f_{k+1})...phi_out(f_n) >^T.

    Telescoping the out-slot terms gives
    b_n (-i/2) [ int prod_{l<=k} D-(f_l) prod_{l>k} D+(f_l) dV - int prod_l D-(f_l) dV ].
    """
    fns = list(in_fns) + list(out_fns)
    n, k = len(fns), len(in_fns)
    if n < 3:
        raise ContractError("scattering amplitudes are computed for n >= 3")
    if k == n:
        return _exact_zero("no outgoing slot: the two boundary terms coincide")
    slots = [In(f) for f in fns]
    g = resolve_grid(grid, fns, params)

    def integrands(arrays):
        mixed = [arrays[l][0] if l < k else arrays[l][1] for l in range(n)]
        return {"mixed": mixed, "minus": [a[0] for a in arrays]}

    ints = _term_integrals(slots, params, g, s_max, integrands)
    bn = params.coupling(n)
    c = -0.5j * bn
    t1 = {"k": "mixed", "value": c * ints["mixed"][0], "error": abs(c) * ints["mixed"][1]}
    t2 = {"k": "all-minus", "value": -c * ints["minus"][0], "error": abs(c) * ints["minus"][1]}
    value = t1["value"] + t2["value"]
    return NPointResult(complex(value), float(t1["error"] + t2["error"]), (t1, t2))


def out_npoint(real_fns, params: ModelParams, grid=None, s_max: int = DEFAULT_S_MAX) -> NPointResult:
    """Truncated n-point function of the outgoing field for real test functions:
    b_n Im int prod_l D+(f_l, y) dV(y)."""
    fns = list(real_fns)
    if len(fns) < 3:
        raise ContractError("out_npoint needs n >= 3")
    if not all(f.is_real for f in fns):
        raise ContractError("out_npoint requires real-valued test functions")
    slots = [In(f) for f in fns]
    g = resolve_grid(grid, fns, params)
    ints = _term_integrals(slots, params, g, s_max, lambda arrays: {"plus": [a[1] for a in arrays]})
    v, e = ints["plus"]
    bn = params.coupling(len(fns))
    value = bn * v.imag
    return NPointResult(complex(value), abs(bn) * e,
                        ({"k": "plus", "value": bn * v, "error": abs(bn) * e},))


def ccr_commutator(f: TestFunction, h: TestFunction, params: ModelParams,
                   s_max: int = DEFAULT_S_MAX) -> dict:
    """<[phi_in(f), phi_in(h)]> from the two-point function, next to (b^2/m^2) D(f, h)."""
    w1 = truncated_npoint([In(f), In(h)], params, s_max=s_max)
    w2 = truncated_npoint([In(h), In(f)], params, s_max=s_max)
    D = pair_kernel(KernelKind.DCOMM, f, h, params, s_max)
    c = params.two_point_factor
    return {"commutator": w1.value - w2.value, "error": w1.error + w2.error,
            "bD": c * D.value, "bD_error": c * D.error}


# ------------------------------------------------------------------ verifications


def verify_hermiticity(slots, params: ModelParams, grid=None, s_max: int = DEFAULT_S_MAX,
                       tol: float = 1e-12) -> dict:
    """W^T(f_1..f_n) against conj W^T(conj f_n .. conj f_1) on one shared grid."""
    slots = list(slots)
    g = None if len(slots) < 3 else resolve_grid(grid, [s.f for s in slots], params)
    a = truncated_npoint(slots, params, g, s_max)
    b = truncated_npoint([s.star() for s in reversed(slots)], params, g, s_max)
    diff = abs(a.value - np.conj(b.value))
    scale = max(abs(a.value), sum(abs(t["value"]) for t in a.term_breakdown), 1e-300)
    return {"value": a.value, "mirror": np.conj(b.value), "difference": diff,
            "relative": diff / scale, "passed": diff <= tol * scale}


def verify_rotation_invariance(slots, R, params: ModelParams, grid=None,
                               s_max: int = DEFAULT_S_MAX, independent_seed: int | None = None) -> dict:
    """W^T of rotated slots on the rotated grid versus W^T on the original grid.

    With ``independent_seed`` the rotated configuration is also evaluated on a
    freshly seeded grid and compared within 2 x (error_1 + error_2).
    """
    slots = list(slots)
    g = resolve_grid(grid, [s.f for s in slots], params)
    rs = [s.rotated(R) for s in slots]
    a = truncated_npoint(slots, params, g, s_max)
    b = truncated_npoint(rs, params, g.rotated(R), s_max)
    scale = max(abs(a.value), 1e-300)
    rep = {"value": a.value, "rotated": b.value, "relative": abs(a.value - b.value) / scale}
    rep["passed"] = rep["relative"] <= 1e-12
    if independent_seed is not None:
        spec = g.spec.replace(seed=independent_seed)
        c = truncated_npoint(rs, params, make_grid(spec, params), s_max)
        rep["independent"] = c.value
        rep["independent_bound"] = 2.0 * (a.error + c.error)
        rep["independent_passed"] = abs(c.value - a.value) <= rep["independent_bound"]
        rep["passed"] = rep["passed"] and rep["independent_passed"]
    return rep


def yang_feldman_check(slots, k: int, params: ModelParams, grid=None, s_max: int = DEFAULT_S_MAX) -> dict:
    """Loc at slot k versus (In at k) + (current carrying G_r f_k at k), term by term."""
    slots = list(slots)
    if slots[k].tag is not Tag.LOC:
        raise ContractError("slot k must be a local field")
    g = resolve_grid(grid, [s.f for s in slots], params)
    loc = truncated_npoint(slots, params, g, s_max)
    s_in = slots[:k] + [In(slots[k].f)] + slots[k + 1:]
    s_cur = slots[:k] + [Current(slots[k].f, retarded=True)] + slots[k + 1:]
    a = truncated_npoint(s_in, params, g, s_max)
    b = truncated_npoint(s_cur, params, g, s_max)
    loc_terms = {t["k"]: t["value"] for t in loc.term_breakdown}
    in_terms = {t["k"]: t["value"] for t in a.term_breakdown}
    cur_terms = {t["k"]: t["value"] for t in b.term_breakdown}
    worst = 0.0
    for j, v in loc_terms.items():
        w = in_terms.get(j, 0j) + cur_terms.get(j, 0j)
        worst = max(worst, abs(v - w))
    total = abs(loc.value - (a.value + b.value))
    return {"loc": loc.value, "in": a.value, "current": b.value, "max_term_difference": worst,
            "total_difference": total, "passed": worst == 0.0}


LOCALITY_CASES = {
    "I": "outside the causal shadow of both supports",
    "II": "causal past of f_k only",
    "III": "causal past of f_k+1 only",
    "IV": "causal past of both supports",
    "V": "causal future of at least one support",
}


def _classify_case(y, supp_k, supp_k1) -> str:
    pk = any(point_support_relation(y, s) for s in supp_k)
    rk = [point_support_relation(y, s) for s in supp_k]
    rk1 = [point_support_relation(y, s) for s in supp_k1]
    past_k = any(r[0] for r in rk)
    past_k1 = any(r[0] for r in rk1)
    fut = any(r[1] for r in rk + rk1)
    if fut:
        return "V"
    if past_k and past_k1:
        return "IV"
    if past_k:
        return "II"
    if past_k1:
        return "III"
    return "I"


def locality_sample_points(d: int, n: int, seed: int = 7, tau_max: float = 1.3) -> list:
    rng = np.random.default_rng(seed)
    tau = rng.uniform(-tau_max, tau_max, n)
    a = rng.standard_normal((n, d))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    return [DeSitterPoint.make(t, al) for t, al in zip(tau, a)]


def verify_locality_bracket(f_k: TestFunction, f_k1: TestFunction, params: ModelParams, sample_points,
                            s_max: int = DEFAULT_S_MAX, require_spacelike: bool = True) -> dict:
    """Evaluate the exchange bracket of two local slots at sample points y.

    bracket = G_r(f_k)D+(f_k1) + D-(f_k)G_r(f_k1) - G_r(f_k1)D+(f_k) - D-(f_k1)G_r(f_k)

    which is what swapping phi(f_k) and phi(f_k1) changes in every truncated
    function (the common D-/D+ prefactors omitted).  The same bracket with
    G_r replaced by D is reported as the commutation-relation variant.
    """
    sk, sk1 = f_k.supports(), f_k1.supports()
    spacelike = all(supports_spacelike(a, b, params.r) for a in sk for b in sk1)
    if require_spacelike and not spacelike:
        raise PreconditionViolation("supports are not spacelike separated")
    pts = list(sample_points)
    tau = np.array([p.tau for p in pts])
    alpha = np.array([p.alpha for p in pts])

    def ev(kind, f):
        return kernel(kind, f, params, s_max).evaluate(tau, alpha, with_error=True)

    Gk, eGk = ev(KernelKind.GRET, f_k)
    Gk1, eGk1 = ev(KernelKind.GRET, f_k1)
    Pk, ePk = ev(KernelKind.DPLUS, f_k)
    Pk1, ePk1 = ev(KernelKind.DPLUS, f_k1)
    Mk, eMk = ev(KernelKind.DMINUS, f_k)
    Mk1, eMk1 = ev(KernelKind.DMINUS, f_k1)
    Dk, eDk = ev(KernelKind.DCOMM, f_k)
    Dk1, eDk1 = ev(KernelKind.DCOMM, f_k1)

    def bracket(Ak, eAk, Ak1, eAk1):
        val = Ak * Pk1 + Mk * Ak1 - Ak1 * Pk - Mk1 * Ak
        err = (np.abs(Ak) * ePk1 + eAk * np.abs(Pk1) + np.abs(Mk) * eAk1 + eMk * np.abs(Ak1)
               + np.abs(Ak1) * ePk + eAk1 * np.abs(Pk) + np.abs(Mk1) * eAk + eMk1 * np.abs(Ak))
        scale = (np.abs(Ak * Pk1) + np.abs(Mk * Ak1) + np.abs(Ak1 * Pk) + np.abs(Mk1 * Ak))
        return val, err, scale

    b, e, _ = bracket(Gk, eGk, Gk1, eGk1)
    bc, _, scc = bracket(Dk, eDk, Dk1, eDk1)
    cases = [_classify_case(y, sk, sk1) for y in pts]
    mags = np.abs(b)
    counts = {c: cases.count(c) for c in LOCALITY_CASES}
    ccr_ratio = np.abs(bc) / np.maximum(scc, 1e-300)
    return {
        "spacelike": spacelike,
        "n_points": len(pts),
        "bracket": b,
        "error": e,
        "cases": cases,
        "case_counts": counts,
        "max_ratio": float(np.max(mags / np.maximum(e, 1e-300))),
        "passed": bool(np.all(mags <= e)),
        "ccr_bracket": bc,
        "ccr_max_relative": float(np.max(np.where(scc > 0, ccr_ratio, 0.0))),
        "ccr_passed": bool(np.all(np.abs(bc) <= 1e-13 * np.maximum(scc, 1e-300))),
    }


def verify_space_like_commutator(f: TestFunction, h: TestFunction, params: ModelParams,
                                 s_max: int = DEFAULT_S_MAX) -> dict:
    """|D(f, h)| against its error estimate for spacelike separated supports."""
    sp = all(supports_spacelike(a, b, params.r) for a in f.supports() for b in h.supports())
    D = pair_kernel(KernelKind.DCOMM, f, h, params, s_max)
    return {"spacelike": sp, "value": D.value, "error": D.error, "passed": abs(D.value) <= D.error}
