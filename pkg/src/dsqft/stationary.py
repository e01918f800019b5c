"""Exact frequency-support calculus for stationary space-times.

With a spectral gap eps, the time Fourier transform of D+ is supported in
[eps, inf), that of D- in (-inf, -eps], while G_r carries no constraint.
A term of the truncated function is a product of such kernels, one per slot,
integrated over a common point, which enforces sum_l E_l = 0.  Certificates
are chains of linear inequalities over exact rationals, serialised as
canonical JSON and identified by their SHA-256 digest.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction

from .errors import ContractError, DomainError, MissingEntry


class Freq(enum.Enum):
    DPLUS = "Dplus"
    DMINUS = "Dminus"
    FREE = "free"

    def mirrored(self) -> "Freq":
        return {Freq.DPLUS: Freq.DMINUS, Freq.DMINUS: Freq.DPLUS, Freq.FREE: Freq.FREE}[self]


@dataclass(frozen=True)
class FreqSupport:
    """Half-line supports per kernel tag for spectral gap epsilon."""

    epsilon: Fraction

    def interval(self, tag: Freq) -> tuple:
        """(lower, upper) bounds, None meaning unbounded."""
        if tag is Freq.DPLUS:
            return (self.epsilon, None)
        if tag is Freq.DMINUS:
            return (None, -self.epsilon)
        return (None, None)

    def contains(self, tag: Freq, E: Fraction) -> bool:
        lo, hi = self.interval(tag)
        return (lo is None or E >= lo) and (hi is None or E <= hi)


@dataclass(frozen=True)
class TermPattern:
    """Kernel sequence of one term: D- before slot k, the distinguished kernel at k, D+ after."""

    tags: tuple

    @classmethod
    def from_term(cls, n: int, k: int) -> "TermPattern":
        if not 1 <= k <= n:
            raise DomainError("need 1 <= k <= n")
        return cls(tuple([Freq.DMINUS] * (k - 1) + [Freq.FREE] + [Freq.DPLUS] * (n - k)))

    def __post_init__(self):
        object.__setattr__(self, "tags", tuple(Freq(t) for t in self.tags))

    @property
    def n(self) -> int:
        return len(self.tags)

    def mirrored(self) -> "TermPattern":
        return TermPattern(tuple(t.mirrored() for t in reversed(self.tags)))


def to_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _finalise(body: dict) -> dict:
    text = canonical(body)
    return {"id": hashlib.sha256(text.encode()).hexdigest(), "body": body}


def _counterexample(pattern: TermPattern, r: int, eps: Fraction) -> list:
    """Energies in the supports with sum 0 and sum_{l>=r} E_l <= 0 (1-based r)."""
    base = {Freq.DPLUS: eps, Freq.DMINUS: -eps, Freq.FREE: Fraction(0)}
    E = [base[t] for t in pattern.tags]
    head = [i for i in range(r - 1) if pattern.tags[i] is not Freq.DMINUS]
    tail = [i for i in range(r - 1, pattern.n) if pattern.tags[i] is not Freq.DPLUS]
    h0, t0 = head[0], tail[0]
    S = sum(E)
    T = sum(E[r - 1:])
    B = max(T, S, Fraction(0)) + 1
    E[t0] -= B
    E[h0] += B - S
    return E


def _reason(via: str, r: int, n: int, eps: Fraction) -> dict:
    if via == "tail":
        return {"via": "tail", "step": f"E_l >= {eps} for l={r}..{n}",
                "bound": f"sum_(l={r})^{n} E_l >= {(n - r + 1) * eps}"}
    return {"via": "head", "step": f"E_l <= {-eps} for l=1..{r - 1}; sum_l E_l = 0",
            "bound": f"sum_(l={r})^{n} E_l = -sum_(l=1)^{r - 1} E_l >= {(r - 1) * eps}"}


def verify_spectral_support(pattern: TermPattern, epsilon) -> dict:
    """Certify that every tail sum sum_{l=r}^n E_l (r = 2..n) is > 0 on the support.

    For each r the certificate cites every applicable argument: the tail
    (all D+, so the sum is at least (n-r+1) eps) and/or the head (all D-, so
    the head sum is at most -(r-1) eps and the tail equals minus the head by
    energy conservation).  If some r admits neither, an explicit
    counterexample is returned instead.
    """
    eps = to_fraction(epsilon)
    if eps <= 0:
        raise DomainError("a positive spectral gap is required")
    n = pattern.n
    chain = []
    for r in range(2, n + 1):
        vias = []
        if all(t is Freq.DMINUS for t in pattern.tags[:r - 1]):
            vias.append("head")
        if all(t is Freq.DPLUS for t in pattern.tags[r - 1:]):
            vias.append("tail")
        if not vias:
            E = _counterexample(pattern, r, eps)
            body = {"kind": "spectral-support", "pattern": [t.value for t in pattern.tags],
                    "epsilon": str(eps), "status": "counterexample", "r": r,
                    "energies": [str(e) for e in E], "tail_sum": str(sum(E[r - 1:]))}
            return _finalise(body)
        chain.append({"r": r, "reasons": [_reason(v, r, n, eps) for v in vias]})
    body = {"kind": "spectral-support", "pattern": [t.value for t in pattern.tags],
            "epsilon": str(eps), "status": "certified", "chain": chain}
    return _finalise(body)


def verify_out_in_equivalence(n: int, epsilon) -> dict:
    """Certificate that prod_l D-^(E_l) is supported in sum E <= -n eps, disjoint from sum E = 0."""
    if n < 3:
        raise DomainError("need n >= 3")
    eps = to_fraction(epsilon)
    if eps < 0:
        raise DomainError("spectral gap must be nonnegative")
    bound = -n * eps
    body = {"kind": "out-in-equivalence", "n": n, "epsilon": str(eps),
            "steps": [f"E_l <= {-eps} for l=1..{n}", f"sum_l E_l <= {bound}"]}
    if eps == 0:
        body["status"] = "inconclusive"
        body["reason"] = "gapless: the support touches the hyperplane sum E = 0"
    else:
        body["status"] = "zero"
        body["steps"].append(f"{bound} < 0: disjoint from sum_l E_l = 0, the integral vanishes")
        body["bound"] = str(bound)
    return _finalise(body)


def replay(cert: dict) -> dict:
    """Recompute a stored certificate from its inputs."""
    body = cert["body"]
    if body["kind"] == "spectral-support":
        return verify_spectral_support(TermPattern(tuple(body["pattern"])), Fraction(body["epsilon"]))
    if body["kind"] == "out-in-equivalence":
        return verify_out_in_equivalence(body["n"], Fraction(body["epsilon"]))
    raise ContractError(f"unknown certificate kind {body['kind']}")


def replay_matches(cert: dict) -> bool:
    return canonical(replay(cert)) == canonical(cert)


def mirror_certificate(cert: dict) -> dict:
    """Certificate expected for the mirrored pattern (reverse, swap D+ and D-, negate energies).

    Step r maps to step n + 2 - r with head and tail arguments exchanged.
    """
    body = cert["body"]
    pat = TermPattern(tuple(body["pattern"]))
    n = pat.n
    mp = pat.mirrored()
    eps = Fraction(body["epsilon"])
    if body["status"] != "certified":
        return verify_spectral_support(mp, eps)
    swap = {"head": "tail", "tail": "head"}
    chain = []
    for step in body["chain"]:
        r = n + 2 - step["r"]
        vias = sorted(swap[x["via"]] for x in step["reasons"])
        chain.append({"r": r, "reasons": [_reason(v, r, n, eps) for v in vias]})
    chain.sort(key=lambda st: st["r"])
    new = {"kind": "spectral-support", "pattern": [t.value for t in mp.tags],
           "epsilon": str(eps), "status": "certified", "chain": chain}
    return _finalise(new)


def certificate_json(cert: dict) -> str:
    return canonical(cert)


def contrast_report(params_desitter, fixture: dict | None, grid=None) -> dict:
    """Stationary exact-zero certificate next to the de Sitter out-field value of a fixture."""
    from .testfn import TestFunction
    from .wightman import out_npoint

    if not fixture:
        raise MissingEntry("no frozen out_npoint fixture available")
    fns = [TestFunction.from_dict(f) for f in fixture["functions"]]
    r = out_npoint(fns, params_desitter, grid)
    cert = verify_out_in_equivalence(len(fns), fixture.get("stationary_epsilon", "0.1"))
    ratio = abs(r.value) / r.error if r.error > 0 else float("inf")
    return {
        "fixture": fixture.get("name"),
        "d": params_desitter.d,
        "frak_m": params_desitter.frak_m,
        "n": len(fns),
        "stationary": {"value": 0, "exact": True, "certificate_id": cert["id"],
                       "status": cert["body"]["status"]},
        "desitter": {"value": float(r.value.real), "error": r.error, "ratio": ratio,
                     "nonzero": ratio > 5.0},
    }
