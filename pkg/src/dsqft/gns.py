"""Finite sections of the GNS construction for the form factor functional.

Vectors are words (ordered sequences of field slots) applied to the vacuum;
the inner product is <[u], [w]> = F(u* w) with F the full (non-truncated)
expectation value and u* the reversed, conjugated word.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import set_partitions
from .errors import ContractError
from .geometry import ModelParams
from .kernels import DEFAULT_S_MAX
from .wightman import FieldSlot, resolve_grid, truncated_npoint

VACUUM: tuple = ()


def star(word) -> tuple:
    """(f_1 ... f_n)* = conj f_n ... conj f_1, tags kept."""
    return tuple(s.star() for s in reversed(tuple(word)))


class FormFactor:
    """Full expectation values F(word) from memoised truncated functions."""

    def __init__(self, params: ModelParams, grid=None, s_max: int = DEFAULT_S_MAX):
        self.params, self.grid, self.s_max = params, grid, s_max
        self._trunc: dict = {}

    def truncated(self, slots: tuple):
        hit = self._trunc.get(slots)
        if hit is None:
            hit = truncated_npoint(list(slots), self.params, self.grid, self.s_max)
            self._trunc[slots] = hit
        return hit

    def __call__(self, word) -> tuple:
        """(value, error) of F(word); the empty word gives exactly 1."""
        word = tuple(word)
        if not word:
            return 1.0 + 0j, 0.0
        val, err = 0j, 0.0
        for part in set_partitions(list(range(len(word)))):
            if any(len(b) == 1 for b in part):
                continue
            pv, pe = 1.0 + 0j, 0.0
            for b in part:
                r = self.truncated(tuple(word[i] for i in b))
                pe = abs(pv) * r.error + pe * abs(r.value) + pe * r.error
                pv = pv * r.value
            val += pv
            err += pe
        return complex(val), float(err)


@dataclass(frozen=True, eq=False)
class FormFactorGram:
    basis: tuple
    matrix: np.ndarray
    errors: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2)) if self.matrix.size else 0.0

    @property
    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T))) if self.matrix.size else 0.0

    def hermitian_part(self) -> np.ndarray:
        return 0.5 * (self.matrix + self.matrix.conj().T)

    def signature(self, tol: float | None = None) -> tuple:
        return signature(self, tol)

    def to_csv(self, path) -> None:
        rows = ["i,j,re,im,error"]
        n = self.matrix.shape[0]
        for i in range(n):
            for j in range(n):
                v = self.matrix[i, j]
                rows.append(f"{i},{j},{v.real!r},{v.imag!r},{self.errors[i, j]!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")


def gram(basis, params: ModelParams, grid=None, s_max: int = DEFAULT_S_MAX,
         max_length: int = 4) -> FormFactorGram:
    """G_ij = F(w_i* w_j) for every ordered pair (both triangles are computed)."""
    basis = tuple(tuple(w) for w in basis)
    for w in basis:
        if len(w) > max_length:
            raise ContractError(f"word longer than {max_length}")
        if not all(isinstance(s, FieldSlot) for s in w):
            raise ContractError("words are sequences of FieldSlot")
    fns = [s.f for w in basis for s in w]
    g = resolve_grid(grid, fns, params) if fns else None
    F = FormFactor(params, g, s_max)
    n = len(basis)
    G = np.zeros((n, n), dtype=complex)
    E = np.zeros((n, n))
    for i in range(n):
        si = star(basis[i])
        for j in range(n):
            G[i, j], E[i, j] = F(si + basis[j])
    return FormFactorGram(basis, G, E)


def default_tolerance(g: FormFactorGram) -> float:
    return 1e-8 * max(g.norm, 1e-300)


def signature(g: FormFactorGram, tol: float | None = None) -> tuple:
    """(n_plus, n_zero, n_minus) of the Hermitian part at tolerance tol (default 1e-8 ||G||)."""
    tol = default_tolerance(g) if tol is None else tol
    if g.matrix.size == 0:
        return (0, 0, 0)
    ev = np.linalg.eigvalsh(g.hermitian_part())
    return (int(np.sum(ev > tol)), int(np.sum(np.abs(ev) <= tol)), int(np.sum(ev < -tol)))


@dataclass(frozen=True, eq=False)
class NullQuotient:
    reduced: np.ndarray
    projection: np.ndarray  # columns span the retained (non-null) directions
    null_vectors: np.ndarray
    eigenvalues: np.ndarray

    @property
    def removed(self) -> int:
        return self.null_vectors.shape[1]


def null_quotient(g: FormFactorGram, tol: float | None = None) -> NullQuotient:
    """Remove the numerical kernel (|eigenvalue| <= tol) of the Hermitian Gram."""
    tol = default_tolerance(g) if tol is None else tol
    H = g.hermitian_part()
    ev, V = np.linalg.eigh(H)
    keep = np.abs(ev) > tol
    Q = V[:, keep]
    reduced = Q.conj().T @ H @ Q
    return NullQuotient(reduced, Q, V[:, ~keep], ev)


def extended_norm(basis, v, slot: FieldSlot, params: ModelParams, grid=None,
                  s_max: int = DEFAULT_S_MAX) -> dict:
    """<v', v'> for v' = sum_i v_i (slot w_i): left multiplication of a combination by one field."""
    ext = [(slot,) + tuple(w) for w in basis]
    g = gram(ext, params, grid, s_max, max_length=max(len(w) for w in ext))
    v = np.asarray(v)
    val = complex(v.conj() @ g.matrix @ v)
    err = float(np.abs(v).conj() @ g.errors @ np.abs(v))
    return {"value": val, "error": err, "gram_norm": g.norm}
