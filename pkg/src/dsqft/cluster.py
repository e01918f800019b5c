"""Set partitions and the moment/cumulant (cluster) expansion.

Full vacuum expectation values are sums over partitions of {1..n} of
products of truncated functions on the blocks, each block keeping the
original operator order.  Tables are dicts keyed by tuples of labels in
operator order; values may be any ring elements (floats, complex numbers,
Fractions, symbolic expressions).
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Iterator, Mapping, Sequence

from .errors import MissingEntry


def set_partitions(items: Sequence) -> Iterator[list]:
    """All partitions of ``items`` into nonempty blocks; blocks keep the input order."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        # first joins an existing block (at the front, preserving order) or starts its own
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


@lru_cache(maxsize=None)
def bell_number(n: int) -> int:
    """B_n via the Bell triangle."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def partition_count(n: int) -> int:
    return sum(1 for _ in set_partitions(range(n)))


def _lookup(table: Mapping, key: tuple, zero_singletons: bool):
    if key in table:
        return table[key]
    if zero_singletons and len(key) == 1:
        return 0
    raise MissingEntry(key)


def cluster_expand(truncated: Mapping, labels: Sequence, zero_singletons: bool = True):
    """Full expectation value of the ordered product ``labels`` from truncated values.

    Missing one-point entries count as zero (vanishing one-point functions);
    any other missing block raises MissingEntry.
    """
    total = 0
    for part in set_partitions(list(labels)):
        prod = 1
        # short blocks first: a vanishing singleton settles the product before longer lookups
        for block in sorted(part, key=len):
            v = _lookup(truncated, tuple(block), zero_singletons)
            if v == 0:
                prod = 0
                break
            prod = prod * v
        total = total + prod
    return total


def cumulants_from_moments(moments: Mapping, labels: Sequence) -> dict:
    """Invert the cluster expansion on every ordered subsequence of ``labels``.

    kappa(S) = sum_pi (-1)^{|pi|-1} (|pi|-1)! prod_{B in pi} m(B)
    """
    labels = list(labels)
    n = len(labels)
    out = {}
    for mask in range(1, 1 << n):
        sub = tuple(labels[i] for i in range(n) if mask >> i & 1)
        total = 0
        for part in set_partitions(sub):
            k = len(part)
            prod = (-1) ** (k - 1) * math.factorial(k - 1)
            for block in part:
                key = tuple(block)
                if key not in moments:
                    raise MissingEntry(key)
                prod = prod * moments[key]
            total = total + prod
        out[sub] = total
    return out


def moments_from_cumulants(cumulants: Mapping, labels: Sequence) -> dict:
    """Full moments for every ordered subsequence (singletons taken from the table)."""
    labels = list(labels)
    n = len(labels)
    out = {}
    for mask in range(1, 1 << n):
        sub = tuple(labels[i] for i in range(n) if mask >> i & 1)
        out[sub] = cluster_expand(cumulants, sub, zero_singletons=False)
    return out


class TruncatedCache:
    """Memoised truncated values for sub-words of a word, computed on demand."""

    def __init__(self, compute: Callable[[tuple], object]):
        self._compute = compute
        self._table: dict = {}

    def __getitem__(self, key: tuple):
        if key not in self._table:
            self._table[key] = self._compute(key)
        return self._table[key]

    def __contains__(self, key) -> bool:
        return True

    def full(self, labels: Sequence):
        """Cluster expansion with blocks evaluated lazily; singletons vanish."""
        total = 0
        for part in set_partitions(list(labels)):
            if any(len(b) == 1 for b in part):
                continue
            prod = 1
            for block in part:
                v = self[tuple(block)]
                prod = prod * v
                if v == 0:
                    break
            total = total + prod
        return total


def commutator_partition_classes(truncated: Mapping, labels: Sequence, k: int) -> dict:
    """Split <... [A_k, A_{k+1}] ...> by partition class.

    Returns the summed differences  prod T(I) - prod T(I')  (I' exchanges the
    operators at positions k and k+1, 0-based) for the three classes:
    1 -- k and k+1 in different blocks,
    2 -- same block with at least three elements,
    3 -- the block {k, k+1} alone.
    Missing singletons count as zero.
    """
    labels = list(labels)
    swapped = labels[:]
    swapped[k], swapped[k + 1] = swapped[k + 1], swapped[k]
    sums = {1: 0, 2: 0, 3: 0}
    for part in set_partitions(list(range(len(labels)))):
        blk = {i: j for j, b in enumerate(part) for i in b}
        if blk[k] != blk[k + 1]:
            cls = 1
        elif len(part[blk[k]]) >= 3:
            cls = 2
        else:
            cls = 3
        p1 = 1
        p2 = 1
        for b in part:
            p1 = p1 * _lookup(truncated, tuple(labels[i] for i in b), True)
            p2 = p2 * _lookup(truncated, tuple(swapped[i] for i in b), True)
        sums[cls] = sums[cls] + (p1 - p2)
    return sums
