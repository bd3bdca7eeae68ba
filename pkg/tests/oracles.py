"""Brute-force reference implementations used to pin expected values.

Everything here is written independently of the library internals: different
algorithms, no shared helpers, numpy only for plain array arithmetic. Slow is
fine; these run on tiny inputs.
"""

import itertools
from functools import lru_cache

import numpy as np


# ---------------------------------------------------------------- counting

@lru_cache(maxsize=None)
def bell(n: int) -> int:
    if n == 0:
        return 1
    # B(n+1) = sum_k C(n,k) B(k)
    total = 0
    for k in range(n):
        total += _binom(n - 1, k) * bell(k)
    return total


def _binom(n: int, k: int) -> int:
    if k < 0 or k > n:
        return 0
    out = 1
    for i in range(k):
        out = out * (n - i) // (i + 1)
    return out


@lru_cache(maxsize=None)
def stirling2(n: int, k: int) -> int:
    if n == 0:
        return 1 if k == 0 else 0
    if k == 0:
        return 0
    return k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)


def labelled_partition_count(m: int, locations: int) -> int:
    return sum(stirling2(m, k) * locations**k for k in range(1, m + 1))


# ------------------------------------------------------- brute enumeration

def brute_partitions(sites):
    """All partitions as frozensets of frozensets, by first-element recursion."""
    sites = sorted(sites)
    if not sites:
        return [frozenset()]
    first, rest = sites[0], sites[1:]
    out = []
    for k in range(len(rest) + 1):
        for comb in itertools.combinations(rest, k):
            block = frozenset((first,) + comb)
            remaining = [s for s in rest if s not in comb]
            if remaining:
                for sub in brute_partitions(remaining):
                    out.append(sub | {block})
            else:
                out.append(frozenset({block}))
    return out


def brute_is_refinement(finer, coarser) -> bool:
    """Set-theoretic containment check on frozenset-of-frozenset partitions."""
    return all(any(b <= c for c in coarser) for b in finer)


def brute_meet(p, q):
    return frozenset(
        b & c for b in p for c in q if b & c
    )


# ------------------------------------------------ brute measure operations

def brute_index(letters, sizes):
    """Mixed-radix rank of a letter tuple, first position slowest."""
    idx = 0
    for a, s in zip(letters, sizes):
        idx = idx * s + a
    return idx


def brute_marginal(weights, support, sizes_by_site, keep):
    """Marginalise a dense vector over `support` onto `keep` by full enumeration."""
    keep = sorted(keep)
    ksizes = [sizes_by_site[s] for s in keep]
    out = np.zeros(int(np.prod(ksizes)) if keep else 1)
    ranges = [range(sizes_by_site[s]) for s in support]
    for letters in itertools.product(*ranges):
        by_site = dict(zip(support, letters))
        sub = tuple(by_site[s] for s in keep)
        out[brute_index(sub, ksizes)] += weights[
            brute_index(letters, [sizes_by_site[s] for s in support])
        ]
    return out


def brute_tensor(factors, sizes_by_site):
    """Product measure of (support, weights) factors, by full enumeration."""
    supports = [f[0] for f in factors]
    union = sorted(s for sup in supports for s in sup)
    usizes = [sizes_by_site[s] for s in union]
    out = np.zeros(int(np.prod(usizes)) if union else 1)
    ranges = [range(sizes_by_site[s]) for s in union]
    for letters in itertools.product(*ranges):
        by_site = dict(zip(union, letters))
        val = 1.0
        for sup, w in factors:
            sub = tuple(by_site[s] for s in sup)
            val *= w[brute_index(sub, [sizes_by_site[s] for s in sup])]
        out[brute_index(letters, usizes)] = val
    return out
