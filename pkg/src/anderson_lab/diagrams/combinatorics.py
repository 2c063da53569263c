"""Connected-graph coefficients, the distinct-label moment identity, permutation degrees."""
from __future__ import annotations

import csv
import itertools
from collections import Counter
from functools import lru_cache
from pathlib import Path

import numpy as np

MAX_GRAPH_ORDER = 6


class CombinatoricsError(ValueError):
    pass


def _connected(n: int, edges) -> bool:
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        parent[find(a)] = find(b)
    return len({find(v) for v in range(n)}) == 1


@lru_cache(maxsize=None)
def connected_graph_coefficient(n: int) -> int:
    """``c(n) = sum over connected spanning subgraphs G of K_n of (-1)^{|E(G)|}``, by enumeration."""
    if n < 1:
        raise CombinatoricsError("n must be positive")
    if n > MAX_GRAPH_ORDER:
        raise CombinatoricsError(f"brute force is limited to n <= {MAX_GRAPH_ORDER}")
    pairs = list(itertools.combinations(range(n), 2))
    total = 0
    for mask in range(1 << len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        if _connected(n, edges):
            total += -1 if len(edges) % 2 else 1
    return total


def write_coefficient_csv(path, n_max: int = MAX_GRAPH_ORDER) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "c_n"])
        for n in range(1, n_max + 1):
            w.writerow([n, connected_graph_coefficient(n)])
    return path


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def moment_identity_sides(q, M: int, d: int = 3) -> tuple[complex, complex]:
    """Both sides of the distinct-site identity on ``Z_M^d``.

    ``q`` holds ``k`` integer momenta (units of ``1/M``). The left side sums
    ``prod_j exp(2 pi i q_j.g_j / M)`` over pairwise distinct sites; the right
    side sums over set partitions ``A`` of ``prod c(|A_v|) M^d [sum_{j in A_v} q_j = 0 mod M]``.
    """
    q = np.asarray(q, dtype=np.int64).reshape(-1, d) % M
    k = len(q)
    sites = np.array(list(itertools.product(range(M), repeat=d)), dtype=np.int64)
    # exponent table: phase index (q_j . g) mod M for every (j, site)
    expo = (q @ sites.T) % M
    root = np.exp(2j * np.pi * np.arange(M) / M)
    counts = np.zeros(M, dtype=np.int64)
    n = len(sites)
    for combo in itertools.permutations(range(n), k):
        counts[int(sum(expo[j, s] for j, s in enumerate(combo)) % M)] += 1
    lhs = complex(counts @ root)
    rhs = 0
    for part in set_partitions(range(k)):
        term = 1
        for block in part:
            zero = np.all(q[block].sum(axis=0) % M == 0)
            term *= connected_graph_coefficient(len(block)) * (M**d if zero else 0)
        rhs += term
    return lhs, complex(rhs)


def verify_moment_identity(k: int, q, M: int, d: int = 3, tol: float = 1e-9) -> bool:
    if k > 3:
        raise CombinatoricsError("the exhaustive check is limited to k <= 3")
    q = np.asarray(q, dtype=np.int64).reshape(-1, d)
    if len(q) != k:
        raise CombinatoricsError("need exactly k momenta")
    lhs, rhs = moment_identity_sides(q, M, d)
    return abs(lhs - rhs) <= tol * max(1.0, abs(rhs))


def permutation_degree(sigma) -> int:
    """``k - #{ladder indices}``; ``j`` is a ladder index when ``sigma(j) - 1`` equals the
    extended ``sigma(j - 1)`` or ``sigma(j + 1)``, with ``sigma(0) = 0`` and ``sigma(k + 1) = k + 1``.

    ``sigma`` lists the images of ``1..k``.
    """
    s = [int(x) for x in sigma]
    k = len(s)
    if sorted(s) != list(range(1, k + 1)):
        raise CombinatoricsError("sigma must be a permutation of 1..k")
    ext = [0] + s + [k + 1]
    ladder = sum(1 for j in range(1, k + 1) if ext[j] - 1 in (ext[j - 1], ext[j + 1]))
    return k - ladder


def degree_distribution(k: int) -> dict[int, int]:
    return dict(sorted(Counter(permutation_degree(p)
                               for p in itertools.permutations(range(1, k + 1))).items()))


def min_nontrivial_degree(k: int) -> int | None:
    ident = tuple(range(1, k + 1))
    degs = [permutation_degree(p) for p in itertools.permutations(ident) if p != ident]
    return min(degs) if degs else None


def degree_tail_sum(k: int, D: int, lam: float, gamma: float) -> float:
    """``sum_{sigma in S_k, deg >= D} lam^(gamma deg)``."""
    return float(sum(c * lam ** (gamma * deg) for deg, c in degree_distribution(k).items() if deg >= D))
