"""Non-crossing partition combinatorics.

Everything here is exact integer work: enumeration of the non-crossing
lattice NC(m), Kreweras complementation, the Möbius function via the
canonical interval factorization, joins with the uniform interval partition,
and the equal-block-size enumeration used by product cumulants.

Partitions are canonical tuples of blocks: each block is a strictly
increasing tuple of integers, blocks are ordered by their minima, and the
blocks cover 1..m exactly.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

from .errors import OrderViolationError, SizeLimitError

MAX_POINTS = 14

Blocks = tuple[tuple[int, ...], ...]


def catalan(n: int) -> int:
    """n-th Catalan number C_n = binom(2n, n)/(n+1)."""
    return math.comb(2 * n, n) // (n + 1)


def is_noncrossing(blocks: Iterable[Iterable[int]]) -> bool:
    """Stack test for the crossing pattern a < b < c < d, {a,c} vs {b,d}.

    Works on any disjoint blocks of integers; blocks need not be canonical.
    Linear in the number of points once the element->block map is built.
    """
    owner: dict[int, int] = {}
    lo: dict[int, int] = {}
    hi: dict[int, int] = {}
    for bid, blk in enumerate(blocks):
        elems = list(blk)
        for e in elems:
            owner[e] = bid
        lo[bid] = min(elems)
        hi[bid] = max(elems)
    stack: list[int] = []
    for e in sorted(owner):
        bid = owner[e]
        if e == lo[bid]:
            stack.append(bid)
        if stack[-1] != bid:
            return False
        if e == hi[bid]:
            stack.pop()
    return True


class NCPartition:
    """A partition of {1, ..., m} with non-crossing blocks.

    Instances are immutable and hashable; ``blocks`` is the canonical form
    (sorted within blocks, blocks sorted by minimum). The constructor
    validates covers/disjointness and the non-crossing property; internal
    code that generates partitions canonically uses the unchecked fast path.
    """

    __slots__ = ("m", "blocks")

    def __init__(self, m: int, blocks: Iterable[Iterable[int]], *, require_noncrossing: bool = True):
        canon = tuple(sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[0]))
        seen: list[int] = []
        for b in canon:
            if not b:
                raise ValueError("empty block")
            seen.extend(b)
        if sorted(seen) != list(range(1, m + 1)):
            raise ValueError(f"blocks do not partition 1..{m}: {canon}")
        if require_noncrossing and not is_noncrossing(canon):
            raise ValueError(f"crossing blocks: {canon}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "blocks", canon)

    def __setattr__(self, name, value):  # immutability
        raise AttributeError("NCPartition is immutable")

    @classmethod
    def _wrap(cls, m: int, blocks: Blocks) -> "NCPartition":
        """Trusted constructor: blocks must already be canonical."""
        self = object.__new__(cls)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "blocks", blocks)
        return self

    @classmethod
    def full(cls, m: int) -> "NCPartition":
        """The one-block partition 1_m."""
        return cls._wrap(m, (tuple(range(1, m + 1)),))

    @classmethod
    def singletons(cls, m: int) -> "NCPartition":
        """The all-singletons partition 0_m."""
        return cls._wrap(m, tuple((i,) for i in range(1, m + 1)))

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    def block_sizes(self) -> tuple[int, ...]:
        return tuple(sorted(len(b) for b in self.blocks))

    def owner_map(self) -> dict[int, int]:
        """Element -> index of its block in ``self.blocks``."""
        return {e: i for i, b in enumerate(self.blocks) for e in b}

    def refines(self, other: "NCPartition") -> bool:
        """True when every block of self sits inside a block of other."""
        if self.m != other.m:
            return False
        owner = other.owner_map()
        return all(len({owner[e] for e in b}) == 1 for b in self.blocks)

    def __le__(self, other: "NCPartition") -> bool:
        return self.refines(other)

    def __eq__(self, other) -> bool:
        return isinstance(other, NCPartition) and self.m == other.m and self.blocks == other.blocks

    def __hash__(self) -> int:
        return hash((self.m, self.blocks))

    def __repr__(self) -> str:
        body = ", ".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)
        return f"NCPartition({self.m}: {body})"


@dataclass(frozen=True)
class BlockProfile:
    """Multiset of block sizes: ``counts[j]`` blocks of size j >= 2 plus singletons."""

    m: int
    singletons: int
    counts: tuple[tuple[int, int], ...]  # (size, multiplicity), size >= 2, sorted

    @classmethod
    def from_partition(cls, p: NCPartition) -> "BlockProfile":
        c = Counter(len(b) for b in p.blocks)
        singles = c.pop(1, 0)
        return cls(p.m, singles, tuple(sorted(c.items())))

    @property
    def is_pairs_and_singletons(self) -> bool:
        return all(size == 2 for size, _ in self.counts)

    def total_points(self) -> int:
        return self.singletons + sum(size * mult for size, mult in self.counts)


def _check_points(m: int) -> None:
    if not 1 <= m <= MAX_POINTS:
        raise SizeLimitError(f"point count {m} outside 1..{MAX_POINTS}")


def iter_nc(m: int) -> Iterator[NCPartition]:
    """Generate NC(m) lazily, blocks in canonical order.

    Recursion on the block containing the smallest point: consecutive
    elements of that block cut the remaining points into independent gaps.
    """
    _check_points(m)
    for blocks in _iter_nc_interval(1, m):
        yield NCPartition._wrap(m, blocks)


def _iter_nc_interval(lo: int, hi: int) -> Iterator[Blocks]:
    if lo > hi:
        yield ()
        return

    def extend(last: int) -> Iterator[tuple[tuple[int, ...], Blocks]]:
        # Close the first block at `last`, or append some c > last to it.
        for rest in _iter_nc_interval(last + 1, hi):
            yield (), rest
        for c in range(last + 1, hi + 1):
            for gap in _iter_nc_interval(last + 1, c - 1):
                for tail, parts in extend(c):
                    yield (c, *tail), gap + parts

    for tail, parts in extend(lo):
        yield ((lo, *tail), *parts)


def enumerate_nc(m: int) -> list[NCPartition]:
    """All non-crossing partitions of {1..m}; |NC(m)| = Catalan(m)."""
    return list(iter_nc(m))


def kreweras(p: NCPartition) -> NCPartition:
    """Kreweras complement on NC(m).

    Identify p with the permutation sending each block element to the next
    larger one cyclically; the complement is the cycle partition of
    sigma_p^{-1} composed with the full cycle (1 2 ... m). Satisfies
    |p| + |Kr(p)| = m + 1 and Kr(Kr(p)) = p rotated by one.
    """
    m = p.m
    prv = [0] * (m + 1)  # prv[sigma(e)] = e
    for b in p.blocks:
        for i, e in enumerate(b):
            prv[b[(i + 1) % len(b)]] = e
    seen = [False] * (m + 1)
    blocks: list[tuple[int, ...]] = []
    for start in range(1, m + 1):
        if seen[start]:
            continue
        cyc = []
        x = start
        while not seen[x]:
            seen[x] = True
            cyc.append(x)
            x = prv[x % m + 1]
        blocks.append(tuple(sorted(cyc)))
    # starts are visited in increasing order, so blocks come out sorted by min
    return NCPartition._wrap(m, tuple(blocks))


def mobius_nc(s: NCPartition, p: NCPartition) -> int:
    """Möbius function mu(s, p) of the non-crossing lattice.

    Requires s <= p (refinement); raises OrderViolationError otherwise.
    Factorizes over the blocks of p: the interval [s, p] is a product of
    intervals [s|_V, 1_V], and each of those evaluates through the Kreweras
    complement of the restricted partition as a signed product of Catalan
    numbers.
    """
    if s.m != p.m:
        raise OrderViolationError(f"orders differ: {s.m} vs {p.m}")
    if not s.refines(p):
        raise OrderViolationError(f"{s!r} does not refine {p!r}")
    total = 1
    for V in p.blocks:
        rank = {e: i + 1 for i, e in enumerate(V)}
        members = set(V)
        sub = tuple(tuple(rank[e] for e in b) for b in s.blocks if b[0] in members)
        tau = NCPartition._wrap(len(V), sub)
        for W in kreweras(tau).blocks:
            j = len(W)
            total *= (-1) ** (j - 1) * catalan(j - 1)
    return total


def rho_partition(n: int, k: int) -> NCPartition:
    """The interval partition of {1..nk} into k consecutive blocks of size n."""
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    blocks = tuple(tuple(range(j * n + 1, (j + 1) * n + 1)) for j in range(k))
    return NCPartition._wrap(n * k, blocks)


def join_with_rho(p: NCPartition, n: int, k: int) -> NCPartition:
    """Join of p with rho_{n,k} in the full partition lattice of {1..nk}.

    Connected components of the overlap graph; the result may have crossing
    blocks, so the non-crossing validation is skipped.
    """
    m = n * k
    if p.m != m:
        raise OrderViolationError(f"partition of {p.m} points joined on {m}")
    parent = list(range(m + 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for blk in p.blocks:
        for e in blk[1:]:
            union(blk[0], e)
    for blk in rho_partition(n, k).blocks:
        for e in blk[1:]:
            union(blk[0], e)
    comps: dict[int, list[int]] = {}
    for e in range(1, m + 1):
        comps.setdefault(find(e), []).append(e)
    blocks = tuple(sorted((tuple(c) for c in comps.values()), key=lambda b: b[0]))
    return NCPartition(m, blocks, require_noncrossing=False)


def iter_k_equal(n: int, k: int) -> Iterator[NCPartition]:
    """Non-crossing partitions of {1..nk} with every block of size exactly k.

    Requires k >= 2 (for k = 1 the structure degenerates; product-cumulant
    callers handle that case directly) and nk <= 14. Gap lengths are pruned
    mod k while generating, so nothing off-profile is ever built.
    """
    if k < 2:
        raise ValueError("block size k must be >= 2; the k=1 case is degenerate")
    _check_points(n * k)
    for blocks in _iter_k_equal_interval(1, n * k, k):
        yield NCPartition._wrap(n * k, blocks)


def _iter_k_equal_interval(lo: int, hi: int, k: int) -> Iterator[Blocks]:
    if lo > hi:
        yield ()
        return
    if (hi - lo + 1) % k:
        return

    def extend(last: int, size: int) -> Iterator[tuple[tuple[int, ...], Blocks]]:
        if size == k:
            for rest in _iter_k_equal_interval(last + 1, hi, k):
                yield (), rest
            return
        for c in range(last + 1, hi + 1):
            if (c - last - 1) % k:
                continue
            for gap in _iter_k_equal_interval(last + 1, c - 1, k):
                for tail, parts in extend(c, size + 1):
                    yield (c, *tail), gap + parts

    for tail, parts in extend(lo, 1):
        yield ((lo, *tail), *parts)


def enumerate_k_equal(n: int, k: int) -> list[NCPartition]:
    """All k-equal partitions of {1..nk}; the count is the Fuss–Catalan number."""
    return list(iter_k_equal(n, k))


def is_letter_pure(p: NCPartition, modulus: int) -> bool:
    """True when every block lives on one residue class mod ``modulus``.

    Position j of a repeated word of length ``modulus`` carries letter
    ((j-1) mod modulus) + 1; letter-pure partitions only tie equal letters.
    """
    return all(len({(e - 1) % modulus for e in b}) == 1 for b in p.blocks)


def is_k_completing(p: NCPartition, n: int, k: int) -> bool:
    """Complement-side characterisation of the k-equal family on nk points.

    A partition is k-completing when its blocks respect residue classes
    mod k (equal letters of the n-fold repetition of a k-letter word) and
    its join with the n consecutive intervals of length k is the full
    partition. Kreweras complements of k-equal partitions (n blocks of size
    exactly k) land exactly in this family; note the letter modulus is k,
    not n — enumerating small cases settles that, e.g. at (n,k)=(3,2) the
    complement block {2,4,6} spans all residues mod 3 but one class mod 2.
    """
    if p.m != n * k:
        raise OrderViolationError(f"partition of {p.m} points, expected {n * k}")
    if not is_letter_pure(p, k):
        return False
    return join_with_rho(p, k, n).num_blocks == 1


def count_nc_nk21(n: int, k: int) -> int:
    """Closed-form count k*(kn-n)! / ((kn-2n+2)! (n-1)!) as an exact integer.

    Counts the k-equal partitions of {1..nk} (n blocks, each of size exactly
    k) whose Kreweras complement contains only pairs and singletons — the
    configurations that drive the k-th cumulant of an n-fold free product.
    Such complements automatically carry exactly n-1 pairs. k = 1 is
    rejected: the pair/singleton classification is vacuous there and the
    closed form would need a negative factorial.
    """
    if k < 2:
        raise ValueError("count_nc_nk21 requires k >= 2 (k = 1 is degenerate)")
    if n < 1:
        raise ValueError("n must be positive")
    if n == 1:
        # (k-1)!/k! * k = 1: only 1_k itself, complement all singletons.
        return 1
    return k * math.factorial(k * n - n) // (math.factorial(k * n - 2 * n + 2) * math.factorial(n - 1))
