"""Non-crossing partition layer, checked against independent brute-force oracles.

The oracles here deliberately avoid the production algorithms:
enumeration goes through restricted-growth strings + a pairwise crossing
test, the Möbius function through the defining lattice recursion, and the
Kreweras complement through interleaved-maximality.
"""

import functools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freemult.errors import OrderViolationError, SizeLimitError
from freemult.ncpart import (
    BlockProfile,
    NCPartition,
    catalan,
    count_nc_nk21,
    enumerate_k_equal,
    enumerate_nc,
    is_k_completing,
    is_letter_pure,
    is_noncrossing,
    iter_k_equal,
    iter_nc,
    join_with_rho,
    kreweras,
    mobius_nc,
    rho_partition,
)

# ---------------------------------------------------------------- oracles


def all_set_partitions(m):
    """Every set partition of {1..m}, via restricted growth strings."""

    def rec(i, blocks):
        if i > m:
            yield tuple(tuple(b) for b in blocks)
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([i])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(1, [])


def crossing_pairwise(blocks):
    """Quadratic a<b<c<d crossing test, independent of the stack test."""
    for i, A in enumerate(blocks):
        for B in blocks[i + 1 :]:
            for a in A:
                for c in A:
                    if a >= c:
                        continue
                    for b in B:
                        for d in B:
                            if b >= d:
                                continue
                            if a < b < c < d or b < a < d < c:
                                return True
    return False


def nc_by_filter(m):
    return sorted(
        tuple(sorted(blocks, key=min))
        for blocks in all_set_partitions(m)
        if not crossing_pairwise(blocks)
    )


@functools.lru_cache(maxsize=None)
def mobius_by_recursion(m):
    """mu(s,p) from the defining relation sum_{s<=t<=p} mu(t,p) = [s=p]."""
    parts = enumerate_nc(m)

    @functools.lru_cache(maxsize=None)
    def mu(s, p):
        if s == p:
            return 1
        return -sum(mu(t, p) for t in parts if s.refines(t) and t.refines(p) and t != s)

    return mu


def kreweras_by_maximality(p):
    """Largest sigma with the interleaving (p on odd slots, sigma on even) non-crossing."""
    m = p.m
    odd = {e: 2 * e - 1 for e in range(1, m + 1)}
    even = {e: 2 * e for e in range(1, m + 1)}
    base = [tuple(odd[e] for e in b) for b in p.blocks]

    def compatible(sigma):
        return is_noncrossing(base + [tuple(even[e] for e in b) for b in sigma.blocks])

    candidates = [s for s in enumerate_nc(m) if compatible(s)]
    best = max(candidates, key=lambda s: [s.refines(t) for t in candidates].count(True) * 0 + sum(1 for t in candidates if t.refines(s)))
    # sanity: best really dominates every compatible partition
    assert all(t.refines(best) for t in candidates)
    return best


# ------------------------------------------------------------ enumeration


@pytest.mark.parametrize("m", range(1, 9))
def test_enumeration_matches_set_partition_filter(m):
    got = sorted(p.blocks for p in iter_nc(m))
    assert got == nc_by_filter(m)


def test_catalan_counts_up_to_10():
    for m in range(1, 11):
        assert sum(1 for _ in iter_nc(m)) == catalan(m)


def test_enumeration_size_cap():
    with pytest.raises(SizeLimitError):
        enumerate_nc(15)
    with pytest.raises(SizeLimitError):
        enumerate_nc(0)


def test_canonical_block_order():
    for p in iter_nc(7):
        mins = [b[0] for b in p.blocks]
        assert mins == sorted(mins)
        for b in p.blocks:
            assert list(b) == sorted(b)


def test_partition_validation():
    with pytest.raises(ValueError):
        NCPartition(4, [(1, 3), (2, 4)])  # crossing
    with pytest.raises(ValueError):
        NCPartition(3, [(1, 2)])  # not covering
    with pytest.raises(ValueError):
        NCPartition(3, [(1, 2), (2, 3)])  # overlapping
    # the escape hatch used by join_with_rho
    q = NCPartition(4, [(1, 3), (2, 4)], require_noncrossing=False)
    assert q.num_blocks == 2


def test_partitions_are_immutable_and_hashable():
    p = NCPartition.full(3)
    with pytest.raises(AttributeError):
        p.m = 5
    assert len({p, NCPartition.full(3), NCPartition.singletons(3)}) == 2


# --------------------------------------------------------------- kreweras


def test_kreweras_examples():
    p = NCPartition(4, [(1, 2), (3, 4)])
    assert kreweras(p) == NCPartition(4, [(1,), (2, 4), (3,)])
    assert kreweras(NCPartition.full(5)) == NCPartition.singletons(5)
    assert kreweras(NCPartition.singletons(5)) == NCPartition.full(5)


@pytest.mark.parametrize("m", range(1, 7))
def test_kreweras_matches_maximality_oracle(m):
    for p in iter_nc(m):
        assert kreweras(p) == kreweras_by_maximality(p)


def test_kreweras_block_count_identity():
    for m in range(1, 9):
        for p in iter_nc(m):
            assert p.num_blocks + kreweras(p).num_blocks == m + 1


def test_double_kreweras_is_downward_rotation():
    # sigma_{Kr Kr p} = gamma^{-1} sigma_p gamma, i.e. relabel e -> e-1 mod m
    for m in range(1, 9):
        for p in iter_nc(m):
            rotated = NCPartition(
                m, [tuple((e - 2) % m + 1 for e in b) for b in p.blocks]
            )
            assert kreweras(kreweras(p)) == rotated


nc_partitions = st.integers(1, 8).flatmap(
    lambda m: st.sampled_from(enumerate_nc(m))
)


@given(nc_partitions)
def test_kreweras_preserves_ground_set(p):
    kr = kreweras(p)
    assert kr.m == p.m
    assert sorted(e for b in kr.blocks for e in b) == list(range(1, p.m + 1))


# ----------------------------------------------------------------- mobius


@pytest.mark.parametrize("m", range(1, 7))
def test_mobius_matches_lattice_recursion(m):
    mu = mobius_by_recursion(m)
    parts = enumerate_nc(m)
    for p in parts:
        for s in parts:
            if s.refines(p):
                assert mobius_nc(s, p) == mu(s, p)


def test_mobius_full_interval_is_signed_catalan():
    for m in range(1, 9):
        assert mobius_nc(NCPartition.singletons(m), NCPartition.full(m)) == (-1) ** (
            m - 1
        ) * catalan(m - 1)


@pytest.mark.parametrize("m", range(1, 7))
def test_mobius_sums_to_zero(m):
    parts = enumerate_nc(m)
    for p in parts:
        for s in parts:
            if not s.refines(p):
                continue
            total = sum(
                mobius_nc(t, p) for t in parts if s.refines(t) and t.refines(p)
            )
            assert total == (1 if s == p else 0)


def test_mobius_rejects_incomparable():
    a = NCPartition(4, [(1, 2), (3, 4)])
    b = NCPartition(4, [(1, 4), (2, 3)])
    with pytest.raises(OrderViolationError):
        mobius_nc(a, b)
    with pytest.raises(OrderViolationError):
        mobius_nc(NCPartition.full(3), NCPartition.full(4))


@given(nc_partitions)
def test_mobius_multiplicativity_over_blocks(p):
    # mu(0, p) must factor into the per-block full-interval values
    expected = 1
    for b in p.blocks:
        expected *= (-1) ** (len(b) - 1) * catalan(len(b) - 1)
    assert mobius_nc(NCPartition.singletons(p.m), p) == expected


# ------------------------------------------------------------------- join


def test_join_with_rho_examples():
    # bridging one element of each interval connects everything
    p = NCPartition(4, [(1, 3), (2,), (4,)])
    assert join_with_rho(p, 2, 2) == NCPartition.full(4)
    # singletons join to rho itself
    assert join_with_rho(NCPartition.singletons(6), 3, 2) == rho_partition(3, 2)
    assert join_with_rho(NCPartition.singletons(6), 2, 3) == rho_partition(2, 3)


def test_join_with_rho_is_upper_bound():
    for p in iter_nc(6):
        j = join_with_rho(p, 2, 3)
        assert p.refines(j)
        assert rho_partition(2, 3).refines(j)


def test_join_with_rho_order_mismatch():
    with pytest.raises(OrderViolationError):
        join_with_rho(NCPartition.full(4), 2, 3)


# ---------------------------------------------------------------- k-equal


def test_k_equal_trivial_n1():
    for k in range(2, 8):
        assert enumerate_k_equal(1, k) == [NCPartition.full(k)]


def test_k_equal_n2_k2():
    got = {p.blocks for p in iter_k_equal(2, 2)}
    assert got == {((1, 2), (3, 4)), ((1, 4), (2, 3))}


@pytest.mark.parametrize(
    "n,k",
    [(n, k) for n in range(1, 7) for k in range(2, 13) if n * k <= 12],
)
def test_k_equal_matches_brute_filter(n, k):
    got = sorted(p.blocks for p in iter_k_equal(n, k))
    want = sorted(
        p.blocks for p in iter_nc(n * k) if set(p.block_sizes()) == {k}
    )
    assert got == want


def test_k_equal_rejects_k1():
    with pytest.raises(ValueError):
        enumerate_k_equal(3, 1)


def test_k_equal_complement_is_k_completing():
    for n, k in [(1, 4), (2, 2), (2, 3), (3, 2), (2, 4), (4, 2), (3, 3)]:
        for p in iter_k_equal(n, k):
            assert is_k_completing(kreweras(p), n, k)


def test_k_completing_family_is_exactly_the_complement_image():
    # Kreweras is a bijection, so the two families must have equal size and
    # the complement image must exhaust the k-completing set.
    for n, k in [(2, 2), (3, 2), (2, 3), (4, 2), (2, 4), (3, 3)]:
        image = {kreweras(p) for p in iter_k_equal(n, k)}
        family = {p for p in iter_nc(n * k) if is_k_completing(p, n, k)}
        assert image == family


def test_letter_purity_modulus_is_k_not_n():
    # At (n,k)=(3,2) every complement respects residues mod k=2 while the
    # complement of {12}{34}{56} has the block {2,4,6}, which spans all
    # three residues mod n=3.
    complements = [kreweras(p) for p in iter_k_equal(3, 2)]
    assert all(is_letter_pure(q, 2) for q in complements)
    assert not all(is_letter_pure(q, 3) for q in complements)
    spread = kreweras(NCPartition(6, [(1, 2), (3, 4), (5, 6)]))
    assert (2, 4, 6) in spread.blocks


# ------------------------------------------------------------------ count


def test_count_examples():
    assert count_nc_nk21(2, 2) == 2
    assert count_nc_nk21(3, 2) == 3
    assert count_nc_nk21(3, 4) == 18
    assert count_nc_nk21(4, 3) == 28
    for k in range(2, 13):
        assert count_nc_nk21(1, k) == 1


@pytest.mark.parametrize(
    "n,k",
    [(n, k) for n in range(1, 7) for k in range(2, 13) if n * k <= 12],
)
def test_count_matches_brute_force(n, k):
    got = sum(
        1
        for p in iter_k_equal(n, k)
        if BlockProfile.from_partition(kreweras(p)).is_pairs_and_singletons
    )
    assert got == count_nc_nk21(n, k)


def test_count_rejects_degenerate_orders():
    with pytest.raises(ValueError):
        count_nc_nk21(3, 1)
    with pytest.raises(ValueError):
        count_nc_nk21(0, 2)


def test_count_big_integer_exactness():
    # way past float precision; value must be an exact integer
    v = count_nc_nk21(40, 9)
    assert isinstance(v, int)
    assert v == 9 * math.factorial(320) // (math.factorial(282) * math.factorial(39))


def test_pairs_and_singletons_complements_have_n_minus_1_pairs():
    for n, k in [(2, 2), (3, 2), (2, 3), (4, 2), (3, 3), (2, 4)]:
        for p in iter_k_equal(n, k):
            prof = BlockProfile.from_partition(kreweras(p))
            if prof.is_pairs_and_singletons:
                pairs = sum(mult for size, mult in prof.counts if size == 2)
                assert pairs == n - 1
                assert prof.total_points() == n * k


# ---------------------------------------------------------------- profile


def test_block_profile_roundtrip():
    p = NCPartition(6, [(1, 6), (2, 3), (4,), (5,)])
    prof = BlockProfile.from_partition(p)
    assert prof.singletons == 2
    assert prof.counts == ((2, 2),)
    assert prof.is_pairs_and_singletons
    assert prof.total_points() == 6


@given(nc_partitions)
def test_block_profile_counts_points(p):
    assert BlockProfile.from_partition(p).total_points() == p.m
