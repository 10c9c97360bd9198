import itertools
import json
import math

import pytest

from replica_lab.errors import CapacityError, InvalidGroupTableError
from replica_lab.rsb_groups import (
    BreakingChain,
    GroupTable,
    Permutation,
    block_group,
    block_permutation_not_in_group,
    cayley_embed,
    chain_report,
    chain_valid,
    cyclic_group,
    dihedral_group,
    enumerate_chains,
    enumerate_permutations,
    generated_subgroup,
    k_max,
    k_max_bruteforce,
    klein_four_group,
    no_finite_self_embedding,
    perm_count,
    permutations_to_json,
    prime_factor_count,
    quaternion_group,
    subgroup_chain_check,
    subgroup_orders,
    subgroups_of_symmetric,
    symmetric_group,
    witness_n_for_k,
)


def bijections_as_relations(size: int) -> int:
    """Count subsets of X x X that are functions X -> X and bijective."""
    pairs = list(itertools.product(range(size), repeat=2))
    count = 0
    for mask in range(1 << len(pairs)):
        rel = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        sources = [a for a, _ in rel]
        targets = [b for _, b in rel]
        if sorted(sources) == list(range(size)) and sorted(targets) == list(range(size)):
            count += 1
    return count


def test_perm_count_examples():
    assert [perm_count(n) for n in range(6)] == [1, 1, 2, 6, 24, 120]
    assert perm_count(0, convention="empty-zero") == 0
    assert perm_count(3, convention="empty-zero") == 6
    with pytest.raises(ValueError):
        perm_count(-1)
    with pytest.raises(ValueError):
        perm_count(2, convention="other")


def test_standard_convention_counts_bijections():
    for n in range(4):
        assert perm_count(n) == bijections_as_relations(n)


def test_enumeration_matches_count():
    for n in range(7):
        perms = enumerate_permutations(n)
        assert len(perms) == len(set(perms)) == perm_count(n)
    with pytest.raises(CapacityError):
        enumerate_permutations(9)


def test_permutation_composition_and_inverse():
    p = Permutation((1, 2, 0))
    q = Permutation((0, 2, 1))
    assert (p * q).mapping == tuple(p(q(i)) for i in range(3))
    assert (p * p.inverse()).is_identity()
    with pytest.raises(ValueError):
        Permutation((0, 0, 1))
    with pytest.raises(ValueError):
        p.compose(Permutation((0, 1)))


@pytest.mark.parametrize(
    "group",
    [cyclic_group(n) for n in range(2, 9)] + [klein_four_group(), symmetric_group(3), dihedral_group(4), quaternion_group()],
    ids=lambda g: g.name,
)
def test_cayley_embedding(group):
    group.validate()
    lam = cayley_embed(group)
    n = group.order
    assert len(set(lam)) == n
    for a, b in itertools.product(range(n), repeat=2):
        assert lam[group.mul(a, b)] == lam[a] * lam[b]
    # image is a subgroup of Perm(G) of the same order
    assert generated_subgroup(lam, n) == frozenset(lam)


def test_standard_group_orders():
    assert [g.order for g in (klein_four_group(), symmetric_group(3), dihedral_group(4), quaternion_group())] == [4, 6, 8, 8]
    # Q8 is non-abelian with a single element of order 2
    q8 = quaternion_group()
    assert sum(q8.mul(a, a) == q8.identity for a in range(8)) == 2
    assert any(q8.mul(a, b) != q8.mul(b, a) for a in range(8) for b in range(8))


def test_invalid_table_names_failing_elements():
    # subtraction mod 3 is not associative
    bad = GroupTable(tuple(tuple((a - b) % 3 for b in range(3)) for a in range(3)))
    with pytest.raises(InvalidGroupTableError) as info:
        bad.validate()
    assert info.value.witness is not None
    with pytest.raises(InvalidGroupTableError):
        cayley_embed(bad)
    with pytest.raises(InvalidGroupTableError) as info:
        GroupTable(((0, 1), (1, 2))).validate()
    assert info.value.witness == (1, 1, 2)


def test_associativity_failure_triple_is_genuine():
    # a Latin square with identity 0 and a * a = 0: a loop of order 5 that is not a group
    loop = GroupTable(((0, 1, 2, 3, 4), (1, 0, 3, 4, 2), (2, 4, 0, 1, 3), (3, 2, 4, 0, 1), (4, 3, 1, 2, 0)))
    with pytest.raises(InvalidGroupTableError, match="associativity") as info:
        loop.validate()
    a, b, c = info.value.witness
    assert loop.mul(loop.mul(a, b), c) != loop.mul(a, loop.mul(b, c))


def test_subgroups_of_small_symmetric_groups():
    assert subgroup_orders(2) == [1, 2]
    assert subgroup_orders(3) == [1, 2, 3, 6]
    assert subgroup_orders(4) == [1, 2, 3, 4, 6, 8, 12, 24]
    assert len(subgroups_of_symmetric(3)) == 6
    assert len(subgroups_of_symmetric(4)) == 30
    for n in range(1, 5):
        assert no_finite_self_embedding(n)
        for H in subgroups_of_symmetric(n):
            assert math.factorial(n) % len(H) == 0


@pytest.mark.parametrize("n", range(1, 9))
def test_block_group_order_matches_members(n):
    for m in range(1, n + 1):
        if n % m:
            continue
        g = block_group(n, m)
        members = set(g.elements())
        assert len(members) == g.order == math.factorial(m) ** (n // m)
        assert all(g.contains(p) for p in members)
        if n <= 6:
            filtered = [p for p in enumerate_permutations(n) if g.contains(p)]
            assert set(filtered) == members


@pytest.mark.parametrize("n, m", [(2, 1), (4, 2), (6, 2), (6, 3), (8, 4), (12, 3), (100, 10)])
def test_block_swap_is_not_a_member(n, m):
    g = block_group(n, m)
    swap = block_permutation_not_in_group(n, m)
    assert not g.contains(swap)
    if n <= 8:
        # swap . G is a coset disjoint from G
        assert not any(g.contains(swap * h) for h in g.elements())


def test_block_group_rejects_non_divisors():
    with pytest.raises(ValueError):
        block_group(6, 4)
    with pytest.raises(ValueError):
        block_permutation_not_in_group(4, 4)


def test_chain_validity_examples():
    assert chain_valid(BreakingChain(8, (4, 2, 1)))
    assert chain_valid(BreakingChain(12, ()))
    bad = chain_valid(BreakingChain(12, (6, 4)))
    assert not bad and bad.failed_step == 1
    bad = chain_valid(BreakingChain(8, (8,)))
    assert not bad and bad.failed_step == 0
    assert not chain_valid(BreakingChain(8, (2, 2)))


def test_subgroup_chain_inclusions_elementwise():
    assert subgroup_chain_check(BreakingChain(8, (4, 2, 1)))
    assert BreakingChain(8, (4, 2, 1)).orders() == [576, 16, 1]
    with pytest.raises(CapacityError):
        subgroup_chain_check(BreakingChain(12, (6,)))


@pytest.mark.parametrize("n", [1, 6, 12, 24, 30, 64])
def test_orders_strictly_decrease_along_chains(n):
    chains = enumerate_chains(n)
    assert BreakingChain(n, ()) in chains
    for chain in chains:
        assert chain_valid(chain)
        orders = [math.factorial(n)] + chain.orders()
        assert all(b < a for a, b in zip(orders, orders[1:]))


def omega_by_sieve(limit: int) -> list[int]:
    """Prime factors with multiplicity for 0..limit via a smallest-prime-factor sieve."""
    spf = list(range(limit + 1))
    for p in range(2, int(limit**0.5) + 1):
        if spf[p] == p:
            for q in range(p * p, limit + 1, p):
                if spf[q] == q:
                    spf[q] = p
    omega = [0] * (limit + 1)
    for n in range(2, limit + 1):
        omega[n] = omega[n // spf[n]] + 1
    return omega


def test_k_max_is_big_omega():
    omega = omega_by_sieve(10000)
    for n in range(2, 10001):
        assert k_max(n) == prime_factor_count(n) == omega[n]
    assert [k_max(n) for n in (1, 2, 8, 12, 360, 1024)] == [0, 1, 3, 3, 6, 10]
    with pytest.raises(ValueError):
        k_max(0)


def test_k_max_matches_bruteforce():
    for n in range(1, 361):
        assert k_max(n) == k_max_bruteforce(n)


def test_witness_chains():
    for k in range(21):
        n, chain = witness_n_for_k(k)
        assert n == 2 ** (k + 1)
        assert chain.length == k + 1 <= k_max(n)
        assert chain_valid(chain)


def test_chain_report_and_json():
    report = chain_report(8)
    assert report["k_max"] == 3
    assert [4, 2, 1] in report["chains"]
    assert json.loads(permutations_to_json([Permutation((1, 0))])) == [[1, 0]]
