"""Finite permutation groups, the Cayley embedding and block symmetry breaking.

A breaking step partitions n replicas into contiguous blocks of size m and keeps
only the permutations that preserve every block, the group (S_m)^(n/m).
Consecutive steps refine the blocks along a divisor chain of n.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

from .errors import CapacityError, InvalidGroupTableError

MAX_ENUMERATED_SET = 8


@dataclass(frozen=True)
class Permutation:
    """Bijection of {0, ..., size-1}; ``mapping[i]`` is the image of i."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        mapping = tuple(int(x) for x in self.mapping)
        if sorted(mapping) != list(range(len(mapping))):
            raise ValueError(f"{mapping} is not a bijection")
        object.__setattr__(self, "mapping", mapping)

    @classmethod
    def identity(cls, size: int) -> Permutation:
        return cls(tuple(range(size)))

    @property
    def size(self) -> int:
        return len(self.mapping)

    def __call__(self, x: int) -> int:
        return self.mapping[x]

    def compose(self, other: Permutation) -> Permutation:
        """``self o other``: apply ``other`` first."""
        if other.size != self.size:
            raise ValueError("permutations act on sets of different size")
        return Permutation(tuple(self.mapping[i] for i in other.mapping))

    __mul__ = compose

    def inverse(self) -> Permutation:
        inv = [0] * self.size
        for i, j in enumerate(self.mapping):
            inv[j] = i
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.mapping))

    def to_list(self) -> list[int]:
        return list(self.mapping)


@dataclass(frozen=True)
class GroupTable:
    """Finite group given by its composition table: ``table[a][b]`` is the index of a*b."""

    table: tuple[tuple[int, ...], ...]
    identity: int = 0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "table", tuple(tuple(int(x) for x in row) for row in self.table))

    @property
    def order(self) -> int:
        return len(self.table)

    def mul(self, a: int, b: int) -> int:
        return self.table[a][b]

    def validate(self) -> None:
        """Raise :class:`InvalidGroupTableError` naming the first failing element(s)."""
        n = self.order
        if n == 0:
            raise InvalidGroupTableError("a group has at least one element")
        for a, row in enumerate(self.table):
            if len(row) != n:
                raise InvalidGroupTableError(f"row {a} has length {len(row)}, expected {n}", (a,))
            for b, c in enumerate(row):
                if not 0 <= c < n:
                    raise InvalidGroupTableError(f"closure fails: {a}*{b} = {c}", (a, b, c))
        e = self.identity
        for a in range(n):
            if self.mul(e, a) != a or self.mul(a, e) != a:
                raise InvalidGroupTableError(f"{e} is not an identity for {a}", (e, a))
            if not any(self.mul(a, b) == e for b in range(n)):
                raise InvalidGroupTableError(f"{a} has no inverse", (a,))
        for a, b, c in itertools.product(range(n), repeat=3):
            if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)):
                raise InvalidGroupTableError(f"associativity fails for ({a}, {b}, {c})", (a, b, c))


# --- standard tables -----------------------------------------------------------


def group_from_permutations(perms, name: str = "") -> GroupTable:
    perms = list(perms)
    index = {p: i for i, p in enumerate(perms)}
    ident = Permutation.identity(perms[0].size)
    try:
        table = [[index[a.compose(b)] for b in perms] for a in perms]
    except KeyError as exc:
        raise InvalidGroupTableError("permutations are not closed under composition") from exc
    return GroupTable(tuple(map(tuple, table)), identity=index[ident], name=name)


def cyclic_group(n: int) -> GroupTable:
    return GroupTable(tuple(tuple((a + b) % n for b in range(n)) for a in range(n)), 0, f"C{n}")


def klein_four_group() -> GroupTable:
    return GroupTable(tuple(tuple(a ^ b for b in range(4)) for a in range(4)), 0, "V4")


def symmetric_group(n: int) -> GroupTable:
    return group_from_permutations(enumerate_permutations(n), f"S{n}")


def dihedral_group(n: int) -> GroupTable:
    """Symmetries of the regular n-gon (order 2n): rotations r^i then reflections s r^i."""
    rot = Permutation(tuple((i + 1) % n for i in range(n)))
    ref = Permutation(tuple((-i) % n for i in range(n)))
    elems = [Permutation.identity(n)]
    for _ in range(n - 1):
        elems.append(rot.compose(elems[-1]))
    elems += [ref.compose(e) for e in elems[:n]]
    return group_from_permutations(elems, f"D{n}")


def quaternion_group() -> GroupTable:
    # basis 1, i, j, k with signs; element index = 2 * basis + (sign < 0)
    basis_mul = {
        (0, 0): (1, 0), (0, 1): (1, 1), (0, 2): (1, 2), (0, 3): (1, 3),
        (1, 0): (1, 1), (1, 1): (-1, 0), (1, 2): (1, 3), (1, 3): (-1, 2),
        (2, 0): (1, 2), (2, 1): (-1, 3), (2, 2): (-1, 0), (2, 3): (1, 1),
        (3, 0): (1, 3), (3, 1): (1, 2), (3, 2): (-1, 1), (3, 3): (-1, 0),
    }
    table = []
    for a in range(8):
        row = []
        for b in range(8):
            sign, basis = basis_mul[a // 2, b // 2]
            if (a % 2) ^ (b % 2):
                sign = -sign
            row.append(2 * basis + (sign < 0))
        table.append(tuple(row))
    return GroupTable(tuple(table), 0, "Q8")


# --- permutation groups ----------------------------------------------------------


def perm_count(set_size: int, convention: str = "standard") -> int:
    """|Perm(X)| for |X| = set_size.

    ``standard``: n!, so the empty set has exactly one bijection (the empty map).
    ``empty-zero``: n! for n >= 1 but 0 for the empty set (no bijection of the
    empty set is counted).
    """
    if set_size < 0:
        raise ValueError("set size must be >= 0")
    if convention == "standard":
        return math.factorial(set_size)
    if convention == "empty-zero":
        return math.factorial(set_size) if set_size >= 1 else 0
    raise ValueError(f"unknown convention {convention!r}")


def enumerate_permutations(set_size: int) -> list[Permutation]:
    """All permutations of {0..set_size-1} in lexicographic order."""
    if set_size > MAX_ENUMERATED_SET:
        raise CapacityError(f"enumeration limited to sets of size <= {MAX_ENUMERATED_SET}")
    if set_size < 0:
        raise ValueError("set size must be >= 0")
    return [Permutation(p) for p in itertools.permutations(range(set_size))]


def generated_subgroup(generators, size: int) -> frozenset[Permutation]:
    group = {Permutation.identity(size)}
    frontier = list(group)
    gens = list(generators)
    while frontier:
        nxt = []
        for g in frontier:
            for h in gens:
                prod = g.compose(h)
                if prod not in group:
                    group.add(prod)
                    nxt.append(prod)
        frontier = nxt
    return frozenset(group)


def cayley_embed(g: GroupTable) -> list[Permutation]:
    """Left translations x -> a*x, one permutation of the element indices per element a.

    Verifies that a -> lambda_a is an injective homomorphism whose image is
    closed under composition.
    """
    if g.order > 12:
        raise CapacityError("Cayley verification is exhaustive and limited to order <= 12")
    g.validate()
    n = g.order
    lam = [Permutation(tuple(g.mul(a, x) for x in range(n))) for a in range(n)]
    for a in range(n):
        for b in range(n):
            if lam[g.mul(a, b)] != lam[a].compose(lam[b]):
                raise InvalidGroupTableError(f"lambda_(a*b) != lambda_a o lambda_b for ({a}, {b})", (a, b))
    image = set(lam)
    if len(image) != n:
        raise InvalidGroupTableError("left translation map is not injective")
    if any(p.compose(q) not in image for p in lam for q in lam):
        raise InvalidGroupTableError("image is not closed under composition")
    return lam


def subgroups_of_symmetric(n: int) -> set[frozenset[Permutation]]:
    """Every subgroup of S_n, found by adjoining one element at a time from the trivial group."""
    if n > 4:
        raise CapacityError("subgroup enumeration is limited to n <= 4")
    elements = enumerate_permutations(n)
    trivial = frozenset([Permutation.identity(n)])
    found = {trivial}
    frontier = [trivial]
    while frontier:
        nxt = []
        for H in frontier:
            for g in elements:
                if g in H:
                    continue
                K = generated_subgroup(list(H) + [g], n)
                if K not in found:
                    found.add(K)
                    nxt.append(K)
        frontier = nxt
    return found


def no_finite_self_embedding(n: int) -> bool:
    """True iff no proper subgroup of S_n has order n! (so none is isomorphic to S_n)."""
    full = math.factorial(n)
    whole = frozenset(enumerate_permutations(n))
    return all(len(H) < full for H in subgroups_of_symmetric(n) if H != whole)


def subgroup_orders(n: int) -> list[int]:
    return sorted({len(H) for H in subgroups_of_symmetric(n)})


# --- block groups ------------------------------------------------------------------


@dataclass(frozen=True)
class BlockGroupDescriptor:
    """(S_m)^(n/m): permutations of n points preserving each contiguous block of size m."""

    n: int
    m: int

    def __post_init__(self):
        if not 1 <= self.m <= self.n or self.n % self.m:
            raise ValueError(f"block size m={self.m} must divide n={self.n}")

    @property
    def blocks(self) -> int:
        return self.n // self.m

    @property
    def order(self) -> int:
        return math.factorial(self.m) ** self.blocks

    def contains(self, perm: Permutation) -> bool:
        if perm.size != self.n:
            return False
        return all(perm(i) // self.m == i // self.m for i in range(self.n))

    def elements(self):
        """Generate every member (only for n <= 8)."""
        if self.n > MAX_ENUMERATED_SET:
            raise CapacityError(f"explicit generation limited to n <= {MAX_ENUMERATED_SET}")
        m = self.m
        local = list(itertools.permutations(range(m)))
        for choice in itertools.product(local, repeat=self.blocks):
            yield Permutation(tuple(b * m + choice[b][i] for b in range(self.blocks) for i in range(m)))

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "order": str(self.order)}


def block_group(n: int, m: int) -> BlockGroupDescriptor:
    return BlockGroupDescriptor(n, m)


def block_permutation_not_in_group(n: int, m: int) -> Permutation:
    """Swap block 0 with block 1 wholesale: a permutation of S_n outside (S_m)^(n/m)."""
    group = block_group(n, m)
    if m == n:
        raise ValueError("m = n leaves a single block; there is nothing to swap")
    mapping = list(range(n))
    for i in range(m):
        mapping[i], mapping[m + i] = m + i, i
    perm = Permutation(tuple(mapping))
    assert not group.contains(perm)
    return perm


# --- breaking chains --------------------------------------------------------------


@dataclass(frozen=True)
class BreakingChain:
    """n with block sizes m_1 > m_2 > ... > m_L, m_1 | n, m_1 < n, m_(i+1) | m_i."""

    n: int
    blocks: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(int(b) for b in self.blocks))

    @property
    def length(self) -> int:
        return len(self.blocks)

    def orders(self) -> list[int]:
        return [block_group(self.n, m).order for m in self.blocks]

    def to_dict(self) -> dict:
        return {"n": self.n, "blocks": list(self.blocks), "orders": [str(o) for o in self.orders()]}


@dataclass(frozen=True)
class ChainCheck:
    ok: bool
    failed_step: int | None = None
    reason: str = ""

    def __bool__(self):
        return self.ok


def chain_valid(chain: BreakingChain) -> ChainCheck:
    """Step i (0-based) compares blocks[i] with its predecessor (n for i = 0)."""
    if chain.n < 1:
        return ChainCheck(False, 0, "n must be >= 1")
    prev = chain.n
    for i, m in enumerate(chain.blocks):
        if m < 1:
            return ChainCheck(False, i, f"block size {m} < 1")
        if prev % m:
            return ChainCheck(False, i, f"{m} does not divide {prev}")
        if m >= prev:
            return ChainCheck(False, i, f"{m} is not strictly below {prev}")
        prev = m
    return ChainCheck(True)


def subgroup_chain_check(chain: BreakingChain) -> ChainCheck:
    """Validity plus explicit G_(n;m_(i+1)) subset of G_(n;m_i) by membership of every element (n <= 8)."""
    check = chain_valid(chain)
    if not check:
        return check
    if chain.n > MAX_ENUMERATED_SET:
        raise CapacityError(f"element-wise inclusion check limited to n <= {MAX_ENUMERATED_SET}")
    groups = [block_group(chain.n, chain.n)] + [block_group(chain.n, m) for m in chain.blocks]
    for i in range(1, len(groups)):
        outer, inner = groups[i - 1], groups[i]
        count = 0
        for g in inner.elements():
            count += 1
            if not outer.contains(g):
                return ChainCheck(False, i - 1, f"{g.mapping} of G(n;{inner.m}) is outside G(n;{outer.m})")
        if count != inner.order or inner.order >= outer.order:
            return ChainCheck(False, i - 1, "group orders do not strictly decrease")
    return ChainCheck(True)


def proper_divisors(n: int) -> list[int]:
    return [d for d in range(1, n) if n % d == 0]


def enumerate_chains(n: int, max_chains: int = 10**6) -> list[BreakingChain]:
    """All valid chains for n, including the empty one, depth-first in decreasing block order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out: list[BreakingChain] = []

    def extend(prefix: tuple[int, ...], last: int):
        out.append(BreakingChain(n, prefix))
        if len(out) > max_chains:
            raise CapacityError(f"more than {max_chains} chains for n={n}")
        for d in sorted(proper_divisors(last), reverse=True):
            extend(prefix + (d,), d)

    extend((), n)
    return out


def prime_factor_count(n: int) -> int:
    """Omega(n): prime factors counted with multiplicity (trial division)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    count = 0
    p = 2
    while p * p <= n:
        while n % p == 0:
            n //= p
            count += 1
        p += 1 if p == 2 else 2
    return count + (1 if n > 1 else 0)


def k_max(n: int) -> int:
    """Longest breaking chain for n; each step removes at least one prime factor."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return prime_factor_count(n)


def k_max_bruteforce(n: int) -> int:
    return max(chain.length for chain in enumerate_chains(n))


def witness_n_for_k(k: int) -> tuple[int, BreakingChain]:
    """n = 2^(k+1) with the chain 2^k, 2^(k-1), ..., 1 of k+1 nested breakings."""
    if k < 0:
        raise ValueError("k must be >= 0")
    n = 2 ** (k + 1)
    return n, BreakingChain(n, tuple(2**i for i in range(k, -1, -1)))


def chain_report(n: int, max_chains: int = 10**6) -> dict:
    chains = enumerate_chains(n, max_chains)
    return {
        "n": n,
        "k_max": k_max(n),
        "chains": [list(c.blocks) for c in chains],
        "orders": [[str(o) for o in c.orders()] for c in chains],
    }


def permutations_to_json(perms) -> str:
    return json.dumps([p.to_list() for p in perms])
