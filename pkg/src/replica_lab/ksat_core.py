"""Random k-SAT instances, the clause matrix and the violated-clause Hamiltonian.

Variables are 0-based internally and 1-based in DIMACS text. A clause is stored
as ``k`` variable indices (sorted ascending) with a sign per literal: ``+1`` for
``x_i`` and ``-1`` for ``not x_i``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import sparse

from .errors import CapacityError, DimacsParseError, InvalidInstanceError


@dataclass(frozen=True)
class EnsembleParams:
    """Parameters of the uniform random k-SAT ensemble.

    Exactly one of ``m`` and ``alpha`` is needed; when ``alpha`` is given the
    clause count is ``round(alpha * n)``.
    """

    n: int
    k: int
    m: int | None = None
    alpha: float | None = None
    T: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.m is None and self.alpha is None:
            object.__setattr__(self, "m", 0)
        elif self.m is None:
            object.__setattr__(self, "m", int(round(self.alpha * self.n)))
        if self.m < 0:
            raise InvalidInstanceError(f"clause count must be >= 0, got {self.m}")
        if self.n < 0 or self.k < 1:
            raise InvalidInstanceError(f"need n >= 0 and k >= 1, got n={self.n}, k={self.k}")
        if not self.T > 0:
            raise InvalidInstanceError(f"temperature must be > 0, got {self.T}")

    @property
    def density(self) -> float:
        return self.m / self.n if self.n else float("nan")

    def with_m(self, m: int) -> EnsembleParams:
        return EnsembleParams(n=self.n, k=self.k, m=m, T=self.T, seed=self.seed)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "m": self.m,
            "alpha": self.density,
            "T": self.T,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class KSatInstance:
    n: int
    k: int
    variables: np.ndarray  # (m, k) int64, each row sorted ascending
    signs: np.ndarray  # (m, k) int8 in {-1, +1}
    seed: int | None = field(default=None)

    def __post_init__(self):
        variables = np.asarray(self.variables, dtype=np.int64).reshape(-1, self.k)
        signs = np.asarray(self.signs, dtype=np.int8).reshape(-1, self.k)
        if variables.shape != signs.shape:
            raise InvalidInstanceError("variables and signs must have the same shape")
        if self.k > self.n and len(variables):
            raise InvalidInstanceError(f"k={self.k} exceeds n={self.n}")
        if len(variables):
            if variables.min() < 0 or variables.max() >= self.n:
                raise InvalidInstanceError("variable index out of range")
            if not np.all(np.abs(signs) == 1):
                raise InvalidInstanceError("signs must be +1 or -1")
            order = np.argsort(variables, axis=1, kind="stable")
            variables = np.take_along_axis(variables, order, axis=1)
            signs = np.take_along_axis(signs, order, axis=1)
            if self.k > 1 and np.any(np.diff(variables, axis=1) == 0):
                raise InvalidInstanceError("a clause repeats a variable")
        variables.setflags(write=False)
        signs.setflags(write=False)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "signs", signs)

    @property
    def m(self) -> int:
        return len(self.variables)

    @property
    def alpha(self) -> float:
        return self.m / self.n if self.n else float("nan")

    @classmethod
    def from_clauses(cls, n: int, clauses, k: int | None = None, seed=None) -> KSatInstance:
        """Build from DIMACS-style clauses: lists of signed 1-based literals."""
        clauses = [list(c) for c in clauses]
        if k is None:
            if not clauses:
                raise InvalidInstanceError("k is required for an empty clause list")
            k = len(clauses[0])
        for c in clauses:
            if len(c) != k:
                raise InvalidInstanceError(f"clause {c} does not have exactly k={k} literals")
            if any(lit == 0 or abs(lit) > n for lit in c):
                raise InvalidInstanceError(f"clause {c} has a literal outside 1..{n}")
        variables = np.array([[abs(lit) - 1 for lit in c] for c in clauses], dtype=np.int64)
        signs = np.array([[1 if lit > 0 else -1 for lit in c] for c in clauses], dtype=np.int8)
        return cls(n=n, k=k, variables=variables.reshape(-1, k), signs=signs.reshape(-1, k), seed=seed)

    def clauses(self) -> list[list[int]]:
        """Clauses as lists of signed 1-based literals."""
        lits = (self.variables + 1) * self.signs
        return lits.tolist()

    def prefix(self, m: int) -> KSatInstance:
        """The instance made of the first ``m`` clauses."""
        if m > self.m:
            raise InvalidInstanceError(f"prefix of {m} clauses requested from {self.m}")
        return KSatInstance(self.n, self.k, self.variables[:m], self.signs[:m], seed=self.seed)

    def _key(self):
        return (self.n, self.k, self.variables.tobytes(), self.signs.tobytes())

    def __eq__(self, other):
        if not isinstance(other, KSatInstance):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"KSatInstance(n={self.n}, k={self.k}, m={self.m})"

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "m": self.m, "seed": self.seed, "clauses": self.clauses()}

    @classmethod
    def from_json(cls, data: dict | str) -> KSatInstance:
        if isinstance(data, str):
            data = json.loads(data)
        inst = cls.from_clauses(data["n"], data["clauses"], k=data["k"], seed=data.get("seed"))
        if "m" in data and data["m"] != inst.m:
            raise InvalidInstanceError(f"declared m={data['m']} but found {inst.m} clauses")
        return inst


def spins_from_bits(x) -> np.ndarray:
    """Map booleans x in {0, 1} to spins s = 2x - 1."""
    return 2 * np.asarray(x, dtype=np.int8) - 1


def bits_from_spins(s) -> np.ndarray:
    return (np.asarray(s, dtype=np.int8) + 1) // 2


def spins_from_index(index: int, n: int) -> np.ndarray:
    """Spin configuration whose bit i (of ``index``) is x_i."""
    return spins_from_bits([(index >> i) & 1 for i in range(n)])


def instance_rng(seed: int, sample: int | None = None) -> np.random.Generator:
    """Generator for the instance with ``seed``; ``sample`` selects an independent stream."""
    spawn_key = () if sample is None else (int(sample),)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=spawn_key)))


def generate_instance(params: EnsembleParams, sample: int | None = None) -> KSatInstance:
    """Draw ``m`` i.i.d. clauses uniform over (k-subset of variables, sign pattern).

    Every clause consumes exactly ``2k`` doubles from the stream, so the first
    ``m`` clauses of a longer draw equal the draw with ``m`` clauses.
    """
    n, k, m = params.n, params.k, params.m
    if m > 0 and n == 0:
        raise InvalidInstanceError("n = 0 admits no clauses")
    if k > n:
        raise InvalidInstanceError(f"k={k} exceeds n={n}")
    rng = instance_rng(params.seed, sample)
    draws = rng.random((m, 2 * k))
    variables = np.empty((m, k), dtype=np.int64)
    for j in range(m):
        chosen: list[int] = []
        for i in range(k):
            # uniform rank among the n - i unchosen variables
            v = min(int(draws[j, i] * (n - i)), n - i - 1)
            for c in chosen:  # sorted ascending
                if c <= v:
                    v += 1
            chosen.append(v)
            chosen.sort()
        variables[j] = chosen
    signs = np.where(draws[:, k:] < 0.5, -1, 1).astype(np.int8)
    return KSatInstance(n=n, k=k, variables=variables, signs=signs, seed=params.seed)


def clause_type_count(n: int, k: int) -> int:
    return comb(n, k) * 2**k


def clause_matrix(instance: KSatInstance) -> sparse.csr_matrix:
    """The m x n clause matrix J with entries in {-1, 0, +1}."""
    m, k = instance.m, instance.k
    rows = np.repeat(np.arange(m), k)
    return sparse.csr_matrix(
        (instance.signs.ravel().astype(np.int8), (rows, instance.variables.ravel())),
        shape=(m, instance.n),
    )


def instance_from_matrix(J, k: int | None = None, seed=None) -> KSatInstance:
    """Inverse of :func:`clause_matrix`."""
    J = sparse.csr_matrix(J)
    m, n = J.shape
    nnz = np.diff(J.indptr)
    if k is None:
        k = int(nnz[0]) if m else 1
    if np.any(nnz != k):
        raise InvalidInstanceError(f"every row of J needs exactly k={k} nonzero entries")
    J.sort_indices()
    return KSatInstance(n=n, k=k, variables=J.indices.reshape(m, k), signs=J.data.reshape(m, k), seed=seed)


def _check_spins(instance: KSatInstance, spins) -> np.ndarray:
    s = np.asarray(spins)
    if s.shape[-1] != instance.n:
        raise InvalidInstanceError(f"spin configuration has length {s.shape[-1]}, expected n={instance.n}")
    return s.astype(np.int64)


def energy(instance: KSatInstance, spins) -> int:
    """Number of violated clauses, H(s) = 2^-k sum_j prod_i (1 - J_ji s_i).

    Factors with J_ji = 0 equal 1, so the product runs over the k literals only.
    ``spins`` may be a single configuration or a stack of them (last axis n).
    """
    s = _check_spins(instance, spins)
    factors = 1 - instance.signs.astype(np.int64) * s[..., instance.variables]  # (..., m, k), each 0 or 2
    h = factors.prod(axis=-1).sum(axis=-1) >> instance.k
    return int(h) if np.ndim(h) == 0 else h


def count_violated_direct(instance: KSatInstance, spins) -> int:
    """Count clauses whose literals are all false under x = (s + 1) / 2."""
    s = _check_spins(instance, spins)
    if s.ndim != 1:
        raise InvalidInstanceError("count_violated_direct takes a single configuration")
    x = [bool((v + 1) // 2) for v in s.tolist()]
    violated = 0
    for clause in instance.clauses():
        if not any(x[lit - 1] if lit > 0 else not x[-lit - 1] for lit in clause):
            violated += 1
    return violated


def all_energies(instance: KSatInstance, max_n: int = 24) -> np.ndarray:
    """H for every configuration; entry ``idx`` has x_i = bit i of ``idx``.

    Low variables are handled as vectorized bit masks; each assignment of the
    high variables either satisfies a clause outright or leaves a mask test on
    the low ones.
    """
    n = instance.n
    if n > max_n:
        raise CapacityError(f"n={n} exceeds the exhaustive limit {max_n}")
    low = min(n, 16)
    idx = np.arange(1 << low, dtype=np.int64)
    low_false = {}  # (var, sign) -> mask of low configs where the literal is false
    for v in range(low):
        bit = ((idx >> v) & 1).astype(bool)
        low_false[v, 1] = ~bit
        low_false[v, -1] = bit
    dtype = np.uint16 if instance.m < 2**16 else np.uint32
    out = np.zeros(1 << n, dtype=dtype)
    clauses = list(zip(instance.variables.tolist(), instance.signs.tolist()))
    ones = np.ones(1 << low, dtype=bool)
    for high in range(1 << (n - low)):
        block = out[high << low:(high + 1) << low]
        for vs, ss in clauses:
            mask = ones
            alive = True
            for v, sgn in zip(vs, ss):
                if v >= low:
                    x = (high >> (v - low)) & 1
                    if (x == 1) == (sgn == 1):
                        alive = False
                        break
                else:
                    mask = mask & low_false[v, sgn]
            if alive:
                block += mask
    return out


def export_dimacs(instance: KSatInstance) -> str:
    lines = [f"p cnf {instance.n} {instance.m}"]
    lines += [" ".join(str(lit) for lit in clause) + " 0" for clause in instance.clauses()]
    return "\n".join(lines) + "\n"


def import_dimacs(text: str, k: int | None = None, seed=None) -> KSatInstance:
    """Parse DIMACS CNF. Comment lines start with ``c``; clauses end with ``0``.

    ``k`` is only needed to type an empty formula; otherwise it is read off the clauses.
    """
    n = m = None
    clauses: list[list[int]] = []
    pending: list[int] = []
    pending_line = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if n is not None:
                raise DimacsParseError("duplicate header", lineno)
            if len(parts) != 4 or parts[1] != "cnf":
                raise DimacsParseError(f"malformed header {line!r}", lineno)
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise DimacsParseError(f"malformed header {line!r}", lineno) from None
            if n < 0 or m < 0 or (n == 0 and m > 0):
                raise DimacsParseError(f"invalid header counts n={n}, m={m}", lineno)
            continue
        if n is None:
            raise DimacsParseError("clause before header", lineno)
        try:
            tokens = [int(t) for t in line.split()]
        except ValueError:
            raise DimacsParseError(f"non-integer token in {line!r}", lineno) from None
        for lit in tokens:
            if lit == 0:
                clauses.append(pending)
                pending, pending_line = [], None
            elif abs(lit) > n:
                raise DimacsParseError(f"literal {lit} out of range 1..{n}", lineno)
            else:
                if not pending:
                    pending_line = lineno
                pending.append(lit)
    if n is None:
        raise DimacsParseError("missing header", 1)
    if pending:
        raise DimacsParseError("clause missing terminating 0", pending_line)
    if len(clauses) != m:
        raise DimacsParseError(f"header declares {m} clauses, found {len(clauses)}", lineno if text else 1)
    lengths = {len(c) for c in clauses}
    if len(lengths) > 1:
        raise DimacsParseError(f"mixed clause lengths {sorted(lengths)}", 1)
    if lengths:
        found = lengths.pop()
        if k is not None and found != k:
            raise DimacsParseError(f"clauses have length {found}, expected k={k}", 1)
        k = found
    elif k is None:
        k = 1
    try:
        return KSatInstance.from_clauses(n, clauses, k=k, seed=seed)
    except InvalidInstanceError as exc:
        raise DimacsParseError(str(exc), 1) from exc
