"""Integer-replica moments of the partition function at finite n.

Column types: the r spins a site carries across replicas are encoded as an
integer ``tau`` in ``[0, 2**r)`` whose bit ``a`` is set iff replica ``a`` has
spin +1 at that site. An order parameter is a histogram (or fraction vector)
indexed by ``tau``.

Because clauses are drawn i.i.d., averaging ``Z**r`` over instances factorizes
into a per-clause average that depends on a replica configuration only through
its column histogram. Summing histograms with multinomial multiplicities gives
the moment exactly; :func:`rate_function` is the n -> infinity exponent of the
same sum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from .errors import CapacityError, ConvergenceError, InvalidInstanceError
from .ksat_core import EnsembleParams, KSatInstance, all_energies
from .special_gamma import log_gamma
from .thermo import partition_function

SIMPLEX_TOL = 1e-8
MAX_HISTOGRAM_TERMS = 10**8
REPLICATED_CAPACITY = 22
BRUTEFORCE_CAPACITY = 20
ENSEMBLE_CAPACITY = 10**6


def _beta(T: float) -> float:
    if not T > 0:
        raise InvalidInstanceError(f"temperature must be > 0, got {T}")
    return 0.0 if math.isinf(T) else 1.0 / T


def column_type(spins_column) -> int:
    return sum(1 << a for a, s in enumerate(spins_column) if s > 0)


def type_to_spins(tau: int, r: int) -> tuple[int, ...]:
    return tuple(1 if (tau >> a) & 1 else -1 for a in range(r))


@dataclass(frozen=True)
class ReplicaConfig:
    spins: np.ndarray  # (r, n) entries +-1

    def __post_init__(self):
        s = np.asarray(self.spins, dtype=np.int8)
        if s.ndim != 2:
            raise ValueError("replica configuration must be an r x n array")
        if s.size and not np.all(np.abs(s) == 1):
            raise ValueError("spins must be +1 or -1")
        object.__setattr__(self, "spins", s)

    @property
    def r(self) -> int:
        return self.spins.shape[0]

    @property
    def n(self) -> int:
        return self.spins.shape[1]


@dataclass(frozen=True)
class OrderParameter:
    """Histogram ``counts[tau]`` of column types; ``fractions`` lies on the simplex."""

    r: int
    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def fractions(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    def as_dict(self) -> dict[tuple[int, ...], int]:
        return {type_to_spins(t, self.r): int(c) for t, c in enumerate(self.counts) if c}


@dataclass(frozen=True)
class MomentResult:
    log_moment: float
    method: str
    params: EnsembleParams
    r: int
    terms: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"params": self.params.to_dict(), "r": self.r, "method": self.method, "log_moment": self.log_moment}
        if self.terms:
            out["terms"] = self.terms
        out.update(self.extra)
        return out


@dataclass(frozen=True)
class SaddleResult:
    u_star: np.ndarray
    f_max: float
    ansatz: str
    iterations: int
    grad_norm: float
    converged: bool
    starts: int
    rs_weights: np.ndarray | None = None  # class masses p_c = C(r, c) v_c for the RS ansatz
    local_max: bool = True

    def to_dict(self) -> dict:
        r = int(round(math.log2(len(self.u_star))))
        out = {
            "r": r,
            "ansatz": self.ansatz,
            "f_max": self.f_max,
            "u_star": {"".join("+" if s > 0 else "-" for s in type_to_spins(t, r)): float(v) for t, v in enumerate(self.u_star)},
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "converged": self.converged,
            "starts": self.starts,
            "local_max": self.local_max,
        }
        if self.rs_weights is not None:
            out["rs_class_mass"] = [float(x) for x in self.rs_weights]
        return out


# --- replicated partition and the scalar log limit -------------------------


def replicated_partition(instance: KSatInstance, r: int, T: float) -> float:
    """ln of the sum over all r-tuples of configurations of exp(-sum_a H(s^a)/T).

    Enumerates the (2^n)^r tuples directly; the product structure is not used.
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    if r == 0:
        return 0.0
    if r * instance.n > REPLICATED_CAPACITY:
        raise CapacityError(
            f"r*n = {r * instance.n} exceeds {REPLICATED_CAPACITY}; use r * partition_function(...).log_z instead"
        )
    beta = _beta(T)
    e = all_energies(instance).astype(np.float64)
    total = e
    for _ in range(r - 1):
        total = (total[:, None] + e[None, :]).ravel()
    return float(logsumexp(-beta * total))


@dataclass(frozen=True)
class LimitRow:
    r: float
    value: float
    error: float


def scalar_log_limit(log_z: float, r_sequence) -> tuple[list[LimitRow], bool]:
    """(Z^r - 1)/r for a positive scalar Z along ``r_sequence``.

    Returns the table and whether the error |(Z^r - 1)/r - ln Z| is
    non-increasing along the sequence.
    """
    rows = []
    for r in r_sequence:
        if not r > 0:
            raise ValueError(f"r must be positive, got {r}")
        value = math.expm1(r * log_z) / r
        rows.append(LimitRow(float(r), value, abs(value - log_z)))
    monotone = all(b.error <= a.error for a, b in zip(rows, rows[1:]))
    return rows, monotone


def log_limit_check(instance: KSatInstance, T: float, r_sequence) -> tuple[list[LimitRow], bool, float]:
    log_z = partition_function(instance, T).log_z
    rows, monotone = scalar_log_limit(log_z, r_sequence)
    return rows, monotone, log_z


# --- histograms and the clause average -------------------------------------


def column_histogram(config: ReplicaConfig) -> OrderParameter:
    r = config.r
    weights = (1 << np.arange(r, dtype=np.int64))[:, None]
    types = ((config.spins > 0) * weights).sum(axis=0) if r else np.zeros(config.n, dtype=np.int64)
    return OrderParameter(r=r, counts=np.bincount(types, minlength=1 << r).astype(np.int64))


@lru_cache(maxsize=128)
def _clause_kernel(k: int, r: int, beta: float):
    """Multisets c of k column types with the sign-summed weight S(c).

    S(c) = sum over sign patterns eps of prod_a exp(-beta * [replica a violates]),
    where replica a violates iff every chosen column has spin -eps_j in row a.
    """
    n_types = 1 << r
    multisets = []
    weights = []
    for combo in itertools.combinations_with_replacement(range(n_types), k):
        s = 0.0
        for eps in itertools.product((1, -1), repeat=k):
            viol = 0
            for a in range(r):
                if all(((tau >> a) & 1) == (1 if e == -1 else 0) for tau, e in zip(combo, eps)):
                    viol += 1
            s += math.exp(-beta * viol)
        c = np.bincount(combo, minlength=n_types)
        multisets.append(c)
        weights.append(s)
    return np.array(multisets, dtype=np.int64).reshape(-1, n_types), np.array(weights)


def _comb_float(N: np.ndarray, c: int) -> np.ndarray:
    out = np.ones_like(N, dtype=np.float64)
    for i in range(c):
        out *= (N - i) / (i + 1)
    return np.where(N >= c, out, 0.0)


def _clause_weights(counts: np.ndarray, k: int, beta: float, r: int) -> np.ndarray:
    """Vectorized clause average for a stack of histograms (rows of ``counts``)."""
    counts = np.atleast_2d(counts)
    n = int(counts[0].sum())
    multisets, S = _clause_kernel(k, r, beta)
    comb_prod = np.ones((counts.shape[0], len(multisets)))
    for tau in range(counts.shape[1]):
        col = counts[:, tau][:, None].astype(np.float64)
        needed = multisets[:, tau]
        for c in np.unique(needed):
            if c == 0:
                continue
            sel = needed == c
            comb_prod[:, sel] *= _comb_float(col, int(c))
    return comb_prod @ S / (math.comb(n, k) * 2**k)


def clause_average_weight(histogram, k: int, T: float, r: int) -> float:
    """Exact average over one uniform clause of exp(-(1/T) * sum_a viol_a).

    The k sites are drawn without replacement from the n sites described by
    ``histogram``, so the value depends only on the histogram.
    """
    counts = histogram.counts if isinstance(histogram, OrderParameter) else np.asarray(histogram, dtype=np.int64)
    if len(counts) != 1 << r:
        raise ValueError(f"histogram must have 2**r = {1 << r} entries")
    n = int(counts.sum())
    if n < k:
        raise ValueError(f"need n >= k, got n={n}, k={k}")
    return float(_clause_weights(counts, k, _beta(T), r)[0])


# --- exact moments ----------------------------------------------------------


def histogram_count(n: int, r: int) -> int:
    parts = 1 << r
    return math.comb(n + parts - 1, parts - 1)


@lru_cache(maxsize=64)
def _compositions(n: int, parts: int) -> np.ndarray:
    if parts == 1:
        return np.array([[n]], dtype=np.int64)
    blocks = []
    for first in range(n, -1, -1):
        rest = _compositions(n - first, parts - 1)
        blocks.append(np.hstack([np.full((len(rest), 1), first, dtype=np.int64), rest]))
    return np.vstack(blocks)


def _composition_blocks(n: int, parts: int):
    """All compositions of n into ``parts`` parts, in blocks keyed by the first part."""
    if parts == 1:
        yield np.array([[n]], dtype=np.int64)
        return
    for first in range(n, -1, -1):
        rest = _compositions(n - first, parts - 1)
        yield np.hstack([np.full((len(rest), 1), first, dtype=np.int64), rest])


def moment_exact_histogram(params: EnsembleParams, r: int, max_terms: int = MAX_HISTOGRAM_TERMS) -> MomentResult:
    """ln E[Z^r] = ln sum_N multinomial(n; N) * w(N)^m over column histograms N."""
    if r < 0:
        raise ValueError("r must be >= 0")
    n, k, m = params.n, params.k, params.m
    terms = histogram_count(n, r)
    if terms > max_terms:
        raise CapacityError(f"{terms} histograms required, capacity is {max_terms}")
    if m > 0 and n < k:
        raise ValueError(f"need n >= k, got n={n}, k={k}")
    beta = _beta(params.T)
    log_fact = np.array([log_gamma(i + 1) for i in range(n + 1)])
    parts = []
    for block in _composition_blocks(n, 1 << r):
        log_mult = log_fact[n] - log_fact[block].sum(axis=1)
        if m:
            log_mult = log_mult + m * np.log(_clause_weights(block, k, beta, r))
        parts.append(logsumexp(log_mult))
    return MomentResult(float(logsumexp(parts)), "histogram-exact", params, r, terms)


def _all_replica_spins(n: int, r: int) -> np.ndarray:
    idx = np.arange(1 << (n * r), dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n * r)) & 1
    return (2 * bits - 1).astype(np.int8).reshape(-1, r, n)


def moment_bruteforce(params: EnsembleParams, r: int) -> MomentResult:
    """ln E[Z^r] by enumerating every replica configuration.

    For each of the (2^n)^r configurations the clause average is computed
    directly over all C(n,k) 2^k clauses. When the whole instance ensemble is
    small enough, its direct average is attached as ``ensemble_log_moment``.
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    n, k, m = params.n, params.k, params.m
    extra = {}
    if r == 0:
        return MomentResult(0.0, "bruteforce-exact", params, r)
    if r * n > BRUTEFORCE_CAPACITY:
        raise CapacityError(f"r*n = {r * n} exceeds {BRUTEFORCE_CAPACITY}")
    beta = _beta(params.T)
    spins = _all_replica_spins(n, r)
    if m == 0:
        log_moment = n * r * math.log(2)
    else:
        acc = np.zeros(len(spins))
        count = 0
        for subset in itertools.combinations(range(n), k):
            cols = spins[:, :, list(subset)]  # (R, r, k)
            for eps in itertools.product((1, -1), repeat=k):
                viol = np.all(cols == -np.array(eps, dtype=np.int8), axis=2).sum(axis=1)
                acc += np.exp(-beta * viol)
                count += 1
        log_moment = float(logsumexp(m * np.log(acc / count)))
    if (math.comb(n, k) * 2**k) ** m <= ENSEMBLE_CAPACITY:
        extra["ensemble_log_moment"] = moment_instance_ensemble(params, r).log_moment
    return MomentResult(log_moment, "bruteforce-exact", params, r, extra=extra)


def moment_instance_ensemble(params: EnsembleParams, r: int, max_cells: int = 5 * 10**7) -> MomentResult:
    """ln E[Z^r] by averaging Z^r over every ordered m-tuple of clauses."""
    n, k, m = params.n, params.k, params.m
    n_types = math.comb(n, k) * 2**k
    n_instances = n_types**m
    if n_instances > ENSEMBLE_CAPACITY or n_instances * (1 << n) > max_cells:
        raise CapacityError(f"instance ensemble of size {n_instances} is too large to enumerate")
    beta = _beta(params.T)
    idx = np.arange(1 << n, dtype=np.int64)
    x = (idx[:, None] >> np.arange(n)) & 1
    violation = []
    for subset in itertools.combinations(range(n), k):
        for eps in itertools.product((1, -1), repeat=k):
            false_lits = [(x[:, v] == (0 if e == 1 else 1)) for v, e in zip(subset, eps)]
            violation.append(np.logical_and.reduce(false_lits).astype(np.int64))
    violation = np.array(violation)
    energies = np.zeros((1, 1 << n), dtype=np.int64)
    for _ in range(m):
        energies = (energies[:, None, :] + violation[None, :, :]).reshape(-1, 1 << n)
    log_z = logsumexp(-beta * energies, axis=1)
    log_moment = float(logsumexp(r * log_z) - math.log(len(log_z)))
    return MomentResult(log_moment, "ensemble-exact", params, r, terms=int(n_instances))


# --- rate function ----------------------------------------------------------


@lru_cache(maxsize=32)
def _constancy_matrix(r: int) -> tuple[np.ndarray, np.ndarray]:
    """B[A, tau] = 1 if column tau is constant on replica subset A (2 for empty A), and |A|."""
    n_types = 1 << r
    B = np.zeros((n_types, n_types))
    sizes = np.array([bin(A).count("1") for A in range(n_types)])
    for A in range(n_types):
        for tau in range(n_types):
            if A == 0:
                B[A, tau] = 2.0
            else:
                on_a = tau & A
                B[A, tau] = 1.0 if on_a in (0, A) else 0.0
    return B, sizes


def _weight_terms(u: np.ndarray, k: int, beta: float, r: int):
    # Expanding prod_a (1 + q [a violates]) over replica subsets A and summing
    # the signs clause-wise gives w(u) = 2^-k sum_A q^|A| (B u)_A^k.
    B, sizes = _constancy_matrix(r)
    q = math.expm1(-beta)
    coef = q ** sizes.astype(float) / 2**k
    c = B @ u
    return B, coef, c


def clause_weight_iid(u, k: int, T: float, r: int) -> float:
    """n -> infinity clause average: sites drawn i.i.d. from the column-type law u."""
    u = np.asarray(u, dtype=np.float64)
    _, coef, c = _weight_terms(u, k, _beta(T), r)
    return float(coef @ c**k)


def _check_simplex(u: np.ndarray, r: int):
    if u.shape != (1 << r,):
        raise ValueError(f"u must have 2**r = {1 << r} entries")
    if u.min() < -SIMPLEX_TOL or abs(u.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError("u is off the probability simplex")


def _entropy(u: np.ndarray) -> float:
    pos = u[u > 0]
    return float(-np.dot(pos, np.log(pos)))


def rate_function(u, alpha: float, k: int, T: float, r: int) -> float:
    """F(u) = -sum u ln u + alpha ln w(u)."""
    u = np.asarray(u, dtype=np.float64)
    _check_simplex(u, r)
    u = np.clip(u, 0.0, None)
    value = _entropy(u)
    if alpha:
        value += alpha * math.log(clause_weight_iid(u, k, T, r))
    return value


def rate_gradient(u, alpha: float, k: int, T: float, r: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    with np.errstate(divide="ignore"):
        grad = -(np.log(u) + 1.0)
    if alpha:
        B, coef, c = _weight_terms(u, k, _beta(T), r)
        w = coef @ c**k
        grad = grad + alpha * (k * (coef * c ** (k - 1)) @ B) / w
    return grad


def rate_hessian(u, alpha: float, k: int, T: float, r: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    H = -np.diag(1.0 / u)
    if alpha:
        B, coef, c = _weight_terms(u, k, _beta(T), r)
        w = coef @ c**k
        dw = (k * coef * c ** (k - 1)) @ B
        d2w = (B.T * (k * (k - 1) * coef * c ** (k - 2))) @ B if k > 1 else np.zeros_like(H)
        H = H + alpha * (d2w / w - np.outer(dw, dw) / w**2)
    return H


# --- replica-symmetric parametrization --------------------------------------


@lru_cache(maxsize=32)
def _rs_embedding(r: int) -> np.ndarray:
    """E with u = E p, where p_c is the total mass of columns with c plus-spins."""
    E = np.zeros((1 << r, r + 1))
    for tau in range(1 << r):
        c = bin(tau).count("1")
        E[tau, c] = 1.0 / math.comb(r, c)
    return E


def expand_replica_symmetric(class_mass, r: int) -> np.ndarray:
    return _rs_embedding(r) @ np.asarray(class_mass, dtype=np.float64)


# --- saddle point ------------------------------------------------------------


def _project_simplex(v: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Euclidean projection onto {x >= floor, sum x = 1}."""
    d = len(v)
    w = v - floor
    total = 1.0 - d * floor
    s = np.sort(w)[::-1]
    css = np.cumsum(s) - total
    ind = np.arange(1, d + 1)
    rho = np.nonzero(s - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(w - theta, 0.0) + floor


class _Problem:
    def __init__(self, alpha, k, T, r, ansatz):
        self.alpha, self.k, self.T, self.r = alpha, k, T, r
        self.E = _rs_embedding(r) if ansatz == "replica-symmetric" else np.eye(1 << r)

    def u(self, p):
        return self.E @ p

    def f(self, p):
        if np.any(p <= 0):
            return -np.inf
        u = self.u(p)
        return rate_function(u / u.sum(), self.alpha, self.k, self.T, self.r)

    def grad(self, p):
        return self.E.T @ rate_gradient(self.u(p), self.alpha, self.k, self.T, self.r)

    def hess(self, p):
        return self.E.T @ rate_hessian(self.u(p), self.alpha, self.k, self.T, self.r) @ self.E


def _tangent(g: np.ndarray) -> np.ndarray:
    return g - g.mean()


def _newton_direction(H: np.ndarray, g: np.ndarray) -> np.ndarray | None:
    d = len(g)
    K = np.zeros((d + 1, d + 1))
    K[:d, :d] = H
    K[:d, d] = K[d, :d] = 1.0
    try:
        sol = np.linalg.solve(K, np.concatenate([-g, [0.0]]))
    except np.linalg.LinAlgError:
        return None
    step = sol[:d]
    return step if np.dot(step, _tangent(g)) > 0 else None


def _tangent_basis(d: int) -> np.ndarray:
    # orthonormal basis of {x : sum x = 0}
    Q, _ = np.linalg.qr(np.vstack([np.ones(d), np.eye(d)[:-1]]).T)
    return Q[:, 1:]


def _ascend(prob: _Problem, p0: np.ndarray, tol: float, max_iter: int):
    """Projected gradient ascent with Newton steps on the simplex tangent space."""
    p = _project_simplex(p0, 1e-300)
    fp = prob.f(p)
    step = 1.0
    for it in range(1, max_iter + 1):
        g = prob.grad(p)
        gt = _tangent(g)
        gnorm = float(np.linalg.norm(gt))
        if gnorm <= tol:
            return p, fp, it, gnorm, True
        direction = _newton_direction(prob.hess(p), g)
        moved = False
        if direction is not None:
            # largest step keeping p strictly positive, then backtrack
            neg = direction < 0
            t = min(1.0, 0.99 * float(np.min(-p[neg] / direction[neg]))) if np.any(neg) else 1.0
            # near the optimum F is flat to round-off, so accept Newton steps that
            # lose no more than that
            slack = 1e-14 * max(1.0, abs(fp)) if gnorm < 1e-6 else 0.0
            while t > 1e-12:
                cand = p + t * direction
                fc = prob.f(cand)
                if fc > fp or (slack and fc >= fp - slack):
                    p, fp, moved = cand / cand.sum(), fc, True
                    break
                t *= 0.5
        if not moved:
            while step > 1e-16:
                cand = _project_simplex(p + step * gt, 1e-300)
                fc = prob.f(cand)
                if fc > fp:
                    p, fp, moved = cand, fc, True
                    step *= 2.0
                    break
                step *= 0.5
        if not moved and direction is not None and gnorm < 1e-6:
            # F no longer resolves the progress; steer by the gradient norm instead
            cand = p + direction
            if np.all(cand > 0):
                gc = float(np.linalg.norm(_tangent(prob.grad(cand))))
                if gc < gnorm:
                    p, fp, moved = cand / cand.sum(), prob.f(cand / cand.sum()), True
        if not moved:
            return p, fp, it, gnorm, gnorm <= 10 * tol
    gnorm = float(np.linalg.norm(_tangent(prob.grad(p))))
    return p, fp, max_iter, gnorm, gnorm <= tol


def _derivative_free(prob: _Problem, p0: np.ndarray) -> np.ndarray:
    d = len(p0)

    def to_p(z):
        logits = np.concatenate([[0.0], z])
        return np.exp(logits - logsumexp(logits))

    z0 = np.log(np.maximum(p0, 1e-300))
    z0 = z0[1:] - z0[0]
    res = optimize.minimize(lambda z: -prob.f(to_p(z)), z0, method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000 * d})
    return to_p(res.x)


def _starts(prob: _Problem, d: int, rs: bool, rng: np.random.Generator, n_random: int) -> list[np.ndarray]:
    starts = [np.full(d, 1.0 / d)] if not rs else [np.array([math.comb(prob.r, c) for c in range(d)], float) / 2**prob.r]
    if not rs:
        # replica-symmetric point, perturbed
        base = expand_replica_symmetric(np.array([math.comb(prob.r, c) for c in range(prob.r + 1)], float) / 2**prob.r, prob.r)
        starts.append(_project_simplex(base + 0.05 * rng.standard_normal(d) / d, 1e-6))
    for corner in range(d):
        v = np.full(d, 0.2 / max(d - 1, 1))
        v[corner] = 0.8 if d > 1 else 1.0
        starts.append(v)
    starts += [rng.dirichlet(np.ones(d)) for _ in range(n_random)]
    return starts


def saddle_maximize(
    alpha: float,
    k: int,
    T: float,
    r: int,
    ansatz: str = "full-simplex",
    *,
    seed: int = 0,
    n_random: int = 4,
    tol: float = 1e-10,
    max_iter: int = 2000,
) -> SaddleResult:
    """Multi-start maximization of the rate function over the order-parameter simplex.

    ``ansatz="replica-symmetric"`` restricts u to depend only on the number of
    plus-spins of the column type. The full-simplex search always includes the
    replica-symmetric optimum among its starts, so its maximum is never lower.
    """
    if r < 1:
        raise ValueError("saddle_maximize needs r >= 1")
    if ansatz not in ("full-simplex", "replica-symmetric"):
        raise ValueError(f"unknown ansatz {ansatz!r}")
    rs = ansatz == "replica-symmetric"
    prob = _Problem(alpha, k, T, r, ansatz)
    d = r + 1 if rs else 1 << r
    rng = np.random.default_rng(seed)
    starts = _starts(prob, d, rs, rng, n_random)
    if not rs:
        rs_result = saddle_maximize(alpha, k, T, r, "replica-symmetric", seed=seed, n_random=n_random, tol=tol, max_iter=max_iter)
        starts.insert(0, rs_result.u_star)

    best = None
    total_iter = 0
    for p0 in starts:
        p, fp, it, gnorm, ok = _ascend(prob, p0, tol, max_iter)
        total_iter += it
        if not ok:
            p, fp, it, gnorm, ok = _ascend(prob, _derivative_free(prob, p), tol, max_iter)
            total_iter += it
        if not ok:
            continue
        # ties within round-off go to the better-converged point
        tie = best is not None and abs(fp - best[1]) <= 1e-12 * max(1.0, abs(fp))
        if best is None or (fp > best[1] and not tie) or (tie and gnorm < best[2]):
            best = (p, fp, gnorm)
    if best is None:
        raise ConvergenceError(f"no start converged for alpha={alpha}, k={k}, T={T}, r={r}, ansatz={ansatz}")
    p, fp, gnorm = best
    Q = _tangent_basis(d)
    local_max = bool(np.max(np.linalg.eigvalsh(Q.T @ prob.hess(p) @ Q)) <= 1e-8) if d > 1 else True
    u = prob.u(p)
    return SaddleResult(
        u_star=u / u.sum(),
        f_max=float(fp),
        ansatz=ansatz,
        iterations=total_iter,
        grad_norm=gnorm,
        converged=True,
        starts=len(starts),
        rs_weights=p if rs else None,
        local_max=local_max,
    )


# --- symmetries --------------------------------------------------------------


def permute_replicas(u, perm) -> np.ndarray:
    """(u o pi)[sigma_1..sigma_r] = u[sigma_pi(1)..sigma_pi(r)]."""
    u = np.asarray(u)
    r = len(perm)
    out = np.empty_like(u)
    for tau in range(1 << r):
        src = 0
        for a in range(r):
            if (tau >> perm[a]) & 1:
                src |= 1 << a
        out[tau] = u[src]
    return out


def flip_columns(u) -> np.ndarray:
    """Global spin flip sigma -> -sigma applied to the indices of u."""
    u = np.asarray(u)
    mask = len(u) - 1
    return u[[mask ^ t for t in range(len(u))]]


def check_replica_permutation_symmetry(u, r: int, alpha: float, k: int, T: float, trials: int, seed: int = 0) -> bool:
    u = np.asarray(u, dtype=np.float64)
    base = rate_function(u, alpha, k, T, r)
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        perm = rng.permutation(r)
        value = rate_function(permute_replicas(u, perm), alpha, k, T, r)
        if abs(value - base) > 1e-10 * max(abs(base), 1e-300) and value != base:
            return False
    return True


# --- large-n comparison -------------------------------------------------------


def laplace_convergence(alpha: float, k: int, T: float, r: int, ns, seed: int = 0) -> list[dict]:
    """Per-site log moment at each n against the maximum of the rate function."""
    saddle = saddle_maximize(alpha, k, T, r, "full-simplex", seed=seed)
    rows = []
    for n in ns:
        params = EnsembleParams(n=n, k=k, m=int(round(alpha * n)), T=T, seed=seed)
        per_site = moment_exact_histogram(params, r).log_moment / n
        rows.append({"n": n, "m": params.m, "per_site_log_moment": per_site, "f_max": saddle.f_max,
                     "gap": abs(per_site - saddle.f_max)})
    return rows
