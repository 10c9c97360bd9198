"""Satisfiability decisions, P(sat) curves and ground-energy density scans.

Sample paths are coupled across the density grid: sample j draws one long clause
sequence and the instance at density alpha is its first round(alpha * n)
clauses. A larger density therefore only ever adds clauses to the same formula.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from ._parallel import map_ordered
from .errors import CapacityError, ThresholdRangeError, VerificationError
from .ksat_core import EnsembleParams, KSatInstance, all_energies, energy, export_dimacs, generate_instance

EXHAUSTIVE_LIMIT = 24


@dataclass
class SolverStats:
    decisions: int = 0
    propagations: int = 0


@dataclass(frozen=True)
class SatResult:
    satisfiable: bool
    witness: np.ndarray | None  # spins in {-1, +1}
    stats: SolverStats = field(default_factory=SolverStats)


@dataclass(frozen=True)
class ThresholdCurve:
    k: int
    n: int
    alpha_grid: tuple[float, ...]
    p_sat: tuple[float, ...]
    ci_low: tuple[float, ...]
    ci_high: tuple[float, ...]
    samples: int
    seed: int
    outcomes: np.ndarray | None = None  # (samples, grid) booleans, coupled per row

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.alpha_grid, self.alpha_grid[1:])):
            raise ValueError("alpha grid must be strictly increasing")

    def to_rows(self) -> list[dict]:
        return [
            {"alpha": a, "m": int(round(a * self.n)), "p_sat": p, "ci_low": lo, "ci_high": hi, "samples": self.samples}
            for a, p, lo, hi in zip(self.alpha_grid, self.p_sat, self.ci_low, self.ci_high)
        ]


@dataclass(frozen=True)
class ThresholdEstimate:
    alpha_half: float
    ci: tuple[float, float]
    slope: float  # logistic steepness s in p = 1 / (1 + exp(s (alpha - alpha_half)))
    monotonicity_violations: tuple[int, ...] = ()

    @property
    def midpoint_slope(self) -> float:
        """|dp/dalpha| at alpha_half."""
        return self.slope / 4.0

    def to_dict(self) -> dict:
        return {
            "alpha_half": self.alpha_half,
            "ci": list(self.ci),
            "fit": {"alpha_half": self.alpha_half, "slope": self.slope},
            "monotonicity_violations": list(self.monotonicity_violations),
        }


# --- DPLL --------------------------------------------------------------------


def _assign(clauses, lit):
    out = []
    for c in clauses:
        if lit in c:
            continue
        if -lit in c:
            c = tuple(x for x in c if x != -lit)
        out.append(c)
    return out


def _dpll(clauses, assignment, st: SolverStats):
    while True:
        if any(not c for c in clauses):
            return None
        unit = next((c[0] for c in clauses if len(c) == 1), None)
        if unit is not None:
            st.propagations += 1
            assignment[abs(unit)] = unit > 0
            clauses = _assign(clauses, unit)
            continue
        counts = Counter(lit for c in clauses for lit in c)
        pure = [lit for lit in counts if -lit not in counts]
        if pure:
            for lit in pure:
                assignment[abs(lit)] = lit > 0
                clauses = _assign(clauses, lit)
            continue
        break
    if not clauses:
        return assignment
    # branch on the most frequent variable, trying its more frequent polarity first
    var = max({abs(lit) for lit in counts}, key=lambda v: (counts[v] + counts[-v], -v))
    first = var if counts[var] >= counts[-var] else -var
    for lit in (first, -first):
        st.decisions += 1
        trial = dict(assignment)
        trial[var] = lit > 0
        found = _dpll(_assign(clauses, lit), trial, st)
        if found is not None:
            return found
    return None


def dpll_solve(instance: KSatInstance) -> SatResult:
    """Complete DPLL search: unit propagation, pure literals, max-occurrence branching."""
    st = SolverStats()
    found = _dpll([tuple(c) for c in instance.clauses()], {}, st)
    if found is None:
        return SatResult(False, None, st)
    spins = np.array([1 if found.get(i + 1, False) else -1 for i in range(instance.n)], dtype=np.int8)
    if energy(instance, spins) != 0:
        raise VerificationError("DPLL witness violates a clause")
    return SatResult(True, spins, st)


# --- MAX-SAT ------------------------------------------------------------------


def _branch_and_bound(instance: KSatInstance, budget: int) -> int:
    clauses = [tuple(c) for c in instance.clauses()]
    occ = Counter(abs(lit) for c in clauses for lit in c)
    order = sorted(range(1, instance.n + 1), key=lambda v: -occ[v])
    position = {v: i for i, v in enumerate(order)}
    # a clause is decided once its last variable in branching order is set
    closing = [[] for _ in order]
    for c in clauses:
        closing[max(position[abs(lit)] for lit in c)].append(c)
    best = [len(clauses)]
    nodes = [0]
    value: dict[int, bool] = {}

    def falsified(c):
        return all(value[abs(lit)] != (lit > 0) for lit in c)

    def search(depth, cost):
        nodes[0] += 1
        if nodes[0] > budget:
            raise CapacityError(f"branch-and-bound exceeded its budget of {budget} nodes")
        if cost >= best[0]:
            return
        if depth == len(order):
            best[0] = cost
            return
        v = order[depth]
        for choice in (True, False):
            value[v] = choice
            search(depth + 1, cost + sum(1 for c in closing[depth] if falsified(c)))
        del value[v]

    search(0, 0)
    return best[0]


def max_sat_optimum(instance: KSatInstance, method: str = "auto", budget: int = 10**7) -> int:
    """Minimum number of violated clauses over all assignments.

    ``exhaustive`` evaluates every assignment with bit masks (n <= 24);
    ``branch-and-bound`` is a depth-first search with a node budget.
    """
    if method == "auto":
        method = "exhaustive" if instance.n <= EXHAUSTIVE_LIMIT else "branch-and-bound"
    if method == "exhaustive":
        return int(all_energies(instance, EXHAUSTIVE_LIMIT).min()) if instance.m else 0
    if method == "branch-and-bound":
        return _branch_and_bound(instance, budget)
    raise ValueError(f"unknown method {method!r}")


# --- coupled sampling -------------------------------------------------------------


def _grid_ms(n: int, alpha_grid) -> list[int]:
    return [int(round(a * n)) for a in alpha_grid]


def _sat_path(task):
    k, n, ms, seed, sample = task
    full = generate_instance(EnsembleParams(n=n, k=k, m=max(ms), seed=seed), sample=sample)
    return [dpll_solve(full.prefix(m)).satisfiable for m in ms]


def _energy_path(task):
    k, n, ms, seed, sample = task
    full = generate_instance(EnsembleParams(n=n, k=k, m=max(ms), seed=seed), sample=sample)
    return [max_sat_optimum(full.prefix(m)) for m in ms]


def coupled_instance(k: int, n: int, alpha: float, alpha_max: float, seed: int, sample: int) -> KSatInstance:
    """The instance that sample ``sample`` of a scan up to ``alpha_max`` sees at ``alpha``."""
    full = generate_instance(EnsembleParams(n=n, k=k, m=int(round(alpha_max * n)), seed=seed), sample=sample)
    return full.prefix(int(round(alpha * n)))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def p_sat_curve(k: int, n: int, alpha_grid, samples: int, seed: int, workers: int = 1) -> ThresholdCurve:
    alpha_grid = tuple(float(a) for a in alpha_grid)
    if not alpha_grid:
        raise ValueError("alpha grid is empty")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    ms = _grid_ms(n, alpha_grid)
    outcomes = np.array(map_ordered(_sat_path, [(k, n, ms, seed, j) for j in range(samples)], workers), dtype=bool)
    sat_counts = outcomes.sum(axis=0)
    intervals = [wilson_interval(int(c), samples) for c in sat_counts]
    return ThresholdCurve(
        k=k,
        n=n,
        alpha_grid=alpha_grid,
        p_sat=tuple(float(c) / samples for c in sat_counts),
        ci_low=tuple(lo for lo, _ in intervals),
        ci_high=tuple(hi for _, hi in intervals),
        samples=samples,
        seed=seed,
        outcomes=outcomes,
    )


def export_unsat_instances(curve: ThresholdCurve, directory) -> list[str]:
    """Write every sampled UNSAT instance of ``curve`` as DIMACS; returns the file names."""
    from pathlib import Path

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    alpha_max = max(curve.alpha_grid)
    written = []
    for j, row in enumerate(curve.outcomes):
        for a, sat in zip(curve.alpha_grid, row):
            if not sat:
                inst = coupled_instance(curve.k, curve.n, a, alpha_max, curve.seed, j)
                name = f"k{curve.k}_n{curve.n}_alpha{a:g}_seed{curve.seed}_sample{j}.cnf"
                (out / name).write_text(export_dimacs(inst))
                written.append(name)
    return written


# --- threshold fit -------------------------------------------------------------------


def _logistic_nll(params, alphas, successes, trials):
    a, s = params
    z = s * (alphas - a)
    # log p = -log(1 + e^z), log(1 - p) = z - log(1 + e^z)
    log1pexp = np.logaddexp(0.0, z)
    return float(np.sum(successes * log1pexp + (trials - successes) * (log1pexp - z)))


def _fit_logistic(alphas, successes, trials, s_max):
    p = successes / trials
    lo, hi = float(alphas[0]), float(alphas[-1])
    crossing = np.nonzero(np.diff(np.sign(p - 0.5)))[0]
    a0 = float(alphas[crossing[0]]) if len(crossing) else 0.5 * (lo + hi)
    best = None
    for s0 in (1.0, 0.1 * s_max, s_max):
        res = optimize.minimize(
            _logistic_nll, x0=[a0, min(s0, s_max)], args=(alphas, successes, trials),
            method="L-BFGS-B", bounds=[(lo, hi), (1e-6, s_max)],
        )
        if best is None or res.fun < best.fun:
            best = res
    return float(best.x[0]), float(best.x[1])


def estimate_threshold(curve: ThresholdCurve, n_boot: int = 200, seed: int = 0) -> ThresholdEstimate:
    """Logistic fit of P(sat) against alpha with a bootstrap interval for the midpoint."""
    alphas = np.array(curve.alpha_grid)
    p = np.array(curve.p_sat)
    if p.max() < 0.5 or p.min() > 0.5:
        raise ThresholdRangeError("P(sat) never crosses 1/2 on this grid")
    trials = curve.samples
    spacing = float(np.min(np.diff(alphas))) if len(alphas) > 1 else 1.0
    s_max = 100.0 / spacing
    successes = np.round(p * trials)
    a_hat, s_hat = _fit_logistic(alphas, successes, trials, s_max)

    rng = np.random.default_rng(seed)
    boot = []
    for _ in range(n_boot):
        if curve.outcomes is not None:
            rows = curve.outcomes[rng.integers(0, trials, trials)]
            succ_b = rows.sum(axis=0).astype(float)
        else:
            succ_b = rng.binomial(trials, p).astype(float)
        boot.append(_fit_logistic(alphas, succ_b, trials, s_max)[0])
    ci = (float(np.percentile(boot, 2.5)), float(np.percentile(boot, 97.5)))

    noise = np.sqrt((p * (1 - p) + 1.0 / trials) / trials)
    violations = tuple(
        i for i in range(len(p) - 1) if p[i + 1] - p[i] > 2.0 * math.hypot(noise[i], noise[i + 1])
    )
    return ThresholdEstimate(a_hat, ci, s_hat, violations)


# --- energy density ------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyScan:
    k: int
    n: int
    alpha_grid: tuple[float, ...]
    mean: tuple[float, ...]
    std_error: tuple[float, ...]
    positive: tuple[int, ...]
    samples: int
    seed: int
    optima: np.ndarray  # (samples, grid) minimum violated-clause counts

    def to_rows(self) -> list[dict]:
        return [
            {"alpha": a, "m": int(round(a * self.n)), "energy_density": e, "std_error": se, "positive_samples": pos,
             "samples": self.samples}
            for a, e, se, pos in zip(self.alpha_grid, self.mean, self.std_error, self.positive)
        ]


def energy_density_scan(k: int, n: int, alpha_grid, samples: int, seed: int, workers: int = 1) -> EnergyScan:
    """Mean ground-energy density min_s H(s) / n with its standard error at each density."""
    alpha_grid = tuple(float(a) for a in alpha_grid)
    if n > EXHAUSTIVE_LIMIT:
        raise CapacityError(f"n={n} exceeds the exhaustive limit {EXHAUSTIVE_LIMIT}")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    ms = _grid_ms(n, alpha_grid)
    optima = np.array(map_ordered(_energy_path, [(k, n, ms, seed, j) for j in range(samples)], workers), dtype=np.int64)
    density = optima / n
    mean = density.mean(axis=0)
    se = density.std(axis=0, ddof=1) / math.sqrt(samples) if samples > 1 else np.full(len(ms), np.nan)
    return EnergyScan(
        k, n, alpha_grid,
        tuple(float(x) for x in mean),
        tuple(float(x) for x in se),
        tuple(int(x) for x in (optima > 0).sum(axis=0)),
        samples, seed, optima,
    )
