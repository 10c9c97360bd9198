"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is printed in the summary."""

import itertools
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from replica_lab.ksat_core import EnsembleParams, count_violated_direct, energy, generate_instance
from replica_lab.replica_moments import (
    laplace_convergence,
    log_limit_check,
    moment_bruteforce,
    moment_exact_histogram,
    moment_instance_ensemble,
    permute_replicas,
    rate_function,
    replicated_partition,
    saddle_maximize,
)
from replica_lab.rsb_groups import (
    BreakingChain,
    block_group,
    block_permutation_not_in_group,
    cayley_embed,
    chain_valid,
    cyclic_group,
    dihedral_group,
    enumerate_permutations,
    k_max,
    k_max_bruteforce,
    klein_four_group,
    no_finite_self_embedding,
    quaternion_group,
    subgroup_chain_check,
    symmetric_group,
    witness_n_for_k,
)
from replica_lab.special_gamma import gamma_value
from replica_lab.thermo import partition_function
from replica_lab.threshold_lab import energy_density_scan, estimate_threshold, p_sat_curve


class Criterion:
    def __init__(self, number: int, title: str, budget: float | None = None):
        self.number, self.title, self.budget = number, title, budget
        self.details: list[str] = []
        self.ok = True

    def check(self, cond: bool, detail: str):
        if not cond:
            self.ok = False
            self.details.append(detail)

    def note(self, detail: str):
        self.details.append(detail)

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        if exc_type is not None:
            self.ok = False
            self.details.append(f"{exc_type.__name__}: {exc}")
        if self.budget is not None and elapsed > self.budget:
            self.ok = False
            self.details.append(f"took {elapsed:.1f}s > {self.budget:g}s")
        status = "PASS" if self.ok else "FAIL"
        extra = "; ".join(self.details)
        line = f"criterion {self.number}: {status} {self.title} ({elapsed:.2f}s){' - ' + extra if extra else ''}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        if exc_type is None:
            assert self.ok, line
        return False


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b)) if (a or b) else 0.0


def test_criterion_01_energy_identity():
    with Criterion(1, "energy equals direct violated-clause count on 1000 pairs", budget=5) as c:
        rng = np.random.default_rng(101)
        for _ in range(1000):
            k = int(rng.integers(1, 4))
            n = int(rng.integers(k, 17))
            m = int(rng.integers(0, 5 * n))
            inst = generate_instance(EnsembleParams(n=n, k=k, m=m, seed=int(rng.integers(2**32))))
            s = rng.choice([-1, 1], n)
            c.check(int(energy(inst, s)) == count_violated_direct(inst, s), f"mismatch n={n} k={k} m={m}")


def test_criterion_02_replicated_partition():
    with Criterion(2, "replicated partition equals r log Z, r = 0..3", budget=10) as c:
        rng = np.random.default_rng(102)
        worst = 0.0
        for _ in range(50):
            k = int(rng.integers(1, 4))
            n = int(rng.integers(k, 7))
            inst = generate_instance(EnsembleParams(n=n, k=k, m=int(rng.integers(0, 4 * n)), seed=int(rng.integers(2**32))))
            T = float(rng.uniform(0.3, 3.0))
            log_z = partition_function(inst, T).log_z
            for r in range(4):
                worst = max(worst, rel_err(replicated_partition(inst, r, T), r * log_z))
        c.note(f"max rel err {worst:.1e}")
        c.check(worst <= 1e-10, "relative error above 1e-10")


def test_criterion_03_scalar_limit():
    with Criterion(3, "(Z^r - 1)/r -> ln Z monotonically", budget=None) as c:
        rng = np.random.default_rng(103)
        rs = [10.0**-i for i in range(1, 7)]
        for _ in range(20):
            n = int(rng.integers(3, 13))
            inst = generate_instance(EnsembleParams(n=n, k=3, m=int(rng.integers(0, 5 * n)), seed=int(rng.integers(2**32))))
            rows, _, log_z = log_limit_check(inst, float(rng.uniform(0.3, 3.0)), rs)
            errors = [row.error for row in rows]
            c.check(all(b < a for a, b in zip(errors, errors[1:])), f"non-monotone errors {errors}")
            c.check(errors[-1] <= 1e-5 * log_z**2, f"error {errors[-1]:.2e} at r=1e-6")


def test_criterion_04_moment_triple_agreement():
    with Criterion(4, "histogram vs brute force vs instance ensemble", budget=60) as c:
        worst = 0.0
        for n, k, m, r in itertools.product(range(1, 5), (1, 2), range(4), (1, 2)):
            if k > n:
                continue
            for T in (0.5, 1.0):
                params = EnsembleParams(n=n, k=k, m=m, T=T, seed=0)
                worst = max(worst, rel_err(moment_exact_histogram(params, r).log_moment, moment_bruteforce(params, r).log_moment))
        c.check(worst <= 1e-9, f"histogram/brute force rel err {worst:.1e}")
        worst_ens = 0.0
        for r in (1, 2):
            for T in (0.5, 1.0):
                params = EnsembleParams(n=2, k=1, m=2, T=T, seed=0)
                worst_ens = max(worst_ens, rel_err(moment_exact_histogram(params, r).log_moment,
                                                   moment_instance_ensemble(params, r).log_moment))
        c.check(worst_ens <= 1e-9, f"ensemble rel err {worst_ens:.1e}")
        c.note(f"max rel err {max(worst, worst_ens):.1e}")


def test_criterion_05_laplace_convergence():
    with Criterion(5, "per-site log moment approaches the rate-function maximum", budget=300) as c:
        rows = laplace_convergence(1.0, 2, 1.0, 2, [6, 12, 18, 24])
        gaps = [row["gap"] for row in rows]
        c.note("gaps " + ", ".join(f"{g:.2e}" for g in gaps))
        c.check(all(b < a for a, b in zip(gaps, gaps[1:])), "gaps do not decrease")
        c.check(gaps[-1] <= 0.1 and gaps[-1] < gaps[0], "final gap too large")


def test_criterion_06_replica_symmetry():
    with Criterion(6, "replica-permutation symmetry and RS <= full simplex") as c:
        rng = np.random.default_rng(106)
        worst = 0.0
        for _ in range(50):
            u = rng.dirichlet(np.ones(8))
            base = rate_function(u, 2.5, 3, 0.7, 3)
            for _ in range(50):
                value = rate_function(permute_replicas(u, rng.permutation(3)), 2.5, 3, 0.7, 3)
                worst = max(worst, rel_err(value, base))
        c.note(f"max rel dev {worst:.1e}")
        c.check(worst <= 1e-10, "symmetry deviation above 1e-10")
        for alpha, T in itertools.product((1.0, 3.0, 5.0), (0.3, 1.0, 3.0)):
            full = saddle_maximize(alpha, 3, T, 3, "full-simplex")
            rs = saddle_maximize(alpha, 3, T, 3, "replica-symmetric")
            c.check(rs.f_max <= full.f_max + 1e-8, f"RS above full at alpha={alpha}, T={T}")


def test_criterion_07_group_facts():
    with Criterion(7, "block-group orders, block swaps, element-wise chain inclusion") as c:
        for n in range(1, 9):
            for m in range(1, n + 1):
                if n % m:
                    continue
                g = block_group(n, m)
                c.check(len(set(g.elements())) == math.factorial(m) ** (n // m), f"order n={n} m={m}")
                if m < n:
                    swap = block_permutation_not_in_group(n, m)
                    c.check(not g.contains(swap) and swap not in set(g.elements()), f"swap n={n} m={m}")
        c.check(bool(subgroup_chain_check(BreakingChain(8, (4, 2, 1)))), "chain (4,2,1) for n=8")


def test_criterion_08_k_max():
    with Criterion(8, "k_max is Omega(n) and matches brute force", budget=30) as c:
        for n in range(2, 10001):
            # independent count of prime factors by repeated division
            x, omega, p = n, 0, 2
            while x > 1:
                while x % p == 0:
                    x //= p
                    omega += 1
                p += 1
            if k_max(n) != omega:
                c.check(False, f"k_max({n}) = {k_max(n)} != {omega}")
        for n in range(1, 361):
            c.check(k_max(n) == k_max_bruteforce(n), f"brute force differs at n={n}")
        for k in range(21):
            n, chain = witness_n_for_k(k)
            c.check(bool(chain_valid(chain)) and chain.length == k + 1, f"witness k={k}")


def test_criterion_09_cayley():
    with Criterion(9, "Cayley embeddings and no finite self-embedding") as c:
        groups = [cyclic_group(n) for n in range(2, 9)] + [klein_four_group(), symmetric_group(3), dihedral_group(4), quaternion_group()]
        for g in groups:
            lam = cayley_embed(g)
            hom = all(lam[g.mul(a, b)] == lam[a] * lam[b] for a in range(g.order) for b in range(g.order))
            c.check(hom and len(set(lam)) == g.order, f"embedding of {g.name}")
        for n in range(1, 5):
            c.check(no_finite_self_embedding(n), f"n={n}")
        c.check(len(enumerate_permutations(4)) == 24, "|S4|")


def test_criterion_10_gamma():
    with Criterion(10, "Gamma(n+1) = n!, Gamma(1) = 1, functional equation") as c:
        worst = max(abs(gamma_value(n + 1) - math.factorial(n)) / math.factorial(n) for n in range(171))
        c.note(f"max factorial gap {worst:.1e}")
        c.check(worst <= 1e-10, "factorial gap above 1e-10")
        c.check(gamma_value(1.0) == 1.0, "Gamma(1) != 1")
        rng = np.random.default_rng(110)
        residual = max(abs(gamma_value(x + 1) - x * gamma_value(x)) / gamma_value(x + 1) for x in rng.uniform(0.01, 150, 100))
        c.check(residual <= 1e-10, f"functional equation residual {residual:.1e}")


@pytest.mark.slow
def test_criterion_11_threshold():
    with Criterion(11, "threshold bracket, coupled monotonicity, energy density", budget=600) as c:
        grid = np.round(np.arange(3.0, 6.01, 0.25), 2)
        curve = p_sat_curve(3, 20, grid, samples=200, seed=0)
        est = estimate_threshold(curve)
        c.note(f"alpha_half {est.alpha_half:.3f} CI [{est.ci[0]:.3f}, {est.ci[1]:.3f}]")
        c.check(3.5 <= est.alpha_half <= 5.5, "alpha_half outside [3.5, 5.5]")
        c.check(bool(np.all(np.diff(curve.outcomes.astype(int), axis=1) <= 0)), "a sample path becomes SAT again")
        scan = energy_density_scan(3, 20, [2.0, 5.0, 7.0], samples=200, seed=0)
        e2, e5, e7 = scan.mean
        s5, s7 = scan.std_error[1], scan.std_error[2]
        c.note(f"e = {e2:.4f}, {e5:.4f}, {e7:.4f}")
        c.check(e2 == 0.0, "e(2) != 0")
        c.check(e5 > 3 * s5, "e(5) not 3 stderr above 0")
        c.check(e7 - e5 > 3 * math.hypot(s5, s7), "e(7) not 3 stderr above e(5)")


DETERMINISM_COMMANDS = [
    ["gen", "--n", "16", "--k", "3", "--alpha", "4.2", "--seed", "9"],
    ["gen", "--n", "16", "--k", "3", "--alpha", "4.2", "--seed", "9", "--format", "json"],
    ["energy", "--n", "6", "--k", "3", "--m", "10", "--seed", "2"],
    ["partition", "--n", "10", "--k", "3", "--alpha", "3", "--samples", "8", "--temps", "0.5,1,2", "--seed", "5"],
    ["moments", "--n", "4", "--k", "2", "--m", "3", "--r", "2", "--method", "all", "--seed", "1"],
    ["limitcheck", "--n", "8", "--k", "3", "--m", "20", "--seed", "4"],
    ["saddle", "--alpha", "2", "--k", "3", "--r", "2", "--seed", "3"],
    ["chains", "--n", "24"],
    ["kmax", "--n", "360"],
    ["witness", "--k", "4"],
    ["cayley", "--group", "q8"],
    ["gamma-table", "--n-max", "30", "--format", "csv"],
    ["threshold", "--n", "12", "--alpha-grid", "3:6:0.5", "--samples", "20", "--seed", "6"],
    ["energy-scan", "--n", "12", "--alpha-grid", "2,5,7", "--samples", "20", "--seed", "6", "--format", "csv"],
]


def test_criterion_12_determinism():
    with Criterion(12, "byte-identical CLI output across --workers") as c:
        for argv in DETERMINISM_COMMANDS:
            outputs = []
            for workers in ("1", "3", "1"):
                proc = subprocess.run(
                    [sys.executable, "-m", "replica_lab.cli", *argv, "--deterministic", "--workers", workers],
                    capture_output=True,
                )
                c.check(proc.returncode == 0, f"{argv[0]} exited {proc.returncode}: {proc.stderr.decode()[-200:]}")
                outputs.append(proc.stdout)
            c.check(len(set(outputs)) == 1 and outputs[0], f"{' '.join(argv)} differs across workers")
