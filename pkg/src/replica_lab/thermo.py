"""Exact finite-n thermodynamics of a k-SAT instance by exhaustive enumeration.

Every quantity here derives from the energy spectrum: the number of spin
configurations at each violated-clause count E = 0..m. The spectrum is built
once per instance by a Gray-code walk in which each step flips one variable and
updates only the clauses that contain it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np
from scipy.special import logsumexp

from ._parallel import map_ordered
from .errors import CapacityError, InvalidInstanceError
from .ksat_core import EnsembleParams, KSatInstance, generate_instance

N_EXHAUSTIVE = 24

ESTIMATORS = ("log_z", "free_energy", "thermal_energy", "ground_energy_density")


@dataclass(frozen=True)
class PartitionValue:
    log_z: float
    T: float

    @property
    def z(self) -> float:
        return math.exp(self.log_z)


@dataclass(frozen=True)
class DisorderAverage:
    mean: float
    std_error: float
    samples: int
    estimator: str = ""
    values: tuple = ()
    flagged: int = 0  # samples with a positive value, reported for ground_energy_density

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "mean": self.mean,
            "std_error": self.std_error,
            "samples": self.samples,
            "flagged_positive": self.flagged,
        }


@numba.njit(cache=True)
def _gray_spectrum(n, k, m, variables, signs, occ_ptr, occ_clause, occ_sign):
    # false_count[j] = literals of clause j that are false in the current config
    false_count = np.zeros(m, dtype=np.int64)
    # start at x = 0 (all spins -1): positive literals are false
    for j in range(m):
        c = 0
        for t in range(k):
            if signs[j, t] == 1:
                c += 1
        false_count[j] = c
    e = 0
    for j in range(m):
        if false_count[j] == k:
            e += 1
    hist = np.zeros(m + 1, dtype=np.int64)
    hist[e] += 1
    x = np.zeros(n, dtype=np.int64)
    total = np.int64(1) << n
    for step in range(1, total):
        # the variable flipped between gray(step - 1) and gray(step)
        i = 0
        s = step
        while (s & 1) == 0:
            s >>= 1
            i += 1
        x[i] ^= 1
        for p in range(occ_ptr[i], occ_ptr[i + 1]):
            j = occ_clause[p]
            before = false_count[j] == k
            # literal is true iff x matches its sign
            lit_true = (x[i] == 1) == (occ_sign[p] == 1)
            if lit_true:
                false_count[j] -= 1
            else:
                false_count[j] += 1
            after = false_count[j] == k
            if before and not after:
                e -= 1
            elif after and not before:
                e += 1
        hist[e] += 1
    return hist


def _occurrences(instance: KSatInstance):
    n = instance.n
    flat_vars = instance.variables.ravel()
    order = np.argsort(flat_vars, kind="stable")
    occ_clause = (order // instance.k).astype(np.int64)
    occ_sign = instance.signs.ravel()[order].astype(np.int64)
    occ_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(flat_vars, minlength=n), out=occ_ptr[1:])
    return occ_ptr, occ_clause, occ_sign


@lru_cache(maxsize=256)
def _spectrum_cached(instance: KSatInstance) -> np.ndarray:
    if instance.n == 0:
        hist = np.zeros(instance.m + 1, dtype=np.int64)
        hist[0] = 1
        return hist
    occ_ptr, occ_clause, occ_sign = _occurrences(instance)
    hist = _gray_spectrum(
        instance.n,
        instance.k,
        instance.m,
        np.ascontiguousarray(instance.variables, dtype=np.int64),
        np.ascontiguousarray(instance.signs, dtype=np.int64),
        occ_ptr,
        occ_clause,
        occ_sign,
    )
    hist.setflags(write=False)
    return hist


def energy_spectrum(instance: KSatInstance, max_n: int | None = None) -> np.ndarray:
    """Degeneracy g[E] of every energy level E = 0..m (sums to 2^n)."""
    limit = N_EXHAUSTIVE if max_n is None else max_n
    if instance.n > limit:
        raise CapacityError(f"n={instance.n} exceeds the exhaustive enumeration limit {limit}")
    return _spectrum_cached(instance)


def _check_T(T):
    if not T > 0:
        raise InvalidInstanceError(f"temperature must be > 0, got {T}")


def _log_weights(instance, T, max_n=None):
    hist = energy_spectrum(instance, max_n)
    levels = np.nonzero(hist)[0]
    return levels, np.log(hist[levels].astype(float)) - levels / T


def partition_function(instance: KSatInstance, T: float, max_n: int | None = None) -> PartitionValue:
    _check_T(T)
    _, logw = _log_weights(instance, T, max_n)
    return PartitionValue(log_z=float(logsumexp(logw)), T=float(T))


def ground_energy(instance: KSatInstance, max_n: int | None = None) -> tuple[int, int]:
    """Exact minimum violated-clause count and the number of minimizers."""
    hist = energy_spectrum(instance, max_n)
    e0 = int(np.flatnonzero(hist)[0])
    return e0, int(hist[e0])


def free_energy(instance: KSatInstance, T: float, max_n: int | None = None) -> float:
    """F(T) = -T log Z, which tends to the ground energy as T -> 0."""
    return -T * partition_function(instance, T, max_n).log_z


def thermal_average_energy(instance: KSatInstance, T: float, max_n: int | None = None) -> float:
    _check_T(T)
    levels, logw = _log_weights(instance, T, max_n)
    p = np.exp(logw - logsumexp(logw))
    return float(np.dot(p, levels))


def thermo_table(instance: KSatInstance, temperatures) -> list[dict]:
    rows = []
    for T in temperatures:
        pz = partition_function(instance, T)
        rows.append(
            {
                "T": float(T),
                "log_z": pz.log_z,
                "free_energy": -T * pz.log_z,
                "thermal_energy": thermal_average_energy(instance, T),
            }
        )
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _estimate(task):
    estimator, params, sample = task
    inst = generate_instance(params, sample=sample)
    if estimator == "log_z":
        return partition_function(inst, params.T).log_z
    if estimator == "free_energy":
        return free_energy(inst, params.T)
    if estimator == "thermal_energy":
        return thermal_average_energy(inst, params.T)
    return ground_energy(inst)[0] / inst.n


def disorder_average(estimator: str, params: EnsembleParams, samples: int, workers: int = 1) -> DisorderAverage:
    """Mean and standard error of ``estimator`` over ``samples`` random instances.

    Sample j uses the stream derived from (params.seed, j); values are reduced
    in sample order, so the result does not depend on ``workers``.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    values = np.array(map_ordered(_estimate, [(estimator, params, j) for j in range(samples)], workers))
    mean = float(math.fsum(values) / samples)
    std_error = float(np.std(values, ddof=1) / math.sqrt(samples)) if samples >= 2 else float("nan")
    flagged = int(np.sum(values > 0)) if estimator == "ground_energy_density" else 0
    return DisorderAverage(mean, std_error, samples, estimator, tuple(values.tolist()), flagged)
