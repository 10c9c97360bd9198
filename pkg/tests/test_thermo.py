import math

import numpy as np
import pytest

from replica_lab.errors import CapacityError
from replica_lab.ksat_core import EnsembleParams, KSatInstance, all_energies, generate_instance
from replica_lab.thermo import (
    disorder_average,
    energy_spectrum,
    free_energy,
    ground_energy,
    partition_function,
    rows_to_csv,
    thermal_average_energy,
    thermo_table,
)
from replica_lab.threshold_lab import dpll_solve, max_sat_optimum

CONTRADICTION = KSatInstance.from_clauses(1, [[1], [-1]])


def instances():
    out = []
    for seed, (n, k, m) in enumerate([(4, 2, 6), (6, 3, 20), (8, 3, 34), (10, 2, 15), (12, 3, 60)]):
        out.append(generate_instance(EnsembleParams(n=n, k=k, m=m, seed=seed)))
    return out


def test_spectrum_matches_bitmask_enumeration():
    for inst in instances() + [generate_instance(EnsembleParams(n=19, k=3, m=80, seed=4))]:
        direct = np.bincount(all_energies(inst), minlength=inst.m + 1)
        assert np.array_equal(energy_spectrum(inst), direct)


def test_empty_instance_partition():
    inst = generate_instance(EnsembleParams(n=7, k=3, m=0))
    assert partition_function(inst, 0.3).log_z == pytest.approx(7 * math.log(2), rel=1e-15)
    assert ground_energy(inst) == (0, 2**7)
    assert free_energy(inst, 2.0) == pytest.approx(-2.0 * 7 * math.log(2), rel=1e-15)
    assert thermal_average_energy(inst, 0.5) == 0.0


def test_two_configuration_partition():
    inst = KSatInstance.from_clauses(1, [[1]])
    assert partition_function(inst, 1.0).z == pytest.approx(1 + math.exp(-1), rel=1e-15)


def test_high_temperature_limit():
    for inst in instances():
        assert abs(partition_function(inst, 1e6).log_z - inst.n * math.log(2)) < 1e-3


def test_log_sum_exp_matches_direct_sum():
    for inst in instances():
        e = all_energies(inst).astype(float)
        for T in (0.2, 1.0, 3.0):
            direct = np.sum(np.exp(-e / T))
            assert partition_function(inst, T).z == pytest.approx(direct, rel=1e-12)


def test_ground_energy_examples():
    assert ground_energy(CONTRADICTION) == (1, 2)
    inst = generate_instance(EnsembleParams(n=12, k=3, m=60, seed=3))
    e0, deg = ground_energy(inst)
    assert e0 == max_sat_optimum(inst, method="exhaustive")
    assert e0 == max_sat_optimum(inst, method="branch-and-bound")
    assert (e0 == 0) == dpll_solve(inst).satisfiable
    assert deg == int(np.sum(all_energies(inst) == e0))


def test_free_energy_on_contradiction():
    # Z = 2 exp(-1/T), so F = 1 - T ln 2
    for i in range(11):
        T = 2.0**-i
        assert free_energy(CONTRADICTION, T) == pytest.approx(1 - T * math.log(2), rel=1e-13, abs=1e-15)
        assert 1 - T * math.log(2) <= free_energy(CONTRADICTION, T) + 1e-15 <= 1 + 1e-15


def test_free_energy_bounds_and_monotonicity():
    temps = np.geomspace(1e-3, 50, 40)
    for inst in instances():
        e0, _ = ground_energy(inst)
        log_z = [partition_function(inst, T).log_z for T in temps]
        assert all(b >= a - 1e-12 for a, b in zip(log_z, log_z[1:]))
        for T in temps:
            F = free_energy(inst, T)
            assert e0 - T * inst.n * math.log(2) - 1e-9 <= F <= e0 + 1e-9
            if e0 == 0:
                assert abs(F) <= T * inst.n * math.log(2) + 1e-12


def test_thermal_average_limits():
    single = KSatInstance.from_clauses(1, [[1]])
    assert thermal_average_energy(single, 1e9) == pytest.approx(0.5, abs=1e-8)
    for inst in instances():
        e0, _ = ground_energy(inst)
        for T in (0.05, 0.1, 0.2):
            assert abs(thermal_average_energy(inst, T) - e0) <= math.exp(-1 / T) * inst.m * 2**inst.n
        values = [thermal_average_energy(inst, T) for T in (0.1, 0.3, 1.0, 3.0, 10.0)]
        assert all(e0 - 1e-12 <= v <= inst.m for v in values)
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_thermal_average_is_the_beta_derivative_of_log_z():
    h = 1e-4
    for inst in instances():
        for T in (0.4, 1.0, 2.5):
            beta = 1 / T
            up = partition_function(inst, 1 / (beta + h)).log_z
            down = partition_function(inst, 1 / (beta - h)).log_z
            assert abs(-(up - down) / (2 * h) - thermal_average_energy(inst, T)) < 1e-6


def test_capacity_error():
    inst = generate_instance(EnsembleParams(n=25, k=3, m=2, seed=0))
    with pytest.raises(CapacityError):
        partition_function(inst, 1.0)
    with pytest.raises(CapacityError):
        energy_spectrum(generate_instance(EnsembleParams(n=10, k=3, m=2)), max_n=8)


def test_disorder_average_of_empty_ensemble():
    avg = disorder_average("log_z", EnsembleParams(n=9, k=3, m=0, T=0.7, seed=3), samples=5)
    assert avg.mean == pytest.approx(9 * math.log(2), rel=1e-15)
    assert avg.std_error == 0.0


def test_ground_density_low_and_high_alpha():
    low = disorder_average("ground_energy_density", EnsembleParams(n=15, k=3, alpha=0.1, seed=1), samples=200)
    assert low.mean == 0.0 and low.flagged == 0
    high = disorder_average("ground_energy_density", EnsembleParams(n=15, k=3, alpha=8, seed=1), samples=30)
    assert high.mean > 0


def test_disorder_average_independent_of_workers():
    params = EnsembleParams(n=8, k=3, alpha=3, T=0.5, seed=11)
    one = disorder_average("free_energy", params, samples=6, workers=1)
    two = disorder_average("free_energy", params, samples=6, workers=2)
    assert one == two
    with pytest.raises(ValueError):
        disorder_average("free_energy", params, samples=0)
    with pytest.raises(ValueError):
        disorder_average("entropy", params, samples=3)


def test_table_emission():
    inst = instances()[0]
    rows = thermo_table(inst, [0.5, 1.0])
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == "T,log_z,free_energy,thermal_energy"
    assert len(text.splitlines()) == 3
