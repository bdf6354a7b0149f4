import numpy as np
import pytest

from sparsemac import (
    AllocationProblem,
    DomainError,
    SaturationError,
    power_lower_bound,
    power_upper_bound,
    solve_closed_form,
    solve_exact,
)
from sparsemac.allocation import LN2, pow2m1

KAPPA = 1e-9


def random_problem(rng, max_owners=8):
    # loads drawn so no reachable exponent can hit the saturation guard
    k = int(rng.integers(1, max_owners + 1))
    bandwidth = float(10.0 ** rng.uniform(3, 7))
    data_time = float(10.0 ** rng.uniform(-4, 0.3))
    total_load = float(10.0 ** rng.uniform(-2, 1.3))  # sum bits / (W T)
    shares = np.maximum(rng.dirichlet(np.ones(k)), 1e-6)
    shares /= shares.sum()
    return AllocationProblem(
        bits=shares * total_load * bandwidth * data_time,
        bandwidth=bandwidth,
        data_time=data_time,
        noise_psd=float(10.0 ** rng.uniform(-12, -3)),
    )


def kkt_residual(problem, alloc):
    a = problem.bit_times
    t = alloc.durations
    g = problem.noise_psd * LN2 * a * np.exp2(a / t) / t**2
    return float(np.max(np.abs(g - alloc.nu)) / alloc.nu)


# ------------------------------------------------------------- validation

def test_problem_validation():
    with pytest.raises(DomainError):
        AllocationProblem(np.array([1.0, 0.0]), 1e3, 1.0, 1e-9)
    with pytest.raises(DomainError):
        AllocationProblem(np.array([1.0]), 1e3, 0.0, 1e-9)
    with pytest.raises(DomainError):
        AllocationProblem(np.array([1.0]), -1.0, 1.0, 1e-9)


def test_exponent_guard():
    with pytest.raises(SaturationError):
        pow2m1(2000.0)
    p = AllocationProblem(np.array([1e9]), 1.0, 1e-6, 1e-9)  # a/T ~ 1e15
    with pytest.raises(SaturationError):
        solve_closed_form(p)


# ------------------------------------------------------------ closed form

def test_closed_form_sqrt_ratio():
    p = AllocationProblem(np.array([100.0, 400.0]), 1e3, 1.0, KAPPA)
    alloc = solve_closed_form(p)
    assert alloc.durations == pytest.approx([1 / 3, 2 / 3], rel=1e-12)
    assert np.sum(alloc.durations) == pytest.approx(1.0, abs=1e-12)


def test_closed_form_equal_bits_even_split():
    p = AllocationProblem(np.full(4, 250.0), 1e4, 2.0, KAPPA)
    alloc = solve_closed_form(p)
    assert alloc.durations == pytest.approx([0.5] * 4, rel=1e-12)


def test_closed_form_single_owner():
    p = AllocationProblem(np.array([123.0]), 1e4, 0.7, KAPPA)
    alloc = solve_closed_form(p)
    assert alloc.durations == pytest.approx([0.7], rel=1e-15)


def test_closed_form_scale_invariance():
    # scaling all bits by c^2 leaves the split unchanged
    rng = np.random.default_rng(0)
    bits = rng.uniform(1, 500, size=5)
    p1 = AllocationProblem(bits, 1e4, 1.0, KAPPA)
    p2 = AllocationProblem(bits * 9.0, 1e4, 1.0, KAPPA)
    assert solve_closed_form(p1).durations == pytest.approx(
        solve_closed_form(p2).durations, rel=1e-12
    )


def test_power_consistency_invariant():
    # each power entry reproduces kappa * (2**(a_k / T_k) - 1)
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = random_problem(rng)
        for alloc in (solve_closed_form(p), solve_exact(p)):
            expected = p.noise_psd * pow2m1(p.bit_times / alloc.durations)
            assert alloc.powers == pytest.approx(expected, rel=1e-9)
            assert alloc.total_power == pytest.approx(float(np.sum(expected)), rel=1e-12)


# ------------------------------------------------------------ exact solver

def test_exact_equal_bits_even_split():
    p = AllocationProblem(np.full(7, 40.0), 1e4, 0.35, KAPPA)
    alloc = solve_exact(p)
    assert alloc.durations == pytest.approx([0.05] * 7, rel=1e-12)


def test_exact_single_owner():
    p = AllocationProblem(np.array([500.0]), 1e4, 0.25, KAPPA)
    alloc = solve_exact(p)
    assert alloc.durations == pytest.approx([0.25], rel=1e-15)
    assert alloc.total_power == pytest.approx(KAPPA * (2 ** (500 / 1e4 / 0.25) - 1), rel=1e-12)


def test_exact_two_owner_grid_oracle():
    # oracle: 1e6-point scan of the scalar objective in T_1
    p = AllocationProblem(np.array([100.0, 400.0]), 1000.0, 0.5, KAPPA)
    t1 = np.linspace(1e-6, 0.5 - 1e-6, 1_000_000)
    a = p.bit_times
    with np.errstate(over="ignore"):  # near-zero slices overflow to inf, fine
        obj = KAPPA * (np.expm1(LN2 * a[0] / t1) + np.expm1(LN2 * a[1] / (0.5 - t1)))
    i = int(np.argmin(obj))
    alloc = solve_exact(p)
    assert alloc.durations[0] == pytest.approx(t1[i], abs=2 * (t1[1] - t1[0]))
    assert alloc.total_power == pytest.approx(float(obj[i]), rel=1e-6)
    # frozen from the grid search above
    assert alloc.durations[0] == pytest.approx(0.1491091, rel=1e-4)


def test_exact_kkt_residual():
    rng = np.random.default_rng(2)
    for _ in range(30):
        p = random_problem(rng)
        alloc = solve_exact(p)
        assert kkt_residual(p, alloc) <= 1e-6


def test_exact_duration_sum_and_positivity():
    rng = np.random.default_rng(3)
    for _ in range(30):
        p = random_problem(rng)
        alloc = solve_exact(p)
        assert np.all(alloc.durations > 0)
        assert float(np.sum(alloc.durations)) <= p.data_time + 1e-9
        assert float(np.sum(alloc.durations)) == pytest.approx(p.data_time, rel=1e-9)


def test_exact_permutation_equivariance():
    rng = np.random.default_rng(4)
    bits = rng.uniform(5, 800, size=6)
    perm = rng.permutation(6)
    p1 = AllocationProblem(bits, 1e4, 0.8, KAPPA)
    p2 = AllocationProblem(bits[perm], 1e4, 0.8, KAPPA)
    d1 = solve_exact(p1).durations
    d2 = solve_exact(p2).durations
    assert d2 == pytest.approx(d1[perm], rel=1e-9)
    c1 = solve_closed_form(p1).durations
    c2 = solve_closed_form(p2).durations
    assert c2 == pytest.approx(c1[perm], rel=1e-12)


def test_exact_monotone_in_bits():
    rng = np.random.default_rng(5)
    for _ in range(15):
        p = random_problem(rng, max_owners=6)
        if p.n_owners < 2:
            continue
        d = solve_exact(p).durations
        order_bits = np.argsort(p.bits)
        assert np.all(np.diff(d[order_bits]) >= -1e-12)


def test_tolerance_validation():
    p = AllocationProblem(np.array([10.0, 20.0]), 1e3, 1.0, KAPPA)
    with pytest.raises(DomainError):
        solve_exact(p, tol=0.0)


# ------------------------------------------------------------------ bounds

def test_bounds_sandwich():
    rng = np.random.default_rng(6)
    for _ in range(200):
        p = random_problem(rng)
        lower = power_lower_bound(float(np.sum(p.bits)), p.bandwidth, p.data_time, p.noise_psd)
        exact = solve_exact(p).total_power
        upper = power_upper_bound(p)
        closed = solve_closed_form(p).total_power
        assert lower <= exact * (1 + 1e-9)
        assert exact <= upper * (1 + 1e-9)
        assert upper == pytest.approx(closed, rel=1e-9)


def test_lower_bound_values():
    assert power_lower_bound(0.0, 1e3, 1.0, KAPPA) == 0.0
    # B = W*T puts the exponent at exactly 1
    assert power_lower_bound(1e3, 1e3, 1.0, KAPPA) == pytest.approx(KAPPA, rel=1e-12)


def test_lower_bound_two_equal_owners_identity():
    # equal buffers: pooled-buffer power is exactly half the split power
    for b in (50.0, 100.0, 777.0):
        p = AllocationProblem(np.array([b, b]), 1e4, 1e-2, KAPPA)
        closed = solve_closed_form(p).total_power
        lower = power_lower_bound(2 * b, 1e4, 1e-2, KAPPA)
        assert lower == pytest.approx(0.5 * closed, rel=1e-12)


def test_upper_bound_single_owner():
    p = AllocationProblem(np.array([321.0]), 1e4, 0.5, KAPPA)
    assert power_upper_bound(p) == pytest.approx(
        KAPPA * (2 ** (321.0 / (1e4 * 0.5)) - 1), rel=1e-12
    )


def test_upper_bound_full_queues_formula():
    # K full queues of capacity_bits each: K * kappa * (2**(K*C/(TW)) - 1)
    capacity_bits = 1000.0
    for k in (2, 5, 9):
        p = AllocationProblem(np.full(k, capacity_bits), 5e6, 1e-3, KAPPA)
        expected = k * KAPPA * (2 ** (k * capacity_bits / (1e-3 * 5e6)) - 1)
        assert power_upper_bound(p) == pytest.approx(expected, rel=1e-12)


def test_closed_form_gap_shrinks_with_load():
    # the sqrt split approaches the optimum as the per-owner load shrinks
    rng = np.random.default_rng(7)
    bits = rng.uniform(100, 2000, size=5)
    gaps = []
    for scale in (1.0, 0.1, 0.01):
        p = AllocationProblem(bits * scale, 1e4, 1.0, KAPPA)
        exact = solve_exact(p).total_power
        approx = solve_closed_form(p).total_power
        gaps.append((approx - exact) / exact)
    assert gaps[1] < gaps[0]
    assert gaps[2] < gaps[1]
