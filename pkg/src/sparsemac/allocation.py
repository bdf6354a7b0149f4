"""Continuous-time transmission scheduling that minimizes total transmit
power over one frame.

Each frame owner k must move ``bits[k]`` bits through a shared band of
``bandwidth`` Hz within a common data window of ``data_time`` seconds. With
a_k = bits[k] / bandwidth, giving owner k a slice T_k costs spectral power
P_k = kappa * (2**(a_k / T_k) - 1), so the problem

    minimize sum_k kappa * (2**(a_k / T_k) - 1)  s.t.  sum_k T_k = data_time

is convex and separable. ``solve_exact`` solves its KKT system to tolerance;
``solve_closed_form`` is the square-root-proportional approximation that
splits the window as T_k ~ sqrt(bits[k]), which is also an upper bound on
the optimal power, with a matching virtual-single-buffer lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SaturationError

LN2 = float(np.log(2.0))

#: Exponent cap; beyond this 2**x would overflow or be physically absurd.
EXPONENT_CAP = 1024.0


def pow2m1(exponent):
    """2**exponent - 1 with an explicit overflow guard.

    Uses expm1 so values stay accurate down to exponents near 0. Raises
    SaturationError once any exponent passes the cap instead of silently
    returning inf.
    """
    e = np.asarray(exponent, dtype=float)
    if np.any(e > EXPONENT_CAP):
        raise SaturationError(
            f"power exponent {float(np.max(e)):.3g} exceeds cap {EXPONENT_CAP:g}"
        )
    out = np.expm1(LN2 * e)
    return float(out) if np.isscalar(exponent) else out


@dataclass(frozen=True)
class AllocationProblem:
    """One frame's power-minimization instance.

    bits must be strictly positive; owners with empty detected buffers are
    filtered out before the problem is built.
    """

    bits: np.ndarray
    bandwidth: float
    data_time: float
    noise_psd: float

    def __post_init__(self):
        object.__setattr__(
            self, "bits", np.atleast_1d(np.asarray(self.bits, dtype=float))
        )
        if self.data_time <= 0:
            raise DomainError(f"data_time must be > 0, got {self.data_time}")
        if self.bandwidth <= 0:
            raise DomainError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.noise_psd <= 0:
            raise DomainError(f"noise_psd must be > 0, got {self.noise_psd}")
        if self.bits.size == 0 or np.any(self.bits <= 0):
            raise DomainError("every bits entry must be > 0")

    @property
    def n_owners(self) -> int:
        return self.bits.size

    @property
    def bit_times(self) -> np.ndarray:
        """a_k = bits / bandwidth, the per-owner time-bandwidth load."""
        return self.bits / self.bandwidth


@dataclass(frozen=True)
class ContinuousAllocation:
    """Durations and spectral powers assigned to the frame owners."""

    durations: np.ndarray
    powers: np.ndarray
    total_power: float
    method: str
    nu: float | None = field(default=None, compare=False)


def _assemble(problem: AllocationProblem, durations: np.ndarray, method: str,
              nu: float | None = None) -> ContinuousAllocation:
    powers = problem.noise_psd * pow2m1(problem.bit_times / durations)
    return ContinuousAllocation(
        durations=durations,
        powers=powers,
        total_power=float(np.sum(powers)),
        method=method,
        nu=nu,
    )


def solve_closed_form(problem: AllocationProblem) -> ContinuousAllocation:
    """Split the window in proportion to the square roots of the buffers.

    T_k = T * sqrt(bits_k) / sum_j sqrt(bits_j). Exact for equal buffers and
    an upper bound on the optimal total power in general, tightening as the
    per-owner loads a_k shrink.
    """
    roots = np.sqrt(problem.bits)
    durations = problem.data_time * roots / np.sum(roots)
    return _assemble(problem, durations, "closed_form")


def power_upper_bound(problem: AllocationProblem) -> float:
    """Total power of the square-root split, directly from its formula.

    Equals ``solve_closed_form(problem).total_power`` to within rounding.
    """
    roots = np.sqrt(problem.bits)
    exponents = roots * np.sum(roots) / (problem.data_time * problem.bandwidth)
    return float(np.sum(problem.noise_psd * pow2m1(exponents)))


def power_lower_bound(
    total_bits: float, bandwidth: float, data_time: float, noise_psd: float
) -> float:
    """Power needed if all bits sat in one virtual buffer using the window.

    kappa * (2**(B / (W T)) - 1); pooling the bits can only help, so this
    lower-bounds the optimal total power of any per-owner split.
    """
    if total_bits < 0:
        raise DomainError(f"total_bits must be >= 0, got {total_bits}")
    if total_bits == 0:
        return 0.0
    return float(noise_psd * pow2m1(total_bits / (bandwidth * data_time)))


def _lambertw_exp(c: np.ndarray) -> np.ndarray:
    """Solve w + log(w) = c for w > 0, elementwise (equals W0(e**c)).

    Newton iteration; the left side is strictly increasing so the root is
    unique. Accurate over the full float range of c because e**c is never
    formed.
    """
    c = np.asarray(c, dtype=float)
    w = np.where(c > 1.0, c - np.log(np.maximum(c, 1.0)), np.exp(np.minimum(c, 1.0)))
    w = np.maximum(w, 1e-300)
    for _ in range(50):
        f = w + np.log(w) - c
        step = f * w / (w + 1.0)
        w_new = np.maximum(w - step, w * 1e-3)
        if np.all(np.abs(w_new - w) <= 1e-15 * np.maximum(w_new, 1e-300)):
            w = w_new
            break
        w = w_new
    return w


def _durations_at(log_nu: float, a: np.ndarray, kappa: float):
    """Per-owner stationary durations for a dual value nu = exp(log_nu).

    The stationarity condition kappa*ln2*a_k*2**(a_k/T_k) / T_k**2 = nu in
    u = a_k / T_k reads u**2 * 2**u = nu * a_k / (kappa * ln2); solved via
    the Lambert W function of its logarithm. Returns (T, u, dT/dlog_nu).
    """
    r = log_nu + np.log(a) - np.log(kappa * LN2)
    c = 0.5 * r - np.log(2.0 / LN2)
    w = _lambertw_exp(c)
    u = 2.0 * w / LN2
    t = a / u
    dt_dlog_nu = -a / (u * (u * LN2 + 2.0))
    return t, u, dt_dlog_nu


def solve_exact(problem: AllocationProblem, tol: float = 1e-8) -> ContinuousAllocation:
    """Solve the power minimization to its KKT conditions.

    The optimum uses the whole window (power falls as any T_k grows), so a
    single dual variable nu prices time: each owner's duration solves a
    scalar stationarity equation, monotone in nu, and nu itself is found by
    safeguarded Newton on sum_k T_k(nu) = data_time until the window
    mismatch is below tol * data_time. Durations are then normalized onto
    the window exactly.
    """
    if tol <= 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    a = problem.bit_times
    T = problem.data_time
    kappa = problem.noise_psd

    if problem.n_owners == 1 or np.all(a == a[0]):
        # symmetric problem: the optimum is the even split
        durations = np.full(problem.n_owners, T / problem.n_owners)
        alloc = _assemble(problem, durations, "exact")
        u = a[0] / durations[0]
        nu = float(kappa * LN2 * a[0] * (pow2m1(u) + 1.0) / durations[0] ** 2)
        return ContinuousAllocation(alloc.durations, alloc.powers,
                                    alloc.total_power, "exact", nu=nu)

    # bracket log_nu via the stationarity value at the extreme durations
    def log_g(t_k: np.ndarray) -> np.ndarray:
        u = a / t_k
        return np.log(kappa * LN2 * a) + u * LN2 - 2.0 * np.log(t_k)

    lo = float(np.min(log_g(np.full_like(a, T))))       # sum T_k(lo) >= T
    hi = float(np.max(log_g(np.full_like(a, T * 1e-9))))  # sum T_k(hi) << T

    # initial guess from the square-root split, clipped into the bracket
    t_cf = T * np.sqrt(a) / np.sum(np.sqrt(a))
    x = float(np.median(log_g(t_cf)))
    x = min(max(x, lo), hi)

    target = tol * T
    t = None
    for _ in range(200):
        t, u, dt = _durations_at(x, a, kappa)
        mismatch = float(np.sum(t)) - T
        if abs(mismatch) <= target:
            break
        if mismatch > 0:
            lo = x
        else:
            hi = x
        slope = float(np.sum(dt))
        x_newton = x - mismatch / slope if slope != 0 else x
        x = x_newton if lo < x_newton < hi else 0.5 * (lo + hi)

    durations = t * (T / float(np.sum(t)))
    return _assemble(problem, durations, "exact", nu=float(np.exp(x)))
