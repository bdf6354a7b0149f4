"""Sparsity operating point: how many simultaneous requests the system must
tolerate, how hard to throttle request emission, and how many measurements
the compressed request channel needs.

The request count over one frame is binomial. A sparsity level S is adequate
when the binomial tail beyond it is below a target probability epsilon; when
the natural traffic is too dense, a per-frame request gate with probability
alpha forces the count back under S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError, InfeasibleDesignError
from .recovery import batched_recovery_errors

#: Default measurements-per-sparsity ratio for the heuristic sizing rule.
DEFAULT_RATIO_C = 5.0


def tail_prob(n: int, p: float, k: int) -> float:
    """Upper binomial tail P(X >= k) for X ~ Binomial(n, p).

    Summed in log space (gammaln + logsumexp) so that far tails at large n
    keep full relative accuracy. Requires 0 <= p <= 1 and 0 <= k <= n.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must be in [0, 1], got {p}")
    if not 0 <= k <= n:
        raise DomainError(f"k must be in [0, n], got k={k}, n={n}")
    if k == 0:
        return 1.0
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    j = np.arange(k, n + 1)
    log_terms = (
        gammaln(n + 1)
        - gammaln(j + 1)
        - gammaln(n - j + 1)
        + j * math.log(p)
        + (n - j) * math.log1p(-p)
    )
    return float(min(1.0, math.exp(logsumexp(log_terms))))


def _tail_at_most_n(n: int, p: float, k: int) -> float:
    # internal helper so callers may probe k = n + 1 (empty sum)
    if k > n:
        return 0.0
    return tail_prob(n, p, k)


def min_sparsity_level(n: int, p: float, epsilon: float) -> int:
    """Smallest sparsity level S that frame request counts respect.

    Returns the smallest S >= 1 with P(X >= S) <= epsilon, or 0 when even a
    single request is already rarer than epsilon (in particular at p = 0).
    A feasible level always exists since the tail vanishes beyond n.
    """
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must be in (0, 1), got {epsilon}")
    if _tail_at_most_n(n, p, 1) <= epsilon:
        return 0
    for s in range(1, n + 1):
        if tail_prob(n, p, s) <= epsilon:
            return s
    return n


def max_request_prob(
    n: int, sparsity: int, epsilon: float, grid: int = 101
) -> float:
    """Largest request gate probability alpha keeping the system sparse.

    Feasibility means P(X >= sparsity + 1) <= epsilon at X ~ Binomial(n,
    alpha), the worst case where every transmitter holds data. The tail is
    nondecreasing in alpha, so the boundary found on a uniform grid of
    ``grid`` points is refined by bisection to 1e-6. Returns 0 when only
    alpha = 0 is feasible and 1 when the constraint never binds.
    """
    if grid < 2:
        raise DomainError(f"grid must be >= 2, got {grid}")
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must be in (0, 1), got {epsilon}")

    def feasible(alpha: float) -> bool:
        return _tail_at_most_n(n, alpha, sparsity + 1) <= epsilon

    if feasible(1.0):
        return 1.0
    alphas = np.linspace(0.0, 1.0, grid)
    lo = 0.0
    hi = 1.0
    for i in range(grid - 1, -1, -1):
        if feasible(alphas[i]):
            lo = float(alphas[i])
            hi = float(alphas[i + 1]) if i + 1 < grid else 1.0
            break
    else:
        return 0.0
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class MeasurementCalibration:
    """Result of the Monte Carlo measurement-count search.

    ``saturated`` marks searches that failed to meet the target error rate
    even with as many measurements as users.
    """

    n_measurements: int
    saturated: bool
    failure_rate: float


def calibrate_measurements(
    sparsity: int,
    n_users: int,
    target_fail: float = 1e-3,
    trials: int = 10_000,
    constellation_max: int = 10,
    seed: int = 0,
) -> MeasurementCalibration:
    """Smallest measurement count whose empirical recovery failure is low.

    Per-element failure of quantized OMP is the fraction of mismatched
    entries over ``trials`` noiseless instances with exactly ``sparsity``
    nonzeros, counted over all n_users entries. Binary search over M in
    [sparsity + 1, n_users] exploits that the failure rate is statistically
    nonincreasing in M. If even M = n_users misses the target, returns
    n_users with the ``saturated`` flag set.
    """

    def failure(m: int) -> float:
        errors = batched_recovery_errors(
            n_users,
            m,
            sparsity,
            trials,
            seed=seed,
            constellation_max=constellation_max,
        )
        return errors / (trials * n_users)

    lo, hi = sparsity + 1, n_users
    fail_hi = failure(hi)
    if fail_hi > target_fail:
        return MeasurementCalibration(n_users, True, fail_hi)
    best_m, best_fail = hi, fail_hi
    while lo < hi:
        mid = (lo + hi) // 2
        f = failure(mid)
        if f <= target_fail:
            best_m, best_fail = mid, f
            hi = mid
        else:
            lo = mid + 1
    return MeasurementCalibration(best_m, False, best_fail)


def measurements_for_sparsity(
    sparsity: int,
    mode: str = "heuristic",
    c: float = DEFAULT_RATIO_C,
    n_users: int | None = None,
    target_fail: float = 1e-3,
    trials: int = 10_000,
    constellation_max: int = 10,
    seed: int = 0,
) -> int:
    """Measurement count for a sparsity level.

    ``mode="heuristic"`` returns ceil(c * S) (default c = 5); the empirical
    proportionality constant for reliable greedy recovery sits near there.
    ``mode="monte_carlo"`` runs :func:`calibrate_measurements` and returns
    its count (equal to n_users when the search saturates).
    """
    if sparsity < 1:
        raise DomainError(f"sparsity must be >= 1, got {sparsity}")
    if mode == "heuristic":
        return math.ceil(c * sparsity)
    if mode == "monte_carlo":
        if n_users is None:
            raise DomainError("monte_carlo mode requires n_users")
        cal = calibrate_measurements(
            sparsity,
            n_users,
            target_fail=target_fail,
            trials=trials,
            constellation_max=constellation_max,
            seed=seed,
        )
        return cal.n_measurements
    raise DomainError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class SparsityDesign:
    """A chosen (alpha, S, M) operating point.

    ``sparsity_prob`` is the per-user emission probability the feasibility
    check was run against: the nonempty-queue probability for naturally
    sparse systems (where alpha = 1) and alpha itself for gated systems.
    """

    n_users: int
    sparsity_level: int
    request_prob: float
    epsilon: float
    n_measurements: int
    sparsity_prob: float

    @property
    def ratio_c(self) -> float:
        return self.n_measurements / self.sparsity_level

    def __post_init__(self):
        if not self.sparsity_level < self.n_measurements <= self.n_users:
            raise InfeasibleDesignError(
                f"need S < M <= N, got S={self.sparsity_level}, "
                f"M={self.n_measurements}, N={self.n_users}"
            )
        tail = _tail_at_most_n(
            self.n_users, self.sparsity_prob, self.sparsity_level + 1
        )
        if tail > self.epsilon:
            raise InfeasibleDesignError(
                f"request tail {tail:.3e} exceeds epsilon {self.epsilon:.3e}"
            )


def design_operating_point(
    cfg,
    nonempty_prob: float | None = None,
    ratio_c: float = DEFAULT_RATIO_C,
) -> SparsityDesign:
    """Pick (alpha, S, M) for a system configuration.

    Uses the probability that a queue holds data (``nonempty_prob``,
    defaulting to the per-frame arrival probability) as the natural traffic
    intensity p. If the natural sparsity level is cheap to observe
    (heuristic M below N/2, the break-even point against one orthogonal
    signal per user), every loaded node may request each frame (alpha = 1).
    Otherwise candidate sparsity levels are swept and the design with the
    largest expected served load alpha * N subject to M < N/2 wins. Raises
    InfeasibleDesignError when no level is usefully sparse.
    """
    n = cfg.n_users
    eps = cfg.epsilon
    p = cfg.arrival_rate if nonempty_prob is None else nonempty_prob
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"traffic probability must be in [0, 1], got {p}")

    if p == 0.0:
        # degenerate empty system: keep the protocol machinery alive
        m = measurements_for_sparsity(1, "heuristic", c=ratio_c)
        return SparsityDesign(n, 1, 1.0, eps, m, 0.0)

    s_nat = max(min_sparsity_level(n, p, eps), 1)
    m_nat = measurements_for_sparsity(s_nat, "heuristic", c=ratio_c)
    if m_nat < n / 2:
        return SparsityDesign(n, s_nat, 1.0, eps, m_nat, p)

    best = None
    for s in range(1, n + 1):
        m = measurements_for_sparsity(s, "heuristic", c=ratio_c)
        if m >= n / 2:
            break
        alpha = max_request_prob(n, s, eps)
        if best is None or alpha * n > best[0]:
            best = (alpha * n, s, alpha, m)
    if best is None:
        raise InfeasibleDesignError(
            f"no sparsity level has M < N/2 at N={n}; the system cannot be "
            "made usefully sparse"
        )
    _, s, alpha, m = best
    return SparsityDesign(n, s, alpha, eps, m, alpha)
