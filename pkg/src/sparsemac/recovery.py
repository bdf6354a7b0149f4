"""Compressed request channel: measurement matrices, noisy projections, and
sparse recovery of quantized buffer-state vectors.

Buffer states are integer vectors of length ``n_users`` with entries in
``{0, ..., constellation_max}``. A request round projects the state vector
through an M x N code matrix (one column per transmitter) and the receiver
recovers it from the M-dimensional measurement with orthogonal matching
pursuit, or by exhaustive search on desk-scale instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionError, DomainError

#: Default number of packets representable by one request symbol.
DEFAULT_CONSTELLATION_MAX = 10


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def support_size(x: np.ndarray) -> int:
    """Number of nonzero entries of a buffer-state vector."""
    return int(np.count_nonzero(x))


@dataclass(frozen=True)
class MeasurementModel:
    """An M x N signature-code matrix plus channel parameters.

    Entries are +-1/sqrt(M) so every column has unit Euclidean norm.

    Attributes:
        n_users: Number of transmitters N (columns).
        n_measurements: Number of observations M (rows), M <= N.
        matrix: The M x N code matrix.
        noise_std: Standard deviation of the additive noise per measurement.
        constellation_max: Largest integer a state entry can take (L).
    """

    n_users: int
    n_measurements: int
    matrix: np.ndarray
    noise_std: float = 0.0
    constellation_max: int = DEFAULT_CONSTELLATION_MAX

    def __post_init__(self):
        m, n = self.n_measurements, self.n_users
        if self.matrix.shape != (m, n):
            raise DimensionError(
                f"matrix shape {self.matrix.shape} != ({m}, {n})"
            )
        if m > n:
            raise DimensionError(f"n_measurements {m} exceeds n_users {n}")
        if self.noise_std < 0:
            raise DomainError(f"noise_std must be >= 0, got {self.noise_std}")
        mag = 1.0 / np.sqrt(m)
        if not np.all(np.isclose(np.abs(self.matrix), mag, atol=1e-12)):
            raise DimensionError("matrix entries must all be +-1/sqrt(M)")
        norms = np.linalg.norm(self.matrix, axis=0)
        if not np.all(np.abs(norms - 1.0) <= 1e-12):
            raise DimensionError("matrix columns must have unit norm")


@dataclass(frozen=True)
class RecoveryConfig:
    """Stopping rule and quantization switch for OMP.

    Exactly one of ``max_support`` (stop after that many selected columns)
    or ``residual_bound`` (stop once the residual 2-norm drops to the bound)
    must be given. With ``quantize`` the recovered coefficients are rounded
    to the nearest point of {0, ..., L} and zeros leave the support.
    """

    max_support: int | None = None
    residual_bound: float | None = None
    quantize: bool = True

    def __post_init__(self):
        if (self.max_support is None) == (self.residual_bound is None):
            raise ValueError("give exactly one of max_support or residual_bound")
        if self.max_support is not None and self.max_support < 1:
            raise ValueError("max_support must be >= 1")
        if self.residual_bound is not None and self.residual_bound < 0:
            raise ValueError("residual_bound must be >= 0")


def generate_matrix(
    n_users: int,
    n_measurements: int,
    seed,
    noise_std: float = 0.0,
    constellation_max: int = DEFAULT_CONSTELLATION_MAX,
) -> MeasurementModel:
    """Draw a symmetric-Bernoulli code matrix, i.i.d. entries +-1/sqrt(M).

    Deterministic for a fixed seed. Raises DimensionError unless
    1 <= n_measurements <= n_users.
    """
    if not (1 <= n_measurements <= n_users):
        raise DimensionError(
            f"need 1 <= M <= N, got M={n_measurements}, N={n_users}"
        )
    rng = _as_rng(seed)
    signs = rng.integers(0, 2, size=(n_measurements, n_users)) * 2 - 1
    matrix = signs / np.sqrt(n_measurements)
    return MeasurementModel(
        n_users=n_users,
        n_measurements=n_measurements,
        matrix=matrix,
        noise_std=noise_std,
        constellation_max=constellation_max,
    )


def measure(model: MeasurementModel, x: np.ndarray, seed) -> np.ndarray:
    """Project a state vector through the code matrix and add channel noise.

    Returns A @ x + z with z ~ N(0, noise_std^2) i.i.d.; deterministic per
    seed. Raises DimensionError on length mismatch.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_users,):
        raise DimensionError(
            f"state vector length {x.shape} != n_users {model.n_users}"
        )
    y = model.matrix @ x
    if model.noise_std > 0:
        rng = _as_rng(seed)
        y = y + model.noise_std * rng.standard_normal(model.n_measurements)
    return y


def omp_recover(
    model: MeasurementModel, y: np.ndarray, cfg: RecoveryConfig
) -> np.ndarray:
    """Orthogonal matching pursuit on one measurement vector.

    Each iteration selects the column most correlated with the residual,
    solves least squares on the selected support (normal equations with a
    1e-12 ridge against near-collinear columns), and updates the residual.
    Always returns a length-N vector; under excessive sparsity or noise the
    result may simply be wrong, which is the caller's problem.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (model.n_measurements,):
        raise DimensionError(
            f"measurement length {y.shape} != n_measurements {model.n_measurements}"
        )
    A = model.matrix
    m, n = A.shape
    if cfg.max_support is not None:
        max_iter = min(cfg.max_support, m)
    else:
        max_iter = m
    residual = y.copy()
    y_norm = np.linalg.norm(y)
    support: list[int] = []
    coef = np.zeros(0)
    for _ in range(max_iter):
        if cfg.residual_bound is not None and (
            np.linalg.norm(residual) <= cfg.residual_bound
        ):
            break
        if np.linalg.norm(residual) <= 1e-12 * max(y_norm, 1e-300):
            break
        corr = np.abs(A.T @ residual)
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        As = A[:, support]
        gram = As.T @ As + 1e-12 * np.eye(len(support))
        coef = np.linalg.solve(gram, As.T @ y)
        residual = y - As @ coef
    xhat = np.zeros(n)
    if support:
        xhat[support] = coef
    if cfg.quantize:
        xhat = np.clip(np.rint(xhat), 0, model.constellation_max)
    return xhat


def brute_force_l0(
    model: MeasurementModel, y: np.ndarray, max_support: int
) -> np.ndarray:
    """Exhaustive minimum-residual search over all small supports.

    Scans every support of size <= max_support and every assignment of
    constellation values {1, ..., L} on it, returning the vector with the
    smallest ||y - A x||_2, preferring smaller supports among ties. Guarded
    to N <= 16 and max_support <= 3; anything larger raises CapacityError.
    """
    y = np.asarray(y, dtype=float)
    A = model.matrix
    n = model.n_users
    L = model.constellation_max
    if n > 16 or max_support > 3:
        raise CapacityError(
            f"brute force limited to N <= 16 and max_support <= 3, "
            f"got N={n}, max_support={max_support}"
        )
    if y.shape != (model.n_measurements,):
        raise DimensionError("measurement length mismatch")

    best_x = np.zeros(n)
    best_res = np.linalg.norm(y)
    for size in range(1, max_support + 1):
        # all value assignments for this support size, one row per combo
        values = np.array(
            list(itertools.product(range(1, L + 1), repeat=size)), dtype=float
        )
        for combo in itertools.combinations(range(n), size):
            # residuals for every value assignment at once
            proj = A[:, combo] @ values.T
            res = np.linalg.norm(y[:, None] - proj, axis=0)
            i = int(np.argmin(res))
            # strict improvement keeps the smallest support among ties
            if res[i] < best_res - 1e-12:
                best_res = res[i]
                best_x = np.zeros(n)
                best_x[list(combo)] = values[i]
    return best_x


def batched_recovery_errors(
    n_users: int,
    n_measurements: int,
    sparsity: int,
    trials: int,
    seed,
    constellation_max: int = DEFAULT_CONSTELLATION_MAX,
    support_sizes: str = "exact",
    batch: int = 2000,
) -> int:
    """Count mismatched entries of quantized OMP over noiseless random trials.

    Vectorized Monte Carlo engine shared by the measurement calibration and
    the recovery test suite. Each batch draws a fresh code matrix; each trial
    draws a random support (size exactly ``sparsity``, or uniform in
    ``1..sparsity`` with ``support_sizes="uniform"``) with values uniform in
    {1, ..., L}, measures noiselessly, and runs ``sparsity`` OMP iterations
    with end quantization. Returns the total number of entries where the
    recovered vector differs from the truth, summed over all trials.
    """
    if not (1 <= sparsity < n_measurements <= n_users):
        raise DimensionError(
            f"need 1 <= S < M <= N, got S={sparsity}, M={n_measurements}, N={n_users}"
        )
    ss = np.random.SeedSequence(
        entropy=seed, spawn_key=(n_users, n_measurements, sparsity)
    )
    L = constellation_max
    mismatches = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        rng = np.random.default_rng(ss.spawn(1)[0])
        signs = rng.integers(0, 2, size=(n_measurements, n_users)) * 2 - 1
        A = signs / np.sqrt(n_measurements)
        ATA = A.T @ A

        X = np.zeros((n_users, b))
        if support_sizes == "uniform":
            sizes = rng.integers(1, sparsity + 1, size=b)
        else:
            sizes = np.full(b, sparsity)
        perm = np.argsort(rng.random((b, n_users)), axis=1)
        for t in range(b):
            sup = perm[t, : sizes[t]]
            X[sup, t] = rng.integers(1, L + 1, size=sizes[t])

        Y = A @ X
        ATy = A.T @ Y
        cols = np.arange(b)
        sel = np.zeros((sparsity, b), dtype=int)
        taken = np.zeros((n_users, b), dtype=bool)
        residual = Y.copy()
        coef = np.zeros((b, sparsity))
        for it in range(sparsity):
            corr = np.abs(A.T @ residual)
            corr[taken] = -1.0
            idx = np.argmax(corr, axis=0)
            sel[it] = idx
            taken[idx, cols] = True
            sup = sel[: it + 1]
            gram = np.moveaxis(ATA[sup[:, None, :], sup[None, :, :]], 2, 0)
            gram = gram + 1e-12 * np.eye(it + 1)
            rhs = ATy[sup, cols].T[..., None]
            c = np.linalg.solve(gram, rhs)[..., 0]
            Xhat = np.zeros((n_users, b))
            Xhat[sup, cols] = c.T
            residual = Y - A @ Xhat
            coef[:, : it + 1] = c
        Xq = np.zeros((n_users, b))
        Xq[sel, cols] = np.clip(np.rint(coef.T), 0, L)
        mismatches += int(np.sum(Xq != X))
        done += b
    return mismatches
