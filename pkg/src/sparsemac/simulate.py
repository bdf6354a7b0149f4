"""Frame-by-frame network simulation.

Each frame: loaded nodes announce their buffer states through the request
channel (gated by the design's request probability), the destination
recovers the states, grants transmission resources under the configured
scheme, granted owners push whole packets, queues are updated, and new
packets arrive. Two reference schemes bypass the request channel: a fixed
assignment that pre-slices the frame evenly across all nodes, and per-user
signaling that spends one symbol per node on announcing states.

Power bookkeeping is spectral (Watts/Hz); delivered bits never exceed what
a queue actually held.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .allocation import AllocationProblem, pow2m1, solve_closed_form, solve_exact
from .design import SparsityDesign, design_operating_point
from .errors import DomainError
from .recovery import (
    MeasurementModel,
    RecoveryConfig,
    generate_matrix,
    measure,
    omp_recover,
    support_size,
)
from .slots import SlottedPlan, plan_power_saving, plan_throughput, slotted_power

SCHEMES = (
    "unslotted_exact",
    "unslotted_closed_form",
    "slotted_throughput",
    "slotted_power_saving",
    "fixed_assignment",
    "per_user_signaling",
)

DUPLEX_MODES = ("half", "full")
DETECTION_MODES = ("idealized", "physical")


@dataclass(frozen=True)
class SystemConfig:
    """Static parameters of one simulated network."""

    n_users: int = 400
    bandwidth: float = 5e6
    frame_duration: float = 1e-3
    noise_psd: float = 1e-9
    buffer_capacity: int = 10
    packet_bits: int = 100
    arrival_rate: float = 0.01
    epsilon: float = 1e-4
    n_slots: int = 20
    duplex: str = "half"
    scheme: str = "unslotted_exact"
    detection: str = "idealized"
    request_noise_std: float = 0.01
    self_interference_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        positive = (
            "n_users", "bandwidth", "frame_duration", "noise_psd",
            "buffer_capacity", "packet_bits", "n_slots",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("arrival_rate", "epsilon"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise DomainError(
                    f"{name} must be in [0, 1], got {getattr(self, name)}"
                )
        if self.request_noise_std < 0 or self.self_interference_std < 0:
            raise DomainError("noise spreads must be >= 0")
        if self.duplex not in DUPLEX_MODES:
            raise DomainError(f"duplex must be one of {DUPLEX_MODES}")
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}")
        if self.detection not in DETECTION_MODES:
            raise DomainError(f"detection must be one of {DETECTION_MODES}")


@dataclass
class QueueState:
    """Per-user queue occupancies in packets, each within [0, capacity]."""

    occupancy: np.ndarray

    def __post_init__(self):
        self.occupancy = np.asarray(self.occupancy, dtype=np.int64)

    @classmethod
    def empty(cls, n_users: int) -> "QueueState":
        return cls(np.zeros(n_users, dtype=np.int64))


@dataclass(frozen=True)
class FrameReport:
    frame_index: int
    owners: int
    served: int
    delivered_bits: float
    total_power: float
    data_time: float
    overhead_time: float
    detection_errors: int
    dropped_packets: int
    arrived_packets: int


@dataclass(frozen=True)
class MetricsSummary:
    """Aggregates over a scenario run; ratio metrics are ratios of sums."""

    n_frames: int
    avg_total_power: float
    bits_per_watt: float
    bits_per_second: float
    drop_rate: float
    detection_error_rate: float
    delivered_bits: float
    dropped_packets: int
    avg_owners: float
    avg_served: float


def step_arrivals(state: QueueState, cfg: SystemConfig, rng) -> tuple[QueueState, int]:
    """Independent single-packet arrivals, clipped at the buffer capacity.

    Returns the new state and the number of packets dropped to overflow.
    """
    hits = rng.random(cfg.n_users) < cfg.arrival_rate
    occ = state.occupancy + hits
    dropped = int(np.sum(occ > cfg.buffer_capacity))
    return QueueState(np.minimum(occ, cfg.buffer_capacity)), dropped


def emit_requests(state: QueueState, design: SparsityDesign, rng) -> np.ndarray:
    """Buffer states announced this frame.

    A loaded node announces its occupancy when its request gate (independent
    Bernoulli with the design's request probability) passes; gated-out nodes
    stay silent and keep their packets queued.
    """
    gate = rng.random(state.occupancy.size) < design.request_prob
    return np.where(gate, state.occupancy, 0).astype(np.int64)


def detect_requests(
    x: np.ndarray,
    design: SparsityDesign,
    cfg: SystemConfig,
    rng,
    model: MeasurementModel | None = None,
) -> tuple[np.ndarray, int]:
    """Destination's view of the announced states plus an error count.

    Idealized mode returns the input when it fits the design's sparsity
    level; an overloaded frame keeps only the level's worth of largest
    entries (ties to the lower id) and counts the rest as errors. Physical
    mode runs the measured channel and OMP with quantization; errors count
    every entry where the recovered vector disagrees.
    """
    s = design.sparsity_level
    if cfg.detection == "idealized":
        k = support_size(x)
        if k <= s:
            return x.copy(), 0
        order = np.lexsort((np.arange(x.size), -x))
        keep = order[:s]
        xhat = np.zeros_like(x)
        xhat[keep] = x[keep]
        return xhat, k - s
    if model is None:
        model = generate_matrix(
            cfg.n_users,
            design.n_measurements,
            np.random.default_rng(cfg.seed),
            noise_std=cfg.request_noise_std,
            constellation_max=cfg.buffer_capacity,
        )
    y = measure(model, x, rng)
    xhat = omp_recover(model, y, RecoveryConfig(max_support=s, quantize=True))
    xhat = xhat.astype(np.int64)
    return xhat, int(np.sum(xhat != x))


def _owner_feedback_time(cfg: SystemConfig, n_owners: int) -> float:
    # grant feedback: ID announcement plus duration broadcast per owner
    if cfg.duplex == "full":
        return 0.0
    return 2.0 * n_owners / cfg.bandwidth


def _unslotted_frame(cfg, design, x, xhat, frame_index):
    owner_ids = np.flatnonzero(xhat)
    n_owners = owner_ids.size
    overhead = design.n_measurements / cfg.bandwidth + _owner_feedback_time(cfg, n_owners)
    data_time = cfg.frame_duration - overhead
    if n_owners == 0 or data_time <= 0:
        return (
            np.zeros_like(x),
            FrameReport(frame_index, n_owners, 0, 0.0, 0.0,
                        max(data_time, 0.0), min(overhead, cfg.frame_duration),
                        0, 0, 0),
        )
    bits_hat = cfg.packet_bits * xhat[owner_ids].astype(float)
    problem = AllocationProblem(bits_hat, cfg.bandwidth, data_time, cfg.noise_psd)
    if cfg.scheme == "unslotted_exact":
        alloc = solve_exact(problem)
    else:
        alloc = solve_closed_form(problem)
    served = np.zeros_like(x)
    served[owner_ids] = np.minimum(x[owner_ids], xhat[owner_ids])
    report = FrameReport(
        frame_index, n_owners, n_owners,
        float(cfg.packet_bits * served.sum()),
        alloc.total_power, data_time, overhead, 0, 0, 0,
    )
    return served, report


def _slotted_frame(cfg, design, x, xhat, frame_index):
    owner_ids = np.flatnonzero(xhat)
    owners = [(int(i), float(cfg.packet_bits * xhat[i])) for i in owner_ids]
    planner = (
        plan_throughput
        if cfg.scheme == "slotted_throughput"
        else plan_power_saving
    )
    plan = planner(owners, cfg.n_slots, design.n_measurements,
                   cfg.bandwidth, cfg.frame_duration, duplex=cfg.duplex)
    served = np.zeros_like(x)
    power = 0.0
    if not plan.degenerate:
        for oid, n_k in zip(plan.served_ids, plan.slots_per_owner):
            power += slotted_power(
                cfg.packet_bits * float(xhat[oid]), n_k, plan.slot_duration,
                cfg.bandwidth, cfg.noise_psd,
            )
            served[oid] = min(x[oid], xhat[oid])
    data_time = plan.n_slots * plan.slot_duration
    report = FrameReport(
        frame_index, owner_ids.size, plan.n_served,
        float(cfg.packet_bits * served.sum()),
        power, data_time, plan.overhead_time, 0, 0, 0,
    )
    return served, report


def run_frame(
    state: QueueState,
    cfg: SystemConfig,
    design: SparsityDesign,
    rng_gate,
    rng_arrivals,
    rng_noise=None,
    model: MeasurementModel | None = None,
    frame_index: int = 0,
) -> tuple[QueueState, FrameReport]:
    """One frame of the request-channel schemes.

    Pipeline: emit, detect, allocate, transmit, update queues, arrivals.
    A frame whose overhead leaves no data time delivers nothing but still
    receives arrivals.
    """
    x = emit_requests(state, design, rng_gate)
    xhat, det_errors = detect_requests(x, design, cfg, rng_noise, model)
    if cfg.scheme in ("unslotted_exact", "unslotted_closed_form"):
        served, report = _unslotted_frame(cfg, design, x, xhat, frame_index)
    elif cfg.scheme in ("slotted_throughput", "slotted_power_saving"):
        served, report = _slotted_frame(cfg, design, x, xhat, frame_index)
    else:
        raise DomainError(f"run_frame does not handle scheme {cfg.scheme!r}")
    occ = state.occupancy - served
    new_state, dropped = step_arrivals(QueueState(occ), cfg, rng_arrivals)
    arrived = int(new_state.occupancy.sum() - occ.sum() + dropped)
    report = replace(report, detection_errors=det_errors,
                     dropped_packets=dropped, arrived_packets=arrived)
    return new_state, report


def run_fixed_assignment(
    state: QueueState, cfg: SystemConfig, rng_arrivals, frame_index: int = 0
) -> tuple[QueueState, FrameReport]:
    """Baseline: every node owns 1/N of the frame, no signaling at all.

    Each loaded node flushes its whole buffer inside its fixed share at
    power kappa * (2**(B_k N / (T_f W)) - 1).
    """
    occ = state.occupancy
    loaded = np.flatnonzero(occ)
    bits = cfg.packet_bits * occ[loaded].astype(float)
    exponents = bits * cfg.n_users / (cfg.frame_duration * cfg.bandwidth)
    power = float(np.sum(cfg.noise_psd * pow2m1(exponents)))
    delivered = float(bits.sum())
    drained = occ.copy()
    drained[loaded] = 0
    new_state, dropped = step_arrivals(QueueState(drained), cfg, rng_arrivals)
    arrived = int(new_state.occupancy.sum() - drained.sum() + dropped)
    report = FrameReport(
        frame_index, loaded.size, loaded.size, delivered, power,
        cfg.frame_duration, 0.0, 0, dropped, arrived,
    )
    return new_state, report


def run_per_user_signaling(
    state: QueueState, cfg: SystemConfig, rng_arrivals, frame_index: int = 0
) -> tuple[QueueState, FrameReport]:
    """Baseline: states announced on one dedicated symbol per user.

    Signaling occupies N/W seconds of the frame and detection is perfect;
    no request gating is needed since the announcement channel is
    orthogonal. The remaining window is split by the exact power-minimizing
    allocation over all loaded nodes.
    """
    occ = state.occupancy
    owner_ids = np.flatnonzero(occ)
    overhead = cfg.n_users / cfg.bandwidth
    data_time = cfg.frame_duration - overhead
    power = 0.0
    delivered = 0.0
    drained = occ.copy()
    if owner_ids.size > 0 and data_time > 0:
        bits = cfg.packet_bits * occ[owner_ids].astype(float)
        problem = AllocationProblem(bits, cfg.bandwidth, data_time, cfg.noise_psd)
        alloc = solve_exact(problem)
        power = alloc.total_power
        delivered = float(bits.sum())
        drained[owner_ids] = 0
    new_state, dropped = step_arrivals(QueueState(drained), cfg, rng_arrivals)
    arrived = int(new_state.occupancy.sum() - drained.sum() + dropped)
    report = FrameReport(
        frame_index, owner_ids.size, owner_ids.size, delivered, power,
        max(data_time, 0.0), min(overhead, cfg.frame_duration),
        0, dropped, arrived,
    )
    return new_state, report


def _rng_streams(seed: int):
    ss = np.random.SeedSequence(seed)
    gate_ss, arrival_ss, noise_ss, matrix_ss = ss.spawn(4)
    return (
        np.random.default_rng(gate_ss),
        np.random.default_rng(arrival_ss),
        np.random.default_rng(noise_ss),
        np.random.default_rng(matrix_ss),
    )


def run_scenario(
    cfg: SystemConfig,
    n_frames: int,
    design: SparsityDesign | None = None,
    collect_frames: bool = False,
):
    """Run the configured scheme for ``n_frames`` and aggregate metrics.

    Deterministic per cfg.seed; independent named RNG streams for arrivals,
    request gates, and channel noise keep trajectories comparable across
    schemes and duplex modes under matched seeds. Returns a MetricsSummary,
    or (MetricsSummary, [FrameReport]) with ``collect_frames``.
    """
    if n_frames < 1:
        raise DomainError(f"n_frames must be >= 1, got {n_frames}")
    rng_gate, rng_arrivals, rng_noise, rng_matrix = _rng_streams(cfg.seed)
    needs_design = cfg.scheme not in ("fixed_assignment", "per_user_signaling")
    if needs_design and design is None:
        design = design_operating_point(cfg)
    model = None
    if needs_design and cfg.detection == "physical":
        model = generate_matrix(
            cfg.n_users, design.n_measurements, rng_matrix,
            noise_std=cfg.request_noise_std,
            constellation_max=cfg.buffer_capacity,
        )

    state = QueueState.empty(cfg.n_users)
    reports = []
    power_sum = 0.0
    bits_sum = 0.0
    dropped = 0
    arrived = 0
    det_errors = 0
    owners_sum = 0
    served_sum = 0
    for i in range(n_frames):
        if cfg.scheme == "fixed_assignment":
            state, rep = run_fixed_assignment(state, cfg, rng_arrivals, i)
        elif cfg.scheme == "per_user_signaling":
            state, rep = run_per_user_signaling(state, cfg, rng_arrivals, i)
        else:
            state, rep = run_frame(state, cfg, design, rng_gate, rng_arrivals,
                                   rng_noise, model, i)
        power_sum += rep.total_power
        bits_sum += rep.delivered_bits
        dropped += rep.dropped_packets
        arrived += rep.arrived_packets
        det_errors += rep.detection_errors
        owners_sum += rep.owners
        served_sum += rep.served
        if collect_frames:
            reports.append(rep)

    summary = MetricsSummary(
        n_frames=n_frames,
        avg_total_power=power_sum / n_frames,
        bits_per_watt=(bits_sum / power_sum) if power_sum > 0 else 0.0,
        bits_per_second=bits_sum / (n_frames * cfg.frame_duration),
        drop_rate=(dropped / arrived) if arrived > 0 else 0.0,
        detection_error_rate=det_errors / (n_frames * cfg.n_users),
        delivered_bits=bits_sum,
        dropped_packets=dropped,
        avg_owners=owners_sum / n_frames,
        avg_served=served_sum / n_frames,
    )
    if collect_frames:
        return summary, reports
    return summary


def distributed_schedule(owner_ids, durations, start_time: float = 0.0):
    """Self-organized unslotted access order for full-duplex owners.

    Owners transmit back to back in ascending node id; each entry is
    (node_id, start, end). The duration multiset matches the centralized
    allocation by construction, which is what makes destination feedback
    unnecessary.
    """
    order = np.argsort(owner_ids)
    t = start_time
    schedule = []
    for i in order:
        schedule.append((int(owner_ids[i]), t, t + float(durations[i])))
        t += float(durations[i])
    return schedule


def full_duplex_local_decode(
    model: MeasurementModel,
    x: np.ndarray,
    self_gain: np.ndarray,
    rng,
    nodes=None,
) -> dict[int, np.ndarray]:
    """Each node's own recovery of the frame's announced states.

    A transmitting full-duplex node receives the request round through its
    self-interference channel: its own entry arrives scaled by its gain
    g_k, everyone else's arrives clean. The node runs the same recovery as
    the destination and then overwrites index k with the state it already
    knows, so g_k never needs estimating. Returns {node_id: recovered}.
    """
    x = np.asarray(x)
    self_gain = np.asarray(self_gain, dtype=float)
    if nodes is None:
        nodes = range(model.n_users)
    s = max(support_size(x), 1)
    cfg = RecoveryConfig(max_support=s, quantize=True)
    out = {}
    for k in nodes:
        xk = x.astype(float).copy()
        xk[k] *= self_gain[k]
        yk = measure(model, xk, rng)
        xhat = omp_recover(model, yk, cfg)
        xhat[k] = x[k]
        out[int(k)] = xhat.astype(np.int64)
    return out
