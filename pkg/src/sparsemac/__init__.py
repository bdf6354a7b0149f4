"""sparsemac: buffer-state-aware multiple access for large wireless networks.

A numpy library with four layers:

* :mod:`sparsemac.recovery` -- the compressed request channel (signature
  matrices, noisy projections, OMP and brute-force recovery).
* :mod:`sparsemac.design` -- sparsity levels, request gating probabilities,
  and measurement-count calibration.
* :mod:`sparsemac.allocation` / :mod:`sparsemac.slots` -- power-minimizing
  transmission-time assignment, continuous or slotted.
* :mod:`sparsemac.simulate` -- the frame-level queueing simulation tying it
  together, with fixed-assignment and per-user-signaling baselines.

:mod:`sparsemac.scenario_io` adds config files, sweeps, and table output;
``python -m sparsemac.cli`` (or the ``sparsemac`` script) drives it.
"""

from .allocation import (
    AllocationProblem,
    ContinuousAllocation,
    power_lower_bound,
    power_upper_bound,
    solve_closed_form,
    solve_exact,
)
from .design import (
    MeasurementCalibration,
    SparsityDesign,
    calibrate_measurements,
    design_operating_point,
    max_request_prob,
    measurements_for_sparsity,
    min_sparsity_level,
    tail_prob,
)
from .errors import (
    CapacityError,
    ConfigError,
    DegenerateFrameError,
    DimensionError,
    DomainError,
    InfeasibleDesignError,
    SaturationError,
)
from .recovery import (
    MeasurementModel,
    RecoveryConfig,
    brute_force_l0,
    generate_matrix,
    measure,
    omp_recover,
    support_size,
)
from .simulate import (
    FrameReport,
    MetricsSummary,
    QueueState,
    SystemConfig,
    detect_requests,
    emit_requests,
    full_duplex_local_decode,
    run_fixed_assignment,
    run_frame,
    run_per_user_signaling,
    run_scenario,
    step_arrivals,
)
from .slots import (
    SlottedPlan,
    plan_power_saving,
    plan_throughput,
    slotted_power,
)
from .scenario_io import (
    SweepSpec,
    emit_design_table,
    parse_config,
    run_sweep,
    write_config,
    write_records,
)

__version__ = "0.1.0"
