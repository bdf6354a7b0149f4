"""Slotted-time assignment of frame owners to a fixed budget of D data slots.

Two strategies cover the two things one might optimize. The throughput plan
serves as many owners as possible, one slot each, and keeps control traffic
minimal (the receiver announces only the served count and the served IDs).
The power-saving plan hands out every slot: when fewer owners than slots
show up, leftover slots go one at a time to whichever owner's transmit
power drops the most, which is optimal because each owner's power is convex
and decreasing in its slot count.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DegenerateFrameError, DomainError
from .allocation import pow2m1


@dataclass(frozen=True)
class SlottedPlan:
    """Slot assignment for one frame.

    ``served_ids`` and ``slots_per_owner`` are aligned; ``slot_duration`` is
    zero (with ``degenerate`` set) when control overhead ate the frame.
    """

    served_ids: tuple
    slots_per_owner: tuple
    slot_duration: float
    n_slots: int
    overhead_time: float
    strategy: str
    degenerate: bool = False

    @property
    def n_served(self) -> int:
        return len(self.served_ids)


def slotted_power(bits: float, n_slots: int, slot_duration: float,
                  bandwidth: float, noise_psd: float) -> float:
    """Spectral power to push ``bits`` through ``n_slots`` slots.

    kappa * (2**(bits / (n_slots * W * T_s)) - 1).
    """
    if n_slots < 1:
        raise DomainError(f"n_slots must be >= 1, got {n_slots}")
    if slot_duration <= 0:
        raise DegenerateFrameError(
            f"slot duration must be > 0, got {slot_duration}"
        )
    if bits == 0:
        return 0.0
    return float(noise_psd * pow2m1(bits / (n_slots * bandwidth * slot_duration)))


def _select_top(owners, count):
    """Highest-bits owners first, ties broken by lower id."""
    ranked = sorted(owners, key=lambda ob: (-ob[1], ob[0]))
    return ranked[:count]


def plan_throughput(owners, n_slots: int, n_measurements: int,
                    bandwidth: float, frame_duration: float,
                    duplex: str = "half") -> SlottedPlan:
    """One slot per served owner, serving the deepest buffers first.

    With more owners than slots, the D owners with the highest bit counts
    win. Control traffic (half duplex): the compressed request round
    (M / W), the served count (1 / W), and the served IDs (served / W).
    Full-duplex nodes decode the request round themselves, so only M / W
    remains.
    """
    if n_slots < 1:
        raise DomainError(f"n_slots must be >= 1, got {n_slots}")
    if bandwidth <= 0:
        raise DomainError(f"bandwidth must be > 0, got {bandwidth}")
    served = _select_top(list(owners), n_slots)
    n_served = len(served)
    if duplex == "full":
        overhead = n_measurements / bandwidth
    else:
        overhead = (n_measurements + n_served + 1) / bandwidth
    slot = max((frame_duration - overhead) / n_slots, 0.0)
    return SlottedPlan(
        served_ids=tuple(oid for oid, _ in served),
        slots_per_owner=(1,) * n_served,
        slot_duration=slot,
        n_slots=n_slots,
        overhead_time=overhead,
        strategy="throughput",
        degenerate=(slot == 0.0),
    )


def plan_power_saving(owners, n_slots: int, n_measurements: int,
                      bandwidth: float, frame_duration: float,
                      duplex: str = "half",
                      extra_slot_rule: str = "greedy") -> SlottedPlan:
    """Use every slot; spare slots go where they cut power the most.

    With at least D owners this reduces to the throughput selection (one
    slot each; per-owner slot counts need no announcing). With fewer, every
    owner gets a slot and each remaining slot is assigned greedily by the
    marginal power decrease of one more slot, ties broken by higher bits
    then lower id. Control traffic then also carries the per-owner slot
    counts, one symbol per served owner. ``extra_slot_rule="round_robin"``
    instead cycles the spare slots over owners in bits-descending order.
    """
    if n_slots < 1:
        raise DomainError(f"n_slots must be >= 1, got {n_slots}")
    if bandwidth <= 0:
        raise DomainError(f"bandwidth must be > 0, got {bandwidth}")
    owners = list(owners)
    if len(owners) >= n_slots:
        base = plan_throughput(owners, n_slots, n_measurements, bandwidth,
                               frame_duration, duplex=duplex)
        return SlottedPlan(
            served_ids=base.served_ids,
            slots_per_owner=base.slots_per_owner,
            slot_duration=base.slot_duration,
            n_slots=n_slots,
            overhead_time=base.overhead_time,
            strategy="power_saving",
            degenerate=base.degenerate,
        )

    served = _select_top(owners, len(owners))
    n_served = len(served)
    if duplex == "full":
        overhead = n_measurements / bandwidth
    else:
        overhead = (n_measurements + 2 * n_served + 1) / bandwidth
    slot = max((frame_duration - overhead) / n_slots, 0.0)

    counts = [1] * n_served
    spare = n_slots - n_served
    if n_served > 0 and slot > 0.0 and spare > 0:
        bits = np.array([b for _, b in served], dtype=float)
        if extra_slot_rule == "round_robin":
            for i in range(spare):
                counts[i % n_served] += 1
        else:
            for _ in range(spare):
                best = None
                for i in range(n_served):
                    gain = (
                        slotted_power(bits[i], counts[i], slot, bandwidth, 1.0)
                        - slotted_power(bits[i], counts[i] + 1, slot, bandwidth, 1.0)
                    )
                    key = (gain, bits[i], -served[i][0])
                    if best is None or key > best[0]:
                        best = (key, i)
                counts[best[1]] += 1
    elif n_served > 0 and spare > 0:
        # degenerate frame: park the spare slots round-robin, nothing is sent
        for i in range(spare):
            counts[i % n_served] += 1

    return SlottedPlan(
        served_ids=tuple(oid for oid, _ in served),
        slots_per_owner=tuple(counts),
        slot_duration=slot,
        n_slots=n_slots,
        overhead_time=overhead,
        strategy="power_saving",
        degenerate=(slot == 0.0),
    )


def plan_total_power(plan: SlottedPlan, bits_by_id: dict, bandwidth: float,
                     noise_psd: float) -> float:
    """Total spectral power of a plan given each served owner's bits."""
    if plan.degenerate or plan.n_served == 0:
        return 0.0
    return sum(
        slotted_power(bits_by_id[oid], n, plan.slot_duration, bandwidth, noise_psd)
        for oid, n in zip(plan.served_ids, plan.slots_per_owner)
    )


def enumerate_optimal_slots(bits, n_slots: int, slot_duration: float,
                            bandwidth: float, noise_psd: float):
    """Exhaustive minimum-power split of ``n_slots`` over all owners.

    Walks every composition of n_slots into len(bits) parts >= 1 and
    returns (counts, total_power). Exponential in the owner count; intended
    as a desk-scale oracle for the greedy assignment.
    """
    k = len(bits)
    if k > n_slots:
        raise DomainError("more owners than slots; nothing to enumerate")
    best = None
    # compositions via stars and bars over the spare slots
    spare = n_slots - k
    for bars in combinations(range(spare + k - 1), k - 1):
        counts = []
        prev = -1
        for b in bars:
            counts.append(b - prev)
            prev = b
        counts.append(spare + k - 1 - prev)
        total = sum(
            slotted_power(bits[i], counts[i], slot_duration, bandwidth, noise_psd)
            for i in range(k)
        )
        if best is None or total < best[1]:
            best = (tuple(counts), total)
    return best
