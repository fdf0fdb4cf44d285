"""Common-deadline scheduling on a single BS: cumulative capacity and packing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import UNSERVABLE, Instance
from .scsb import EnergyLedger, Schedule, ScheduleOutcome


@dataclass(frozen=True)
class CapacityProfile:
    """``capacity[t - 1]`` is the number of back-to-back slots usable from slot ``t``."""

    capacity: tuple[int, ...]
    best: int
    start: int
    steps: int


def capacity_profile(A: Sequence[int]) -> CapacityProfile:
    """Accumulated capacity for every start slot.

    For a start slot ``t`` the energy harvested up to ``t`` lets the BS
    stay busy until ``t + Γ(t)``; energy arriving meanwhile extends the
    run, so ``t' <- t + Γ(t')`` is iterated to a fixed point.  Γ beyond the
    frame is clamped to Γ(T).
    """
    T = len(A)
    if T == 0:
        raise ValueError("energy vector is empty")
    if any(a < 0 for a in A):
        raise ValueError("energy arrivals must be non-negative")
    prefix = [0] * (T + 1)
    for i, a in enumerate(A, start=1):
        prefix[i] = prefix[i - 1] + a

    def gamma(t: int) -> int:
        return prefix[min(t, T)]

    caps = []
    steps = 0
    for t in range(1, T + 1):
        tp = t + gamma(t)
        rounds = 0
        while tp <= T and tp != t + gamma(tp):
            tp = t + gamma(tp)
            rounds += 1
            steps += 1
            if rounds > T:
                raise RuntimeError(f"capacity iteration did not settle for start slot {t}")
        steps += 1
        caps.append(min(gamma(tp), T - t + 1))
    best = max(caps)
    return CapacityProfile(tuple(caps), best, caps.index(best) + 1, steps)


def budget(A: Sequence[int]) -> tuple[int, int]:
    """Maximum accumulated capacity and the earliest start slot reaching it."""
    prof = capacity_profile(A)
    return prof.best, prof.start


def pack(users: Iterable[int], capacity: int, nu: dict[int, float], start: int,
         num_slots: int | None = None, arrivals: Sequence[int] | None = None) -> ScheduleOutcome:
    """Admit users by increasing requirement while they fit in ``capacity``.

    Admitted users are laid out back to back from slot ``start``.
    ``num_slots`` defaults to the end of that run; if ``arrivals`` is
    given, the ledger records which arrivals power each slot.
    """
    if capacity < 0:
        raise ValueError("capacity must be non-negative")
    chosen = []
    used = 0
    for u in sorted(users, key=lambda v: (nu[v], v)):
        n = nu[u]
        if n == UNSERVABLE or used + n > capacity:
            break
        chosen.append(u)
        used += int(n)
    T = num_slots if num_slots is not None else start - 1 + used
    sched = Schedule.empty(T, 1)
    ledger = EnergyLedger.fresh(arrivals if arrivals is not None else [0] * T)
    s = start
    for u in chosen:
        for _ in range(int(nu[u])):
            sched.grid[s - 1][0] = u
            if arrivals is not None:
                ledger.consume_earliest((s, 0))
            s += 1
    sched.served = sorted(chosen)
    return ScheduleOutcome(sched, ledger, {u: 0 for u in chosen})


def schedule_scsb2(inst: Instance, bs: int = 0, users: Iterable[int] | None = None) -> ScheduleOutcome:
    """Optimal single-channel schedule when every deadline equals ``T``."""
    T = inst.num_slots
    ids = list(range(1, inst.num_users + 1)) if users is None else list(users)
    late = [u for u in ids if inst.deadlines[u - 1] != T]
    if late:
        raise ValueError(f"users {late} do not have the common deadline T={T}")
    A = inst.arrivals(bs)
    best, start = budget(A)
    nu = {u: inst.nu[u - 1][bs][0] for u in ids}
    return pack(ids, best, nu, start, num_slots=T, arrivals=A)
