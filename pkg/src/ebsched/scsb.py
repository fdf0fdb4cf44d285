"""Single-BS scheduling: the EDF/evict-largest optimal scheduler, its
rescheduling step, feasibility checking and the non-preemptive transform.

The scheduling engine works on a ``T x C`` grid so the multi-channel
heuristic can reuse it with a fixed channel per user; with ``C = 1`` it is
exactly the optimal single-channel algorithm.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .model import UNSERVABLE, Instance

#: Energy accounting when several channels are active in one slot.
PER_PAIR = "pair"   # one unit per active (slot, channel)
PER_SLOT = "slot"   # one unit per active slot, whatever the channel count
ENERGY_MODES = (PER_PAIR, PER_SLOT)


@dataclass
class Schedule:
    """Slot-by-channel assignment grid.

    ``grid[t - 1][c]`` holds the user id (1-based) transmitting at slot
    ``t`` on channel ``c``, or 0 when idle.
    """

    grid: list[list[int]]
    served: list[int] = field(default_factory=list)

    @classmethod
    def empty(cls, num_slots: int, num_channels: int = 1) -> "Schedule":
        return cls([[0] * num_channels for _ in range(num_slots)], [])

    @property
    def num_slots(self) -> int:
        return len(self.grid)

    @property
    def num_channels(self) -> int:
        return len(self.grid[0]) if self.grid else 1

    def slots_of(self, user: int) -> list[tuple[int, int]]:
        """``(slot, channel)`` pairs of ``user``; slots are 1-based."""
        return [(t + 1, c) for t, row in enumerate(self.grid) for c, v in enumerate(row) if v == user]

    def busy_per_slot(self, mode: str = PER_PAIR) -> list[int]:
        if mode == PER_SLOT:
            return [1 if any(row) else 0 for row in self.grid]
        return [sum(1 for v in row if v) for row in self.grid]

    def copy(self) -> "Schedule":
        return Schedule([list(row) for row in self.grid], list(self.served))

    def to_dict(self) -> dict:
        return {"grid": [list(row) for row in self.grid], "served": list(self.served)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "Schedule":
        grid = [list(row) if isinstance(row, (list, tuple)) else [row] for row in doc["grid"]]
        return cls(grid, list(doc["served"]))

    @classmethod
    def from_strip(cls, strip: Sequence[int]) -> "Schedule":
        """Single-channel schedule from a flat slot strip."""
        served = sorted({v for v in strip if v})
        return cls([[v] for v in strip], served)

    def render(self, arrivals: Sequence[int] | None = None, names: dict[int, str] | None = None) -> str:
        """Plain-text slot strip, one row per channel, energy row beneath."""
        names = names or {}
        cells = [[names.get(v, str(v)) for v in row] for row in self.grid]
        width = max([len(c) for row in cells for c in row] + [len(str(self.num_slots)), 1])
        lines = []
        head = "     " + " ".join(str(t + 1).rjust(width) for t in range(self.num_slots))
        lines.append(head)
        for c in range(self.num_channels):
            label = "Σ" if self.num_channels == 1 else f"c{c + 1}"
            lines.append(f"{label:<4} " + " ".join(row[c].rjust(width) for row in cells))
        if arrivals is not None:
            lines.append("A_t  " + " ".join(str(a).rjust(width) for a in arrivals))
        return "\n".join(lines)


@dataclass
class EnergyLedger:
    """Residual energy per arrival slot plus the arrival feeding each busy cell.

    ``provenance`` maps an energy key (``(slot, channel)`` in per-pair mode,
    ``(slot, None)`` in per-slot mode) to the 1-based arrival slot whose
    unit it consumed.
    """

    arrivals: tuple[int, ...]
    residual: list[int]
    provenance: dict[tuple[int, int | None], int] = field(default_factory=dict)

    @classmethod
    def fresh(cls, arrivals: Sequence[int]) -> "EnergyLedger":
        return cls(tuple(arrivals), list(arrivals), {})

    def consume(self, key: tuple[int, int | None], arrival: int) -> None:
        if self.residual[arrival - 1] <= 0:
            raise RuntimeError(f"no energy left at slot {arrival}")
        if arrival > key[0]:
            raise RuntimeError(f"energy from slot {arrival} used at slot {key[0]}")
        self.residual[arrival - 1] -= 1
        self.provenance[key] = arrival

    def release(self, key: tuple[int, int | None]) -> None:
        arrival = self.provenance.pop(key)
        self.residual[arrival - 1] += 1

    def consume_earliest(self, key: tuple[int, int | None]) -> None:
        for t in range(1, key[0] + 1):
            if self.residual[t - 1] > 0:
                self.consume(key, t)
                return
        raise RuntimeError(f"no energy available for slot {key[0]}")

    def is_conserved(self) -> bool:
        return sum(self.residual) + len(self.provenance) == sum(self.arrivals)

    def copy(self) -> "EnergyLedger":
        return EnergyLedger(self.arrivals, list(self.residual), dict(self.provenance))


@dataclass
class ScheduleOutcome:
    schedule: Schedule
    ledger: EnergyLedger
    channel_of: dict[int, int] = field(default_factory=dict)

    @property
    def served(self) -> list[int]:
        return self.schedule.served

    @property
    def served_count(self) -> int:
        return len(self.schedule.served)

    def to_dict(self) -> dict:
        d = self.schedule.to_dict()
        d["channel"] = {str(u): c + 1 for u, c in sorted(self.channel_of.items())}
        d["residual"] = list(self.ledger.residual)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# -- feasibility -----------------------------------------------------------


@dataclass
class FeasibilityReport:
    feasible: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.feasible


def energy_violations(busy: Sequence[int], arrivals: Sequence[int]) -> list[str]:
    """Prefix-balance check: units used by slot t never exceed units arrived."""
    out = []
    balance = 0
    for t, (a, used) in enumerate(zip(arrivals, busy), start=1):
        balance += a - used
        if balance < 0:
            out.append(f"energy: slot {t} uses {-balance} unit(s) not yet harvested")
            balance = 0
    return out


def is_feasible(s: Schedule, nu: Sequence, deadlines: Sequence[int], arrivals: Sequence[int],
                mode: str = PER_PAIR) -> FeasibilityReport:
    """Check a single-BS schedule against deadlines, slot counts and energy.

    ``nu[u]`` is either a scalar requirement of user id ``u + 1`` or a
    per-channel sequence.  Energy feasibility is the prefix balance
    ``sum_{i<=t} A_i - busy_{<=t} >= 0`` for every ``t``, which is exactly
    the existence of an arrival-to-use assignment with arrival <= use.
    """
    if len(s.grid) != len(arrivals):
        raise ValueError(f"grid has {len(s.grid)} slots, energy has {len(arrivals)}")
    if len(nu) != len(deadlines):
        raise ValueError("nu and deadlines must have one entry per user")
    problems: list[str] = []
    seen: dict[int, list[tuple[int, int]]] = {}
    for t, row in enumerate(s.grid, start=1):
        for c, v in enumerate(row):
            if v:
                seen.setdefault(v, []).append((t, c))
    served = set(s.served)
    if len(served) != len(s.served):
        problems.append("served list has duplicates")
    for u in sorted(set(seen) | served):
        if u < 1 or u > len(deadlines):
            problems.append(f"user {u} is not part of the instance")
            continue
        if u not in served:
            problems.append(f"user {u} appears in the grid but is not served")
            continue
        cells = seen.get(u, [])
        channels = {c for _, c in cells}
        if len(channels) > 1:
            problems.append(f"user {u} uses channels {sorted(channels)}")
        need = nu[u - 1]
        if isinstance(need, (list, tuple)):
            need = need[next(iter(channels))] if channels else min(need)
        if need == UNSERVABLE or len(cells) != need:
            problems.append(f"user {u} holds {len(cells)} slot(s), needs {need}")
        late = [t for t, _ in cells if t > deadlines[u - 1]]
        if late:
            problems.append(f"user {u} scheduled after deadline {deadlines[u - 1]} at {late}")
    problems += energy_violations(s.busy_per_slot(mode), arrivals)
    return FeasibilityReport(not problems, problems)


def check_outcome(out: ScheduleOutcome, inst: Instance, b: int = 0, mode: str = PER_PAIR) -> FeasibilityReport:
    """``is_feasible`` for BS ``b`` of an instance."""
    return is_feasible(out.schedule, [inst.nu[u][b] for u in range(inst.num_users)],
                       inst.deadlines, inst.arrivals(b), mode)


# -- the scheduling engine -------------------------------------------------


def edf_order(users: Iterable[int], deadlines: Sequence[int], need: dict[int, float]) -> list[int]:
    """Earliest deadline first; ties by fewer required slots, then user id."""
    return sorted(users, key=lambda u: (deadlines[u - 1], need[u], u))


def largest_user(candidates: Iterable[int], need: dict[int, float]) -> int:
    """User with the most required slots; ties go to the smallest id."""
    return min(candidates, key=lambda u: (-need[u], u))


class _Engine:
    """Mutable state of one scheduling run on a single BS."""

    def __init__(self, T: int, C: int, arrivals: Sequence[int], mode: str):
        if mode not in ENERGY_MODES:
            raise ValueError(f"unknown energy mode {mode!r}")
        self.T, self.C, self.mode = T, C, mode
        self.schedule = Schedule.empty(T, C)
        self.ledger = EnergyLedger.fresh(arrivals)

    def key(self, s: int, c: int) -> tuple[int, int | None]:
        return (s, c) if self.mode == PER_PAIR else (s, None)

    def powered(self, s: int) -> bool:
        return self.mode == PER_SLOT and (s, None) in self.ledger.provenance

    def place(self, user: int, s: int, c: int, t: int) -> bool:
        """Put ``user`` at (s, c) powered from arrival ``t``; True if energy was spent."""
        self.schedule.grid[s - 1][c] = user
        if self.powered(s):
            return False
        self.ledger.consume(self.key(s, c), t)
        return True

    def completion(self, user: int, c: int) -> int:
        return max((t for t in range(1, self.T + 1) if self.schedule.grid[t - 1][c] == user), default=0)

    def remove_and_shift(self, ell: int, c: int) -> None:
        """Drop ``ell`` from channel ``c`` and pull every later user left.

        The busy cells at or after ``ell``'s first slot on channel ``c``
        (``ell``'s own plus those of users behind it) form the pool of
        destinations; the remaining users keep their relative order and
        are packed into the earliest cells of that pool.  Energy of every
        vacated or moved cell is returned to its arrival slot, then moved
        cells are re-powered from the earliest available arrivals.
        """
        grid = self.schedule.grid
        own = [t for t in range(1, self.T + 1) if grid[t - 1][c] == ell]
        if not own:
            return
        first = own[0]
        pool = [t for t in range(first, self.T + 1) if grid[t - 1][c]]
        movers = [grid[t - 1][c] for t in pool if grid[t - 1][c] != ell]
        for t in pool:
            grid[t - 1][c] = 0
        if self.mode == PER_PAIR:
            for t in pool:
                self.ledger.release((t, c))
        else:
            for t in pool:
                if not any(grid[t - 1]):
                    self.ledger.release((t, None))
        for t, user in zip(pool, movers):
            grid[t - 1][c] = user
            if not self.powered(t):
                self.ledger.consume_earliest(self.key(t, c))


def run_engine(T: int, C: int, arrivals: Sequence[int], deadlines: Sequence[int],
               users: Iterable[int], need: dict[int, float], channel: dict[int, int],
               mode: str = PER_PAIR,
               hook: Callable[[int, Schedule, EnergyLedger], None] | None = None) -> ScheduleOutcome:
    """EDF insertion with largest-user eviction on a single BS.

    ``need[u]`` and ``channel[u]`` give each user's slot requirement and
    fixed channel.  Users whose requirement exceeds ``T`` are dropped up
    front.  ``hook`` is called with ``(user, schedule, ledger)`` after each
    user has been processed.
    """
    eng = _Engine(T, C, arrivals, mode)
    grid = eng.schedule.grid
    residual = eng.ledger.residual
    served = eng.schedule.served
    candidates = [u for u in users if need[u] != UNSERVABLE and need[u] <= T and deadlines[u - 1] >= 1]

    for u in edf_order(candidates, deadlines, need):
        nu, c, d = int(need[u]), channel[u], deadlines[u - 1]
        served.append(u)
        x, t, r = 0, 1, 1
        while t <= T:
            r = max(r, t)
            if residual[t - 1] > 0:
                delta = min(residual[t - 1], nu - x, T - r + 1)
                for s in range(r, r + delta):
                    if grid[s - 1][c] == 0 and (residual[t - 1] > 0 or eng.powered(s)):
                        eng.place(u, s, c, t)
                        x += 1
                    # busy cells are stepped over without spending energy
                    r += 1
            elif r <= T and grid[r - 1][c] == 0 and eng.powered(r):
                # per-slot mode: a slot already powered for another channel is free
                eng.place(u, r, c, t)
                x += 1
                r += 1
            else:
                t += 1
            if x == nu:
                # only users sharing u's channel can pull u's completion earlier
                while u in served and eng.completion(u, c) > d:
                    ell = largest_user([v for v in served if channel[v] == c], need)
                    served.remove(ell)
                    eng.remove_and_shift(ell, c)
                break
            if max(r, t) > T:
                ell = largest_user(served, need)
                served.remove(ell)
                eng.remove_and_shift(ell, channel[ell])
                t, r = 1, 1
                if ell == u:
                    break
        if hook is not None:
            hook(u, eng.schedule, eng.ledger)

    served.sort()
    return ScheduleOutcome(eng.schedule, eng.ledger, {u: channel[u] for u in served})


def schedule_scsb1(inst: Instance, bs: int = 0, users: Iterable[int] | None = None,
                   hook: Callable[[int, Schedule, EnergyLedger], None] | None = None) -> ScheduleOutcome:
    """Optimal single-channel schedule of ``users`` (1-based ids) on BS ``bs``.

    Only channel 0 of the instance is used.
    """
    ids = list(range(1, inst.num_users + 1)) if users is None else list(users)
    need = {u: inst.nu[u - 1][bs][0] for u in ids}
    return run_engine(inst.num_slots, 1, inst.arrivals(bs), inst.deadlines, ids, need,
                      {u: 0 for u in ids}, PER_PAIR, hook)


def update_reschedule(s: Schedule, led: EnergyLedger, served: Iterable[int], ell: int,
                      channel: int | None = None, mode: str = PER_PAIR):
    """Remove ``ell`` and shift the users behind it to the left.

    Returns ``(schedule, ledger, served, t, r)`` with ``t = r = 1``, the
    restart point of the scheduling loop.  Inputs are not modified.
    """
    served = list(served)
    if ell not in served:
        raise ValueError(f"user {ell} is not served")
    if channel is None:
        cells = s.slots_of(ell)
        channel = cells[0][1] if cells else 0
    eng = _Engine(s.num_slots, s.num_channels, led.arrivals, mode)
    eng.schedule = s.copy()
    eng.ledger = led.copy()
    eng.remove_and_shift(ell, channel)
    served.remove(ell)
    eng.schedule.served = list(served)
    return eng.schedule, eng.ledger, served, 1, 1


def starting_completion(s: Schedule, u: int) -> tuple[int, int]:
    """First and last slot (1-based) at which ``u`` transmits."""
    slots = [t for t, _ in s.slots_of(u)]
    if not slots or u not in s.served:
        raise LookupError(f"user {u} is not served")
    return min(slots), max(slots)


def to_nonpreemptive(s: Schedule, nu: Sequence, deadlines: Sequence[int], arrivals: Sequence[int],
                     mode: str = PER_PAIR) -> Schedule:
    """Make every served user's transmission contiguous.

    Per channel, users are taken by decreasing completion time and each is
    given a block that ends at its completion time, or just before the
    block placed previously if that one now starts earlier.  Blocks never
    end later than the original completion, so deadlines hold, and busy
    cells only move later in time, so the energy prefix balance holds.
    When no other user sits inside a user's span this is exactly the
    block ``[C_u - nu_u + 1, C_u]``.  Under per-slot charging with several
    channels the argument breaks down; an energy-infeasible result raises
    ValueError there.
    """
    report = is_feasible(s, nu, deadlines, arrivals, mode)
    if not report:
        raise ValueError("schedule is not feasible: " + "; ".join(report.violations))
    out = Schedule.empty(s.num_slots, s.num_channels)
    out.served = list(s.served)
    for c in range(s.num_channels):
        spans = {}
        for t, row in enumerate(s.grid, start=1):
            u = row[c]
            if u:
                lo, hi, n = spans.get(u, (t, t, 0))
                spans[u] = (min(lo, t), max(hi, t), n + 1)
        limit = s.num_slots + 1
        for u in sorted(spans, key=lambda v: (-spans[v][1], v)):
            _, comp, n = spans[u]
            end = min(comp, limit - 1)
            start = end - n + 1
            for t in range(start, end + 1):
                out.grid[t - 1][c] = u
            limit = start
    if mode == PER_SLOT and s.num_channels > 1:
        # channels move independently, so slots shared by two channels can split
        # apart and cost an extra unit each; only the per-pair charge is safe
        report = is_feasible(out, nu, deadlines, arrivals, mode)
        if not report:
            raise ValueError("no energy-safe contiguous layout found under per-slot charging: "
                             + "; ".join(report.violations))
    return out


def is_nonpreemptive(s: Schedule) -> bool:
    for u in s.served:
        slots = sorted(t for t, _ in s.slots_of(u))
        if slots and slots[-1] - slots[0] + 1 != len(slots):
            return False
    return True
