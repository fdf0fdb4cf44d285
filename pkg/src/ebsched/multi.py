"""Multi-BS association and multi-channel scheduling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .model import UNSERVABLE, Instance
from .scsb import PER_PAIR, ScheduleOutcome, run_engine, schedule_scsb1


@dataclass
class AssociationOutcome:
    """Per-BS outcomes of the greedy association, in commit order."""

    per_bs: dict[int, ScheduleOutcome]
    used_bs: list[int]
    rounds: list[int] = field(default_factory=list)

    @property
    def served_total(self) -> int:
        return sum(o.served_count for o in self.per_bs.values())

    def served_by(self) -> dict[int, int]:
        """User id -> serving BS index."""
        return {u: b for b, o in self.per_bs.items() for u in o.served}

    def to_dict(self) -> dict:
        return {
            "bs": {str(b + 1): self.per_bs[b].to_dict() for b in self.used_bs},
            "used_bs": [b + 1 for b in self.used_bs],
            "served_total": self.served_total,
            "rounds": list(self.rounds),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class ChannelAssignment:
    chan: dict[int, int]           # user id -> channel index (0-based)
    unservable: set[int] = field(default_factory=set)


def allocate_channels(inst: Instance, bs: int = 0, users: Iterable[int] | None = None) -> ChannelAssignment:
    """Give each user the channel on which it needs the fewest slots.

    Ties go to the channel holding the fewest users so far, then to the
    lowest index.  Users are taken in id order.
    """
    ids = range(1, inst.num_users + 1) if users is None else users
    load = [0] * inst.num_channels
    chan, dead = {}, set()
    for u in ids:
        row = inst.nu[u - 1][bs]
        if all(v == UNSERVABLE for v in row):
            dead.add(u)
            continue
        c = min(range(len(row)), key=lambda k: (row[k], load[k], k))
        chan[u] = c
        load[c] += 1
    return ChannelAssignment(chan, dead)


def schedule_mcsb(inst: Instance, bs: int = 0, users: Iterable[int] | None = None,
                  energy_mode: str = PER_PAIR, hook=None) -> ScheduleOutcome:
    """Channel allocation followed by the single-BS scheduler on the ``T x C`` grid."""
    ids = list(range(1, inst.num_users + 1)) if users is None else list(users)
    alloc = allocate_channels(inst, bs, ids)
    live = [u for u in ids if u in alloc.chan]
    need = {u: inst.nu[u - 1][bs][alloc.chan[u]] for u in live}
    return run_engine(inst.num_slots, inst.num_channels, inst.arrivals(bs), inst.deadlines,
                      live, need, alloc.chan, energy_mode, hook)


def lowest_index(counts: dict[int, int]) -> int:
    return min(counts, key=lambda b: (-counts[b], b))


def highest_index(counts: dict[int, int]) -> int:
    return min(counts, key=lambda b: (-counts[b], -b))


def associate(inst: Instance, per_bs: Callable[[Instance, int, list[int]], ScheduleOutcome],
              pick: Callable[[dict[int, int]], int] = lowest_index) -> AssociationOutcome:
    """Greedy association: repeatedly commit the BS that serves the most remaining users."""
    remaining = list(range(1, inst.num_users + 1))
    free = list(range(inst.num_bs))
    result = AssociationOutcome({}, [], [])
    while free:
        trial = {b: per_bs(inst, b, remaining) for b in free}
        counts = {b: o.served_count for b, o in trial.items()}
        if max(counts.values()) == 0:
            # nothing changes any more (or nobody is left): every later round
            # would recompute these same empty outcomes
            while free:
                b = pick({k: 0 for k in free})
                result.per_bs[b] = trial[b]
                result.used_bs.append(b)
                result.rounds.append(0)
                free.remove(b)
            break
        b = pick(counts)
        out = trial[b]
        result.per_bs[b] = out
        result.used_bs.append(b)
        result.rounds.append(out.served_count)
        taken = set(out.served)
        remaining = [u for u in remaining if u not in taken]
        free.remove(b)
    return result


def schedule_scmb(inst: Instance, pick: Callable[[dict[int, int]], int] = lowest_index) -> AssociationOutcome:
    """Single-channel multi-BS association (at least half the optimum)."""
    if inst.num_channels != 1:
        raise ValueError(f"single-channel association needs C=1, got C={inst.num_channels}")
    return associate(inst, lambda i, b, us: schedule_scsb1(i, b, us), pick)


def schedule_mcmb(inst: Instance, energy_mode: str = PER_PAIR,
                  pick: Callable[[dict[int, int]], int] = lowest_index) -> AssociationOutcome:
    """Multi-channel multi-BS association with the multi-channel scheduler per BS."""
    return associate(inst, lambda i, b, us: schedule_mcsb(i, b, us, energy_mode), pick)
