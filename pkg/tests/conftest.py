import math
import random

import pytest

from ebsched.model import make_instance
from ebsched.scsb import Schedule


def random_instance(rng: random.Random, U: int, B: int = 1, C: int = 1, T: int = 6,
                    amax: int = 3, common: bool = False, inf_prob: float = 0.1,
                    nu_max: int | None = None):
    """Small random instance with integer requirements; some pairs unservable."""
    nu_max = nu_max or T
    nu = [[[math.inf if rng.random() < inf_prob else rng.randint(1, nu_max) for _ in range(C)]
           for _ in range(B)] for _ in range(U)]
    deadlines = [T if common else rng.randint(1, T) for _ in range(U)]
    arrivals = [[rng.randint(0, amax) for _ in range(T)] for _ in range(B)]
    return make_instance(nu, deadlines, arrivals, num_slots=T)


def tightness_instance():
    """Four users, two BSs, two slots: the greedy can be held to half the optimum."""
    return make_instance([[1, 2], [1, 1], [1, 1], [1, 2]], [2, 2, 2, 2], [[2, 0], [2, 0]])


FIG2_ARRIVALS = [1, 0, 2, 0, 0, 0, 0, 1, 1, 0, 1, 0, 1, 0]


def fig2_schedule():
    """Three users j=1, k=2, l=3 laid out over 14 slots, l preempted."""
    strip = [0] * 14
    for t in (3, 4, 5):
        strip[t - 1] = 1
    for t in (8, 9):
        strip[t - 1] = 2
    for t in (11, 13):
        strip[t - 1] = 3
    return Schedule.from_strip(strip), [3, 2, 2], [6, 10, 13]


def random_feasible_schedule(rng: random.Random):
    """A random preemptive single-channel schedule together with data that make it feasible."""
    T = rng.randint(1, 12)
    U = rng.randint(0, 5)
    strip = [rng.randint(0, U) if U else 0 for _ in range(T)]
    users = sorted({v for v in strip if v})
    ids = {u: i + 1 for i, u in enumerate(users)}
    strip = [ids.get(v, 0) for v in strip]
    n = len(users)
    nu = [strip.count(u) for u in range(1, n + 1)]
    last = {u: max(t for t, v in enumerate(strip, start=1) if v == u) for u in range(1, n + 1)}
    deadlines = [rng.randint(last[u], T) for u in range(1, n + 1)]
    arrivals = [0] * T
    for t, v in enumerate(strip, start=1):
        if v:
            arrivals[rng.randint(1, t) - 1] += 1
    for _ in range(rng.randint(0, 3)):
        arrivals[rng.randrange(T)] += 1
    return Schedule.from_strip(strip), nu, deadlines, arrivals


@pytest.fixture
def rng():
    return random.Random(12345)
