"""Ground truth for small instances.

Nothing here calls into the scheduling heuristics: the exhaustive search,
its per-BS feasibility test and the constraint validator are written
independently so they can be used to check them.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .model import UNSERVABLE, Instance
from .scsb import PER_PAIR, EnergyLedger, Schedule, ScheduleOutcome


class OracleLimitError(RuntimeError):
    """The instance (or the search) is beyond the configured limits."""


@dataclass(frozen=True)
class OracleLimits:
    max_users: int = 24
    max_bs: int = 12
    max_channels: int = 4
    max_slots: int = 24
    max_nodes: int = 5_000_000

    def __post_init__(self):
        for name in ("max_users", "max_bs", "max_channels", "max_slots", "max_nodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def admits(self, U: int, B: int, C: int, T: int) -> bool:
        return U <= self.max_users and B <= self.max_bs and C <= self.max_channels and T <= self.max_slots

    def check(self, inst: Instance) -> None:
        if not self.admits(inst.num_users, inst.num_bs, inst.num_channels, inst.num_slots):
            raise OracleLimitError(
                f"instance U={inst.num_users} B={inst.num_bs} C={inst.num_channels} "
                f"T={inst.num_slots} exceeds {self}")


# -- exact per-BS feasibility ---------------------------------------------


def latest_busy(jobs: Sequence[tuple[int, int]], T: int) -> list[int] | None:
    """Busy indicator of the as-late-as-possible schedule of one channel.

    ``jobs`` are ``(required_slots, deadline)`` pairs.  Working backwards
    from ``T`` and staying busy whenever some job may still run is the
    schedule with the fewest busy slots in every prefix, so it is the one
    to test against energy.  Returns None when the deadlines alone cannot
    be met.
    """
    release = [0] * (T + 2)
    for n, d in jobs:
        release[d] += n
    busy = [0] * T
    pending = 0
    for t in range(T, 0, -1):
        pending += release[t]
        if pending:
            busy[t - 1] = 1
            pending -= 1
    return None if pending else busy


def bs_feasible(assigned: Sequence[tuple[int, int, int]], arrivals: Sequence[int], T: int, C: int) -> bool:
    """Can ``(required_slots, deadline, channel)`` jobs all be served on one BS?

    Energy is charged per active (slot, channel).
    """
    total = [0] * T
    for c in range(C):
        jobs = [(n, d) for n, d, ch in assigned if ch == c]
        if not jobs:
            continue
        busy = latest_busy(jobs, T)
        if busy is None:
            return False
        for t, v in enumerate(busy):
            total[t] += v
    balance = 0
    for a, used in zip(arrivals, total):
        balance += a - used
        if balance < 0:
            return False
    return True


def witness_grid(assigned: Sequence[tuple[int, int, int, int]], T: int, C: int) -> list[list[int]]:
    """Grid for ``(user, required_slots, deadline, channel)`` jobs known to be feasible.

    Uses the latest busy slots per channel and fills them in EDF order.
    """
    grid = [[0] * C for _ in range(T)]
    for c in range(C):
        jobs = [(d, u, n) for u, n, d, ch in assigned if ch == c]
        busy = latest_busy([(n, d) for d, _, n in jobs], T)
        slots = [t for t in range(T) if busy[t]]
        queue = []
        for d, u, n in sorted(jobs):
            queue.extend([u] * n)
        for t, u in zip(slots, queue):
            grid[t][c] = u
    return grid


# -- branch and bound ------------------------------------------------------


@dataclass
class ExactResult:
    optimum: int
    assignment: dict[int, tuple[int, int]]   # user id -> (bs, channel)
    per_bs: dict[int, ScheduleOutcome]
    nodes: int

    @property
    def served_total(self) -> int:
        return self.optimum


def solve_exact(inst: Instance, lim: OracleLimits | None = None) -> ExactResult:
    """Maximum number of servable users, by depth-first branch and bound.

    Each user is either left out or given a (BS, channel); every partial
    assignment is kept feasible with :func:`bs_feasible`.  The bound adds
    to the served count the largest number of remaining users whose
    smallest requirements fit in the energy still unassigned.  Exceeding
    ``lim.max_nodes`` raises :class:`OracleLimitError`.
    """
    lim = lim or OracleLimits()
    lim.check(inst)
    T, B, C = inst.num_slots, inst.num_bs, inst.num_channels
    deadlines = inst.deadlines
    cap = [min(sum(inst.arrivals(b)), T * C) for b in range(B)]

    options: dict[int, list[tuple[int, int, int]]] = {}
    for u in range(inst.num_users):
        opts = []
        for b in range(B):
            for c in range(C):
                n = inst.nu[u][b][c]
                if n != UNSERVABLE and n <= deadlines[u] and n <= cap[b]:
                    opts.append((n, b, c))
        if opts:
            options[u] = sorted(opts)
    order = sorted(options, key=lambda u: (options[u][0][0], len(options[u]), u))
    smallest = [options[u][0][0] for u in order]

    state = {b: [] for b in range(B)}
    used = [0] * B
    best = {"count": 0, "assign": {}}
    chosen: dict[int, tuple[int, int]] = {}
    nodes = 0

    def bound(i: int, count: int) -> int:
        room = sum(cap) - sum(used)
        extra = 0
        for n in smallest[i:]:
            if n > room:
                break
            room -= n
            extra += 1
        return count + extra

    def dfs(i: int, count: int) -> None:
        nonlocal nodes
        nodes += 1
        if nodes > lim.max_nodes:
            raise OracleLimitError(f"search exceeded {lim.max_nodes} nodes")
        if count > best["count"]:
            best["count"] = count
            best["assign"] = dict(chosen)
        if i == len(order) or bound(i, count) <= best["count"]:
            return
        u = order[i]
        for n, b, c in options[u]:
            if used[b] + n > cap[b]:
                continue
            job = (n, deadlines[u], c)
            state[b].append(job)
            if bs_feasible(state[b], inst.arrivals(b), T, C):
                used[b] += n
                chosen[u] = (b, c)
                dfs(i + 1, count + 1)
                del chosen[u]
                used[b] -= n
            state[b].pop()
        dfs(i + 1, count)

    dfs(0, 0)
    return ExactResult(best["count"], {u + 1: bc for u, bc in best["assign"].items()},
                       _witness(inst, best["assign"]), nodes)


def _witness(inst: Instance, assign: dict[int, tuple[int, int]]) -> dict[int, ScheduleOutcome]:
    T, C = inst.num_slots, inst.num_channels
    per_bs = {}
    for b in range(inst.num_bs):
        jobs = [(u + 1, int(inst.nu[u][b][c]), inst.deadlines[u], c) for u, (bb, c) in assign.items() if bb == b]
        if not jobs:
            continue
        grid = witness_grid(jobs, T, C)
        ledger = EnergyLedger.fresh(inst.arrivals(b))
        for t in range(1, T + 1):
            for c in range(C):
                if grid[t - 1][c]:
                    ledger.consume_earliest((t, c))
        per_bs[b] = ScheduleOutcome(Schedule(grid, sorted(j[0] for j in jobs)), ledger,
                                    {j[0]: j[3] for j in jobs})
    return per_bs


def brute_force_count(inst: Instance) -> int:
    """Plain enumeration of every assignment; only for tiny instances."""
    T, B, C = inst.num_slots, inst.num_bs, inst.num_channels
    choices = [None] + [(b, c) for b in range(B) for c in range(C)]
    best = 0
    for combo in itertools.product(choices, repeat=inst.num_users):
        count = sum(1 for x in combo if x is not None)
        if count <= best:
            continue
        ok = True
        for b in range(B):
            jobs = []
            for u, x in enumerate(combo):
                if x is not None and x[0] == b:
                    n = inst.nu[u][b][x[1]]
                    if n == UNSERVABLE:
                        ok = False
                        break
                    jobs.append((int(n), inst.deadlines[u], x[1]))
            if not ok or not bs_feasible(jobs, inst.arrivals(b), T, C):
                ok = False
                break
        if ok:
            best = count
    return best


# -- Moore-Hodgson ---------------------------------------------------------


def moore_hodgson(nu: Sequence[int], d: Sequence[int], T: int | None = None) -> int:
    """Maximum number of on-time jobs on one machine (no energy limit)."""
    jobs = sorted((dd, n) for n, dd in zip(nu, d) if n != UNSERVABLE)
    heap: list[int] = []
    total = 0
    for dd, n in jobs:
        if T is not None:
            dd = min(dd, T)
        heapq.heappush(heap, -n)
        total += n
        if total > dd:
            total += heapq.heappop(heap)
    return len(heap)


# -- constraint validator --------------------------------------------------


def validate_assignment(inst: Instance, per_bs: dict[int, Schedule]) -> list[str]:
    """Re-check a multi-BS solution against the ILP constraints.

    Builds the binary ``x[u,b,c,t]`` and the energy level ``z[b,t]`` from
    the grids and tests each constraint family literally.
    """
    T, B, C = inst.num_slots, inst.num_bs, inst.num_channels
    x = {}
    for b, s in per_bs.items():
        for t, row in enumerate(s.grid, start=1):
            for c, v in enumerate(row):
                if v:
                    x[(v - 1, b, c, t)] = 1
    errs = []
    by_user: dict[int, set] = {}
    for (u, b, c, t) in x:
        by_user.setdefault(u, set()).add((b, c))
    for u, pairs in by_user.items():
        if len({c for _, c in pairs}) > 1:
            errs.append(f"one_channel: user {u + 1} on several channels")
        if len({b for b, _ in pairs}) > 1:
            errs.append(f"one_bs: user {u + 1} on several BSs")
    for b in range(B):
        for c in range(C):
            for t in range(1, T + 1):
                if sum(1 for u in range(inst.num_users) if x.get((u, b, c, t))) > 1:
                    errs.append(f"collision: two users at b={b} c={c} t={t}")
        z = [0] * (T + 1)
        z[1] = inst.arrivals(b)[0]
        for t in range(1, T):
            used = sum(1 for (u, bb, c, tt) in x if bb == b and tt == t)
            z[t + 1] = z[t] + inst.arrivals(b)[t] - used
        for t in range(1, T + 1):
            if z[t] < 0:
                errs.append(f"energy_flow: z[{b},{t}] = {z[t]} < 0")
            for (u, bb, c, tt) in x:
                if bb == b and tt == t and z[t] < 1:
                    errs.append(f"energy_avail: user {u + 1} at b={b} t={t} without energy")
        # the ILP leaves the last slot's usage unconstrained beyond z >= 1;
        # check the full prefix balance too
        used_total = sum(1 for (u, bb, c, tt) in x if bb == b)
        if used_total > sum(inst.arrivals(b)):
            errs.append(f"BS {b} uses more energy than it harvests")
    for (u, b, c, t) in x:
        n = inst.nu[u][b][c]
        held = sum(1 for s in range(1, T + 1) if x.get((u, b, c, s)))
        if n == UNSERVABLE or held != n:
            errs.append(f"demand: user {u + 1} holds {held} slots on (b={b}, c={c}), needs {n}")
        if t > inst.deadlines[u]:
            errs.append(f"deadline: user {u + 1} at t={t} after deadline {inst.deadlines[u]}")
    return sorted(set(errs))


# -- LP export -------------------------------------------------------------


def _coef(v: Fraction | int) -> str:
    v = Fraction(v)
    if v.denominator == 1:
        return str(v.numerator)
    return repr(float(v))


def _term(coef, name: str, first: bool) -> str:
    coef = Fraction(coef)
    sign = "-" if coef < 0 else ("" if first else "+")
    mag = abs(coef)
    body = name if mag == 1 else f"{_coef(mag)} {name}"
    return f"{sign} {body}".strip() if not first else (f"- {body}" if coef < 0 else body)


_LINE_WIDTH = 250


def _linear(terms: Sequence[tuple]) -> str:
    """Terms joined with spaces, broken onto indented lines to stay under 255 characters."""
    if not terms:
        return "0"
    lines, cur = [], ""
    for i, (coef, name) in enumerate(terms):
        tok = _term(coef, name, i == 0)
        if cur and len(cur) + 1 + len(tok) > _LINE_WIDTH:
            lines.append(cur)
            cur = "   " + tok
        else:
            cur = f"{cur} {tok}" if cur else tok
    lines.append(cur)
    return "\n".join(lines)


def ilp_variable_names(inst: Instance) -> tuple[list[str], list[str]]:
    U, B, C, T = inst.num_users, inst.num_bs, inst.num_channels, inst.num_slots
    xs = [f"x_{u}_{b}_{c}_{t}" for u in range(1, U + 1) for b in range(1, B + 1)
          for c in range(1, C + 1) for t in range(1, T + 1)]
    zs = [f"z_{b}_{t}" for b in range(1, B + 1) for t in range(1, T + 1)]
    return xs, zs


def export_ilp(inst: Instance) -> str:
    """The full integer program in CPLEX LP text format.

    Variables: binary ``x_u_b_c_t`` (user u on BS b, channel c, slot t) and
    continuous ``z_b_t`` (energy level of BS b at slot t), all 1-based.
    Pairs with an unservable requirement keep their variable but are fixed
    to 0.  Big-M is ``T``.
    """
    U, B, C, T = inst.num_users, inst.num_bs, inst.num_channels, inst.num_slots
    Us, Bs, Cs, Ts = range(1, U + 1), range(1, B + 1), range(1, C + 1), range(1, T + 1)

    def x(u, b, c, t):
        return f"x_{u}_{b}_{c}_{t}"

    def nu(u, b, c):
        return inst.nu[u - 1][b - 1][c - 1]

    lines = ["\\ user association, scheduling and channel allocation", "Maximize"]
    obj = []
    for u in Us:
        for b in Bs:
            for c in Cs:
                if nu(u, b, c) == UNSERVABLE:
                    continue
                for t in Ts:
                    obj.append((Fraction(1, int(nu(u, b, c))), x(u, b, c, t)))
    lines.append(" obj: " + _linear(obj))
    lines.append("Subject To")
    rows: list[str] = []

    def add(name: str, terms, sense: str, rhs) -> None:
        rows.append(f" {name}: {_linear(terms)} {sense} {_coef(rhs)}")

    for u in Us:
        for b in Bs:
            for t in Ts:
                for tp in Ts:
                    for c in Cs:
                        for cp in Cs:
                            if c != cp:
                                add(f"one_channel_{u}_{b}_{t}_{tp}_{c}_{cp}", [(1, x(u, b, c, t)), (1, x(u, b, cp, tp))], "<=", 1)
    for b in Bs:
        for c in Cs:
            for t in Ts:
                add(f"collision_{b}_{c}_{t}", [(1, x(u, b, c, t)) for u in Us], "<=", 1)
    for u in Us:
        for b in Bs:
            for bp in Bs:
                if b == bp:
                    continue
                for t in Ts:
                    for tp in Ts:
                        for c in Cs:
                            for cp in Cs:
                                add(f"one_bs_{u}_{b}_{bp}_{t}_{tp}_{c}_{cp}", [(1, x(u, b, c, t)), (1, x(u, bp, cp, tp))], "<=", 1)
    for b in Bs:
        add(f"energy_start_{b}", [(1, f"z_{b}_1")], "=", inst.arrivals(b - 1)[0])
        for t in range(1, T):
            terms = [(1, f"z_{b}_{t + 1}"), (-1, f"z_{b}_{t}")]
            terms += [(1, x(u, b, c, t)) for u in Us for c in Cs]
            add(f"energy_flow_{b}_{t}", terms, "=", inst.arrivals(b - 1)[t])
    for u in Us:
        for b in Bs:
            for c in Cs:
                for t in Ts:
                    add(f"energy_avail_{u}_{b}_{c}_{t}", [(1, x(u, b, c, t)), (-1, f"z_{b}_{t}")], "<=", 0)
    for u in Us:
        for b in Bs:
            for c in Cs:
                n = nu(u, b, c)
                if n == UNSERVABLE:
                    continue
                n = int(n)
                for t in Ts:
                    total = [(1, x(u, b, c, s)) for s in Ts]
                    add(f"demand_min_{u}_{b}_{c}_{t}", total[:t - 1] + [(1 - n, x(u, b, c, t))] + total[t:], ">=", 0)
                    add(f"demand_max_{u}_{b}_{c}_{t}", total[:t - 1] + [(1 - n + T, x(u, b, c, t))] + total[t:], "<=", T)
    for u in Us:
        d = inst.deadlines[u - 1]
        for b in Bs:
            for c in Cs:
                for t in Ts:
                    if t > d:
                        add(f"deadline_{u}_{b}_{c}_{t}", [(t, x(u, b, c, t))], "<=", d)
    lines += rows
    lines.append("Bounds")
    for b in Bs:
        for t in Ts:
            lines.append(f" z_{b}_{t} >= 0")
    for u in Us:
        for b in Bs:
            for c in Cs:
                if nu(u, b, c) == UNSERVABLE:
                    for t in Ts:
                        lines.append(f" {x(u, b, c, t)} = 0")
    lines.append("Binaries")
    xs, _ = ilp_variable_names(inst)
    lines.append(" " + _linear([(1, v) for v in xs]).replace(" + ", " "))
    lines.append("End")
    return "\n".join(lines) + "\n"


# -- compact MILP (HiGHS) --------------------------------------------------


def solve_milp(inst: Instance, time_limit: float | None = None) -> int:
    """Optimum via a compact integer program solved by HiGHS.

    Binary ``y[u,b,c]`` picks a (BS, channel) per user.  With ``D(k)`` the
    slots demanded by users due by ``k`` on one channel, the fewest slots
    that channel must use by ``t`` is ``max_k D(k) - (k - t)``; an auxiliary
    ``m[b,c,t]`` bounds it from above and ``sum_c m[b,c,t]`` may not exceed
    the energy harvested by ``t``.  Deadlines alone require ``D(k) <= k``.
    Independent of the search in :func:`solve_exact`, and much faster at
    larger sizes.
    """
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import coo_matrix

    T, B, C, U = inst.num_slots, inst.num_bs, inst.num_channels, inst.num_users
    deadlines = inst.deadlines
    ys = [(u, b, c, int(inst.nu[u][b][c])) for u in range(U) for b in range(B) for c in range(C)
          if inst.nu[u][b][c] != UNSERVABLE and inst.nu[u][b][c] <= deadlines[u]]
    if not ys:
        return 0
    ny = len(ys)
    m_index = {}
    for b in range(B):
        for c in range(C):
            for t in range(1, T + 1):
                m_index[(b, c, t)] = ny + len(m_index)
    nvar = ny + len(m_index)
    rows, cols, vals, lo, hi = [], [], [], [], []

    def row(entries, lower, upper):
        r = len(lo)
        for col, v in entries:
            rows.append(r)
            cols.append(col)
            vals.append(v)
        lo.append(lower)
        hi.append(upper)

    per_user: dict[int, list[int]] = {}
    per_bc: dict[tuple[int, int], list[int]] = {}
    for i, (u, b, c, n) in enumerate(ys):
        per_user.setdefault(u, []).append(i)
        per_bc.setdefault((b, c), []).append(i)
    for idx in per_user.values():
        row([(i, 1.0) for i in idx], -np.inf, 1.0)
    for (b, c), idx in per_bc.items():
        ks = sorted({deadlines[ys[i][0]] for i in idx})
        for k in ks:
            due = [(i, float(ys[i][3])) for i in idx if deadlines[ys[i][0]] <= k]
            row(due, -np.inf, float(k))
            for t in range(1, k + 1):
                # D(k) - m[b,c,t] <= k - t
                row(due + [(m_index[(b, c, t)], -1.0)], -np.inf, float(k - t))
    for b in range(B):
        cum = 0
        for t in range(1, T + 1):
            cum += inst.arrivals(b)[t - 1]
            row([(m_index[(b, c, t)], 1.0) for c in range(C)], -np.inf, float(cum))
    A = coo_matrix((vals, (rows, cols)), shape=(len(lo), nvar)).tocsr()
    cost = np.zeros(nvar)
    cost[:ny] = -1.0
    integrality = np.zeros(nvar)
    integrality[:ny] = 1
    upper = np.full(nvar, np.inf)
    upper[:ny] = 1.0
    options = {"time_limit": time_limit} if time_limit else {}
    res = milp(cost, constraints=LinearConstraint(A, lo, hi), integrality=integrality,
               bounds=Bounds(np.zeros(nvar), upper), options=options)
    if res.status != 0:
        raise OracleLimitError(f"MILP solver stopped: {res.message}")
    return int(round(-res.fun))
