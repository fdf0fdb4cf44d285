import pytest

from conftest import (FIG2_ARRIVALS, fig2_schedule, random_feasible_schedule, random_instance,
                      tightness_instance)
from ebsched.model import make_instance
from ebsched.oracle import moore_hodgson, solve_exact
from ebsched.scsb import (PER_PAIR, PER_SLOT, EnergyLedger, Schedule, check_outcome, edf_order, is_feasible,
                          is_nonpreemptive, largest_user, schedule_scsb1, starting_completion, to_nonpreemptive,
                          update_reschedule)


def powered(s: Schedule, arrivals) -> EnergyLedger:
    led = EnergyLedger.fresh(arrivals)
    for t, row in enumerate(s.grid, start=1):
        for c, v in enumerate(row):
            if v:
                led.consume_earliest((t, c))
    return led


class TestFeasibility:
    def test_fig2_is_feasible(self):
        s, nu, d = fig2_schedule()
        assert is_feasible(s, nu, d, FIG2_ARRIVALS)

    def test_empty_schedule(self):
        assert is_feasible(Schedule.empty(4), [2], [3], [0, 0, 0, 0])

    def test_energy_before_arrival(self):
        rep = is_feasible(Schedule.from_strip([1, 0]), [1], [2], [0, 1])
        assert not rep
        assert any("energy" in v for v in rep.violations)

    def test_deadline_and_count_violations(self):
        s = Schedule.from_strip([0, 1, 1])
        assert not is_feasible(s, [2], [2], [2, 0, 0])
        assert not is_feasible(s, [3], [3], [2, 0, 0])
        assert is_feasible(s, [2], [3], [2, 0, 0])

    def test_grid_user_missing_from_served(self):
        s = Schedule([[1], [0]], [])
        assert not is_feasible(s, [1], [2], [1, 0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            is_feasible(Schedule.empty(3), [], [], [1, 1])

    def test_slot_mode_counts_once_per_slot(self):
        s = Schedule([[1, 2], [0, 0]], [1, 2])
        assert not is_feasible(s, [[1, 1], [1, 1]], [1, 1], [1, 0], PER_PAIR)
        assert is_feasible(s, [[1, 1], [1, 1]], [1, 1], [1, 0], PER_SLOT)

    def test_render(self):
        s, _, _ = fig2_schedule()
        text = s.render(FIG2_ARRIVALS, {1: "j", 2: "k", 3: "l"})
        lines = text.splitlines()
        assert len(lines) == 3
        assert lines[1].split()[1:] == ["0", "0", "j", "j", "j", "0", "0", "k", "k", "0", "l", "0", "l", "0"]


class TestScsb1:
    def test_no_users(self):
        out = schedule_scsb1(make_instance([], [], [1, 1]))
        assert out.served_count == 0
        assert out.schedule.grid == [[0], [0]]

    def test_tightness_bs1(self):
        inst = tightness_instance()
        assert schedule_scsb1(inst, 0).served_count == 2
        assert schedule_scsb1(inst, 1).served_count == 2

    def test_single_user_needs_energy_in_time(self):
        assert schedule_scsb1(make_instance([1], [1], [0, 1])).served_count == 0
        assert schedule_scsb1(make_instance([1], [2], [0, 1])).served_count == 1

    def test_unservable_never_scheduled(self):
        out = schedule_scsb1(make_instance([float("inf"), 5, 1], [3, 3, 3], [3, 0, 0]))
        assert out.served == [3]

    def test_matches_oracle(self, rng):
        for _ in range(200):
            inst = random_instance(rng, rng.randint(0, 8), T=rng.randint(1, 8))
            out = schedule_scsb1(inst)
            assert check_outcome(out, inst)
            assert out.served_count == solve_exact(inst).optimum
            assert out.ledger.is_conserved()

    def test_serialisation(self):
        out = schedule_scsb1(make_instance([1, 2], [2, 3], [1, 1, 1]))
        doc = out.to_dict()
        assert Schedule.from_dict(doc).grid == out.schedule.grid
        assert doc["served"] == out.served


class TestRunInvariants:
    """Properties observed after every user through the instrumentation hook."""

    def test_prefix_optimal_feasible_and_evicts_largest(self, rng):
        for _ in range(150):
            T = rng.randint(1, 7)
            inst = random_instance(rng, rng.randint(1, 7), T=T)
            need = {u: inst.nu[u - 1][0][0] for u in range(1, inst.num_users + 1)}
            seen, prev = [], set()

            def hook(u, sched, led):
                seen.append(u)
                rep = is_feasible(sched, [inst.nu[v][0] for v in range(inst.num_users)],
                                  inst.deadlines, inst.arrivals(0))
                assert rep, rep.violations
                assert led.is_conserved()
                now = set(sched.served)
                evicted = (prev | {u}) - now
                if evicted:
                    assert min(need[v] for v in evicted) >= max((need[v] for v in now), default=0)
                prev.clear()
                prev.update(now)
                sub = inst.restrict(users=[v - 1 for v in seen])
                assert len(now) == solve_exact(sub).optimum

            schedule_scsb1(inst, hook=hook)

    def test_edf_order_and_largest_user(self):
        need = {1: 2, 2: 1, 3: 2, 4: 3}
        assert edf_order([1, 2, 3, 4], [5, 5, 2, 5], need) == [3, 2, 1, 4]
        assert largest_user([1, 2, 3], need) == 1
        assert largest_user([1, 2, 3, 4], need) == 4


class TestUpdate:
    def test_remove_only_user(self):
        s = Schedule.from_strip([0, 1, 1])
        led = powered(s, [2, 0, 1])
        s2, led2, served, t, r = update_reschedule(s, led, [1], 1)
        assert s2.grid == [[0], [0], [0]]
        assert led2.residual == [2, 0, 1]
        assert served == [] and (t, r) == (1, 1)

    def test_fig2_remove_j(self):
        s, nu, d = fig2_schedule()
        led = powered(s, FIG2_ARRIVALS)
        s2, led2, served, _, _ = update_reschedule(s, led, s.served, 1)
        assert served == [2, 3]
        assert s2.slots_of(2) == [(3, 0), (4, 0)]
        assert s2.slots_of(3) == [(5, 0), (8, 0)]
        assert is_feasible(s2, nu, d, FIG2_ARRIVALS)
        assert led2.is_conserved()
        # input untouched
        assert s.slots_of(1) == [(3, 0), (4, 0), (5, 0)]

    def test_not_served(self):
        s = Schedule.from_strip([1])
        with pytest.raises(ValueError):
            update_reschedule(s, powered(s, [1]), [1], 2)

    def test_conservation_random(self, rng):
        for _ in range(500):
            s, nu, d, A = random_feasible_schedule(rng)
            if not s.served:
                continue
            led = powered(s, A)
            ell = rng.choice(s.served)
            s2, led2, served, _, _ = update_reschedule(s, led, s.served, ell)
            assert led2.is_conserved()
            assert sum(led2.residual) + sum(1 for row in s2.grid if row[0]) == sum(A)
            assert ell not in served and set(served) == set(s.served) - {ell}
            for key, arrival in led2.provenance.items():
                assert arrival <= key[0]
            # removing the largest keeps everyone feasible
            biggest = max(s.served, key=lambda u: (nu[u - 1], -u))
            s3, _, _, _, _ = update_reschedule(s, led, s.served, biggest)
            assert is_feasible(s3, nu, d, A)


class TestNonPreemptive:
    def test_starting_completion(self):
        s, _, _ = fig2_schedule()
        assert starting_completion(s, 1) == (3, 5)
        assert starting_completion(s, 3) == (11, 13)
        assert starting_completion(Schedule.from_strip([0] * 6 + [4]), 4) == (7, 7)
        with pytest.raises(LookupError):
            starting_completion(s, 9)

    def test_fig2(self):
        s, nu, d = fig2_schedule()
        out = to_nonpreemptive(s, nu, d, FIG2_ARRIVALS)
        assert out.slots_of(3) == [(12, 0), (13, 0)]
        assert out.slots_of(1) == s.slots_of(1)
        assert out.slots_of(2) == s.slots_of(2)

    def test_idempotent(self):
        s = Schedule.from_strip([1, 1, 0, 2])
        assert to_nonpreemptive(s, [2, 1], [2, 4], [3, 0, 0, 0]).grid == s.grid

    def test_slot_charging_split_is_refused(self):
        # user 2 shares slot 2 with user 1; moving it to slot 3 would need a second unit
        s = Schedule([[0, 0], [1, 2], [0, 0], [0, 2]], [1, 2])
        with pytest.raises(ValueError, match="per-slot"):
            to_nonpreemptive(s, [[1, 1], [2, 2]], [2, 4], [1, 0, 0, 1], PER_SLOT)
        out = to_nonpreemptive(s, [[1, 1], [2, 2]], [2, 4], [2, 0, 0, 1], PER_PAIR)
        assert out.slots_of(2) == [(3, 1), (4, 1)]

    def test_rejects_infeasible(self):
        with pytest.raises(ValueError):
            to_nonpreemptive(Schedule.from_strip([1]), [1], [1], [0])

    def test_random(self, rng):
        for _ in range(500):
            s, nu, d, A = random_feasible_schedule(rng)
            out = to_nonpreemptive(s, nu, d, A)
            assert is_nonpreemptive(out)
            assert out.served == s.served
            assert is_feasible(out, nu, d, A)
            for u in s.served:
                S, Cu = starting_completion(s, u)
                S2, C2 = starting_completion(out, u)
                assert C2 <= Cu
                if C2 == Cu:
                    assert S2 >= S

    def test_nested_user_ends_before_outer_block(self):
        # user 2 wraps around user 1: both cannot keep their completion slots
        s = Schedule.from_strip([2, 2, 2, 1, 2])
        out = to_nonpreemptive(s, [1, 4], [4, 5], [5, 0, 0, 0, 0])
        assert out.grid == [[1], [2], [2], [2], [2]]

    def test_scsb1_output_made_contiguous(self, rng):
        for _ in range(100):
            inst = random_instance(rng, rng.randint(1, 8), T=rng.randint(1, 10))
            out = schedule_scsb1(inst)
            nu = [inst.nu[u][0] for u in range(inst.num_users)]
            np_s = to_nonpreemptive(out.schedule, nu, inst.deadlines, inst.arrivals(0))
            assert is_feasible(np_s, nu, inst.deadlines, inst.arrivals(0))
            assert np_s.served == out.served


def test_moore_hodgson_reduction(rng):
    for _ in range(300):
        U, T = rng.randint(1, 10), rng.randint(1, 10)
        nu = [rng.randint(1, T) for _ in range(U)]
        d = [rng.randint(1, T) for _ in range(U)]
        inst = make_instance(nu, d, [sum(nu)] + [0] * (T - 1))
        assert schedule_scsb1(inst).served_count == moore_hodgson(nu, d, T)
