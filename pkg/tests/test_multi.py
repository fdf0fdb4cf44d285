import math

import pytest

from conftest import random_instance, tightness_instance
from ebsched.model import make_instance
from ebsched.multi import (allocate_channels, highest_index, lowest_index, schedule_mcmb, schedule_mcsb,
                           schedule_scmb)
from ebsched.oracle import solve_exact, validate_assignment
from ebsched.scsb import PER_SLOT, check_outcome, schedule_scsb1


def ratio(alg, opt):
    return sum(alg) / sum(opt) if sum(opt) else 1.0


class TestAllocation:
    def test_single_channel(self):
        inst = make_instance([3, 1, 2], [3, 3, 3], [1, 1, 1])
        assert allocate_channels(inst).chan == {1: 0, 2: 0, 3: 0}

    def test_strict_argmin(self):
        inst = make_instance([[[3, 2]]], [3], [1, 1, 1])
        assert allocate_channels(inst).chan == {1: 1}

    def test_least_used_tie(self):
        inst = make_instance([[[2, 2]], [[2, 2]]], [3, 3], [1, 1, 1])
        assert allocate_channels(inst).chan == {1: 0, 2: 1}

    def test_all_unservable(self):
        inst = make_instance([[[math.inf, math.inf]], [[1, 2]]], [3, 3], [1, 1, 1])
        alloc = allocate_channels(inst)
        assert alloc.unservable == {1}
        assert alloc.chan == {2: 0}


class TestMcsb:
    def test_reduces_to_scsb1(self, rng):
        for _ in range(100):
            inst = random_instance(rng, rng.randint(0, 8), T=rng.randint(1, 8))
            assert schedule_mcsb(inst).to_json() == schedule_scsb1(inst).to_json()

    def test_enough_channels(self):
        # every user has its own best channel and energy is plentiful
        U, T = 4, 3
        nu = [[[1 if c == u else 3 for c in range(U)]] for u in range(U)]
        inst = make_instance(nu, [1, 1, 1, 1], [U * T, 0, 0])
        out = schedule_mcsb(inst)
        assert out.served_count == U
        assert all(row == [1, 2, 3, 4] for row in out.schedule.grid[:1])

    def test_feasible_both_energy_modes(self, rng):
        for _ in range(200):
            inst = random_instance(rng, rng.randint(1, 7), C=rng.randint(1, 3), T=rng.randint(1, 7))
            for mode in ("pair", "slot"):
                out = schedule_mcsb(inst, energy_mode=mode)
                rep = check_outcome(out, inst, 0, mode)
                assert rep, rep.violations
                assert out.ledger.is_conserved()

    def test_slot_mode_serves_at_least_pair_mode_when_energy_is_scarce(self):
        # two users on different channels can share one unit in the same slot
        inst = make_instance([[[1, 2]], [[2, 1]]], [1, 1], [1])
        assert schedule_mcsb(inst).served_count == 1
        assert schedule_mcsb(inst, energy_mode=PER_SLOT).served_count == 2

    def test_near_optimal_on_average(self, rng):
        alg, opt = [], []
        for _ in range(200):
            inst = random_instance(rng, rng.randint(1, 6), C=2, T=rng.randint(1, 6))
            alg.append(schedule_mcsb(inst).served_count)
            opt.append(solve_exact(inst).optimum)
            assert alg[-1] <= opt[-1]
        assert ratio(alg, opt) >= 0.85


class TestScmb:
    def test_single_bs_is_scsb1(self, rng):
        for _ in range(100):
            inst = random_instance(rng, rng.randint(0, 8), T=rng.randint(1, 8))
            out = schedule_scmb(inst)
            assert out.per_bs[0].to_json() == schedule_scsb1(inst).to_json()

    def test_needs_one_channel(self):
        with pytest.raises(ValueError):
            schedule_scmb(make_instance([[[1, 1]]], [1], [1]))

    def test_tightness(self):
        inst = tightness_instance()
        assert solve_exact(inst).optimum == 4
        for pick in (lowest_index, highest_index):
            total = schedule_scmb(inst, pick).served_total
            assert total in (2, 3, 4)
            assert 2 * total >= 4

    def test_half_bound_and_average(self, rng):
        alg, opt = [], []
        for _ in range(200):
            inst = random_instance(rng, rng.randint(1, 8), B=rng.randint(1, 3), T=rng.randint(1, 6))
            out = schedule_scmb(inst)
            o = solve_exact(inst).optimum
            assert 2 * out.served_total >= o
            assert out.served_total >= math.ceil(o / 2)
            alg.append(out.served_total)
            opt.append(o)
        assert ratio(alg, opt) >= 0.9


class TestMcmb:
    def test_structure(self, rng):
        for _ in range(200):
            inst = random_instance(rng, rng.randint(1, 8), B=rng.randint(1, 3), C=rng.randint(1, 3),
                                   T=rng.randint(1, 6))
            out = schedule_mcmb(inst)
            served = [u for o in out.per_bs.values() for u in o.served]
            assert len(served) == len(set(served))
            assert out.served_total == len(served)
            assert all(a >= b for a, b in zip(out.rounds, out.rounds[1:]))
            assert len(out.used_bs) <= inst.num_bs
            assert validate_assignment(inst, {b: o.schedule for b, o in out.per_bs.items()}) == []
            for b, o in out.per_bs.items():
                assert check_outcome(o, inst, b)

    def test_reductions(self, rng):
        for _ in range(100):
            inst = random_instance(rng, rng.randint(0, 7), C=rng.randint(1, 3), T=rng.randint(1, 6))
            assert schedule_mcmb(inst).per_bs[0].to_json() == schedule_mcsb(inst).to_json()
            inst = random_instance(rng, rng.randint(0, 7), B=rng.randint(1, 3), T=rng.randint(1, 6))
            assert schedule_mcmb(inst).to_json() == schedule_scmb(inst).to_json()

    def test_near_optimal_on_average(self, rng):
        alg, opt = [], []
        for _ in range(100):
            inst = random_instance(rng, rng.randint(1, 6), B=rng.randint(1, 3), C=2, T=rng.randint(1, 5))
            alg.append(schedule_mcmb(inst).served_total)
            opt.append(solve_exact(inst).optimum)
            assert alg[-1] <= opt[-1]
        assert ratio(alg, opt) >= 0.85

    def test_serialisation(self):
        out = schedule_mcmb(tightness_instance())
        doc = out.to_dict()
        assert doc["served_total"] == out.served_total
        assert set(doc["bs"]) == {str(b + 1) for b in out.used_bs}
