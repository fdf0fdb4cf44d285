import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ebsched.model import (UNSERVABLE, EnergyProfile, GenerationParams, Instance, RadioModel, UserRequest,
                           generate_instance, make_instance, pathloss_gain, rate, required_slots, sinr,
                           slots_for_rate)


def radio(gains, power=(1.0,), noise=1.0, tau=1.0, W=20e6):
    g = np.asarray(gains, dtype=float)
    return RadioModel(transmit_power=tuple(power), bandwidth=W, noise_power=noise, slot_duration=tau, gains=g)


class TestSinr:
    def test_single_bs(self):
        assert sinr(0, 0, 0, radio([[[0.5]]], power=(2.0,), noise=0.25)) == pytest.approx(4.0)

    def test_zero_gain(self):
        assert sinr(0, 0, 0, radio([[[0.0]]])) == 0.0

    def test_one_interferer(self):
        assert sinr(0, 0, 0, radio([[[1.0], [1.0]]], power=(1.0, 1.0))) == pytest.approx(0.5)

    def test_bad_index(self):
        with pytest.raises(IndexError):
            sinr(1, 0, 0, radio([[[1.0]]]))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=4), st.floats(1.01, 5.0))
    def test_monotone(self, g, factor):
        base = radio([[[x] for x in g]], power=(1.0,) * len(g))
        own = radio([[[g[0] * factor]] + [[x] for x in g[1:]]], power=(1.0,) * len(g))
        louder = radio([[[g[0]], [g[1] * factor]] + [[x] for x in g[2:]]], power=(1.0,) * len(g))
        s = sinr(0, 0, 0, base)
        assert sinr(0, 0, 0, own) > s
        assert sinr(0, 0, 0, louder) < s


def test_rate_examples():
    assert rate(0) == 0
    assert rate(1) == 1
    assert rate(3) == 2
    with pytest.raises(ValueError):
        rate(-0.1)


class TestRequiredSlots:
    def test_ceiling(self):
        # 2.1 slots of data
        assert slots_for_rate(21, 1.0, 1, 1.0, 10.0) == 3

    def test_exact_integer(self):
        assert slots_for_rate(40, 1.0, 1, 1.0, 10.0) == 4

    def test_megabit(self):
        assert slots_for_rate(10**6, 0.25, 1, 1.0, 20e6) == 1

    def test_zero_rate_is_unservable(self):
        assert slots_for_rate(10, 0.0, 1, 1.0, 1.0) == UNSERVABLE
        m = radio([[[0.0]]])
        assert required_slots(0, 0, 0, m, UserRequest(100, 1)) == UNSERVABLE

    def test_through_radio(self):
        # sinr 3 -> rate 2; 80 bits over W=10, tau=1 -> 4 slots
        m = radio([[[3.0]]], noise=1.0, W=10.0)
        assert required_slots(0, 0, 0, m, UserRequest(80, 1)) == 4

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 10**6), st.floats(0.01, 20), st.floats(1.0, 3.0), st.integers(1, 4))
    def test_monotone(self, size, r, f, C):
        n = slots_for_rate(size, r, C, 1e-3, 20e6)
        assert slots_for_rate(size, r * f, C, 1e-3, 20e6) <= n
        assert slots_for_rate(size + 1000, r, C, 1e-3, 20e6) >= n


def test_pathloss_floor():
    p = GenerationParams()
    g = pathloss_gain(np.array([0.0, 0.5, 1.0, 10.0]), p)
    assert g[0] == g[1] == g[2] == pytest.approx(10 ** (-3.06))
    assert g[3] == pytest.approx(10 ** (-(30.6 + 36.7) / 10))


class TestGeneration:
    def test_deterministic(self):
        p = GenerationParams(seed=7)
        assert generate_instance(p, (8, 3, 2, 10)) == generate_instance(p, (8, 3, 2, 10))

    def test_no_energy(self):
        inst = generate_instance(GenerationParams(seed=1, poisson_rate=0.0), (5, 2, 1, 10))
        assert all(a == 0 for row in inst.energy.arrivals for a in row)

    def test_poisson_mean(self):
        rng = np.random.default_rng(3)
        p = GenerationParams(poisson_rate=0.5)
        totals = [sum(generate_instance(p, (1, 1, 1, 10), rng).arrivals(0)) for _ in range(10_000)]
        # sum of 10 Poisson(0.5) is Poisson(5); std of the mean is sqrt(5/1e4)
        assert abs(np.mean(totals) - 5.0) <= 3 * math.sqrt(5.0 / 10_000)

    def test_invariants_hold(self):
        rng = np.random.default_rng(5)
        for mode in ("uniform", "common"):
            p = GenerationParams(deadline_mode=mode)
            for _ in range(50):
                inst = generate_instance(p, (6, 2, 3, 8), rng)
                for per_user in inst.nu:
                    for row in per_user:
                        for v in row:
                            assert v == UNSERVABLE or 1 <= v <= 8
                assert all(1 <= d <= 8 for d in inst.deadlines)
                if mode == "common":
                    assert set(inst.deadlines) == {8}

    def test_bad_params(self):
        with pytest.raises(ValueError):
            GenerationParams(poisson_rate=-1)
        with pytest.raises(ValueError):
            GenerationParams(size_range=(10, 1))
        with pytest.raises(ValueError):
            generate_instance(GenerationParams(), (3, 0, 1, 5))


class TestInstance:
    def test_json_round_trip(self):
        inst = generate_instance(GenerationParams(seed=11), (6, 2, 2, 5))
        back = Instance.from_json(inst.to_json())
        assert back == inst
        assert back.to_json() == inst.to_json()

    def test_unservable_serialises_as_null(self):
        inst = make_instance([math.inf, 2], [1, 2], [1, 1])
        assert inst.to_dict()["nu"][0] == [[None]]
        assert Instance.from_dict(inst.to_dict()).nu[0][0][0] == UNSERVABLE

    def test_validation(self):
        with pytest.raises(ValueError):
            make_instance([1], [3], [1, 1])          # deadline beyond T
        with pytest.raises(ValueError):
            make_instance([0], [1], [1])             # zero requirement
        with pytest.raises(ValueError):
            EnergyProfile([[1, -1]])
        with pytest.raises(ValueError):
            UserRequest(0, 1)

    def test_restrict(self):
        inst = make_instance([[1, 2], [3, 4], [5, 6]], [1, 2, 3], [[1, 1, 1], [0, 0, 0]])
        sub = inst.restrict(users=[2, 0], bs=[1])
        assert sub.num_bs == 1
        assert [per[0][0] for per in sub.nu] == [6, 2]
        assert sub.deadlines == (3, 1)
