"""Domain types, radio-layer computations and random instance generation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

#: Marker for a (user, BS, channel) triple that can never be served.
UNSERVABLE = math.inf


@dataclass(frozen=True)
class RadioModel:
    """Static radio parameters of one frame.

    ``gains[u][b][c]`` is the linear power gain between user ``u`` and
    BS ``b`` on channel ``c``.
    """

    transmit_power: tuple[float, ...]
    bandwidth: float
    noise_power: float
    slot_duration: float
    gains: np.ndarray

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float)
        if gains.ndim != 3:
            raise ValueError("gains must be a U x B x C tensor")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "transmit_power", tuple(float(p) for p in self.transmit_power))
        if len(self.transmit_power) != gains.shape[1]:
            raise ValueError("one transmit power per BS is required")
        if min(self.transmit_power, default=1.0) <= 0:
            raise ValueError("transmit powers must be positive")
        if self.bandwidth <= 0 or self.noise_power <= 0 or self.slot_duration <= 0:
            raise ValueError("bandwidth, noise power and slot duration must be positive")
        if np.any(gains < 0):
            raise ValueError("gains must be non-negative")

    @property
    def num_users(self) -> int:
        return self.gains.shape[0]

    @property
    def num_bs(self) -> int:
        return self.gains.shape[1]

    @property
    def num_channels(self) -> int:
        return self.gains.shape[2]


@dataclass(frozen=True)
class UserRequest:
    size: int
    deadline: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"request size must be >= 1 bit, got {self.size}")
        if self.deadline < 1:
            raise ValueError(f"deadline must be >= 1, got {self.deadline}")


@dataclass(frozen=True)
class EnergyProfile:
    """Per-BS energy arrivals in slot units, ``arrivals[b][t]``."""

    arrivals: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(a) for a in row) for row in self.arrivals)
        object.__setattr__(self, "arrivals", rows)
        for row in rows:
            if any(a < 0 for a in row):
                raise ValueError("energy arrivals must be non-negative")
        if len({len(row) for row in rows}) > 1:
            raise ValueError("every BS needs the same number of slots")

    @property
    def num_bs(self) -> int:
        return len(self.arrivals)


def _freeze_nu(nu) -> tuple:
    out = []
    for per_user in nu:
        rows = []
        for per_bs in per_user:
            rows.append(tuple(UNSERVABLE if v is None or v == UNSERVABLE else int(v) for v in per_bs))
        out.append(tuple(rows))
    return tuple(out)


@dataclass(frozen=True)
class Instance:
    """One frame: users, required-slot tensor ``nu[u][b][c]`` and energy.

    Users, BSs and channels are indexed from 0 in the containers; user
    ids shown in schedules are ``index + 1``.  Slots and deadlines are
    1-based, ``1..num_slots``.
    """

    num_slots: int
    users: tuple[UserRequest, ...]
    nu: tuple
    energy: EnergyProfile
    num_bs: int = field(default=0)
    num_channels: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "nu", _freeze_nu(self.nu))
        if not isinstance(self.energy, EnergyProfile):
            object.__setattr__(self, "energy", EnergyProfile(self.energy))
        if self.num_slots < 1:
            raise ValueError("num_slots must be >= 1")
        B = self.energy.num_bs
        if self.num_bs and self.num_bs != B:
            raise ValueError("num_bs disagrees with the energy profile")
        object.__setattr__(self, "num_bs", B)
        if B < 1:
            raise ValueError("at least one BS is required")
        if any(len(row) != self.num_slots for row in self.energy.arrivals):
            raise ValueError("energy rows must have num_slots entries")
        if len(self.nu) != len(self.users):
            raise ValueError("nu must have one entry per user")
        C = self.num_channels or (len(self.nu[0][0]) if self.nu else 1)
        object.__setattr__(self, "num_channels", C)
        for u, per_user in enumerate(self.nu):
            if len(per_user) != B or any(len(row) != C for row in per_user):
                raise ValueError(f"nu[{u}] is not {B} x {C}")
            for row in per_user:
                for v in row:
                    if v != UNSERVABLE and v < 1:
                        raise ValueError("finite required slots must be >= 1")
        for u, req in enumerate(self.users):
            if req.deadline > self.num_slots:
                raise ValueError(f"user {u + 1} deadline {req.deadline} exceeds T={self.num_slots}")

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def deadlines(self) -> tuple[int, ...]:
        return tuple(r.deadline for r in self.users)

    def arrivals(self, b: int) -> tuple[int, ...]:
        return self.energy.arrivals[b]

    def restrict(self, users: Sequence[int] | None = None, bs: Sequence[int] | None = None) -> "Instance":
        """Sub-instance over the given user and BS indices (order kept)."""
        users = range(self.num_users) if users is None else list(users)
        bs = range(self.num_bs) if bs is None else list(bs)
        return Instance(
            num_slots=self.num_slots,
            users=[self.users[u] for u in users],
            nu=[[self.nu[u][b] for b in bs] for u in users],
            energy=EnergyProfile([self.energy.arrivals[b] for b in bs]),
        )

    def to_dict(self) -> dict:
        return {
            "T": self.num_slots,
            "users": [{"size": r.size, "deadline": r.deadline} for r in self.users],
            "nu": [[[None if v == UNSERVABLE else v for v in row] for row in per_user] for per_user in self.nu],
            "energy": [list(row) for row in self.energy.arrivals],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "Instance":
        nu = doc["nu"]
        channels = len(nu[0][0]) if nu else int(doc.get("C", 1))
        return cls(
            num_slots=int(doc["T"]),
            users=[UserRequest(int(u["size"]), int(u["deadline"])) for u in doc["users"]],
            nu=nu,
            energy=EnergyProfile(doc["energy"]),
            num_channels=channels,
        )

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        return cls.from_dict(json.loads(text))


def make_instance(nu, deadlines, arrivals, sizes=None, num_slots=None) -> Instance:
    """Build an instance directly from slot requirements.

    ``nu`` may be a flat per-user list (single BS, single channel), a
    ``U x B`` nested list (single channel) or the full ``U x B x C`` tensor.
    ``arrivals`` is one row per BS, or a flat row for a single BS.
    """
    if arrivals and not isinstance(arrivals[0], (list, tuple)):
        arrivals = [arrivals]
    T = num_slots if num_slots is not None else len(arrivals[0])
    tensor = []
    for v in nu:
        if not isinstance(v, (list, tuple)):
            tensor.append([[v]])
        elif v and not isinstance(v[0], (list, tuple)):
            tensor.append([[x] for x in v])
        else:
            tensor.append([list(row) for row in v])
    sizes = sizes or [1] * len(tensor)
    users = [UserRequest(int(s), int(d)) for s, d in zip(sizes, deadlines)]
    return Instance(num_slots=T, users=users, nu=tensor, energy=EnergyProfile(arrivals))


# -- radio layer -----------------------------------------------------------


def sinr(u: int, b: int, c: int, m: RadioModel) -> float:
    """Downlink SINR of user ``u`` served by ``b`` on channel ``c``.

    Every other BS is counted as a co-channel interferer.
    """
    U, B, C = m.gains.shape
    if not (0 <= u < U and 0 <= b < B and 0 <= c < C):
        raise IndexError(f"(u={u}, b={b}, c={c}) outside {U}x{B}x{C}")
    h = m.gains[u, :, c]
    signal = m.transmit_power[b] * h[b]
    interference = sum(m.transmit_power[k] * h[k] for k in range(B) if k != b)
    return float(signal / (m.noise_power + interference))


def rate(s: float) -> float:
    """Spectral efficiency ``log2(1 + s)`` in bps/Hz."""
    if s < 0 or math.isnan(s):
        raise ValueError(f"SINR must be non-negative, got {s}")
    return math.log2(1.0 + s)


def slots_for_rate(size: int, r: float, num_channels: int, slot_duration: float, bandwidth: float) -> float:
    """Slots needed to push ``size`` bits at rate ``r`` on a ``W/C`` channel."""
    if r <= 0:
        return UNSERVABLE
    need = size * num_channels / (slot_duration * bandwidth * r)
    # Guard against float noise turning an exact integer ratio into n + 1e-15.
    rounded = round(need)
    if abs(need - rounded) <= 1e-9 * max(1.0, need):
        return max(int(rounded), 1)
    return max(math.ceil(need), 1)


def required_slots(u: int, b: int, c: int, m: RadioModel, req: UserRequest) -> float:
    """Number of slots user ``u`` needs on (``b``, ``c``); ``UNSERVABLE`` if R = 0."""
    r = rate(sinr(u, b, c, m))
    return slots_for_rate(req.size, r, m.num_channels, m.slot_duration, m.bandwidth)


# -- random generation -----------------------------------------------------


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class GenerationParams:
    """Distributional parameters for random frames.

    Defaults follow the reference simulation setup.  ``slot_duration`` has
    no published value; 1 s is the setting under which the reference
    multi-BS curves are reproduced (see README).
    """

    area_side: float = 20.0
    pathloss_intercept_db: float = 30.6
    pathloss_slope_db: float = 36.7
    min_distance: float = 1.0
    transmit_power_dbm: float = 30.0
    bandwidth: float = 20e6
    noise_density_dbm_hz: float = -174.0
    slot_duration: float = 1.0
    poisson_rate: float = 0.5
    size_range: tuple[int, int] = (1_000, 1_000_000)
    deadline_mode: str = "uniform"
    seed: int | None = None

    def __post_init__(self):
        if self.poisson_rate < 0:
            raise ValueError("poisson_rate must be >= 0")
        lo, hi = self.size_range
        if lo < 1 or hi < lo:
            raise ValueError("size_range must be positive and ordered")
        if self.deadline_mode not in ("uniform", "common"):
            raise ValueError("deadline_mode must be 'uniform' or 'common'")
        if self.area_side <= 0 or self.slot_duration <= 0 or self.bandwidth <= 0:
            raise ValueError("area, slot duration and bandwidth must be positive")


def pathloss_gain(dist: np.ndarray, p: GenerationParams) -> np.ndarray:
    """Linear power gain from the log-distance pathloss law (metres)."""
    d = np.maximum(dist, p.min_distance)
    loss_db = p.pathloss_intercept_db + p.pathloss_slope_db * np.log10(d)
    return 10.0 ** (-loss_db / 10.0)


def generate_radio(p: GenerationParams, num_users: int, num_bs: int, num_channels: int,
                   rng: np.random.Generator) -> RadioModel:
    users_xy = rng.uniform(0.0, p.area_side, size=(num_users, 2))
    bs_xy = rng.uniform(0.0, p.area_side, size=(num_bs, 2))
    dist = np.linalg.norm(users_xy[:, None, :] - bs_xy[None, :, :], axis=2)
    gain = pathloss_gain(dist, p)
    gains = np.repeat(gain[:, :, None], num_channels, axis=2)
    # noise is integrated over one channel's share of the band
    noise = dbm_to_watts(p.noise_density_dbm_hz) * p.bandwidth / num_channels
    return RadioModel(
        transmit_power=(dbm_to_watts(p.transmit_power_dbm),) * num_bs,
        bandwidth=p.bandwidth,
        noise_power=noise,
        slot_duration=p.slot_duration,
        gains=gains,
    )


def generate_instance(p: GenerationParams, dims: tuple[int, int, int, int],
                      rng: np.random.Generator | None = None) -> Instance:
    """Draw a random frame of size ``(U, B, C, T)``.

    Deterministic for a fixed ``p.seed`` (or a caller-supplied ``rng``).
    """
    U, B, C, T = dims
    if U < 0 or B < 1 or C < 1 or T < 1:
        raise ValueError(f"invalid dimensions {dims}")
    if rng is None:
        rng = np.random.default_rng(p.seed)
    radio = generate_radio(p, U, B, C, rng)
    lo, hi = p.size_range
    sizes = rng.integers(lo, hi, size=U, endpoint=True)
    if p.deadline_mode == "uniform":
        deadlines = rng.integers(1, T, size=U, endpoint=True)
    else:
        deadlines = np.full(U, T)
    arrivals = rng.poisson(p.poisson_rate, size=(B, T))

    users = [UserRequest(int(s), int(d)) for s, d in zip(sizes, deadlines)]
    sinr_t = _sinr_tensor(radio)
    rates = np.log2(1.0 + sinr_t)
    nu = []
    for u in range(U):
        per_user = []
        for b in range(B):
            row = []
            for c in range(C):
                v = slots_for_rate(users[u].size, float(rates[u, b, c]), C, p.slot_duration, p.bandwidth)
                row.append(UNSERVABLE if v > T else v)
            per_user.append(row)
        nu.append(per_user)
    return Instance(num_slots=T, users=users, nu=nu, energy=EnergyProfile(arrivals.tolist()),
                    num_channels=C)


def _sinr_tensor(m: RadioModel) -> np.ndarray:
    received = m.gains * np.asarray(m.transmit_power)[None, :, None]
    total = received.sum(axis=1, keepdims=True)
    return received / (m.noise_power + total - received)
