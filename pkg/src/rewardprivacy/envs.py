"""Seeded benchmark MDPs: Four Rooms, Frozen Lake, random MDPs and network switching.

All grid worlds use actions (N, E, S, W) and state rewards broadcast across
actions. Every constructor is a pure function of its spec.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import TabularMdp, validate_mdp

MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))
DEFAULT_GAMMA = 0.9


def _check(cond, message):
    if not cond:
        raise ValueError(message)


@dataclass(frozen=True)
class FourRoomsSpec:
    grid_size: int = 9
    room_means: tuple = (0.2, 0.4, 0.6, 0.8)
    room_stddevs: tuple = (0.1, 0.1, 0.1, 0.1)
    seed: int = 0
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        object.__setattr__(self, "room_means", tuple(float(x) for x in self.room_means))
        object.__setattr__(self, "room_stddevs", tuple(float(x) for x in self.room_stddevs))
        _check(self.grid_size >= 5 and self.grid_size % 2 == 1, "grid_size must be an odd integer >= 5")
        _check(len(self.room_means) == 4 and len(self.room_stddevs) == 4, "four rooms need four means and stddevs")
        _check(all(s >= 0 for s in self.room_stddevs), "room_stddevs must be non-negative")
        _check(0 <= self.gamma < 1, "gamma must lie in [0, 1)")


@dataclass(frozen=True)
class FrozenLakeSpec:
    grid_size: int = 5
    hole_fraction: float = 0.2
    slip: float = 2.0 / 3.0
    seed: int = 0
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        _check(self.grid_size >= 3, "grid_size must be >= 3")
        _check(0 <= self.hole_fraction <= 0.4, "hole_fraction must lie in [0, 0.4]")
        _check(0 <= self.slip <= 1, "slip must lie in [0, 1]")
        _check(0 <= self.gamma < 1, "gamma must lie in [0, 1)")


@dataclass(frozen=True)
class RandomMdpSpec:
    n_states: int = 32
    n_actions: int = 4
    seed: int = 0
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        _check(28 <= self.n_states <= 40, "n_states must lie in [28, 40]")
        _check(2 <= self.n_actions <= 15, "n_actions must lie in [2, 15]")
        _check(0 <= self.gamma < 1, "gamma must lie in [0, 1)")


@dataclass(frozen=True)
class NetSwitchSpec:
    n_configs: int = 25
    protection_levels: int = 2
    delta: float = 0.2
    protection_prob: float = 0.5
    seed: int = 0
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        _check(self.n_configs >= 2, "n_configs must be >= 2")
        _check(self.protection_levels == 2, "protection_levels must be 2")
        _check(self.delta >= 0, "delta must be non-negative")
        _check(0 <= self.protection_prob <= 1, "protection_prob must lie in [0, 1]")
        _check(0 <= self.gamma < 1, "gamma must lie in [0, 1)")


# --------------------------------------------------------------------------
# grid helpers


def _grid_transitions(cells, passable, slip=0.0):
    """Transition tensor over ``cells`` for N/E/S/W moves with perpendicular slip."""
    index = {c: i for i, c in enumerate(cells)}
    n = len(cells)
    P = np.zeros((n, 4, n))

    def target(i, m):
        r, c = cells[i]
        dr, dc = MOVES[m]
        nxt = (r + dr, c + dc)
        return index[nxt] if passable(nxt) else i

    for i in range(n):
        for a in range(4):
            P[i, a, target(i, a)] += 1.0 - slip
            for side in ((a + 1) % 4, (a + 3) % 4):
                P[i, a, target(i, side)] += slip / 2.0
    return P


@dataclass(frozen=True)
class FourRoomsLayout:
    grid_size: int
    cells: tuple  # (row, col) per state
    rooms: np.ndarray  # room index per state
    doors: tuple  # ((row, col), room_a, room_b)
    door_states: tuple = field(default=())


def four_rooms_layout(spec: FourRoomsSpec) -> FourRoomsLayout:
    """Cells, room labels and door placement; grid_size counts the outer walls."""
    n = spec.grid_size
    c = n // 2
    rng = np.random.default_rng([spec.seed, 0])
    # (segment cells, room on one side, room on the other)
    segments = [
        ([(r, c) for r in range(1, c)], 0, 1),
        ([(r, c) for r in range(c + 1, n - 1)], 2, 3),
        ([(c, k) for k in range(1, c)], 0, 2),
        ([(c, k) for k in range(c + 1, n - 1)], 1, 3),
    ]
    doors = []
    for cells, ra, rb in segments:
        doors.append((cells[int(rng.integers(len(cells)))], ra, rb))
    door_room = {pos: min(ra, rb) for pos, ra, rb in doors}

    def room_of(r, k):
        return (0 if r < c else 2) + (0 if k < c else 1)

    cells, rooms = [], []
    for r in range(1, n - 1):
        for k in range(1, n - 1):
            if (r, k) in door_room:
                cells.append((r, k))
                rooms.append(door_room[(r, k)])
            elif r != c and k != c:
                cells.append((r, k))
                rooms.append(room_of(r, k))
    door_states = tuple(cells.index(pos) for pos, _, _ in doors)
    return FourRoomsLayout(n, tuple(cells), np.array(rooms), tuple(doors), door_states)


def make_four_rooms(spec: FourRoomsSpec) -> TabularMdp:
    layout = four_rooms_layout(spec)
    cellset = set(layout.cells)
    P = _grid_transitions(list(layout.cells), lambda pos: pos in cellset)
    rng = np.random.default_rng([spec.seed, 1])
    means = np.array(spec.room_means)[layout.rooms]
    stds = np.array(spec.room_stddevs)[layout.rooms]
    values = means + stds * rng.standard_normal(len(layout.cells))
    reward = np.repeat(values[:, None], 4, axis=1)
    mu = np.zeros(len(layout.cells))
    starts = np.ones(len(layout.cells), dtype=bool)
    starts[list(layout.door_states)] = False
    for room in range(4):
        members = starts & (layout.rooms == room)
        mu[members] = 0.25 / members.sum()
    return TabularMdp(P, reward, spec.gamma, mu)


@dataclass(frozen=True)
class FrozenLakeLayout:
    grid_size: int
    holes: np.ndarray  # boolean per state, states are row-major cells


def _frozen_lake_parts(spec: FrozenLakeSpec):
    n = spec.grid_size
    cells = [(r, k) for r in range(n) for k in range(n)]
    n_holes = int(np.floor(spec.hole_fraction * n * n))
    rng = np.random.default_rng([spec.seed, 0])
    base = _grid_transitions(cells, lambda pos: 0 <= pos[0] < n and 0 <= pos[1] < n, spec.slip)
    for _ in range(1000):
        holes = np.zeros(n * n, dtype=bool)
        holes[rng.permutation(n * n)[:n_holes]] = True
        P = base.copy()
        P[holes] = 0.0
        for h in np.nonzero(holes)[0]:
            P[h, :, h] = 1.0
        mu = (~holes) / (~holes).sum()
        values = np.where(holes, -1.0, rng.uniform(0.0, 1.0, size=n * n))
        reward = np.repeat(values[:, None], 4, axis=1)
        mdp = TabularMdp(P, reward, spec.gamma, mu)
        # a hole walled in by other holes is unreachable; redraw the layout
        if validate_mdp(mdp).ok:
            return mdp, FrozenLakeLayout(n, holes)
    raise ValueError("could not place holes without isolating cells")


def frozen_lake_layout(spec: FrozenLakeSpec) -> FrozenLakeLayout:
    return _frozen_lake_parts(spec)[1]


def make_frozen_lake(spec: FrozenLakeSpec) -> TabularMdp:
    return _frozen_lake_parts(spec)[0]


def make_random_mdp(spec: RandomMdpSpec) -> TabularMdp:
    rng = np.random.default_rng(spec.seed)
    S, A = spec.n_states, spec.n_actions
    P = rng.dirichlet(np.ones(S), size=(S, A))
    values = rng.uniform(-1.0, 1.0, size=S)
    mu = np.zeros(S)
    mu[0] = 1.0
    return TabularMdp(P, np.repeat(values[:, None], A, axis=1), spec.gamma, mu)


def make_net_switch(spec: NetSwitchSpec) -> TabularMdp:
    """State 2*n + p is configuration n at protection level p (1 = high)."""
    rng = np.random.default_rng(spec.seed)
    N = spec.n_configs
    S = 2 * N
    values = rng.uniform(0.0, 1.0, size=N)
    P = np.zeros((S, N, S))
    for j in range(N):
        P[:, j, 2 * j + 1] = spec.protection_prob
        P[:, j, 2 * j] = 1.0 - spec.protection_prob
    state_values = np.empty(S)
    state_values[1::2] = values
    state_values[0::2] = values - spec.delta
    reward = np.repeat(state_values[:, None], N, axis=1)
    return TabularMdp(P, reward, spec.gamma, np.full(S, 1.0 / S))


FAMILIES = {
    "four_rooms": (FourRoomsSpec, make_four_rooms),
    "frozen_lake": (FrozenLakeSpec, make_frozen_lake),
    "random_mdp": (RandomMdpSpec, make_random_mdp),
    "net_switch": (NetSwitchSpec, make_net_switch),
}


def make_spec(family: str, params: dict | None = None, seed: int = 0):
    if family not in FAMILIES:
        raise ValueError(f"unknown environment family {family!r}")
    spec_cls, _ = FAMILIES[family]
    return spec_cls(**{**(params or {}), "seed": seed})


def build_env(family: str, params: dict | None = None, seed: int = 0) -> TabularMdp:
    spec = make_spec(family, params, seed)
    return FAMILIES[family][1](spec)
