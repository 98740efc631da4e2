"""Two-agent cooperative object transport on a grid with stochastic dropzone rewards."""

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

import numpy as np

from ._jit import njit

STAY, LEFT, RIGHT, UP, DOWN = 0, 1, 2, 3, 4
N_ACTIONS = 5
ACTION_NAMES = ("stay", "left", "right", "up", "down")
DROW = np.array([0, 0, 0, -1, 1], dtype=np.int64)
DCOL = np.array([0, -1, 1, 0, 0], dtype=np.int64)

EMPTY, OBSTACLE, ZONE1, ZONE2 = 0, 1, 2, 3
SEEKING, CARRYING, DELIVERED = 0, 1, 2

STAY_PENALTY = -0.01
OBSTACLE_PENALTY = -0.05

# event bits returned by env_step
EV_CARRYING = 1  # the step was taken in the carrying phase
EV_JOINT_MOVE = 2
EV_PICKUP = 4
EV_DELIVERED = 8
EV_MOVED0 = 16
EV_MOVED1 = 32

# state vector layout
R0, C0, R1, C1, RI, CI, PHASE, ARR0, ARR1, STEP = range(10)
STATE_SIZE = 10

_CELL_CODES = {".": EMPTY, "#": OBSTACLE, "1": ZONE1, "2": ZONE2, "A": EMPTY, "B": EMPTY, "G": EMPTY}


class MapError(ValueError):
    pass


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridMap:
    grid: np.ndarray  # int64 (height, width) of EMPTY/OBSTACLE/ZONE1/ZONE2
    item_start: tuple
    agent_starts: tuple

    @property
    def shape(self):
        return self.grid.shape

    @property
    def n_cells(self):
        return self.grid.shape[0] * self.grid.shape[1]


def load_map(text):
    """Parse a map: '#' obstacle, '.' empty, 'A'/'B' agent starts, 'G' item, '1'/'2' dropzone cells."""
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MapError("map is empty")
    width = len(lines[0])
    if width == 0:
        raise MapError("line 1: empty row")
    grid = np.zeros((len(lines), width), dtype=np.int64)
    marks = {"A": [], "B": [], "G": []}
    for r, line in enumerate(lines):
        if len(line) != width:
            raise MapError(f"line {r + 1}: row has {len(line)} cells, expected {width}")
        for c, ch in enumerate(line):
            if ch not in _CELL_CODES:
                raise MapError(f"line {r + 1}, column {c + 1}: unknown cell character {ch!r}")
            grid[r, c] = _CELL_CODES[ch]
            if ch in marks:
                marks[ch].append((r, c))
    for ch, what in (("G", "item"), ("A", "agent start 'A'"), ("B", "agent start 'B'")):
        if not marks[ch]:
            raise MapError(f"missing {what}")
        if len(marks[ch]) > 1:
            r, c = marks[ch][1]
            raise MapError(f"line {r + 1}, column {c + 1}: duplicate {what}")
    (ri, ci) = marks["G"][0]
    for dc in (-1, 1):
        c = ci + dc
        if not 0 <= c < width or grid[ri, c] != EMPTY or (ri, c) in (marks["A"][0], marks["B"][0]):
            raise MapError(f"line {ri + 1}, column {ci + 1}: item needs empty cells on its left and right")
    if not (grid == ZONE1).any() and not (grid == ZONE2).any():
        raise MapError("map has no dropzone cells")
    return GridMap(grid, (ri, ci), (marks["A"][0], marks["B"][0]))


def read_map(path):
    with open(path) as fh:
        return load_map(fh.read())


def default_map():
    return load_map(resources.files("maibl.data").joinpath("default.map").read_text())


# -- scenarios -------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    name: str
    zones: dict  # zone id -> tuple of (value, probability) Fractions
    optimal_zone: int
    R: Fraction

    def expected(self, zone):
        return sum(v * p for v, p in self.zones[zone])

    def arrays(self):
        """(values, cumulative probabilities, sizes) indexed by zone - 1, for the kernels."""
        k = max(len(d) for d in self.zones.values())
        values = np.zeros((2, k))
        cum = np.ones((2, k))
        sizes = np.zeros(2, dtype=np.int64)
        for z, dist in self.zones.items():
            acc = Fraction(0)
            for j, (v, p) in enumerate(dist):
                acc += p
                values[z - 1, j] = float(v)
                cum[z - 1, j] = float(acc)
            sizes[z - 1] = len(dist)
        return values, cum, sizes


def _parse_distribution(text, lineno):
    dist = []
    for part in text.split(","):
        try:
            v, p = part.split(":")
            dist.append((Fraction(v.strip()), Fraction(p.strip())))
        except ValueError:
            raise ScenarioError(f"line {lineno}: expected 'value : probability' pairs, got {part.strip()!r}")
    if sum(p for _, p in dist) != 1:
        raise ScenarioError(f"line {lineno}: probabilities sum to {sum(p for _, p in dist)}, not 1")
    if any(p < 0 for _, p in dist):
        raise ScenarioError(f"line {lineno}: negative probability")
    return tuple(dist)


def load_scenario(text, name="scenario"):
    fields = {}
    zones = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in ("zone1", "zone2"):
            zones[int(key[-1])] = _parse_distribution(value, lineno)
        elif key in ("optimal", "R", "name"):
            fields[key] = value
        else:
            raise ScenarioError(f"line {lineno}: unknown key {key!r}")
    if set(zones) != {1, 2}:
        raise ScenarioError("scenario must define zone1 and zone2")
    try:
        optimal = int(fields["optimal"])
        R = Fraction(fields["R"])
    except KeyError as exc:
        raise ScenarioError(f"missing key {exc.args[0]!r}")
    sc = Scenario(fields.get("name", name), zones, optimal, R)
    if optimal not in zones:
        raise ScenarioError(f"optimal zone {optimal} is not defined")
    if sc.expected(optimal) != R:
        raise ScenarioError(f"R = {R} but the optimal zone's expectation is {sc.expected(optimal)}")
    return sc


def scenario(number):
    """One of the four shipped reward scenarios (1-4)."""
    if number not in (1, 2, 3, 4):
        raise ScenarioError(f"unknown scenario {number!r}; expected 1-4")
    text = resources.files("maibl.data").joinpath(f"scenario-{number}.txt").read_text()
    return load_scenario(text, name=f"scenario-{number}")


@njit
def sample_zone(values, cum, sizes, zone, u):
    z = zone - 1
    n = sizes[z]
    for k in range(n):
        if u < cum[z, k]:
            return values[z, k]
    return values[z, n - 1]


def sample_reward(sc, zone, rng, size=None):
    """Inverse-CDF draw(s) from a zone's reward distribution."""
    values, cum, sizes = sc.arrays()
    if size is None:
        return sample_zone(values, cum, sizes, zone, rng.random())
    u = rng.random(size)
    z = zone - 1
    idx = np.searchsorted(cum[z, : sizes[z]], u, side="right")
    return values[z, np.minimum(idx, sizes[z] - 1)]


# -- dynamics --------------------------------------------------------------


def initial_state(gmap):
    st = np.zeros(STATE_SIZE, dtype=np.int64)
    (st[R0], st[C0]), (st[R1], st[C1]) = gmap.agent_starts
    st[RI], st[CI] = gmap.item_start
    return st


@njit
def _blocked(grid, r, c):
    return r < 0 or c < 0 or r >= grid.shape[0] or c >= grid.shape[1] or grid[r, c] == OBSTACLE


@njit
def env_step(grid, st, a0, a1, values, cum, sizes, rng, hold=True):
    """Advance ``st`` in place; returns (team reward, penalty 0, penalty 1, event bits, zone).

    With ``hold`` set, an agent standing on a grasp cell (left or right of the
    item) keeps hold of the item and does not move until pickup completes.
    """
    if st[PHASE] == DELIVERED:
        raise ValueError("cannot step a delivered state")
    st[STEP] += 1
    pen0 = STAY_PENALTY if a0 == STAY else 0.0
    pen1 = STAY_PENALTY if a1 == STAY else 0.0
    flags = 0
    zone = 0
    reward = 0.0
    ri = st[RI]
    ci = st[CI]
    if st[PHASE] == SEEKING:
        p0r, p0c, p1r, p1c = st[R0], st[C0], st[R1], st[C1]
        d0r, d0c = p0r + DROW[a0], p0c + DCOL[a0]
        d1r, d1c = p1r + DROW[a1], p1c + DCOL[a1]
        hold0 = hold and p0r == ri and abs(p0c - ci) == 1
        hold1 = hold and p1r == ri and abs(p1c - ci) == 1
        if hold0:
            d0r, d0c = p0r, p0c
        elif _blocked(grid, d0r, d0c):
            d0r, d0c = p0r, p0c
            pen0 = OBSTACLE_PENALTY
        elif d0r == ri and d0c == ci:
            d0r, d0c = p0r, p0c
        if hold1:
            d1r, d1c = p1r, p1c
        elif _blocked(grid, d1r, d1c):
            d1r, d1c = p1r, p1c
            pen1 = OBSTACLE_PENALTY
        elif d1r == ri and d1c == ci:
            d1r, d1c = p1r, p1c
        same = d0r == d1r and d0c == d1c
        swap = d0r == p1r and d0c == p1c and d1r == p0r and d1c == p0c
        if same or swap:
            d0r, d0c, d1r, d1c = p0r, p0c, p1r, p1c
        if d0r != p0r or d0c != p0c:
            st[R0], st[C0] = d0r, d0c
            st[ARR0] = st[STEP]
            flags |= EV_MOVED0
        if d1r != p1r or d1c != p1c:
            st[R1], st[C1] = d1r, d1c
            st[ARR1] = st[STEP]
            flags |= EV_MOVED1
        if st[R0] == ri and st[R1] == ri and abs(st[C0] - ci) == 1 and st[C0] + st[C1] == 2 * ci:
            st[PHASE] = CARRYING
            flags |= EV_PICKUP
    else:
        flags |= EV_CARRYING
        if a0 == a1 and a0 != STAY:
            dr = DROW[a0]
            dc = DCOL[a0]
            ok = not (
                _blocked(grid, st[R0] + dr, st[C0] + dc)
                or _blocked(grid, st[R1] + dr, st[C1] + dc)
                or _blocked(grid, ri + dr, ci + dc)
            )
            if ok:
                st[R0] += dr
                st[C0] += dc
                st[R1] += dr
                st[C1] += dc
                st[RI] += dr
                st[CI] += dc
                flags |= EV_JOINT_MOVE | EV_MOVED0 | EV_MOVED1
                cell = grid[st[RI], st[CI]]
                if cell == ZONE1 or cell == ZONE2:
                    zone = cell - ZONE1 + 1
                    st[PHASE] = DELIVERED
                    flags |= EV_DELIVERED
                    reward = sample_zone(values, cum, sizes, zone, rng.random())
            else:
                pen0 = OBSTACLE_PENALTY
                pen1 = OBSTACLE_PENALTY
    return reward, pen0, pen1, flags, zone


@njit
def observation_code(n_cells, width, st, agent):
    """Integer encoding of (own cell, partner cell, item cell, phase)."""
    if agent == 0:
        own = st[R0] * width + st[C0]
        other = st[R1] * width + st[C1]
    else:
        own = st[R1] * width + st[C1]
        other = st[R0] * width + st[C0]
    item = st[RI] * width + st[CI]
    return own + n_cells * (other + n_cells * (item + n_cells * st[PHASE]))


@dataclass(frozen=True)
class Observation:
    own: tuple
    partner: tuple
    item: tuple
    phase: int

    @property
    def terminal(self):
        return self.phase == DELIVERED

    def encode(self, shape):
        h, w = shape
        n = h * w

        def cell(p):
            return p[0] * w + p[1]

        return cell(self.own) + n * (cell(self.partner) + n * (cell(self.item) + n * self.phase))


@dataclass(frozen=True)
class GridState:
    agents: tuple  # ((r, c), (r, c))
    item: tuple
    phase: int = SEEKING
    arrivals: tuple = (0, 0)
    step: int = 0

    @classmethod
    def from_array(cls, st):
        st = [int(v) for v in st]
        return cls(
            ((st[R0], st[C0]), (st[R1], st[C1])),
            (st[RI], st[CI]),
            st[PHASE],
            (st[ARR0], st[ARR1]),
            st[STEP],
        )

    def to_array(self):
        (r0, c0), (r1, c1) = self.agents
        return np.array(
            [r0, c0, r1, c1, self.item[0], self.item[1], self.phase, self.arrivals[0], self.arrivals[1], self.step],
            dtype=np.int64,
        )


def observe(state, agent):
    own, other = state.agents if agent == 0 else state.agents[::-1]
    return Observation(own, other, state.item, state.phase)


@dataclass(frozen=True)
class StepResult:
    state: GridState
    reward: float
    penalties: tuple
    joint_move: bool
    carrying: bool
    pickup: bool
    zone: int  # 0 unless delivered on this step
    moved: tuple = field(default=(False, False))


class CMOTPEnv:
    """Python-facing wrapper around the step kernel; states are immutable ``GridState`` values."""

    def __init__(self, gmap=None, sc=None, hold=True):
        self.map = gmap if gmap is not None else default_map()
        self.scenario = sc if sc is not None else scenario(1)
        self.hold = bool(hold)
        self._arrays = self.scenario.arrays()

    def reset(self):
        return GridState.from_array(initial_state(self.map))

    def step(self, state, actions, rng):
        st = state.to_array()
        a0, a1 = (int(a) for a in actions)
        for a in (a0, a1):
            if not 0 <= a < N_ACTIONS:
                raise ValueError(f"invalid action {a}")
        reward, p0, p1, flags, zone = env_step(self.map.grid, st, a0, a1, *self._arrays, rng, self.hold)
        return StepResult(
            GridState.from_array(st),
            float(reward),
            (float(p0), float(p1)),
            bool(flags & EV_JOINT_MOVE),
            bool(flags & EV_CARRYING),
            bool(flags & EV_PICKUP),
            int(zone),
            (bool(flags & EV_MOVED0), bool(flags & EV_MOVED1)),
        )

    def observe(self, state, agent):
        return observe(state, agent)


# -- planning --------------------------------------------------------------


def _bfs(start, goal_fn, passable, moves):
    prev = {start: None}
    q = deque([start])
    while q:
        cur = q.popleft()
        if goal_fn(cur):
            path = []
            while prev[cur] is not None:
                cur, a = prev[cur]
                path.append(a)
            return path[::-1]
        for a, nxt in moves(cur):
            if nxt not in prev and passable(nxt):
                prev[nxt] = (cur, a)
                q.append(nxt)
    return None


def plan_delivery(gmap, zone):
    """A coordinated action script ``[(a0, a1), ...]`` that picks up the item and delivers it to ``zone``.

    Agent 0 walks to the item's left while agent 1 stays, then agent 1 walks to
    the right, then both carry along a shortest block path. Returns None when
    no such plan exists.
    """
    grid = gmap.grid
    h, w = grid.shape
    item = gmap.item_start

    def free(p):
        r, c = p
        return 0 <= r < h and 0 <= c < w and grid[r, c] != OBSTACLE

    def steps(p):
        return [(a, (p[0] + int(DROW[a]), p[1] + int(DCOL[a]))) for a in (LEFT, RIGHT, UP, DOWN)]

    a_start, b_start = gmap.agent_starts
    left = (item[0], item[1] - 1)
    right = (item[0], item[1] + 1)
    p0 = _bfs(a_start, lambda p: p == left, lambda p: free(p) and p != item and p != b_start, steps)
    if p0 is None:
        return None
    p1 = _bfs(b_start, lambda p: p == right, lambda p: free(p) and p != item and p != left, steps)
    if p1 is None:
        return None

    def block_free(p):
        return free(p) and free((p[0], p[1] - 1)) and free((p[0], p[1] + 1))

    target = ZONE1 if zone == 1 else ZONE2
    carry = _bfs(item, lambda p: grid[p] == target, lambda p: block_free(p) and grid[p] in (EMPTY, target), steps)
    if carry is None:
        return None
    return [(a, STAY) for a in p0] + [(STAY, a) for a in p1] + [(a, a) for a in carry]
