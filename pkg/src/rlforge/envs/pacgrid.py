"""Dot-collection gridworld with patrol ghosts and four bounty gates.

Five actions (four moves plus noop).  Eating a dot pays +1; entering one of
the four gate cells pays +50 the first time while the gate is armed; ghost
contact ends the episode and zeroes that step's reward.  Ghosts patrol by a
seeded biased random walk (80% keep direction, 20% uniform turn among open
directions) that ignores the agent entirely, so ghost trajectories replay
exactly from (spec, seed, step index).

Map text format extends the maze glyphs:

    .  free     #  wall      o  dot
    A..D  gate cells         P  agent start      g  ghost start
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from rlforge.core import ConfigError, Env, make_rng

FREE, WALL, DOT = 0, 1, 2
GATE_BASE = 3  # gates 0..3 use codes 3..6
PAC, GHOST = 7, 8

GATE_LETTERS = "ABCD"
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
NOOP = 4

DEFAULT_GATE_BOUNTY = 50.0
DEFAULT_DOT_REWARD = 1.0
DEFAULT_STEP_CAP = 500


def _walkable(grid: np.ndarray, cell: tuple[int, int]) -> bool:
    r, c = cell
    return 0 <= r < grid.shape[0] and 0 <= c < grid.shape[1] and grid[r, c] != WALL


@dataclass(frozen=True)
class PacGridSpec:
    """Static layout, actor start cells, and the ghost decision seed."""

    grid: np.ndarray
    pac_start: tuple[int, int]
    ghost_starts: tuple[tuple[int, int], ...]
    ghost_policy_seed: int = 0

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.int8).copy()
        if grid.ndim != 2 or grid.size == 0:
            raise ConfigError(f"grid must be 2-D, got {grid.shape}")
        codes = set(np.unique(grid).tolist())
        allowed = {FREE, WALL, DOT, GATE_BASE, GATE_BASE + 1, GATE_BASE + 2, GATE_BASE + 3}
        if not codes <= allowed:
            raise ConfigError(f"grid holds unknown codes {sorted(codes - allowed)}")
        gate_cells: list[tuple[int, int] | None] = [None] * 4
        for gate in range(4):
            where = np.argwhere(grid == GATE_BASE + gate)
            if len(where) != 1:
                raise ConfigError(f"gate {GATE_LETTERS[gate]} must appear exactly once, found {len(where)}")
            gate_cells[gate] = (int(where[0][0]), int(where[0][1]))
        pac = (int(self.pac_start[0]), int(self.pac_start[1]))
        if not _walkable(grid, pac) or grid[pac] != FREE:
            raise ConfigError(f"pac start {pac} must be a plain free cell")
        ghosts = tuple((int(r), int(c)) for r, c in self.ghost_starts)
        if not ghosts:
            raise ConfigError("need at least one ghost start")
        for cell in ghosts:
            if not _walkable(grid, cell):
                raise ConfigError(f"ghost start {cell} is not walkable")

        # every dot and gate must be collectable from the start
        seen = {pac}
        queue = deque([pac])
        while queue:
            r, c = queue.popleft()
            for dr, dc in MOVES:
                nxt = (r + dr, c + dc)
                if _walkable(grid, nxt) and nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        dots = {tuple(map(int, cell)) for cell in np.argwhere(grid == DOT)}
        if not dots <= seen:
            raise ConfigError(f"{len(dots - seen)} dots are unreachable from the start")
        if not set(gate_cells) <= seen:
            raise ConfigError("a gate is unreachable from the start")

        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "pac_start", pac)
        object.__setattr__(self, "ghost_starts", ghosts)
        object.__setattr__(self, "_gate_cells", tuple(gate_cells))
        object.__setattr__(self, "_dot_count", len(dots))

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.grid.shape)

    @property
    def gate_cells(self) -> tuple[tuple[int, int], ...]:
        return self._gate_cells

    @property
    def dot_count(self) -> int:
        return self._dot_count


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------


def format_pacgrid(spec: PacGridSpec) -> str:
    rows, cols = spec.shape
    glyph = {FREE: ".", WALL: "#", DOT: "o"}
    chars = []
    for r in range(rows):
        row = []
        for c in range(cols):
            code = int(spec.grid[r, c])
            row.append(glyph[code] if code in glyph else GATE_LETTERS[code - GATE_BASE])
        chars.append(row)
    pr, pc = spec.pac_start
    chars[pr][pc] = "P"
    for gr, gc in spec.ghost_starts:
        chars[gr][gc] = "g"
    return "\n".join("".join(row) for row in chars) + "\n"


def parse_pacgrid(text: str, ghost_policy_seed: int = 0) -> PacGridSpec:
    lines = [ln for ln in text.splitlines() if ln]
    if not lines:
        raise ConfigError("empty map text")
    cols = len(lines[0])
    if any(len(ln) != cols for ln in lines):
        raise ConfigError("ragged map rows")
    grid = np.zeros((len(lines), cols), dtype=np.int8)
    pac = None
    ghosts = []
    for r, line in enumerate(lines):
        for c, ch in enumerate(line):
            if ch == ".":
                grid[r, c] = FREE
            elif ch == "#":
                grid[r, c] = WALL
            elif ch == "o":
                grid[r, c] = DOT
            elif ch in GATE_LETTERS:
                grid[r, c] = GATE_BASE + GATE_LETTERS.index(ch)
            elif ch == "P":
                grid[r, c] = FREE
                if pac is not None:
                    raise ConfigError("multiple agent starts")
                pac = (r, c)
            elif ch == "g":
                grid[r, c] = FREE
                ghosts.append((r, c))
            else:
                raise ConfigError(f"unknown map glyph {ch!r} at {(r, c)}")
    if pac is None:
        raise ConfigError("map has no agent start")
    return PacGridSpec(grid, pac, tuple(ghosts), ghost_policy_seed)


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------


class PacGridEnv(Env):
    """Episode dynamics over a PacGridSpec.

    ``rearm_gates_on_reset`` controls the bounty window: when False (the
    default) each gate pays at most once over the life of this env instance,
    i.e. once per evaluation; when True gates re-arm at every reset so each
    episode can collect each bounty once.  ``info['gate_events']`` lists
    (gate id, paid) for first-entries this episode either way.
    """

    def __init__(
        self,
        spec: PacGridSpec,
        step_cap: int = DEFAULT_STEP_CAP,
        rearm_gates_on_reset: bool = False,
        ghosts_enabled: bool = True,
    ):
        super().__init__()
        if step_cap < 1:
            raise ConfigError(f"step_cap must be >= 1, got {step_cap}")
        self.spec = spec
        self.step_cap = int(step_cap)
        self.rearm_gates_on_reset = rearm_gates_on_reset
        self.ghosts_enabled = ghosts_enabled
        self.action_count = 5
        self.observation_shape = spec.shape
        self._paid_gates: set[int] = set()
        self._episode_gates: set[int] = set()
        self._dots: set[tuple[int, int]] = set()
        self._pac = spec.pac_start
        self._ghosts = list(spec.ghost_starts)
        self._ghost_dirs: list[int] = []
        self._clock = 0
        self._steps = 0
        self.score = 0.0

    def reset(self, seed: int | None = None) -> np.ndarray:
        self._pac = self.spec.pac_start
        self._ghosts = list(self.spec.ghost_starts) if self.ghosts_enabled else []
        self._ghost_dirs = [
            int(make_rng(self.spec.ghost_policy_seed, g).integers(4)) for g in range(len(self._ghosts))
        ]
        self._clock = 0
        self._steps = 0
        self.score = 0.0
        self._dots = {tuple(map(int, cell)) for cell in np.argwhere(self.spec.grid == DOT)}
        self._episode_gates = set()
        if self.rearm_gates_on_reset:
            self._paid_gates = set()
        self._done = False
        return self._observe()

    @property
    def ghost_cells(self) -> tuple[tuple[int, int], ...]:
        return tuple(self._ghosts)

    @property
    def dots_remaining(self) -> int:
        return len(self._dots)

    def step(self, action: int):
        self._require_live()
        self._require_action(action)

        target = self._pac
        if action != NOOP:
            dr, dc = MOVES[action]
            candidate = (self._pac[0] + dr, self._pac[1] + dc)
            if _walkable(self.spec.grid, candidate):
                target = candidate

        contact = target in self._ghosts
        next_ghosts = self._advance_ghosts() if self.ghosts_enabled else list(self._ghosts)
        if not contact:
            contact = target in next_ghosts

        reward = 0.0
        events: list[tuple[int, bool]] = []
        self._pac = target
        self._ghosts = next_ghosts
        if contact:
            self._done = True
        else:
            if target in self._dots:
                self._dots.discard(target)
                reward += DEFAULT_DOT_REWARD
            code = int(self.spec.grid[target])
            if GATE_BASE <= code < GATE_BASE + 4:
                gate = code - GATE_BASE
                if gate not in self._episode_gates:
                    paid = gate not in self._paid_gates
                    if paid:
                        reward += DEFAULT_GATE_BOUNTY
                        self._paid_gates.add(gate)
                    self._episode_gates.add(gate)
                    events.append((gate, paid))
            if not self._dots:
                self._done = True

        self._steps += 1
        if self._steps >= self.step_cap:
            self._done = True
        self.score += reward
        return self._observe(), reward, self._done, {
            "gate_events": tuple(events),
            "contact": contact,
            "dots_remaining": len(self._dots),
        }

    def _advance_ghosts(self) -> list[tuple[int, int]]:
        """One patrol move per ghost, keyed purely by (seed, ghost, clock)."""
        out = []
        for g, (cell, direction) in enumerate(zip(self._ghosts, self._ghost_dirs)):
            rng = make_rng(self.spec.ghost_policy_seed, g, self._clock)
            open_dirs = [d for d in range(4) if _walkable(self.spec.grid, (cell[0] + MOVES[d][0], cell[1] + MOVES[d][1]))]
            if not open_dirs:
                out.append(cell)
                continue
            keep = rng.random() < 0.8
            if not (keep and direction in open_dirs):
                direction = int(open_dirs[rng.integers(len(open_dirs))])
            self._ghost_dirs[g] = direction
            out.append((cell[0] + MOVES[direction][0], cell[1] + MOVES[direction][1]))
        self._clock += 1
        return out

    def _observe(self) -> np.ndarray:
        obs = np.full(self.spec.shape, FREE, dtype=np.int8)
        obs[self.spec.grid == WALL] = WALL
        for gate in range(4):
            obs[self.spec.gate_cells[gate]] = GATE_BASE + gate
        for cell in self._dots:
            obs[cell] = DOT
        for cell in self._ghosts:
            obs[cell] = GHOST
        obs[self._pac] = PAC
        return obs


@dataclass
class GateCensus:
    """Distinct gates found per evaluation plus per-episode first-entry totals."""

    found: set[int] = field(default_factory=set)
    entries: dict[int, int] = field(default_factory=lambda: {g: 0 for g in range(4)})

    def record(self, events) -> None:
        for gate, _paid in events:
            self.found.add(gate)
            self.entries[gate] += 1

    def distinct(self) -> int:
        return len(self.found)

    def as_dict(self) -> dict:
        out = {f"entries_gate_{GATE_LETTERS[g]}": self.entries[g] for g in range(4)}
        out["distinct_gates"] = self.distinct()
        return out


def gate_census(event_logs) -> GateCensus:
    census = GateCensus()
    for events in event_logs:
        census.record(events)
    return census


# ---------------------------------------------------------------------------
# Shipped fixed layout: 21x19 pillar lattice
# ---------------------------------------------------------------------------


def default_pacgrid_spec(ghost_policy_seed: int = 0) -> PacGridSpec:
    """Fixed 21x19 layout: bordered pillar lattice, dots on every corridor
    cell, gates in the four corners, two central ghosts."""
    return parse_pacgrid(DEFAULT_PACGRID_TEXT, ghost_policy_seed=ghost_policy_seed)


DEFAULT_PACGRID_TEXT = """\
###################
#AoooooooooooooooB#
#o#o#o#o#o#o#o#o#o#
#ooooooooooooooooo#
#o#o#o#o#o#o#o#o#o#
#ooooooooooooooooo#
#o#o#o#o#o#o#o#o#o#
#ooooooooooooooooo#
#o#o#o#o#o#o#o#o#o#
#oooooooogoooooooo#
#o#o#o#o#o#o#o#o#o#
#oooooooogoooooooo#
#o#o#o#o#o#o#o#o#o#
#ooooooooooooooooo#
#o#o#o#o#o#o#o#o#o#
#ooooooooooooooooo#
#o#o#o#o#o#o#o#o#o#
#ooooooooooooooooo#
#o#o#o#o#o#o#o#o#o#
#CoooooooPoooooooD#
###################
"""
