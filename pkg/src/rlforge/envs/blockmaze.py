"""Gridworld goal-seeking with injected defects to hunt.

The agent walks a block maze for -1 per step and +100 at the goal, with a
400-step cap.  Two defect kinds are planted for evaluation: exploratory
markers on reachable free cells that record when entered but leave the
episode running, and invalid-location markers on block cells (or off-grid
cells) that trigger when the agent merely attempts to enter them and end
the episode.  Plain collisions with unmarked blocks or the grid edge leave
the agent in place.  Neither kind is visible in observations.

Map text format, one row per line:

    .  free        #  block       G  goal
    S  start       1  exploratory marker on a free cell
    2  invalid-location marker on a block cell
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from rlforge.core import ConfigError, Env, make_rng

FREE, BLOCK, GOAL = 0, 1, 2
AGENT = 3  # observation-only code

TYPE_EXPLORATORY = 1
TYPE_INVALID_LOCATION = 2

# action index -> (row delta, col delta)
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))

DEFAULT_STEP_PENALTY = -1.0
DEFAULT_GOAL_REWARD = 100.0
DEFAULT_STEP_CAP = 400
DEFAULT_BUG_COUNT = 25


def reachable_cells(grid: np.ndarray, start: tuple[int, int]) -> set[tuple[int, int]]:
    """Cells reachable from ``start`` through non-block cells (4-neighborhood)."""
    rows, cols = grid.shape
    seen = {start}
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        for dr, dc in MOVES:
            nr, nc = r + dr, c + dc
            if 0 <= nr < rows and 0 <= nc < cols and grid[nr, nc] != BLOCK and (nr, nc) not in seen:
                seen.add((nr, nc))
                queue.append((nr, nc))
    return seen


@dataclass(frozen=True, eq=False)
class MazeSpec:
    """Layout plus planted defects; immutable and validated on construction.

    ``bugs`` holds ((row, col), kind) pairs in canonical (row, col) order.
    Exploratory markers must sit on reachable free cells away from start and
    goal; invalid-location markers sit on block cells or outside the grid.
    """

    grid: np.ndarray
    start: tuple[int, int]
    bugs: tuple[tuple[tuple[int, int], int], ...] = ()

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.int8).copy()
        if grid.ndim != 2 or grid.size == 0:
            raise ConfigError(f"grid must be 2-D, got shape {grid.shape}")
        codes = set(np.unique(grid).tolist())
        if not codes <= {FREE, BLOCK, GOAL}:
            raise ConfigError(f"grid holds unknown codes {codes - {FREE, BLOCK, GOAL}}")
        goals = np.argwhere(grid == GOAL)
        if len(goals) != 1:
            raise ConfigError(f"grid needs exactly one goal, found {len(goals)}")
        start = (int(self.start[0]), int(self.start[1]))
        if not self._in_bounds(grid, start) or grid[start] != FREE:
            raise ConfigError(f"start {start} must be an in-grid free cell")
        reach = reachable_cells(grid, start)
        goal = (int(goals[0][0]), int(goals[0][1]))
        if goal not in reach:
            raise ConfigError("goal is unreachable from start")

        bugs = tuple(sorted((((int(r), int(c)), int(kind)) for (r, c), kind in self.bugs),
                            key=lambda b: b[0]))
        cells = [cell for cell, _ in bugs]
        if len(set(cells)) != len(cells):
            raise ConfigError("duplicate defect cells")
        for cell, kind in bugs:
            if kind == TYPE_EXPLORATORY:
                if not self._in_bounds(grid, cell) or grid[cell] != FREE:
                    raise ConfigError(f"exploratory marker {cell} must sit on a free cell")
                if cell in (start, goal):
                    raise ConfigError(f"exploratory marker {cell} clashes with start or goal")
                if cell not in reach:
                    raise ConfigError(f"exploratory marker {cell} is unreachable")
            elif kind == TYPE_INVALID_LOCATION:
                if self._in_bounds(grid, cell) and grid[cell] != BLOCK:
                    raise ConfigError(f"invalid-location marker {cell} must sit on a block or off-grid")
            else:
                raise ConfigError(f"unknown defect kind {kind}")

        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "bugs", bugs)
        object.__setattr__(self, "_goal", goal)
        object.__setattr__(self, "_bug_index", {cell: (i, kind) for i, (cell, kind) in enumerate(bugs)})

    @staticmethod
    def _in_bounds(grid, cell) -> bool:
        return 0 <= cell[0] < grid.shape[0] and 0 <= cell[1] < grid.shape[1]

    @property
    def goal(self) -> tuple[int, int]:
        return self._goal

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.grid.shape)

    def __eq__(self, other):
        if not isinstance(other, MazeSpec):
            return NotImplemented
        return (
            np.array_equal(self.grid, other.grid)
            and self.start == other.start
            and self.bugs == other.bugs
        )

    def __hash__(self):
        return hash((self.grid.tobytes(), self.grid.shape, self.start, self.bugs))

    def bug_at(self, cell: tuple[int, int]):
        """(bug id, kind) at ``cell`` or None."""
        return self._bug_index.get(cell)

    def count_kind(self, kind: int) -> int:
        return sum(1 for _, k in self.bugs if k == kind)


def generate_maze_layout(rows: int, cols: int, seed: int, block_density: float = 0.3) -> MazeSpec:
    """Random defect-free layout with start and goal connected.

    Blocks are sprinkled at ``block_density``; layouts whose goal is cut off
    are rejected and resampled from the same stream.
    """
    if rows < 3 or cols < 3:
        raise ConfigError(f"maze needs at least 3x3, got {rows}x{cols}")
    if not 0.0 <= block_density < 1.0:
        raise ConfigError(f"block_density must be in [0, 1), got {block_density}")
    rng = make_rng(seed, 7301)
    for _ in range(200):
        grid = np.where(rng.random((rows, cols)) < block_density, BLOCK, FREE).astype(np.int8)
        free = np.argwhere(grid == FREE)
        if len(free) < 2:
            continue
        start = (int(free[0][0]), int(free[0][1]))
        goal = (int(free[-1][0]), int(free[-1][1]))
        if goal == start:
            continue
        grid[goal] = GOAL
        reach = reachable_cells(grid, start)
        if goal in reach and len(reach) >= (rows * cols) // 3:
            return MazeSpec(grid, start)
    raise ConfigError(f"no connected layout found for {rows}x{cols} at density {block_density}")


def inject_bugs(layout: MazeSpec, seed: int, count: int = DEFAULT_BUG_COUNT,
                exploratory_fraction: float = 0.5) -> MazeSpec:
    """Plant ``count`` defects on a defect-free layout.

    ``ceil(count * exploratory_fraction)`` go on reachable free cells; the
    rest go on block cells adjacent to the reachable region so an entry can
    actually be attempted.  Raises ConfigError when the layout lacks enough
    candidate cells of either kind.
    """
    if layout.bugs:
        raise ConfigError("layout already carries defects")
    if count < 0 or not 0.0 <= exploratory_fraction <= 1.0:
        raise ConfigError(f"bad defect count {count} or fraction {exploratory_fraction}")
    n_exploratory = int(np.ceil(count * exploratory_fraction))
    n_invalid = count - n_exploratory

    reach = reachable_cells(layout.grid, layout.start)
    free_candidates = sorted(reach - {layout.start, layout.goal}
                             - {cell for cell in reach if layout.grid[cell] == GOAL})
    block_candidates = sorted(
        {
            (r + dr, c + dc)
            for (r, c) in reach
            for dr, dc in MOVES
            if MazeSpec._in_bounds(layout.grid, (r + dr, c + dc)) and layout.grid[r + dr, c + dc] == BLOCK
        }
    )
    if len(free_candidates) < n_exploratory:
        raise ConfigError(
            f"need {n_exploratory} free candidate cells, layout has {len(free_candidates)}"
        )
    if len(block_candidates) < n_invalid:
        raise ConfigError(
            f"need {n_invalid} block candidate cells, layout has {len(block_candidates)}"
        )
    rng = make_rng(seed, 7302)
    chosen_free = [free_candidates[i] for i in rng.choice(len(free_candidates), n_exploratory, replace=False)]
    chosen_block = [block_candidates[i] for i in rng.choice(len(block_candidates), n_invalid, replace=False)]
    bugs = tuple((cell, TYPE_EXPLORATORY) for cell in chosen_free) + tuple(
        (cell, TYPE_INVALID_LOCATION) for cell in chosen_block
    )
    return MazeSpec(layout.grid, layout.start, bugs)


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

_GLYPHS = {FREE: ".", BLOCK: "#", GOAL: "G"}


def format_maze(spec: MazeSpec) -> str:
    rows, cols = spec.shape
    chars = [[_GLYPHS[int(spec.grid[r, c])] for c in range(cols)] for r in range(rows)]
    sr, sc = spec.start
    chars[sr][sc] = "S"
    for (r, c), kind in spec.bugs:
        if not MazeSpec._in_bounds(spec.grid, (r, c)):
            raise ConfigError(f"off-grid defect {(r, c)} cannot be written to map text")
        chars[r][c] = "1" if kind == TYPE_EXPLORATORY else "2"
    return "\n".join("".join(row) for row in chars) + "\n"


def parse_maze(text: str) -> MazeSpec:
    lines = [ln for ln in text.splitlines() if ln]
    if not lines:
        raise ConfigError("empty map text")
    cols = len(lines[0])
    if any(len(ln) != cols for ln in lines):
        raise ConfigError("ragged map rows")
    grid = np.zeros((len(lines), cols), dtype=np.int8)
    start = None
    bugs = []
    for r, line in enumerate(lines):
        for c, ch in enumerate(line):
            if ch == ".":
                grid[r, c] = FREE
            elif ch == "#":
                grid[r, c] = BLOCK
            elif ch == "G":
                grid[r, c] = GOAL
            elif ch == "S":
                grid[r, c] = FREE
                if start is not None:
                    raise ConfigError("multiple start cells")
                start = (r, c)
            elif ch == "1":
                grid[r, c] = FREE
                bugs.append(((r, c), TYPE_EXPLORATORY))
            elif ch == "2":
                grid[r, c] = BLOCK
                bugs.append(((r, c), TYPE_INVALID_LOCATION))
            else:
                raise ConfigError(f"unknown map glyph {ch!r} at {(r, c)}")
    if start is None:
        raise ConfigError("map has no start cell")
    return MazeSpec(grid, start, tuple(bugs))


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------


class BlockmazeEnv(Env):
    """Deterministic episode dynamics over a MazeSpec.

    Observations are the int8 grid with the agent cell overwritten by code 3;
    defects stay hidden.  ``info['bug_events']`` lists (bug id, kind) pairs
    raised this step; by default an exploratory marker reports only its
    first entry per episode (``emit_repeats=True`` reports every entry).
    """

    def __init__(
        self,
        spec: MazeSpec,
        step_penalty: float = DEFAULT_STEP_PENALTY,
        goal_reward: float = DEFAULT_GOAL_REWARD,
        step_cap: int = DEFAULT_STEP_CAP,
        emit_repeats: bool = False,
    ):
        super().__init__()
        if step_cap < 1:
            raise ConfigError(f"step_cap must be >= 1, got {step_cap}")
        self.spec = spec
        self.step_penalty = float(step_penalty)
        self.goal_reward = float(goal_reward)
        self.step_cap = int(step_cap)
        self.emit_repeats = emit_repeats
        self.action_count = 4
        self.observation_shape = spec.shape
        self._agent = spec.start
        self._steps = 0
        self._entered: set[int] = set()

    def reset(self, seed: int | None = None) -> np.ndarray:
        self._agent = self.spec.start
        self._steps = 0
        self._entered = set()
        self._done = False
        return self._observe()

    def step(self, action: int):
        self._require_live()
        self._require_action(action)
        dr, dc = MOVES[action]
        target = (self._agent[0] + dr, self._agent[1] + dc)
        reward = self.step_penalty
        events: list[tuple[int, int]] = []
        reached_goal = False

        blocked = not MazeSpec._in_bounds(self.spec.grid, target) or self.spec.grid[target] == BLOCK
        if blocked:
            hit = self.spec.bug_at(target)
            if hit is not None and hit[1] == TYPE_INVALID_LOCATION:
                events.append(hit)
                self._done = True
        else:
            self._agent = target
            if self.spec.grid[target] == GOAL:
                reward = self.goal_reward
                reached_goal = True
                self._done = True
            else:
                hit = self.spec.bug_at(target)
                if hit is not None and hit[1] == TYPE_EXPLORATORY:
                    if hit[0] not in self._entered or self.emit_repeats:
                        events.append(hit)
                    self._entered.add(hit[0])

        self._steps += 1
        if self._steps >= self.step_cap:
            self._done = True
        return self._observe(), reward, self._done, {"bug_events": tuple(events), "goal": reached_goal}

    @property
    def agent_cell(self) -> tuple[int, int]:
        return self._agent

    def _observe(self) -> np.ndarray:
        obs = self.spec.grid.copy()
        obs[self._agent] = AGENT
        return obs


@dataclass
class BugCensus:
    """Distinct defects found per kind across an evaluation, plus raw totals."""

    found: dict[int, set[int]] = field(default_factory=lambda: {TYPE_EXPLORATORY: set(), TYPE_INVALID_LOCATION: set()})
    triggers: dict[int, int] = field(default_factory=lambda: {TYPE_EXPLORATORY: 0, TYPE_INVALID_LOCATION: 0})

    def record(self, events) -> None:
        for bug_id, kind in events:
            self.found[kind].add(bug_id)
            self.triggers[kind] += 1

    def distinct(self, kind: int) -> int:
        return len(self.found[kind])

    def as_dict(self) -> dict:
        return {
            "distinct_exploratory": self.distinct(TYPE_EXPLORATORY),
            "distinct_invalid_location": self.distinct(TYPE_INVALID_LOCATION),
            "triggers_exploratory": self.triggers[TYPE_EXPLORATORY],
            "triggers_invalid_location": self.triggers[TYPE_INVALID_LOCATION],
        }


def bug_census(event_logs) -> BugCensus:
    """Fold per-episode event lists into one census."""
    census = BugCensus()
    for events in event_logs:
        census.record(events)
    return census


# ---------------------------------------------------------------------------
# Shipped fixed map (20x20, 25 defects) and its 10x10 training crop
# ---------------------------------------------------------------------------

# generator seed that produced the frozen DEFAULT_MAZE_TEXT below
DEFAULT_MAZE_SEED = 8


def default_maze_spec() -> MazeSpec:
    """The fixed 20x20 evaluation map with the standard 25 defects."""
    return parse_maze(DEFAULT_MAZE_TEXT)


def default_submaze_spec() -> MazeSpec:
    """Defect-free 10x10 crop of the default map for small training runs.

    Start stays at the default start; the goal moves to the reachable cell
    farthest from it inside the crop.
    """
    full = default_maze_spec()
    grid = np.array(full.grid[:10, :10], dtype=np.int8)
    grid[grid == GOAL] = FREE
    start = full.start
    if not (0 <= start[0] < 10 and 0 <= start[1] < 10) or grid[start] != FREE:
        free = np.argwhere(grid == FREE)
        start = (int(free[0][0]), int(free[0][1]))
    # breadth-first distances to place the goal as far away as possible
    dist = {start: 0}
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        for dr, dc in MOVES:
            nxt = (r + dr, c + dc)
            if 0 <= nxt[0] < 10 and 0 <= nxt[1] < 10 and grid[nxt] != BLOCK and nxt not in dist:
                dist[nxt] = dist[(r, c)] + 1
                queue.append(nxt)
    goal = max(dist, key=lambda cell: (dist[cell], cell))
    grid[goal] = GOAL
    return MazeSpec(grid, start)


DEFAULT_MAZE_TEXT = """\
S.##2.........#.#.#.
.....#...#........1.
.##...#..2.12#.#....
....#....2..#...##..
....#1#.#..2#1...#..
....#.#.1.....2#.#..
#..#2.#....1..#.....
#.....#.###..#....2.
#....#..#.#...1##...
#.##..#..#####.#.#..
....#.#2............
..#.##.#..1.#.##....
2.###..#..#...#.#...
.#...#.#........1...
........####.#.#.1..
###..#...1.......#..
.#...#.....2...#.#..
###..#..#....2.#1.##
..###....1.....#.#.#
...##.....#.#......G
"""
