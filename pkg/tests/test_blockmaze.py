"""Maze dynamics, defect semantics, map format, generator and census."""

import numpy as np
import pytest

from rlforge.core import ConfigError, StepAfterDoneError, make_rng
from rlforge.envs.blockmaze import (
    AGENT,
    BLOCK,
    FREE,
    GOAL,
    TYPE_EXPLORATORY,
    TYPE_INVALID_LOCATION,
    BlockmazeEnv,
    MazeSpec,
    bug_census,
    default_maze_spec,
    default_submaze_spec,
    format_maze,
    generate_maze_layout,
    inject_bugs,
    parse_maze,
    reachable_cells,
)

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3

SMALL_TEXT = "S.1\n2#G\n"


def small_env(**kw):
    return BlockmazeEnv(parse_maze(SMALL_TEXT), **kw)


class TestMapFormat:
    def test_small_round_trip(self):
        spec = parse_maze(SMALL_TEXT)
        assert format_maze(spec) == SMALL_TEXT
        assert spec.start == (0, 0)
        assert spec.goal == (1, 2)
        assert spec.bugs == (((0, 2), TYPE_EXPLORATORY), ((1, 0), TYPE_INVALID_LOCATION))

    def test_default_map_round_trip(self):
        spec = default_maze_spec()
        assert parse_maze(format_maze(spec)) == spec
        assert format_maze(parse_maze(format_maze(spec))) == format_maze(spec)

    def test_unknown_glyph_rejected(self):
        with pytest.raises(ConfigError):
            parse_maze("S?\n.G\n")

    def test_missing_start_rejected(self):
        with pytest.raises(ConfigError):
            parse_maze("..\n.G\n")


class TestSpecValidation:
    def test_default_map_contract(self):
        spec = default_maze_spec()
        assert spec.shape == (20, 20)
        assert len(spec.bugs) == 25
        assert spec.count_kind(TYPE_EXPLORATORY) == 13
        assert spec.count_kind(TYPE_INVALID_LOCATION) == 12
        assert spec.goal in reachable_cells(spec.grid, spec.start)

    def test_exploratory_on_block_rejected(self):
        grid = np.array([[FREE, FREE], [BLOCK, GOAL]], dtype=np.int8)
        with pytest.raises(ConfigError):
            MazeSpec(grid, (0, 0), (((1, 0), TYPE_EXPLORATORY),))

    def test_invalid_marker_on_free_rejected(self):
        grid = np.array([[FREE, FREE], [FREE, GOAL]], dtype=np.int8)
        with pytest.raises(ConfigError):
            MazeSpec(grid, (0, 0), (((1, 0), TYPE_INVALID_LOCATION),))

    def test_off_grid_invalid_marker_allowed(self):
        grid = np.array([[FREE, FREE], [FREE, GOAL]], dtype=np.int8)
        spec = MazeSpec(grid, (0, 0), (((-1, 0), TYPE_INVALID_LOCATION),))
        assert spec.bug_at((-1, 0)) == (0, TYPE_INVALID_LOCATION)
        with pytest.raises(ConfigError):
            format_maze(spec)  # off-grid defects have no glyph cell

    def test_unreachable_goal_rejected(self):
        grid = np.array([[FREE, BLOCK], [BLOCK, GOAL]], dtype=np.int8)
        with pytest.raises(ConfigError):
            MazeSpec(grid, (0, 0))


class TestDynamics:
    def test_step_penalty_and_collision(self):
        env = small_env()
        env.reset()
        _, r, done, info = env.step(UP)  # off-grid, no marker there
        assert (r, done, info["bug_events"]) == (-1.0, False, ())
        assert env.agent_cell == (0, 0)

    def test_invalid_location_marker_triggers_on_attempt(self):
        env = small_env()
        env.reset()
        obs, r, done, info = env.step(DOWN)  # block at (1,0) carries marker id 1
        assert done and r == -1.0
        assert info["bug_events"] == ((1, TYPE_INVALID_LOCATION),)
        assert env.agent_cell == (0, 0)  # never moved

    def test_exploratory_marker_records_and_continues(self):
        env = small_env()
        env.reset()
        env.step(RIGHT)
        _, r, done, info = env.step(RIGHT)  # onto (0,2), marker id 0
        assert not done and r == -1.0
        assert info["bug_events"] == ((0, TYPE_EXPLORATORY),)
        _, _, _, info = env.step(LEFT)
        _, _, _, info = env.step(RIGHT)  # re-entry silent by default
        assert info["bug_events"] == ()

    def test_emit_repeats_flag(self):
        env = small_env(emit_repeats=True)
        env.reset()
        env.step(RIGHT)
        env.step(RIGHT)
        env.step(LEFT)
        _, _, _, info = env.step(RIGHT)
        assert info["bug_events"] == ((0, TYPE_EXPLORATORY),)

    def test_goal_reward_and_done(self):
        env = small_env()
        env.reset()
        env.step(RIGHT)
        env.step(RIGHT)
        _, r, done, info = env.step(DOWN)
        assert done and r == 100.0 and info["goal"]
        with pytest.raises(StepAfterDoneError):
            env.step(UP)

    def test_step_cap_truncates(self):
        env = small_env(step_cap=3)
        env.reset()
        env.step(UP)
        env.step(UP)
        _, _, done, _ = env.step(UP)
        assert done

    def test_observation_hides_defects_shows_agent(self):
        env = small_env()
        obs = env.reset()
        assert obs[0, 0] == AGENT
        assert obs[0, 2] == FREE  # exploratory marker invisible
        assert obs[1, 0] == BLOCK  # invalid-location marker invisible
        assert obs[1, 2] == GOAL

    def test_deterministic_replay(self):
        spec = default_maze_spec()
        rng = make_rng(55)
        actions = [int(rng.integers(4)) for _ in range(200)]
        traces = []
        for _ in range(2):
            env = BlockmazeEnv(spec)
            env.reset()
            trace = []
            for a in actions:
                _, r, done, info = env.step(a)
                trace.append((env.agent_cell, r, done, info["bug_events"]))
                if done:
                    break
            traces.append(trace)
        assert traces[0] == traces[1]

    def test_episode_return_bounds(self):
        spec = default_maze_spec()
        rng = make_rng(56)
        for _ in range(10):
            env = BlockmazeEnv(spec)
            env.reset()
            total, done = 0.0, False
            while not done:
                _, r, done, _ = env.step(int(rng.integers(4)))
                total += r
            assert -400.0 <= total <= 100.0


class TestGeneratorAndInjection:
    def test_generated_layouts_connected(self):
        for seed in range(5):
            spec = generate_maze_layout(12, 12, seed=seed)
            assert spec.goal in reachable_cells(spec.grid, spec.start)
            assert not spec.bugs

    def test_injection_counts_and_kinds(self):
        layout = generate_maze_layout(20, 20, seed=3)
        spec = inject_bugs(layout, seed=9)
        assert len(spec.bugs) == 25
        assert spec.count_kind(TYPE_EXPLORATORY) == 13

    def test_injection_deterministic(self):
        layout = generate_maze_layout(20, 20, seed=3)
        assert inject_bugs(layout, seed=9) == inject_bugs(layout, seed=9)
        assert inject_bugs(layout, seed=9) != inject_bugs(layout, seed=10)

    def test_pigeonhole_insufficient_candidates(self):
        tiny = parse_maze("S.\n.G\n")
        with pytest.raises(ConfigError):
            inject_bugs(tiny, seed=0, count=25)

    def test_double_injection_rejected(self):
        layout = generate_maze_layout(20, 20, seed=3)
        spec = inject_bugs(layout, seed=9)
        with pytest.raises(ConfigError):
            inject_bugs(spec, seed=10)


class TestCensus:
    def test_distinct_and_total_counts(self):
        logs = [
            [(0, TYPE_EXPLORATORY), (3, TYPE_INVALID_LOCATION)],
            [(0, TYPE_EXPLORATORY)],
            [],
            [(5, TYPE_EXPLORATORY)],
        ]
        census = bug_census(logs)
        assert census.distinct(TYPE_EXPLORATORY) == 2
        assert census.distinct(TYPE_INVALID_LOCATION) == 1
        assert census.triggers[TYPE_EXPLORATORY] == 3
        d = census.as_dict()
        assert d["distinct_exploratory"] == 2
        assert d["triggers_invalid_location"] == 1


class TestSubmaze:
    def test_crop_contract(self):
        sub = default_submaze_spec()
        assert sub.shape == (10, 10)
        assert not sub.bugs
        assert sub.goal in reachable_cells(sub.grid, sub.start)

    def test_crop_matches_parent_blocks(self):
        full = default_maze_spec()
        sub = default_submaze_spec()
        parent = np.array(full.grid[:10, :10])
        parent[parent == GOAL] = FREE
        child = np.array(sub.grid)
        child[child == GOAL] = FREE
        assert np.array_equal(parent, child)
