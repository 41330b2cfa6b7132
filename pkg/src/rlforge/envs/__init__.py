"""Task environments: two gridworld bug hunts and job-shop scheduling."""

from rlforge.envs.blockmaze import (
    BlockmazeEnv,
    BugCensus,
    MazeSpec,
    bug_census,
    default_maze_spec,
    format_maze,
    generate_maze_layout,
    inject_bugs,
    parse_maze,
)
from rlforge.envs.jssp import (
    JsspEnv,
    JsspInstance,
    ScheduleResult,
    ScheduleState,
    brute_force_optimal,
    classic_pdr,
    dispatch,
    format_instance,
    generate_taillard,
    initial_state,
    lower_bound,
    parse_instance,
    verify_schedule,
)
from rlforge.envs.pacgrid import (
    GateCensus,
    PacGridEnv,
    PacGridSpec,
    default_pacgrid_spec,
    format_pacgrid,
    gate_census,
    parse_pacgrid,
)

__all__ = [
    "BlockmazeEnv",
    "BugCensus",
    "MazeSpec",
    "bug_census",
    "default_maze_spec",
    "format_maze",
    "generate_maze_layout",
    "inject_bugs",
    "parse_maze",
    "JsspEnv",
    "JsspInstance",
    "ScheduleResult",
    "ScheduleState",
    "brute_force_optimal",
    "classic_pdr",
    "dispatch",
    "format_instance",
    "generate_taillard",
    "initial_state",
    "lower_bound",
    "parse_instance",
    "verify_schedule",
    "GateCensus",
    "PacGridEnv",
    "PacGridSpec",
    "default_pacgrid_spec",
    "format_pacgrid",
    "gate_census",
    "parse_pacgrid",
]
