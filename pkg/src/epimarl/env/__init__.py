from .core import (
    VecState,
    agent_components,
    clip_control,
    constraint_h,
    cost_l,
    global_batch,
    global_graph,
    observation_batch,
    observe,
    reset,
    reset_many,
    safety_margins,
    stack_states,
    step,
    step_vec,
    team_cost_vec,
)
from .layout import (
    Layout,
    LayoutError,
    episode_layout,
    format_layout,
    load_layout,
    parse_layout,
    save_layout,
)
from .metrics import (
    Trajectory,
    evaluate,
    read_trajectory_csv,
    trajectory_header,
    write_trajectory_csv,
)
from .tasks import default_update_steps, derive_goals, make_params, task_layout
from .types import (
    AgentGraph,
    AgentState,
    Control,
    EnvParams,
    GlobalState,
    PlacementInfeasibleError,
    TASKS,
)

__all__ = [
    "VecState",
    "agent_components",
    "clip_control",
    "constraint_h",
    "cost_l",
    "global_batch",
    "global_graph",
    "observation_batch",
    "observe",
    "reset",
    "reset_many",
    "safety_margins",
    "stack_states",
    "step",
    "step_vec",
    "team_cost_vec",
    "Layout",
    "LayoutError",
    "episode_layout",
    "format_layout",
    "load_layout",
    "parse_layout",
    "save_layout",
    "Trajectory",
    "evaluate",
    "read_trajectory_csv",
    "trajectory_header",
    "write_trajectory_csv",
    "default_update_steps",
    "derive_goals",
    "make_params",
    "task_layout",
    "AgentGraph",
    "AgentState",
    "Control",
    "EnvParams",
    "GlobalState",
    "PlacementInfeasibleError",
    "TASKS",
]
