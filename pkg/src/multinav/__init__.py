"""Training-free multi-object goal navigation on a deterministic raycast
grid world: mapping, goal localization, incremental planning, frontier
exploration, metrics, and a benchmark harness."""

from .frontier import FrontierCluster, find_frontiers, select_frontier
from .goals import (DetectorConfig, GoalMap, detect_goals, estimate_goal_position,
                    filter_components, project_goals)
from .gridops import geodesic_distance
from .harness import (EpisodeLog, ReplayReport, RunConfig, load_config, replay,
                      run_episode, run_suite)
from .mapping import (EgoMap, MapOverlay, OccupancyMap, ego_to_allo, fuse,
                      project_depth_to_ego)
from .metrics import (EpisodeResult, MetricsInput, SuiteSummary, aggregate,
                      format_table, make_result, ppl, progress, spl, success)
from .planning import DStarLite, PlanGrid
from .policy import AgentState, PolicyConfig, decide, path_to_action, should_call_found
from .raycast import render
from .simulator import (EpisodeStatus, EpisodeTerminatedError, MotionConfig,
                        Simulator, StepOutcome)
from .world import (PALETTE, Action, CameraConfig, EpisodeSpec, Observation,
                    Pose, WorldGrid, load_episode, load_world, save_episode,
                    save_world)
from .worldgen import GenerationError, WorldParams, generate_episode

__version__ = "0.1.0"
