"""Benchmark harness: run configs, episode execution, JSONL logs, replay
verification, and suite aggregation.

Determinism contract: a RunConfig fully determines every log byte. All
arithmetic is IEEE double precision with fixed iteration orders, RNG streams
are PCG64 seeded per episode (suite seed + episode index), floats serialize
through repr via the json module, and per-episode execution is strictly
sequential; the worker pool only fans out whole episodes and merges results
by episode index.
"""
from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .goals import to_ppm
from .gridops import geodesic_distance
from .mapping import to_pgm
from .metrics import (EpisodeResult, MetricsInput, SuiteSummary, aggregate,
                      format_table, make_result)
from .policy import AgentState, Mode, PolicyConfig, decide
from .simulator import EpisodeStatus, MotionConfig, Simulator
from .world import Action, CameraConfig, EpisodeSpec, save_episode
from .worldgen import WorldParams, generate_episode


class ConfigError(ValueError):
    """Invalid or unknown run configuration content."""


@dataclass
class CameraSettings:
    width: int = 128
    height: int = 64
    hfov_deg: float = 79.0
    max_range: float = 8.0

    def to_camera(self) -> CameraConfig:
        return CameraConfig(width=self.width, height=self.height,
                            hfov=math.radians(self.hfov_deg),
                            max_range=self.max_range)


@dataclass
class AgentSettings:
    # map_size defaults large enough that the start-centered map always
    # contains the default 40 m world; the mapping-module default of 550
    # only covers ~27 m of start offset.
    map_size: int = 810
    ego_size: int = 550
    map_resolution: float = 0.1
    epsilon: float = 0.001
    delta: int = 50
    found_margin: float = 0.3
    unexplored_penalty: float = 2.0
    forward_step: float = 0.25
    turn_angle_deg: float = 30.0
    lookahead: int = 4
    refresh_period: int = 10
    loop_limit: int = 3
    snap_radius: int = 10
    crop_margin: int = 60

    def to_policy(self) -> PolicyConfig:
        return PolicyConfig(
            map_size=self.map_size, ego_size=self.ego_size,
            map_resolution=self.map_resolution, epsilon=self.epsilon,
            delta=self.delta, found_margin=self.found_margin,
            unexplored_penalty=self.unexplored_penalty,
            forward_step=self.forward_step,
            turn_angle=math.radians(self.turn_angle_deg),
            lookahead=self.lookahead, refresh_period=self.refresh_period,
            loop_limit=self.loop_limit, snap_radius=self.snap_radius,
            crop_margin=self.crop_margin)

    def to_motion(self) -> MotionConfig:
        return MotionConfig(forward_step=self.forward_step,
                            turn_angle=math.radians(self.turn_angle_deg))


@dataclass
class RunConfig:
    seed: int = 0
    episodes: int = 1
    out: str | None = None
    snapshots: bool = False
    snapshot_period: int = 100
    parallel: int = 1
    world: WorldParams = field(default_factory=WorldParams)
    camera: CameraSettings = field(default_factory=CameraSettings)
    agent: AgentSettings = field(default_factory=AgentSettings)


def _build_section(cls, data: dict, where: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where} configuration: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("run config must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in run config: {sorted(unknown)}")
    sections = {
        "world": _build_section(WorldParams, data.get("world", {}), "world"),
        "camera": _build_section(CameraSettings, data.get("camera", {}), "camera"),
        "agent": _build_section(AgentSettings, data.get("agent", {}), "agent"),
    }
    scalars = {k: v for k, v in data.items() if k not in sections}
    cfg = _build_section(RunConfig, {**scalars, **sections}, "run config")
    if cfg.episodes < 1:
        raise ConfigError("episodes must be at least 1")
    if cfg.parallel < 1:
        raise ConfigError("parallel must be at least 1")
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path: str | Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return config_from_dict(data)


# ---------------------------------------------------------------------------
# Episode logs: line-delimited JSON, one record per simulator step, with a
# header record first and the terminal result record last.
# ---------------------------------------------------------------------------

def _dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


@dataclass
class EpisodeLog:
    header: dict
    steps: list[dict] = field(default_factory=list)
    result: dict | None = None

    def to_jsonl(self) -> str:
        lines = [_dumps({"type": "header", **self.header})]
        lines += [_dumps({"type": "step", **s}) for s in self.steps]
        if self.result is not None:
            lines.append(_dumps({"type": "result", **self.result}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "EpisodeLog":
        header, steps, result = None, [], None
        for line in text.splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            kind = record.pop("type")
            if kind == "header":
                header = record
            elif kind == "step":
                steps.append(record)
            elif kind == "result":
                result = record
            else:
                raise ValueError(f"unknown log record type {kind!r}")
        if header is None:
            raise ValueError("log has no header record")
        return cls(header=header, steps=steps, result=result)


def segment_geodesics(spec: EpisodeSpec) -> list[float]:
    """Ground-truth geodesic legs start -> goal1 -> ... -> goalK, meters."""
    centers = spec.world.cylinder_centers()
    points = [(spec.start.x, spec.start.y)]
    points += [centers[color] for color in spec.goal_sequence]
    legs = []
    for a, b in zip(points, points[1:]):
        d = geodesic_distance(spec.world, a, b)
        if not math.isfinite(d):
            raise RuntimeError("episode has an unreachable goal segment")
        legs.append(d)
    return legs


def run_episode(spec: EpisodeSpec, cfg: RunConfig,
                episode_index: int = 0, episode_seed: int | None = None
                ) -> tuple[EpisodeResult, EpisodeLog]:
    """Drive the decide/step loop to termination and score the episode."""
    cam = cfg.camera.to_camera()
    sim = Simulator(spec, cam, cfg.agent.to_motion())
    state = AgentState(spec.start, spec.palette, spec.goal_sequence, cam,
                       success_radius=spec.success_radius,
                       agent_radius=spec.world.agent_radius,
                       config=cfg.agent.to_policy())
    log = EpisodeLog(header={
        "episode_index": episode_index,
        "episode_seed": episode_seed,
        "config": config_to_dict(cfg),
        "goal_sequence": list(spec.goal_sequence),
        "start": [spec.start.x, spec.start.y, spec.start.theta],
    })
    snap_dir = None
    if cfg.out is not None and cfg.snapshots:
        snap_dir = Path(cfg.out) / f"ep_{episode_index:04d}"
        snap_dir.mkdir(parents=True, exist_ok=True)
        save_episode(spec, snap_dir, "episode", seed=episode_seed)

    obs = sim.observe()
    while sim.status is EpisodeStatus.ONGOING:
        action = decide(state, obs)
        outcome = sim.step(action)
        log.steps.append({
            "step": sim.steps_taken,
            "x": sim.pose.x, "y": sim.pose.y, "theta": sim.pose.theta,
            "action": action.value,
            "mode": state.mode.value,
            "collided": outcome.collided,
            "goals_found": outcome.goals_found,
        })
        state.note_outcome(outcome.collided, outcome.goals_found)
        obs = outcome.observation
        if snap_dir is not None and sim.steps_taken % cfg.snapshot_period == 0:
            to_pgm(state.occupancy, snap_dir / f"step_{sim.steps_taken:05d}.pgm")
            to_ppm(state.goal_map, snap_dir / f"step_{sim.steps_taken:05d}.ppm")

    legs = segment_geodesics(spec)
    inp = MetricsInput(
        succeeded=sim.status is EpisodeStatus.SUCCESS,
        goals_found=sim.goals_found,
        total_goals=len(spec.goal_sequence),
        path_length=sim.path_length,
        segment_geodesics=legs,
    )
    result = make_result(inp, sim.steps_taken, sim.status.value)
    log.result = {
        "termination": result.termination,
        "steps": result.steps,
        "success": result.success,
        "progress": result.progress,
        "spl": result.spl,
        "ppl": result.ppl,
        "path_length": sim.path_length,
        "goals_found": sim.goals_found,
        "segment_geodesics": legs,
    }
    if snap_dir is not None:
        to_pgm(state.occupancy, snap_dir / "final.pgm")
        to_ppm(state.goal_map, snap_dir / "final.ppm")
    return result, log


def _run_indexed(cfg_dict: dict, index: int) -> tuple[int, dict, str]:
    """Worker entry point: regenerate and run one episode by index."""
    cfg = config_from_dict(cfg_dict)
    episode_seed = cfg.seed + index
    spec = generate_episode(episode_seed, cfg.world)
    result, log = run_episode(spec, cfg, episode_index=index,
                              episode_seed=episode_seed)
    return index, dataclasses.asdict(result), log.to_jsonl()


def run_suite(cfg: RunConfig, echo=None) -> tuple[SuiteSummary, list[EpisodeResult]]:
    """Generate and run cfg.episodes episodes from consecutive seeds.

    Logs, per-episode results, the resolved config, and the summary table are
    persisted under cfg.out when set; an episode failure aborts the suite but
    whatever completed stays on disk.
    """
    out_dir = Path(cfg.out) if cfg.out is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "run_config.json").write_text(
            json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")
    cfg_dict = config_to_dict(cfg)

    results: list[EpisodeResult] = []
    try:
        if cfg.parallel > 1 and cfg.episodes > 1:
            with ProcessPoolExecutor(max_workers=cfg.parallel) as pool:
                for index, result_dict, log_text in pool.map(
                        _run_indexed, [cfg_dict] * cfg.episodes,
                        range(cfg.episodes)):
                    results.append(EpisodeResult(**result_dict))
                    _persist_episode(out_dir, index, result_dict, log_text, echo)
        else:
            for index in range(cfg.episodes):
                index, result_dict, log_text = _run_indexed(cfg_dict, index)
                results.append(EpisodeResult(**result_dict))
                _persist_episode(out_dir, index, result_dict, log_text, echo)
    finally:
        if results:
            summary = aggregate(results)
            table = format_table([("SGoLAM-style (ours)", summary)])
            if out_dir is not None:
                (out_dir / "table.txt").write_text(table + "\n")
                with open(out_dir / "results.jsonl", "w") as fh:
                    for i, r in enumerate(results):
                        fh.write(_dumps({"episode": i, **dataclasses.asdict(r)}) + "\n")
    summary = aggregate(results)
    return summary, results


def _persist_episode(out_dir, index, result_dict, log_text, echo) -> None:
    if out_dir is not None:
        (out_dir / f"ep_{index:04d}.jsonl").write_text(log_text)
    if echo is not None:
        echo(f"episode {index:4d}: {result_dict['termination']:<14} "
             f"steps={result_dict['steps']:<5} spl={result_dict['spl']:.3f}")


# ---------------------------------------------------------------------------
# Replay verification.
# ---------------------------------------------------------------------------

@dataclass
class ReplayReport:
    ok: bool
    steps_checked: int
    first_divergence: dict | None = None


def replay(log: EpisodeLog, spec: EpisodeSpec, cfg: RunConfig) -> ReplayReport:
    """Re-execute the logged actions and verify pose/outcome agreement."""
    sim = Simulator(spec, cfg.camera.to_camera(), cfg.agent.to_motion())
    checked = 0
    for record in log.steps:
        if sim.status is not EpisodeStatus.ONGOING:
            return ReplayReport(False, checked, {
                "step": record["step"], "field": "status",
                "logged": "Ongoing", "actual": sim.status.value})
        outcome = sim.step(Action(record["action"]))
        checked += 1
        for name, actual in (("x", sim.pose.x), ("y", sim.pose.y),
                             ("theta", sim.pose.theta),
                             ("collided", outcome.collided),
                             ("goals_found", outcome.goals_found)):
            if record[name] != actual:
                return ReplayReport(False, checked, {
                    "step": record["step"], "field": name,
                    "logged": record[name], "actual": actual})
    logged_term = (log.result or {}).get("termination")
    if logged_term is not None and logged_term != sim.status.value:
        return ReplayReport(False, checked, {
            "step": checked, "field": "termination",
            "logged": logged_term, "actual": sim.status.value})
    return ReplayReport(True, checked, None)


def spec_from_log(log: EpisodeLog) -> tuple[EpisodeSpec, RunConfig]:
    """Regenerate the episode a log was produced from (seeded generation)."""
    cfg = config_from_dict(log.header["config"])
    episode_seed = log.header["episode_seed"]
    if episode_seed is None:
        raise ValueError("log header carries no episode seed")
    spec = generate_episode(int(episode_seed), cfg.world)
    return spec, cfg


def recompute_result_from_log(log: EpisodeLog) -> EpisodeResult:
    """Rebuild the episode metrics purely from the step records plus the
    regenerated world; used by `eval` and the log-consistency checks."""
    spec, cfg = spec_from_log(log)
    forward = cfg.agent.forward_step
    p = sum(forward for s in log.steps
            if s["action"] == Action.MOVE_FORWARD.value and not s["collided"])
    goals_found = log.steps[-1]["goals_found"] if log.steps else 0
    termination = (log.result or {}).get("termination", "unknown")
    inp = MetricsInput(
        succeeded=termination == EpisodeStatus.SUCCESS.value,
        goals_found=goals_found,
        total_goals=len(spec.goal_sequence),
        path_length=p,
        segment_geodesics=segment_geodesics(spec),
    )
    return make_result(inp, len(log.steps), termination)
