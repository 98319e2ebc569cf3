"""Episode dynamics: discrete agent motion, Found adjudication, termination.

Forward motion is all-or-nothing: the move is rejected (pose unchanged,
collided flag set) if any point sampled along the swept segment would put
the agent body within agent_radius of an obstacle cell. Found is judged
against the ground-truth Euclidean distance from the agent to the current
goal cylinder center.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .geometry import normalize_angle
from .raycast import render
from .world import Action, CameraConfig, EpisodeSpec, Observation, Pose


class EpisodeStatus(Enum):
    ONGOING = "Ongoing"
    SUCCESS = "Success"
    FAIL_WRONG_FOUND = "FailWrongFound"
    FAIL_TIMEOUT = "FailTimeout"


class EpisodeTerminatedError(RuntimeError):
    """Raised when an action is applied after the episode has ended."""


@dataclass
class MotionConfig:
    forward_step: float = 0.25
    turn_angle: float = math.radians(30.0)


@dataclass
class StepOutcome:
    observation: Observation
    collided: bool
    episode_status: EpisodeStatus
    goals_found: int


class Simulator:
    """Owns one episode's mutable state; deterministic given spec and actions."""

    def __init__(self, spec: EpisodeSpec, cam: CameraConfig | None = None,
                 motion: MotionConfig | None = None):
        self.spec = spec
        self.world = spec.world
        self.cam = cam if cam is not None else CameraConfig()
        self.motion = motion if motion is not None else MotionConfig()
        self.pose = Pose(spec.start.x, spec.start.y, spec.start.theta)
        self.status = EpisodeStatus.ONGOING
        self.goals_found = 0
        self.steps_taken = 0
        self.path_length = 0.0
        if self.world.point_collides(self.pose.x, self.pose.y):
            raise ValueError("start pose collides with the world")
        centers = self.world.cylinder_centers()
        missing = [g for g in spec.goal_sequence if g not in centers]
        if missing:
            raise ValueError(f"goal colors without a cylinder in the world: {missing}")

    def observe(self) -> Observation:
        return render(self.world, self.pose, self.cam)

    def current_goal_center(self) -> tuple[float, float]:
        color = self.spec.goal_sequence[self.goals_found]
        return self.world.cylinder_centers()[color]

    def _try_move_forward(self) -> bool:
        """Returns True and updates the pose when the move is clear."""
        step = self.motion.forward_step
        dx = -math.sin(self.pose.theta) * step
        dy = math.cos(self.pose.theta) * step
        # Sample the swept segment at half-cell spacing (endpoint included)
        # so a full step cannot tunnel through a one-cell wall.
        n = max(1, int(math.ceil(step / (self.world.resolution / 2.0))))
        for i in range(1, n + 1):
            t = i / n
            if self.world.point_collides(self.pose.x + t * dx, self.pose.y + t * dy):
                return False
        self.pose = Pose(self.pose.x + dx, self.pose.y + dy, self.pose.theta)
        return True

    def step(self, action: Action) -> StepOutcome:
        if self.status is not EpisodeStatus.ONGOING:
            raise EpisodeTerminatedError(
                f"step({action}) after terminal status {self.status}")
        self.steps_taken += 1
        collided = False

        if action is Action.MOVE_FORWARD:
            moved = self._try_move_forward()
            collided = not moved
            if moved:
                self.path_length += self.motion.forward_step
        elif action is Action.TURN_LEFT:
            self.pose = Pose(self.pose.x, self.pose.y,
                             normalize_angle(self.pose.theta + self.motion.turn_angle))
        elif action is Action.TURN_RIGHT:
            self.pose = Pose(self.pose.x, self.pose.y,
                             normalize_angle(self.pose.theta - self.motion.turn_angle))
        elif action is Action.FOUND:
            gx, gy = self.current_goal_center()
            dist = math.hypot(self.pose.x - gx, self.pose.y - gy)
            if dist <= self.spec.success_radius:
                self.goals_found += 1
                if self.goals_found == len(self.spec.goal_sequence):
                    self.status = EpisodeStatus.SUCCESS
            else:
                self.status = EpisodeStatus.FAIL_WRONG_FOUND
        else:
            raise ValueError(f"unknown action {action!r}")

        if (self.status is EpisodeStatus.ONGOING
                and self.steps_taken >= self.spec.max_steps):
            self.status = EpisodeStatus.FAIL_TIMEOUT

        return StepOutcome(
            observation=self.observe(),
            collided=collided,
            episode_status=self.status,
            goals_found=self.goals_found,
        )
