"""Episode scoring: Success, Progress, SPL, and PPL plus suite aggregation.

SPL discounts binary success by d / max(p, d) where d is the geodesic
distance of the ideal route start -> goal1 -> ... -> goalK and p is the
distance the agent actually traveled. PPL is the progress-weighted analogue
that truncates the ideal route after the goals actually found, preventing
unfairly high credit for short partial trajectories.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass
class MetricsInput:
    succeeded: bool            # clean success: every goal found in order
    goals_found: int           # l
    total_goals: int           # k
    path_length: float         # p, meters traveled by the agent
    segment_geodesics: list[float]  # d_{i-1,i} for i = 1..k, meters

    def __post_init__(self):
        if self.total_goals < 1:
            raise ValueError("total_goals must be at least 1")
        if not 0 <= self.goals_found <= self.total_goals:
            raise ValueError("goals_found out of range")
        if len(self.segment_geodesics) != self.total_goals:
            raise ValueError("need one geodesic segment per goal")
        if self.path_length < 0.0:
            raise ValueError("path_length must be non-negative")
        if any(d < 0.0 for d in self.segment_geodesics):
            raise ValueError("segment geodesics must be non-negative")


@dataclass
class EpisodeResult:
    success: int
    progress: float
    spl: float
    ppl: float
    steps: int
    termination: str


def success(inp: MetricsInput) -> int:
    return 1 if inp.succeeded else 0


def progress(inp: MetricsInput) -> float:
    return inp.goals_found / inp.total_goals


def spl(inp: MetricsInput) -> float:
    s = success(inp)
    d = sum(inp.segment_geodesics)
    denom = max(inp.path_length, d)
    if denom == 0.0:
        return float(s)    # start co-located with every goal
    # Ratio first: d/denom <= 1 exactly, so the product never exceeds s.
    return s * (d / denom)


def ppl(inp: MetricsInput) -> float:
    if inp.goals_found == 0:
        return 0.0
    s_bar = progress(inp)
    d_bar = sum(inp.segment_geodesics[:inp.goals_found])
    denom = max(inp.path_length, d_bar)
    if denom == 0.0:
        return s_bar
    return s_bar * (d_bar / denom)


def make_result(inp: MetricsInput, steps: int, termination: str) -> EpisodeResult:
    return EpisodeResult(
        success=success(inp),
        progress=progress(inp),
        spl=spl(inp),
        ppl=ppl(inp),
        steps=steps,
        termination=termination,
    )


@dataclass
class SuiteSummary:
    episodes: int
    success: float
    progress: float
    ppl: float
    spl: float


def aggregate(results: list[EpisodeResult]) -> SuiteSummary:
    if not results:
        raise ValueError("cannot aggregate an empty result list")
    n = len(results)
    return SuiteSummary(
        episodes=n,
        success=sum(r.success for r in results) / n,
        progress=sum(r.progress for r in results) / n,
        ppl=sum(r.ppl for r in results) / n,
        spl=sum(r.spl for r in results) / n,
    )


def format_table(rows: list[tuple[str, SuiteSummary]]) -> str:
    """Aligned plain-text table: Method | Success | Progress | PPL | SPL."""
    header = ("Method", "Success", "Progress", "PPL", "SPL")
    cells = [header]
    for name, s in rows:
        cells.append((name, f"{s.success:.2f}", f"{s.progress:.2f}",
                      f"{s.ppl:.2f}", f"{s.spl:.2f}"))
    widths = [max(len(row[i]) for row in cells) for i in range(5)]
    lines = []
    for row in cells:
        lines.append(" | ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    return "\n".join(lines)
