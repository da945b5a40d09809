"""
Instantaneous costs, terminal rewards and the discounted episode value.

The value of an episode is minus the discounted sum of per-step costs plus
the discounted terminal reward.
"""
import math
from dataclasses import dataclass, field
from typing import List

from django.db import models

from .dynamics import ControlInput, jerk_estimate
from .exceptions import IncompleteTraceError
from .features import FeatureTarget, current_lane, extract_features
from .world import Observation


class Outcome(models.TextChoices):
    SUCCESS = "success", "Success"
    VIOLATION = "violation", "Violation"
    COLLISION = "collision", "Collision"
    TIMEOUT = "timeout", "Timeout"


@dataclass(frozen=True)
class CostWeights:
    speed: float = 0.05
    lateral: float = 0.1
    jerk: float = 0.01
    steer: float = 0.01

    def __post_init__(self):
        if min(self.speed, self.lateral, self.jerk, self.steer) < 0:
            raise ValueError("cost weights must be nonnegative")


@dataclass(frozen=True)
class RewardSpec:
    gamma: float = 0.99
    weights: CostWeights = field(default_factory=CostWeights)
    term_success: float = 1000.0
    term_failure: float = -1000.0
    timeout_reward: float = 0.0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie strictly between 0 and 1")
        if not self.term_success > 0 > self.term_failure:
            raise ValueError("term_success must be positive and term_failure negative")

    @property
    def scale(self) -> float:
        return max(abs(self.term_success), abs(self.term_failure))


@dataclass(frozen=True)
class EpisodeReturn:
    value: float
    T: int
    K: int
    decision_times: List[int]


def weighted_norm(speed_error: float, lateral_error: float, jerk: float, steer_rate: float,
                  weights: CostWeights) -> float:
    return math.sqrt(
        weights.speed * speed_error ** 2
        + weights.lateral * lateral_error ** 2
        + weights.jerk * jerk ** 2
        + weights.steer * steer_rate ** 2
    )


def inst_cost(o: Observation, a: ControlInput, m: str, spec: RewardSpec,
              target: FeatureTarget = None) -> float:
    """
    Cost of applying ``a`` in the observed state.  Without an explicit target
    the ego's own lane is tracked, or the adjacent lane while changing lanes.
    """
    if target is None:
        lane = current_lane(o)
        if m == "ChangeLane":
            lane = 1 - lane
        target = FeatureTarget(lane=lane)
    phi = extract_features(o, target)
    jerk = jerk_estimate(a, o.ego.u_prev, o.dynamics.dt)
    return weighted_norm(phi.speed_error, phi.lateral_error, jerk, a.steer_rate, spec.weights)


def term_reward(outcome: str, spec: RewardSpec) -> float:
    if outcome == Outcome.SUCCESS:
        return spec.term_success
    if outcome in (Outcome.COLLISION, Outcome.VIOLATION):
        return spec.term_failure
    if outcome == Outcome.TIMEOUT:
        return spec.timeout_reward
    raise ValueError(f"Unknown outcome: {outcome}")


def discounted_cost(costs, gamma: float) -> float:
    total = 0.0
    discount = 1.0
    for cost in costs:
        total += discount * cost
        discount *= gamma
    return total


def episode_value(trace, spec: RewardSpec) -> EpisodeReturn:
    """Value of a complete trace; works on in-memory traces and on loaded ones."""
    terminal = trace.terminal
    if terminal is None:
        raise IncompleteTraceError("trace has no terminal record")
    T = terminal.T
    costs = [step.inst_cost for step in trace.steps]
    if len(costs) != T:
        raise IncompleteTraceError(f"trace holds {len(costs)} steps but terminates at T={T}")
    decision_times = [d.t for d in trace.decisions]
    value = -discounted_cost(costs, spec.gamma) + spec.gamma ** T * term_reward(terminal.outcome, spec)
    return EpisodeReturn(value=value, T=T, K=len(decision_times), decision_times=decision_times)
