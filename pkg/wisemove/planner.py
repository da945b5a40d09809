"""
High-level decision making over options: a fixed options graph and an MCTS
planner that looks ahead by simulating options with the world model.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional

import numpy as np
from django.db import models

from .exceptions import EmptyAvailableError, NoRuleFiresError
from .ltl import Monitor
from .options import DEFAULT_SPECS, OptionId, OptionSpec, available_options, goal_reached, run_option
from .reward import Outcome, RewardSpec, term_reward
from .world import WorldState, valuation

logger = logging.getLogger(__name__)


class PlannerMode(models.TextChoices):
    MANUAL = "manual", "Manual options graph"
    MCTS = "mcts", "Monte Carlo tree search"


@dataclass(frozen=True)
class MctsConfig:
    iterations: int = 100
    c_uct: float = 1.4
    max_depth: int = 10
    rollout_horizon: int = 25
    # discount is the reward discount; a value here must agree with it
    gamma: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.c_uct < 0:
            raise ValueError("c_uct must be nonnegative")
        if self.max_depth < 1 or self.rollout_horizon < 0:
            raise ValueError("max_depth must be positive and rollout_horizon nonnegative")
        if self.gamma is not None and not 0 < self.gamma < 1:
            raise ValueError("gamma must lie strictly between 0 and 1")


# --- manual options graph ---------------------------------------------------

def braking_envelope(v: float) -> float:
    """Distance to the stop line at which the approach to it should start."""
    return 2.0 * v + v * v / 3.0 + 10.0


def adjacent_lane_clear(s: WorldState, behind: float = 10.0) -> bool:
    g = s.geometry
    ego = s.ego
    ego_s, ego_lat = g.to_route(ego.route, ego.cont.X, ego.cont.Y)
    other_lane = 1 - g.lane_of(ego_lat)
    for veh in s.vehicles[1:]:
        if veh.route != ego.route:
            continue
        along, lat = g.to_route(veh.route, veh.cont.X, veh.cont.Y)
        if g.lane_of(lat) == other_lane and -behind <= along - ego_s <= g.lookahead_dist:
            return False
    return True


def _waiting_at_stop(s, y, available):
    return y["has_stopped_in_stop_region"] and y["in_stop_region"]


def _approaching_stop(s, y, available):
    if y["has_stopped_in_stop_region"] or OptionId.STOP not in available:
        return False
    g = s.geometry
    along, _ = g.to_route(s.ego.route, s.ego.cont.X, s.ego.cont.Y)
    return g.stop_line - along <= braking_envelope(s.ego.cont.v)


def _too_close(s, y, available):
    return y["veh_ahead_too_close"]


def _overtake(s, y, available):
    return y["veh_ahead"] and OptionId.CHANGE_LANE in available and adjacent_lane_clear(s)


def _always(s, y, available):
    return True


# stopped at the stop region -> Wait; approaching it -> Stop; too close -> Follow;
# blocked with a free neighbour lane -> ChangeLane; otherwise KeepLane
MANUAL_POLICY_GRAPH = (
    (_waiting_at_stop, OptionId.WAIT),
    (_approaching_stop, OptionId.STOP),
    (_too_close, OptionId.FOLLOW),
    (_overtake, OptionId.CHANGE_LANE),
    (_always, OptionId.KEEP_LANE),
)


def baseline_choose(s: WorldState, y: Mapping[str, bool] = None,
                    specs: Mapping[str, OptionSpec] = None) -> str:
    y = valuation(s, 0) if y is None else y
    available = available_options(s, specs)
    if not available:
        raise EmptyAvailableError("no option is available")
    for condition, option in MANUAL_POLICY_GRAPH:
        if option in available and condition(s, y, available):
            return option
    raise NoRuleFiresError(f"no rule of the options graph fires; available: {available}")


# --- MCTS -------------------------------------------------------------------

def uct_score(n: int, q: float, parent_n: int, c: float) -> float:
    if n == 0:
        return math.inf
    return q + c * math.sqrt(math.log(parent_n) / n)


@dataclass
class MctsNode:
    state: WorldState
    monitors: Dict[str, Monitor]
    depth: int = 0
    steps_left: Optional[int] = None
    # normalized return of the option leading here and its length in steps
    reward: float = 0.0
    length: int = 0
    terminal: bool = False
    N: int = 0
    W: float = 0.0
    untried: List[str] = field(default_factory=list)
    children: Dict[str, "MctsNode"] = field(default_factory=dict)

    @property
    def Q(self) -> float:
        return self.W / self.N if self.N else 0.0


class MctsPlanner:
    """One planning call: builds a tree over options rooted at a state snapshot."""

    def __init__(self, cfg: MctsConfig, mu, reward_spec: RewardSpec, rng: np.random.Generator,
                 specs: Mapping[str, OptionSpec] = None, goal: Callable[[WorldState], bool] = goal_reached):
        self.cfg = cfg
        self.mu = mu
        self.reward_spec = reward_spec
        self.rng = rng
        self.specs = DEFAULT_SPECS if specs is None else specs
        self.goal = goal
        if cfg.gamma is not None and cfg.gamma != reward_spec.gamma:
            raise ValueError(
                f"planner discount {cfg.gamma} differs from the reward discount {reward_spec.gamma}"
            )
        self.gamma = reward_spec.gamma
        self.scale = reward_spec.scale
        self.aborted = 0

    def _simulate(self, state, option, monitors, steps_left):
        result = run_option(state, self.specs[option], self.mu, monitors, self.reward_spec,
                            goal=self.goal, steps_limit=steps_left)
        length = len(result.segment)
        remaining = None if steps_left is None else steps_left - length
        outcome = result.episode_outcome
        if outcome is None and remaining is not None and remaining <= 0:
            outcome = Outcome.TIMEOUT
        value = result.segment_return
        if outcome is not None:
            value += self.gamma ** length * term_reward(outcome, self.reward_spec)
        return result, length, remaining, outcome, value / self.scale

    def _expand(self, node: MctsNode, option: str) -> MctsNode:
        result, length, remaining, outcome, value = self._simulate(node.state, option, node.monitors, node.steps_left)
        child = MctsNode(
            state=result.state,
            monitors=result.monitors,
            depth=node.depth + 1,
            steps_left=remaining,
            reward=value,
            length=length,
            terminal=outcome is not None,
        )
        if not child.terminal:
            child.untried = list(available_options(child.state, self.specs))
        node.children[option] = child
        return child

    def _rollout(self, node: MctsNode) -> float:
        state, monitors, steps_left = node.state, node.monitors, node.steps_left
        total, elapsed = 0.0, 0
        for _ in range(self.cfg.rollout_horizon):
            option = baseline_choose(state, specs=self.specs)
            result, length, steps_left, outcome, value = self._simulate(state, option, monitors, steps_left)
            total += self.gamma ** elapsed * value
            elapsed += length
            if outcome is not None:
                break
            state, monitors = result.state, result.monitors
        return total

    def _select(self, node: MctsNode) -> MctsNode:
        best, best_score = None, -math.inf
        for option in OptionId:
            child = node.children.get(option)
            if child is None:
                continue
            score = uct_score(child.N, child.Q, node.N, self.cfg.c_uct)
            if score > best_score:
                best, best_score = child, score
        return best

    def plan(self, s: WorldState, monitors: Mapping[str, Monitor], steps_left: int = None) -> str:
        available = available_options(s, self.specs)
        if not available:
            raise EmptyAvailableError("no option is available")
        if len(available) == 1:
            return available[0]

        root = MctsNode(state=s, monitors=dict(monitors), steps_left=steps_left, untried=list(available))
        for _ in range(self.cfg.iterations):
            node, path = root, [root]
            while not node.untried and node.children and not node.terminal and node.depth < self.cfg.max_depth:
                node = self._select(node)
                path.append(node)
            if node.untried and not node.terminal and node.depth < self.cfg.max_depth:
                option = node.untried.pop(int(self.rng.integers(len(node.untried))))
                node = self._expand(node, option)
                path.append(node)
            elif not node.terminal and not node.children and node.depth < self.cfg.max_depth:
                # a live state with nothing to expand
                self.aborted += 1
                continue

            value = 0.0 if node.terminal else self._rollout(node)
            root.N += 1
            for child in reversed(path[1:]):
                value = child.reward + self.gamma ** child.length * value
                child.N += 1
                child.W += value

        best_option, best_key = None, None
        for option in OptionId:
            child = root.children.get(option)
            if child is None:
                continue
            key = (child.N, child.Q)
            if best_key is None or key > best_key:
                best_option, best_key = option, key
        logger.debug(
            "MCTS chose %s: %s",
            best_option,
            {str(o): (c.N, round(c.Q, 4)) for o, c in root.children.items()},
        )
        return best_option


def mcts_plan(s: WorldState, monitors: Mapping[str, Monitor], cfg: MctsConfig, mu,
              reward_spec: RewardSpec, rng: np.random.Generator, specs: Mapping[str, OptionSpec] = None,
              goal: Callable[[WorldState], bool] = goal_reached, steps_left: int = None) -> str:
    return MctsPlanner(cfg, mu, reward_spec, rng, specs=specs, goal=goal).plan(s, monitors, steps_left)
