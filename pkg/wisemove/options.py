"""
Options (manoeuvres) of the ego vehicle.

An option is a precondition formula, a programmed low-level controller and a
termination condition.  Preconditions are monitored at runtime for as long
as the option runs; availability is a one-step check of the precondition.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Tuple

from django.db import models

from .dynamics import ContinuousVehicleState, ControlInput, DynamicsParams, clamp_input
from .features import FeatureTarget, FeatureVector, extract_features, wrap_angle
from .exceptions import PlannerError
from .ltl import Formula, Monitor, Verdict, monitor_step, new_monitor, parse
from .reward import Outcome, RewardSpec, discounted_cost, inst_cost
from .world import WorldState, check_collision, lead_vehicle, observe, valuation, world_step

logger = logging.getLogger(__name__)

# traffic rules monitored over every episode, keyed by label
EPISODE_RULES: Dict[str, Formula] = {
    "stop_region_rule": parse("G(in_stop_region => (in_stop_region U has_stopped_in_stop_region))"),
    "clear_intersection_rule": parse("G(in_intersection => intersection_is_clear)"),
    "priority_rule": parse("G(not in_intersection U highest_priority)"),
    "speed_limit_rule": parse("G(not over_speed_limit)"),
}

FULL_BRAKE = -math.inf


class OptionId(models.TextChoices):
    KEEP_LANE = "KeepLane", "Keep lane while driving"
    STOP = "Stop", "Stop at the stop region"
    WAIT = "Wait", "Wait at the stop region then drive forward"
    FOLLOW = "Follow", "Follow vehicle ahead"
    CHANGE_LANE = "ChangeLane", "Change to other lane"


PRECONDITIONS: Dict[str, Formula] = {
    OptionId.KEEP_LANE: parse("true"),
    OptionId.STOP: parse("G(not has_stopped_in_stop_region)"),
    OptionId.WAIT: parse("G((has_stopped_in_stop_region and in_stop_region) U highest_priority)"),
    OptionId.FOLLOW: parse("G(veh_ahead)"),
    OptionId.CHANGE_LANE: parse("G(not(in_intersection or in_stop_region))"),
}

TRAINING_MONITORS: Dict[str, Tuple[Tuple[str, Formula], ...]] = {
    OptionId.KEEP_LANE: (("keep_lane_liveness", parse("G(not stopped_now)")),),
    OptionId.FOLLOW: (("follow_safety", parse("G(not veh_ahead_too_close)")),),
}


@dataclass(frozen=True)
class OptionGains:
    k_v: float = 1.0
    k_lat: float = 0.3
    k_head: float = 1.2
    k_psi: float = 5.0
    k_gap: float = 0.5
    k_rel: float = 1.0
    reference_speed: float = 10.0
    horizon_steps: int = 20
    timeout_steps: int = 300
    stop_margin: float = 1.5
    stop_tolerance: float = 0.25
    brake_trigger: float = 1.5
    lane_tolerance: float = 0.2
    heading_tolerance: float = 0.05
    training_monitors: bool = False

    def __post_init__(self):
        if self.timeout_steps <= 0 or self.horizon_steps <= 0:
            raise ValueError("option horizons must be positive")


@dataclass(frozen=True)
class OptionContext:
    target: FeatureTarget
    start_along: float


@dataclass(frozen=True)
class OptionSpec:
    id: str
    precondition: Formula
    controller: Callable[[FeatureVector, OptionGains], ControlInput]
    success: Callable[[WorldState, OptionContext, int, OptionGains], bool]
    gains: OptionGains = field(default_factory=OptionGains)
    applicable: Optional[Callable[[WorldState], bool]] = None
    extra_monitors: Tuple[Tuple[str, Formula], ...] = ()

    @property
    def timeout_steps(self) -> int:
        return self.gains.timeout_steps


@dataclass(frozen=True)
class TerminationOutcome:
    kind: str
    formula: str = ""

    def __str__(self):
        return f"{self.kind}({self.formula})" if self.formula else str(self.kind)


@dataclass(frozen=True)
class StepRecord:
    t: int
    time: float
    state: WorldState
    valuation: Dict[str, bool]
    option: str
    action: ControlInput
    inst_cost: float


@dataclass(frozen=True)
class OptionResult:
    segment: Tuple[StepRecord, ...]
    outcome: TerminationOutcome
    segment_return: float
    state: WorldState
    monitors: Dict[str, Monitor]
    episode_outcome: Optional[str] = None
    violated: Tuple[str, ...] = ()


# --- controllers ------------------------------------------------------------

def _steer_rate(phi: FeatureVector, g: OptionGains) -> float:
    psi_des = g.k_lat * phi.lateral_error - g.k_head * phi.heading_error
    return g.k_psi * (psi_des - phi.psi)


def _follow_cap(phi: FeatureVector, g: OptionGains) -> float:
    if math.isinf(phi.gap_error):
        return math.inf
    return g.k_gap * phi.gap_error + g.k_rel * phi.rel_speed_ahead


def keep_lane_controller(phi: FeatureVector, g: OptionGains) -> ControlInput:
    return ControlInput(accel=g.k_v * phi.speed_error, steer_rate=_steer_rate(phi, g))


def stop_controller(phi: FeatureVector, g: OptionGains) -> ControlInput:
    remaining = phi.dist_to_stop_region_end - g.stop_margin
    if remaining <= g.stop_tolerance:
        accel = FULL_BRAKE
    else:
        needed = phi.v ** 2 / (2 * remaining)
        accel = -needed if needed >= g.brake_trigger else g.k_v * phi.speed_error
    return ControlInput(accel=min(accel, _follow_cap(phi, g)), steer_rate=_steer_rate(phi, g))


def wait_controller(phi: FeatureVector, g: OptionGains) -> ControlInput:
    may_go = phi.highest_priority and phi.intersection_is_clear
    if phi.in_stop_region and not may_go:
        accel = FULL_BRAKE
    else:
        accel = min(g.k_v * phi.speed_error, _follow_cap(phi, g))
    return ControlInput(accel=accel, steer_rate=_steer_rate(phi, g))


def follow_controller(phi: FeatureVector, g: OptionGains) -> ControlInput:
    accel = min(_follow_cap(phi, g), g.k_v * phi.speed_error)
    return ControlInput(accel=accel, steer_rate=_steer_rate(phi, g))


# --- success predicates -----------------------------------------------------

def _ego_route_position(s: WorldState) -> Tuple[float, float]:
    ego = s.ego
    return s.geometry.to_route(ego.route, ego.cont.X, ego.cont.Y)


def horizon_reached(s: WorldState, ctx: OptionContext, steps: int, g: OptionGains) -> bool:
    return steps >= g.horizon_steps


def stopped_in_region(s: WorldState, ctx: OptionContext, steps: int, g: OptionGains) -> bool:
    return s.ego.z.has_stopped_in_stop_region


def crossed_intersection(s: WorldState, ctx: OptionContext, steps: int, g: OptionGains) -> bool:
    exit_line = s.geometry.intersection_exit
    along, _ = _ego_route_position(s)
    return ctx.start_along <= exit_line < along


def settled_in_lane(s: WorldState, ctx: OptionContext, steps: int, g: OptionGains) -> bool:
    _, lat = _ego_route_position(s)
    lateral_error = lat - s.geometry.lane_center(ctx.target.lane)
    heading_error = wrap_angle(s.ego.cont.theta - s.geometry.heading(s.ego.route))
    return abs(lateral_error) < g.lane_tolerance and abs(heading_error) < g.heading_tolerance


def stop_line_ahead(s: WorldState) -> bool:
    along, _ = _ego_route_position(s)
    return along < s.geometry.stop_line


def before_exit_line(s: WorldState) -> bool:
    along, _ = _ego_route_position(s)
    return along <= s.geometry.intersection_exit


def clear_of_junction_next_step(s: WorldState) -> bool:
    """Neither in nor one full-throttle step away from the stop region and intersection"""
    g, p = s.geometry, s.dynamics
    along, _ = _ego_route_position(s)
    reach = max(s.ego.cont.v, 0.0) * p.dt + 0.5 * p.a_max * p.dt ** 2
    return along + reach < g.stop_line - g.stop_region_depth or along > g.intersection_exit


def vehicle_ahead(s: WorldState) -> bool:
    lead = lead_vehicle(s, 0)
    if lead is None:
        return False
    _, gap, rel_speed = lead
    # the lead must still be inside the lookahead after one step of either vehicle at full acceleration
    p = s.dynamics
    opening = max(rel_speed, 0.0) * p.dt + p.a_max * p.dt ** 2
    return gap + s.geometry.veh_len + opening < s.geometry.lookahead_dist


_CONTROLLERS = {
    OptionId.KEEP_LANE: keep_lane_controller,
    OptionId.STOP: stop_controller,
    OptionId.WAIT: wait_controller,
    OptionId.FOLLOW: follow_controller,
    OptionId.CHANGE_LANE: keep_lane_controller,
}
_SUCCESS = {
    OptionId.KEEP_LANE: horizon_reached,
    OptionId.STOP: stopped_in_region,
    OptionId.WAIT: crossed_intersection,
    OptionId.FOLLOW: horizon_reached,
    OptionId.CHANGE_LANE: settled_in_lane,
}
_APPLICABLE = {
    OptionId.STOP: stop_line_ahead,
    OptionId.WAIT: before_exit_line,
    OptionId.FOLLOW: vehicle_ahead,
    OptionId.CHANGE_LANE: clear_of_junction_next_step,
}


def build_option_specs(gains: Mapping[str, OptionGains] = None) -> Dict[str, OptionSpec]:
    """The five standard options, in enumeration order."""
    gains = gains or {}
    specs = {}
    for option in OptionId:
        option_gains = gains.get(option.value, OptionGains())
        specs[option] = OptionSpec(
            id=option,
            precondition=PRECONDITIONS[option],
            controller=_CONTROLLERS[option],
            success=_SUCCESS[option],
            gains=option_gains,
            applicable=_APPLICABLE.get(option),
            extra_monitors=TRAINING_MONITORS.get(option, ()) if option_gains.training_monitors else (),
        )
    return specs


DEFAULT_SPECS = build_option_specs()


# --- availability and termination -------------------------------------------

def is_available(s: WorldState, spec: OptionSpec, y: Mapping[str, bool] = None) -> bool:
    y = valuation(s, 0) if y is None else y
    _, verdict = monitor_step(new_monitor(spec.precondition), y)
    if verdict == Verdict.VIOLATED:
        return False
    return spec.applicable is None or spec.applicable(s)


def available_options(s: WorldState, specs: Mapping[str, OptionSpec] = None) -> list:
    specs = DEFAULT_SPECS if specs is None else specs
    y = valuation(s, 0)
    return [option for option in OptionId if option in specs and is_available(s, specs[option], y)]


def option_context(spec: OptionSpec, s: WorldState) -> OptionContext:
    g = s.geometry
    along, lat = _ego_route_position(s)
    lane = g.lane_of(lat)
    if spec.id == OptionId.CHANGE_LANE:
        lane = 1 - lane
    return OptionContext(
        target=FeatureTarget(lane=lane, reference_speed=spec.gains.reference_speed),
        start_along=along,
    )


def low_level_action(spec: OptionSpec, phi: FeatureVector, p: DynamicsParams = None) -> ControlInput:
    """Controller output floored at -v/dt and clamped into the action bounds"""
    p = p or DynamicsParams()
    raw = spec.controller(phi, spec.gains)
    accel = max(raw.accel, -phi.v / p.dt)
    return clamp_input(
        ControlInput(accel=accel, steer_rate=raw.steer_rate),
        ContinuousVehicleState(v=phi.v, psi=phi.psi),
        p,
    )


def precondition_label(spec: OptionSpec) -> str:
    return f"{spec.id}:precondition"


def check_termination(spec: OptionSpec, monitors, s: WorldState, steps_elapsed: int,
                      ctx: OptionContext = None, timeout_steps: int = None) -> Optional[TerminationOutcome]:
    """
    First matching cause in the order violation, collision, success, timeout.

    The option's own precondition yields to its success condition: Stop's
    precondition G(not has_stopped_in_stop_region) is falsified by the very
    step that completes it.
    """
    ctx = ctx or option_context(spec, s)
    succeeded = spec.success(s, ctx, steps_elapsed, spec.gains)
    own = precondition_label(spec)
    for m in monitors:
        if m.verdict == Verdict.VIOLATED and not (succeeded and m.label == own):
            return TerminationOutcome(Outcome.VIOLATION, m.label or str(m.original))
    if check_collision(s):
        return TerminationOutcome(Outcome.COLLISION)
    if succeeded:
        return TerminationOutcome(Outcome.SUCCESS)
    limit = spec.timeout_steps if timeout_steps is None else timeout_steps
    if steps_elapsed >= limit:
        return TerminationOutcome(Outcome.TIMEOUT)
    return None


# --- episode helpers --------------------------------------------------------

def goal_reached(s: WorldState) -> bool:
    ego = s.ego
    g = s.geometry
    return g.in_goal_region(ego.route, ego.cont.X, ego.cont.Y) and ego.cont.v <= g.speed_limit


def new_episode_monitors(y: Mapping[str, bool], rules: Mapping[str, Formula] = None) -> Dict[str, Monitor]:
    """Fresh traffic-rule monitors that have consumed the initial valuation."""
    rules = EPISODE_RULES if rules is None else rules
    monitors = {}
    for label, formula in rules.items():
        monitors[label], _ = monitor_step(new_monitor(formula, label=label), y)
    return monitors


def run_option(s: WorldState, spec: OptionSpec, mu, monitors: Mapping[str, Monitor],
               reward_spec: RewardSpec, goal: Callable[[WorldState], bool] = None,
               steps_limit: int = None) -> OptionResult:
    """
    Execute ``spec`` from ``s`` until it terminates.

    ``monitors`` are the episode-level monitors; they are advanced on every
    post-step valuation and returned, never mutated.  ``goal`` ends the
    segment as an episode success, ``steps_limit`` caps the option below its
    own timeout.
    """
    ctx = option_context(spec, s)
    precondition, verdict = monitor_step(new_monitor(spec.precondition, label=precondition_label(spec)),
                                         valuation(s, 0))
    if verdict == Verdict.VIOLATED or (spec.applicable is not None and not spec.applicable(s)):
        raise PlannerError(f"{spec.id} is not available in the current state")
    own = [precondition] + [new_monitor(f, label=label) for label, f in spec.extra_monitors]
    episode = dict(monitors)
    limit = spec.timeout_steps if steps_limit is None else min(spec.timeout_steps, steps_limit)
    dt = s.dynamics.dt

    segment = []
    outcome = None
    collided = goal_hit = False
    while outcome is None:
        o = observe(s)
        phi = extract_features(o, ctx.target)
        a = low_level_action(spec, phi, s.dynamics)
        cost = inst_cost(o, a, spec.id, reward_spec, ctx.target)
        segment.append(StepRecord(
            t=s.time_step, time=s.time_step * dt, state=s, valuation=o.valuation,
            option=str(spec.id), action=a, inst_cost=cost,
        ))
        s = world_step(s, a, mu)
        y = valuation(s, 0)
        for label in episode:
            episode[label], _ = monitor_step(episode[label], y)
        own = [monitor_step(m, y)[0] for m in own]

        outcome = check_termination(spec, list(episode.values()) + own, s, len(segment), ctx, limit)
        collided = outcome is not None and outcome.kind == Outcome.COLLISION
        goal_hit = goal is not None and goal(s)
        if goal_hit and (outcome is None or outcome.kind in (Outcome.SUCCESS, Outcome.TIMEOUT)):
            outcome = TerminationOutcome(Outcome.SUCCESS, "goal")

    violated = tuple(label for label, m in episode.items() if m.verdict == Verdict.VIOLATED)
    if violated:
        episode_outcome = Outcome.VIOLATION
    elif collided or (outcome.kind == Outcome.VIOLATION and check_collision(s)):
        episode_outcome = Outcome.COLLISION
    elif goal_hit:
        episode_outcome = Outcome.SUCCESS
    else:
        episode_outcome = None

    logger.debug("Option %s ended after %d steps: %s", spec.id, len(segment), outcome)
    return OptionResult(
        segment=tuple(segment),
        outcome=outcome,
        segment_return=-discounted_cost([r.inst_cost for r in segment], reward_spec.gamma),
        state=s,
        monitors=episode,
        episode_outcome=episode_outcome,
        violated=violated,
    )
