"""
The intersection world: road geometry, propositions, the discrete state
update, the full hybrid step, the ego observation, non-ego behaviour,
collision checks and scenario sampling.

Coordinates: the intersection box is centred on the origin.  Horizontal
route traffic drives towards +X (theta = pi/2), vertical route traffic
drives towards -Y (theta = pi).  Each route has two lanes; lane 0 is the
right-hand lane and lane 1 the left-hand lane for a driver on that route.
Route-local coordinates are (s, lat): s grows along the driving direction
and lat is positive to the driver's left.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from django.db import models

from .dynamics import (
    ContinuousVehicleState,
    ControlInput,
    DynamicsParams,
    VehicleState,
    step_vehicles,
)
from .exceptions import PlacementInfeasibleError

logger = logging.getLogger(__name__)

LOCAL_PROPOSITIONS = (
    "in_stop_region",
    "has_entered_stop_region",
    "has_stopped_in_stop_region",
    "in_intersection",
    "in_goal_region",
    "stopped_now",
    "over_speed_limit",
)
GLOBAL_PROPOSITIONS = (
    "intersection_is_clear",
    "highest_priority",
    "veh_ahead",
    "veh_ahead_too_close",
)
PROPOSITIONS = LOCAL_PROPOSITIONS + GLOBAL_PROPOSITIONS


class Route(models.TextChoices):
    HORIZONTAL = "horizontal", "Horizontal"
    VERTICAL = "vertical", "Vertical"


@dataclass(frozen=True)
class Rect:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def overlaps(self, other: "Rect") -> bool:
        """Positive-area overlap; shared edges do not count."""
        return (self.xmin < other.xmax and other.xmin < self.xmax
                and self.ymin < other.ymax and other.ymin < self.ymax)


@dataclass(frozen=True)
class RoadGeometry:
    lane_width: float = 4.0
    intersection_size: float = 16.0
    stop_region_depth: float = 8.0
    route_length: float = 120.0
    goal_length: float = 10.0
    speed_limit: float = 11.0
    v_stop_eps: float = 0.05
    lookahead_dist: float = 40.0
    headway_time: float = 0.5
    min_gap: float = 2.0
    veh_len: float = 4.5
    veh_wid: float = 1.8

    def __post_init__(self):
        if self.route_length / 2 - self.goal_length <= self.intersection_size / 2:
            raise ValueError("goal region must be disjoint from the intersection")
        if self.route_length / 2 < self.intersection_size / 2 + self.stop_region_depth:
            raise ValueError("routes are too short to hold the stop regions")
        if self.lane_width <= 0 or self.stop_region_depth <= 0 or self.goal_length <= 0:
            raise ValueError("geometry dimensions must be strictly positive")

    # route frames

    @staticmethod
    def heading(route: str) -> float:
        return math.pi / 2 if route == Route.HORIZONTAL else math.pi

    @staticmethod
    def to_route(route: str, x: float, y: float) -> Tuple[float, float]:
        if route == Route.HORIZONTAL:
            return x, y
        return -y, x

    @staticmethod
    def to_world(route: str, s: float, lat: float) -> Tuple[float, float]:
        if route == Route.HORIZONTAL:
            return s, lat
        return lat, -s

    def lane_center(self, lane: int) -> float:
        return -self.lane_width / 2 if lane == 0 else self.lane_width / 2

    @staticmethod
    def lane_of(lat: float) -> int:
        return 0 if lat < 0 else 1

    @property
    def stop_line(self) -> float:
        return -self.intersection_size / 2

    @property
    def intersection_exit(self) -> float:
        return self.intersection_size / 2

    @property
    def route_start(self) -> float:
        return -self.route_length / 2

    @property
    def route_end(self) -> float:
        return self.route_length / 2

    # regions

    @property
    def intersection_box(self) -> Rect:
        half = self.intersection_size / 2
        return Rect(-half, half, -half, half)

    def _route_rect(self, route: str, s_from: float, s_to: float) -> Rect:
        x0, y0 = self.to_world(route, s_from, -self.lane_width)
        x1, y1 = self.to_world(route, s_to, self.lane_width)
        return Rect(min(x0, x1), max(x0, x1), min(y0, y1), max(y0, y1))

    def stop_region(self, route: str) -> Rect:
        return self._route_rect(route, self.stop_line - self.stop_region_depth, self.stop_line)

    @property
    def goal_region(self) -> Rect:
        return self._route_rect(Route.HORIZONTAL, self.route_end - self.goal_length, self.route_end)

    def in_intersection(self, x: float, y: float) -> bool:
        return self.intersection_box.contains(x, y)

    def in_stop_region(self, route: str, x: float, y: float) -> bool:
        return self.stop_region(route).contains(x, y) and not self.in_intersection(x, y)

    def in_goal_region(self, route: str, x: float, y: float) -> bool:
        return route == Route.HORIZONTAL and self.goal_region.contains(x, y)


@dataclass(frozen=True)
class DiscreteVehicleState:
    has_stopped_in_stop_region: bool = False
    has_entered_stop_region: bool = False
    waited: int = -1


@dataclass(frozen=True)
class Vehicle:
    state: VehicleState
    route: str = Route.HORIZONTAL
    lane: int = 0
    z: DiscreteVehicleState = field(default_factory=DiscreteVehicleState)
    desired_speed: float = 0.0
    runs_stop: bool = False

    @property
    def cont(self) -> ContinuousVehicleState:
        return self.state.cont


@dataclass(frozen=True)
class WorldState:
    vehicles: Tuple[Vehicle, ...]
    geometry: RoadGeometry = field(default_factory=RoadGeometry)
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    time_step: int = 0
    priority_holder: Optional[int] = None

    def __post_init__(self):
        if not self.vehicles:
            raise ValueError("a world needs at least the ego vehicle")

    @property
    def ego(self) -> Vehicle:
        return self.vehicles[0]


@dataclass(frozen=True)
class NonEgoParams:
    """Rule-based driver parameters for non-ego vehicles"""
    k_v: float = 0.5
    k_gap: float = 0.5
    k_rel: float = 1.0
    stop_margin: float = 1.5
    stop_tolerance: float = 0.25
    brake_trigger: float = 2.0


@dataclass(frozen=True)
class ScenarioConfig:
    max_non_ego: int = 6
    seed: int = 0
    p_run_stop: float = 0.1
    desired_speed_min: float = 6.0
    desired_speed_max: float = 11.0
    min_spawn_gap: float = 15.0
    max_spawn_retries: int = 100
    geometry: RoadGeometry = field(default_factory=RoadGeometry)
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    non_ego: NonEgoParams = field(default_factory=NonEgoParams)

    def __post_init__(self):
        if not 0 <= self.max_non_ego <= 6:
            raise ValueError("max_non_ego must lie in [0, 6]")


@dataclass(frozen=True)
class Alpha:
    dX: float
    dY: float
    v: float
    accel_prev: float
    waited: int


@dataclass(frozen=True)
class Observation:
    ego: VehicleState
    ego_z: DiscreteVehicleState
    route: str
    valuation: Dict[str, bool]
    alphas: Tuple[Alpha, ...]
    geometry: RoadGeometry
    dynamics: DynamicsParams


# --- propositions -----------------------------------------------------------

def eval_local_props(veh: VehicleState, z: DiscreteVehicleState, g: RoadGeometry,
                     route: str = Route.HORIZONTAL) -> Dict[str, bool]:
    x, y, v = veh.cont.X, veh.cont.Y, veh.cont.v
    return {
        "in_stop_region": g.in_stop_region(route, x, y),
        "has_entered_stop_region": z.has_entered_stop_region,
        "has_stopped_in_stop_region": z.has_stopped_in_stop_region,
        "in_intersection": g.in_intersection(x, y),
        "in_goal_region": g.in_goal_region(route, x, y),
        "stopped_now": v < g.v_stop_eps,
        "over_speed_limit": v > g.speed_limit,
    }


def lead_vehicle(s: WorldState, i: int) -> Optional[Tuple[int, float, float]]:
    """Nearest vehicle ahead in the same route and lane: (index, bumper gap, relative speed)."""
    g = s.geometry
    me = s.vehicles[i]
    my_s, my_lat = g.to_route(me.route, me.cont.X, me.cont.Y)
    my_lane = g.lane_of(my_lat)
    best = None
    for j, other in enumerate(s.vehicles):
        if j == i or other.route != me.route:
            continue
        other_s, other_lat = g.to_route(other.route, other.cont.X, other.cont.Y)
        if g.lane_of(other_lat) != my_lane:
            continue
        ahead = other_s - my_s
        if 0 < ahead <= g.lookahead_dist and (best is None or ahead < best[1]):
            best = (j, ahead)
    if best is None:
        return None
    j, ahead = best
    return j, ahead - g.veh_len, s.vehicles[j].cont.v - me.cont.v


def _cleared_intersection(s: WorldState, i: int) -> bool:
    g = s.geometry
    veh = s.vehicles[i]
    along, _ = g.to_route(veh.route, veh.cont.X, veh.cont.Y)
    return along > g.intersection_exit + g.veh_len / 2


def priority_holder(s: WorldState) -> Optional[int]:
    """
    Vehicle holding the right of way.  A holder keeps it until its rear
    bumper has left the intersection; otherwise the waiting vehicle with the
    strictly greatest ``waited`` gets it, ties going to the lowest index.
    """
    holder = s.priority_holder
    if holder is not None and holder < len(s.vehicles) and not _cleared_intersection(s, holder):
        return holder
    best = None
    for i, veh in enumerate(s.vehicles):
        if veh.z.waited >= 0 and (best is None or veh.z.waited > s.vehicles[best].z.waited):
            best = i
    return best


def eval_global_props(s: WorldState, i: int) -> Dict[str, bool]:
    if not 0 <= i < len(s.vehicles):
        raise IndexError(f"vehicle index {i} out of range")
    g = s.geometry
    clear = not any(
        g.in_intersection(other.cont.X, other.cont.Y)
        for j, other in enumerate(s.vehicles) if j != i
    )
    lead = lead_vehicle(s, i)
    too_close = lead is not None and lead[1] < g.headway_time * s.vehicles[i].cont.v + g.min_gap
    return {
        "intersection_is_clear": clear,
        "highest_priority": priority_holder(s) == i,
        "veh_ahead": lead is not None,
        "veh_ahead_too_close": too_close,
    }


def valuation(s: WorldState, i: int = 0) -> Dict[str, bool]:
    veh = s.vehicles[i]
    props = eval_local_props(veh.state, veh.z, s.geometry, veh.route)
    props.update(eval_global_props(s, i))
    return props


def update_discrete(z: DiscreteVehicleState, local: Dict[str, bool]) -> DiscreteVehicleState:
    inside = local["in_stop_region"]
    return DiscreteVehicleState(
        has_stopped_in_stop_region=z.has_stopped_in_stop_region or (inside and local["stopped_now"]),
        has_entered_stop_region=z.has_entered_stop_region or inside,
        waited=z.waited + 1 if inside else -1,
    )


# --- non-ego behaviour ------------------------------------------------------

def non_ego_action(s: WorldState, i: int, params: NonEgoParams) -> ControlInput:
    if i == 0:
        raise ValueError("the ego vehicle is not driven by the non-ego policy")
    g, dt = s.geometry, s.dynamics.dt
    veh = s.vehicles[i]
    v = veh.cont.v
    along, _ = g.to_route(veh.route, veh.cont.X, veh.cont.Y)
    accel = params.k_v * (veh.desired_speed - v)

    if not veh.runs_stop and along < g.stop_line:
        if not veh.z.has_stopped_in_stop_region:
            remaining = g.stop_line - params.stop_margin - along
            if remaining <= params.stop_tolerance:
                accel = -v / dt
            else:
                needed = v * v / (2 * remaining)
                # inside the stop region a compliant vehicle only slows down
                if needed >= params.brake_trigger or g.in_stop_region(veh.route, veh.cont.X, veh.cont.Y):
                    accel = -needed
        else:
            props = eval_global_props(s, i)
            if not (props["highest_priority"] and props["intersection_is_clear"]):
                accel = -v / dt

    lead = lead_vehicle(s, i)
    if lead is not None:
        _, gap, rel_speed = lead
        desired_gap = g.headway_time * v + g.min_gap
        accel = min(accel, params.k_gap * (gap - desired_gap) + params.k_rel * rel_speed)

    return ControlInput(accel=max(accel, -v / dt), steer_rate=0.0)


class NonEgoPolicy:
    """The mu of the hybrid step: one rule-based input per non-ego vehicle"""

    def __init__(self, params: NonEgoParams = None):
        self.params = params or NonEgoParams()

    def __call__(self, s: WorldState, i: int) -> ControlInput:
        return non_ego_action(s, i, self.params)


# --- hybrid step and observation --------------------------------------------

def world_step(s: WorldState, a: ControlInput, mu: Callable[[WorldState, int], ControlInput]) -> WorldState:
    inputs = [a] + [mu(s, i) for i in range(1, len(s.vehicles))]
    stepped = step_vehicles([veh.state for veh in s.vehicles], inputs, s.dynamics)
    g = s.geometry
    vehicles = []
    for veh, new_state in zip(s.vehicles, stepped):
        local = eval_local_props(new_state, veh.z, g, veh.route)
        _, lat = g.to_route(veh.route, new_state.cont.X, new_state.cont.Y)
        vehicles.append(replace(
            veh, state=new_state, z=update_discrete(veh.z, local), lane=g.lane_of(lat),
        ))
    stepped_world = replace(s, vehicles=tuple(vehicles), time_step=s.time_step + 1)
    return replace(stepped_world, priority_holder=priority_holder(stepped_world))


def observe(s: WorldState) -> Observation:
    ego = s.ego
    alphas = tuple(
        Alpha(
            dX=ego.cont.X - other.cont.X,
            dY=ego.cont.Y - other.cont.Y,
            v=other.cont.v,
            accel_prev=other.state.u_prev.accel,
            waited=other.z.waited,
        )
        for other in s.vehicles[1:]
    )
    return Observation(
        ego=ego.state,
        ego_z=ego.z,
        route=ego.route,
        valuation=valuation(s, 0),
        alphas=alphas,
        geometry=s.geometry,
        dynamics=s.dynamics,
    )


# --- collision --------------------------------------------------------------

def footprint(cont: ContinuousVehicleState, g: RoadGeometry) -> np.ndarray:
    """Corners of the oriented bounding rectangle, in order around the box."""
    forward = np.array([math.sin(cont.theta), math.cos(cont.theta)]) * (g.veh_len / 2)
    left = np.array([-math.cos(cont.theta), math.sin(cont.theta)]) * (g.veh_wid / 2)
    center = np.array([cont.X, cont.Y])
    return np.array([
        center + forward + left,
        center + forward - left,
        center - forward - left,
        center - forward + left,
    ])


def boxes_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    """Separating-axis test for two rectangles; touching counts as overlap."""
    axes = (a[1] - a[0], a[2] - a[1], b[1] - b[0], b[2] - b[1])
    for axis in axes:
        proj_a = a @ axis
        proj_b = b @ axis
        if proj_a.max() < proj_b.min() or proj_b.max() < proj_a.min():
            return False
    return True


def vehicles_collide(first: ContinuousVehicleState, second: ContinuousVehicleState, g: RoadGeometry) -> bool:
    reach = math.hypot(g.veh_len, g.veh_wid)
    if math.hypot(first.X - second.X, first.Y - second.Y) > reach:
        return False
    return boxes_overlap(footprint(first, g), footprint(second, g))


def check_collision(s: WorldState) -> bool:
    ego = s.ego.cont
    return any(vehicles_collide(ego, other.cont, s.geometry) for other in s.vehicles[1:])


# --- scenario sampling ------------------------------------------------------

def _make_vehicle(g: RoadGeometry, route: str, lane: int, along: float, speed: float, **extra) -> Vehicle:
    x, y = g.to_world(route, along, g.lane_center(lane))
    cont = ContinuousVehicleState(X=x, Y=y, theta=g.heading(route), v=speed, psi=0.0)
    return Vehicle(state=VehicleState(cont=cont), route=route, lane=lane, **extra)


def _placement_ok(candidate: Vehicle, placed, cfg: ScenarioConfig) -> bool:
    g = cfg.geometry
    if g.in_stop_region(candidate.route, candidate.cont.X, candidate.cont.Y):
        return False
    cand_s, _ = g.to_route(candidate.route, candidate.cont.X, candidate.cont.Y)
    for other in placed:
        if other.route == candidate.route and other.lane == candidate.lane:
            other_s, _ = g.to_route(other.route, other.cont.X, other.cont.Y)
            if abs(other_s - cand_s) < cfg.min_spawn_gap:
                return False
        if vehicles_collide(candidate.cont, other.cont, g):
            return False
    return True


def sample_initial_state(cfg: ScenarioConfig, rng: np.random.Generator) -> WorldState:
    g = cfg.geometry
    routes = (Route.HORIZONTAL, Route.VERTICAL)
    ego = _make_vehicle(
        g,
        Route.HORIZONTAL,
        int(rng.integers(2)),
        float(rng.uniform(g.route_start + 5, g.route_start + 15)),
        float(rng.uniform(0, g.speed_limit)),
    )
    placed = [ego]
    count = int(rng.integers(0, cfg.max_non_ego + 1))
    for n in range(count):
        for _ in range(cfg.max_spawn_retries):
            candidate = _make_vehicle(
                g,
                routes[int(rng.integers(2))],
                int(rng.integers(2)),
                float(rng.uniform(g.route_start + 5, g.route_end - 15)),
                float(rng.uniform(0, g.speed_limit)),
                desired_speed=float(rng.uniform(cfg.desired_speed_min, cfg.desired_speed_max)),
                runs_stop=bool(rng.random() < cfg.p_run_stop),
            )
            if _placement_ok(candidate, placed, cfg):
                placed.append(candidate)
                break
        else:
            logger.warning("Could not place non-ego vehicle %d after %d attempts", n + 1, cfg.max_spawn_retries)
            raise PlacementInfeasibleError(
                f"could not place non-ego vehicle {n + 1} of {count} within {cfg.max_spawn_retries} attempts"
            )
    return WorldState(vehicles=tuple(placed), geometry=g, dynamics=cfg.dynamics)
