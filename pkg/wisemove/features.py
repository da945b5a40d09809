"""
Feature extraction for the low-level controllers and the cost function.

Features are computed from the ego observation only, in the ego route frame.
"""
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .world import Observation

DEFAULT_REFERENCE_SPEED = 10.0
NO_VEHICLE_GAP = math.inf


@dataclass(frozen=True)
class FeatureTarget:
    """Option-local context: which centerline to track and at what speed"""
    lane: int
    reference_speed: float = DEFAULT_REFERENCE_SPEED


@dataclass(frozen=True)
class FeatureVector:
    speed_error: float
    lateral_error: float
    heading_error: float
    psi: float
    v: float
    dist_to_stop_region_end: float
    dist_to_intersection: float
    gap_ahead: float
    gap_error: float
    rel_speed_ahead: float
    waited: float
    in_stop_region: float
    in_intersection: float
    has_stopped_in_stop_region: float
    highest_priority: float
    intersection_is_clear: float

    @classmethod
    def names(cls) -> tuple:
        return tuple(f.name for f in fields(cls))

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


def wrap_angle(angle: float) -> float:
    return (angle + math.pi) % (2 * math.pi) - math.pi


def current_lane(o: Observation) -> int:
    g = o.geometry
    _, lat = g.to_route(o.route, o.ego.cont.X, o.ego.cont.Y)
    return g.lane_of(lat)


def _lead_in_lane(o: Observation, lane: int):
    """Nearest vehicle ahead whose center lies inside the lane corridor."""
    g = o.geometry
    ego = o.ego.cont
    ego_s, _ = g.to_route(o.route, ego.X, ego.Y)
    center = g.lane_center(lane)
    best = None
    for alpha in o.alphas:
        other_s, other_lat = g.to_route(o.route, ego.X - alpha.dX, ego.Y - alpha.dY)
        ahead = other_s - ego_s
        if abs(other_lat - center) < g.lane_width / 2 and 0 < ahead <= g.lookahead_dist:
            if best is None or ahead < best[0]:
                best = (ahead, alpha.v)
    return best


def extract_features(o: Observation, target: FeatureTarget) -> FeatureVector:
    g = o.geometry
    ego = o.ego.cont
    along, lat = g.to_route(o.route, ego.X, ego.Y)

    if along < g.stop_line:
        to_box = g.stop_line - along
    elif along <= g.intersection_exit:
        to_box = 0.0
    else:
        to_box = g.intersection_exit - along

    lead = _lead_in_lane(o, target.lane)
    if lead is None:
        gap, gap_error, rel_speed = NO_VEHICLE_GAP, NO_VEHICLE_GAP, 0.0
    else:
        gap = lead[0] - g.veh_len
        gap_error = gap - (g.headway_time * ego.v + g.min_gap)
        rel_speed = lead[1] - ego.v

    y = o.valuation
    return FeatureVector(
        speed_error=target.reference_speed - ego.v,
        lateral_error=lat - g.lane_center(target.lane),
        heading_error=wrap_angle(ego.theta - g.heading(o.route)),
        psi=ego.psi,
        v=ego.v,
        dist_to_stop_region_end=g.stop_line - along,
        dist_to_intersection=to_box,
        gap_ahead=gap,
        gap_error=gap_error,
        rel_speed_ahead=rel_speed,
        waited=float(o.ego_z.waited),
        in_stop_region=float(y["in_stop_region"]),
        in_intersection=float(y["in_intersection"]),
        has_stopped_in_stop_region=float(y["has_stopped_in_stop_region"]),
        highest_priority=float(y["highest_priority"]),
        intersection_is_clear=float(y["intersection_is_clear"]),
    )
