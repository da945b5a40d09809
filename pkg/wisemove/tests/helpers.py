from wisemove.dynamics import ContinuousVehicleState, DynamicsParams, VehicleState
from wisemove.world import DiscreteVehicleState, RoadGeometry, Route, Vehicle, WorldState

GEOMETRY = RoadGeometry()


def vehicle(along: float, v: float = 0.0, route: str = Route.HORIZONTAL, lane: int = 0,
            waited: int = -1, stopped: bool = False, entered: bool = None, g: RoadGeometry = GEOMETRY,
            **extra) -> Vehicle:
    """A vehicle centred on its lane at route coordinate ``along``."""
    x, y = g.to_world(route, along, g.lane_center(lane))
    cont = ContinuousVehicleState(X=x, Y=y, theta=g.heading(route), v=v)
    z = DiscreteVehicleState(
        has_stopped_in_stop_region=stopped,
        has_entered_stop_region=stopped or waited >= 0 if entered is None else entered,
        waited=waited,
    )
    return Vehicle(state=VehicleState(cont=cont), route=route, lane=lane, z=z, **extra)


def world(*vehicles, g: RoadGeometry = GEOMETRY, p: DynamicsParams = None, **extra) -> WorldState:
    return WorldState(vehicles=tuple(vehicles), geometry=g, dynamics=p or DynamicsParams(), **extra)
