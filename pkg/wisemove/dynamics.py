"""
Per-vehicle continuous dynamics.

State vector layout is ``[X, Y, theta, v, psi]`` and input layout is
``[accel, steer_rate]``.  Heading follows the convention theta = 0 points
along +Y (X' = v sin theta, Y' = v cos theta).
"""
from dataclasses import dataclass

import numpy as np
from django.db import models


class BicycleVariant(models.TextChoices):
    SCALED_ANGLE = "scaled_angle", "v * tan(psi / L)"
    STANDARD = "standard", "(v / L) * tan(psi)"


# alternative spellings accepted for bicycle_variant
VARIANT_ALIASES = {"paper": BicycleVariant.SCALED_ANGLE}


@dataclass(frozen=True)
class DynamicsParams:
    wheel_base: float = 2.7
    a_max: float = 3.0
    rho_max: float = 0.5
    psi_max: float = 0.5
    dt: float = 0.1
    bicycle_variant: str = BicycleVariant.SCALED_ANGLE

    def __post_init__(self):
        for name in ("wheel_base", "a_max", "rho_max", "psi_max", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.bicycle_variant in VARIANT_ALIASES:
            object.__setattr__(self, "bicycle_variant", VARIANT_ALIASES[self.bicycle_variant])
        if self.bicycle_variant not in BicycleVariant.values:
            raise ValueError(f"Unknown bicycle variant: {self.bicycle_variant}")


@dataclass(frozen=True)
class ContinuousVehicleState:
    X: float = 0.0
    Y: float = 0.0
    theta: float = 0.0
    v: float = 0.0
    psi: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.X, self.Y, self.theta, self.v, self.psi], dtype=float)

    @classmethod
    def from_array(cls, values) -> "ContinuousVehicleState":
        return cls(*(float(x) for x in values))


@dataclass(frozen=True)
class ControlInput:
    accel: float = 0.0
    steer_rate: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.accel, self.steer_rate], dtype=float)


ZERO_INPUT = ControlInput()


@dataclass(frozen=True)
class VehicleState:
    cont: ContinuousVehicleState
    u_prev: ControlInput = ZERO_INPUT


def clamp_input(u: ControlInput, s: ContinuousVehicleState, p: DynamicsParams) -> ControlInput:
    # braking stops at v = 0 within the step instead of reversing
    accel = float(np.clip(max(u.accel, -max(s.v, 0.0) / p.dt), -p.a_max, p.a_max))
    rate = float(np.clip(u.steer_rate, -p.rho_max, p.rho_max))
    # keep psi inside its bound after one Euler step
    lower = (-p.psi_max - s.psi) / p.dt
    upper = (p.psi_max - s.psi) / p.dt
    rate = min(max(rate, lower), upper)
    return ControlInput(accel=accel, steer_rate=rate)


def derivatives(states: np.ndarray, inputs: np.ndarray, p: DynamicsParams) -> np.ndarray:
    """Right-hand side of the ODE for a batch of shape (n, 5)"""
    theta = states[:, 2]
    v = states[:, 3]
    psi = states[:, 4]
    if p.bicycle_variant == BicycleVariant.STANDARD:
        yaw_rate = v / p.wheel_base * np.tan(psi)
    else:
        yaw_rate = v * np.tan(psi / p.wheel_base)
    return np.stack(
        [v * np.sin(theta), v * np.cos(theta), yaw_rate, inputs[:, 0], inputs[:, 1]],
        axis=1,
    )


def rk4_step(states: np.ndarray, inputs: np.ndarray, p: DynamicsParams, dt: float = None) -> np.ndarray:
    """One fixed-step RK4 update of a batch of vehicles, psi re-clamped afterwards."""
    h = p.dt if dt is None else dt
    k1 = derivatives(states, inputs, p)
    k2 = derivatives(states + h / 2 * k1, inputs, p)
    k3 = derivatives(states + h / 2 * k2, inputs, p)
    k4 = derivatives(states + h * k3, inputs, p)
    new_states = states + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    new_states[:, 4] = np.clip(new_states[:, 4], -p.psi_max, p.psi_max)
    return new_states


def integrate(s: ContinuousVehicleState, u: ControlInput, p: DynamicsParams) -> ContinuousVehicleState:
    result = rk4_step(s.as_array()[np.newaxis, :], u.as_array()[np.newaxis, :], p)
    return ContinuousVehicleState.from_array(result[0])


def step_vehicles(vehicles, inputs, p: DynamicsParams) -> list:
    """Advance several vehicles at once; returns VehicleStates with the applied inputs."""
    applied = [clamp_input(u, x.cont, p) for x, u in zip(vehicles, inputs)]
    if not applied:
        return []
    states = np.array([x.cont.as_array() for x in vehicles])
    controls = np.array([u.as_array() for u in applied])
    result = rk4_step(states, controls, p)
    return [
        VehicleState(cont=ContinuousVehicleState.from_array(row), u_prev=u)
        for row, u in zip(result, applied)
    ]


def step_vehicle(x: VehicleState, u: ControlInput, p: DynamicsParams) -> VehicleState:
    return step_vehicles([x], [u], p)[0]


def jerk_estimate(u: ControlInput, u_prev: ControlInput, dt: float) -> float:
    return (u.accel - u_prev.accel) / dt
