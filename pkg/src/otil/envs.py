"""
Classic-control environments with adjustable lengths and masses.

CartPole (cart-pole balancing, Barto-Sutton-Anderson dynamics):

    temp   = (F + m_p l phi_dot^2 sin phi) / (m_c + m_p)
    phi_dd = (g sin phi - cos phi temp) / (l (4/3 - m_p cos^2 phi / (m_c + m_p)))
    x_dd   = temp - m_p l phi_dd cos phi / (m_c + m_p)

with l the pole half-length, integrated by semi-implicit Euler (velocities
first, positions from the new velocities). Actions {0, 1} push with -F, +F.
Reward is 1 for every step taken; the episode ends when |x| > 2.4,
|phi| > 12 degrees or the step budget is used up.

Pendulum (torque-limited swing-up, phi = 0 upright):

    phi_dot' = phi_dot + (3 g / (2 l) sin phi + 3 u / (m l^2)) dt
    phi'     = phi + phi_dot' dt

phi_dot' is then clipped to +-max_speed and phi' wrapped into [-pi, pi].
Reward is -(phi^2 + 0.1 phi_dot^2 + 0.001 u^2) evaluated before the step.
The torque is one of ``torque_bins`` evenly spaced values in [-2, 2].
The observation is (cos phi, sin phi, phi_dot).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Union

import numpy as np


@dataclass(frozen=True)
class CartPoleParams:
    gravity: float = 9.8
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    pole_half_length: float = 0.5
    force_magnitude: float = 10.0
    timestep: float = 0.02
    position_limit: float = 2.4
    angle_limit: float = 12 * 2 * math.pi / 360
    max_steps: int = 200

    name = "CartPole"
    obs_dim = 4
    n_actions = 2

    def __post_init__(self):
        if min(self.cart_mass, self.pole_mass, self.pole_half_length) <= 0:
            raise ValueError("masses and pole length must be strictly positive")
        if self.timestep <= 0 or self.max_steps < 1:
            raise ValueError("timestep and max_steps must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PendulumParams:
    gravity: float = 10.0
    mass: float = 1.0
    length: float = 1.0
    timestep: float = 0.05
    max_torque: float = 2.0
    max_speed: float = 8.0
    torque_bins: int = 5
    max_steps: int = 200

    name = "Pendulum"
    obs_dim = 3

    def __post_init__(self):
        if self.mass <= 0 or self.length <= 0:
            raise ValueError("mass and length must be strictly positive")
        if self.torque_bins < 2:
            raise ValueError("torque_bins must be >= 2")
        if self.timestep <= 0 or self.max_steps < 1:
            raise ValueError("timestep and max_steps must be positive")

    @property
    def n_actions(self) -> int:
        return self.torque_bins

    def torque(self, action: int) -> float:
        return -self.max_torque + 2 * self.max_torque * action / (self.torque_bins - 1)

    def to_dict(self) -> dict:
        return asdict(self)


EnvParams = Union[CartPoleParams, PendulumParams]


class CartPoleState(NamedTuple):
    x: float
    x_dot: float
    theta: float
    theta_dot: float
    t: int = 0


class PendulumState(NamedTuple):
    theta: float
    theta_dot: float
    t: int = 0


EnvState = Union[CartPoleState, PendulumState]


def params_from_dict(name: str, values: dict) -> EnvParams:
    cls = {"CartPole": CartPoleParams, "Pendulum": PendulumParams}.get(name)
    if cls is None:
        raise ValueError(f"unknown environment {name!r}")
    return cls(**values)


def reset(params: EnvParams, seed) -> EnvState:
    """Initial state drawn from ``seed`` (an int or a numpy Generator)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if isinstance(params, CartPoleParams):
        x, xd, th, thd = rng.uniform(-0.05, 0.05, size=4)
        return CartPoleState(float(x), float(xd), float(th), float(thd), 0)
    th = rng.uniform(-math.pi, math.pi)
    thd = rng.uniform(-1.0, 1.0)
    return PendulumState(float(th), float(thd), 0)


def _cartpole_failed(s: CartPoleState, p: CartPoleParams) -> bool:
    return s.x < -p.position_limit or s.x > p.position_limit or s.theta < -p.angle_limit or s.theta > p.angle_limit


def _step_cartpole(s: CartPoleState, action: int, p: CartPoleParams):
    if action not in (0, 1):
        raise ValueError(f"invalid CartPole action {action!r}")
    force = p.force_magnitude if action == 1 else -p.force_magnitude
    cos_th = math.cos(s.theta)
    sin_th = math.sin(s.theta)
    total_mass = p.cart_mass + p.pole_mass
    pm_l = p.pole_mass * p.pole_half_length
    temp = (force + pm_l * s.theta_dot**2 * sin_th) / total_mass
    theta_acc = (p.gravity * sin_th - cos_th * temp) / (
        p.pole_half_length * (4.0 / 3.0 - p.pole_mass * cos_th**2 / total_mass)
    )
    x_acc = temp - pm_l * theta_acc * cos_th / total_mass
    tau = p.timestep
    x_dot = s.x_dot + tau * x_acc
    x = s.x + tau * x_dot
    theta_dot = s.theta_dot + tau * theta_acc
    theta = s.theta + tau * theta_dot
    nxt = CartPoleState(x, x_dot, theta, theta_dot, s.t + 1)
    terminated = _cartpole_failed(nxt, p) or nxt.t >= p.max_steps
    return nxt, 1.0, terminated


def wrap_angle(a: float) -> float:
    return ((a + math.pi) % (2 * math.pi)) - math.pi


def _step_pendulum(s: PendulumState, action: int, p: PendulumParams):
    if not (isinstance(action, (int, np.integer)) and 0 <= action < p.torque_bins):
        raise ValueError(f"invalid Pendulum action {action!r}")
    u = p.torque(int(action))
    reward = -(s.theta**2 + 0.1 * s.theta_dot**2 + 0.001 * u**2)
    theta_dot = s.theta_dot + (
        3 * p.gravity / (2 * p.length) * math.sin(s.theta) + 3.0 / (p.mass * p.length**2) * u
    ) * p.timestep
    theta = s.theta + theta_dot * p.timestep
    theta_dot = min(max(theta_dot, -p.max_speed), p.max_speed)
    if not -math.pi <= theta <= math.pi:
        theta = wrap_angle(theta)
    nxt = PendulumState(theta, theta_dot, s.t + 1)
    return nxt, reward, nxt.t >= p.max_steps


def step(state: EnvState, action: int, params: EnvParams) -> tuple[EnvState, float, bool]:
    """Advance one step; returns (next state, true reward, terminated)."""
    if isinstance(params, CartPoleParams):
        return _step_cartpole(state, action, params)
    return _step_pendulum(state, action, params)


def failed(state: EnvState, params: EnvParams) -> bool:
    """True when the episode ended by failure rather than by the step budget."""
    if isinstance(params, CartPoleParams):
        return _cartpole_failed(state, params)
    return False


def state_vector(state: EnvState) -> np.ndarray:
    if isinstance(state, CartPoleState):
        return np.array([state.x, state.x_dot, state.theta, state.theta_dot])
    return np.array([math.cos(state.theta), math.sin(state.theta), state.theta_dot])
