"""
Lumped-capacity switch thermal model.

Each switch k carries an ambient (inlet) temperature driven by the room
temperature, rack load and HVAC cooling, and an internal temperature driven
by the ambient temperature and the switch's own utilization. Both are
integrated with explicit Euler steps.

Two forms of the internal equation are available:

* ``first_order_corrected`` (default) relaxes toward
  tau_amb + psi_idle + phi_sw * U.
* ``literal`` integrates (tau_amb + psi_idle - U)/lambda_sw + phi_sw * U,
  which has no relaxation term and therefore no bounded fixed point. It is
  kept for audits only.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_GAIN_SCALE = 0.01
NOMINAL_ENV_C = 22.0
NOMINAL_RACK_LOAD = 0.5
NOMINAL_HVAC = 1.0

ArrayLike = Union[float, np.ndarray]


class ThermalStepError(ValueError):
    """Raised when an Euler step size violates dt <= lambda/10."""


class UnknownSwitchError(KeyError):
    """Raised when a cooling command names a switch the model does not track."""


class ThermalMode(str, Enum):
    LITERAL = "literal"
    FIRST_ORDER_CORRECTED = "first_order_corrected"


@dataclass(frozen=True)
class ThermalParams:
    lambda_ambient: float
    lambda_sw: float
    kappa_rack: float
    kappa_cool: float
    psi_idle: float
    phi_sw: float
    gain_scale: float = DEFAULT_GAIN_SCALE

    def __post_init__(self):
        if not self.lambda_ambient > 0:
            raise ValueError(f"lambda_ambient must be > 0, got {self.lambda_ambient}")
        if not self.lambda_sw > 0:
            raise ValueError(f"lambda_sw must be > 0, got {self.lambda_sw}")
        if self.psi_idle < 0:
            raise ValueError(f"psi_idle must be >= 0, got {self.psi_idle}")
        if self.phi_sw < 0:
            raise ValueError(f"phi_sw must be >= 0, got {self.phi_sw}")
        if not self.gain_scale > 0:
            raise ValueError(f"gain_scale must be > 0, got {self.gain_scale}")

    @property
    def max_dt(self) -> float:
        return min(self.lambda_ambient, self.lambda_sw) / 10.0

    def to_dict(self) -> Dict[str, float]:
        return {'lambda_ambient': self.lambda_ambient, 'lambda_sw': self.lambda_sw,
                'kappa_rack': self.kappa_rack, 'kappa_cool': self.kappa_cool,
                'psi_idle': self.psi_idle, 'phi_sw': self.phi_sw,
                'gain_scale': self.gain_scale}


@dataclass
class ThermalState:
    """Per-switch temperatures and exogenous inputs, arrays aligned with switch_ids."""
    switch_ids: Tuple[str, ...]
    tau_ambient: np.ndarray
    tau_internal: np.ndarray
    tau_env: np.ndarray
    p_rack: np.ndarray
    c_hvac: np.ndarray

    def __post_init__(self):
        n = len(self.switch_ids)
        for name in ('tau_ambient', 'tau_internal', 'tau_env', 'p_rack', 'c_hvac'):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.ndim == 0:
                value = np.full(n, float(value))
            if value.shape != (n,):
                raise ValueError(f"{name} has shape {value.shape}, expected ({n},)")
            setattr(self, name, value)
        if np.any(self.c_hvac < 0) or np.any(self.c_hvac > 1):
            raise ValueError("C_hvac must lie in [0, 1]")
        if np.any(self.p_rack < 0) or np.any(self.p_rack > 1):
            raise ValueError("P_rack must lie in [0, 1]")

    @classmethod
    def at_steady_state(cls, switch_ids: Sequence[str], params: ThermalParams,
                        tau_env: float = NOMINAL_ENV_C, p_rack: float = NOMINAL_RACK_LOAD,
                        c_hvac: float = NOMINAL_HVAC,
                        utilization: ArrayLike = 0.0) -> 'ThermalState':
        n = len(switch_ids)
        u = np.clip(np.broadcast_to(np.asarray(utilization, dtype=float), (n,)), 0.0, 1.0)
        amb, internal = steady_state(params, tau_env, p_rack, c_hvac, u)
        return cls(tuple(switch_ids), np.full(n, float(amb)), np.asarray(internal, dtype=float),
                   np.full(n, tau_env), np.full(n, p_rack), np.full(n, c_hvac))

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.tau_ambient)) and np.all(np.isfinite(self.tau_internal)))

    def index_of(self, switch_id: str) -> int:
        try:
            return self.switch_ids.index(switch_id)
        except ValueError:
            raise UnknownSwitchError(switch_id) from None

    def copy(self) -> 'ThermalState':
        return ThermalState(self.switch_ids, self.tau_ambient.copy(), self.tau_internal.copy(),
                            self.tau_env.copy(), self.p_rack.copy(), self.c_hvac.copy())


def _check_dt(dt: float, lam: float, what: str) -> None:
    if not dt > 0 or dt > lam / 10.0:
        raise ThermalStepError(f"{what} step dt={dt} outside (0, {lam / 10.0}] (lambda={lam})")


def step_ambient(state: ThermalState, params: ThermalParams, dt: float) -> np.ndarray:
    """One Euler step of the ambient (inlet) temperature; returns the new array."""
    _check_dt(dt, params.lambda_ambient, "Ambient")
    drive = params.gain_scale * (params.kappa_rack * state.p_rack - params.kappa_cool * state.c_hvac)
    derivative = (state.tau_env - state.tau_ambient) / params.lambda_ambient + drive
    return state.tau_ambient + dt * derivative


def clamp_utilization(utilization: ArrayLike, n: int) -> np.ndarray:
    u = np.broadcast_to(np.asarray(utilization, dtype=float), (n,))
    if np.any(u < 0) or np.any(u > 1):
        logger.warning(f"Switch utilization outside [0,1] (min {u.min():.3f}, max {u.max():.3f}); clamped")
        u = np.clip(u, 0.0, 1.0)
    return u


def step_internal(state: ThermalState, params: ThermalParams, utilization: ArrayLike, dt: float,
                  mode: ThermalMode = ThermalMode.FIRST_ORDER_CORRECTED) -> np.ndarray:
    """One Euler step of the internal temperature; returns the new array."""
    _check_dt(dt, params.lambda_sw, "Internal")
    u = clamp_utilization(utilization, len(state.switch_ids))
    mode = ThermalMode(mode)
    if mode is ThermalMode.LITERAL:
        derivative = (state.tau_ambient + params.psi_idle - u) / params.lambda_sw + params.phi_sw * u
    else:
        target = state.tau_ambient + params.psi_idle + params.phi_sw * u
        derivative = (target - state.tau_internal) / params.lambda_sw
    return state.tau_internal + dt * derivative


def advance(state: ThermalState, params: ThermalParams, utilization: ArrayLike, dt: float,
            mode: ThermalMode = ThermalMode.FIRST_ORDER_CORRECTED) -> ThermalState:
    """Advance both temperatures by dt from the same starting state."""
    amb = step_ambient(state, params, dt)
    internal = step_internal(state, params, utilization, dt, mode)
    return replace(state, tau_ambient=amb, tau_internal=internal)


def steady_state(params: ThermalParams, tau_env: ArrayLike, p_rack: ArrayLike,
                 c_hvac: ArrayLike, utilization: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """Analytic fixed point (tau_amb*, tau_int*) of the corrected model."""
    amb = tau_env + params.lambda_ambient * params.gain_scale * (
        params.kappa_rack * p_rack - params.kappa_cool * c_hvac)
    internal = amb + params.psi_idle + params.phi_sw * utilization
    return amb, internal


def apply_cooling(state: ThermalState, switches: Iterable[str], level: float) -> ThermalState:
    """
    Set C_hvac for the given switches; takes effect on the next step.

    Raises:
        ValueError: If level is outside [0, 1]
        UnknownSwitchError: If a switch id is not part of the state
    """
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"Cooling level must lie in [0, 1], got {level}")
    indices = [state.index_of(s) for s in switches]
    if not indices:
        return state
    c_hvac = state.c_hvac.copy()
    c_hvac[indices] = level
    return replace(state, c_hvac=c_hvac)


def set_exogenous(state: ThermalState, tau_env: Optional[float] = None, p_rack: Optional[float] = None,
                  c_hvac: Optional[float] = None) -> ThermalState:
    """Replace room temperature, rack load or cooling level for every switch."""
    n = len(state.switch_ids)
    return replace(
        state,
        tau_env=state.tau_env if tau_env is None else np.full(n, float(tau_env)),
        p_rack=state.p_rack if p_rack is None else np.full(n, float(p_rack)),
        c_hvac=state.c_hvac if c_hvac is None else np.full(n, float(c_hvac)),
    )
