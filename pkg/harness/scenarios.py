#!/usr/bin/env python3
"""
TC1-TC9 Scenario Presets
========================

Frozen stress scenarios for the substation network: per-scenario thermal
parameters, room temperature regime, degraded cooling level, rack load and
flash-event calibration, plus construction of a ready-to-run simulator.

Features:
- Thermal parameter rows (lambda, kappa, psi, phi) per scenario
- Regime labels for ambient temperature, utilization and latency
- Flash event at disruption onset (20% of the run) plus Poisson arrivals
- JSON-compatible round trip
- Scenario list parsing ("TC1..TC9", "TC5,TC7", "TC5..TC9,TC1")

Usage:
    from harness.scenarios import load_scenario, build_simulator

    scenario = load_scenario("TC5")
    sim = build_simulator(graph, flows, scenario, seed=23, duration=60.0)
"""

import logging
import re
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from netsim.actuation import ActuationSettings
from netsim.knowledge import QoSIntents
from netsim.simulator import DisruptionPlan, NetworkSimulator, SimulationSettings
from netsim.thermal import ThermalParams
from netsim.topology import NetworkGraph
from netsim.traffic import FlashEventConfig, FlowSpec

logger = logging.getLogger(__name__)

DEFAULT_DURATION_S = 600.0
DEFAULT_ONSET_FRACTION = 0.2
DEFAULT_EVAL_SEEDS = (23, 37, 49, 71, 42)
FLASH_DURATION_S = 10.0

AMBIENT_REGIME_ENV_C = {
    '[18,27]': 22.0,
    '<<18': 8.0,
    '>>27': 36.0,
}

UTILIZATION_REGIME_TARGET = {
    '<<80%': 0.5,
    '~80%': 0.82,
    '>=80%': 0.9,
    '>>80%': 1.1,
    '>>90%': 1.3,
}


class UnknownScenarioError(KeyError):
    """Raised for scenario ids outside TC1..TC9."""


@dataclass(frozen=True)
class ScenarioConfig:
    id: str
    thermal: ThermalParams
    ambient_regime: str
    internal_band: Tuple[float, float]
    utilization_regime: str
    latency_regime: str
    tau_env: float
    hvac_level: float
    rack_load: float
    flash: FlashEventConfig
    duration: float = DEFAULT_DURATION_S
    onset_fraction: float = DEFAULT_ONSET_FRACTION
    seeds: Tuple[int, ...] = DEFAULT_EVAL_SEEDS

    @property
    def target_peak_utilization(self) -> Optional[float]:
        return self.flash.target_utilization

    def onset(self, duration: Optional[float] = None) -> float:
        return self.onset_fraction * (self.duration if duration is None else duration)

    def to_dict(self) -> Dict:
        return {
            'id': self.id,
            'thermal': self.thermal.to_dict(),
            'ambient_regime': self.ambient_regime,
            'internal_band': list(self.internal_band),
            'utilization_regime': self.utilization_regime,
            'latency_regime': self.latency_regime,
            'tau_env': self.tau_env,
            'hvac_level': self.hvac_level,
            'rack_load': self.rack_load,
            'flash': self.flash.to_dict(),
            'duration': self.duration,
            'onset_fraction': self.onset_fraction,
            'seeds': list(self.seeds),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> 'ScenarioConfig':
        return cls(
            id=data['id'],
            thermal=ThermalParams(**data['thermal']),
            ambient_regime=data['ambient_regime'],
            internal_band=tuple(data['internal_band']),
            utilization_regime=data['utilization_regime'],
            latency_regime=data['latency_regime'],
            tau_env=float(data['tau_env']),
            hvac_level=float(data['hvac_level']),
            rack_load=float(data['rack_load']),
            flash=FlashEventConfig.from_dict(data['flash']),
            duration=float(data.get('duration', DEFAULT_DURATION_S)),
            onset_fraction=float(data.get('onset_fraction', DEFAULT_ONSET_FRACTION)),
            seeds=tuple(int(s) for s in data.get('seeds', DEFAULT_EVAL_SEEDS)),
        )


# id, lambda_amb, lambda_sw, kappa_rack, kappa_cool, psi_idle, phi_sw,
# ambient regime, internal band, utilization regime, latency regime,
# degraded C_hvac, P_rack, flash arrival rate (events/s)
_TC_TABLE = (
    ('TC1', 300.0, 200.0, 0.80, 1.20, 5.0, 12.0, '[18,27]', (20.0, 40.0), '<<80%', '<<3ms', 1.0, 0.50, 0.0),
    ('TC2', 310.0, 210.0, 0.82, 1.15, 5.1, 12.5, '[18,27]', (20.0, 45.0), '~80%', '~3ms', 0.9, 0.55, 0.0),
    ('TC3', 330.0, 230.0, 0.80, 1.10, 5.3, 12.0, '<<18', (25.0, 35.0), '<<80%', '<<3ms', 0.9, 0.50, 0.0),
    ('TC4', 340.0, 240.0, 0.85, 1.05, 5.4, 12.5, '>>27', (20.0, 50.0), '<<80%', '<<3ms', 0.8, 0.60, 0.005),
    ('TC5', 360.0, 260.0, 0.90, 0.95, 5.8, 13.0, '<<18', (25.0, 40.0), '>=80%', '~3ms', 0.8, 0.65, 0.005),
    ('TC6', 380.0, 280.0, 0.95, 0.90, 6.0, 13.5, '>>27', (30.0, 55.0), '>=80%', '~3ms', 0.6, 0.70, 0.005),
    ('TC7', 420.0, 300.0, 1.00, 0.80, 6.5, 14.0, '[18,27]', (20.0, 45.0), '>>80%', '>=3ms', 0.6, 0.80, 0.01),
    ('TC8', 450.0, 330.0, 1.10, 0.70, 7.0, 14.5, '<<18', (30.0, 55.0), '>>80%', '>>3ms', 0.5, 0.85, 0.01),
    ('TC9', 500.0, 380.0, 1.20, 0.60, 8.0, 15.0, '>>27', (30.0, 55.0), '>>90%', '>>5ms', 0.3, 0.90, 0.01),
)


def _preset(row) -> ScenarioConfig:
    (tc, lam_amb, lam_sw, k_rack, k_cool, psi, phi, ambient, band, util, latency,
     hvac, rack, arrivals) = row
    return ScenarioConfig(
        id=tc,
        thermal=ThermalParams(lam_amb, lam_sw, k_rack, k_cool, psi, phi),
        ambient_regime=ambient,
        internal_band=band,
        utilization_regime=util,
        latency_regime=latency,
        tau_env=AMBIENT_REGIME_ENV_C[ambient],
        hvac_level=hvac,
        rack_load=rack,
        flash=FlashEventConfig(arrival_rate=arrivals, duration=FLASH_DURATION_S,
                               target_utilization=UTILIZATION_REGIME_TARGET[util]),
    )


SCENARIOS: Dict[str, ScenarioConfig] = {row[0]: _preset(row) for row in _TC_TABLE}
SCENARIO_IDS: Tuple[str, ...] = tuple(SCENARIOS)


def load_scenario(scenario_id: str) -> ScenarioConfig:
    """
    Return the frozen preset for TC1..TC9.

    Raises:
        UnknownScenarioError: For any other id
    """
    key = scenario_id.strip().upper()
    if key not in SCENARIOS:
        raise UnknownScenarioError(f"Unknown scenario: {scenario_id}. Valid ids: TC1..TC9")
    return SCENARIOS[key]


def parse_scenario_list(text: str) -> List[str]:
    """Expand a comma-separated list with TCa..TCb ranges, keeping first occurrences in order."""
    ids: List[str] = []
    for part in (p.strip() for p in text.split(',') if p.strip()):
        match = re.fullmatch(r'TC(\d+)\.\.TC(\d+)', part, flags=re.IGNORECASE)
        if match:
            lo, hi = int(match.group(1)), int(match.group(2))
            step = 1 if hi >= lo else -1
            candidates = [f"TC{i}" for i in range(lo, hi + step, step)]
        else:
            candidates = [part.upper()]
        for candidate in candidates:
            load_scenario(candidate)
            if candidate not in ids:
                ids.append(candidate)
    if not ids:
        raise UnknownScenarioError(f"No scenarios in '{text}'")
    return ids


def build_simulator(graph: NetworkGraph, flows: Sequence[FlowSpec], scenario: ScenarioConfig,
                    intents: Optional[QoSIntents] = None,
                    settings: Optional[SimulationSettings] = None,
                    seed: int = 42, duration: Optional[float] = None,
                    actuation: Optional[ActuationSettings] = None) -> NetworkSimulator:
    """Simulator for one run of a scenario, with the disruption at onset_fraction of the duration."""
    duration = scenario.duration if duration is None else duration
    plan = DisruptionPlan(onset=scenario.onset(duration), tau_env=scenario.tau_env,
                          hvac_level=scenario.hvac_level, rack_load=scenario.rack_load)
    logger.debug(f"Building {scenario.id} simulator: seed={seed}, duration={duration}s, onset={plan.onset}s")
    return NetworkSimulator(graph, flows, intents=intents, thermal_params=scenario.thermal,
                            settings=settings, flash=scenario.flash, seed=seed, disruption=plan,
                            actuation=actuation, horizon=duration)
