#!/usr/bin/env python3
"""
Threshold-Triggered Self-Healing for Wind-Power-Plant Networks
==============================================================

Command-line entry point for the spine-leaf SDN simulator, the DQN
self-healing agent and the shortest-path/ECMP baseline.

Features:
- Train the agent on a scenario mix and save weights plus training curves
- Evaluate baseline / trained / untrained policies over TC1-TC9 and seeds,
  with mean and 95% CI per (policy, scenario) and an improvement summary
- Run a single scenario and write its tick trace as JSONL
- Validate a topology preset or custom JSON file
- Recompute resilience metrics offline from a trace
- Configuration through defaults, AUTOHEAL_* environment / .env, a JSON
  file and command-line flags (in increasing precedence)

Configuration:
    AUTOHEAL_CONFIG     path to a JSON override document
    AUTOHEAL_SEED       default training seed
    AUTOHEAL_LOG_LEVEL  logging level (DEBUG, INFO, ...)

Usage:
    python selfheal.py train --scenario TC5..TC9 --episodes 1500 --seed 42 --out weights.bin
    python selfheal.py evaluate --weights weights.bin --scenarios TC1..TC9 \\
                                --seeds 23,37,49,71,42 --out results.csv
    python selfheal.py run-scenario --id TC5 --agent baseline --trace trace.jsonl
    python selfheal.py validate-topology --topology wpp
    python selfheal.py inspect-trace --trace trace.jsonl
"""

__version__ = "0.1.0"

import argparse
import logging
import math
import sys
import time
from typing import Dict, List, Optional

from agent.dqn import TrainingDivergenceError, epsilon_floor_episode
from agent.network import DimensionError, WeightsMismatchError
from agent.trainer import EnvironmentFault, TrainingEnvironment, train
from harness.evaluation import evaluate
from harness.resilience import EmptyTraceError, resilience_metrics
from harness.runner import MissingWeightsError, Policy, run_episode
from harness.scenarios import UnknownScenarioError, build_simulator, load_scenario, parse_scenario_list
from helpers.config import AppConfig, ConfigError, load_config, load_env_config
from helpers.csv_utils import format_float, write_curves_csv, write_results_csv, write_runs_csv
from helpers.run_tracker import RunTracker
from helpers.trace_io import TraceFormatError, TraceWriter, read_trace
from netsim.knowledge import KnowledgeOrderError
from netsim.simulator import SimulationDivergenceError
from netsim.thermal import ThermalStepError
from netsim.topology import NetworkGraph, TopologyError, load_topology, validate_graph
from netsim.traffic import MissingRouteError, default_flow_roster, load_flow_roster

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s',
    handlers=[
        logging.FileHandler('selfheal.log'),
        logging.StreamHandler()
    ]
)
logger = logging.getLogger(__name__)

DOMAIN_ERRORS = (ConfigError, TopologyError, MissingRouteError, ThermalStepError, KnowledgeOrderError,
                 DimensionError, WeightsMismatchError, TrainingDivergenceError, EnvironmentFault,
                 SimulationDivergenceError, UnknownScenarioError, EmptyTraceError, MissingWeightsError,
                 TraceFormatError, FileNotFoundError, ValueError)


def set_log_level(level: int) -> None:
    root = logging.getLogger()
    root.setLevel(level)
    for handler in root.handlers:
        handler.setLevel(level)


def print_final_stats(title: str, stats: Dict[str, object], duration: Optional[float] = None) -> None:
    """Print a banner block of statistics."""
    print("\n" + "=" * 60)
    print(title)
    print("=" * 60)
    for label, value in stats.items():
        print(f"{label}: {value}")
    if duration is not None:
        print(f"Wall time: {duration:.1f} seconds")
    print("=" * 60)


def parse_seeds(text: str) -> List[int]:
    try:
        seeds = [int(s) for s in text.split(',') if s.strip()]
    except ValueError:
        raise ConfigError(f"Seeds must be a comma-separated list of integers, got '{text}'")
    if not seeds:
        raise ConfigError("At least one seed is required")
    return seeds


def build_overrides(args: argparse.Namespace) -> Dict[str, Dict[str, object]]:
    """Map command-line flags onto config sections; unset flags leave the config alone."""
    overrides: Dict[str, Dict[str, object]] = {}

    def put(section: str, key: str, value) -> None:
        if value is not None:
            overrides.setdefault(section, {})[key] = value

    put('topology', 'preset', args.topology)
    put('topology', 'roster', args.roster)
    put('intents', 'intents_file', args.intents)
    put('simulation', 'tick', args.tick)
    put('evaluation', 'max_workers', getattr(args, 'max_workers', None))
    put('evaluation', 'detection_delay', getattr(args, 'detection_delay', None))
    if args.command == 'train':
        put('dqn', 'episodes', args.episodes)
        put('dqn', 'seed', args.seed)
        put('dqn', 'sync_per_episodes', args.sync_per_episodes)
        put('evaluation', 'training_duration', args.duration)
    elif args.command in ('evaluate', 'run-scenario'):
        put('evaluation', 'duration', args.duration)
    return overrides


def load_environment(config: AppConfig):
    graph = load_topology(config.topology.preset)
    if config.topology.roster:
        flows = load_flow_roster(config.topology.roster)
    else:
        flows = default_flow_roster(graph)
    return graph, flows


def cmd_train(args: argparse.Namespace, config: AppConfig) -> int:
    graph, flows = load_environment(config)
    mix = parse_scenario_list(args.scenario) if args.scenario else list(config.evaluation.train_mix)
    scenarios = [load_scenario(tc) for tc in mix]
    env = TrainingEnvironment(graph, flows, scenarios, intents=config.intents.to_intents(),
                              settings=config.simulation, actuation=config.actuation,
                              duration=config.evaluation.training_duration, seed=config.dqn.seed)
    cfg = config.dqn
    print("=" * 60)
    print(f"Training on {', '.join(mix)} for {cfg.episodes} episodes "
          f"(eta={env.eta}, |A|={cfg.n_actions}, seed={cfg.seed})")
    print("=" * 60)

    start = time.time()
    result = train(env, cfg)
    result.net.save(args.out, meta={'seed': cfg.seed, 'config_hash': config.config_hash(),
                                    'scenarios': mix, 'episodes': cfg.episodes})
    if args.curves:
        write_curves_csv(result.curves, args.curves)

    recovered = sum(1 for c in result.curves if c.recovered)
    tail = result.curves[-min(100, len(result.curves)):] if result.curves else []
    print_final_stats("TRAINING COMPLETED", {
        'Weights': args.out,
        'Episodes': len(result.curves),
        'Episodes recovered': f"{recovered:,}",
        'Gradient steps': f"{result.grad_steps:,}",
        'Transitions stored': f"{result.transitions_stored:,}",
        'Epsilon floor reached at episode': epsilon_floor_episode(cfg),
        'Mean reward (last 100 episodes)': format_float(
            sum(c.reward for c in tail) / len(tail) if tail else math.nan, 4),
    }, time.time() - start)
    return 0


def cmd_evaluate(args: argparse.Namespace, config: AppConfig) -> int:
    graph, flows = load_environment(config)
    policies = [p.strip() for p in args.policies.split(',') if p.strip()]
    scenario_ids = parse_scenario_list(args.scenarios)
    seeds = parse_seeds(args.seeds) if args.seeds else list(config.evaluation.seeds)
    tracker = (RunTracker(config.evaluation.tracker_db)
               if args.resume or args.track or args.prune_stale else None)

    start = time.time()
    result = evaluate(policies, scenario_ids, seeds, graph, flows,
                      intents=config.intents.to_intents(), settings=config.simulation,
                      dqn_cfg=config.dqn, weights=args.weights,
                      duration=config.evaluation.duration,
                      detection_delay=config.evaluation.detection_delay,
                      max_workers=config.evaluation.max_workers, tracker=tracker,
                      resume=args.resume, config_hash=config.config_hash(),
                      prune_stale=args.prune_stale,
                      actuation=config.actuation)
    write_results_csv(result.rows, args.out)
    if args.runs_out:
        write_runs_csv(result.records, args.runs_out)

    for line in result.summary.lines():
        print(line)
    print_final_stats("EVALUATION COMPLETED", {
        'Results': args.out,
        'Policies': ', '.join(policies),
        'Scenarios': ', '.join(scenario_ids),
        'Seeds': ', '.join(str(s) for s in seeds),
        'Runs': f"{len(result.records):,} ({result.skipped:,} resumed)",
        'Aggregate rows': len(result.rows),
    }, time.time() - start)
    return 0


def cmd_run_scenario(args: argparse.Namespace, config: AppConfig) -> int:
    graph, flows = load_environment(config)
    scenario = load_scenario(args.id)
    seed = args.seed if args.seed is not None else config.evaluation.seeds[0]
    duration = config.evaluation.duration
    sim = build_simulator(graph, flows, scenario, config.intents.to_intents(), config.simulation,
                          seed=seed, duration=duration, actuation=config.actuation)

    start = time.time()
    if args.trace:
        meta = {'t_D': sim.disruption.onset, 'tick': config.simulation.tick, 'scenario': scenario.id,
                'policy': Policy(args.agent).value, 'seed': seed}
        with TraceWriter(args.trace, meta=meta) as writer:
            record, trace = run_episode(sim, args.agent, scenario, seed, config.dqn, args.weights,
                                        config.evaluation.detection_delay, duration, writer=writer,
                                        progress=True)
            writer.write_events(trace.events)
    else:
        record, trace = run_episode(sim, args.agent, scenario, seed, config.dqn, args.weights,
                                    config.evaluation.detection_delay, duration, progress=True)

    print_final_stats(f"{scenario.id} / {record.policy} / seed {seed}", {
        'Mean latency (ms)': format_float(record.latency_ms, 3),
        'Packet loss (%)': format_float(record.loss_pct, 3),
        'Throughput (Mb/s)': format_float(record.throughput_mbps, 1),
        'Reaction time (s)': format_float(record.reaction_s, 4),
        'Recovery time (s)': format_float(record.recovery_s, 3),
        'Performance drop': format_float(record.dy, 4),
        'Recovery class': record.recovery_class,
        'Decisions': record.decisions,
        'Actuation events': f"{record.actuation_events} ({record.stale_actions} stale)",
        'Ticks': f"{len(trace):,}",
    }, time.time() - start)
    return 0


def cmd_validate_topology(args: argparse.Namespace, config: AppConfig) -> int:
    graph: NetworkGraph = load_topology(config.topology.preset)
    report = validate_graph(graph)
    stats = {
        'Topology': config.topology.preset,
        'Switches': len(graph.switches),
        'Links': len(graph.links),
        'Hosts': len(graph.hosts),
        'Connected': report.connected,
        'Capacities positive': report.capacities_positive,
        'Hosts attached to leaves': report.hosts_attached,
        'No self-loops': report.no_self_loops,
        'No parallel links': report.no_parallel_links,
    }
    print_final_stats("TOPOLOGY VALIDATION " + ("PASSED" if report.passed else "FAILED"), stats)
    for finding in report.findings:
        logger.error(finding)
    return 0 if report.passed else 1


def cmd_inspect_trace(args: argparse.Namespace, config: AppConfig) -> int:
    trace = read_trace(args.trace, show_progress=True)
    res = resilience_metrics(trace, window=config.dqn.recovery_ticks)
    latency = trace.array('latency_mean')
    print_final_stats(f"TRACE {args.trace}", {
        'Ticks': f"{len(trace):,}",
        'Actuation events': len(trace.events),
        'Disruption at (s)': format_float(trace.t_D, 3),
        'Mean latency (ms)': format_float(float(latency.mean()) * 1000.0 if len(trace) else None, 3),
        'Minimum post-disruption level': format_float(res.y_m, 4),
        'Performance drop': format_float(res.dy, 4),
        'Recovery time (s)': format_float(res.dt, 3),
        'Recovery class': res.recovery_class,
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Spine-leaf SDN simulator with a threshold-triggered DQN self-healing agent',
        epilog='Defaults can be overridden by AUTOHEAL_CONFIG (JSON) or --config; '
               'command line arguments take precedence over both.'
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON config override file (default: $AUTOHEAL_CONFIG)')
    common.add_argument('--topology', help='Topology preset (wpp, small) or custom:<file.json>')
    common.add_argument('--roster', help='Flow roster JSON (default: derived from host roles)')
    common.add_argument('--intents', help='QoS intents JSON {u_thr, l_thr_ms, temp_min_c, temp_max_c}')
    common.add_argument('--tick', type=float, help='Simulator tick in seconds (default: 0.001)')
    common.add_argument('--debug', action='store_true', help='Enable debug logging')

    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('train', parents=[common], help='Train the self-healing agent')
    p.add_argument('--scenario', help='Scenario mix, e.g. TC5..TC9 (default: from config)')
    p.add_argument('--episodes', type=int, help='Training episodes (default: 1500)')
    p.add_argument('--seed', type=int, help='Training seed (default: 42 or $AUTOHEAL_SEED)')
    p.add_argument('--out', default='weights.bin', help='Weights output file (default: weights.bin)')
    p.add_argument('--curves', default='training_curves.csv', help='Training-curve CSV output')
    p.add_argument('--sync-per-episodes', type=int, help='Sync the target network every N episodes '
                   'instead of every N gradient steps')
    p.add_argument('--duration', type=float, help='Simulated seconds per training episode (default: 30)')

    p = sub.add_parser('evaluate', parents=[common], help='Evaluate policies over scenarios and seeds')
    p.add_argument('--weights', help='Trained weights (required for the ttdqsha policy)')
    p.add_argument('--policies', default='baseline,ttdqsha',
                   help='Comma-separated policies: baseline, ttdqsha, untrained')
    p.add_argument('--scenarios', default='TC1..TC9', help='Scenarios (default: TC1..TC9)')
    p.add_argument('--seeds', help='Comma-separated seeds (default: 23,37,49,71,42)')
    p.add_argument('--out', default='results.csv', help='Aggregate results CSV')
    p.add_argument('--runs-out', help='Optional per-run metrics CSV')
    p.add_argument('--duration', type=float, help='Simulated seconds per run (default: 600)')
    p.add_argument('--detection-delay', type=float, help='Baseline detection delay in seconds (default: 2)')
    p.add_argument('--max-workers', type=int, help='Worker processes (default: 1)')
    p.add_argument('--track', action='store_true', help='Record completed runs in the run tracker')
    p.add_argument('--resume', action='store_true', help='Skip runs already in the run tracker')
    p.add_argument('--prune-stale', action='store_true',
                   help='Drop tracked runs recorded under a different configuration')

    p = sub.add_parser('run-scenario', parents=[common], help='Run one scenario with one policy')
    p.add_argument('--id', required=True, help='Scenario id (TC1..TC9)')
    p.add_argument('--agent', default='baseline', choices=[x.value for x in Policy], help='Policy')
    p.add_argument('--weights', help='Trained weights (for --agent ttdqsha)')
    p.add_argument('--seed', type=int, help='Run seed (default: first evaluation seed)')
    p.add_argument('--trace', help='Tick trace JSONL output')
    p.add_argument('--duration', type=float, help='Simulated seconds (default: 600)')
    p.add_argument('--detection-delay', type=float, help='Baseline detection delay in seconds')

    sub.add_parser('validate-topology', parents=[common], help='Check topology invariants')

    p = sub.add_parser('inspect-trace', parents=[common], help='Recompute resilience metrics from a trace')
    p.add_argument('--trace', required=True, help='Tick trace JSONL')
    return parser


COMMANDS = {
    'train': cmd_train,
    'evaluate': cmd_evaluate,
    'run-scenario': cmd_run_scenario,
    'validate-topology': cmd_validate_topology,
    'inspect-trace': cmd_inspect_trace,
}


def main(argv: Optional[List[str]] = None) -> int:
    print(f"wpp-selfheal v{__version__}")
    env_config = load_env_config()
    args = build_parser().parse_args(argv)

    if args.debug:
        set_log_level(logging.DEBUG)
    elif env_config.get('log_level'):
        level = logging.getLevelName(env_config['log_level'].upper())
        if isinstance(level, int):
            set_log_level(level)
        else:
            logger.warning(f"Ignoring unknown AUTOHEAL_LOG_LEVEL: {env_config['log_level']}")

    try:
        config = load_config(args.config, build_overrides(args), env=env_config)
        return COMMANDS[args.command](args, config)
    except DOMAIN_ERRORS as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1
    except KeyboardInterrupt:
        logger.warning("Interrupted by user")
        return 1


if __name__ == '__main__':
    sys.exit(main())
