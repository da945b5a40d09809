"""
Seeded episode execution, evaluation over trials, trace replay and the
option-level environment object.
"""
import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings

from .dynamics import ControlInput
from .exceptions import EmptyAvailableError, IncompleteTraceError, WisemoveError
from .ltl import Monitor
from .options import (
    OptionGains,
    available_options,
    build_option_specs,
    goal_reached,
    new_episode_monitors,
    run_option,
)
from .planner import MctsConfig, PlannerMode, baseline_choose, mcts_plan
from .reward import Outcome, RewardSpec, episode_value
from .traces import (
    DecisionRecord,
    EpisodeTrace,
    TerminalRecord,
    vehicle_records,
    write_trace,
)
from .world import (
    NonEgoPolicy,
    Observation,
    ScenarioConfig,
    WorldState,
    observe,
    sample_initial_state,
    valuation,
    world_step,
)

logger = logging.getLogger(__name__)

OUTCOMES = (Outcome.SUCCESS, Outcome.VIOLATION, Outcome.COLLISION, Outcome.TIMEOUT)


@dataclass(frozen=True)
class OutputConfig:
    trace_dir: Optional[str] = None
    metrics_csv: Optional[str] = None
    table_path: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    episodes: int = 100
    trials: int = 10
    max_episode_steps: int = 1000
    workers: int = 1
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    options: Dict[str, OptionGains] = field(default_factory=dict)
    reward: RewardSpec = field(default_factory=RewardSpec)
    planner: str = PlannerMode.MANUAL
    mcts: MctsConfig = field(default_factory=MctsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        if self.mcts.gamma is not None and self.mcts.gamma != self.reward.gamma:
            raise ValueError(
                f"planner gamma {self.mcts.gamma} must equal reward gamma {self.reward.gamma}"
            )

    @property
    def dynamics(self):
        return self.scenario.dynamics

    def with_overrides(self, seed=None, planner=None, workers=None, out=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if planner is not None:
            cfg = replace(cfg, planner=planner)
        if workers is not None:
            cfg = replace(cfg, workers=workers)
        if out is not None:
            out = Path(out)
            cfg = replace(cfg, output=OutputConfig(
                trace_dir=str(out / "traces"),
                metrics_csv=str(out / "metrics.csv"),
                table_path=str(out / "table.txt"),
            ))
        return cfg


@dataclass(frozen=True)
class EpisodeContext:
    state: WorldState
    monitors: Dict[str, Monitor]
    seed: int


# --- seeding ----------------------------------------------------------------

def trial_seed(base_seed: int, trial: int) -> int:
    return base_seed + trial


def episode_seed(trial_seed_value: int, episode: int) -> int:
    """Counter-based derivation, so any episode can be reproduced on its own."""
    return int(np.random.SeedSequence([trial_seed_value, episode]).generate_state(1)[0])


# --- episodes ---------------------------------------------------------------

def reset(cfg: RunConfig, rng: np.random.Generator = None, seed: int = None) -> EpisodeContext:
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed) if rng is None else rng
    state = sample_initial_state(cfg.scenario, rng)
    return EpisodeContext(state=state, monitors=new_episode_monitors(valuation(state, 0)), seed=seed)


def _dump_failed_trace(trace: EpisodeTrace, cfg: RunConfig):
    if not getattr(settings, "WISEMOVE", {}).get("DUMP_FAILED_TRACES", False):
        return
    directory = Path(cfg.output.trace_dir or ".")
    path = write_trace(trace, directory / f"failed_{trace.seed}.jsonl")
    logger.error("Partial trace of the failed episode written to %s", path)


def run_episode(ctx: EpisodeContext, planner: str, cfg: RunConfig,
                rng: np.random.Generator = None) -> EpisodeTrace:
    specs = build_option_specs(cfg.options)
    mu = NonEgoPolicy(cfg.scenario.non_ego)
    rng = np.random.default_rng([ctx.seed, cfg.mcts.seed]) if rng is None else rng
    trace = EpisodeTrace(seed=ctx.seed)
    s, monitors = ctx.state, dict(ctx.monitors)
    outcome, violated = None, ()

    try:
        while outcome is None:
            t = s.time_step
            available = available_options(s, specs)
            if not available:
                raise EmptyAvailableError(f"no option is available at t={t}")
            if planner == PlannerMode.MCTS:
                option = mcts_plan(s, monitors, cfg.mcts, mu, cfg.reward, rng, specs=specs,
                                   steps_left=cfg.max_episode_steps - t)
            else:
                option = baseline_choose(s, specs=specs)
            trace.decisions.append(DecisionRecord(t=t, option=option, available=tuple(available)))
            logger.debug("t=%d: chose %s from %s", t, option, [str(o) for o in available])

            result = run_option(s, specs[option], mu, monitors, cfg.reward, goal=goal_reached,
                                steps_limit=cfg.max_episode_steps - t)
            trace.steps.extend(result.segment)
            s, monitors = result.state, result.monitors
            outcome, violated = result.episode_outcome, result.violated
            if outcome is None and s.time_step >= cfg.max_episode_steps:
                outcome = Outcome.TIMEOUT
    except WisemoveError:
        _dump_failed_trace(trace, cfg)
        raise

    T = s.time_step
    trace.terminal = TerminalRecord(
        T=T, time=T * s.dynamics.dt, outcome=outcome, violated=tuple(violated), episode_value=0.0,
        seed=ctx.seed, state=s, valuation=valuation(s, 0),
    )
    value = episode_value(trace, cfg.reward).value
    trace.terminal = replace(trace.terminal, episode_value=value)
    logger.info("Episode seed=%d ended: %s at T=%d (value %.3f)", ctx.seed, outcome, T, value)
    return trace


def run_seeded_episode(cfg: RunConfig, seed: int, planner: str = None) -> EpisodeTrace:
    return run_episode(reset(cfg, seed=seed), planner or cfg.planner, cfg)


# --- evaluation -------------------------------------------------------------

@dataclass(frozen=True)
class TrialMetrics:
    trial: int
    success_pct: float
    violation_pct: float
    collision_pct: float
    timeout_pct: float


@dataclass(frozen=True)
class Metrics:
    planner: str
    trials: Tuple[TrialMetrics, ...]
    mean: Dict[str, float]
    std: Dict[str, float]
    outcomes: Tuple[Tuple[int, int, str], ...] = ()


PCT_COLUMNS = ("success_pct", "violation_pct", "collision_pct", "timeout_pct")


def aggregate(outcomes: List[Tuple[int, int, str]], planner: str = PlannerMode.MANUAL) -> Metrics:
    """Per-trial outcome percentages plus their mean and sample standard deviation."""
    outcomes = sorted(outcomes)
    by_trial: Dict[int, List[str]] = {}
    for trial, _, outcome in outcomes:
        by_trial.setdefault(trial, []).append(outcome)
    rows = []
    for trial, results in sorted(by_trial.items()):
        counts = [sum(1 for r in results if r == kind) for kind in OUTCOMES]
        pcts = [100.0 * c / len(results) for c in counts]
        rows.append(TrialMetrics(trial, *pcts))
    table = np.array([[getattr(r, c) for c in PCT_COLUMNS] for r in rows], dtype=float).reshape(-1, 4)
    mean = table.mean(axis=0) if len(rows) else np.zeros(4)
    std = table.std(axis=0, ddof=1) if len(rows) > 1 else np.zeros(4)
    return Metrics(
        planner=planner,
        trials=tuple(rows),
        mean={c: float(m) for c, m in zip(PCT_COLUMNS, mean)},
        std={c: float(s) for c, s in zip(PCT_COLUMNS, std)},
        outcomes=tuple(outcomes),
    )


def _episode_task(cfg: RunConfig, planner: str, trial: int, episode: int):
    seed = episode_seed(trial_seed(cfg.seed, trial), episode)
    trace = run_seeded_episode(cfg, seed, planner)
    if cfg.output.trace_dir:
        name = f"{planner}_trial{trial:03d}_episode{episode:04d}.jsonl"
        write_trace(trace, Path(cfg.output.trace_dir) / name)
    return trial, episode, str(trace.outcome)


def run_outcomes(cfg: RunConfig, planner: str = None) -> List[Tuple[int, int, str]]:
    planner = planner or cfg.planner
    tasks = [(i, j) for i in range(cfg.trials) for j in range(cfg.episodes)]
    if cfg.workers <= 1:
        results = [_episode_task(cfg, planner, i, j) for i, j in tasks]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_episode_task, cfg, planner, i, j) for i, j in tasks]
            results = [f.result() for f in futures]
    return sorted(results)


def format_table(metrics_list) -> str:
    """Mean (std) percentages per planner, one row each."""
    header = f"{'Planner':<10}{'Success':>16}{'Violation':>16}{'Collision':>16}{'Timeout':>16}"
    lines = [header, "-" * len(header)]
    for m in metrics_list:
        cells = "".join(f"{m.mean[c]:>9.2f} ({m.std[c]:.2f})".rjust(16) for c in PCT_COLUMNS)
        lines.append(f"{str(m.planner):<10}{cells}")
    return "\n".join(lines) + "\n"


def write_metrics_csv(metrics: Metrics, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("trial",) + PCT_COLUMNS)
        for row in metrics.trials:
            writer.writerow([row.trial] + [f"{getattr(row, c):.4f}" for c in PCT_COLUMNS])
        writer.writerow(["mean"] + [f"{metrics.mean[c]:.4f}" for c in PCT_COLUMNS])
        writer.writerow(["std"] + [f"{metrics.std[c]:.4f}" for c in PCT_COLUMNS])
    return path


def _write_outputs(cfg: RunConfig, metrics_list, csv_suffix: str = ""):
    if cfg.output.metrics_csv:
        for m in metrics_list:
            path = Path(cfg.output.metrics_csv)
            if csv_suffix:
                path = path.with_name(f"{path.stem}_{m.planner}{path.suffix}")
            write_metrics_csv(m, path)
    if cfg.output.table_path:
        table = Path(cfg.output.table_path)
        table.parent.mkdir(parents=True, exist_ok=True)
        table.write_text(format_table(metrics_list), encoding="utf-8")


def evaluate(cfg: RunConfig, planner: str = None, write: bool = True) -> Metrics:
    planner = planner or cfg.planner
    metrics = aggregate(run_outcomes(cfg, planner), planner)
    logger.info(
        "Evaluated %s over %d trials x %d episodes: success %.2f%% (std %.2f)",
        planner, cfg.trials, cfg.episodes, metrics.mean["success_pct"], metrics.std["success_pct"],
    )
    if write:
        _write_outputs(cfg, [metrics])
    return metrics


@dataclass(frozen=True)
class Comparison:
    manual: Metrics
    mcts: Metrics
    # paired counts over identical episode seeds
    both_success: int
    only_manual_success: int
    only_mcts_success: int
    manual_failures: int
    mcts_failures: int


def compare(cfg: RunConfig) -> Comparison:
    """Run both planners on the same episode seeds."""
    manual = evaluate(cfg, PlannerMode.MANUAL, write=False)
    mcts = evaluate(cfg, PlannerMode.MCTS, write=False)
    failures = (Outcome.VIOLATION, Outcome.COLLISION)
    pairs = list(zip(manual.outcomes, mcts.outcomes))
    result = Comparison(
        manual=manual,
        mcts=mcts,
        both_success=sum(1 for a, b in pairs if a[2] == b[2] == Outcome.SUCCESS),
        only_manual_success=sum(1 for a, b in pairs if a[2] == Outcome.SUCCESS != b[2]),
        only_mcts_success=sum(1 for a, b in pairs if b[2] == Outcome.SUCCESS != a[2]),
        manual_failures=sum(1 for a, _ in pairs if a[2] in failures),
        mcts_failures=sum(1 for _, b in pairs if b[2] in failures),
    )
    _write_outputs(cfg, [manual, mcts], csv_suffix="planner")
    return result


def format_comparison(c: Comparison) -> str:
    return format_table([c.manual, c.mcts]) + (
        f"paired episodes: both succeed {c.both_success}, only manual {c.only_manual_success}, "
        f"only mcts {c.only_mcts_success}; failures manual {c.manual_failures}, mcts {c.mcts_failures}\n"
    )


# --- replay -----------------------------------------------------------------

@dataclass(frozen=True)
class ReplayReport:
    steps_checked: int
    first_divergent_step: Optional[int] = None

    @property
    def matched(self) -> bool:
        return self.first_divergent_step is None


def replay_trace(records: List[dict], cfg: RunConfig) -> ReplayReport:
    """
    Re-simulate a logged episode from its seed and logged ego actions and
    compare every logged vehicle state for exact equality.
    """
    terminal = [r for r in records if r.get("kind") == "terminal"]
    if len(terminal) != 1:
        raise IncompleteTraceError("replay needs exactly one terminal record")
    steps = [r for r in records if r.get("kind") == "step"]
    ctx = reset(cfg, seed=terminal[0]["seed"])
    mu = NonEgoPolicy(cfg.scenario.non_ego)
    s = ctx.state
    expected = [(r["t"], r["vehicles"]) for r in steps] + [(terminal[0]["T"], terminal[0]["vehicles"])]
    checked = 0
    for index, (t, vehicles) in enumerate(expected):
        checked += 1
        if s.time_step != t or vehicle_records(s) != vehicles:
            return ReplayReport(steps_checked=checked, first_divergent_step=t)
        if index < len(steps):
            action = steps[index]["action"]
            s = world_step(s, ControlInput(action["accel"], action["steer_rate"]), mu)
    return ReplayReport(steps_checked=checked)


# --- option-level environment -----------------------------------------------

class IntersectionEnv:
    """
    The step/reset/render contract at the option level: ``step`` takes an
    option id, runs it to termination and returns
    ``(observation, segment_return, done, info)``.
    """

    def __init__(self, cfg: RunConfig = None, seed: int = None):
        self.cfg = cfg or RunConfig()
        self.seed = self.cfg.seed if seed is None else seed
        self.specs = build_option_specs(self.cfg.options)
        self.mu = NonEgoPolicy(self.cfg.scenario.non_ego)
        self.state: Optional[WorldState] = None
        self.monitors: Dict[str, Monitor] = {}
        self.trace: Optional[EpisodeTrace] = None
        self.done = False

    def reset(self, seed: int = None) -> Observation:
        if seed is not None:
            self.seed = seed
        ctx = reset(self.cfg, seed=self.seed)
        self.state, self.monitors = ctx.state, dict(ctx.monitors)
        self.trace = EpisodeTrace(seed=self.seed)
        self.done = False
        return observe(self.state)

    def available_options(self) -> list:
        self._require_reset()
        return available_options(self.state, self.specs)

    def step(self, option: str):
        self._require_reset()
        if self.done:
            raise WisemoveError("episode is over; call reset()")
        available = self.available_options()
        if option not in available:
            raise WisemoveError(f"{option} is not available; available: {[str(o) for o in available]}")
        t = self.state.time_step
        self.trace.decisions.append(DecisionRecord(t=t, option=option, available=tuple(available)))
        result = run_option(self.state, self.specs[option], self.mu, self.monitors, self.cfg.reward,
                            goal=goal_reached, steps_limit=self.cfg.max_episode_steps - t)
        self.trace.steps.extend(result.segment)
        self.state, self.monitors = result.state, result.monitors
        outcome = result.episode_outcome
        if outcome is None and self.state.time_step >= self.cfg.max_episode_steps:
            outcome = Outcome.TIMEOUT
        self.done = outcome is not None
        info = {"termination": str(result.outcome), "steps": len(result.segment), "outcome": outcome}
        if self.done:
            T = self.state.time_step
            self.trace.terminal = TerminalRecord(
                T=T, time=T * self.state.dynamics.dt, outcome=outcome, violated=result.violated,
                episode_value=0.0, seed=self.seed, state=self.state, valuation=valuation(self.state, 0),
            )
            value = episode_value(self.trace, self.cfg.reward).value
            self.trace.terminal = replace(self.trace.terminal, episode_value=value)
            info["episode_value"] = value
        return observe(self.state), result.segment_return, self.done, info

    def render(self, style: str = "ascii"):
        from .render import render_state

        self._require_reset()
        return render_state(self.state, style=style)

    def _require_reset(self):
        if self.state is None:
            raise WisemoveError("call reset() before using the environment")
