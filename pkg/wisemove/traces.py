"""
Episode traces and their newline-delimited JSON form.

A trace file holds one JSON object per line, tagged by ``kind``: a
``decision`` record at every decision instant, a ``step`` record per
simulation step and exactly one ``terminal`` record at the end.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace
from typing import Dict, Iterable, List, Optional, Tuple

from .exceptions import IncompleteTraceError, WisemoveError
from .options import StepRecord
from .world import WorldState


@dataclass(frozen=True)
class DecisionRecord:
    t: int
    option: str
    available: Tuple[str, ...]


@dataclass(frozen=True)
class TerminalRecord:
    T: int
    time: float
    outcome: str
    violated: Tuple[str, ...]
    episode_value: float
    seed: int
    state: WorldState
    valuation: Dict[str, bool]


@dataclass
class EpisodeTrace:
    seed: int
    steps: List[StepRecord] = field(default_factory=list)
    decisions: List[DecisionRecord] = field(default_factory=list)
    terminal: Optional[TerminalRecord] = None

    @property
    def outcome(self) -> Optional[str]:
        return self.terminal.outcome if self.terminal else None


def vehicle_records(s: WorldState) -> list:
    return [
        {
            "X": veh.cont.X,
            "Y": veh.cont.Y,
            "theta": veh.cont.theta,
            "v": veh.cont.v,
            "psi": veh.cont.psi,
            "accel_prev": veh.state.u_prev.accel,
            "steer_rate_prev": veh.state.u_prev.steer_rate,
            "route": str(veh.route),
            "lane": veh.lane,
            "waited": veh.z.waited,
            "has_entered_stop_region": veh.z.has_entered_stop_region,
            "has_stopped_in_stop_region": veh.z.has_stopped_in_stop_region,
        }
        for veh in s.vehicles
    ]


def trace_records(trace: EpisodeTrace) -> List[dict]:
    """Records in file order: each decision precedes the step it was taken at."""
    decisions = {d.t: d for d in trace.decisions}
    records = []
    for step in trace.steps:
        decision = decisions.get(step.t)
        if decision is not None:
            records.append({
                "kind": "decision",
                "t": decision.t,
                "option": str(decision.option),
                "available": [str(o) for o in decision.available],
            })
        records.append({
            "kind": "step",
            "t": step.t,
            "time": step.time,
            "vehicles": vehicle_records(step.state),
            "valuation": dict(step.valuation),
            "option": step.option,
            "action": {"accel": step.action.accel, "steer_rate": step.action.steer_rate},
            "inst_cost": step.inst_cost,
        })
    if trace.terminal is not None:
        term = trace.terminal
        records.append({
            "kind": "terminal",
            "T": term.T,
            "time": term.time,
            "outcome": str(term.outcome),
            "violated": list(term.violated),
            "episode_value": term.episode_value,
            "seed": term.seed,
            "vehicles": vehicle_records(term.state),
            "valuation": dict(term.valuation),
        })
    return records


def dumps_records(records: Iterable[dict]) -> str:
    return "".join(json.dumps(record, sort_keys=True) + "\n" for record in records)


def write_trace(trace: EpisodeTrace, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps_records(trace_records(trace)), encoding="utf-8")
    except OSError as e:
        raise WisemoveError(f"Cannot write trace to {path}: {e}") from e
    return path


def read_records(path) -> List[dict]:
    records = []
    try:
        with open(path, encoding="utf-8") as handle:
            for number, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as e:
                    raise WisemoveError(f"{path}:{number}: invalid JSON record ({e.msg})") from e
    except OSError as e:
        raise WisemoveError(f"Cannot read trace {path}: {e}") from e
    return records


@dataclass
class LoggedTrace:
    """A trace read back from disk, shaped like EpisodeTrace for reward and replay code."""
    records: List[dict]

    def _of_kind(self, kind):
        return [SimpleNamespace(**r) for r in self.records if r.get("kind") == kind]

    @property
    def steps(self):
        return self._of_kind("step")

    @property
    def decisions(self):
        return self._of_kind("decision")

    @property
    def terminal(self):
        terminals = self._of_kind("terminal")
        if len(terminals) > 1:
            raise IncompleteTraceError("trace holds more than one terminal record")
        return terminals[0] if terminals else None

    @property
    def seed(self):
        terminal = self.terminal
        return terminal.seed if terminal else None


def load_trace(path) -> LoggedTrace:
    return LoggedTrace(read_records(path))


def valuations_from_records(records: Iterable[dict]) -> List[dict]:
    """
    Valuation sequence of a record stream.  Flat proposition records are
    taken as they are; step and terminal records contribute their
    ``valuation`` field and decision records nothing.
    """
    trace = []
    for record in records:
        kind = record.get("kind")
        if kind is None:
            trace.append(record)
        elif kind in ("step", "terminal"):
            trace.append(record["valuation"])
    return trace
