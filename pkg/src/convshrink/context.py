"""Dynamic deployment context: budgets, objective weights, triggers, replay.

The time-varying context couples battery level to the objective weights
(lower battery pushes weight onto energy efficiency, floored at 0.3),
takes the storage budget from the currently available cache, and carries
the application-specified accuracy-loss threshold and latency budget.
``simulate`` replays a context trace, re-searching at every trigger and
keeping the deployed plan in between.
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .costmodel import CostModelConfig, DEFAULT_CONFIG, DeviceProfile
from .errors import SpecValidationError
from .operators import OperatorCatalog
from .oracle import AccuracyProfile
from .search import MutationConfig, SearchBudget, SearchResult, runtime3c
from .arch import NetworkSpec

LAMBDA2_FLOOR = 0.3
DEFAULT_A_THRESHOLD = 0.05  # used when the application supplies no threshold
DEFAULT_BATTERY_CAPACITY_JOULES = 50_000.0  # synthetic stand-in, ~a phone battery

PERIODIC = "periodic"
ON_CHANGE = "on_change"
BOTH = "both"


@dataclass(frozen=True, slots=True)
class ContextState:
    """One moment's budgets and weights."""

    time: float
    battery_remaining: float
    cache_available: float
    inference_count: int
    a_threshold: float
    t_budget: float
    s_budget: float
    lambda1: float
    lambda2: float

    def validate(self) -> list[str]:
        v = []
        if not 0.0 <= self.battery_remaining <= 1.0:
            v.append(f"battery_remaining {self.battery_remaining} outside [0, 1]")
        if abs(self.lambda1 + self.lambda2 - 1.0) > 1e-9:
            v.append(f"lambda1 + lambda2 must equal 1, got {self.lambda1 + self.lambda2}")
        if self.lambda2 < LAMBDA2_FLOOR - 1e-12:
            v.append(f"lambda2 {self.lambda2} below the {LAMBDA2_FLOOR} floor")
        if self.t_budget <= 0 or self.s_budget <= 0:
            v.append("latency and storage budgets must be positive")
        if self.s_budget > self.cache_available:
            v.append(
                f"storage budget {self.s_budget} exceeds available cache {self.cache_available}"
            )
        if self.a_threshold < 0:
            v.append("a_threshold must be nonnegative")
        if self.inference_count < 0:
            v.append("inference_count must be nonnegative")
        return v


@dataclass(frozen=True, slots=True)
class AppConfig:
    """Application-specified constraints (the platform imposes the rest)."""

    a_threshold: float = DEFAULT_A_THRESHOLD
    t_budget: float = 0.1


@dataclass(frozen=True, slots=True)
class TraceEntry:
    t: float
    battery: float | None  # None: let the simulator's drain model fill it in
    cache_bytes: float
    inference_count: int
    recharge: bool = False


@dataclass(frozen=True, slots=True)
class ContextTrace:
    entries: tuple[TraceEntry, ...]
    app: AppConfig

    def validate(self) -> list[str]:
        v = []
        times = [e.t for e in self.entries]
        if any(b <= a for a, b in zip(times, times[1:])):
            v.append("trace times must be strictly increasing")
        last_battery: float | None = None
        for e in self.entries:
            if e.cache_bytes <= 0:
                v.append(f"t={e.t}: cache_bytes must be positive")
            if e.inference_count < 0:
                v.append(f"t={e.t}: inference_count must be nonnegative")
            if e.battery is not None:
                if not 0.0 <= e.battery <= 1.0:
                    v.append(f"t={e.t}: battery {e.battery} outside [0, 1]")
                if last_battery is not None and e.battery > last_battery and not e.recharge:
                    v.append(f"t={e.t}: battery rose without a recharge mark")
                last_battery = e.battery
        return v


@dataclass(frozen=True, slots=True)
class TriggerPolicy:
    mode: str = PERIODIC
    period: float | None = None
    change_epsilon: float | None = None

    def validate(self) -> list[str]:
        v = []
        if self.mode not in (PERIODIC, ON_CHANGE, BOTH):
            v.append(f"unknown trigger mode {self.mode!r}")
        if self.mode in (PERIODIC, BOTH) and not (self.period and self.period > 0):
            v.append("periodic triggering needs a positive period")
        if self.mode in (ON_CHANGE, BOTH) and not (self.change_epsilon and self.change_epsilon > 0):
            v.append("on-change triggering needs a positive change_epsilon")
        return v


@dataclass(frozen=True, slots=True)
class AdaptationEvent:
    """One trigger's outcome; the deployed plan persists until the next one."""

    t: float
    context: ContextState
    result: SearchResult
    battery_synthetic: bool

    def to_dict(self, include_wall_time: bool = True) -> dict:
        doc = self.result.to_dict(include_wall_time=include_wall_time)
        doc.pop("optimizer", None)
        return {
            "t": self.t,
            "context": {
                "battery_remaining": self.context.battery_remaining,
                "cache_available": self.context.cache_available,
                "inference_count": self.context.inference_count,
                "a_threshold": self.context.a_threshold,
                "t_budget": self.context.t_budget,
                "s_budget": self.context.s_budget,
                "lambda1": self.context.lambda1,
                "lambda2": self.context.lambda2,
            },
            "battery_synthetic": self.battery_synthetic,
            "search_wall_time_seconds": doc.pop("wall_time_seconds"),
            **doc,
        }


def weights_from_battery(e_remaining: float, low_battery_favors_energy: bool = True
                         ) -> tuple[float, float]:
    """(lambda1, lambda2) from remaining battery; lambda2 floored at 0.3.

    Default: lambda2 = max(0.3, 1 - battery), so a draining battery shifts
    weight onto energy efficiency. The alternative form lambda2 = max(0.3,
    battery) is kept for comparison runs.
    """
    if not 0.0 <= e_remaining <= 1.0:
        raise SpecValidationError(f"battery fraction {e_remaining} outside [0, 1]")
    if low_battery_favors_energy:
        lambda2 = max(LAMBDA2_FLOOR, 1.0 - e_remaining)
    else:
        lambda2 = max(LAMBDA2_FLOOR, e_remaining)
    return 1.0 - lambda2, lambda2


def budgets_from_trace_entry(entry: TraceEntry, app: AppConfig,
                             battery_override: float | None = None) -> ContextState:
    """Assemble a full ContextState: storage budget = available cache,
    application constraints copied, weights derived from battery."""
    battery = entry.battery if entry.battery is not None else battery_override
    if battery is None:
        raise SpecValidationError(f"t={entry.t}: no battery value and no override")
    if entry.cache_bytes <= 0:
        raise SpecValidationError(f"t={entry.t}: no storage budget (cache is {entry.cache_bytes})")
    lambda1, lambda2 = weights_from_battery(battery)
    state = ContextState(
        time=entry.t,
        battery_remaining=battery,
        cache_available=entry.cache_bytes,
        inference_count=entry.inference_count,
        a_threshold=app.a_threshold,
        t_budget=app.t_budget,
        s_budget=entry.cache_bytes,
        lambda1=lambda1,
        lambda2=lambda2,
    )
    bad = state.validate()
    if bad:
        raise SpecValidationError(bad)
    return state


def _relative_change(old: float, new: float) -> float:
    return abs(new - old) / abs(old) if old else math.inf


def should_trigger(prev: ContextState | None, nxt: ContextState,
                   policy: TriggerPolicy, last_trigger_time: float | None) -> bool:
    """True when the policy calls for a re-search at ``nxt``."""
    bad = policy.validate()
    if bad:
        raise SpecValidationError(bad)
    if prev is None or last_trigger_time is None:
        return True  # initial deployment always needs a plan
    periodic_due = (policy.mode in (PERIODIC, BOTH)
                    and nxt.time - last_trigger_time >= policy.period)
    changed = False
    if policy.mode in (ON_CHANGE, BOTH):
        eps = policy.change_epsilon
        changed = (
            _relative_change(prev.s_budget, nxt.s_budget) > eps
            or _relative_change(prev.t_budget, nxt.t_budget) > eps
            or _relative_change(prev.lambda2, nxt.lambda2) > eps
        )
    return periodic_due or changed


def simulate(backbone: NetworkSpec, catalog: OperatorCatalog, profile: AccuracyProfile,
             device: DeviceProfile, trace: ContextTrace, policy: TriggerPolicy,
             budget: SearchBudget = SearchBudget(),
             mutation: MutationConfig = MutationConfig(),
             config: CostModelConfig = DEFAULT_CONFIG,
             battery_capacity_joules: float = DEFAULT_BATTERY_CAPACITY_JOULES,
             ) -> list[AdaptationEvent]:
    """Replay a context trace, re-searching at every trigger.

    Between entries the deployed plan keeps serving inferences; when a trace
    row omits the battery value, it is filled by the synthetic linear drain
    model inference_count * energy_cost(deployed) / battery_capacity_joules
    and the event is flagged accordingly. Per-trigger infeasibility is data,
    not an error: the event records the best-found plan and what it violates.
    """
    bad = trace.validate() + policy.validate()
    if bad:
        raise SpecValidationError(bad)
    events: list[AdaptationEvent] = []
    prev_state: ContextState | None = None
    last_trigger: float | None = None
    deployed: SearchResult | None = None
    battery_estimate = 1.0

    for entry in trace.entries:
        synthetic_battery = entry.battery is None
        state = budgets_from_trace_entry(entry, trace.app, battery_override=battery_estimate)
        if should_trigger(prev_state, state, policy, last_trigger):
            result = runtime3c(backbone, catalog, profile, device, state,
                               budget=budget, mutation=mutation, config=config)
            events.append(AdaptationEvent(
                t=entry.t, context=state, result=result,
                battery_synthetic=synthetic_battery,
            ))
            deployed = result
            last_trigger = entry.t
        prev_state = state
        # linear drain between entries; the deployed plan serves the interval
        drain = 0.0
        if deployed is not None and battery_capacity_joules > 0:
            drain = entry.inference_count * deployed.report.energy_cost / battery_capacity_joules
        battery_estimate = max(0.0, state.battery_remaining - drain)
    return events


def events_to_jsonl(events: list[AdaptationEvent], include_wall_time: bool = True) -> str:
    return "".join(
        json.dumps(e.to_dict(include_wall_time=include_wall_time), sort_keys=True) + "\n"
        for e in events
    )


# ---------------------------------------------------------------------------
# trace files (CSV) and synthetic contention traces
# ---------------------------------------------------------------------------

TRACE_HEADER = ["t_seconds", "battery_fraction", "cache_bytes", "inference_count"]


def load_trace(path: str | Path, app: AppConfig) -> ContextTrace:
    entries = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRACE_HEADER:
            raise SpecValidationError(
                f"trace header must be {','.join(TRACE_HEADER)}, got {reader.fieldnames}"
            )
        try:
            for row in reader:
                battery_text = (row["battery_fraction"] or "").strip()
                entries.append(TraceEntry(
                    t=float(row["t_seconds"]),
                    battery=float(battery_text) if battery_text else None,
                    cache_bytes=float(row["cache_bytes"]),
                    inference_count=int(row["inference_count"]),
                ))
        except (TypeError, ValueError) as exc:
            raise SpecValidationError(f"malformed trace row: {exc}") from exc
    trace = ContextTrace(entries=tuple(entries), app=app)
    bad = trace.validate()
    if bad:
        raise SpecValidationError(bad)
    return trace


def save_trace(trace: ContextTrace, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for e in trace.entries:
            battery = "" if e.battery is None else f"{e.battery:g}"
            writer.writerow([f"{e.t:g}", battery, f"{e.cache_bytes:g}", e.inference_count])


def contended_cache_trace(app: AppConfig, capacity_bytes: float, steps: int,
                          period_seconds: float, battery_start: float = 1.0,
                          battery_step: float = 0.05, contention_sigma: float = 0.25e6,
                          inference_count: int = 1, seed: int = 0) -> ContextTrace:
    """Synthetic trace: cache = capacity - |Gauss(0, sigma)|, battery draining
    linearly. Mirrors randomized cache-contention injection."""
    rng = random.Random(f"trace/{seed}")
    entries = []
    for i in range(steps):
        noise = abs(rng.gauss(0.0, contention_sigma))
        cache = min(capacity_bytes, max(1.0, capacity_bytes - noise))
        battery = max(0.0, battery_start - battery_step * i)
        entries.append(TraceEntry(
            t=i * period_seconds, battery=battery,
            cache_bytes=cache, inference_count=inference_count,
        ))
    return ContextTrace(entries=tuple(entries), app=app)
