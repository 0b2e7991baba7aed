"""Compression-plan searchers: the layer-sequential Pareto search plus
exhaustive and greedy baselines.

The main searcher walks compressible layers front to back. At each layer it
evaluates every applicable catalog group appended to the fixed plan prefix,
keeps the Pareto front in the (accuracy loss, energy proxy) plane, picks the
two best-scoring front members, widens them to a six-candidate pool by
channel-ratio mutation, fixes the best survivor, and stops as soon as the
whole model satisfies all three context constraints (accuracy loss, latency,
memory). Budgets it cannot satisfy yield an infeasible result that still
carries the best candidate found.

Whole-model evaluations are counted; one run performs at most (M + 6) per
visited layer. Everything is deterministic given the inputs and seed.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Protocol, Sequence

from . import oracle as oracle_mod
from .arch import NetworkSpec, count_network
from .costmodel import (
    CostModelConfig,
    DEFAULT_CONFIG,
    DeviceProfile,
    PerfReport,
    build_report,
    latency,
    norm,
    objective_score,
)
from .encoding import CompressionPlan, encode, make_plan
from .errors import (
    InvalidOperatorError,
    NoFeasibleCandidateError,
    SearchSpaceTooLargeError,
    SpecValidationError,
)
from .operators import (
    CHANNEL_SCALE,
    DEPTH_SKIP,
    FIRE,
    LOWRANK,
    OperatorCatalog,
    OperatorGroup,
    _half_up,
    advance_positions,
    apply_assignments,
    apply_group_meta,
    channel_scale_operator,
)
from .oracle import AccuracyProfile, ImportanceRanking, predict_accuracy, validate_profile

ACCURACY_CONSTRAINT = "accuracy_loss"
LATENCY_CONSTRAINT = "latency"
MEMORY_CONSTRAINT = "memory"

DEFAULT_EXHAUSTIVE_CAP = 1_000_000


class ContextLike(Protocol):
    """The slice of a deployment context the searchers read."""

    a_threshold: float
    t_budget: float
    s_budget: float
    lambda1: float
    lambda2: float


@dataclass(frozen=True, slots=True)
class Candidate:
    """A plan, the network it produces, and that network's metrics."""

    plan: CompressionPlan
    network: NetworkSpec
    report: PerfReport


@dataclass(frozen=True, slots=True)
class MutationConfig:
    """Channel-ratio perturbation settings for the candidate-widening step."""

    mutants_per_candidate: int = 2
    ratio_sigma_base: float = 0.1
    ratio_bounds: tuple[float, float] = (0.1, 1.0)
    seed: int = 0

    def violations(self) -> list[str]:
        v = []
        if self.mutants_per_candidate < 0:
            v.append("mutants_per_candidate must be >= 0")
        lo, hi = self.ratio_bounds
        if not 0.0 < lo <= hi <= 1.0:
            v.append(f"ratio_bounds {self.ratio_bounds} must be ordered within (0, 1]")
        if self.ratio_sigma_base < 0:
            v.append("ratio_sigma_base must be >= 0")
        return v


@dataclass(frozen=True, slots=True)
class SearchBudget:
    """Per-layer candidate cap, start layer, and optional wall-clock cap."""

    max_layer_evals: int = 6
    start_layer: int | None = None  # None: the second compressible conv layer
    wall_clock_cap: float | None = None

    def violations(self) -> list[str]:
        v = []
        if self.max_layer_evals < 1:
            v.append("max_layer_evals must be >= 1")
        if self.wall_clock_cap is not None and self.wall_clock_cap <= 0:
            v.append("wall_clock_cap must be positive when set")
        return v


@dataclass(frozen=True, slots=True)
class SearchResult:
    """Outcome of one search run, feasible or not."""

    optimizer: str
    plan: CompressionPlan
    report: PerfReport
    feasible: bool
    violated: tuple[str, ...]
    evaluations: int
    wall_time_seconds: float
    catalog: OperatorCatalog
    survivors: tuple[tuple[int, int], ...] = ()
    encodings_enumerated: int | None = None

    @property
    def encoding(self) -> str:
        return encode(self.plan).serialize()

    def to_dict(self, include_wall_time: bool = True) -> dict:
        r = self.report
        return {
            "optimizer": self.optimizer,
            "encoding": self.encoding,
            "plan": [
                {
                    "layer": layer,
                    "group_id": gid,
                    "label": self.catalog.group(gid).label,
                }
                for layer, gid in self.plan.assignments
            ],
            "report": {
                "A": r.accuracy,
                "A_loss": r.accuracy_loss,
                "T": r.latency,
                "C": r.macs,
                "S_p": r.params,
                "S_a": r.activations,
                "CSp_ratio": r.param_intensity,
                "CSa_ratio": r.activation_intensity,
                "E": r.energy_proxy,
                "En": r.energy_cost,
            },
            "evaluations": self.evaluations,
            "encodings_enumerated": self.encodings_enumerated,
            "wall_time_seconds": self.wall_time_seconds if include_wall_time else 0.0,
            "feasible": self.feasible,
            "violated": list(self.violated),
        }


def violated_constraints(report: PerfReport, context: ContextLike) -> list[str]:
    out = []
    if report.accuracy_loss > context.a_threshold:
        out.append(ACCURACY_CONSTRAINT)
    if report.latency > context.t_budget:
        out.append(LATENCY_CONSTRAINT)
    if report.memory_bytes > context.s_budget:
        out.append(MEMORY_CONSTRAINT)
    return out


# ---------------------------------------------------------------------------
# Pareto machinery
# ---------------------------------------------------------------------------

def dominates(p: tuple[float, float], q: tuple[float, float]) -> bool:
    """p dominates q: no worse accuracy loss, no worse energy proxy, one strict."""
    return p[0] <= q[0] and p[1] >= q[1] and (p[0] < q[0] or p[1] > q[1])


def pareto_indices(points: Sequence[tuple[float, float]]) -> list[int]:
    """Indices of the non-dominated points; duplicates are all retained."""
    n = len(points)
    if n == 0:
        return []
    order = sorted(range(n), key=lambda i: (points[i][0], -points[i][1]))
    out: list[int] = []
    best_energy_before = float("-inf")  # max proxy among strictly smaller losses
    pos = 0
    while pos < n:
        loss = points[order[pos]][0]
        tier_end = pos
        tier_best = float("-inf")
        while tier_end < n and points[order[tier_end]][0] == loss:
            tier_best = max(tier_best, points[order[tier_end]][1])
            tier_end += 1
        if tier_best > best_energy_before:
            for i in range(pos, tier_end):
                if points[order[i]][1] == tier_best:
                    out.append(order[i])
        best_energy_before = max(best_energy_before, tier_best)
        pos = tier_end
    return sorted(out)


def pareto_front(points: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    pts = list(points)
    return [pts[i] for i in pareto_indices(pts)]


# ---------------------------------------------------------------------------
# shared evaluation engine
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class _LayerFrame:
    """The fixed state candidates at one layer extend: the prefix-applied
    network and the current slot of every surviving backbone layer."""

    prefix: tuple[tuple[int, int], ...]
    network: NetworkSpec
    position: dict[int, int]
    layer: int


@dataclass(frozen=True, slots=True)
class _CacheEntry:
    candidate: Candidate
    consumed: int
    delta: int


class _Evaluator:
    """Applies plans, queries the oracle, builds reports, counts evaluations.

    Owns the run's working catalog and working profile, which grow as
    mutation derives off-catalog channel ratios.
    """

    def __init__(self, backbone: NetworkSpec, catalog: OperatorCatalog,
                 profile: AccuracyProfile, device: DeviceProfile,
                 config: CostModelConfig):
        self.backbone = backbone
        self.catalog = catalog
        self.profile = profile
        self.device = device
        self.config = config
        self.evaluations = 0
        self._cache: dict[tuple[tuple[int, int], ...], _CacheEntry] = {}
        self._derived_ids: dict[tuple[int, int, float], int] = {}
        self._lookahead: dict[tuple[tuple[int, int], ...], bool] = {}
        self._base_groups = catalog.non_identity()

    def _finish(self, key: tuple[tuple[int, int], ...], net: NetworkSpec,
                consumed: int, delta: int) -> Candidate:
        plan = make_plan(self.backbone.name, key)
        accuracy = predict_accuracy(plan, self.profile)
        report = build_report(
            count_network(net), accuracy, self.backbone.base_accuracy,
            self.device, self.config,
        )
        cand = Candidate(plan=plan, network=net, report=report)
        self.evaluations += 1
        self._cache[key] = _CacheEntry(cand, consumed, delta)
        return cand

    def evaluate(self, assignments: Sequence[tuple[int, int]]) -> Candidate:
        key = tuple(assignments)
        hit = self._cache.get(key)
        if hit is not None:
            return hit.candidate
        net = apply_assignments(
            self.backbone, [(l, self.catalog.group(g)) for l, g in key]
        )
        return self._finish(key, net, 0, 0)

    def try_evaluate(self, assignments: Sequence[tuple[int, int]]) -> Candidate | None:
        try:
            return self.evaluate(assignments)
        except InvalidOperatorError:
            return None

    def extend(self, frame: _LayerFrame, group: OperatorGroup) -> Candidate | None:
        """Evaluate frame.prefix plus (frame.layer, group) with one group
        application on the prefix-applied network."""
        key = frame.prefix + ((frame.layer, group.id),)
        hit = self._cache.get(key)
        if hit is not None:
            return hit.candidate
        try:
            applied = apply_group_meta(frame.network, frame.position[frame.layer], group)
        except InvalidOperatorError:
            return None
        delta = len(applied.network.layers) - len(frame.network.layers)
        return self._finish(key, applied.network, applied.consumed, delta)

    def advance_frame(self, frame: _LayerFrame, group_id: int) -> _LayerFrame:
        """The frame for the next layer once (frame.layer, group_id) is fixed."""
        key = frame.prefix + ((frame.layer, group_id),)
        entry = self._cache[key]
        p = frame.position[frame.layer]
        return _LayerFrame(
            prefix=key,
            network=entry.candidate.network,
            position=advance_positions(frame.position, frame.layer, p,
                                       entry.consumed, entry.delta),
            layer=frame.layer,
        )

    def cost_completion_exists(self, frame: _LayerFrame, group_id: int,
                               next_layer: int, context: ContextLike) -> bool:
        """Exact lookahead for the penultimate layer: can some catalog group
        at ``next_layer`` (or none at all) bring the candidate's memory and
        latency within budget? Pure descriptor arithmetic, no oracle."""
        key = frame.prefix + ((frame.layer, group_id),)
        cached = self._lookahead.get(key)
        if cached is not None:
            return cached
        entry = self._cache[key]
        report = entry.candidate.report
        verdict = (report.memory_bytes <= context.s_budget + 1e-9
                   and report.latency <= context.t_budget + 1e-12)
        if not verdict:
            position = advance_positions(
                frame.position, frame.layer, frame.position[frame.layer],
                entry.consumed, entry.delta)
            net = entry.candidate.network
            for group in self._base_groups:
                try:
                    completed = apply_group_meta(net, position[next_layer], group).network
                except InvalidOperatorError:
                    continue
                cost = count_network(completed)
                if (cost.params * self.device.bytes_per_param <= context.s_budget + 1e-9
                        and latency(cost, self.device)[2] <= context.t_budget + 1e-12):
                    verdict = True
                    break
        self._lookahead[key] = verdict
        return verdict

    def derive_scaled_group(self, layer: int, base: OperatorGroup,
                            keep_ratio: float) -> OperatorGroup:
        """Register (or reuse) a derived group carrying a perturbed ratio."""
        cache_key = (layer, base.id, keep_ratio)
        known = self._derived_ids.get(cache_key)
        if known is not None:
            return self.catalog.group(known)
        members = tuple(
            channel_scale_operator(keep_ratio) if m.kind == CHANNEL_SCALE else m
            for m in base.members
        )
        base_ratio = base.scale_member.keep_ratio
        label = _label_for_members(members)
        self.catalog, group = self.catalog.extend(
            members, label, derived_from=base.id, base_keep_ratio=base_ratio
        )
        self.profile = oracle_mod.with_derived_entry(self.profile, layer, group)
        self._derived_ids[cache_key] = group.id
        return group


def _label_for_members(members: Sequence) -> str:
    parts = []
    for m in members:
        if m.kind == FIRE:
            parts.append("fire")
        elif m.kind == CHANNEL_SCALE:
            parts.append(f"scale({m.keep_ratio * 100:g}%)")
        elif m.kind == LOWRANK:
            parts.append(f"lowrank({m.rank_divisor})")
        elif m.kind == DEPTH_SKIP:
            parts.append(f"skip({m.skip_depth})")
    return "+".join(parts)


# ---------------------------------------------------------------------------
# selection and mutation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class _Scored:
    group: OperatorGroup
    candidate: Candidate

    def point(self) -> tuple[float, float]:
        return self.candidate.report.accuracy_loss, self.candidate.report.energy_proxy


def pick_two(front: Sequence[_Scored], lambda1: float, lambda2: float,
             config: CostModelConfig = DEFAULT_CONFIG) -> tuple[_Scored, _Scored]:
    """The two best-scoring front members; ties go to lower accuracy loss,
    then lower group id. A singleton front is returned doubled."""
    if not front:
        raise NoFeasibleCandidateError("empty Pareto front")
    ranked = sorted(
        front,
        key=lambda s: (
            objective_score(s.candidate.report, lambda1, lambda2, config),
            s.candidate.report.accuracy_loss,
            s.group.id,
        ),
    )
    if len(ranked) == 1:
        return ranked[0], ranked[0]
    return ranked[0], ranked[1]


def _scale_target_width(backbone_layer, group: OperatorGroup) -> int:
    """Output width the group's channel_scale member actually rescales."""
    coarse = group.coarse
    if coarse is not None and coarse.kind == FIRE:
        return max(1, _half_up(coarse.squeeze_ratio * backbone_layer.out_channels))
    return backbone_layer.out_channels


def mutate(picked: Sequence[_Scored], frame: _LayerFrame,
           importance: ImportanceRanking, config: MutationConfig,
           evaluator: _Evaluator) -> list[_Scored]:
    """Widen two picks to (at most) six candidates.

    Candidates whose group carries a channel_scale member get Gaussian ratio
    perturbations (sigma scaled by the layer's trained noise magnitude, then
    clamped and re-rounded to the target's channel grid); others toggle to a
    catalog group identical up to the channel_scale member, if one exists.
    Originals always survive into the pool.
    """
    bad = config.violations()
    if bad:
        raise SpecValidationError(bad)
    layer = frame.layer
    pool: list[_Scored] = list(picked)
    backbone_layer = evaluator.backbone.layers[layer]
    lo, hi = config.ratio_bounds
    for slot, scored in enumerate(picked):
        adjacent = evaluator.catalog.adjacent_scale_variants(scored.group)
        for m in range(config.mutants_per_candidate):
            scale = scored.group.scale_member
            if scale is not None:
                rng = random.Random(f"{config.seed}/{layer}/{slot}/{m}")
                sigma = config.ratio_sigma_base * importance.noise_magnitude(layer)
                ratio = min(hi, max(lo, scale.keep_ratio + rng.gauss(0.0, sigma)))
                width = _scale_target_width(backbone_layer, scored.group)
                ratio = max(1, _half_up(ratio * width)) / width
                if abs(ratio - scale.keep_ratio) < 1e-12:
                    pool.append(scored)
                    continue
                group = evaluator.derive_scaled_group(layer, scored.group, ratio)
            elif adjacent:
                group = adjacent[m % len(adjacent)]
            else:
                pool.append(scored)
                continue
            cand = evaluator.extend(frame, group)
            pool.append(_Scored(group, cand) if cand is not None else scored)
    return pool


# ---------------------------------------------------------------------------
# the layer-sequential Pareto search
# ---------------------------------------------------------------------------

def _start_rank(backbone: NetworkSpec, budget: SearchBudget) -> int:
    compressible = backbone.compressible_indices()
    if budget.start_layer is None:
        return 1 if len(compressible) > 1 else 0
    for rank, layer in enumerate(compressible):
        if layer >= budget.start_layer:
            return rank
    return len(compressible)


def _suffix_headroom(backbone: NetworkSpec, catalog: OperatorCatalog,
                     visited: Sequence[int], device: DeviceProfile,
                     ) -> dict[int, tuple[float, float]]:
    """Optimistic (memory bytes, latency seconds) still removable after each
    visited layer is fixed.

    Per layer, the largest whole-model reduction any single catalog group
    achieves on the untouched backbone; suffix-summed. Prefix compression
    only shrinks what later groups work on, so the backbone-based figure
    never understates what remains achievable. Pure descriptor arithmetic:
    no accuracy queries, hence not counted as candidate evaluations.
    """
    base = count_network(backbone)
    base_bytes = base.params * device.bytes_per_param
    base_latency = latency(base, device)[2]
    reductions: dict[int, tuple[float, float]] = {}
    for layer in visited:
        best_bytes, best_latency = 0.0, 0.0
        for group in catalog.non_identity():
            try:
                candidate = apply_group_meta(backbone, layer, group).network
            except InvalidOperatorError:
                continue
            cost = count_network(candidate)
            best_bytes = max(best_bytes,
                             base_bytes - cost.params * device.bytes_per_param)
            best_latency = max(best_latency, base_latency - latency(cost, device)[2])
        reductions[layer] = (best_bytes, best_latency)
    headroom: dict[int, tuple[float, float]] = {}
    acc_bytes = acc_latency = 0.0
    for layer in reversed(visited):
        headroom[layer] = (acc_bytes, acc_latency)
        acc_bytes += reductions[layer][0]
        acc_latency += reductions[layer][1]
    return headroom


def _within_reach(report: PerfReport, context: ContextLike,
                  headroom: tuple[float, float]) -> bool:
    """Candidate validity beyond the accuracy band: budgets must still be
    reachable given the best the remaining layers could ever remove."""
    free_bytes, free_latency = headroom
    return (report.memory_bytes - free_bytes <= context.s_budget + 1e-9
            and report.latency - free_latency <= context.t_budget + 1e-12)


class _BestTracker:
    """Least-violating, then best-scoring candidate seen so far."""

    def __init__(self, context: ContextLike, config: CostModelConfig):
        self.context = context
        self.config = config
        self.best: Candidate | None = None
        self.best_key: tuple | None = None

    def offer(self, cand: Candidate) -> list[str]:
        violated = violated_constraints(cand.report, self.context)
        key = (
            len(violated),
            objective_score(cand.report, self.context.lambda1,
                            self.context.lambda2, self.config),
            cand.report.accuracy_loss,
            cand.plan.assignments,
        )
        if self.best_key is None or key < self.best_key:
            self.best, self.best_key = cand, key
        return violated


def runtime3c(backbone: NetworkSpec, catalog: OperatorCatalog,
              profile: AccuracyProfile, device: DeviceProfile,
              context: ContextLike, budget: SearchBudget = SearchBudget(),
              mutation: MutationConfig = MutationConfig(),
              config: CostModelConfig = DEFAULT_CONFIG) -> SearchResult:
    """Layer-sequential Pareto-decision search under a deployment context.

    Per visited layer: evaluate each applicable group appended to the fixed
    prefix; keep candidates within the accuracy-loss band whose budgets are
    still reachable (shedding them would take more than the remaining layers
    could ever remove); take the Pareto front of (accuracy loss, energy
    proxy); pick two compromises; mutate to six; fix the best survivor; and
    stop once the whole model fits all budgets.

    The engine carries no weight tensors: "evolving" a fixed layer's weights
    amounts to selecting the accuracy-profile entry of its chosen group, the
    profile being the stand-in for pre-trained per-variant weights.
    """
    _validate_search_inputs(backbone, catalog, profile, budget, mutation)
    started = time.perf_counter()
    evaluator = _Evaluator(backbone, catalog, profile, device, config)
    tracker = _BestTracker(context, config)
    importance = profile.importance

    survivors: list[tuple[int, int]] = []
    baseline = evaluator.evaluate(())
    violated = tracker.offer(baseline)
    if not violated:
        return _result("runtime3c", baseline, True, (), evaluator, started, survivors)

    base_groups = catalog.non_identity()  # the working catalog grows; base stays
    frame = _LayerFrame(
        prefix=(), network=backbone,
        position={i: i for i in range(len(backbone.layers))}, layer=0,
    )
    visited = backbone.compressible_indices()[_start_rank(backbone, budget):]
    headroom = _suffix_headroom(backbone, catalog, visited, device)
    for rank, layer in enumerate(visited):
        if (budget.wall_clock_cap is not None
                and time.perf_counter() - started > budget.wall_clock_cap):
            break
        frame = _LayerFrame(prefix=frame.prefix, network=frame.network,
                            position=frame.position, layer=layer)
        remaining = visited[rank + 1:]

        def _valid(cand: Candidate) -> bool:
            if cand.report.accuracy_loss > context.a_threshold:
                return False
            if not _within_reach(cand.report, context, headroom[layer]):
                return False
            if len(remaining) == 1:
                # one layer left: the optimistic bound gives way to an exact
                # cost-only completion check
                gid = cand.plan.assignments[-1][1]
                return evaluator.cost_completion_exists(frame, gid, remaining[0], context)
            return True

        front_pool: list[_Scored] = []
        for group in base_groups:
            cand = evaluator.extend(frame, group)
            if cand is None:
                continue
            tracker.offer(cand)
            if _valid(cand):
                front_pool.append(_Scored(group, cand))
        if not front_pool:
            continue  # leave this layer uncompressed
        front = [front_pool[i] for i in pareto_indices([s.point() for s in front_pool])]
        picked = pick_two(front, context.lambda1, context.lambda2, config)
        pool = mutate(picked, frame, importance, mutation, evaluator)
        pool = pool[:budget.max_layer_evals]
        valid = [s for s in pool if _valid(s.candidate)]
        survivor = min(
            valid or list(picked),
            key=lambda s: (
                objective_score(s.candidate.report, context.lambda1,
                                context.lambda2, config),
                s.candidate.report.accuracy_loss,
                s.group.id,
            ),
        )
        frame = evaluator.advance_frame(frame, survivor.group.id)
        survivors.append((layer, survivor.group.id))
        violated = tracker.offer(survivor.candidate)
        if not violated:
            return _result("runtime3c", survivor.candidate, True, (), evaluator,
                           started, survivors)

    best = tracker.best
    violated = violated_constraints(best.report, context)
    return _result("runtime3c", best, not violated, tuple(violated), evaluator,
                   started, survivors)


def _result(name: str, cand: Candidate, feasible: bool, violated: tuple[str, ...],
            evaluator: _Evaluator, started: float,
            survivors: Sequence[tuple[int, int]] = (),
            encodings: int | None = None) -> SearchResult:
    return SearchResult(
        optimizer=name,
        plan=cand.plan,
        report=cand.report,
        feasible=feasible,
        violated=violated,
        evaluations=evaluator.evaluations,
        wall_time_seconds=time.perf_counter() - started,
        catalog=evaluator.catalog,
        survivors=tuple(survivors),
        encodings_enumerated=encodings,
    )


def _validate_search_inputs(backbone: NetworkSpec, catalog: OperatorCatalog,
                            profile: AccuracyProfile, budget: SearchBudget,
                            mutation: MutationConfig | None = None) -> None:
    bad = catalog.violations() + budget.violations()
    if mutation is not None:
        bad += mutation.violations()
    bad += validate_profile(profile, backbone, catalog)
    if bad:
        raise SpecValidationError(bad)


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

def exhaustive_search(backbone: NetworkSpec, catalog: OperatorCatalog,
                      profile: AccuracyProfile, device: DeviceProfile,
                      context: ContextLike, cap: int = DEFAULT_EXHAUSTIVE_CAP,
                      config: CostModelConfig = DEFAULT_CONFIG) -> SearchResult:
    """Walk the whole classic (mask x group-choice) space; global optimum of
    the objective among constraint-satisfying plans. Test oracle material."""
    _validate_search_inputs(backbone, catalog, profile, SearchBudget())
    started = time.perf_counter()
    layers = backbone.compressible_indices()
    n, m = len(layers), catalog.size
    classic = (2 ** n) * (m ** n)
    if classic > cap:
        raise SearchSpaceTooLargeError(
            f"classic space {classic} exceeds cap {cap}; refuse to enumerate"
        )
    evaluator = _Evaluator(backbone, catalog, profile, device, config)
    tracker = _BestTracker(context, config)
    best_feasible: Candidate | None = None
    best_key: tuple | None = None
    seen: set[tuple[tuple[int, int], ...]] = set()
    for mask in product((0, 1), repeat=n):
        choice_iter = product(range(1, m + 1), repeat=n) if m else iter([(0,) * n])
        for choice in choice_iter:
            assignments = tuple(
                (layer, gid) for layer, bit, gid in zip(layers, mask, choice)
                if bit and gid
            )
            if assignments in seen:
                continue
            seen.add(assignments)
            cand = evaluator.try_evaluate(assignments)
            if cand is None:
                continue
            violated = tracker.offer(cand)
            if violated:
                continue
            key = (
                objective_score(cand.report, context.lambda1, context.lambda2, config),
                cand.report.accuracy_loss,
                len(assignments),
                assignments,
            )
            if best_key is None or key < best_key:
                best_feasible, best_key = cand, key
    if best_feasible is not None:
        return _result("exhaustive", best_feasible, True, (), evaluator, started,
                       encodings=classic)
    best = tracker.best
    violated = tuple(violated_constraints(best.report, context))
    return _result("exhaustive", best, False, violated, evaluator, started,
                   encodings=classic)


def rescale_search(backbone: NetworkSpec, base_plan: CompressionPlan,
                   catalog: OperatorCatalog, profile: AccuracyProfile,
                   device: DeviceProfile, context: ContextLike,
                   cap: int = DEFAULT_EXHAUSTIVE_CAP,
                   config: CostModelConfig = DEFAULT_CONFIG) -> SearchResult:
    """Re-run mode of the exhaustive baseline: operator kinds stay fixed and
    only catalog keep-ratio variants of each chosen group are swept."""
    _validate_search_inputs(backbone, catalog, profile, SearchBudget())
    started = time.perf_counter()
    variant_sets = []
    for layer, gid in base_plan.assignments:
        group = catalog.group(gid)
        variants = [group] + catalog.adjacent_scale_variants(group)
        variant_sets.append([(layer, g.id) for g in sorted(variants, key=lambda g: g.id)])
    total = 1
    for vs in variant_sets:
        total *= len(vs)
    if total > cap:
        raise SearchSpaceTooLargeError(f"rescale space {total} exceeds cap {cap}")
    evaluator = _Evaluator(backbone, catalog, profile, device, config)
    tracker = _BestTracker(context, config)
    best_feasible: Candidate | None = None
    best_key: tuple | None = None
    for combo in product(*variant_sets) if variant_sets else [()]:
        cand = evaluator.try_evaluate(tuple(combo))
        if cand is None:
            continue
        violated = tracker.offer(cand)
        if violated:
            continue
        key = (
            objective_score(cand.report, context.lambda1, context.lambda2, config),
            cand.report.accuracy_loss,
            combo,
        )
        if best_key is None or key < best_key:
            best_feasible, best_key = cand, key
    if best_feasible is not None:
        return _result("rescale", best_feasible, True, (), evaluator, started,
                       encodings=total)
    best = tracker.best
    violated = tuple(violated_constraints(best.report, context))
    return _result("rescale", best, False, violated, evaluator, started, encodings=total)


def greedy_search(backbone: NetworkSpec, catalog: OperatorCatalog,
                  profile: AccuracyProfile, device: DeviceProfile,
                  context: ContextLike,
                  config: CostModelConfig = DEFAULT_CONFIG) -> SearchResult:
    """Baseline: per layer, fix the group minimizing the fixed 50/50 tradeoff
    between log accuracy loss and log parameter size; no front, no mutation."""
    _validate_search_inputs(backbone, catalog, profile, SearchBudget())
    started = time.perf_counter()
    evaluator = _Evaluator(backbone, catalog, profile, device, config)
    tracker = _BestTracker(context, config)
    prefix: tuple[tuple[int, int], ...] = ()
    survivors: list[tuple[int, int]] = []

    baseline = evaluator.evaluate(prefix)
    violated = tracker.offer(baseline)
    if not violated:
        return _result("greedy", baseline, True, (), evaluator, started, survivors)

    for layer in backbone.compressible_indices():
        scored: list[tuple[tuple, _Scored]] = []
        for group in catalog.non_identity():
            cand = evaluator.try_evaluate(prefix + ((layer, group.id),))
            if cand is None:
                continue
            tracker.offer(cand)
            key = (
                0.5 * norm(cand.report.accuracy_loss, config)
                + 0.5 * norm(cand.report.params, config),
                cand.report.accuracy_loss,
                group.id,
            )
            scored.append((key, _Scored(group, cand)))
        if not scored:
            continue
        _, best_local = min(scored, key=lambda kv: kv[0])
        prefix = best_local.candidate.plan.assignments
        survivors.append((layer, best_local.group.id))
        violated = tracker.offer(best_local.candidate)
        if not violated:
            return _result("greedy", best_local.candidate, True, (), evaluator,
                           started, survivors)

    best = tracker.best
    violated = tuple(violated_constraints(best.report, context))
    return _result("greedy", best, not violated, violated, evaluator, started, survivors)
