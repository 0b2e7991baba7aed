"""Accuracy prediction for compressed networks, replacing any forward pass.

A profile tabulates per-(layer, group) accuracy losses, optionally exact
whole-plan samples, and per-layer importance/noise figures. Plan accuracy
composes tabulated losses with a geometric interaction discount:

    A(plan) = base - sum_k loss_k * (1 - gamma)^(k-1)

clamped to [0, 1]; an exact whole-plan sample, when present, wins outright.
Profiles come from measurement (external trainer) or from the seeded
synthetic family below, which exists so the engine runs with no training
anywhere in sight.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, replace
from pathlib import Path

from . import encoding as enc
from .arch import NetworkSpec
from .errors import ProfileIncompleteError, SpecValidationError
from .operators import (
    CHANNEL_SCALE,
    DEPTH_SKIP,
    FIRE,
    CompressionOperator,
    OperatorCatalog,
    OperatorGroup,
    _half_up,
)

PROFILE_FORMAT_VERSION = 1

DEFAULT_INTERACTION_COEFF = 0.5
DEFAULT_RATIO_LOSS_SLOPE = 0.04

SYNTHETIC_RATIO_COEFF = 0.04      # a: loss per fraction of layer parameters dropped
SYNTHETIC_COARSE_PENALTY = 0.01   # b: flat surcharge for structural rewrites
SYNTHETIC_NOISE_SPAN = 0.005


@dataclass(frozen=True, slots=True)
class ImportanceRanking:
    """Per-layer (importance, mutation noise magnitude); both in [0, 1]."""

    per_layer: dict[int, tuple[float, float]]

    def noise_magnitude(self, layer: int, default: float = 0.5) -> float:
        entry = self.per_layer.get(layer)
        return entry[1] if entry else default

    def violations(self) -> list[str]:
        v = []
        for layer, (imp, noise) in self.per_layer.items():
            if not (math.isfinite(imp) and imp >= 0):
                v.append(f"importance for layer {layer} must be finite and nonnegative")
            if not (math.isfinite(noise) and noise >= 0):
                v.append(f"noise magnitude for layer {layer} must be finite and nonnegative")
        return v


@dataclass(frozen=True, slots=True)
class AccuracyProfile:
    """Tabulated accuracy behaviour of one backbone under one catalog."""

    backbone_name: str
    base_accuracy: float
    interaction_coeff: float
    entries: dict[tuple[int, int], float]          # (layer, group_id) -> loss
    whole_plan_samples: dict[str, float]           # serialized encoding -> accuracy
    importance: ImportanceRanking
    default_loss: float | None = None
    ratio_loss_slope: float = DEFAULT_RATIO_LOSS_SLOPE

    def lookup(self, layer: int, group_id: int) -> float:
        loss = self.entries.get((layer, group_id))
        if loss is not None:
            return loss
        if self.default_loss is not None:
            return self.default_loss
        raise ProfileIncompleteError(
            f"profile has no loss entry for layer {layer}, group {group_id}, and no default"
        )

    def violations(self) -> list[str]:
        v = []
        if not 0.0 < self.base_accuracy <= 1.0:
            v.append(f"base_accuracy {self.base_accuracy} outside (0, 1]")
        if not 0.0 <= self.interaction_coeff <= 1.0:
            v.append(f"interaction_coeff {self.interaction_coeff} outside [0, 1]")
        for (layer, gid), loss in self.entries.items():
            if not -0.1 <= loss <= 1.0:
                v.append(f"loss {loss} for layer {layer}, group {gid} outside [-0.1, 1]")
        for key, acc in self.whole_plan_samples.items():
            if not 0.0 <= acc <= 1.0:
                v.append(f"whole-plan sample {key!r} accuracy {acc} outside [0, 1]")
        v.extend(self.importance.violations())
        return v


def validate_profile(profile: AccuracyProfile, net: NetworkSpec,
                     catalog: OperatorCatalog) -> list[str]:
    """Load-time completeness check: every (compressible layer, group) pair
    must have an entry or the profile must declare a default loss."""
    v = profile.violations()
    if profile.backbone_name != net.name:
        v.append(f"profile targets {profile.backbone_name!r}, network is {net.name!r}")
    if profile.default_loss is None:
        for layer in net.compressible_indices():
            for g in catalog.non_identity():
                if (layer, g.id) not in profile.entries:
                    v.append(f"missing loss entry for layer {layer}, group {g.id}")
    return v


def predict_accuracy(plan: enc.CompressionPlan, profile: AccuracyProfile) -> float:
    """Predicted whole-model accuracy of a plan; deterministic."""
    key = enc.encode(plan).serialize()
    sample = profile.whole_plan_samples.get(key)
    if sample is not None:
        return sample
    total = profile.base_accuracy
    damp = 1.0 - profile.interaction_coeff
    for position, (layer, group_id) in enumerate(plan.assignments):
        total -= profile.lookup(layer, group_id) * damp ** position
    return min(1.0, max(0.0, total))


def with_derived_entry(profile: AccuracyProfile, layer: int, group: OperatorGroup) -> AccuracyProfile:
    """Extend a profile with a loss entry for a mutation-derived group.

    The derived loss follows the documented linear ratio rule
    ``loss_base + ratio_loss_slope * (base_ratio - new_ratio)``.
    """
    if group.derived_from is None or group.base_keep_ratio is None:
        raise SpecValidationError(f"group {group.id} is not mutation-derived")
    scale = group.scale_member
    if scale is None:
        raise SpecValidationError(f"derived group {group.id} carries no channel_scale member")
    base_loss = profile.lookup(layer, group.derived_from)
    derived = base_loss + profile.ratio_loss_slope * (group.base_keep_ratio - scale.keep_ratio)
    entries = dict(profile.entries)
    entries[(layer, group.id)] = max(-0.1, min(1.0, derived))
    return replace(profile, entries=entries)


# ---------------------------------------------------------------------------
# seeded synthetic profiles
# ---------------------------------------------------------------------------

def _member_kept_fraction(layer_in: int, layer_out: int, kernel: int,
                          member: CompressionOperator) -> float:
    """Fraction of the target layer's parameters a member leaves behind."""
    original = layer_in * layer_out * kernel * kernel
    if member.kind == CHANNEL_SCALE:
        return member.keep_ratio
    if member.kind == DEPTH_SKIP:
        return 0.0
    if member.kind == FIRE:
        squeeze = max(1, _half_up(member.squeeze_ratio * layer_out))
        e1 = min(layer_out, max(0, _half_up(member.expand_split * layer_out)))
        e3 = layer_out - e1
        kept = (layer_in * squeeze + squeeze * (e1 + 9 * e3)) / original
        return min(1.0, kept)
    # lowrank
    rank = max(1, layer_in // member.rank_divisor)
    kept = (layer_in * rank * kernel * kernel + rank * layer_out) / original
    return min(1.0, kept)


def _group_kept_fraction(layer_in: int, layer_out: int, kernel: int,
                         group: OperatorGroup) -> float:
    kept = 1.0
    for member in group.members:
        kept *= _member_kept_fraction(layer_in, layer_out, kernel, member)
    return min(1.0, max(0.0, kept))


def synthetic_profile(net: NetworkSpec, catalog: OperatorCatalog, seed: int,
                      interaction_coeff: float = DEFAULT_INTERACTION_COEFF) -> AccuracyProfile:
    """Deterministic parametric profile standing in for measurements.

    Per entry: ``loss = d * (a*(1-kept) + b*[has coarse member] + noise)``
    where ``kept`` is the fraction of target-layer parameters the group
    retains, ``noise`` is uniform in [0, 0.005] seeded per (layer, group),
    and ``d`` scales down linearly with layer depth so early layers (which
    carry the input detail) cost more to touch.
    """
    compressible = net.compressible_indices()
    n = len(compressible)
    entries: dict[tuple[int, int], float] = {}
    importance: dict[int, tuple[float, float]] = {}
    for rank, layer_index in enumerate(compressible):
        depth_scale = (n - rank) / n
        importance[layer_index] = (depth_scale, 1.0 - 0.75 * depth_scale)
        layer = net.layers[layer_index]
        for group in catalog.non_identity():
            kept = _group_kept_fraction(layer.in_channels, layer.out_channels,
                                        layer.kernel, group)
            rng = random.Random(f"{seed}/{layer_index}/{group.id}")
            noise = rng.uniform(0.0, SYNTHETIC_NOISE_SPAN)
            loss = depth_scale * (
                SYNTHETIC_RATIO_COEFF * (1.0 - kept)
                + SYNTHETIC_COARSE_PENALTY * (1 if group.coarse else 0)
                + noise
            )
            entries[(layer_index, group.id)] = loss
    return AccuracyProfile(
        backbone_name=net.name,
        base_accuracy=net.base_accuracy,
        interaction_coeff=interaction_coeff,
        entries=entries,
        whole_plan_samples={},
        importance=ImportanceRanking(per_layer=importance),
        default_loss=None,
        ratio_loss_slope=SYNTHETIC_RATIO_COEFF,
    )


# ---------------------------------------------------------------------------
# profile file format (JSON)
# ---------------------------------------------------------------------------

def profile_to_dict(profile: AccuracyProfile) -> dict:
    return {
        "format_version": PROFILE_FORMAT_VERSION,
        "backbone_name": profile.backbone_name,
        "base_accuracy": profile.base_accuracy,
        "interaction_coeff": profile.interaction_coeff,
        "entries": [
            {"layer": layer, "group_id": gid, "loss": loss}
            for (layer, gid), loss in sorted(profile.entries.items())
        ],
        "whole_plan_samples": [
            {"encoding": key, "accuracy": acc}
            for key, acc in sorted(profile.whole_plan_samples.items())
        ],
        "importance": [
            {"layer": layer, "importance": imp, "noise_magnitude": noise}
            for layer, (imp, noise) in sorted(profile.importance.per_layer.items())
        ],
        "default_loss": profile.default_loss,
        "ratio_loss_slope": profile.ratio_loss_slope,
    }


def profile_from_dict(doc: dict) -> AccuracyProfile:
    try:
        version = doc.get("format_version", PROFILE_FORMAT_VERSION)
        if version != PROFILE_FORMAT_VERSION:
            raise SpecValidationError(f"unsupported profile format_version {version}")
        entries = {
            (int(e["layer"]), int(e["group_id"])): float(e["loss"])
            for e in doc.get("entries", [])
        }
        samples = {
            str(s["encoding"]): float(s["accuracy"])
            for s in doc.get("whole_plan_samples", [])
        }
        importance = ImportanceRanking(per_layer={
            int(i["layer"]): (float(i["importance"]), float(i["noise_magnitude"]))
            for i in doc.get("importance", [])
        })
        default_loss = doc.get("default_loss")
        profile = AccuracyProfile(
            backbone_name=str(doc["backbone_name"]),
            base_accuracy=float(doc["base_accuracy"]),
            interaction_coeff=float(doc.get("interaction_coeff", DEFAULT_INTERACTION_COEFF)),
            entries=entries,
            whole_plan_samples=samples,
            importance=importance,
            default_loss=None if default_loss is None else float(default_loss),
            ratio_loss_slope=float(doc.get("ratio_loss_slope", DEFAULT_RATIO_LOSS_SLOPE)),
        )
    except SpecValidationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecValidationError(f"malformed accuracy profile: {exc}") from exc
    bad = profile.violations()
    if bad:
        raise SpecValidationError(bad)
    return profile


def load_profile(path: str | Path) -> AccuracyProfile:
    with open(path, "r", encoding="utf-8") as fh:
        return profile_from_dict(json.load(fh))


def save_profile(profile: AccuracyProfile, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profile_to_dict(profile), fh, indent=2, sort_keys=True)
        fh.write("\n")
