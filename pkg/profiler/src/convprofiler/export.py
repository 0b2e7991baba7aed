"""The file contract with the compression engine.

This package never imports the engine; it writes the documented JSON formats
(accuracy profile, backbone descriptor) directly. The stock operator catalog
is mirrored here so (layer, group) entries use the same dense ids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .variants import VariantRecord

PROFILE_FORMAT_VERSION = 1
INTERACTION_COEFF = 0.5
RATIO_LOSS_SLOPE = 0.04
UNMEASURED_LOSS = 1.0  # prohibitive default for pairs skipped as inapplicable


def _member(kind: str, **hyperparams) -> dict:
    return {"kind": kind, "hyperparams": hyperparams}


# mirrors the engine's stock nine-group catalog, id for id
STOCK_CATALOG: list[dict] = [
    {"id": 1, "label": "fire",
     "members": [_member("fire", squeeze_ratio=0.125, expand_split=0.5)]},
    {"id": 2, "label": "lowrank(12)", "members": [_member("lowrank", rank_divisor=12)]},
    {"id": 3, "label": "lowrank(6)", "members": [_member("lowrank", rank_divisor=6)]},
    {"id": 4, "label": "scale(50%)", "members": [_member("channel_scale", keep_ratio=0.5)]},
    {"id": 5, "label": "scale(75%)", "members": [_member("channel_scale", keep_ratio=0.75)]},
    {"id": 6, "label": "skip(1)", "members": [_member("depth_skip", skip_depth=1)]},
    {"id": 7, "label": "fire+scale(50%)",
     "members": [_member("fire", squeeze_ratio=0.125, expand_split=0.5),
                 _member("channel_scale", keep_ratio=0.5)]},
    {"id": 8, "label": "lowrank(12)+skip(1)",
     "members": [_member("lowrank", rank_divisor=12),
                 _member("depth_skip", skip_depth=1)]},
    {"id": 9, "label": "lowrank(12)+scale(65%)",
     "members": [_member("lowrank", rank_divisor=12),
                 _member("channel_scale", keep_ratio=0.65)]},
]


def load_catalog(path: str | Path | None) -> list[dict]:
    if path is None:
        return STOCK_CATALOG
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return [g for g in doc["groups"] if g.get("members")]


@dataclass
class SkippedVariant:
    layer: int
    group_id: int
    reason: str


def encode_plan(assignments: list[tuple[int, int]]) -> str:
    """The engine's progressive encoding: count digit, then group ids in
    layer order, comma separated."""
    ordered = sorted(assignments)
    return ",".join(str(d) for d in [len(ordered), *(g for _, g in ordered)])


def profile_document(backbone_name: str, base_accuracy: float,
                     records: list[VariantRecord], skips: list[SkippedVariant],
                     ranking: dict[int, tuple[float, float]],
                     samples: dict[str, float], layers: list[int],
                     catalog: list[dict]) -> dict:
    """Assemble the accuracy-profile document; refuses uncovered pairs."""
    seen = {(r.layer, r.group_id) for r in records}
    seen |= {(s.layer, s.group_id) for s in skips}
    for layer in layers:
        for group in catalog:
            if (layer, group["id"]) not in seen:
                raise ValueError(
                    f"no record or skip for layer {layer}, group {group['id']}"
                )
    entries = [
        {"layer": r.layer, "group_id": r.group_id,
         "loss": max(-0.1, min(1.0, base_accuracy - r.accuracy))}
        for r in sorted(records, key=lambda r: (r.layer, r.group_id))
    ]
    return {
        "format_version": PROFILE_FORMAT_VERSION,
        "backbone_name": backbone_name,
        "base_accuracy": base_accuracy,
        "interaction_coeff": INTERACTION_COEFF,
        "entries": entries,
        "whole_plan_samples": [
            {"encoding": key, "accuracy": acc} for key, acc in sorted(samples.items())
        ],
        "importance": [
            {"layer": layer, "importance": imp, "noise_magnitude": noise}
            for layer, (imp, noise) in sorted(ranking.items())
        ],
        "default_loss": UNMEASURED_LOSS,
        "ratio_loss_slope": RATIO_LOSS_SLOPE,
    }


def write_json(doc: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def training_log_document(records: list[VariantRecord],
                          skips: list[SkippedVariant]) -> dict:
    """Side log of how each variant was obtained (not read by the engine)."""
    return {
        "variants": [
            {"layer": r.layer, "group_id": r.group_id, "accuracy": r.accuracy,
             "training_mode": r.training_mode, "fine_tuned": r.fine_tuned}
            for r in sorted(records, key=lambda r: (r.layer, r.group_id))
        ],
        "skipped": [
            {"layer": s.layer, "group_id": s.group_id, "reason": s.reason}
            for s in sorted(skips, key=lambda s: (s.layer, s.group_id))
        ],
    }
