"""End-to-end profiling run: train, transform, measure, export."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from . import export as ex
from .backbone import (
    BACKBONE_NAME,
    BlockNet,
    build_backbone,
    descriptor_document,
    evaluate,
    train_backbone,
)
from .dataset import make_loaders
from .importance import filter_norm_importance
from .variants import VariantRecord, applicability, apply_plan, build_variant

# plans measured whole (front-to-back over consecutive stages) so the engine
# can bypass compositional estimates with exact samples
SAMPLE_PLANS: list[list[tuple[int, int]]] = [
    [(0, 4), (1, 4)],
    [(0, 5), (1, 5), (2, 5)],
    [(1, 2), (2, 4)],
    [(0, 4), (1, 1)],
]


@dataclass
class ProfilerRun:
    backbone_document: dict
    profile_document: dict
    training_log: dict
    base_accuracy: float
    records: list[VariantRecord] = field(default_factory=list)


def run_profiler(dataset_dir: str | None, epochs: int, seed: int,
                 tune_epochs: int = 1, catalog_path: str | None = None,
                 train_size: int = 2688, test_size: int = 576,
                 ) -> ProfilerRun:
    train_loader, held_out, classes = make_loaders(
        dataset_dir, seed=seed, train_size=train_size, test_size=test_size)
    net = build_backbone(classes, seed=seed)
    base_accuracy = train_backbone(net, train_loader, held_out,
                                   epochs=epochs, seed=seed)
    net.eval()

    catalog = ex.load_catalog(catalog_path)
    members_by_id = {g["id"]: g["members"] for g in catalog}
    layers = list(range(len(net.stages)))

    records: list[VariantRecord] = []
    skips: list[ex.SkippedVariant] = []
    for layer in layers:
        for group in catalog:
            reason = applicability(net, layer, group["members"])
            if reason:
                skips.append(ex.SkippedVariant(layer, group["id"], reason))
                continue
            records.append(build_variant(
                net, base_accuracy, layer, group["id"], group["members"],
                train_loader, held_out, seed=seed, tune_epochs=tune_epochs,
            ))

    samples: dict[str, float] = {}
    for plan in SAMPLE_PLANS:
        if any(applicability(net, layer, members_by_id[g]) for layer, g in plan):
            continue
        composed = apply_plan(net, [(l, members_by_id[g]) for l, g in plan])
        samples[ex.encode_plan(plan)] = evaluate(composed, held_out)

    ranking = filter_norm_importance(net)
    profile = ex.profile_document(
        BACKBONE_NAME, base_accuracy, records, skips, ranking, samples,
        layers, catalog,
    )
    return ProfilerRun(
        backbone_document=descriptor_document(net, classes, base_accuracy),
        profile_document=profile,
        training_log=ex.training_log_document(records, skips),
        base_accuracy=base_accuracy,
        records=records,
    )


def write_run(run: ProfilerRun, out: str | Path,
              backbone_out: str | Path | None = None,
              log_out: str | Path | None = None) -> None:
    ex.write_json(run.profile_document, out)
    if backbone_out:
        ex.write_json(run.backbone_document, backbone_out)
    if log_out:
        ex.write_json(run.training_log, log_out)
