"""Weight-level operator variants and the training that backs them.

Structural rewrites (fire merge, low-rank factorization) are initialized by
function-preserving (or best-approximating) parameter transformations of the
backbone weights; width and depth variants (channel pruning, layer skip) are
fine-tuned by distillation against the backbone. No variant ever retrains
from scratch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F
from torch.utils.data import DataLoader

from .backbone import BlockNet, StageInfo, evaluate

FIRE = "fire"
LOWRANK = "lowrank"
CHANNEL_SCALE = "channel_scale"
DEPTH_SKIP = "depth_skip"

PARAM_TRANSFORM = "param_transform"
DISTILLATION = "distillation"

FINE_TUNE_TRIGGER = 0.01  # fine-tune a transform variant only past this drop


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


class Factorized(nn.Module):
    """Rank-reduced kxk conv followed by a 1x1 projection, no activation
    in between, so the pair composes to one linear map."""

    def __init__(self, reduced: nn.Conv2d, project: nn.Conv2d):
        super().__init__()
        self.reduced = reduced
        self.project = project

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.project(self.reduced(x))


class FireBlock(nn.Module):
    """1x1 squeeze feeding 1x1 and kxk expand branches scattered back into
    the original output-channel order."""

    def __init__(self, squeeze: nn.Conv2d, expand1: nn.Conv2d | None,
                 expand3: nn.Conv2d | None, idx1: torch.Tensor, idx3: torch.Tensor,
                 out_channels: int):
        super().__init__()
        self.squeeze = squeeze
        self.expand1 = expand1
        self.expand3 = expand3
        self.register_buffer("idx1", idx1)
        self.register_buffer("idx3", idx3)
        self.out_channels = out_channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        squeezed = self.squeeze(x)
        parts = []
        if self.expand1 is not None:
            parts.append((self.idx1, self.expand1(squeezed)))
        if self.expand3 is not None:
            parts.append((self.idx3, self.expand3(squeezed)))
        ref = parts[0][1]
        out = ref.new_zeros((ref.shape[0], self.out_channels, *ref.shape[2:]))
        for idx, value in parts:
            out.index_copy_(1, idx, value)
        return out


# ---------------------------------------------------------------------------
# parameter transformations
# ---------------------------------------------------------------------------

@torch.no_grad()
def factorize_stage(conv: nn.Conv2d, info: StageInfo, rank_divisor: int,
                    out_channels: int | None = None,
                    ) -> tuple[Factorized, StageInfo, torch.Tensor]:
    """SVD split of W (N, M, k, k) into (rank, M, k, k) + (N, rank, 1, 1).

    Exact whenever rank >= matrix rank of W; optionally keeps only the
    highest-norm projection outputs (the lowrank+scale pairing).
    """
    n, m, k, _ = conv.weight.shape
    rank = max(1, m // rank_divisor)
    w_mat = conv.weight.reshape(n, m * k * k)
    u, s, vt = torch.linalg.svd(w_mat, full_matrices=False)
    rank = min(rank, s.numel())
    reduced = nn.Conv2d(m, rank, k, stride=conv.stride, padding=conv.padding, bias=False)
    reduced.weight.copy_((s[:rank, None] * vt[:rank]).reshape(rank, m, k, k))
    keep = n if out_channels is None else out_channels
    project = nn.Conv2d(rank, keep, 1, bias=conv.bias is not None)
    proj_weight = u[:, :rank]
    if keep < n:
        order = torch.argsort(proj_weight.abs().sum(dim=1), descending=True, stable=True)
        kept = torch.sort(order[:keep]).values
    else:
        kept = torch.arange(n)
    project.weight.copy_(proj_weight[kept].unsqueeze(-1).unsqueeze(-1))
    if conv.bias is not None:
        project.bias.copy_(conv.bias[kept])
    new_info = StageInfo(info.in_channels, keep, info.kernel, info.out_spatial,
                         info.stride)
    return Factorized(reduced, project), new_info, kept


@torch.no_grad()
def fire_stage(conv: nn.Conv2d, info: StageInfo, squeeze_ratio: float,
               expand_split: float, scale_keep: float | None = None,
               ) -> tuple[FireBlock, StageInfo]:
    """Best rank-s approximation over the input dimension: a 1x1 squeeze to
    s channels, then per-output-channel reconstruction; channels whose energy
    concentrates on the center tap go to the 1x1 expand branch."""
    n, m, k, _ = conv.weight.shape
    if n < 2:
        raise ValueError("fire needs at least 2 output channels")
    squeeze_width = _half_up(squeeze_ratio * n)
    if squeeze_width < 1:
        raise ValueError("squeeze width computes to 0")
    if scale_keep is not None:
        squeeze_width = max(1, _half_up(scale_keep * squeeze_width))
    e1 = min(n, max(0, _half_up(expand_split * n)))
    e3 = n - e1

    # rank-s decomposition across input channels
    b = conv.weight.permute(0, 2, 3, 1).reshape(n * k * k, m)
    u, s, vt = torch.linalg.svd(b, full_matrices=False)
    squeeze_width = min(squeeze_width, s.numel())
    squeeze = nn.Conv2d(m, squeeze_width, 1, bias=False)
    squeeze.weight.copy_(vt[:squeeze_width].reshape(squeeze_width, m, 1, 1))
    recon = (u[:, :squeeze_width] * s[:squeeze_width]).reshape(n, k, k, squeeze_width)

    center = k // 2
    energy = recon.pow(2).sum(dim=(1, 2, 3))
    center_energy = recon[:, center, center, :].pow(2).sum(dim=1)
    ratio = center_energy / energy.clamp_min(1e-12)
    order = torch.argsort(ratio, descending=True, stable=True)
    idx1 = torch.sort(order[:e1]).values
    idx3 = torch.sort(order[e1:]).values

    expand1 = expand3 = None
    if e1:
        expand1 = nn.Conv2d(squeeze_width, e1, 1, stride=conv.stride,
                            bias=conv.bias is not None)
        expand1.weight.copy_(recon[idx1, center, center, :].unsqueeze(-1).unsqueeze(-1))
        if conv.bias is not None:
            expand1.bias.copy_(conv.bias[idx1])
    if e3:
        expand3 = nn.Conv2d(squeeze_width, e3, k, stride=conv.stride,
                            padding=conv.padding, bias=conv.bias is not None)
        expand3.weight.copy_(recon[idx3].permute(0, 3, 1, 2))
        if conv.bias is not None:
            expand3.bias.copy_(conv.bias[idx3])
    block = FireBlock(squeeze, expand1, expand3, idx1, idx3, n)
    return block, StageInfo(m, n, k, info.out_spatial, info.stride)


@torch.no_grad()
def prune_filters(conv: nn.Conv2d, keep_ratio: float) -> tuple[nn.Conv2d, torch.Tensor]:
    """Keep the top-norm output filters (original order preserved)."""
    n = conv.out_channels
    keep = max(1, _half_up(keep_ratio * n))
    norms = conv.weight.abs().sum(dim=(1, 2, 3))
    order = torch.argsort(norms, descending=True, stable=True)
    kept = torch.sort(order[:keep]).values
    pruned = nn.Conv2d(conv.in_channels, keep, conv.kernel_size,
                       stride=conv.stride, padding=conv.padding,
                       bias=conv.bias is not None)
    pruned.weight.copy_(conv.weight[kept])
    if conv.bias is not None:
        pruned.bias.copy_(conv.bias[kept])
    return pruned, kept


@torch.no_grad()
def _slice_consumer(net: BlockNet, stage_index: int, kept: torch.Tensor) -> None:
    """Restrict whatever consumes stage_index's output to the kept channels."""
    if stage_index + 1 < len(net.stages):
        consumer = net.stages[stage_index + 1]
        if not isinstance(consumer, nn.Conv2d):
            raise ValueError("cannot rescale into a composite consumer")
        sliced = nn.Conv2d(kept.numel(), consumer.out_channels, consumer.kernel_size,
                           stride=consumer.stride, padding=consumer.padding,
                           bias=consumer.bias is not None)
        sliced.weight.copy_(consumer.weight[:, kept])
        if consumer.bias is not None:
            sliced.bias.copy_(consumer.bias)
        net.stages[stage_index + 1] = sliced
        net.infos[stage_index + 1] = StageInfo(
            kept.numel(), net.infos[stage_index + 1].out_channels,
            net.infos[stage_index + 1].kernel, net.infos[stage_index + 1].out_spatial,
            net.infos[stage_index + 1].stride)
    else:
        head = net.head
        sliced = nn.Linear(kept.numel(), head.out_features)
        with torch.no_grad():
            sliced.weight.copy_(head.weight[:, kept])
            sliced.bias.copy_(head.bias)
        net.head = sliced


# ---------------------------------------------------------------------------
# group application
# ---------------------------------------------------------------------------

def applicability(net: BlockNet, stage_index: int, members: list[dict]) -> str | None:
    """None when the group applies at the stage, else the reason it cannot."""
    if not 0 <= stage_index < len(net.stages):
        return "no such stage"
    info = net.infos[stage_index]
    kinds = [m["kind"] for m in members]
    coarse = next((m for m in members if m["kind"] in (FIRE, LOWRANK)), None)
    fine = next((m for m in members if m["kind"] in (CHANNEL_SCALE, DEPTH_SKIP)), None)
    if not isinstance(net.stages[stage_index], nn.Conv2d):
        return "stage already rewritten"
    if FIRE in kinds and info.out_channels < 2:
        return "fire needs at least two output channels"
    if fine is not None and fine["kind"] == DEPTH_SKIP:
        if coarse is None:
            if stage_index == 0:
                return "the frontmost conv stage must be preserved"
            if info.in_channels != info.out_channels:
                return "skip needs matching widths"
        elif coarse["kind"] == LOWRANK:
            # skipping the inserted projection leaves the reduced conv alone,
            # which only type-checks when its width already matches the output
            rank = max(1, info.in_channels // coarse["hyperparams"]["rank_divisor"])
            if rank != info.out_channels:
                return "projection width does not match for a skip"
        else:
            return "fire+skip pairing is not supported"
    return None


def apply_group(net: BlockNet, stage_index: int, members: list[dict]) -> BlockNet:
    """Pure application: returns a transformed clone of the network."""
    reason = applicability(net, stage_index, members)
    if reason:
        raise ValueError(reason)
    out = net.clone()
    conv = out.stages[stage_index]
    info = out.infos[stage_index]
    coarse = next((m for m in members if m["kind"] in (FIRE, LOWRANK)), None)
    fine = next((m for m in members if m["kind"] in (CHANNEL_SCALE, DEPTH_SKIP)), None)
    scale_keep = fine["hyperparams"]["keep_ratio"] \
        if fine and fine["kind"] == CHANNEL_SCALE else None

    if coarse is None:
        if fine["kind"] == CHANNEL_SCALE:
            pruned, kept = prune_filters(conv, scale_keep)
            out.stages[stage_index] = pruned
            out.infos[stage_index] = StageInfo(info.in_channels, kept.numel(),
                                               info.kernel, info.out_spatial, info.stride)
            _slice_consumer(out, stage_index, kept)
        else:
            del out.stages[stage_index]
            del out.infos[stage_index]
        return out

    if coarse["kind"] == FIRE:
        hp = coarse["hyperparams"]
        block, new_info = fire_stage(conv, info, hp["squeeze_ratio"],
                                     hp["expand_split"], scale_keep=scale_keep)
        out.stages[stage_index] = block
        out.infos[stage_index] = new_info
        return out

    hp = coarse["hyperparams"]
    if scale_keep is not None:
        target = max(1, _half_up(scale_keep * info.out_channels))
    else:
        target = None
    block, new_info, kept = factorize_stage(conv, info, hp["rank_divisor"],
                                            out_channels=target)
    if fine is not None and fine["kind"] == DEPTH_SKIP:
        # drop the inserted projection; applicability already checked widths
        out.stages[stage_index] = block.reduced
        out.infos[stage_index] = StageInfo(info.in_channels, info.out_channels,
                                           info.kernel, info.out_spatial, info.stride)
        return out
    out.stages[stage_index] = block
    out.infos[stage_index] = new_info
    if target is not None:
        _slice_consumer(out, stage_index, kept)
    return out


def apply_plan(net: BlockNet, assignments: list[tuple[int, list[dict]]]) -> BlockNet:
    """Apply (stage, members) pairs front to back; skips shift later stages."""
    current = net
    shift = 0
    for stage_index, members in sorted(assignments, key=lambda a: a[0]):
        before = len(current.stages)
        current = apply_group(current, stage_index + shift, members)
        shift += len(current.stages) - before
    return current


# ---------------------------------------------------------------------------
# variant training
# ---------------------------------------------------------------------------

@dataclass
class VariantRecord:
    layer: int
    group_id: int
    accuracy: float
    training_mode: str
    fine_tuned: bool


def tune(student: BlockNet, teacher: BlockNet | None, loader: DataLoader,
         epochs: int, seed: int, lr: float = 1e-3, hard_weight: float = 0.5,
         temperature: float = 4.0) -> None:
    """Distillation fine-tuning (plain supervised when teacher is None).

    Gradients are clipped to unit norm per batch to keep the ensemble of
    variant updates stable.
    """
    torch.manual_seed(seed)
    optimizer = torch.optim.Adam(student.parameters(), lr=lr)
    student.train()
    for _ in range(epochs):
        for images, labels in loader:
            optimizer.zero_grad()
            logits = student(images)
            loss = F.cross_entropy(logits, labels)
            if teacher is not None:
                with torch.no_grad():
                    target = teacher(images)
                soft = F.kl_div(
                    F.log_softmax(logits / temperature, dim=1),
                    F.softmax(target / temperature, dim=1),
                    reduction="batchmean",
                ) * temperature * temperature
                loss = hard_weight * loss + (1.0 - hard_weight) * soft
            loss.backward()
            nn.utils.clip_grad_norm_(student.parameters(), 1.0)
            optimizer.step()
    student.eval()


def build_variant(backbone: BlockNet, base_accuracy: float, stage_index: int,
                  group_id: int, members: list[dict], train_loader: DataLoader,
                  held_out: DataLoader, seed: int, tune_epochs: int = 1,
                  ) -> VariantRecord:
    """Transform, measure, and fine-tune one (layer, group) variant.

    Structural rewrites start from transformed backbone weights and are only
    fine-tuned when they fall more than one point behind the backbone; width
    and depth variants always distill against the backbone.
    """
    variant = apply_group(backbone, stage_index, members)
    coarse_only = all(m["kind"] in (FIRE, LOWRANK) for m in members)
    mode = PARAM_TRANSFORM if coarse_only else DISTILLATION
    accuracy = evaluate(variant, held_out)
    fine_tuned = False
    needs_tuning = (mode == DISTILLATION
                    or accuracy < base_accuracy - FINE_TUNE_TRIGGER)
    if needs_tuning and tune_epochs > 0:
        teacher = None if mode == PARAM_TRANSFORM else backbone
        tune(variant, teacher, train_loader, epochs=tune_epochs,
             seed=seed * 1009 + stage_index * 31 + group_id, hard_weight=1.0
             if teacher is None else 0.5)
        tuned_accuracy = evaluate(variant, held_out)
        if tuned_accuracy > accuracy:
            accuracy, fine_tuned = tuned_accuracy, True
    return VariantRecord(layer=stage_index, group_id=group_id,
                         accuracy=accuracy, training_mode=mode,
                         fine_tuned=fine_tuned)
