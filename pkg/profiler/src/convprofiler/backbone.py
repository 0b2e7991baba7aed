"""The toy backbone: five plain conv stages, global pooling, linear head.

Stages carry no batch norm and composite stages keep no activation between
their sub-convolutions, so weight-level transforms can preserve the network
function exactly where the algebra allows it.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import torch
from torch import nn
from torch.utils.data import DataLoader

BACKBONE_NAME = "toy5"

# (in_channels, out_channels, kernel, out_spatial, stride), input 3x32x32
STAGE_SHAPES = [
    (3, 16, 3, 32, 1),
    (16, 32, 3, 16, 2),
    (32, 32, 3, 16, 1),
    (32, 64, 3, 8, 2),
    (64, 64, 3, 8, 1),
]


@dataclass
class StageInfo:
    in_channels: int
    out_channels: int
    kernel: int
    out_spatial: int
    stride: int


class BlockNet(nn.Module):
    """A list of conv stages (ReLU after each) feeding GAP + linear head."""

    def __init__(self, stages: list[nn.Module], infos: list[StageInfo],
                 head: nn.Linear):
        super().__init__()
        self.stages = nn.ModuleList(stages)
        self.infos = list(infos)
        self.head = head

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for stage in self.stages:
            x = torch.relu(stage(x))
        x = x.mean(dim=(2, 3))
        return self.head(x)

    def clone(self) -> "BlockNet":
        return copy.deepcopy(self)


def build_backbone(num_classes: int, seed: int) -> BlockNet:
    torch.manual_seed(seed)
    stages, infos = [], []
    for in_c, out_c, k, spatial, stride in STAGE_SHAPES:
        stages.append(nn.Conv2d(in_c, out_c, k, stride=stride, padding=k // 2))
        infos.append(StageInfo(in_c, out_c, k, spatial, stride))
    head = nn.Linear(STAGE_SHAPES[-1][1], num_classes)
    return BlockNet(stages, infos, head)


def descriptor_document(net: BlockNet, num_classes: int, base_accuracy: float) -> dict:
    """The backbone descriptor in the engine's network JSON schema."""
    layers = [
        {
            "kind": "conv",
            "in_channels": info.in_channels,
            "out_channels": info.out_channels,
            "kernel": info.kernel,
            "out_spatial": info.out_spatial,
            "stride": info.stride,
            "compressible": True,
        }
        for info in net.infos
    ]
    width = net.infos[-1].out_channels
    layers.append({"kind": "global-average-pool", "in_channels": width,
                   "out_channels": width, "kernel": 1, "out_spatial": 1,
                   "stride": 1, "compressible": False})
    layers.append({"kind": "classifier", "in_channels": width,
                   "out_channels": num_classes, "kernel": 1, "out_spatial": 1,
                   "stride": 1, "compressible": False})
    return {
        "format_version": 1,
        "name": BACKBONE_NAME,
        "base_accuracy": base_accuracy,
        "layers": layers,
    }


@torch.no_grad()
def evaluate(net: BlockNet, loader: DataLoader) -> float:
    net.eval()
    hits = total = 0
    for images, labels in loader:
        predictions = net(images).argmax(dim=1)
        hits += int((predictions == labels).sum())
        total += labels.numel()
    return hits / max(1, total)


def train_backbone(net: BlockNet, loader: DataLoader, held_out: DataLoader,
                   epochs: int, seed: int, lr: float = 1e-3) -> float:
    """Plain supervised training; returns held-out accuracy."""
    torch.manual_seed(seed + 1)
    optimizer = torch.optim.Adam(net.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    net.train()
    for _ in range(epochs):
        for images, labels in loader:
            optimizer.zero_grad()
            loss = loss_fn(net(images), labels)
            loss.backward()
            optimizer.step()
    return evaluate(net, held_out)
