"""Convolutional backbone descriptors and exact cost counting.

Networks are plain descriptor lists: no weights, no execution. Each conv
layer is characterized by (in_channels, out_channels, kernel, out_spatial)
and counting is closed-form:

    params      = in_channels * out_channels * kernel^2
    activations = out_channels * out_spatial^2
    macs        = in_channels * out_channels * kernel^2 * out_spatial^2

out_spatial is stored per layer (it already reflects stride), so transforms
never re-propagate spatial geometry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

from .errors import SpecValidationError

CONV = "conv"
GLOBAL_AVERAGE_POOL = "global-average-pool"
CLASSIFIER = "classifier"

LAYER_KINDS = (CONV, GLOBAL_AVERAGE_POOL, CLASSIFIER)

NETWORK_FORMAT_VERSION = 1


@dataclass(frozen=True, slots=True)
class LayerSpec:
    """One layer of a backbone descriptor.

    ``branches`` is set only on multi-branch conv records produced by the
    fire transform: a tuple of (out_channels, kernel) pairs whose widths sum
    to ``out_channels``. Counting then sums over branches.
    """

    index: int
    kind: str
    in_channels: int
    out_channels: int
    kernel: int = 1
    out_spatial: int = 1
    stride: int = 1
    compressible: bool = False
    branches: tuple[tuple[int, int], ...] | None = None

    def violations(self) -> list[str]:
        v = []
        if self.kind not in LAYER_KINDS:
            v.append(f"layer {self.index}: unknown kind {self.kind!r}")
            return v
        if self.kind == CONV:
            for name in ("in_channels", "out_channels", "kernel", "out_spatial", "stride"):
                if getattr(self, name) < 1:
                    v.append(f"layer {self.index}: conv field {name} must be >= 1")
            if self.branches is not None:
                if sum(b[0] for b in self.branches) != self.out_channels:
                    v.append(f"layer {self.index}: branch widths must sum to out_channels")
                if any(w < 1 or k < 1 for w, k in self.branches):
                    v.append(f"layer {self.index}: branch widths and kernels must be >= 1")
        else:
            if self.compressible:
                v.append(f"layer {self.index}: only conv layers may be compressible")
            if self.kernel != 1:
                v.append(f"layer {self.index}: non-conv layers carry kernel 1")
            if self.kind == GLOBAL_AVERAGE_POOL and self.in_channels != self.out_channels:
                v.append(f"layer {self.index}: pooling must preserve channel count")
            if self.branches is not None:
                v.append(f"layer {self.index}: branches are only valid on conv layers")
        return v


@dataclass(frozen=True, slots=True)
class NetworkSpec:
    """An ordered backbone descriptor plus its reference accuracy."""

    name: str
    layers: tuple[LayerSpec, ...]
    base_accuracy: float

    def conv_indices(self) -> list[int]:
        return [l.index for l in self.layers if l.kind == CONV]

    def compressible_indices(self) -> list[int]:
        return [l.index for l in self.layers if l.compressible]


@dataclass(frozen=True, slots=True)
class CostBreakdown:
    """Exact MAC/parameter/activation totals with per-layer detail."""

    macs: int
    params: int
    activations: int
    per_layer: tuple[tuple[int, int, int], ...]


def make_network(name: str, layers: Iterable[LayerSpec], base_accuracy: float) -> NetworkSpec:
    """Build a NetworkSpec with layer indices renumbered ordinally."""
    renumbered = tuple(replace(l, index=i) for i, l in enumerate(layers))
    return NetworkSpec(name=name, layers=renumbered, base_accuracy=base_accuracy)


def conv_layer(
    index: int,
    in_channels: int,
    out_channels: int,
    kernel: int,
    out_spatial: int,
    stride: int = 1,
    compressible: bool = True,
    branches: tuple[tuple[int, int], ...] | None = None,
) -> LayerSpec:
    return LayerSpec(
        index=index,
        kind=CONV,
        in_channels=in_channels,
        out_channels=out_channels,
        kernel=kernel,
        out_spatial=out_spatial,
        stride=stride,
        compressible=compressible,
        branches=branches,
    )


def count_layer(layer: LayerSpec) -> tuple[int, int, int]:
    """Exact (macs, params, activations) for one layer.

    Pooling carries no weights; classifiers are counted as 1x1 dense maps.
    """
    bad = layer.violations()
    if bad:
        raise SpecValidationError(bad)
    if layer.kind == CONV:
        branches = layer.branches or ((layer.out_channels, layer.kernel),)
        params = sum(layer.in_channels * width * k * k for width, k in branches)
        macs = params * layer.out_spatial * layer.out_spatial
        acts = layer.out_channels * layer.out_spatial * layer.out_spatial
        return macs, params, acts
    if layer.kind == GLOBAL_AVERAGE_POOL:
        return 0, 0, layer.out_channels * layer.out_spatial * layer.out_spatial
    # classifier: M*N weights, M*N MACs, N output activations
    mn = layer.in_channels * layer.out_channels
    return mn, mn, layer.out_channels


def validate(net: NetworkSpec) -> list[str]:
    """Return all invariant violations (empty list means the network is valid)."""
    v: list[str] = []
    if not 0.0 < net.base_accuracy <= 1.0 + 1e-12:
        v.append(f"base_accuracy {net.base_accuracy} outside (0, 1]")
    for i, layer in enumerate(net.layers):
        if layer.index != i:
            v.append(f"layer {i}: stored index {layer.index} is not ordinal")
        v.extend(layer.violations())
    for i in range(len(net.layers) - 1):
        a, b = net.layers[i], net.layers[i + 1]
        if a.out_channels != b.in_channels:
            v.append(
                f"channel continuity broken at boundary {i}/{i + 1}: "
                f"{a.out_channels} -> {b.in_channels}"
            )
    if not any(l.compressible for l in net.layers):
        v.append("no compressible layer")
    return v


def count_network(net: NetworkSpec) -> CostBreakdown:
    """Exact totals over all layers; rejects invalid networks."""
    bad = validate(net)
    if bad:
        raise SpecValidationError(bad)
    per_layer = tuple(count_layer(l) for l in net.layers)
    return CostBreakdown(
        macs=sum(p[0] for p in per_layer),
        params=sum(p[1] for p in per_layer),
        activations=sum(p[2] for p in per_layer),
        per_layer=per_layer,
    )


# ---------------------------------------------------------------------------
# network descriptor file format (JSON, format_version 1)
# ---------------------------------------------------------------------------

def network_to_dict(net: NetworkSpec) -> dict:
    return {
        "format_version": NETWORK_FORMAT_VERSION,
        "name": net.name,
        "base_accuracy": net.base_accuracy,
        "layers": [
            {
                "kind": l.kind,
                "in_channels": l.in_channels,
                "out_channels": l.out_channels,
                "kernel": l.kernel,
                "out_spatial": l.out_spatial,
                "stride": l.stride,
                "compressible": l.compressible,
            }
            for l in net.layers
        ],
    }


def network_from_dict(doc: dict) -> NetworkSpec:
    try:
        version = doc.get("format_version", NETWORK_FORMAT_VERSION)
        if version != NETWORK_FORMAT_VERSION:
            raise SpecValidationError(f"unsupported network format_version {version}")
        layers = [
            LayerSpec(
                index=i,
                kind=entry["kind"],
                in_channels=int(entry["in_channels"]),
                out_channels=int(entry["out_channels"]),
                kernel=int(entry.get("kernel", 1)),
                out_spatial=int(entry.get("out_spatial", 1)),
                stride=int(entry.get("stride", 1)),
                compressible=bool(entry.get("compressible", False)),
            )
            for i, entry in enumerate(doc["layers"])
        ]
        net = NetworkSpec(
            name=str(doc["name"]),
            layers=tuple(layers),
            base_accuracy=float(doc["base_accuracy"]),
        )
    except SpecValidationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecValidationError(f"malformed network document: {exc}") from exc
    bad = validate(net)
    if bad:
        raise SpecValidationError(bad)
    return net


def load_network(path: str | Path) -> NetworkSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))


def save_network(net: NetworkSpec, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh, indent=2, sort_keys=True)
        fh.write("\n")
