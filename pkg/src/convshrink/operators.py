"""Retraining-free compression operators and the operator-group catalog.

Four pure architecture transformations over NetworkSpec descriptors:

* ``fire``          -- replace a conv layer with a 1x1 squeeze layer plus a
                       mixed 1x1/3x3 expand record (multi-branch channel merge).
* ``lowrank``       -- factorize a conv layer into a reduced-rank kxk layer
                       followed by a 1x1 projection back to the original width.
* ``channel_scale`` -- shrink a layer's output width by a keep ratio and
                       update the successor's input width.
* ``depth_skip``    -- remove a run of identity-compatible (in == out) layers.

Groups pair at most one coarse operator (fire/lowrank) with at most one fine
operator (channel_scale/depth_skip); the fine member operates on the first
record the coarse member inserted. Group id 0 is always the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .arch import CONV, GLOBAL_AVERAGE_POOL, LayerSpec, NetworkSpec, conv_layer, validate
from .errors import InvalidOperatorError, SpecValidationError

FIRE = "fire"
LOWRANK = "lowrank"
CHANNEL_SCALE = "channel_scale"
DEPTH_SKIP = "depth_skip"

COARSE_KINDS = (FIRE, LOWRANK)
FINE_KINDS = (CHANNEL_SCALE, DEPTH_SKIP)

CATALOG_FORMAT_VERSION = 1

DEFAULT_SQUEEZE_RATIO = 0.125
DEFAULT_EXPAND_SPLIT = 0.5


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True, slots=True)
class CompressionOperator:
    """One operator instance; only the fields of its kind are set."""

    kind: str
    squeeze_ratio: float | None = None
    expand_split: float | None = None
    rank_divisor: int | None = None
    keep_ratio: float | None = None
    skip_depth: int | None = None

    def violations(self) -> list[str]:
        v = []
        if self.kind == FIRE:
            if not (self.squeeze_ratio and 0.0 < self.squeeze_ratio <= 1.0):
                v.append(f"fire squeeze_ratio {self.squeeze_ratio} outside (0, 1]")
            if self.expand_split is None or not (0.0 <= self.expand_split <= 1.0):
                v.append(f"fire expand_split {self.expand_split} outside [0, 1]")
        elif self.kind == LOWRANK:
            if not (self.rank_divisor and self.rank_divisor >= 1):
                v.append(f"lowrank rank_divisor {self.rank_divisor} must be >= 1")
        elif self.kind == CHANNEL_SCALE:
            if not (self.keep_ratio and 0.0 < self.keep_ratio <= 1.0):
                v.append(f"channel_scale keep_ratio {self.keep_ratio} outside (0, 1]")
        elif self.kind == DEPTH_SKIP:
            if not (self.skip_depth and self.skip_depth >= 1):
                v.append(f"depth_skip skip_depth {self.skip_depth} must be >= 1")
        else:
            v.append(f"unknown operator kind {self.kind!r}")
        return v


def fire_operator(
    squeeze_ratio: float = DEFAULT_SQUEEZE_RATIO,
    expand_split: float = DEFAULT_EXPAND_SPLIT,
) -> CompressionOperator:
    return CompressionOperator(FIRE, squeeze_ratio=squeeze_ratio, expand_split=expand_split)


def lowrank_operator(rank_divisor: int) -> CompressionOperator:
    return CompressionOperator(LOWRANK, rank_divisor=rank_divisor)


def channel_scale_operator(keep_ratio: float) -> CompressionOperator:
    return CompressionOperator(CHANNEL_SCALE, keep_ratio=keep_ratio)


def depth_skip_operator(skip_depth: int) -> CompressionOperator:
    return CompressionOperator(DEPTH_SKIP, skip_depth=skip_depth)


@dataclass(frozen=True, slots=True)
class OperatorGroup:
    """A catalog entry: one or two operators applied together at a layer.

    Mutation-derived groups record the catalog group they were perturbed
    from (``derived_from``) and the keep ratio that group carried.
    """

    id: int
    label: str
    members: tuple[CompressionOperator, ...]
    derived_from: int | None = None
    base_keep_ratio: float | None = None

    @property
    def is_identity(self) -> bool:
        return not self.members

    @property
    def coarse(self) -> CompressionOperator | None:
        for m in self.members:
            if m.kind in COARSE_KINDS:
                return m
        return None

    @property
    def scale_member(self) -> CompressionOperator | None:
        for m in self.members:
            if m.kind == CHANNEL_SCALE:
                return m
        return None

    @property
    def fine(self) -> CompressionOperator | None:
        for m in self.members:
            if m.kind in FINE_KINDS:
                return m
        return None

    def structure_key(self) -> tuple:
        """Member signature ignoring any channel_scale member (adjacency key)."""
        key = []
        for m in self.members:
            if m.kind != CHANNEL_SCALE:
                key.append((m.kind, m.squeeze_ratio, m.expand_split, m.rank_divisor, m.skip_depth))
        return tuple(key)

    def violations(self) -> list[str]:
        if self.is_identity:
            return [] if self.id == 0 else [f"group {self.id}: only id 0 may be empty"]
        v = []
        if not 1 <= len(self.members) <= 2:
            v.append(f"group {self.id}: groups hold 1 or 2 members")
        n_coarse = sum(1 for m in self.members if m.kind in COARSE_KINDS)
        n_fine = sum(1 for m in self.members if m.kind in FINE_KINDS)
        if n_coarse > 1 or n_fine > 1:
            v.append(f"group {self.id}: at most one coarse and one fine member")
        if len(self.members) == 2 and self.members[0].kind not in COARSE_KINDS:
            v.append(f"group {self.id}: coarse member must come first")
        for m in self.members:
            v.extend(f"group {self.id}: {msg}" for msg in m.violations())
        return v


IDENTITY_GROUP = OperatorGroup(id=0, label="identity", members=())


@dataclass(frozen=True, slots=True)
class OperatorCatalog:
    """Identity plus densely numbered groups 1..size."""

    groups: tuple[OperatorGroup, ...]

    @property
    def size(self) -> int:
        return len(self.groups) - 1

    def group(self, group_id: int) -> OperatorGroup:
        if not 0 <= group_id < len(self.groups):
            raise SpecValidationError(f"unknown group id {group_id}")
        return self.groups[group_id]

    def by_label(self, label: str) -> OperatorGroup:
        for g in self.groups:
            if g.label == label:
                return g
        raise SpecValidationError(f"no group labelled {label!r}")

    def non_identity(self) -> tuple[OperatorGroup, ...]:
        return self.groups[1:]

    def extend(self, members: tuple[CompressionOperator, ...], label: str,
               derived_from: int | None = None,
               base_keep_ratio: float | None = None) -> tuple["OperatorCatalog", OperatorGroup]:
        """Return a new catalog with one appended group (fresh dense id)."""
        g = OperatorGroup(
            id=len(self.groups),
            label=label,
            members=members,
            derived_from=derived_from,
            base_keep_ratio=base_keep_ratio,
        )
        bad = g.violations()
        if bad:
            raise SpecValidationError(bad)
        return OperatorCatalog(self.groups + (g,)), g

    def adjacent_scale_variants(self, group: OperatorGroup) -> list[OperatorGroup]:
        """Stock catalog groups equal to ``group`` except for the channel_scale
        member (run-derived groups are excluded: their profile entries are
        layer-specific)."""
        key = group.structure_key()
        out = []
        for g in self.non_identity():
            if g.id != group.id and g.derived_from is None and g.structure_key() == key:
                out.append(g)
        return out

    def violations(self) -> list[str]:
        v = []
        if not self.groups or not self.groups[0].is_identity or self.groups[0].id != 0:
            v.append("catalog must reserve id 0 for the identity group")
        for i, g in enumerate(self.groups):
            if g.id != i:
                v.append(f"group ids must be dense, found {g.id} at position {i}")
            v.extend(g.violations())
        return v


def make_catalog(groups: Iterable[OperatorGroup]) -> OperatorCatalog:
    cat = OperatorCatalog(groups=(IDENTITY_GROUP, *groups))
    bad = cat.violations()
    if bad:
        raise SpecValidationError(bad)
    return cat


def default_catalog() -> OperatorCatalog:
    """The nine stock groups: three coarse, three fine, three paired."""
    specs = [
        ("fire", (fire_operator(),)),
        ("lowrank(12)", (lowrank_operator(12),)),
        ("lowrank(6)", (lowrank_operator(6),)),
        ("scale(50%)", (channel_scale_operator(0.5),)),
        ("scale(75%)", (channel_scale_operator(0.75),)),
        ("skip(1)", (depth_skip_operator(1),)),
        ("fire+scale(50%)", (fire_operator(), channel_scale_operator(0.5))),
        ("lowrank(12)+skip(1)", (lowrank_operator(12), depth_skip_operator(1))),
        ("lowrank(12)+scale(65%)", (lowrank_operator(12), channel_scale_operator(0.65))),
    ]
    return make_catalog(
        OperatorGroup(id=i + 1, label=label, members=members)
        for i, (label, members) in enumerate(specs)
    )


# ---------------------------------------------------------------------------
# operator application
# ---------------------------------------------------------------------------

def _renumber(layers: Sequence[LayerSpec]) -> tuple[LayerSpec, ...]:
    return tuple(
        l if l.index == i else replace(l, index=i) for i, l in enumerate(layers)
    )


def _target_conv(net: NetworkSpec, layer_index: int, op: str) -> LayerSpec:
    if not 0 <= layer_index < len(net.layers):
        raise InvalidOperatorError(f"{op}: layer index {layer_index} out of range")
    layer = net.layers[layer_index]
    if layer.kind != CONV or not layer.compressible:
        raise InvalidOperatorError(f"{op}: layer {layer_index} is not a compressible conv layer")
    return layer


def _rebuild(net: NetworkSpec, layers: Sequence[LayerSpec], op: str) -> NetworkSpec:
    out = NetworkSpec(name=net.name, layers=_renumber(layers), base_accuracy=net.base_accuracy)
    bad = validate(out)
    if bad:
        raise InvalidOperatorError(f"{op}: transformation broke the network: " + "; ".join(bad))
    return out


def apply_fire(
    net: NetworkSpec,
    layer_index: int,
    squeeze_ratio: float = DEFAULT_SQUEEZE_RATIO,
    expand_split: float = DEFAULT_EXPAND_SPLIT,
) -> NetworkSpec:
    """Replace a conv layer with squeeze (1x1) + expand (1x1 and 3x3 branches)."""
    net, _ = _apply_fire(net, layer_index, fire_operator(squeeze_ratio, expand_split))
    return net


def _apply_fire(net: NetworkSpec, layer_index: int,
                op: CompressionOperator) -> tuple[NetworkSpec, int]:
    layer = _target_conv(net, layer_index, FIRE)
    if layer.out_channels < 2:
        raise InvalidOperatorError("fire: target needs at least 2 output channels to split")
    squeeze_width = _half_up(op.squeeze_ratio * layer.out_channels)
    if squeeze_width < 1:
        raise InvalidOperatorError("fire: squeeze width computes to 0")
    e1 = min(layer.out_channels, max(0, _half_up(op.expand_split * layer.out_channels)))
    e3 = layer.out_channels - e1
    branches = tuple((w, k) for w, k in ((e1, 1), (e3, 3)) if w > 0)
    squeeze = conv_layer(
        0, layer.in_channels, squeeze_width, kernel=1,
        out_spatial=layer.out_spatial, stride=1,
    )
    expand = conv_layer(
        0, squeeze_width, layer.out_channels,
        kernel=max(k for _, k in branches),
        out_spatial=layer.out_spatial, stride=layer.stride,
        branches=branches if len(branches) > 1 else None,
    )
    layers = list(net.layers)
    layers[layer_index:layer_index + 1] = [squeeze, expand]
    return _rebuild(net, layers, FIRE), layer_index


def apply_lowrank(net: NetworkSpec, layer_index: int, rank_divisor: int) -> NetworkSpec:
    """Factorize a conv layer into rank-reduced kxk + 1x1 projection layers."""
    net, _ = _apply_lowrank(net, layer_index, lowrank_operator(rank_divisor))
    return net


def _apply_lowrank(net: NetworkSpec, layer_index: int,
                   op: CompressionOperator) -> tuple[NetworkSpec, int]:
    layer = _target_conv(net, layer_index, LOWRANK)
    rank = max(1, layer.in_channels // op.rank_divisor)
    reduced = conv_layer(
        0, layer.in_channels, rank, kernel=layer.kernel,
        out_spatial=layer.out_spatial, stride=layer.stride,
    )
    project = conv_layer(
        0, rank, layer.out_channels, kernel=1,
        out_spatial=layer.out_spatial, stride=1,
    )
    layers = list(net.layers)
    layers[layer_index:layer_index + 1] = [reduced, project]
    # the inserted projection is the record fine members operate on
    return _rebuild(net, layers, LOWRANK), layer_index + 1


def apply_channel_scale(net: NetworkSpec, layer_index: int, keep_ratio: float) -> NetworkSpec:
    """Shrink a layer's output width to max(1, round(keep_ratio * N))."""
    op = channel_scale_operator(keep_ratio)
    bad = op.violations()
    if bad:
        raise SpecValidationError(bad)
    layer = _target_conv(net, layer_index, CHANNEL_SCALE)
    if layer.branches is not None:
        raise InvalidOperatorError("channel_scale: multi-branch records cannot be rescaled")
    new_width = max(1, _half_up(keep_ratio * layer.out_channels))
    if new_width == layer.out_channels:
        return net
    layers = list(net.layers)
    layers[layer_index] = replace(layer, out_channels=new_width)
    j = layer_index + 1
    while j < len(layers) and layers[j].kind == GLOBAL_AVERAGE_POOL:
        layers[j] = replace(layers[j], in_channels=new_width, out_channels=new_width)
        j += 1
    if j < len(layers):
        layers[j] = replace(layers[j], in_channels=new_width)
    return _rebuild(net, layers, CHANNEL_SCALE)


def apply_depth_skip(net: NetworkSpec, layer_index: int, skip_depth: int) -> NetworkSpec:
    """Remove skip_depth identity-compatible conv layers starting at layer_index."""
    op = depth_skip_operator(skip_depth)
    bad = op.violations()
    if bad:
        raise SpecValidationError(bad)
    if not 0 <= layer_index < len(net.layers):
        raise InvalidOperatorError(f"depth_skip: layer index {layer_index} out of range")
    if layer_index + skip_depth > len(net.layers):
        raise InvalidOperatorError("depth_skip: skip range runs past the network end")
    first_conv = min(net.conv_indices(), default=-1)
    if layer_index <= first_conv:
        raise InvalidOperatorError("depth_skip: the frontmost conv layer must be preserved")
    for j in range(layer_index, layer_index + skip_depth):
        layer = net.layers[j]
        if layer.kind != CONV:
            raise InvalidOperatorError(f"depth_skip: layer {j} is not a conv layer")
        if layer.in_channels != layer.out_channels:
            raise InvalidOperatorError(
                f"depth_skip: layer {j} maps {layer.in_channels}->{layer.out_channels}, "
                "skips require matching widths"
            )
    layers = list(net.layers)
    del layers[layer_index:layer_index + skip_depth]
    return _rebuild(net, layers, DEPTH_SKIP)


@dataclass(frozen=True, slots=True)
class GroupApplication:
    """Result of applying one group: the new net and how many pre-existing
    layer slots (starting at the target) the application consumed."""

    network: NetworkSpec
    consumed: int


def apply_group(net: NetworkSpec, layer_index: int, group: OperatorGroup) -> NetworkSpec:
    """Apply a whole group at a layer; any member failure aborts unapplied."""
    return apply_group_meta(net, layer_index, group).network


def apply_group_meta(net: NetworkSpec, layer_index: int, group: OperatorGroup) -> GroupApplication:
    bad = group.violations()
    if bad:
        raise SpecValidationError(bad)
    if group.is_identity:
        return GroupApplication(network=net, consumed=0)
    coarse, fine = group.coarse, group.fine
    if coarse is not None:
        if coarse.kind == FIRE:
            net, fine_pos = _apply_fire(net, layer_index, coarse)
            inserted_after_target = 2  # squeeze and expand occupy fine_pos onward
        else:
            net, fine_pos = _apply_lowrank(net, layer_index, coarse)
            inserted_after_target = 1  # only the 1x1 sits at fine_pos onward
        consumed = 1
        if fine is None:
            return GroupApplication(network=net, consumed=consumed)
        if fine.kind == CHANNEL_SCALE:
            net = apply_channel_scale(net, fine_pos, fine.keep_ratio)
            return GroupApplication(network=net, consumed=consumed)
        net = apply_depth_skip(net, fine_pos, fine.skip_depth)
        consumed += max(0, fine.skip_depth - inserted_after_target)
        return GroupApplication(network=net, consumed=consumed)
    if fine.kind == CHANNEL_SCALE:
        return GroupApplication(
            network=apply_channel_scale(net, layer_index, fine.keep_ratio), consumed=1
        )
    return GroupApplication(
        network=apply_depth_skip(net, layer_index, fine.skip_depth), consumed=fine.skip_depth
    )


def advance_positions(position: dict[int, int], spent_layer: int, p: int,
                      consumed: int, delta: int) -> dict[int, int]:
    """Remap original-layer positions after one group application at slot p
    that consumed ``consumed`` pre-existing slots and changed the layer count
    by ``delta``. The assignment's own target layer is dropped as spent."""
    updated: dict[int, int] = {}
    for orig, q in position.items():
        if orig == spent_layer:
            continue
        if q < p:
            updated[orig] = q
        elif q < p + consumed:
            continue  # removed by this application
        else:
            updated[orig] = q + delta
    return updated


def apply_assignments(
    net: NetworkSpec, assignments: Sequence[tuple[int, OperatorGroup]]
) -> NetworkSpec:
    """Apply (layer, group) pairs front to back, remapping indices as layers
    are inserted and removed. Layer indices refer to ``net``'s layers."""
    position = {i: i for i in range(len(net.layers))}
    current = net
    for layer_index, group in sorted(assignments, key=lambda a: a[0]):
        if layer_index not in position:
            raise InvalidOperatorError(
                f"layer {layer_index} was removed by an earlier assignment"
            )
        p = position[layer_index]
        before = len(current.layers)
        applied = apply_group_meta(current, p, group)
        current = applied.network
        position = advance_positions(position, layer_index, p, applied.consumed,
                                     len(current.layers) - before)
    return current
