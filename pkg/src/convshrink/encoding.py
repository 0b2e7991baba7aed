"""Variable-length encoding of compression plans.

A plan's encoding is ``[k, g1, ..., gk]``: the count of compressed layers
followed by the chosen group id per layer, in layer order. The encoding
stores counts rather than layer indices, so decoding needs the order in
which layers are compressed. Serialized form is comma-separated integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import MalformedEncodingError, SpecValidationError


@dataclass(frozen=True, slots=True)
class CompressionPlan:
    """Per-layer group assignments, strictly increasing layer indices."""

    backbone_name: str
    assignments: tuple[tuple[int, int], ...]  # (layer_index, group_id)

    def violations(self) -> list[str]:
        v = []
        layers = [a[0] for a in self.assignments]
        if any(b <= a for a, b in zip(layers, layers[1:])):
            v.append("plan layer indices must be strictly increasing")
        if any(g == 0 for _, g in self.assignments):
            v.append("plans never carry the identity group explicitly")
        if any(g < 0 for _, g in self.assignments):
            v.append("group ids are nonnegative")
        return v

    @property
    def layers(self) -> tuple[int, ...]:
        return tuple(a[0] for a in self.assignments)

    @property
    def group_ids(self) -> tuple[int, ...]:
        return tuple(a[1] for a in self.assignments)


def make_plan(backbone_name: str, assignments: Sequence[tuple[int, int]]) -> CompressionPlan:
    plan = CompressionPlan(backbone_name=backbone_name, assignments=tuple(assignments))
    bad = plan.violations()
    if bad:
        raise SpecValidationError(bad)
    return plan


EMPTY_ASSIGNMENTS: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True, slots=True)
class PlanEncoding:
    digits: tuple[int, ...]

    def serialize(self) -> str:
        return ",".join(str(d) for d in self.digits)


def encode(plan: CompressionPlan) -> PlanEncoding:
    """[count, group ids in layer order]; the empty plan encodes as [0]."""
    bad = plan.violations()
    if bad:
        raise SpecValidationError(bad)
    return PlanEncoding(digits=(len(plan.assignments), *plan.group_ids))


def decode(encoding: PlanEncoding, compressed_layer_order: Sequence[int],
           backbone_name: str = "") -> CompressionPlan:
    """Inverse of encode given the order layers are compressed in."""
    digits = encoding.digits
    if not digits or digits[0] < 0:
        raise MalformedEncodingError("encoding needs a nonnegative leading count digit")
    k = digits[0]
    if len(digits) != k + 1:
        raise MalformedEncodingError(
            f"count digit {k} does not match {len(digits) - 1} group digits"
        )
    if any(d <= 0 for d in digits[1:]):
        raise MalformedEncodingError("group digits must be positive group ids")
    if len(compressed_layer_order) < k:
        raise MalformedEncodingError(
            f"layer order supplies {len(compressed_layer_order)} layers, encoding names {k}"
        )
    assignments = tuple(zip(compressed_layer_order[:k], digits[1:]))
    return make_plan(backbone_name, assignments)


def parse_encoding(text: str) -> PlanEncoding:
    try:
        digits = tuple(int(tok) for tok in text.strip().split(","))
    except ValueError as exc:
        raise MalformedEncodingError(f"not a comma-separated integer string: {text!r}") from exc
    return PlanEncoding(digits=digits)


def classic_binary_length(n_layers: int, n_groups: int) -> int:
    """Bits of the flat mask+choice encoding: (M+1)*N. Reference figure only."""
    if n_layers < 1 or n_groups < 1:
        raise SpecValidationError("classic_binary_length needs N, M >= 1")
    return (n_groups + 1) * n_layers


def search_space_sizes(n_layers: int, n_groups: int) -> tuple[int, int]:
    """(classic space size 2^N * M^N, per-run candidate bound 6*N).

    The second figure is the concrete evaluation cap of the layer-sequential
    search (six candidates per layer), the implementable stand-in for its
    claimed polynomial complexity.
    """
    if n_layers < 1 or n_groups < 1:
        raise SpecValidationError("search_space_sizes needs N, M >= 1")
    return (2 ** n_layers) * (n_groups ** n_layers), 6 * n_layers
