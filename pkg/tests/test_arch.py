import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import convshrink as cs
from convshrink.arch import CLASSIFIER, GLOBAL_AVERAGE_POOL, LayerSpec
from convshrink.errors import SpecValidationError

from oracles import conv_counts_by_summation, network_counts_by_summation


def test_count_layer_fixtures():
    assert cs.count_layer(cs.conv_layer(0, 3, 16, 3, 32)) == (442368, 432, 16384)
    assert cs.count_layer(cs.conv_layer(0, 1, 1, 1, 1)) == (1, 1, 1)
    assert cs.count_layer(cs.conv_layer(0, 64, 64, 3, 32)) == (37748736, 36864, 65536)


def test_count_layer_non_conv():
    pool = LayerSpec(0, GLOBAL_AVERAGE_POOL, 16, 16, 1, 1)
    assert cs.count_layer(pool) == (0, 0, 16)
    head = LayerSpec(0, CLASSIFIER, 64, 10, 1, 1)
    assert cs.count_layer(head) == (640, 640, 10)


def test_count_layer_rejects_bad_fields():
    with pytest.raises(SpecValidationError):
        cs.count_layer(cs.conv_layer(0, 0, 4, 3, 8))
    with pytest.raises(SpecValidationError):
        cs.count_layer(LayerSpec(0, "mystery", 4, 4, 1, 1))


@given(
    m=st.integers(1, 64), n=st.integers(1, 64),
    k=st.integers(1, 7), s=st.integers(1, 64),
)
@settings(max_examples=60, deadline=None)
def test_count_identities(m, n, k, s):
    macs, params, acts = cs.count_layer(cs.conv_layer(0, m, n, k, s))
    assert macs == params * s * s
    assert macs == acts * m * k * k


def test_count_layer_matches_summation_oracle():
    rng = random.Random("arch-oracle")
    for _ in range(120):
        m, n = rng.randint(1, 64), rng.randint(1, 64)
        k, s = rng.randint(1, 7), rng.randint(1, 64)
        stride = rng.choice([1, 2])
        layer = cs.conv_layer(0, m, n, k, s, stride=stride)
        assert cs.count_layer(layer) == conv_counts_by_summation(m, n, k, s, stride)


def _chained_net(rng: random.Random, n_convs: int) -> cs.NetworkSpec:
    channels = [rng.randint(1, 48) for _ in range(n_convs + 1)]
    layers = [
        cs.conv_layer(0, channels[i], channels[i + 1], rng.choice([1, 3, 5]),
                      rng.choice([4, 8, 16]))
        for i in range(n_convs)
    ]
    layers.append(LayerSpec(0, GLOBAL_AVERAGE_POOL, channels[-1], channels[-1], 1, 1))
    layers.append(LayerSpec(0, CLASSIFIER, channels[-1], 10, 1, 1))
    return cs.make_network("chained", layers, 0.9)


def test_count_network_matches_summation_oracle():
    rng = random.Random("net-oracle")
    for _ in range(25):
        net = _chained_net(rng, rng.randint(1, 6))
        cost = cs.count_network(net)
        assert (cost.macs, cost.params, cost.activations) == network_counts_by_summation(net)
        assert cost.macs == sum(p[0] for p in cost.per_layer)
        assert cost.params == sum(p[1] for p in cost.per_layer)
        assert cost.activations == sum(p[2] for p in cost.per_layer)


def test_count_network_doubles_for_repeated_layer():
    single = cs.make_network("one", [
        cs.conv_layer(0, 64, 64, 3, 32),
        LayerSpec(0, GLOBAL_AVERAGE_POOL, 64, 64, 1, 1),
        LayerSpec(0, CLASSIFIER, 64, 10, 1, 1),
    ], 0.9)
    double = cs.make_network("two", [
        cs.conv_layer(0, 64, 64, 3, 32),
        cs.conv_layer(0, 64, 64, 3, 32),
        LayerSpec(0, GLOBAL_AVERAGE_POOL, 64, 64, 1, 1),
        LayerSpec(0, CLASSIFIER, 64, 10, 1, 1),
    ], 0.9)
    c1, c2 = cs.count_network(single), cs.count_network(double)
    conv = cs.count_layer(cs.conv_layer(0, 64, 64, 3, 32))
    assert c2.macs - c1.macs == conv[0]
    assert c2.params - c1.params == conv[1]
    assert c2.activations - c1.activations == conv[2]


def test_validate_flags_continuity_break():
    net = cs.make_network("broken", [
        cs.conv_layer(0, 3, 16, 3, 16),
        cs.conv_layer(0, 32, 32, 3, 8),
    ], 0.9)
    problems = cs.validate(net)
    assert any("boundary 0/1" in p for p in problems)
    with pytest.raises(SpecValidationError):
        cs.count_network(net)


def test_validate_requires_a_compressible_layer():
    net = cs.make_network("pool-only", [
        LayerSpec(0, GLOBAL_AVERAGE_POOL, 8, 8, 1, 1),
        LayerSpec(0, CLASSIFIER, 8, 4, 1, 1),
    ], 0.9)
    assert any("no compressible layer" in p for p in cs.validate(net))


def test_counting_ignores_compressibility():
    frozen = cs.make_network("frozen", [
        cs.conv_layer(0, 3, 8, 3, 8, compressible=False),
        cs.conv_layer(0, 8, 8, 3, 8),
    ], 0.9)
    cost = cs.count_network(frozen)
    assert cost.params == 3 * 8 * 9 + 8 * 8 * 9


def test_network_json_roundtrip(tmp_path, cifar5):
    path = tmp_path / "net.json"
    cs.save_network(cifar5, path)
    again = cs.load_network(path)
    assert again == cifar5


def test_load_rejects_malformed_document(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"name": "x", "layers": []}')
    with pytest.raises(SpecValidationError):
        cs.load_network(path)
