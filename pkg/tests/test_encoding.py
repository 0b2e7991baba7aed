import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import convshrink as cs
from convshrink.encoding import PlanEncoding
from convshrink.errors import MalformedEncodingError, SpecValidationError


def test_encode_fixtures():
    assert cs.encode(cs.make_plan("b", [(1, 1)])).digits == (1, 1)
    assert cs.encode(cs.make_plan("b", [])).digits == (0,)
    assert cs.encode(cs.make_plan("b", [(1, 1), (2, 3)])).digits == (2, 1, 3)


def test_decode_fixtures():
    plan = cs.decode(PlanEncoding((1, 1)), (1, 2, 3))
    assert plan.assignments == ((1, 1),)
    assert cs.decode(PlanEncoding((0,)), (1, 2, 3)).assignments == ()
    with pytest.raises(MalformedEncodingError):
        cs.decode(PlanEncoding((2, 1)), (1, 2, 3))
    with pytest.raises(MalformedEncodingError):
        cs.decode(PlanEncoding((2, 1, 0)), (1, 2, 3))
    with pytest.raises(MalformedEncodingError):
        cs.decode(PlanEncoding((3, 1, 1, 1)), (1, 2))


@st.composite
def plans(draw):
    n_layers = draw(st.integers(1, 12))
    k = draw(st.integers(0, n_layers))
    layers = sorted(draw(st.permutations(range(n_layers)))[:k])
    groups = draw(st.lists(st.integers(1, 9), min_size=k, max_size=k))
    return cs.make_plan("b", list(zip(layers, groups))), n_layers


@given(plans())
@settings(max_examples=300, deadline=None)
def test_decode_encode_roundtrip(plan_and_n):
    plan, n_layers = plan_and_n
    encoding = cs.encode(plan)
    assert len(encoding.digits) <= n_layers + 1
    again = cs.decode(encoding, plan.layers, backbone_name=plan.backbone_name)
    assert again == plan


def test_roundtrip_thousand_random_plans():
    rng = random.Random("roundtrip")
    for _ in range(1000):
        n = rng.randint(1, 10)
        k = rng.randint(0, n)
        layers = sorted(rng.sample(range(n), k))
        plan = cs.make_plan("b", [(l, rng.randint(1, 9)) for l in layers])
        assert cs.decode(cs.encode(plan), plan.layers, "b") == plan


def test_prefix_extension_property():
    rng = random.Random("prefix")
    for _ in range(100):
        n = rng.randint(2, 10)
        k = rng.randint(1, n - 1)
        layers = sorted(rng.sample(range(n), k + 1))
        groups = [rng.randint(1, 9) for _ in range(k + 1)]
        shorter = cs.make_plan("b", list(zip(layers[:k], groups[:k])))
        longer = cs.make_plan("b", list(zip(layers, groups)))
        d_short, d_long = cs.encode(shorter).digits, cs.encode(longer).digits
        assert d_long[0] == d_short[0] + 1
        assert d_long[1:-1] == d_short[1:]
        assert d_long[-1] == groups[k]


def test_plan_invariants_enforced():
    with pytest.raises(SpecValidationError):
        cs.make_plan("b", [(2, 1), (1, 1)])  # decreasing layers
    with pytest.raises(SpecValidationError):
        cs.make_plan("b", [(1, 0)])  # identity entries are implicit
    with pytest.raises(SpecValidationError):
        cs.make_plan("b", [(1, 1), (1, 2)])  # duplicate layer


def test_serialize_parse():
    enc = cs.encode(cs.make_plan("b", [(0, 2), (3, 7)]))
    assert enc.serialize() == "2,2,7"
    assert cs.parse_encoding("2,2,7") == enc
    with pytest.raises(MalformedEncodingError):
        cs.parse_encoding("2,x")


def test_classic_binary_length():
    assert cs.classic_binary_length(3, 4) == 15
    assert cs.classic_binary_length(1, 1) == 2
    assert cs.classic_binary_length(5, 9) == 50


def test_search_space_sizes():
    assert cs.search_space_sizes(3, 4) == (512, 18)
    assert cs.search_space_sizes(1, 1) == (2, 6)
    assert cs.search_space_sizes(5, 9)[0] == 2**5 * 9**5
    assert cs.search_space_sizes(5, 9)[1] == 30
    with pytest.raises(SpecValidationError):
        cs.search_space_sizes(0, 4)
