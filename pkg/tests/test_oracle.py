import pytest

import convshrink as cs
from convshrink.errors import ProfileIncompleteError, SpecValidationError
from convshrink.oracle import AccuracyProfile, ImportanceRanking, with_derived_entry

from instances import catalog4, three_conv_backbone


def table_profile(entries, base=0.95, gamma=0.5, samples=None, default=None):
    return AccuracyProfile(
        backbone_name="tiny3", base_accuracy=base, interaction_coeff=gamma,
        entries=entries, whole_plan_samples=samples or {},
        importance=ImportanceRanking(per_layer={}), default_loss=default,
    )


def test_empty_plan_returns_base_accuracy():
    profile = table_profile({})
    assert cs.predict_accuracy(cs.make_plan("tiny3", []), profile) == 0.95


def test_single_entry_composition():
    profile = table_profile({(1, 1): 0.02})
    assert cs.predict_accuracy(cs.make_plan("tiny3", [(1, 1)]), profile) == pytest.approx(0.93)


def test_two_entry_geometric_discount():
    profile = table_profile({(1, 1): 0.02, (2, 1): 0.03})
    plan = cs.make_plan("tiny3", [(1, 1), (2, 1)])
    assert cs.predict_accuracy(plan, profile) == pytest.approx(0.915)  # 0.95 - 0.02 - 0.015


def test_whole_plan_sample_overrides_composition():
    profile = table_profile({(1, 1): 0.5, (2, 1): 0.5}, samples={"2,1,1": 0.88})
    plan = cs.make_plan("tiny3", [(1, 1), (2, 1)])
    assert cs.predict_accuracy(plan, profile) == 0.88  # conflicting table entries ignored


def test_negative_losses_flow_through():
    profile = table_profile({(1, 1): -0.021})
    plan = cs.make_plan("tiny3", [(1, 1)])
    assert cs.predict_accuracy(plan, profile) == pytest.approx(0.971)


def test_accuracy_clamped_to_unit_interval():
    profile = table_profile({(1, 1): 0.9, (2, 1): 0.9}, gamma=0.0)
    plan = cs.make_plan("tiny3", [(1, 1), (2, 1)])
    assert cs.predict_accuracy(plan, profile) == 0.0


def test_missing_entry_uses_default_then_errors():
    with_default = table_profile({}, default=0.01)
    assert cs.predict_accuracy(cs.make_plan("tiny3", [(0, 3)]), with_default) == pytest.approx(0.94)
    without = table_profile({})
    with pytest.raises(ProfileIncompleteError):
        cs.predict_accuracy(cs.make_plan("tiny3", [(0, 3)]), without)


# ---------------------------------------------------------------------------
# synthetic family
# ---------------------------------------------------------------------------

def test_synthetic_profile_is_deterministic():
    net, cat = three_conv_backbone(), catalog4()
    assert cs.synthetic_profile(net, cat, 3) == cs.synthetic_profile(net, cat, 3)
    assert cs.synthetic_profile(net, cat, 3) != cs.synthetic_profile(net, cat, 4)


def test_synthetic_profile_complete_and_valid():
    net, cat = three_conv_backbone(), catalog4()
    profile = cs.synthetic_profile(net, cat, 11)
    assert cs.validate_profile(profile, net, cat) == []
    assert all(0.0 <= loss <= 1.0 for loss in profile.entries.values())


def test_synthetic_more_pruning_costs_more_accuracy():
    net, cat = three_conv_backbone(), catalog4()
    profile = cs.synthetic_profile(net, cat, 5)
    half, three_quarters = cat.by_label("scale(50%)"), cat.by_label("scale(75%)")
    for layer in net.compressible_indices():
        assert profile.entries[(layer, half.id)] > profile.entries[(layer, three_quarters.id)]


def test_synthetic_early_layers_lose_more():
    net, cat = three_conv_backbone(), catalog4()
    profile = cs.synthetic_profile(net, cat, 5)
    for g in cat.non_identity():
        losses = [profile.entries[(layer, g.id)] for layer in net.compressible_indices()]
        assert losses == sorted(losses, reverse=True)


def test_synthetic_importance_inverse_to_noise():
    net, cat = three_conv_backbone(), catalog4()
    ranking = cs.synthetic_profile(net, cat, 5).importance
    rows = sorted(ranking.per_layer.items())
    importances = [imp for _, (imp, _) in rows]
    noises = [noise for _, (_, noise) in rows]
    assert importances == sorted(importances, reverse=True)
    assert noises == sorted(noises)


def test_adding_entries_never_raises_accuracy():
    net, cat = three_conv_backbone(), catalog4()
    profile = cs.synthetic_profile(net, cat, 9)
    shorter = cs.make_plan(net.name, [(1, 1)])
    longer = cs.make_plan(net.name, [(1, 1), (2, 3)])
    assert cs.predict_accuracy(longer, profile) <= cs.predict_accuracy(shorter, profile)


# ---------------------------------------------------------------------------
# derived entries and the file contract
# ---------------------------------------------------------------------------

def test_derived_entry_follows_linear_ratio_rule():
    net, cat = three_conv_backbone(), catalog4()
    profile = cs.synthetic_profile(net, cat, 2)
    base_group = cat.by_label("scale(50%)")
    cat2, derived = cat.extend(
        (cs.channel_scale_operator(0.625),), "scale(62.5%)",
        derived_from=base_group.id, base_keep_ratio=0.5,
    )
    extended = with_derived_entry(profile, 1, derived)
    expected = profile.entries[(1, base_group.id)] + profile.ratio_loss_slope * (0.5 - 0.625)
    assert extended.entries[(1, derived.id)] == pytest.approx(expected)
    assert (1, derived.id) not in profile.entries  # original untouched


def test_profile_json_roundtrip(tmp_path):
    net, cat = three_conv_backbone(), catalog4()
    profile = cs.synthetic_profile(net, cat, 13)
    profile = AccuracyProfile(
        **{**{f: getattr(profile, f) for f in (
            "backbone_name", "base_accuracy", "interaction_coeff", "entries",
            "importance", "default_loss", "ratio_loss_slope")},
           "whole_plan_samples": {"2,1,3": 0.87}},
    )
    path = tmp_path / "profile.json"
    cs.save_profile(profile, path)
    assert cs.load_profile(path) == profile


def test_validate_profile_reports_gaps():
    net, cat = three_conv_backbone(), catalog4()
    profile = cs.synthetic_profile(net, cat, 1)
    entries = dict(profile.entries)
    entries.pop((1, 2))
    sparse = AccuracyProfile(
        backbone_name=net.name, base_accuracy=0.9, interaction_coeff=0.5,
        entries=entries, whole_plan_samples={}, importance=profile.importance,
    )
    problems = cs.validate_profile(sparse, net, cat)
    assert any("layer 1, group 2" in p for p in problems)


def test_profile_rejects_out_of_range_losses(tmp_path):
    net, cat = three_conv_backbone(), catalog4()
    profile = cs.synthetic_profile(net, cat, 1)
    entries = dict(profile.entries)
    entries[(1, 1)] = 1.7
    bad = AccuracyProfile(
        backbone_name=net.name, base_accuracy=0.9, interaction_coeff=0.5,
        entries=entries, whole_plan_samples={}, importance=profile.importance,
    )
    assert bad.violations()
    path = tmp_path / "bad.json"
    cs.save_profile(profile, path)
    text = path.read_text().replace('"base_accuracy": 0.9', '"base_accuracy": 1.4')
    path.write_text(text)
    with pytest.raises(SpecValidationError):
        cs.load_profile(path)
