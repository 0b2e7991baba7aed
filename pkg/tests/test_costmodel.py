import dataclasses
import math
import random

import pytest

import convshrink as cs
from convshrink.arch import CostBreakdown
from convshrink.costmodel import CostModelConfig, DEFAULT_CONFIG, build_report
from convshrink.errors import SpecValidationError

DEVICE = cs.DeviceProfile(
    name="ref", mem_bandwidth=2e9, compute_throughput=1e10,
    bytes_per_param=4, bytes_per_activation=4, cache_capacity=2e6,
    energy_per_mac=1e-12, energy_per_byte_moved=1e-10,
)


def breakdown(macs, params, acts) -> CostBreakdown:
    return CostBreakdown(macs=macs, params=params, activations=acts,
                         per_layer=((macs, params, acts),))


def test_intensity_aggregation_reference_rows():
    # measured intensity pairs from published comparison rows
    assert cs.aggregate_intensities(158.9, 358.7) == pytest.approx(278.78, abs=1e-9)
    assert cs.aggregate_intensities(81.2, 394.7) == pytest.approx(269.30, abs=1e-9)


def test_energy_proxy_equals_weighted_ratio_sum():
    c, sp, sa = 158.9 * 358.7, 358.7, 158.9
    assert cs.energy_proxy(c, sp, sa) == pytest.approx(278.78, abs=1e-9)
    # equal ratios collapse to the ratio itself for any valid weights
    for mu1 in (0.0, 0.25, 0.4, 1.0):
        cfg = CostModelConfig(mu1=mu1, mu2=1 - mu1)
        assert cs.energy_proxy(100.0, 10.0, 10.0, cfg) == pytest.approx(10.0)


def test_energy_proxy_rejects_zero_denominators():
    with pytest.raises(SpecValidationError):
        cs.energy_proxy(10.0, 0.0, 5.0)
    with pytest.raises(SpecValidationError):
        cs.energy_proxy(10.0, 5.0, 0.0)


def test_latency_reference_layer():
    t_load, t_inf, t = cs.latency(breakdown(442368, 432, 16384), DEVICE)
    assert t_load == pytest.approx(33.632e-6, rel=1e-12)
    assert t_inf == pytest.approx(44.2368e-6, rel=1e-12)
    assert t == pytest.approx(77.8688e-6, rel=1e-12)


def test_latency_zero_and_linearity():
    zero = CostBreakdown(0, 0, 0, ())
    assert cs.latency(zero, DEVICE)[2] == 0.0
    fast = dataclasses.replace(DEVICE, compute_throughput=2e10)
    assert cs.latency(breakdown(442368, 432, 16384), fast)[1] * 2 == pytest.approx(
        cs.latency(breakdown(442368, 432, 16384), DEVICE)[1]
    )


def test_latency_additive_over_layers():
    rng = random.Random("latency")
    layers = [(rng.randint(1, 10**7), rng.randint(1, 10**5), rng.randint(1, 10**5))
              for _ in range(6)]
    total = CostBreakdown(
        macs=sum(l[0] for l in layers), params=sum(l[1] for l in layers),
        activations=sum(l[2] for l in layers), per_layer=tuple(layers),
    )
    per = sum(cs.latency(breakdown(*l), DEVICE)[2] for l in layers)
    assert cs.latency(total, DEVICE)[2] == pytest.approx(per, rel=1e-12)


def test_energy_cost_reference_and_linearity():
    assert cs.energy_cost(CostBreakdown(0, 0, 0, ()), DEVICE) == 0.0
    en = cs.energy_cost(breakdown(442368, 432, 16384), DEVICE)
    assert en == pytest.approx(442368e-12 + 67264e-10, rel=1e-12)
    doubled = cs.energy_cost(breakdown(2 * 442368, 432, 16384), DEVICE)
    assert doubled - en == pytest.approx(442368e-12, rel=1e-9)


def test_norm_clamps_and_matches_log():
    assert cs.norm(1.0) == 0.0
    assert cs.norm(math.e) == pytest.approx(1.0)
    assert cs.norm(-0.02) == pytest.approx(math.log(1e-6))
    assert cs.norm(-0.02) == pytest.approx(-13.8155, abs=1e-4)


def _report(a_loss, energy):
    return build_report(
        breakdown(int(energy), 1, 10**12), accuracy=0.9 - a_loss, base_accuracy=0.9,
        device=DEVICE,
    )


def test_objective_score_reference_point():
    report = build_report(breakdown(442368, 432, 16384), 0.0, 1.0, DEVICE)
    # with accuracy loss 1 the first term vanishes; pick E = e^2 directly
    cfg = DEFAULT_CONFIG
    e_sq = math.e ** 2
    value = 0.5 * cs.norm(1.0, cfg) - 0.5 * cs.norm(e_sq, cfg)
    assert value == pytest.approx(-1.0)
    assert cs.objective_score(report, 0.5, 0.5) == pytest.approx(
        0.5 * cs.norm(report.accuracy_loss) - 0.5 * cs.norm(report.energy_proxy))


def test_objective_score_orderings():
    # lambda2 = 0 reduces to accuracy ordering
    low_loss = _report(0.01, 500.0)
    high_loss = _report(0.05, 500.0)
    assert cs.objective_score(low_loss, 1.0, 0.0) < cs.objective_score(high_loss, 1.0, 0.0)
    # equal losses: the higher-proxy report strictly wins
    weak = _report(0.02, 100.0)
    strong = _report(0.02, 300.0)
    assert cs.objective_score(strong, 0.5, 0.5) < cs.objective_score(weak, 0.5, 0.5)


def test_scaling_counts_preserves_intensities():
    base = breakdown(10**6, 10**3, 10**4)
    rep1 = build_report(base, 0.9, 0.9, DEVICE)
    for k in (2, 5, 11):
        scaled = breakdown(k * 10**6, k * 10**3, k * 10**4)
        rep2 = build_report(scaled, 0.9, 0.9, DEVICE)
        assert rep2.param_intensity == pytest.approx(rep1.param_intensity)
        assert rep2.activation_intensity == pytest.approx(rep1.activation_intensity)
        mac_term1 = base.macs * DEVICE.energy_per_mac
        mac_term2 = scaled.macs * DEVICE.energy_per_mac
        assert mac_term2 == pytest.approx(k * mac_term1)


def test_report_fields_are_consistent(cifar5, edge_device):
    cost = cs.count_network(cifar5)
    report = build_report(cost, 0.9, 0.92, edge_device)
    assert report.param_intensity == cost.macs / cost.params
    assert report.activation_intensity == cost.macs / cost.activations
    assert report.energy_proxy == pytest.approx(
        cs.aggregate_intensities(report.param_intensity, report.activation_intensity))
    assert report.latency == pytest.approx(report.latency_load + report.latency_inference)
    assert report.accuracy_loss == pytest.approx(0.02)


def test_config_validation():
    assert CostModelConfig().violations() == []
    assert CostModelConfig(mu1=0.7, mu2=0.2).violations()
    assert CostModelConfig(norm_epsilon=0.0).violations()


def test_device_validation_and_loading(data_dir):
    for name in ("device_edge_board", "device_smartphone", "device_robot"):
        dev = cs.load_device(data_dir / f"{name}.json")
        assert dev.violations() == []
    with pytest.raises(SpecValidationError):
        cs.DeviceProfile("bad", 0, 1, 1, 1, 1, 1, 1).violations() and None
        cs.latency(CostBreakdown(0, 0, 0, ()), cs.DeviceProfile("bad", 0, 1, 1, 1, 1, 1, 1))
