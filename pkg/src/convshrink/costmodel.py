"""Hardware-efficiency metrics for candidate networks on described devices.

The energy-efficiency proxy aggregates the two arithmetic intensities:

    E = mu1 * C/S_p + mu2 * C/S_a        (defaults mu1=0.4, mu2=0.6)

Latency is a two-term load + compute model and the energy cost is a linear
MAC + byte-movement model. All functions are pure; shipped device profiles
use synthetic constants and say so.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .arch import CostBreakdown
from .errors import SpecValidationError

DEFAULT_MU1 = 0.4
DEFAULT_MU2 = 0.6
DEFAULT_NORM_EPSILON = 1e-6


@dataclass(frozen=True, slots=True)
class DeviceProfile:
    """Rates and energies of a deployment target; all strictly positive."""

    name: str
    mem_bandwidth: float        # bytes / second
    compute_throughput: float   # MACs / second
    bytes_per_param: float
    bytes_per_activation: float
    cache_capacity: float       # bytes
    energy_per_mac: float       # joules
    energy_per_byte_moved: float  # joules

    def violations(self) -> list[str]:
        v = []
        for name in (
            "mem_bandwidth", "compute_throughput", "bytes_per_param",
            "bytes_per_activation", "cache_capacity", "energy_per_mac",
            "energy_per_byte_moved",
        ):
            if getattr(self, name) <= 0:
                v.append(f"device {self.name}: {name} must be strictly positive")
        return v


@dataclass(frozen=True, slots=True)
class CostModelConfig:
    """Aggregation weights for the intensity proxy and the log-norm floor."""

    mu1: float = DEFAULT_MU1
    mu2: float = DEFAULT_MU2
    norm_epsilon: float = DEFAULT_NORM_EPSILON

    def violations(self) -> list[str]:
        v = []
        if self.mu1 < 0 or self.mu2 < 0:
            v.append("mu1 and mu2 must be nonnegative")
        if abs(self.mu1 + self.mu2 - 1.0) > 1e-12:
            v.append(f"mu1 + mu2 must equal 1, got {self.mu1 + self.mu2}")
        if self.norm_epsilon <= 0:
            v.append("norm_epsilon must be positive")
        return v


DEFAULT_CONFIG = CostModelConfig()


@dataclass(frozen=True, slots=True)
class PerfReport:
    """Everything the searchers rank and the budgets constrain."""

    accuracy: float
    accuracy_loss: float
    latency: float              # seconds, load + inference
    latency_load: float
    latency_inference: float
    macs: int
    params: int
    activations: int
    param_intensity: float      # macs / params
    activation_intensity: float  # macs / activations
    energy_proxy: float
    energy_cost: float          # joules
    memory_bytes: float         # params * bytes_per_param


def aggregate_intensities(param_intensity: float, activation_intensity: float,
                          config: CostModelConfig = DEFAULT_CONFIG) -> float:
    """Weighted aggregation of the two arithmetic intensities."""
    return config.mu1 * param_intensity + config.mu2 * activation_intensity


def energy_proxy(macs: float, params: float, activations: float,
                 config: CostModelConfig = DEFAULT_CONFIG) -> float:
    """E = mu1*C/S_p + mu2*C/S_a. Higher is better (more data reuse)."""
    if params <= 0 or activations <= 0:
        raise SpecValidationError("energy_proxy requires positive params and activations")
    return aggregate_intensities(macs / params, macs / activations, config)


def latency(cost: CostBreakdown, device: DeviceProfile) -> tuple[float, float, float]:
    """(T_load, T_inference, T): byte movement over bandwidth + MACs over throughput."""
    bad = device.violations()
    if bad:
        raise SpecValidationError(bad)
    moved = cost.params * device.bytes_per_param + cost.activations * device.bytes_per_activation
    t_load = moved / device.mem_bandwidth
    t_inf = cost.macs / device.compute_throughput
    return t_load, t_inf, t_load + t_inf


def energy_cost(cost: CostBreakdown, device: DeviceProfile) -> float:
    """Joules: macs * e_mac + bytes moved * e_byte."""
    bad = device.violations()
    if bad:
        raise SpecValidationError(bad)
    moved = cost.params * device.bytes_per_param + cost.activations * device.bytes_per_activation
    return cost.macs * device.energy_per_mac + moved * device.energy_per_byte_moved


def norm(x: float, config: CostModelConfig = DEFAULT_CONFIG) -> float:
    """ln(max(x, epsilon)); the clamp absorbs zero and negative inputs."""
    return math.log(max(x, config.norm_epsilon))


def objective_score(report: PerfReport, lambda1: float, lambda2: float,
                    config: CostModelConfig = DEFAULT_CONFIG) -> float:
    """lambda1*norm(accuracy loss) - lambda2*norm(energy proxy); lower is better."""
    return lambda1 * norm(report.accuracy_loss, config) - lambda2 * norm(report.energy_proxy, config)


def build_report(cost: CostBreakdown, accuracy: float, base_accuracy: float,
                 device: DeviceProfile,
                 config: CostModelConfig = DEFAULT_CONFIG) -> PerfReport:
    """Assemble a consistent PerfReport from counts + predicted accuracy."""
    t_load, t_inf, t = latency(cost, device)
    csp = cost.macs / cost.params if cost.params else 0.0
    csa = cost.macs / cost.activations if cost.activations else 0.0
    return PerfReport(
        accuracy=accuracy,
        accuracy_loss=base_accuracy - accuracy,
        latency=t,
        latency_load=t_load,
        latency_inference=t_inf,
        macs=cost.macs,
        params=cost.params,
        activations=cost.activations,
        param_intensity=csp,
        activation_intensity=csa,
        energy_proxy=aggregate_intensities(csp, csa, config),
        energy_cost=energy_cost(cost, device),
        memory_bytes=cost.params * device.bytes_per_param,
    )


# ---------------------------------------------------------------------------
# device profile file format (JSON)
# ---------------------------------------------------------------------------

def device_from_dict(doc: dict) -> DeviceProfile:
    try:
        dev = DeviceProfile(
            name=str(doc["name"]),
            mem_bandwidth=float(doc["mem_bandwidth"]),
            compute_throughput=float(doc["compute_throughput"]),
            bytes_per_param=float(doc["bytes_per_param"]),
            bytes_per_activation=float(doc["bytes_per_activation"]),
            cache_capacity=float(doc["cache_capacity"]),
            energy_per_mac=float(doc["energy_per_mac"]),
            energy_per_byte_moved=float(doc["energy_per_byte_moved"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecValidationError(f"malformed device profile: {exc}") from exc
    bad = dev.violations()
    if bad:
        raise SpecValidationError(bad)
    return dev


def load_device(path: str | Path) -> DeviceProfile:
    with open(path, "r", encoding="utf-8") as fh:
        return device_from_dict(json.load(fh))
