"""Per-query energy arithmetic.

    E_query [Wh] = (PUE / 3.6) * P_node [kW] * L_eff / TPS

The 3.6 turns kW*s into Wh. All functions accept scalars or numpy arrays.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

KW_SECONDS_PER_WH = 3.6

REFERENCE_GPUS = 8
REFERENCE_P_MAX_KW = 11.3
REFERENCE_P_IDLE_KW = 2.7
COUPLED_PEAK_FRACTION = 0.9


class EffectiveLengthMode(str, enum.Enum):
    OUTPUT_ONLY = "output_only"
    INPUT_PLUS_OUTPUT = "input_plus_output"


class PowerMode(str, enum.Enum):
    INDEPENDENT = "independent"
    COUPLED = "coupled"


@dataclass(frozen=True)
class NodeSpec:
    gpu_count: int = REFERENCE_GPUS
    p_max_kw: float = REFERENCE_P_MAX_KW
    p_idle_kw: float = REFERENCE_P_IDLE_KW

    def __post_init__(self):
        if self.gpu_count < 1:
            raise ValueError(f"gpu_count must be >= 1, got {self.gpu_count}")
        if not self.p_max_kw > 0:
            raise ValueError(f"p_max_kw must be > 0, got {self.p_max_kw}")
        if not 0 <= self.p_idle_kw < self.p_max_kw:
            raise ValueError(f"need 0 <= p_idle_kw < p_max_kw, got {self.p_idle_kw} / {self.p_max_kw}")

    @classmethod
    def for_gpus(cls, gpu_count: int) -> "NodeSpec":
        """H100 node with peak power scaled linearly from the 8-GPU reference, to 0.1 kW.

        Idle power stays at the reference value.
        """
        p_max = round(REFERENCE_P_MAX_KW * gpu_count / REFERENCE_GPUS * 10) / 10
        return cls(gpu_count, p_max, REFERENCE_P_IDLE_KW)


def _scalar_or_array(value, *inputs):
    return float(value) if all(np.ndim(x) == 0 for x in inputs) else value


def energy_per_query(pue, p_node_kw, l_eff, tps):
    """Energy in Wh for one query."""
    pue_a, tps_a = np.asarray(pue, dtype=float), np.asarray(tps, dtype=float)
    if np.any(tps_a <= 0):
        raise ValueError("tps must be > 0")
    if np.any(pue_a < 1):
        raise ValueError("pue must be >= 1")
    energy = (pue_a / KW_SECONDS_PER_WH) * (np.asarray(p_node_kw, dtype=float) * np.asarray(l_eff, dtype=float) / tps_a)
    return _scalar_or_array(energy, pue, p_node_kw, l_eff, tps)


def effective_length(l_in, l_out, mode: EffectiveLengthMode | str):
    mode = EffectiveLengthMode(mode)
    if mode is EffectiveLengthMode.OUTPUT_ONLY:
        return l_out
    return np.add(l_in, l_out) if np.ndim(l_in) or np.ndim(l_out) else l_in + l_out


def coupled_node_power(tps, tps_cap: float, node: NodeSpec):
    """Node draw rising linearly from idle at zero throughput to 90% of peak at the cap."""
    tps_a = np.asarray(tps, dtype=float)
    if not tps_cap > 0:
        raise ValueError(f"tps_cap must be > 0, got {tps_cap}")
    if np.any(tps_a < 0) or np.any(tps_a > tps_cap):
        raise ValueError("tps must lie in [0, tps_cap]")
    peak = COUPLED_PEAK_FRACTION * node.p_max_kw
    power = node.p_idle_kw + (peak - node.p_idle_kw) * (tps_a / tps_cap)
    # exact endpoint, free of rounding in the affine form
    power = np.where(tps_a == tps_cap, peak, power)
    return _scalar_or_array(power, tps)


def apply_alpha(energy_wh, alpha):
    alpha_a = np.asarray(alpha, dtype=float)
    if np.any(alpha_a <= 0):
        raise ValueError("alpha must be > 0")
    return _scalar_or_array(np.asarray(energy_wh, dtype=float) / alpha_a, energy_wh, alpha)
