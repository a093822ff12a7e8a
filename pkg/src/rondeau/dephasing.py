"""Closed-form dephasing-limit model of the driven polarization.

Each imperfect inversion kick multiplies the protected x-polarization by
-cos(epsilon); the transverse component it creates is assumed to be echoed
away before the next kick and is dropped.  An intrinsic rate Gamma_0
accounts for the residual decay of the spin-locked polarization.  The model
is the fast oracle the exact simulator and the codec are validated against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evolution import SignalTrace, half_sample_slot
from .sequences import MonopoleSpec, SymbolStream, order_label


@dataclass(frozen=True)
class DephasingParams:
    """Inputs of the dephasing model.

    ``epsilon`` is the kick deviation gamma_y - pi; ``gamma_0`` the
    intrinsic decay rate (measured, not predicted); ``sweep_slope`` the
    coefficient B of period sweeps with epsilon = B*T; ``epsilon_offset``
    a static calibration error added on top of B*T.
    """

    spec: MonopoleSpec
    epsilon: float = 0.0
    gamma_0: float = 0.0
    sweep_slope: float = 0.0
    epsilon_offset: float = 0.0

    def __post_init__(self):
        if self.gamma_0 < 0:
            raise ValueError(f"gamma_0 must be >= 0, got {self.gamma_0}")


def model_signal(stream: SymbolStream, params: DephasingParams,
                 amplitude: float = 1.0,
                 readout_noise: float = 0.0, noise_seed: int | None = None) -> SignalTrace:
    """Piecewise-constant trace on the same readout grid as the simulator.

    The value after slot j is amplitude * (-cos eps)**kicks(j) * exp(-Gamma_0 * t_j);
    at the half-period sample this reproduces the sign law (-1)**cycle * symbol
    for eps = 0.
    """
    spec = params.spec
    if not spec.kick_minus < half_sample_slot(spec) <= spec.kick_plus:
        raise ValueError("half-period readout does not distinguish the blocks")
    cycles = len(stream)
    per_block = spec.slots_per_block
    total = cycles * per_block

    kick_flags = np.zeros(total, dtype=bool)
    if cycles:
        kick_slots = np.where(stream.symbols > 0, spec.kick_plus, spec.kick_minus)
        kick_flags[np.arange(cycles) * per_block + kick_slots] = True
    kicks = np.cumsum(kick_flags)

    slot_times = spec.tau * np.arange(1, total + 1)
    values = amplitude * np.power(-math.cos(params.epsilon), kicks) \
        * np.exp(-params.gamma_0 * slot_times)

    times = np.concatenate([[0.0], slot_times])
    values = np.concatenate([[amplitude], values])
    slots = np.arange(total + 1)
    cycle_index = np.maximum(slots - 1, 0) // per_block
    pulse_index = np.where(slots == 0, 0, (slots - 1) % per_block + 1)
    if readout_noise > 0.0:
        rng = np.random.Generator(np.random.PCG64(noise_seed))
        values = values + readout_noise * rng.standard_normal(values.size)
    return SignalTrace(
        times=times, values=values, cycle_index=cycle_index,
        pulse_index=pulse_index, block_duration=spec.block_duration,
        num_cycles=cycles,
        meta={"engine": "dephasing", "stream_seed": stream.seed,
              "n_order": order_label(stream), "gamma_y": spec.gamma_y,
              "epsilon": params.epsilon, "gamma_0": params.gamma_0,
              "tau": spec.tau, "pulses_per_block": spec.pulses_per_block},
    )


def predicted_rate(params: DephasingParams, period: float | None = None) -> float:
    """Decay rate Gamma_e from the small-angle expansion of the kick factor.

    With a fixed deviation: Gamma_e = Gamma_0 + eps**2 / (2 T).  When the
    deviation tracks the period (eps = eps_offset + B*T) this unfolds to
    Gamma_0 + eps_offset**2/(2T) + B*eps_offset + B**2 T / 2, which bends
    up again as T -> 0 whenever the calibration offset is nonzero.
    """
    T = params.spec.block_duration if period is None else period
    eps = params.epsilon + params.epsilon_offset + params.sweep_slope * T
    if abs(eps) >= math.pi / 2:
        raise ValueError(f"kick deviation {eps:.3f} outside the small-angle regime")
    return params.gamma_0 + eps**2 / (2.0 * T)
