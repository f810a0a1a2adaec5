"""Interferometric phase-stability budgets and timing estimates.

Quantifies why single-photon-interference repeater links need sub-wavelength
path stability over the whole entanglement-generation time, and the margin a
two-photon-interference link gains from only needing stability within the
photon coherence length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT_M_S = 2.998e8

FIBER = "fiber"
FREE_SPACE = "free_space"


def attenuation_length_km(loss_db_per_km: float) -> float:
    """L_att such that exp(-L/L_att) = 10^(-alpha L / 10)."""
    if loss_db_per_km <= 0.0:
        return math.inf
    return 10.0 / (loss_db_per_km * math.log(10.0))


def channel_transmission(length_km: float, loss_db_per_km: float) -> float:
    return 10.0 ** (-loss_db_per_km * length_km / 10.0)


@dataclass(frozen=True)
class ChannelSpec:
    length_km: float
    loss_db_per_km: float
    medium: str = FIBER
    wavelength_um: float = 1.0

    def __post_init__(self):
        if self.length_km <= 0 or self.loss_db_per_km < 0 or self.wavelength_um <= 0:
            raise ValueError("channel parameters must be positive")
        if self.medium not in (FIBER, FREE_SPACE):
            raise ValueError(f"unknown medium {self.medium!r}")

    @property
    def transmission(self) -> float:
        return channel_transmission(self.length_km, self.loss_db_per_km)

    @property
    def classical_communication_time_s(self) -> float:
        return self.length_km * 1e3 / SPEED_OF_LIGHT_M_S


@dataclass(frozen=True)
class PhaseBudget:
    """Consistent triple of phase, path-length, and timing tolerances:
    delta_x = (delta_phi / 2 pi) lambda and delta_t = delta_x / c."""

    delta_phi_max: float
    delta_x_max: float
    delta_t_max: float


def jitter_budget(channel: ChannelSpec, delta_phi_max: float) -> PhaseBudget:
    """Path-length and timing jitter allowed by a phase tolerance."""
    if not 0.0 < delta_phi_max <= 2.0 * math.pi:
        raise ValueError("delta_phi_max must lie in (0, 2 pi]")
    wavelength_m = channel.wavelength_um * 1e-6
    delta_x = delta_phi_max / (2.0 * math.pi) * wavelength_m
    return PhaseBudget(delta_phi_max, delta_x, delta_x / SPEED_OF_LIGHT_M_S)


def generation_duration(channel: ChannelSpec, chi: float) -> float:
    """Expected duration of single-photon-interference entanglement
    generation over the channel: T_cc / (chi * exp(-L0/L_att))."""
    if chi <= 0.0:
        raise ValueError("chi must be positive")
    return channel.classical_communication_time_s / (chi * channel.transmission)


def two_photon_robustness_ratio(wavelength_um: float,
                                coherence_length_m: float) -> float:
    """Stability-margin gain of two-photon over single-photon interference:
    the tolerable length scale grows from a wavelength fraction to the same
    fraction of the coherence length."""
    if wavelength_um <= 0 or coherence_length_m <= 0:
        raise ValueError("inputs must be positive")
    return coherence_length_m / (wavelength_um * 1e-6)


def accumulated_phase_fidelity(per_segment_phase_sigmas, samples: int,
                               seed: int, means=None) -> tuple[float, float]:
    """Monte-Carlo fidelity under accumulated segment phase noise.

    Each segment contributes an independent Gaussian up-down phase difference;
    the pair fidelity against the zero-phase target is cos^2(total/2).
    Returns (mean, sample standard deviation); deterministic under the seed.
    """
    sigmas = np.asarray(per_segment_phase_sigmas, dtype=float)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if means is None:
        means = np.zeros_like(sigmas)
    else:
        means = np.asarray(means, dtype=float)
        if means.shape != sigmas.shape:
            raise ValueError("means and sigmas must have the same length")
    rng = np.random.default_rng(seed)
    if sigmas.size == 0:
        return 1.0, 0.0
    draws = rng.normal(means, sigmas, size=(samples, sigmas.size))
    total = draws.sum(axis=1)
    fid = np.cos(total / 2.0) ** 2
    return float(fid.mean()), float(fid.std())


def dlcz_repeat_until_success_time(segment_probs, t1: float) -> float:
    """Total duration over which phases must stay locked when every failed
    connection forces a rebuild: t1 / prod(p_i)."""
    product = 1.0
    for p in segment_probs:
        if not 0.0 < p <= 1.0:
            raise ValueError("probabilities must lie in (0, 1]")
        product *= p
    return t1 / product
