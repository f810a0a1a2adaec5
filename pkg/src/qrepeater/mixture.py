"""Closed-form layer: the effective mixture-state algebra for swapping,
connection, the event-ready entangler and purification.

Every coefficient formula here has an independent brute-force counterpart in
``qrepeater.blocks``; the two are compared on an efficiency grid by the
``verify`` command and the test suite.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class EfficiencyParams:
    """Retrieve and detection efficiencies; ``eta`` is the combined
    two-photon readout-and-detection efficiency eta_r^2 * eta1^2."""

    eta_r: float = 1.0
    eta1: float = 1.0
    eta2: float | None = None

    def __post_init__(self):
        for name in ("eta_r", "eta1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.eta2 is not None and not 0.0 <= self.eta2 <= 1.0:
            raise ValueError("eta2 must lie in [0, 1]")

    @property
    def eta2_effective(self) -> float:
        if self.eta2 is not None:
            return self.eta2
        return 1.0 - (1.0 - self.eta1) ** 2

    @property
    def eta(self) -> float:
        return self.eta_r ** 2 * self.eta1 ** 2


@dataclass(frozen=True)
class MixtureState:
    """Effective entangled pair between two memory-qubit nodes.

    ``p2`` weights the two-excitation entangled sector (with Bell fidelity
    ``fidelity`` onto the correlated state), ``p1`` the one-excitation
    maximally mixed sector, ``p0`` the vacuum, and ``p2_hi``/``p3_hi`` the
    residual two- and three-excitation contamination left by higher-order
    source excitations.
    """

    p2: float
    p1: float = 0.0
    p0: float = 0.0
    p2_hi: float = 0.0
    p3_hi: float = 0.0
    fidelity: float = 1.0
    level: int = 0
    normalized: bool = False

    def __post_init__(self):
        for name in ("p2", "p1", "p0", "p2_hi", "p3_hi"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0.0 <= self.fidelity <= 1.0:
            raise ValueError("fidelity must lie in [0, 1]")
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if self.normalized and abs(self.total - 1.0) > NORMALIZATION_TOL:
            raise ValueError("state flagged normalized but weights do not sum to 1")

    @property
    def total(self) -> float:
        return self.p2 + self.p1 + self.p0 + self.p2_hi + self.p3_hi

    @property
    def weights(self) -> tuple[float, float, float, float, float]:
        return (self.p2, self.p1, self.p0, self.p2_hi, self.p3_hi)


def normalize(state: MixtureState) -> MixtureState:
    total = state.total
    if total <= 0.0:
        raise ValueError("cannot normalize a zero-weight mixture")
    return replace(
        state,
        p2=state.p2 / total, p1=state.p1 / total, p0=state.p0 / total,
        p2_hi=state.p2_hi / total, p3_hi=state.p3_hi / total,
        normalized=True,
    )


@dataclass(frozen=True)
class SectorCoefficients:
    """Unnormalized (p2, p1, p0) weights plus their sum, the heralding
    probability of one accepted coincidence."""

    p2: float
    p1: float
    p0: float

    @property
    def success(self) -> float:
        return self.p2 + self.p1 + self.p0


def swap_coefficients(params: EfficiencyParams) -> SectorCoefficients:
    """Unnormalized sector weights left by one accepted coincidence when two
    generation-type pairs are swapped with retrieve efficiency eta_r and
    non-resolving detectors."""
    r = params.eta_r
    e1 = params.eta1
    e2 = params.eta2_effective
    p2 = r ** 2 * e1 ** 2 / 32
    p1 = (r ** 2 * (1 - r) * e1 ** 2 / 16
          + r ** 3 / 32 * (e1 * e2 / 2 + e1 ** 2))
    p0 = (r ** 3 / 32 * (1 - r) * (e1 * e2 / 2 + e1 ** 2)
          + r ** 2 * (1 - r) ** 2 * e1 ** 2 / 32
          + r ** 4 / 64 * (e2 ** 2 / 4 + e1 ** 2))
    return SectorCoefficients(p2, p1, p0)


def entangler_coefficients(p_r: float, eta1: float,
                           eta2: float | None = None,
                           as_printed: bool = False) -> SectorCoefficients:
    """Unnormalized sector weights of the event-ready entangler per accepted
    coincidence.

    The default vacuum coefficient is the one the Fock oracle reproduces
    exactly; ``as_printed=True`` instead returns the historical closed form,
    whose two-photon emission weight reads (1-p_r^2) for (1-p_r)^2 and whose
    four-photon term is twice the interference-suppressed value.
    """
    if not 0.0 <= p_r <= 1.0:
        raise ValueError("p_r must lie in [0, 1]")
    e1 = eta1
    e2 = eta2 if eta2 is not None else 1.0 - (1.0 - eta1) ** 2
    p2 = p_r ** 4 * e1 ** 2 / 32
    p1 = (p_r ** 3 * (1 - p_r) * e1 ** 2 / 8
          + p_r ** 4 * e1 ** 2 / 32
          + p_r ** 4 * e1 * e2 / 64)
    if as_printed:
        p0 = (p_r ** 3 * (1 - p_r) * (2 * e1 ** 2 + e1 * e2)
              + p_r ** 4 * e1 * e2
              + 4 * p_r ** 2 * (1 - p_r ** 2) * e1 ** 2) / 32
    else:
        p0 = (p_r ** 3 * (1 - p_r) * (2 * e1 ** 2 + e1 * e2)
              + p_r ** 4 * e1 * e2 / 2
              + 4 * p_r ** 2 * (1 - p_r) ** 2 * e1 ** 2) / 32
    return SectorCoefficients(p2, p1, p0)


@dataclass(frozen=True)
class PurificationResult:
    coefficients: SectorCoefficients
    fidelity_out: float

    @property
    def success(self) -> float:
        return self.coefficients.success


def purified_fidelity(fidelity: float) -> float:
    """Bell-sector fidelity after one purification round,
    F' = F^2 / (F^2 + (1-F)^2)."""
    denom = fidelity ** 2 + (1.0 - fidelity) ** 2
    return fidelity ** 2 / denom


def swapped_fidelity(fidelity: float) -> float:
    """Bell-sector fidelity after connecting two pairs of equal fidelity:
    correlated x correlated and anticorrelated x anticorrelated both herald
    the correlated state, so F -> F^2 + (1-F)^2."""
    return fidelity ** 2 + (1.0 - fidelity) ** 2


def purification_coefficients(rho_m: MixtureState,
                              params: EfficiencyParams) -> PurificationResult:
    """Unnormalized output sector weights and improved fidelity of one
    linear-optical purification round acting on two copies of ``rho_m``."""
    if not rho_m.normalized and abs(rho_m.total - 1.0) > NORMALIZATION_TOL:
        raise ValueError("purification expects a normalized input mixture")
    F = rho_m.fidelity
    p2m, p1m, p0m = rho_m.p2, rho_m.p1, rho_m.p0
    r = params.eta_r
    e1 = params.eta1
    e2 = params.eta2_effective
    fterm = F ** 2 + (1.0 - F) ** 2
    p2p = 0.5 * p2m ** 2 * r ** 4 * e1 ** 2 * fterm
    p1p = (p2m ** 2 * r ** 3 * (1 - r) * e1 ** 2
           + 0.5 * p1m * p2m * r ** 3 * e1 ** 2
           + p2m ** 2 * r ** 4 * F * (1 - F) * e1 * e2)
    p0p = (p2m ** 2 * (0.25 * r ** 4 * F ** 2 * e2 ** 2
                       + r ** 3 * (1 - r) * F * (1 - F) * e1 * e2
                       + r ** 2 * (1 - r) ** 2 * (F + 0.5) * e1 ** 2
                       + r ** 3 * (1 - r) * F ** 2 * e1 * e2)
           + p2m * p1m * (r ** 2 * (1 - r) * (F + 0.5) * e1 ** 2
                          + r ** 3 * (F / 2) * e1 * e2)
           + 0.125 * p1m ** 2 * r ** 2 * e1 ** 2
           + p2m * p0m * r ** 2 * F * e1 ** 2)
    return PurificationResult(SectorCoefficients(p2p, p1p, p0p),
                              purified_fidelity(F))


@dataclass(frozen=True)
class ConnectionConstants:
    """Order-one prefactors of the higher-order terms in the connection
    recursion.  The underlying analysis only fixes these terms up to O(1);
    every prefactor defaults to 1 and is configurable."""

    p1_from_p2hi: float = 1.0
    p1_from_p1hi: float = 1.0
    p1_from_p3hi: float = 1.0
    p0_from_p2hi: float = 1.0
    p2hi_pass: float = 1.0
    p2hi_from_p3hi: float = 1.0
    p3hi_pass: float = 1.0


DEFAULT_CONSTANTS = ConnectionConstants()


@dataclass(frozen=True)
class ConnectStepResult:
    state: MixtureState          # unnormalized, level j
    success_probability: float


def connect_step(state: MixtureState, params: EfficiencyParams,
                 chi: float | None = None,
                 constants: ConnectionConstants = DEFAULT_CONSTANTS) -> ConnectStepResult:
    """One nested entanglement-swapping step on two copies of ``state``.

    Implements the leading-order coefficient recursion (summed over the four
    accepted coincidences) with its explicitly listed higher-order source
    terms; three-photon coincidences are neglected.  The Bell-sector fidelity
    composes as F -> F^2 + (1-F)^2.
    """
    if not state.normalized and abs(state.total - 1.0) > NORMALIZATION_TOL:
        raise ValueError("connect_step expects a normalized input mixture")
    if chi is not None:
        j = state.level + 1
        if j * chi > 0.1:
            warnings.warn(
                f"level {j} with chi={chi:g}: j*chi={j * chi:g} is not small; "
                "the leading-order recursion degrades",
                stacklevel=2,
            )
    eta = params.eta
    p2, p1, p0 = state.p2, state.p1, state.p0
    h2, h3 = state.p2_hi, state.p3_hi
    c = constants
    p2s = 0.5 * eta * p2 ** 2
    p1s = 0.5 * eta * (p1 * p2
                       + c.p1_from_p2hi * p2 * h2
                       + c.p1_from_p1hi * p1 * h2
                       + c.p1_from_p3hi * p0 * h3)
    p0s = 0.125 * eta * (p1 ** 2 + c.p0_from_p2hi * p0 * h2)
    h2s = eta * (c.p2hi_pass * p2 * h2 + c.p2hi_from_p3hi * p1 * h3)
    h3s = eta * c.p3hi_pass * p2 * h3
    success = p2s + p1s + p0s
    out = MixtureState(
        p2=p2s, p1=p1s, p0=p0s, p2_hi=h2s, p3_hi=h3s,
        fidelity=swapped_fidelity(state.fidelity),
        level=state.level + 1,
        normalized=False,
    )
    return ConnectStepResult(out, success)
