"""Exact state-vector simulation on small truncated Fock spaces.

States are sparse maps from occupation vectors to complex amplitudes over an
ordered mode register.  All operations are pure functions returning new
states, so circuits can be evaluated concurrently without shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PRUNE_THRESHOLD = 1e-14

PHOTONIC = "photonic"
ATOMIC = "atomic"


@dataclass(frozen=True)
class ModeId:
    """A single bosonic mode: a photonic polarization mode or a collective
    atomic excitation mode."""

    label: str
    kind: str = PHOTONIC
    polarization: str | None = None

    def __post_init__(self):
        if self.kind not in (PHOTONIC, ATOMIC):
            raise ValueError(f"unknown mode kind {self.kind!r}")
        if self.kind == ATOMIC and self.polarization is not None:
            raise ValueError("atomic modes carry no polarization")
        if self.kind == PHOTONIC and self.polarization not in ("H", "V", None):
            raise ValueError(f"unknown polarization {self.polarization!r}")


def photonic_mode(label: str, polarization: str | None = None) -> ModeId:
    return ModeId(label, PHOTONIC, polarization)


def atomic_mode(label: str) -> ModeId:
    return ModeId(label, ATOMIC)


@dataclass(frozen=True)
class PolarizedMode:
    """A spatial photonic rail carrying an H and a V component mode."""

    label: str
    h: ModeId
    v: ModeId

    @property
    def modes(self) -> tuple[ModeId, ModeId]:
        return (self.h, self.v)


def polarized_mode(label: str) -> PolarizedMode:
    return PolarizedMode(
        label,
        photonic_mode(f"{label}.H", "H"),
        photonic_mode(f"{label}.V", "V"),
    )


@dataclass(frozen=True)
class SourceParams:
    """Write-pulse source strength: excitation probability per pulse and the
    expansion order kept in the two-mode-squeezed series."""

    chi: float
    order: int = 2

    def __post_init__(self):
        if not 0.0 <= self.chi < 1.0:
            raise ValueError("chi must lie in [0, 1)")
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")


@dataclass(frozen=True)
class DetectorModel:
    """Threshold (or number-resolving) detector.

    ``eta1``/``eta2`` are the click probabilities for exactly one / exactly
    two incident photons; three or more photons click with 1-(1-eta1)^n.
    ``eta2`` defaults to 1-(1-eta1)^2 when not given.
    """

    eta1: float = 1.0
    eta2: float | None = None
    number_resolving: bool = False

    def __post_init__(self):
        if not 0.0 <= self.eta1 <= 1.0:
            raise ValueError("eta1 must lie in [0, 1]")
        if self.eta2 is not None and not 0.0 <= self.eta2 <= 1.0:
            raise ValueError("eta2 must lie in [0, 1]")

    @property
    def eta2_effective(self) -> float:
        if self.eta2 is not None:
            return self.eta2
        return 1.0 - (1.0 - self.eta1) ** 2

    def click_probability(self, n: int) -> float:
        if n == 0:
            return 0.0
        if n == 1:
            return self.eta1
        if n == 2:
            return self.eta2_effective
        return 1.0 - (1.0 - self.eta1) ** n


IDEAL_DETECTOR = DetectorModel(eta1=1.0, eta2=1.0)
IDEAL_RESOLVING = DetectorModel(eta1=1.0, eta2=1.0, number_resolving=True)


class FockState:
    """Sparse multi-mode Fock state: occupation vector -> complex amplitude."""

    __slots__ = ("register", "truncation", "amplitudes")

    def __init__(self, register, amplitudes, truncation=2, prune=True):
        register = tuple(register)
        labels = [m.label for m in register]
        if len(set(labels)) != len(labels):
            raise ValueError("mode labels must be unique within a register")
        if truncation < 1:
            raise ValueError("truncation must be >= 1")
        amps: dict[tuple[int, ...], complex] = {}
        for occ, a in amplitudes.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != len(register):
                raise ValueError("occupation length does not match register")
            if any(n < 0 or n > truncation for n in occ):
                raise ValueError(f"occupation {occ} violates truncation {truncation}")
            a = complex(a)
            if prune and abs(a) < PRUNE_THRESHOLD:
                continue
            amps[occ] = amps.get(occ, 0.0) + a
        self.register = register
        self.truncation = truncation
        self.amplitudes = amps

    def index(self, mode: ModeId) -> int:
        try:
            return self.register.index(mode)
        except ValueError:
            raise KeyError(f"mode {mode.label!r} not in register") from None

    def amplitude(self, occ) -> complex:
        return self.amplitudes.get(tuple(occ), 0.0 + 0.0j)

    @property
    def norm_squared(self) -> float:
        return sum(abs(a) ** 2 for a in self.amplitudes.values())

    def normalized(self) -> "FockState":
        n = math.sqrt(self.norm_squared)
        if n == 0.0:
            raise ValueError("cannot normalize the zero state")
        return self.scaled(1.0 / n)

    def scaled(self, factor: complex) -> "FockState":
        return FockState(
            self.register,
            {occ: a * factor for occ, a in self.amplitudes.items()},
            self.truncation,
        )

    def tensor(self, other: "FockState") -> "FockState":
        register = self.register + other.register
        trunc = max(self.truncation, other.truncation)
        amps = {}
        for occ1, a1 in self.amplitudes.items():
            for occ2, a2 in other.amplitudes.items():
                amps[occ1 + occ2] = a1 * a2
        return FockState(register, amps, trunc)

    def overlap(self, other: "FockState") -> complex:
        """<self|other> for states sharing a register."""
        if self.register != other.register:
            raise ValueError("registers differ")
        return sum(
            a.conjugate() * other.amplitudes.get(occ, 0.0)
            for occ, a in self.amplitudes.items()
        )

    def with_truncation(self, truncation: int) -> "FockState":
        return FockState(self.register, self.amplitudes, truncation)

    def __repr__(self):
        terms = ", ".join(
            f"{occ}: {a:.4g}" for occ, a in sorted(self.amplitudes.items())
        )
        return f"FockState({terms})"


def vacuum_state(register, truncation=2) -> FockState:
    register = tuple(register)
    return FockState(register, {(0,) * len(register): 1.0}, truncation)


def make_tmss(register, stokes_mode: ModeId, atomic_mode_: ModeId,
              params: SourceParams, truncation: int | None = None) -> FockState:
    """Unnormalized write-pulse output on one ensemble:

        |0> + sqrt(chi) S'a'|0> + (chi/2) S'^2 a'^2 |0>

    i.e. Fock amplitudes 1, sqrt(chi), chi on the paired occupations (the
    creation-operator coefficient of the second-order term is chi/2, its
    Fock amplitude chi).  Truncated at ``params.order`` excitations.
    """
    register = tuple(register)
    if truncation is None:
        truncation = max(2, params.order)
    if truncation < params.order:
        raise ValueError("truncation below requested expansion order")
    state = vacuum_state(register, truncation)
    i_s = state.index(stokes_mode)
    i_a = state.index(atomic_mode_)
    n = len(register)

    def occ(k):
        v = [0] * n
        v[i_s] = k
        v[i_a] = k
        return tuple(v)

    amps = {occ(0): 1.0, occ(1): math.sqrt(params.chi)}
    if params.order >= 2:
        amps[occ(2)] = params.chi
    return FockState(register, amps, truncation)


def _factorial_sqrt(n: int) -> float:
    return math.sqrt(math.factorial(n))


def apply_linear_map(state: FockState, modes, matrix,
                     out_modes=None) -> FockState:
    """Apply a linear-optical map a_i' -> sum_j U[j, i] b_j' on a subset of
    modes.  ``matrix`` must be unitary for a passive lossless element; the
    expansion is exact bosonic algebra (no truncation of photon number)."""
    modes = list(modes)
    k = len(modes)
    U = np.asarray(matrix, dtype=complex)
    if U.shape != (k, k):
        raise ValueError("matrix shape does not match mode count")
    idxs = [state.index(m) for m in modes]

    if out_modes is None:
        register = state.register
        out_positions = idxs
    else:
        out_modes = list(out_modes)
        if len(out_modes) != k:
            raise ValueError("out_modes length mismatch")
        reg = list(state.register)
        for pos, new in zip(idxs, out_modes):
            reg[pos] = new
        register = tuple(reg)
        out_positions = idxs

    # Truncation may grow: photons can bunch into a single output mode.
    max_total = 0
    for occ in state.amplitudes:
        max_total = max(max_total, sum(occ[i] for i in idxs))
    truncation = max(state.truncation, max_total if max_total else 1)

    new_amps: dict[tuple[int, ...], complex] = {}
    for occ, amp in state.amplitudes.items():
        ns = [occ[i] for i in idxs]
        norm_in = 1.0
        for n in ns:
            norm_in *= _factorial_sqrt(n)
        # Monomial expansion: multiply one photon at a time.
        terms: dict[tuple[int, ...], complex] = {(0,) * k: amp / norm_in}
        for i, n in enumerate(ns):
            col = U[:, i]
            for _ in range(n):
                nxt: dict[tuple[int, ...], complex] = {}
                for mvec, c in terms.items():
                    for j in range(k):
                        u = col[j]
                        if u == 0:
                            continue
                        key = mvec[:j] + (mvec[j] + 1,) + mvec[j + 1:]
                        nxt[key] = nxt.get(key, 0.0) + c * u
                terms = nxt
        base = list(occ)
        for pos in idxs:
            base[pos] = 0
        for mvec, c in terms.items():
            norm_out = 1.0
            for m in mvec:
                norm_out *= _factorial_sqrt(m)
            new_occ = list(base)
            for pos, m in zip(out_positions, mvec):
                new_occ[pos] += m
            key = tuple(new_occ)
            new_amps[key] = new_amps.get(key, 0.0) + c * norm_out
    return FockState(register, new_amps, truncation)


def apply_phase(state: FockState, mode: ModeId, phi: float) -> FockState:
    """Phase plate: a' -> e^{i phi} a'."""
    i = state.index(mode)
    rot = complex(math.cos(phi), math.sin(phi))
    amps = {occ: a * rot ** occ[i] for occ, a in state.amplitudes.items()}
    return FockState(state.register, amps, state.truncation)


def apply_beam_splitter(state: FockState, mode_a: ModeId, mode_b: ModeId,
                        transmissivity: float) -> FockState:
    """Two-mode beam splitter, symmetric i-on-reflection convention:
    a -> sqrt(T) a + i sqrt(1-T) b."""
    if not 0.0 <= transmissivity <= 1.0:
        raise ValueError("transmissivity must lie in [0, 1]")
    if mode_a.kind != PHOTONIC or mode_b.kind != PHOTONIC:
        raise ValueError("beam splitter acts on photonic modes")
    if mode_a.polarization != mode_b.polarization:
        raise ValueError("beam splitter mixes modes of equal polarization")
    t = math.sqrt(transmissivity)
    r = 1j * math.sqrt(1.0 - transmissivity)
    return apply_linear_map(state, [mode_a, mode_b], [[t, r], [r, t]])


_PBS_BASES = {
    "HV": np.array([[1.0, 0.0], [0.0, 1.0]], dtype=complex),
    "DIAG": np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2),
    "CIRC": np.array([[1.0, 1j], [1.0, -1j]], dtype=complex) / math.sqrt(2),
}


def _pbs_matrix(basis: str) -> np.ndarray:
    """4x4 creation-operator map on (aH, aV, bH, bV) for a polarizing beam
    splitter that transmits the basis's plus-type polarization and reflects
    (with phase i) the minus-type."""
    try:
        B = _PBS_BASES[basis]
    except KeyError:
        raise ValueError(f"unknown PBS basis {basis!r}") from None
    # Rows of B are the (plus, minus) basis kets in HV components; creation
    # operators satisfy a_p' = sum_c B[p, c] a_c', hence a_c' = sum_p
    # conj(B[p, c]) a_p'.  Chaining basis change, routing, and the inverse
    # change gives U = R^T M conj(R) on creation-operator columns.
    R = np.zeros((4, 4), dtype=complex)
    R[0:2, 0:2] = B
    R[2:4, 2:4] = B
    M = np.zeros((4, 4), dtype=complex)
    M[0, 0] = 1.0        # a_plus  -> out_a plus (transmitted)
    M[3, 1] = 1j         # a_minus -> out_b minus (reflected)
    M[2, 2] = 1.0        # b_plus  -> out_b plus
    M[1, 3] = 1j         # b_minus -> out_a minus
    return R.T @ M @ R.conj()


def apply_pbs(state: FockState, in_a: PolarizedMode, in_b: PolarizedMode,
              out_a: PolarizedMode, out_b: PolarizedMode, basis: str) -> FockState:
    """Polarizing beam splitter on two spatial rails in the given basis
    ('HV', 'DIAG' for +/-, 'CIRC' for R/L)."""
    U = _pbs_matrix(basis)
    return apply_linear_map(
        state,
        [in_a.h, in_a.v, in_b.h, in_b.v],
        U,
        out_modes=[out_a.h, out_a.v, out_b.h, out_b.v],
    )


def apply_pbs_inverse(state: FockState, in_a: PolarizedMode, in_b: PolarizedMode,
                      out_a: PolarizedMode, out_b: PolarizedMode, basis: str) -> FockState:
    U = _pbs_matrix(basis).conj().T
    return apply_linear_map(
        state,
        [in_a.h, in_a.v, in_b.h, in_b.v],
        U,
        out_modes=[out_a.h, out_a.v, out_b.h, out_b.v],
    )


def split_polarization(state: FockState, rail: PolarizedMode, basis: str,
                       det_plus: ModeId, det_minus: ModeId) -> FockState:
    """Polarization analyzer: route the basis's plus component of a rail to
    one detector mode and the minus component (with phase i) to the other."""
    try:
        B = _PBS_BASES[basis]
    except KeyError:
        raise ValueError(f"unknown PBS basis {basis!r}") from None
    # a_c' = sum_p conj(B[p, c]) a_p'; the plus line exits to det_plus, the
    # minus line reflects (phase i) to det_minus.
    U = np.array(
        [[B[0, 0].conjugate(), B[0, 1].conjugate()],
         [1j * B[1, 0].conjugate(), 1j * B[1, 1].conjugate()]],
        dtype=complex,
    )
    return apply_linear_map(state, [rail.h, rail.v], U,
                            out_modes=[det_plus, det_minus])


def apply_loss(state: FockState, mode: ModeId, transmission: float):
    """Photon loss on one mode as Kraus branches.

    Returns a list of (photons_lost, unnormalized FockState); the branch
    norms sum to the input norm^2.
    """
    if not 0.0 <= transmission <= 1.0:
        raise ValueError("transmission must lie in [0, 1]")
    i = state.index(mode)
    branches: dict[int, dict[tuple[int, ...], complex]] = {}
    for occ, amp in state.amplitudes.items():
        n = occ[i]
        for lost in range(n + 1):
            kept = n - lost
            coeff = math.sqrt(
                math.comb(n, lost)
                * transmission ** kept
                * (1.0 - transmission) ** lost
            )
            if coeff == 0.0:
                continue
            new_occ = occ[:i] + (kept,) + occ[i + 1:]
            d = branches.setdefault(lost, {})
            d[new_occ] = d.get(new_occ, 0.0) + amp * coeff
    return [
        (lost, FockState(state.register, amps, state.truncation))
        for lost, amps in sorted(branches.items())
    ]


def apply_loss_branches(branches, mode: ModeId, transmission: float):
    """Compose a loss channel onto an existing list of (tag, state) branches.

    Tags accumulate as tuples so distinct loss histories stay incoherent.
    """
    out = []
    for tag, st in branches:
        for lost, new in apply_loss(st, mode, transmission):
            out.append((tag + (lost,), new))
    return out


@dataclass(frozen=True)
class DetectionOutcome:
    outcome: str                 # "click" or "no_click"
    count: int                   # incident photon number of this branch
    probability: float
    state: FockState | None      # renormalized conditional state


def detect(state: FockState, mode: ModeId, detector: DetectorModel):
    """Measure one mode with a detector POVM.

    Returns a list of DetectionOutcome branches; branch probabilities sum to
    1 for a normalized input.  Branches with the same ``outcome`` label but
    different ``count`` belong to the same POVM element for a non-resolving
    detector (an observer cannot tell them apart).
    """
    if mode.kind != PHOTONIC:
        raise ValueError("detectors act on photonic modes")
    i = state.index(mode)
    norm = state.norm_squared
    if norm == 0.0:
        raise ValueError("cannot detect on the zero state")
    by_count: dict[int, dict[tuple[int, ...], complex]] = {}
    for occ, amp in state.amplitudes.items():
        d = by_count.setdefault(occ[i], {})
        d[occ] = amp
    outcomes = []
    for n, amps in sorted(by_count.items()):
        weight = sum(abs(a) ** 2 for a in amps.values()) / norm
        sub = FockState(state.register, amps, state.truncation)
        p_click = detector.click_probability(n)
        if p_click > 0.0:
            outcomes.append(
                DetectionOutcome("click", n, weight * p_click, sub.normalized())
            )
        if p_click < 1.0:
            outcomes.append(
                DetectionOutcome("no_click", n, weight * (1.0 - p_click),
                                 sub.normalized())
            )
    return outcomes


def _strip_modes(state: FockState, positions) -> FockState:
    keep = [i for i in range(len(state.register)) if i not in positions]
    register = tuple(state.register[i] for i in keep)
    amps: dict[tuple[int, ...], complex] = {}
    for occ, a in state.amplitudes.items():
        key = tuple(occ[i] for i in keep)
        amps[key] = amps.get(key, 0.0) + a
    return FockState(register, amps, state.truncation)


def condition_on_counts(state: FockState, detector_modes, counts) -> FockState | None:
    """Project detector modes onto exact photon counts and trace them out.

    Returns the unnormalized residual state, or None when the component is
    absent.
    """
    positions = [state.index(m) for m in detector_modes]
    sel = {
        occ: a
        for occ, a in state.amplitudes.items()
        if all(occ[p] == c for p, c in zip(positions, counts))
    }
    if not sel:
        return None
    return _strip_modes(FockState(state.register, sel, state.truncation), set(positions))


def measure_pattern(branches, detector_modes, detector: DetectorModel,
                    clicked, exclusive: bool | None = None):
    """Probability of a coincidence pattern and the residual mixture.

    ``branches`` is a list of (tag, unnormalized FockState); incoherence is
    assumed across branches.  ``clicked`` names the detector modes that must
    click.  Non-resolving detectors use marginal two-fold coincidence
    counting (unnamed detectors are ignored); number-resolving detectors use
    the exclusive pattern (exactly one photon at each named detector, none
    elsewhere).  Returns (probability, [(weight, residual normalized state)]).
    """
    if exclusive is None:
        exclusive = detector.number_resolving
    detector_modes = list(detector_modes)
    clicked = set(clicked)
    prob = 0.0
    residuals = []
    for _tag, st in branches:
        positions = [st.index(m) for m in detector_modes]
        by_counts: dict[tuple[int, ...], dict[tuple[int, ...], complex]] = {}
        for occ, amp in st.amplitudes.items():
            key = tuple(occ[p] for p in positions)
            by_counts.setdefault(key, {})[occ] = amp
        for counts, amps in by_counts.items():
            if exclusive:
                ok = all(
                    (c == 1) if (m in clicked) else (c == 0)
                    for m, c in zip(detector_modes, counts)
                )
                if not ok:
                    continue
                p_detect = 1.0
                for m, c in zip(detector_modes, counts):
                    if m in clicked:
                        p_detect *= detector.click_probability(c)
            else:
                p_detect = 1.0
                for m, c in zip(detector_modes, counts):
                    if m in clicked:
                        p_detect *= detector.click_probability(c)
                if p_detect == 0.0:
                    continue
            sub = FockState(st.register, amps, st.truncation)
            w = sub.norm_squared * p_detect
            if w <= 0.0:
                continue
            residual = _strip_modes(sub, set(positions))
            prob += w
            residuals.append((w, residual.normalized()))
    return prob, residuals
