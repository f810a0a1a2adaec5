"""The four optical building blocks of the repeater, built on the exact Fock
engine: polarization-encoded entanglement generation, entanglement swapping,
the event-ready single-photon entangler, and linear-optical purification.

Each block returns a BlockResult with the coincidence probability and the
decomposition of the residual memory state into sectors.  These results are
the brute-force oracle against which the closed-form coefficient formulas in
``qrepeater.mixture`` are checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import fock
from .fock import (
    DetectorModel,
    FockState,
    IDEAL_DETECTOR,
    ModeId,
    SourceParams,
    apply_loss_branches,
    apply_pbs,
    apply_phase,
    atomic_mode,
    make_tmss,
    measure_pattern,
    photonic_mode,
    polarized_mode,
    split_polarization,
)

ACCEPTED_PATTERNS = ("D1D4", "D1D3", "D2D3", "D2D4")

# Pauli frame bringing each heralded two-memory state onto the canonical
# correlated Bell state (phi+); derived once from the ideal-swap oracle.
PATTERN_CORRECTIONS = {
    "D1D4": "I",
    "D2D3": "I",
    "D1D3": "Z",
    "D2D4": "Z",
}


@dataclass(frozen=True)
class DetectionPattern:
    """A coincidence requirement between two of the four detectors."""

    clicks: frozenset[str]

    def __post_init__(self):
        if not self.clicks <= {"D1", "D2", "D3", "D4"}:
            raise ValueError("detector labels must be D1..D4")

    @classmethod
    def parse(cls, name: str) -> "DetectionPattern":
        if name not in ACCEPTED_PATTERNS:
            raise ValueError(
                f"invalid pattern {name!r}; accepted coincidences are "
                f"{ACCEPTED_PATTERNS}"
            )
        return cls(frozenset({name[:2], name[2:]}))

    @property
    def name(self) -> str:
        a, b = sorted(self.clicks)
        return a + b


@dataclass
class BlockResult:
    """Outcome of conditioning one optical block on a coincidence pattern.

    ``coefficients`` maps sector names (``bell``, ``one``, ``vacuum``,
    ``spurious``) to their unnormalized weights; the weights sum to
    ``probability``.  ``conditional_state`` is set when the residual state is
    pure.  For generation-type blocks ``monomial_amplitudes`` holds the
    magnitudes of the creation-operator coefficients of the (normalized)
    conditional state, the representation in which entangled and
    double-excitation terms read 1/2 and 1/4.
    """

    probability: float
    coefficients: dict[str, float]
    conditional_state: FockState | None = None
    branches: list = field(default_factory=list)
    bell_fidelity: float | None = None
    monomial_amplitudes: dict | None = None

    @property
    def coefficient_sum(self) -> float:
        return sum(self.coefficients.values())


def _zero_result() -> BlockResult:
    return BlockResult(
        probability=0.0,
        coefficients={"bell": 0.0, "one": 0.0, "vacuum": 0.0, "spurious": 0.0},
    )


def _sector_of(occ, side_a_idx, side_b_idx) -> str:
    na = sum(occ[i] for i in side_a_idx)
    nb = sum(occ[i] for i in side_b_idx)
    if na == 1 and nb == 1:
        return "bell"
    if na + nb == 1:
        return "one"
    if na + nb == 0:
        return "vacuum"
    return "spurious"


def _classify(branches, side_a, side_b):
    """Split residual-memory branches into sectors by excitation count:
    one excitation on each side, a single excitation, vacuum, or anything
    else (spurious multi-excitation)."""
    coeffs = {"bell": 0.0, "one": 0.0, "vacuum": 0.0, "spurious": 0.0}
    sector_branches = {k: [] for k in coeffs}
    for w, st in branches:
        idx_a = [st.index(m) for m in side_a]
        idx_b = [st.index(m) for m in side_b]
        split: dict[str, dict] = {}
        for occ, a in st.amplitudes.items():
            split.setdefault(_sector_of(occ, idx_a, idx_b), {})[occ] = a
        for sector, amps in split.items():
            sub = FockState(st.register, amps, st.truncation)
            weight = w * sub.norm_squared
            coeffs[sector] += weight
            sector_branches[sector].append((weight, sub.normalized()))
    return coeffs, sector_branches


def _bell_fidelity(branches, plus_mode_a, plus_mode_b, minus_mode_a,
                   minus_mode_b, phase: complex = 1.0) -> float:
    """Weighted fidelity of two-excitation branches with the correlated Bell
    state (|uu> + phase |dd>)/sqrt(2)."""
    total_w = 0.0
    fid = 0.0
    for w, st in branches:
        ia, ib = st.index(plus_mode_a), st.index(plus_mode_b)
        ja, jb = st.index(minus_mode_a), st.index(minus_mode_b)
        n = len(st.register)
        occ_uu = [0] * n
        occ_uu[ia] = occ_uu[ib] = 1
        occ_dd = [0] * n
        occ_dd[ja] = occ_dd[jb] = 1
        amp = (st.amplitude(tuple(occ_uu))
               + phase.conjugate() * st.amplitude(tuple(occ_dd))) / math.sqrt(2)
        fid += w * abs(amp) ** 2
        total_w += w
    return fid / total_w if total_w > 0 else 0.0


def _detector_rails(state, rail_1, rail_2, first_basis, second_basis,
                    det_labels=("D1", "D2", "D3", "D4")):
    """Interfere two rails on a PBS in ``first_basis`` and analyze each output
    rail in ``second_basis``; returns (state, detector modes)."""
    o1, o2 = polarized_mode("_o1"), polarized_mode("_o2")
    state = apply_pbs(state, rail_1, rail_2, o1, o2, first_basis)
    d1 = photonic_mode(det_labels[0])
    d2 = photonic_mode(det_labels[1])
    d3 = photonic_mode(det_labels[2])
    d4 = photonic_mode(det_labels[3])
    state = split_polarization(state, o1, second_basis, d1, d2)
    state = split_polarization(state, o2, second_basis, d3, d4)
    return state, {"D1": d1, "D2": d2, "D3": d3, "D4": d4}


def _run_pattern(branches, det_map, detector, pattern: DetectionPattern):
    det_modes = [det_map[k] for k in ("D1", "D2", "D3", "D4")]
    clicked = [det_map[k] for k in sorted(pattern.clicks)]
    return fock.measure_pattern(branches, det_modes, detector, clicked)


def bsm1_generate(chi: float, channel_transmission_per_arm: float = 1.0,
                  detector: DetectorModel = IDEAL_DETECTOR,
                  pattern: str = "D1D4",
                  phase_a: float = 0.0, phase_b: float = 0.0,
                  truncation: int = 2, source_order: int = 2) -> BlockResult:
    """Entanglement generation between two sites by two-photon interference.

    Four write-pulse sources (two per site, orthogonally polarized) send
    their Stokes photons through the generation-side measurement: the rails
    interfere on a +/- PBS and each output is analyzed in H/V.
    """
    pat = DetectionPattern.parse(pattern)
    params = SourceParams(chi, source_order)
    u_a, d_a = atomic_mode("uA"), atomic_mode("dA")
    u_b, d_b = atomic_mode("uB"), atomic_mode("dB")
    rail_a, rail_b = polarized_mode("stokesA"), polarized_mode("stokesB")

    def source(mem, phot):
        return make_tmss([mem, phot], phot, mem, params,
                         truncation=max(truncation, source_order))

    state = (source(u_a, rail_a.h)
             .tensor(source(d_a, rail_a.v))
             .tensor(source(u_b, rail_b.h))
             .tensor(source(d_b, rail_b.v)))
    state = state.with_truncation(max(4, truncation))
    for m in rail_a.modes:
        state = apply_phase(state, m, phase_a)
    for m in rail_b.modes:
        state = apply_phase(state, m, phase_b)

    branches = [((), state)]
    if channel_transmission_per_arm != 1.0:
        for m in rail_a.modes + rail_b.modes:
            branches = apply_loss_branches(branches, m,
                                           channel_transmission_per_arm)

    mapped = []
    det_map = None
    for tag, st in branches:
        st2, det_map = _detector_rails(st, rail_a, rail_b, "DIAG", "HV")
        mapped.append((tag, st2))

    norm0 = state.norm_squared  # probabilities relative to normalized sources
    prob, residuals = _run_pattern(mapped, det_map, detector, pat)
    if prob == 0.0:
        return _zero_result()
    prob /= norm0
    residuals = [(w / norm0, st) for w, st in residuals]

    coeffs, _sectors = _classify(residuals, (u_a, d_a), (u_b, d_b))
    conditional = residuals[0][1] if len(residuals) == 1 else None

    # Creation-operator coefficient magnitudes of the dominant residual (the
    # two-photon coincidence branch in the small-chi limit).
    dominant = max(residuals, key=lambda ws: ws[0])[1]
    monomial = {}
    for occ, a in dominant.amplitudes.items():
        norm = 1.0
        for n in occ:
            norm *= math.sqrt(math.factorial(n))
        monomial[occ] = abs(a) / norm
    return BlockResult(prob, coeffs, conditional_state=conditional,
                       branches=residuals, monomial_amplitudes=monomial)


def ideal_generation_state(labels=("uA", "dA", "uB", "dB")) -> FockState:
    """Small-chi limit of the heralded generation state (normalized): equal
    entangled amplitudes of creation-operator weight 1/2 and four
    double-excitation terms of weight 1/4, signs in this engine's phase
    convention."""
    res = bsm1_generate(1e-4, pattern="D1D4")
    st = max(res.branches, key=lambda ws: ws[0])[1]
    # Strip O(chi) corrections: keep the exactly-two-excitation components.
    amps = {occ: a for occ, a in st.amplitudes.items() if sum(occ) == 2}
    st = FockState(st.register, amps, st.truncation).normalized()
    if labels != ("uA", "dA", "uB", "dB"):
        register = tuple(atomic_mode(l) for l in labels)
        st = FockState(register, st.amplitudes, st.truncation)
    return st


def bsm2_swap(eta_r: float = 1.0, detector: DetectorModel = IDEAL_DETECTOR,
              pattern: str = "D1D4", ordering: str = "swap",
              input_states: tuple[FockState, FockState] | None = None) -> BlockResult:
    """Entanglement swapping on two generation-type pairs.

    The memory qubits at the middle site are read out into anti-Stokes
    photons with efficiency ``eta_r``; the photons pass an H/V PBS first and
    each output is then analyzed in the +/- basis (``ordering='swap'``).
    ``ordering='generation'`` applies the generation-side element order
    instead (+/- PBS first), which re-admits the double-excitation
    coincidences that the swap-side order suppresses.
    """
    pat = DetectionPattern.parse(pattern)
    if ordering not in ("swap", "generation"):
        raise ValueError("ordering must be 'swap' or 'generation'")
    if input_states is None:
        left = ideal_generation_state(("uA", "dA", "uBL", "dBL"))
        right = ideal_generation_state(("uBR", "dBR", "uC", "dC"))
    else:
        left, right = input_states
    state = left.tensor(right).with_truncation(4)

    # Retrieval: relabel the middle-site memory modes as anti-Stokes photon
    # modes, then apply the retrieve-efficiency loss per photon.
    rail_1, rail_2 = polarized_mode("asBL"), polarized_mode("asBR")
    relabel = {
        "uBL": rail_1.h, "dBL": rail_1.v,
        "uBR": rail_2.h, "dBR": rail_2.v,
    }
    register = tuple(relabel.get(m.label, m) for m in state.register)
    state = FockState(register, state.amplitudes, state.truncation)

    branches = [((), state)]
    for m in rail_1.modes + rail_2.modes:
        branches = apply_loss_branches(branches, m, eta_r)

    first, second = ("HV", "DIAG") if ordering == "swap" else ("DIAG", "HV")
    mapped = []
    det_map = None
    for tag, st in branches:
        st2, det_map = _detector_rails(st, rail_1, rail_2, first, second)
        mapped.append((tag, st2))

    prob, residuals = _run_pattern(mapped, det_map, detector, pat)
    if prob == 0.0:
        return _zero_result()

    mem_a = (atomic_mode("uA"), atomic_mode("dA"))
    mem_c = (atomic_mode("uC"), atomic_mode("dC"))
    coeffs, sectors = _classify(residuals, mem_a, mem_c)

    phase = -1.0 if PATTERN_CORRECTIONS[pat.name] == "Z" else 1.0
    fidelity = None
    if sectors["bell"]:
        fidelity = _bell_fidelity(sectors["bell"], mem_a[0], mem_c[0],
                                  mem_a[1], mem_c[1], phase=phase)
    conditional = residuals[0][1] if len(residuals) == 1 else None
    return BlockResult(prob, coeffs, conditional_state=conditional,
                       branches=residuals, bell_fidelity=fidelity)


def entangler_run(p_r: float = 1.0, detector: DetectorModel = IDEAL_DETECTOR,
                  pattern: str = "D1D4") -> BlockResult:
    """Event-ready polarization entangler fed by four probabilistic
    single-photon sources.

    Photons 1 (|->) and 1' (|+>) interfere on an H/V PBS whose outputs are
    the kept rail ``a`` and the measured rail ``c``; photons 2 (|V>) and 2'
    (|H>) interfere on a +/- PBS giving the kept rail ``b`` and measured rail
    ``d``.  Rails c and d meet on an R/L PBS and both outputs are analyzed in
    the +/- basis.  A cross-arm coincidence heralds a Bell state between the
    photons left on a and b.
    """
    pat = DetectionPattern.parse(pattern)
    if not 0.0 <= p_r <= 1.0:
        raise ValueError("p_r must lie in [0, 1]")
    if p_r == 0.0:
        return _zero_result()

    rail_1, rail_2 = polarized_mode("in1"), polarized_mode("in2")
    rail_1p, rail_2p = polarized_mode("in1p"), polarized_mode("in2p")
    rail_a, rail_b = polarized_mode("a"), polarized_mode("b")
    rail_c, rail_d = polarized_mode("c"), polarized_mode("d")
    register = (rail_1.modes + rail_2.modes + rail_1p.modes + rail_2p.modes)
    n = len(register)
    sq2 = 1.0 / math.sqrt(2.0)

    def single(rail, amp_h, amp_v):
        amps = {}
        for m, a in ((rail.h, amp_h), (rail.v, amp_v)):
            if a == 0.0:
                continue
            occ = [0] * n
            occ[register.index(m)] = 1
            amps[tuple(occ)] = a
        return amps

    photon_amps = [
        single(rail_1, sq2, -sq2),   # |->
        single(rail_2, 0.0, 1.0),    # |V>
        single(rail_1p, sq2, sq2),   # |+>
        single(rail_2p, 1.0, 0.0),   # |H>
    ]

    # Probabilistic sources: incoherent mixture over emission subsets.
    branches = []
    for mask in range(16):
        k = bin(mask).count("1")
        weight = p_r ** k * (1.0 - p_r) ** (4 - k)
        if weight == 0.0 or k < 2:
            continue  # fewer than two photons can never coincide
        vac = [0] * n
        amps = {tuple(vac): 1.0}
        for i in range(4):
            if not mask & (1 << i):
                continue
            new = {}
            for occ, a in amps.items():
                for p_occ, p_a in photon_amps[i].items():
                    combined = tuple(x + y for x, y in zip(occ, p_occ))
                    new[combined] = new.get(combined, 0.0) + a * p_a
            amps = new
        st = FockState(register, amps, truncation=4)
        branches.append(((mask,), st.scaled(math.sqrt(weight))))

    det_map = None
    mapped = []
    for tag, st in branches:
        st = apply_pbs(st, rail_1, rail_1p, rail_a, rail_c, "HV")
        st = apply_pbs(st, rail_2, rail_2p, rail_b, rail_d, "DIAG")
        st, det_map = _detector_rails(st, rail_c, rail_d, "CIRC", "DIAG",
                                      det_labels=("D1", "D2", "D4", "D3"))
        mapped.append((tag, st))

    prob, residuals = _run_pattern(mapped, det_map, detector, pat)
    if prob == 0.0:
        return _zero_result()
    coeffs, sectors = _classify(residuals, rail_a.modes, rail_b.modes)
    conditional = residuals[0][1] if len(residuals) == 1 else None
    fidelity = None
    if sectors["bell"]:
        # D1D4/D2D3 herald the anticorrelated pair, D1D3/D2D4 the correlated
        # one; fidelity is evaluated against the corresponding target.
        anticorrelated = pat.name in ("D1D4", "D2D3")
        if anticorrelated:
            fidelity = _bell_fidelity(sectors["bell"], rail_a.h, rail_b.v,
                                      rail_a.v, rail_b.h, phase=1.0)
        else:
            fidelity = _bell_fidelity(sectors["bell"], rail_a.h, rail_b.h,
                                      rail_a.v, rail_b.v, phase=-1.0)
    return BlockResult(prob, coeffs, conditional_state=conditional,
                       branches=residuals, bell_fidelity=fidelity)


def purification_run(fidelity: float, eta_r: float = 1.0,
                     detector: DetectorModel = IDEAL_DETECTOR,
                     mixture: tuple[float, float, float] = (1.0, 0.0, 0.0)) -> BlockResult:
    """Linear-optical purification of two noisy pairs shared between two
    nodes.

    Each pair is a mixture of the correlated and anticorrelated Bell states
    with weights ``fidelity`` / ``1 - fidelity`` inside a two-excitation
    sector of weight ``mixture[0]``, plus single-excitation and vacuum
    sectors.  At each node the two retrieved photons interfere on an H/V PBS;
    one output per node is analyzed in the +/- basis and a coincidence
    between the two nodes (any sign combination, with the odd-parity phase
    flip folded in) keeps the remaining photons.
    """
    if not 0.0 <= fidelity <= 1.0:
        raise ValueError("fidelity must lie in [0, 1]")
    p2m, p1m, p0m = mixture

    rails = {
        "1I": polarized_mode("p1I"), "1J": polarized_mode("p1J"),
        "2I": polarized_mode("p2I"), "2J": polarized_mode("p2J"),
    }

    def pair_components(node_i_rail, node_j_rail):
        """(weight, amplitude map) components of one pair's sectors."""
        ih, iv = node_i_rail.h, node_i_rail.v
        jh, jv = node_j_rail.h, node_j_rail.v
        sq2 = 1.0 / math.sqrt(2.0)
        comps = []
        if p2m > 0:
            if fidelity > 0:
                comps.append((p2m * fidelity,
                              {(ih, jh): sq2, (iv, jv): sq2}))
            if fidelity < 1:
                comps.append((p2m * (1.0 - fidelity),
                              {(ih, jv): sq2, (iv, jh): sq2}))
        if p1m > 0:
            for m in (ih, iv, jh, jv):
                comps.append((p1m / 4.0, {(m,): 1.0}))
        if p0m > 0:
            comps.append((p0m, {(): 1.0}))
        return comps

    register = tuple(m for r in ("1I", "1J", "2I", "2J")
                     for m in rails[r].modes)
    n = len(register)

    def build_state(photon_map):
        occ = [0] * n
        amps = {}
        for modes, amp in photon_map.items():
            occ = [0] * n
            for m in modes:
                occ[register.index(m)] += 1
            amps[tuple(occ)] = amps.get(tuple(occ), 0.0) + amp
        return FockState(register, amps, truncation=4)

    comps_1 = pair_components(rails["1I"], rails["1J"])
    comps_2 = pair_components(rails["2I"], rails["2J"])

    branches = []
    for i1, (w1, map1) in enumerate(comps_1):
        for i2, (w2, map2) in enumerate(comps_2):
            joint = {}
            for ma, aa in map1.items():
                for mb, ab in map2.items():
                    occ = [0] * n
                    for m in ma + mb:
                        occ[register.index(m)] += 1
                    key = tuple(occ)
                    joint[key] = joint.get(key, 0.0) + aa * ab
            st = FockState(register, joint, truncation=4)
            branches.append(((i1, i2), st.scaled(math.sqrt(w1 * w2))))

    for r in rails.values():
        for m in r.modes:
            branches = apply_loss_branches(branches, m, eta_r)

    a1, b1 = polarized_mode("a1"), polarized_mode("b1")
    a2, b2 = polarized_mode("a2"), polarized_mode("b2")
    bi_p, bi_m = photonic_mode("bI+"), photonic_mode("bI-")
    bj_p, bj_m = photonic_mode("bJ+"), photonic_mode("bJ-")
    mapped = []
    for tag, st in branches:
        st = apply_pbs(st, rails["1I"], rails["2I"], a1, b1, "HV")
        st = apply_pbs(st, rails["1J"], rails["2J"], a2, b2, "HV")
        st = split_polarization(st, b1, "DIAG", bi_p, bi_m)
        st = split_polarization(st, b2, "DIAG", bj_p, bj_m)
        mapped.append((tag, st))

    det_modes = [bi_p, bi_m, bj_p, bj_m]
    total_prob = 0.0
    coeffs = {"bell": 0.0, "one": 0.0, "vacuum": 0.0, "spurious": 0.0}
    kept_weight = 0.0
    kept_fid = 0.0
    all_residuals = []
    for si, mi in (("+", bi_p), ("-", bi_m)):
        for sj, mj in (("+", bj_p), ("-", bj_m)):
            prob, residuals = fock.measure_pattern(
                mapped, det_modes, detector, [mi, mj])
            if prob == 0.0:
                continue
            total_prob += prob
            c, sectors = _classify(residuals, a1.modes, a2.modes)
            for k in coeffs:
                coeffs[k] += c[k]
            # Odd-parity outcomes acquire a sign flip on the V-V component.
            phase = 1.0 if si == sj else -1.0
            if sectors["bell"]:
                f = _bell_fidelity(sectors["bell"], a1.h, a2.h, a1.v, a2.v,
                                   phase=phase)
                kept_fid += c["bell"] * f
                kept_weight += c["bell"]
            all_residuals.extend(residuals)

    if total_prob == 0.0:
        return _zero_result()
    f_prime = kept_fid / kept_weight if kept_weight > 0 else None
    return BlockResult(total_prob, coeffs, branches=all_residuals,
                       bell_fidelity=f_prime)
