"""Simulator and analysis toolkit for atomic-ensemble quantum repeaters
built on two-photon Hong-Ou-Mandel interference.

Layers:

* ``qrepeater.fock``: exact linear-optics state-vector engine on truncated
  Fock spaces (sources, beam splitters, polarizing beam splitters, loss,
  detector POVMs).
* ``qrepeater.blocks``: the four optical building blocks (entanglement
  generation, swapping, event-ready entangler, purification) as brute-force
  oracles.
* ``qrepeater.mixture``: closed-form sector-coefficient formulas and the
  nested-connection recursion, validated against the oracles.
* ``qrepeater.phase``: interferometric phase-stability budgets.
* ``qrepeater.simulate``: waiting-time recursion and seeded Monte-Carlo of
  the nested protocol with configurable purification scheduling.
* ``qrepeater.cli``: the ``qrepeater`` command-line tool.
"""

__version__ = "0.1.0"

from .fock import (
    DetectorModel,
    FockState,
    ModeId,
    SourceParams,
    apply_beam_splitter,
    apply_loss,
    apply_pbs,
    apply_phase,
    atomic_mode,
    detect,
    make_tmss,
    photonic_mode,
    polarized_mode,
    vacuum_state,
)
from .blocks import (
    ACCEPTED_PATTERNS,
    BlockResult,
    DetectionPattern,
    bsm1_generate,
    bsm2_swap,
    entangler_run,
    purification_run,
)
from .mixture import (
    EfficiencyParams,
    MixtureState,
    connect_step,
    entangler_coefficients,
    normalize,
    purification_coefficients,
    purified_fidelity,
    swap_coefficients,
    swapped_fidelity,
)
from .phase import (
    ChannelSpec,
    PhaseBudget,
    accumulated_phase_fidelity,
    dlcz_repeat_until_success_time,
    generation_duration,
    jitter_budget,
    two_photon_robustness_ratio,
)
from .simulate import (
    RepeaterConfig,
    SimReport,
    analytic_time_recursion,
    monte_carlo_run,
    sweep,
)
