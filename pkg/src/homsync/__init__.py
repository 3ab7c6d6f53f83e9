"""Simulation and estimation toolkit for memory-synchronized two-photon
interference experiments: truncated Fock-space optics, homodyne sampling,
maximum-likelihood tomography, Wigner functions, temporal-mode analysis,
and herald-synchronization statistics."""

from .errors import (
    ConfigError,
    DegenerateModeError,
    NonConvergenceError,
    NormalizationError,
    TruncationLeakError,
    ZeroProbabilityBinError,
)
from .fock import (
    FockCutoff,
    SingleModeState,
    SourceModel,
    TwoModeState,
    beam_splitter_apply,
    coincidence_probability,
    hom_state,
    hom_with_overlap,
    ket_fidelity,
    loss_channel,
    partial_trace,
    phase_shift_apply,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateModeError",
    "NonConvergenceError",
    "NormalizationError",
    "TruncationLeakError",
    "ZeroProbabilityBinError",
    "FockCutoff",
    "SingleModeState",
    "SourceModel",
    "TwoModeState",
    "beam_splitter_apply",
    "coincidence_probability",
    "hom_state",
    "hom_with_overlap",
    "ket_fidelity",
    "loss_channel",
    "partial_trace",
    "phase_shift_apply",
    "__version__",
]
