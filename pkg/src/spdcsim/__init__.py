"""Phase-matching design and entangled-source simulation for SPDC photon pairs."""

__version__ = "0.1.0"

from .dispersion import CrystalModel, SellmeierAxisModel, load_crystal, refractive_index  # noqa: E402
from .phasematching import (  # noqa: E402
    BPMGeometry,
    InteractionSpec,
    WavelengthTriple,
    find_degenerate_ncpm,
    wavevector_mismatch,
)
from .source import TwoQubitState, bell_state, sagnac_state  # noqa: E402

__all__ = [
    "CrystalModel",
    "SellmeierAxisModel",
    "load_crystal",
    "refractive_index",
    "BPMGeometry",
    "InteractionSpec",
    "WavelengthTriple",
    "find_degenerate_ncpm",
    "wavevector_mismatch",
    "TwoQubitState",
    "bell_state",
    "sagnac_state",
]
