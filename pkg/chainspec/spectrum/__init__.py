"""Emergent order spectra: detectors, witness families, decompositions and prolongations."""

from .attractors import ar_decompose, find_attractors, select_pair
from .blocks import conley_blocks
from .detectors import (detect_eta, detect_finite, detect_omega, detect_periodic_attractor_spectrum,
                        in_omega_limit, omega_limit, zeta_nonwandering_check)
from .engine import SpectrumEngine, spectrum, xi_class
from .models import (ArDecomposition, AttractorRepellerPair, BlockDecomposition, BlockSpan, Evidence,
                     ProlongationTable, SpectrumEntry, SpectrumOptions, SpectrumReport)
from .prolongation import ProlongationLadder, prolongation

__all__ = [
    "ArDecomposition", "AttractorRepellerPair", "BlockDecomposition", "BlockSpan", "Evidence",
    "ProlongationLadder", "ProlongationTable", "SpectrumEngine", "SpectrumEntry", "SpectrumOptions",
    "SpectrumReport", "ar_decompose", "conley_blocks", "detect_eta", "detect_finite", "detect_omega",
    "detect_periodic_attractor_spectrum", "find_attractors", "in_omega_limit", "omega_limit",
    "prolongation", "select_pair", "spectrum", "xi_class", "zeta_nonwandering_check",
]
