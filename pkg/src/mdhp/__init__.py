"""Hybrid RF/baseband processing for massive MIMO by constant-modulus matrix decomposition."""
from .decomposer import (
    DecompositionSettings,
    DecompositionTrace,
    HybridProcessor,
    PhaseMatrix,
    decompose,
    quantize_phases,
)
from .evaluator import LinkDesign, RateReport, design_link, spectral_efficiency

__all__ = [
    "DecompositionSettings",
    "DecompositionTrace",
    "HybridProcessor",
    "LinkDesign",
    "PhaseMatrix",
    "RateReport",
    "decompose",
    "design_link",
    "quantize_phases",
    "spectral_efficiency",
]
