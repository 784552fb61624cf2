"""Quantum LDPC decoding with BP4 and affine subcode ensembles (aSCED)."""

from .bp4 import Bp4Config, Bp4Decoder, DecodeResult
from .codes import StabilizerCode, build_gb, build_toric, code_from_spec
from .degeneracy import DecodeOutcome, OutcomeKind, classify, logically_equivalent
from .ensemble import AscedDecoder, EnsembleConfig

__version__ = "0.1.0"

__all__ = [
    "AscedDecoder",
    "Bp4Config",
    "Bp4Decoder",
    "DecodeOutcome",
    "DecodeResult",
    "EnsembleConfig",
    "OutcomeKind",
    "StabilizerCode",
    "build_gb",
    "build_toric",
    "classify",
    "code_from_spec",
    "logically_equivalent",
]
