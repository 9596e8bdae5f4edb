"""Time-resolved multiphoton interference of spectrally distinct photons."""

__version__ = "0.1.0"

from .circuits import Interferometer, beam_splitter, f4, mzi, submatrix  # noqa: E402
from .engine import (  # noqa: E402
    CoincidenceHistogram,
    FringeFitter,
    FringeScan,
    JitterModel,
    PairCorrelations,
    coincidence_probability_mixed,
    coincidence_probability_pure,
    fringe_visibility,
    fusion_fidelity,
    projection_visibility,
)
from .grids import PumpSpec, TemporalProfile, TimeGrid, lorentzian_photon  # noqa: E402
from .jsa import MixedPhoton, SchmidtDecomposer, build_jsa, ring_photon, schmidt_decompose  # noqa: E402
from .permanent import permanent  # noqa: E402
from .sampling import BayesValidator, BosonSampler, ModelSpec, Sample  # noqa: E402

__all__ = [
    "BayesValidator", "BosonSampler", "CoincidenceHistogram", "FringeFitter", "FringeScan",
    "Interferometer", "JitterModel", "MixedPhoton", "ModelSpec", "PairCorrelations", "PumpSpec",
    "Sample", "SchmidtDecomposer", "TemporalProfile", "TimeGrid", "beam_splitter", "build_jsa",
    "coincidence_probability_mixed", "coincidence_probability_pure", "f4", "fringe_visibility",
    "fusion_fidelity", "lorentzian_photon", "mzi", "permanent", "projection_visibility",
    "ring_photon", "schmidt_decompose", "submatrix",
]
