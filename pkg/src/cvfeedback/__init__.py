"""Frequency-domain simulator for entangled light sent through a lossy sample
with its reflection fed back into the parametric source."""

__version__ = "0.1.0"

from .elements import (  # noqa: E402
    BeamSplitterParams,
    BogoliubovTransfer,
    DetectionParams,
    NopaParams,
    ThreePortSample,
    beam_splitter,
    detector_chain,
    nopa_transfer,
    phase_shift,
    sample_transfer,
)
from .network import LoopSolveResult, Network, loop_gain_margin, measure_combo, solve  # noqa: E402
from .scenarios import ScenarioConfig  # noqa: E402
from .sideband import (  # noqa: E402
    AnalysisFrequency,
    NoiseSpectrum,
    QuadratureCombo,
    db_to_variance,
    duan_sum,
    physicality_check,
    variance_to_db,
)
