"""Monte Carlo simulator of a local hidden variables model of EPR photon-pair experiments.

Photon pairs share a hidden polarization angle; each arm is read out by a
polarizer beam splitter that discards events whose projected intensity lies
within a threshold of 1/2. Correlations, visibility, efficiency and the CHSH
statistic follow from the coincidence counts, and :mod:`eprsim.oracle` gives
their exact expectations.
"""

__version__ = "0.1.0"

from eprsim.analysis import (  # noqa: E402
    AllZeroCounts,
    ChshResult,
    CoincidenceCounts,
    CorrelationCurve,
    ExperimentConfig,
    NoCoincidences,
    chsh,
    correlation_coefficient,
    correlation_scan,
    efficiency,
    run_setting,
    visibility,
)
from eprsim.model import (  # noqa: E402
    AnalyzerConfig,
    NoiseConfig,
    Outcome,
    PairOutcome,
    PhotonPair,
    RandomStream,
    apply_decoherence,
    canonicalize,
    derive_stream,
    detect,
    emit_pair,
    measure_pair,
    project_intensity,
)
from eprsim.oracle import (  # noqa: E402
    QuadratureSpec,
    ToleranceNotMet,
    class_probabilities,
    ideal_coincidence_probability,
    oracle_chsh,
    oracle_efficiency,
    outcome_probability,
)
from eprsim.sweep import (  # noqa: E402
    AxisSpec,
    GridResult,
    SweepSpec,
    UnknownMetric,
    correlation_surface,
    fraction_above,
    run_sweep,
)
