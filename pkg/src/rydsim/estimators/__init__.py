"""Statistical estimators: Bell fidelity algebra, RB decay and coherence fits."""
from .coherence import (
    FieldGradient,
    decay_fit,
    parity_contrast,
    ramsey_fit,
    ramsey_model,
    spin_echo_fit,
    spin_echo_pipeline,
    t1_fit,
    visibility_fit,
)
from .fidelity import (
    BrightDarkCounts,
    FidelityReport,
    OutcomeCounts,
    PopulationBounds,
    SpamCorrected,
    bell_fidelity_raw,
    bell_fidelity_report,
    population_lower_bounds,
    spam_correct,
)
from .rb import rb_fit, rb_model
from .results import Estimate, FitResult

__all__ = [
    "BrightDarkCounts", "Estimate", "FidelityReport", "FieldGradient", "FitResult",
    "OutcomeCounts", "PopulationBounds", "SpamCorrected", "bell_fidelity_raw",
    "bell_fidelity_report", "decay_fit", "parity_contrast", "population_lower_bounds",
    "ramsey_fit", "ramsey_model", "rb_fit", "rb_model", "spam_correct", "spin_echo_fit",
    "spin_echo_pipeline", "t1_fit", "visibility_fit",
]
