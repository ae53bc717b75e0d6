"""Monte-Carlo models of musical scale evolution."""

__version__ = "0.1.0"

from .core import (DEFAULT_TOLERANCE, OCTAVE, GeneratedScale, Population, ScaleRecord,
                   circular_intervals, intervals_from_notes, notes_from_intervals,
                   scales_similar)
from .costs import (build_template, cost_family, cost_fif, cost_fif_alt, cost_har, cost_trans,
                    fifths_fraction, harmonic_score, scale_harmonicity)
from .errors import (AbortTooSelective, CostDivisionByZero, DegenerateSample, GridMismatch,
                     InvalidDensity, InvalidRatio, InvalidScale, NoSolution, ParseError,
                     ScaleSimError)
from .generator import (GenerationReport, Model, ModelConfig, boltzmann_accept,
                        generate_population, preset_config, sample_raw_scale)
