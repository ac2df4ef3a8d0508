"""opoherald: discrete-event simulation of a narrowband photon-pair source
heralding single-photon absorption in a trapped ion, plus the full time-tag
analysis chain and rate-budget algebra.

Hot correlation kernels run in a compiled extension when available; a pure
NumPy fallback is selected automatically (``opoherald.kernels.BACKEND``
names the active one).
"""

from .budget import (BudgetInputs, BudgetOutputs, eta1_chain, eta_sat,
                     infer_budget, pairs_per_mw, predict_rates)
from .correlate import (CoincidenceStats, Histogram, coincidence_stats,
                        comb_period_estimate, cross_correlate, g1_visibility,
                        g1_zero_peak, read_histogram_csv, write_histogram_csv)
from .errors import (AnalysisError, CapacityError, DegenerateFitError, InputError,
                     OpoHeraldError, ScenarioValidationError, TagFileCorruptionError,
                     TagFileFormatError)
from .figures import FigureReport, reproduce_figure
from .fitting import (FitResult, LifetimeEstimate, LorentzianLine, ScanResult,
                      SpectroscopyScenario, absorption_rate_from_lifetime,
                      bayesian_lifetime, fit_exp_convolution, nlls_fit,
                      spectroscopy_scan)
from .ion import (IonParams, IonRunResult, JumpCause, QuantumJumpRecord,
                  SequenceParams, absorption_probability,
                  ensemble_absorption_probability, expected_line_fwhm,
                  run_absorption_candidates, run_ion_experiment)
from .model import (EventStream, Origin, PhotonEvent, PhotonEvents, SourceConfig,
                    SpectralCombModel, TimeTag, comb_spectral_density,
                    decay_from_linewidth, linewidth_from_decay,
                    lorentzian_ensemble_average)
from .optics import (DetectorSpec, FilterSpec, apply_dead_time, apply_filter,
                     apply_loss, detect, filter_transmission)
from .rng import stream_rng
from .scenario import Scenario, load_scenario, run_scenario, scenario_from_mapping
from .source import (PairEventBatch, generate_background, generate_pair_events,
                     sample_mode_frequency, sample_signal_delay)
from .tagio import read_tags, write_tags

__version__ = "0.1.0"
