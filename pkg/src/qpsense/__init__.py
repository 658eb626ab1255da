"""Quantum-enhanced plasmonic sensing of binding kinetics.

Simulates transmission measurements of a plasmonic resonance probed either
by heralded single photons or by an equal-flux coherent beam, then pushes
both through identical bootstrap estimators for the observed binding rate
and the affinity chain, so the two probe models can be compared on noise
alone.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DegenerateFitError, DomainError,
                     EstimationError, NoResonanceError, ParseError,
                     StreamOrderError)
from .rng import make_rng, substream
from .kinetics import (InjectionRecipe, KineticParams, Sensorgram,
                       affinity_from_reciprocal_fit, cavity_concentration,
                       generate_sensorgram, model_transmission,
                       observable_rate, rates_from_affinity,
                       read_sensorgram_csv, write_sensorgram_csv)
from .photon_stats import (ProbeModel, SamplingPlan, SetStatistics,
                           enhancement, estimate_transmission,
                           sample_transmitted, set_statistics,
                           transmission_std_classical,
                           transmission_std_quantum)
from .timetag import (Channel, CoincidenceConfig, TimeTagEvent,
                      group_into_sets, match_coincidences, read_timetag_csv,
                      simulate_streams, write_channel_csv, write_timetag_csv)
from .spr_optics import (EfficiencyBudget, LayerStack,
                         analyte_index_trajectory, find_resonance_angle,
                         load_stack, multilayer_reflectance,
                         off_resonance_level, operating_point, reflectance,
                         stack_from_kv, stack_to_kv, system_transmission,
                         write_angle_sweep)
from .estimation import (AffinityEstimate, BootstrapConfig,
                         ExperimentDataset, FitResult, KsEstimate,
                         LMOptions, LinearFit, auto_align,
                         bootstrap_sensorgram, classical_surrogate_sensorgram,
                         estimate_affinity, estimate_ks, fit_sensorgram,
                         levenberg_marquardt, linear_fit, read_dataset_csv,
                         steady_state_bin, write_dataset_csv,
                         write_results_csv)
from .kvconfig import format_kv, load_kv, parse_kv, write_kv
from .config import RunConfig, config_from_kv, config_to_kv

__all__ = [
    "__version__",
    "ConfigError", "DegenerateFitError", "DomainError", "EstimationError",
    "NoResonanceError", "ParseError", "StreamOrderError",
    "make_rng", "substream",
    "InjectionRecipe", "KineticParams", "Sensorgram",
    "affinity_from_reciprocal_fit", "cavity_concentration",
    "generate_sensorgram", "model_transmission", "observable_rate",
    "rates_from_affinity", "read_sensorgram_csv", "write_sensorgram_csv",
    "ProbeModel", "SamplingPlan", "SetStatistics", "enhancement",
    "estimate_transmission", "sample_transmitted", "set_statistics",
    "transmission_std_classical", "transmission_std_quantum",
    "Channel", "CoincidenceConfig", "TimeTagEvent", "group_into_sets",
    "match_coincidences", "read_timetag_csv", "simulate_streams",
    "write_channel_csv", "write_timetag_csv",
    "EfficiencyBudget", "LayerStack", "analyte_index_trajectory",
    "find_resonance_angle", "load_stack", "multilayer_reflectance",
    "off_resonance_level", "operating_point", "reflectance",
    "stack_from_kv", "stack_to_kv", "system_transmission",
    "write_angle_sweep",
    "AffinityEstimate", "BootstrapConfig", "ExperimentDataset", "FitResult",
    "KsEstimate", "LMOptions", "LinearFit", "auto_align",
    "bootstrap_sensorgram", "classical_surrogate_sensorgram",
    "estimate_affinity", "estimate_ks", "fit_sensorgram",
    "levenberg_marquardt", "linear_fit", "read_dataset_csv",
    "steady_state_bin", "write_dataset_csv", "write_results_csv",
    "format_kv", "load_kv", "parse_kv", "write_kv",
    "RunConfig", "config_from_kv", "config_to_kv",
]
