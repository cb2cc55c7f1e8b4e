"""Simulation, correlation and fitting toolkit for single-photon source characterization."""
from .correlator import (Histogram, count_rate, correlate_streams, cross_correlate,
                         normalize_g2, pulsed_g2_zero)
from .coupling import (EfficiencyChain, FieldMap, ReflectanceMeasurement, efficiency_chain,
                       fit_gaussian_2d, gaussian_field, overlap_efficiency, reflectance_coupling)
from .estimators import (DecayRateRegressor, Gaussian2DRegressor, HOMRegressor,
                         LorentzianRegressor, SaturationRegressor, TwoLevelG2Regressor)
from .fitter import FitError, FitResult, ModelSpec, SingularMatrixError, fit_nlls
from .hom import (HOMParams, SplitterPair, eval_g2_co, eval_g2_cross, lifetime_limit_factor,
                  visibility_corrected, visibility_raw)
from .models import (G2TwoLevelParams, LorentzianParams, PowerDecayParams, SaturationParams,
                     corrected_rate, eval_g2_two_level, eval_gamma1, eval_lorentzian,
                     eval_saturation)
from .montecarlo import (CW, DetectorConfig, EmitterConfig, Pulsed, route_hbt, route_hom,
                         simulate_emission)
from .recipes import (fit_g2_cw, fit_gamma1_linear, fit_hom_joint, fit_lorentzian,
                      fit_saturation)
from .tags import TagStream

__version__ = "0.1.0"
