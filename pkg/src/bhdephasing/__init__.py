"""Pure dephasing of a two-level impurity in a Bose-Hubbard bath.

Gutzwiller ground states and their quantised fluctuations give the bath's
density correlations, from which the dephasing rate, the Loschmidt echo and
BLP information flows follow.
"""
from .errors import (ConfigError, DegenerateEcho, DephasingError, DynamicallyUnstable,
                     InvalidState, MissingSeries, ModeUnavailable, NoBracket, NoConvergence,
                     NonPositive, OutOfLobe, UnderTruncated, Unsupported)
from .model import (BathParams, GutzwillerState, adequate_n_max, find_mu_for_density,
                    mott_boundary, solve_ground_state)
from .excitations import (ExcitationSpectrum, FluctuationBlock, MomentumGrid, Mode,
                          build_fluctuation_block, compute_spectrum, diagonalize_modes,
                          load_spectrum, save_spectrum)
from .correlators import (DensityWeights, RateSeries, SpectralDensity, compute_rates,
                          compute_weights, decoherence, gamma1, gamma2, short_time_lambda,
                          spectral_density, time_grid)
from .open_system import (ImpurityState, MarkovianityReport, blp_measures, evolve_impurity,
                          loschmidt_echo, trace_distance)
from .reference_baths import (OracleBath, asymptotic_exponent, oracle_gamma,
                              oracle_spectral_density)

__version__ = "0.1.0"
