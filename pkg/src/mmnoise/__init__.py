"""Option pricing and calibration with a market-microstructure noise volatility."""
from .analytic import bsm_call, bsm_noise_call, market_price_of_risk, norm_cdf
from .calibration import (EfficientParams, ImpliedPoint, NoiseParams, assemble_params,
                          calibrate_noise_params, implied_epsilon, implied_epsilon_surface,
                          implied_mu_sigma, implied_mu_sigma_surface)
from .errors import (ArbitrageError, ConvergenceError, DataError, DegenerateDriftError,
                     DomainError, InsufficientDataError, MMNoiseError, ParseError)
from .marketdata import OptionChain, OptionQuote, ReturnSeries, load_chain, load_returns
from .noise_sim import PathConfig, mc_call_price, simulate_H, simulate_path, simulate_terminal
from .pipeline import PipelineConfig, run_pipeline
from .surfaces import SurfaceGrid, export_grid, import_grid, smooth_surface, winsorize
from .tree import TreeParams, price_european, tree_params
from .volmodels import ArmaGarchFit, HistoricalMoments, fit_arma_garch, historical_moments

__version__ = "0.1.0"
