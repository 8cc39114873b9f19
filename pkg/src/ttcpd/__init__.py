"""Through-the-cycle PD calibration with the dynamic Vasicek single risk factor model.

Jointly estimates unconditional (TTC) default probabilities, conditional (PIT)
default probabilities and the latent systematic factor path from a possibly
incomplete panel of annual default rates.
"""

from .errors import CalibrationError, DomainError, EmptyPortfolio, NotConverged, SingularSystem
from .identifiability import (
    AvailabilityMask,
    IdentifiabilityReport,
    check_identifiability,
    observed_factor_mean,
)
from .linear import DesignSystem, build_system, fit_linear, solve_constrained_ls
from .model import (
    CORPORATE,
    RETAIL,
    AssetClassParams,
    BaselLinked,
    CalibrationConfig,
    CalibrationResult,
    DefaultRatePanel,
    FactorPath,
    FixedRho,
    basel_rho,
    eta_transform,
    pit_pd,
    wcdr,
)
from .nonlinear import ConvergenceTrace, calibrate, fit_nonlinear
from .normal import std_normal_cdf, std_normal_quantile
from .simulator import (
    AR1,
    ExperimentResult,
    ExplicitPath,
    SimulationSpec,
    gen_default_panel,
    gen_factor_path,
    run_recovery_experiment,
    run_sample_size_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "AvailabilityMask",
    "IdentifiabilityReport",
    "check_identifiability",
    "observed_factor_mean",
    "CORPORATE",
    "RETAIL",
    "AssetClassParams",
    "BaselLinked",
    "CalibrationConfig",
    "CalibrationResult",
    "DefaultRatePanel",
    "FactorPath",
    "FixedRho",
    "basel_rho",
    "eta_transform",
    "pit_pd",
    "wcdr",
    "AR1",
    "ExperimentResult",
    "ExplicitPath",
    "SimulationSpec",
    "gen_default_panel",
    "gen_factor_path",
    "run_recovery_experiment",
    "run_sample_size_sweep",
    "CalibrationError",
    "DomainError",
    "EmptyPortfolio",
    "NotConverged",
    "SingularSystem",
    "DesignSystem",
    "build_system",
    "fit_linear",
    "solve_constrained_ls",
    "ConvergenceTrace",
    "calibrate",
    "fit_nonlinear",
    "std_normal_cdf",
    "std_normal_quantile",
]
