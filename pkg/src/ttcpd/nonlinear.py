"""Calibration with Basel-linked correlations rho_i = rho(Phi(K_i)).

The correlation function is smooth and flat enough that the problem is close
to linear, so we iterate: freeze rho at the current K, solve the exact-constraint
linear problem, update rho, repeat until K and f stop moving.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotConverged, SingularSystem
from .identifiability import AvailabilityMask, check_identifiability
from .linear import _assemble, build_system, fit_linear, fitted_values, solve_constrained_ls
from .model import (
    AssetClassParams,
    BaselLinked,
    CalibrationConfig,
    DefaultRatePanel,
    FixedRho,
    basel_rho,
)
from .normal import std_normal_cdf, std_normal_quantile

__all__ = ["IterationRecord", "ConvergenceTrace", "fit_nonlinear", "nonlinear_objective", "calibrate"]


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    max_dk: float
    max_df: float
    objective: float


@dataclass
class ConvergenceTrace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def to_dict(self):
        return {
            "records": [
                {"iteration": r.iteration, "max_dk": r.max_dk, "max_df": r.max_df, "objective": r.objective}
                for r in self.records
            ]
        }

    @classmethod
    def from_dict(cls, d):
        return cls([IterationRecord(**r) for r in d["records"]])


def nonlinear_objective(phi, k, factor, params: AssetClassParams):
    """Sum over observed cells of (phi sqrt(1 - rho(K)) - (K - sqrt(rho(K)) f))^2.

    ``phi`` is the portfolio x year matrix of probit-transformed rates, NaN
    where missing.
    """
    rho = np.asarray(basel_rho(std_normal_cdf(np.asarray(k, dtype=float)), params)).reshape(-1)
    r = phi * np.sqrt(1.0 - rho)[:, None] - fitted_values(k, rho, factor)
    r = r[~np.isnan(r)]
    return float(np.dot(r, r))


def fit_nonlinear(panel: DefaultRatePanel, asset_class: AssetClassParams, config: CalibrationConfig | None = None):
    """Fit K, f with rho tied to the TTC PD; returns ``(result, trace)``.

    Raises :class:`SingularSystem` for an unidentifiable availability pattern
    and :class:`NotConverged` (carrying the trace) after ``max_iter`` outer
    iterations.
    """
    config = config or CalibrationConfig()
    report = check_identifiability(AvailabilityMask.from_panel(panel))
    if not report.identifiable:
        raise SingularSystem(report)

    rates, clamp_records = panel.clamped(config.clamp_eps)
    mask = panel.mask
    phi = np.full(rates.shape, np.nan)
    phi[mask] = std_normal_quantile(rates[mask])

    mean_rate = np.array([row[m].mean() for row, m in zip(rates, mask)])
    k = np.asarray(std_normal_quantile(mean_rate), dtype=float).reshape(-1)
    f = np.full(panel.horizon, float(config.alpha_mean))

    trace = ConvergenceTrace()
    converged = False
    for it in range(1, int(config.max_iter) + 1):
        rho = np.asarray(basel_rho(std_normal_cdf(k), asset_class)).reshape(-1)
        system = build_system(panel, rho, config.alpha_mean, config.clamp_eps, config.weight_by_obligors)
        k_new, factor, _ = solve_constrained_ls(system)
        dk = float(np.max(np.abs(k_new - k)))
        df = float(np.max(np.abs(factor.values - f)))
        k, f = k_new, factor.values
        trace.records.append(IterationRecord(it, dk, df, nonlinear_objective(phi, k, factor, asset_class)))
        if max(dk, df) < config.tol:
            converged = True
            break
    if not converged:
        raise NotConverged(trace, config.max_iter)

    # report rho, PIT and residuals at the final K so the output is self-consistent
    rho = np.asarray(basel_rho(std_normal_cdf(k), asset_class)).reshape(-1)
    y = phi * np.sqrt(1.0 - rho)[:, None]
    residuals = (fitted_values(k, rho, factor) - y)[mask]
    result = _assemble(
        panel, k, rho, factor, np.nonzero(mask), residuals, len(trace), True, config.alpha_mean, clamp_records
    )
    return result, trace


def calibrate(panel: DefaultRatePanel, config: CalibrationConfig | None = None):
    """Dispatch on ``config.rho_mode``; returns ``(result, trace_or_None)``."""
    config = config or CalibrationConfig()
    mode = config.rho_mode
    if isinstance(mode, FixedRho):
        if len(mode.values) == 1:
            rho = np.full(len(panel.portfolio_ids), mode.values[0])
        elif len(mode.values) == len(panel.portfolio_ids):
            rho = np.array(mode.values)
        else:
            raise ValueError(
                f"got {len(mode.values)} fixed correlations for {len(panel.portfolio_ids)} portfolios"
            )
        return fit_linear(panel, rho, config), None
    if isinstance(mode, BaselLinked):
        return fit_nonlinear(panel, mode.params, config)
    raise TypeError(f"unknown rho mode {mode!r}")
