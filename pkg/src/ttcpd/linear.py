"""Constrained linear least squares for fixed correlations.

With correlations held fixed the transformed model is linear,

    eta[i, t] ~ K[i] - sqrt(rho[i]) * f[t],        sum_t f[t] = T * alpha_mean,

with one equation per observed cell. The constraint is enforced exactly by
eliminating the last factor value; the reduced problem is an ordinary
least-squares fit solved by SVD.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyPortfolio, SingularSystem
from .identifiability import (
    AvailabilityMask,
    check_identifiability,
    constrained_matrix,
    design_matrix,
    numerical_rank,
)
from .model import (
    CalibrationConfig,
    CalibrationResult,
    DefaultRatePanel,
    FactorPath,
    eta_transform,
)
from .normal import std_normal_cdf

__all__ = ["DesignSystem", "build_system", "solve_constrained_ls", "fit_linear", "fitted_values"]


@dataclass(eq=False)
class DesignSystem:
    """Design rows, targets and the factor-sum constraint.

    ``matrix`` has columns ``K_1..K_I, f_1..f_T``; ``constraint`` is the
    all-ones row over the factor block with right-hand side
    ``constraint_rhs = T * alpha_mean``.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    constraint: np.ndarray
    constraint_rhs: float
    row_index: tuple[np.ndarray, np.ndarray]
    mask: np.ndarray
    rho: np.ndarray
    weights: np.ndarray | None = None
    warnings: list = field(default_factory=list)

    @property
    def n_portfolios(self):
        return self.mask.shape[0]

    @property
    def n_years(self):
        return self.mask.shape[1]

    @classmethod
    def from_eta(cls, eta, rho, alpha_mean=0.0, weights=None):
        """Assemble a system directly from a portfolio x year target matrix (NaN = missing)."""
        eta = np.asarray(eta, dtype=float)
        mask = ~np.isnan(eta)
        n_p, n_t = eta.shape
        rho = np.broadcast_to(np.asarray(rho, dtype=float), (n_p,)).copy()
        empty = np.nonzero(~mask.any(axis=1))[0]
        if empty.size:
            raise EmptyPortfolio(empty.tolist())
        a, (ri, rt) = design_matrix(mask, rho)
        c = np.zeros(n_p + n_t)
        c[n_p:] = 1.0
        w = None if weights is None else np.asarray(weights, dtype=float)[ri, rt]
        return cls(a, eta[ri, rt], c, n_t * float(alpha_mean), (ri, rt), mask, rho, w)


def build_system(panel: DefaultRatePanel, rho, alpha_mean=0.0, clamp_eps=1e-6, weight_by_obligors=False):
    """Build the constrained system for ``panel`` with fixed correlations ``rho``.

    Missing cells contribute no row. Rates of exactly 0 or 1 are clamped first;
    the clamp records end up in ``system.warnings``.
    """
    if not panel.mask.any():
        raise EmptyPortfolio(panel.portfolio_ids)
    empty = [p for p, row in zip(panel.portfolio_ids, panel.mask) if not row.any()]
    if empty:
        raise EmptyPortfolio(empty)
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (len(panel.portfolio_ids),))
    rates, records = panel.clamped(clamp_eps)
    eta = np.full(rates.shape, np.nan)
    m = panel.mask
    eta[m] = eta_transform(rates[m], np.broadcast_to(rho[:, None], rates.shape)[m])
    weights = None
    if weight_by_obligors:
        if panel.obligors is None:
            raise ValueError("obligor weighting requested but the panel has no obligor counts")
        weights = panel.obligors.astype(float)
    system = DesignSystem.from_eta(eta, rho, alpha_mean, weights)
    system.warnings = records
    return system


def solve_constrained_ls(system: DesignSystem):
    """Minimise the (weighted) squared row residuals with the constraint held exactly.

    Returns ``(k, factor, residuals)`` where residuals are fitted minus target,
    one per row. Raises :class:`SingularSystem` if the constrained design is
    rank deficient.
    """
    n_p, n_t = system.n_portfolios, system.n_years
    full = constrained_matrix(system.mask, system.rho)
    if numerical_rank(full) < n_p + n_t:
        raise SingularSystem(check_identifiability(AvailabilityMask(system.mask), system.rho))

    a, b = system.matrix, system.rhs
    # f_T = T*alpha - sum_{t<T} f_t
    last = a[:, -1]
    reduced = a[:, :-1].copy()
    reduced[:, n_p:] -= last[:, None]
    target = b - last * system.constraint_rhs
    if system.weights is not None:
        sw = np.sqrt(system.weights)
        reduced = reduced * sw[:, None]
        target = target * sw
    x, *_ = np.linalg.lstsq(reduced, target, rcond=None)

    k = x[:n_p]
    f = np.empty(n_t)
    f[:-1] = x[n_p:]
    f[-1] = system.constraint_rhs - np.sum(x[n_p:])
    residuals = a @ np.concatenate([k, f]) - b
    return k, FactorPath(f), residuals


def fitted_values(k, rho, factor):
    """Fitted transformed rates ``K_i - sqrt(rho_i) f_t`` for every cell."""
    f = factor.values if isinstance(factor, FactorPath) else np.asarray(factor, dtype=float)
    return np.asarray(k)[:, None] - np.sqrt(np.asarray(rho))[:, None] * f[None, :]


def _assemble(panel, k, rho, factor, row_index, residuals, iterations, converged, alpha_mean, warnings):
    res = np.full(panel.shape, np.nan)
    res[row_index] = residuals
    ttc = np.asarray(std_normal_cdf(k), dtype=float).reshape(-1)
    rho = np.asarray(rho, dtype=float)
    pit = std_normal_cdf(fitted_values(k, rho, factor) / np.sqrt(1.0 - rho)[:, None])
    return CalibrationResult(
        portfolio_ids=panel.portfolio_ids,
        years=panel.years,
        k=np.asarray(k, dtype=float),
        ttc_pd=ttc,
        rho=rho.copy(),
        factor=factor,
        pit_pd=np.asarray(pit),
        residuals=res,
        iterations=iterations,
        converged=converged,
        alpha_mean=float(alpha_mean),
        warnings=list(warnings),
    )


def fit_linear(panel: DefaultRatePanel, rho, config: CalibrationConfig | None = None) -> CalibrationResult:
    """Calibrate TTC levels and the factor path with exogenous correlations.

    The fitted PIT matrix covers every cell, including missing ones, where it
    serves as the model's substitute for the unobserved rate.
    """
    config = config or CalibrationConfig()
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (len(panel.portfolio_ids),)).copy()
    system = build_system(panel, rho, config.alpha_mean, config.clamp_eps, config.weight_by_obligors)
    k, factor, residuals = solve_constrained_ls(system)
    return _assemble(panel, k, rho, factor, system.row_index, residuals, 1, True, config.alpha_mean, system.warnings)
