"""Domain types and closed-form Vasicek / Basel formulas.

All formulas accept scalars or NumPy arrays (broadcasting as usual) and return
a float for scalar input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError
from .normal import std_normal_cdf, std_normal_quantile

__all__ = [
    "AssetClassParams",
    "CORPORATE",
    "RETAIL",
    "FixedRho",
    "BaselLinked",
    "CalibrationConfig",
    "ClampRecord",
    "DefaultRatePanel",
    "FactorPath",
    "CalibrationResult",
    "pit_pd",
    "wcdr",
    "basel_rho",
    "eta_transform",
]


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _check_open_unit(name, x):
    if not np.all((x > 0.0) & (x < 1.0)):
        raise DomainError(f"{name} must lie strictly in (0, 1)")


def _check_rho(rho):
    if not np.all((rho >= 0.0) & (rho < 1.0)):
        raise DomainError("rho must lie in [0, 1)")


# ---------------------------------------------------------------------------
# Parameter / config types


@dataclass(frozen=True)
class AssetClassParams:
    """Parameters of the Basel correlation function rho(PD)."""

    rho_min: float
    rho_max: float
    w: float

    def __post_init__(self):
        if not (0.0 < self.rho_min <= self.rho_max < 1.0):
            raise DomainError("need 0 < rho_min <= rho_max < 1")
        if not self.w > 0.0:
            raise DomainError("decay W must be positive")


CORPORATE = AssetClassParams(rho_min=0.12, rho_max=0.24, w=50.0)
RETAIL = AssetClassParams(rho_min=0.03, rho_max=0.16, w=35.0)


@dataclass(frozen=True)
class FixedRho:
    """Exogenous per-portfolio correlations (linear model)."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        _check_rho(np.asarray(self.values))


@dataclass(frozen=True)
class BaselLinked:
    """Correlations tied to the fitted TTC PD through :func:`basel_rho`."""

    params: AssetClassParams = CORPORATE


@dataclass(frozen=True)
class CalibrationConfig:
    """Solver settings.

    ``alpha_mean`` is the target time-mean of the factor path (0 for a
    representative cycle, slightly positive for data from a boom). It is not the
    WCDR confidence level. ``clamp_eps`` is the floor/ceiling offset applied to
    empirical rates of exactly 0 or 1 when no obligor count is known.
    """

    alpha_mean: float = 0.0
    tol: float = 1e-8
    max_iter: int = 100
    clamp_eps: float = 1e-6
    rho_mode: FixedRho | BaselLinked = field(default_factory=BaselLinked)
    weight_by_obligors: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if int(self.max_iter) < 1:
            raise DomainError("max_iter must be a positive integer")
        if not 0.0 < self.clamp_eps < 0.5:
            raise DomainError("clamp_eps must lie in (0, 0.5)")
        if not math.isfinite(self.alpha_mean):
            raise DomainError("alpha_mean must be finite")


# ---------------------------------------------------------------------------
# Data types


@dataclass(frozen=True)
class ClampRecord:
    """One empirical rate of 0 or 1 moved inside the open unit interval."""

    portfolio_id: str
    year: int
    raw: float
    clamped: float

    def message(self):
        return (
            f"clamped default rate of portfolio {self.portfolio_id} in {self.year} "
            f"from {self.raw:g} to {self.clamped:.12g}"
        )


@dataclass(frozen=True, eq=False)
class DefaultRatePanel:
    """Rectangular portfolio x year panel of empirical default rates.

    ``rates[i, t]`` is NaN where the rate is missing. ``obligors`` (optional)
    carries the number of obligors per cell; it must be known wherever a rate
    is present.
    """

    portfolio_ids: tuple[str, ...]
    years: tuple[int, ...]
    rates: np.ndarray
    obligors: np.ndarray | None = None

    def __post_init__(self):
        ids = tuple(str(p) for p in self.portfolio_ids)
        years = tuple(int(y) for y in self.years)
        object.__setattr__(self, "portfolio_ids", ids)
        object.__setattr__(self, "years", years)
        if len(set(ids)) != len(ids):
            raise ValueError("portfolio ids must be unique")
        if any(b <= a for a, b in zip(years, years[1:])):
            raise ValueError("years must be strictly increasing")
        rates = np.array(self.rates, dtype=float)
        if rates.shape != (len(ids), len(years)):
            raise ValueError(f"rates shape {rates.shape} != {(len(ids), len(years))}")
        present = ~np.isnan(rates)
        if np.any((rates[present] < 0.0) | (rates[present] > 1.0)):
            raise DomainError("default rates must lie in [0, 1]")
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)
        if self.obligors is not None:
            n = np.array(self.obligors, dtype=np.int64)
            if n.shape != rates.shape:
                raise ValueError("obligors must have the same shape as rates")
            if np.any(n[present] < 1):
                raise ValueError("obligor counts must be positive wherever a rate is present")
            n.setflags(write=False)
            object.__setattr__(self, "obligors", n)

    @classmethod
    def from_cells(
        cls,
        cells: Mapping[tuple[str, int], float],
        obligor_counts: Mapping[tuple[str, int], int] | None = None,
        portfolio_ids: Sequence[str] | None = None,
        years: Sequence[int] | None = None,
    ) -> "DefaultRatePanel":
        """Build a panel from a sparse ``{(portfolio, year): rate}`` mapping.

        Portfolio order defaults to first appearance, years to sorted order.
        """
        if portfolio_ids is None:
            portfolio_ids = list(dict.fromkeys(str(p) for p, _ in cells))
        if years is None:
            years = sorted({int(y) for _, y in cells})
        pidx = {str(p): i for i, p in enumerate(portfolio_ids)}
        tidx = {int(y): t for t, y in enumerate(years)}
        rates = np.full((len(pidx), len(tidx)), np.nan)
        for (p, y), d in cells.items():
            rates[pidx[str(p)], tidx[int(y)]] = d
        obligors = None
        if obligor_counts is not None:
            missing = set((str(p), int(y)) for p, y in cells) - set(
                (str(p), int(y)) for p, y in obligor_counts
            )
            if missing:
                raise ValueError(f"obligor counts missing for cells {sorted(missing)}")
            obligors = np.zeros_like(rates, dtype=np.int64)
            for (p, y), n in obligor_counts.items():
                obligors[pidx[str(p)], tidx[int(y)]] = n
        return cls(tuple(portfolio_ids), tuple(years), rates, obligors)

    @property
    def shape(self):
        return self.rates.shape

    @property
    def horizon(self):
        return len(self.years)

    @property
    def mask(self) -> np.ndarray:
        """Boolean availability grid, True where a rate is observed."""
        return ~np.isnan(self.rates)

    def cells(self):
        """Yield ``(portfolio_id, year, rate)`` for observed cells in row order."""
        for i, p in enumerate(self.portfolio_ids):
            for t, y in enumerate(self.years):
                d = self.rates[i, t]
                if not np.isnan(d):
                    yield p, y, float(d)

    def with_mask(self, mask) -> "DefaultRatePanel":
        """Return a copy with every cell where ``mask`` is False deleted."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self.shape:
            raise ValueError("mask shape does not match panel")
        rates = np.where(mask, self.rates, np.nan)
        return DefaultRatePanel(self.portfolio_ids, self.years, rates, self.obligors)

    def clamped(self, clamp_eps=1e-6):
        """Rates moved into (0, 1), plus one :class:`ClampRecord` per moved cell.

        A rate of 0 becomes ``1/(2n)`` and a rate of 1 becomes ``1 - 1/(2n)``
        when the obligor count ``n`` is known, else ``clamp_eps`` and
        ``1 - clamp_eps``.
        """
        out = self.rates.copy()
        records = []
        for i, t in zip(*np.nonzero((self.rates == 0.0) | (self.rates == 1.0))):
            raw = self.rates[i, t]
            if self.obligors is not None:
                eps = 1.0 / (2.0 * self.obligors[i, t])
            else:
                eps = clamp_eps
            out[i, t] = eps if raw == 0.0 else 1.0 - eps
            records.append(ClampRecord(self.portfolio_ids[i], self.years[t], float(raw), float(out[i, t])))
        return out, records

    def __eq__(self, other):
        if not isinstance(other, DefaultRatePanel):
            return NotImplemented
        same_n = (self.obligors is None and other.obligors is None) or (
            self.obligors is not None
            and other.obligors is not None
            and np.array_equal(np.where(self.mask, self.obligors, 0), np.where(other.mask, other.obligors, 0))
        )
        return (
            self.portfolio_ids == other.portfolio_ids
            and self.years == other.years
            and np.array_equal(self.rates, other.rates, equal_nan=True)
            and same_n
        )


@dataclass(frozen=True, eq=False)
class FactorPath:
    """Systematic factor trajectory f_1..f_T in probit units."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values.tolist())

    def __eq__(self, other):
        return isinstance(other, FactorPath) and np.array_equal(self.values, other.values)

    def mean(self):
        return float(np.mean(self.values))


@dataclass(eq=False)
class CalibrationResult:
    """Fitted model: TTC levels, correlations, factor path and PIT matrix.

    ``residuals`` is fitted minus empirical in transformed (``eta``) units and
    NaN for missing cells; ``pit_pd`` is complete regardless of gaps.
    """

    portfolio_ids: tuple[str, ...]
    years: tuple[int, ...]
    k: np.ndarray
    ttc_pd: np.ndarray
    rho: np.ndarray
    factor: FactorPath
    pit_pd: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: bool
    alpha_mean: float = 0.0
    warnings: list = field(default_factory=list)

    @property
    def objective(self):
        """Sum of squared residuals over observed cells."""
        r = self.residuals[~np.isnan(self.residuals)]
        return float(np.dot(r, r))


# ---------------------------------------------------------------------------
# Formulas


def pit_pd(ttc_pd, rho, f):
    """Conditional (point-in-time) PD given the systematic factor value ``f``.

    Phi((Phi^-1(p) - sqrt(rho) f) / sqrt(1 - rho)); negative ``f`` is a bad year.
    """
    p = np.asarray(ttc_pd, dtype=float)
    rho = np.asarray(rho, dtype=float)
    f = np.asarray(f, dtype=float)
    _check_open_unit("ttc_pd", p)
    _check_rho(rho)
    if not np.all(np.isfinite(f)):
        raise DomainError("factor value must be finite")
    z = (std_normal_quantile(p) - np.sqrt(rho) * f) / np.sqrt(1.0 - rho)
    return _out(std_normal_cdf(z))


def wcdr(ttc_pd, rho, confidence=0.999):
    """Worst-case default rate: the ``confidence`` quantile of the conditional PD."""
    p = np.asarray(ttc_pd, dtype=float)
    rho = np.asarray(rho, dtype=float)
    q = np.asarray(confidence, dtype=float)
    _check_open_unit("ttc_pd", p)
    _check_rho(rho)
    _check_open_unit("confidence", q)
    z = (std_normal_quantile(p) + np.sqrt(rho) * std_normal_quantile(q)) / np.sqrt(1.0 - rho)
    return _out(std_normal_cdf(z))


def basel_rho(ttc_pd, params: AssetClassParams = CORPORATE):
    """Basel asset correlation as a function of PD.

    rho_min * g + rho_max * (1 - g) with g = (1 - exp(-W PD)) / (1 - exp(-W)).
    """
    p = np.asarray(ttc_pd, dtype=float)
    _check_open_unit("ttc_pd", p)
    g = np.expm1(-params.w * p) / np.expm1(-params.w)
    return _out(params.rho_min * g + params.rho_max * (1.0 - g))


def eta_transform(d, rho):
    """Regression target sqrt(1 - rho) * Phi^-1(d) for an empirical rate ``d``."""
    d = np.asarray(d, dtype=float)
    rho = np.asarray(rho, dtype=float)
    _check_open_unit("default rate", d)
    _check_rho(rho)
    return _out(np.sqrt(1.0 - rho) * std_normal_quantile(d))
