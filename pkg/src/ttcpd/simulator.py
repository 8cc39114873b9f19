"""Synthetic default panels and end-to-end recovery experiments.

Random streams
--------------
Every draw comes from its own Philox generator seeded by
``SeedSequence(seed, spawn_key=key)``:

* ``(0,)`` -- the AR(1) factor innovations;
* ``(1, replication, i, t)`` -- the binomial default count of portfolio ``i``
  in year ``t`` for the given replication.

Because streams are addressed by key rather than consumed in order, a sweep
gives bit-identical numbers whether replications run serially or in worker
processes, and a masked experiment sees exactly the same defaults as the
complete one before cells are deleted.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import CalibrationError, DomainError, SingularSystem
from .identifiability import AvailabilityMask, check_identifiability
from .model import (
    CORPORATE,
    AssetClassParams,
    CalibrationConfig,
    CalibrationResult,
    DefaultRatePanel,
    FactorPath,
    basel_rho,
    pit_pd,
)
from .nonlinear import ConvergenceTrace, fit_nonlinear

__all__ = [
    "ExplicitPath",
    "AR1",
    "SimulationSpec",
    "SweepTable",
    "ExperimentResult",
    "gen_factor_path",
    "gen_default_panel",
    "run_recovery_experiment",
    "run_sample_size_sweep",
]

log = logging.getLogger(__name__)

_FACTOR_STREAM = 0
_DEFAULT_STREAM = 1


@dataclass(frozen=True)
class ExplicitPath:
    path: FactorPath


@dataclass(frozen=True)
class AR1:
    """Stationary AR(1) with standard normal marginals."""

    persistence: float

    def __post_init__(self):
        if not -1.0 < self.persistence < 1.0:
            raise DomainError("AR(1) persistence must lie in (-1, 1)")


@dataclass(frozen=True)
class SimulationSpec:
    true_ttc_pds: tuple[float, ...]
    horizon: int
    factor_spec: ExplicitPath | AR1
    n_obligors: int
    asset_class: AssetClassParams = CORPORATE
    mask: AvailabilityMask | None = None
    seed: int = 0
    first_year: int = 1
    portfolio_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        pds = tuple(float(p) for p in self.true_ttc_pds)
        object.__setattr__(self, "true_ttc_pds", pds)
        if not all(0.0 < p < 1.0 for p in pds):
            raise DomainError("true TTC PDs must lie in (0, 1)")
        if int(self.horizon) < 1:
            raise DomainError("horizon must be positive")
        if int(self.n_obligors) < 1:
            raise DomainError("n_obligors must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if isinstance(self.factor_spec, ExplicitPath) and len(self.factor_spec.path) != self.horizon:
            raise DomainError("explicit factor path length differs from horizon")
        if self.portfolio_ids is None:
            object.__setattr__(self, "portfolio_ids", tuple(f"P{i + 1}" for i in range(len(pds))))
        elif len(self.portfolio_ids) != len(pds):
            raise DomainError("one portfolio id per TTC PD required")
        if self.mask is not None:
            mask = self.mask
            shape = mask.shape if isinstance(mask, AvailabilityMask) else np.shape(mask)
            if tuple(shape) != (len(pds), self.horizon):
                raise DomainError(f"mask shape {tuple(shape)} != {(len(pds), self.horizon)}")
            if not isinstance(mask, AvailabilityMask):
                mask = AvailabilityMask(mask, self.portfolio_ids, self.years)
            object.__setattr__(self, "mask", mask)

    @property
    def years(self):
        return tuple(range(self.first_year, self.first_year + self.horizon))

    @property
    def true_rho(self):
        return np.asarray(basel_rho(np.array(self.true_ttc_pds), self.asset_class)).reshape(-1)


def _rng(seed, *key):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


def gen_factor_path(spec: SimulationSpec) -> FactorPath:
    """Factor trajectory: the explicit path verbatim, or an AR(1) realisation.

    The AR(1) recursion is ``f_t = phi f_{t-1} + sqrt(1 - phi^2) e_t`` with
    ``f_1 = e_1``, so every marginal is standard normal.
    """
    fs = spec.factor_spec
    if isinstance(fs, ExplicitPath):
        return fs.path
    if isinstance(fs, AR1):
        phi = fs.persistence
        if not -1.0 < phi < 1.0:
            raise DomainError("AR(1) persistence must lie in (-1, 1)")
        eps = _rng(spec.seed, _FACTOR_STREAM).standard_normal(spec.horizon)
        f = np.empty(spec.horizon)
        f[0] = eps[0]
        scale = np.sqrt(1.0 - phi * phi)
        for t in range(1, spec.horizon):
            f[t] = phi * f[t - 1] + scale * eps[t]
        return FactorPath(f)
    raise TypeError(f"unknown factor spec {fs!r}")


def gen_default_panel(spec: SimulationSpec, factor: FactorPath, replication: int = 0, n_obligors=None):
    """Binomial default rates around the true PIT PDs.

    Returns ``(panel, true_pit)``; ``true_pit`` is the complete portfolio x year
    matrix of conditional PDs. ``n_obligors`` overrides ``spec.n_obligors``.
    ``spec.mask``, if set, deletes cells after all of them were drawn.
    """
    n = int(spec.n_obligors if n_obligors is None else n_obligors)
    if n < 1:
        raise DomainError("n_obligors must be at least 1")
    pds = np.array(spec.true_ttc_pds)
    rho = spec.true_rho
    truth = np.asarray(pit_pd(pds[:, None], rho[:, None], factor.values[None, :]))
    n_p, n_t = truth.shape
    counts = np.empty((n_p, n_t), dtype=np.int64)
    for i in range(n_p):
        for t in range(n_t):
            counts[i, t] = _rng(spec.seed, _DEFAULT_STREAM, replication, i, t).binomial(n, truth[i, t])
    panel = DefaultRatePanel(spec.portfolio_ids, spec.years, counts / n, np.full((n_p, n_t), n))
    if spec.mask is not None:
        panel = panel.with_mask(spec.mask.grid)
    return panel, truth


@dataclass(eq=False)
class SweepTable:
    """TTC PD estimates for every (size, replication, portfolio).

    ``estimates[s, r, i]`` is NaN where replication ``r`` at size ``sizes[s]``
    failed; the failure messages are in ``failures``.
    """

    sizes: tuple[int, ...]
    replications: int
    portfolio_ids: tuple[str, ...]
    estimates: np.ndarray
    failures: list = field(default_factory=list)

    def mean(self):
        return np.nanmean(self.estimates, axis=1)

    def std(self):
        return np.nanstd(self.estimates, axis=1, ddof=1) if self.replications > 1 else np.zeros(
            (len(self.sizes), len(self.portfolio_ids))
        )

    def mean_abs_error(self, truth):
        return np.nanmean(np.abs(self.estimates - np.asarray(truth)[None, None, :]), axis=1)


@dataclass(eq=False)
class ExperimentResult:
    spec: SimulationSpec
    true_ttc_pd: np.ndarray
    true_rho: np.ndarray
    true_factor: FactorPath
    true_pit: np.ndarray | None = None
    panel: DefaultRatePanel | None = None
    result: CalibrationResult | None = None
    trace: ConvergenceTrace | None = None
    sweep: SweepTable | None = None

    @property
    def seed(self):
        return self.spec.seed

    @property
    def ttc_error(self):
        """Fitted minus true TTC PD per portfolio."""
        return None if self.result is None else self.result.ttc_pd - self.true_ttc_pd

    @property
    def ttc_rel_error(self):
        return None if self.result is None else self.ttc_error / self.true_ttc_pd

    @property
    def pit_error(self):
        return None if self.result is None else self.result.pit_pd - self.true_pit


def _require_identifiable(spec):
    if spec.mask is not None:
        report = check_identifiability(spec.mask, spec.true_rho)
        if not report.identifiable:
            raise SingularSystem(report)


def run_recovery_experiment(spec: SimulationSpec, config: CalibrationConfig | None = None, replication: int = 0):
    """Simulate one panel from ``spec`` and calibrate it with Basel-linked correlations."""
    _require_identifiable(spec)
    config = config or CalibrationConfig()
    factor = gen_factor_path(spec)
    panel, truth = gen_default_panel(spec, factor, replication)
    result, trace = fit_nonlinear(panel, spec.asset_class, config)
    return ExperimentResult(
        spec=spec,
        true_ttc_pd=np.array(spec.true_ttc_pds),
        true_rho=spec.true_rho,
        true_factor=factor,
        true_pit=truth,
        panel=panel,
        result=result,
        trace=trace,
    )


def _sweep_task(args):
    spec, factor, size, rep, config = args
    panel, _ = gen_default_panel(spec, factor, rep, n_obligors=size)
    try:
        result, _ = fit_nonlinear(panel, spec.asset_class, config)
    except CalibrationError as exc:
        return None, f"n={size} replication {rep}: {exc}"
    return result.ttc_pd, None


def run_sample_size_sweep(
    spec: SimulationSpec,
    sizes: Sequence[int],
    replications: int = 20,
    config: CalibrationConfig | None = None,
    workers: int = 1,
) -> ExperimentResult:
    """Recalibrate on fresh default draws for each sample size and replication.

    The factor path stays fixed; replication ``r`` uses default streams
    ``(1, r, i, t)``, so ``sizes=[n], replications=1`` reproduces
    :func:`run_recovery_experiment` on a spec with ``n_obligors=n``. Failed
    replications are recorded; a size fails only if all of its replications do.
    """
    sizes = tuple(int(s) for s in sizes)
    if not sizes:
        raise ValueError("sizes must be non-empty")
    if any(s < 1 for s in sizes):
        raise DomainError("sample sizes must be positive")
    if int(replications) < 1:
        raise ValueError("replications must be positive")
    _require_identifiable(spec)
    config = config or CalibrationConfig()
    factor = gen_factor_path(spec)
    tasks = [(spec, factor, s, r, config) for s in sizes for r in range(replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_task, tasks))
    else:
        outcomes = [_sweep_task(t) for t in tasks]

    n_p = len(spec.true_ttc_pds)
    est = np.full((len(sizes), replications, n_p), np.nan)
    failures = []
    for (_, _, s, r, _), (ttc, err) in zip(tasks, outcomes):
        if err is not None:
            log.warning(err)
            failures.append(err)
        else:
            est[sizes.index(s), r] = ttc
    for si, s in enumerate(sizes):
        if np.all(np.isnan(est[si])):
            raise CalibrationError(f"all {replications} replications failed at n={s}")
    table = SweepTable(sizes, int(replications), spec.portfolio_ids, est, failures)
    return ExperimentResult(
        spec=spec,
        true_ttc_pd=np.array(spec.true_ttc_pds),
        true_rho=spec.true_rho,
        true_factor=factor,
        sweep=table,
    )


def with_size(spec: SimulationSpec, n: int) -> SimulationSpec:
    return replace(spec, n_obligors=int(n))
