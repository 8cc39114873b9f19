"""Identifiability of the factor model under a missing-data pattern.

The authoritative test is the numerical rank of the constrained design matrix.
Alongside it we report the connected components of the bipartite
portfolio/year observation graph. When every correlation is positive the
null space of the constrained system is spanned by per-component shifts
``K_i += c sqrt(rho_i)``, ``f_t += c`` (one constraint removes one of them), so
the graph predicts ``deficiency = (#components holding a year) - 1 +
#portfolios without data``. That prediction is checked against the rank and any
disagreement is reported as a note.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import EmptyPortfolio
from .model import DefaultRatePanel, FactorPath

__all__ = [
    "RANK_RTOL",
    "AvailabilityMask",
    "IdentifiabilityReport",
    "design_matrix",
    "numerical_rank",
    "observation_components",
    "check_identifiability",
    "observed_factor_mean",
]

#: relative singular-value cutoff shared by the solver and the rank test
RANK_RTOL = 1e-8

_GENERIC_RHO = 0.15


@dataclass(frozen=True, eq=False)
class AvailabilityMask:
    """Portfolio x year boolean grid, True where a default rate is observed."""

    grid: np.ndarray
    portfolio_ids: tuple[str, ...] | None = None
    years: tuple[int, ...] | None = None

    def __post_init__(self):
        g = np.array(self.grid, dtype=bool)
        if g.ndim != 2:
            raise ValueError("mask must be two-dimensional")
        if not g.any():
            raise ValueError("mask must contain at least one observed cell")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)
        if self.portfolio_ids is None:
            object.__setattr__(self, "portfolio_ids", tuple(f"P{i + 1}" for i in range(g.shape[0])))
        else:
            object.__setattr__(self, "portfolio_ids", tuple(str(p) for p in self.portfolio_ids))
        if self.years is None:
            object.__setattr__(self, "years", tuple(range(1, g.shape[1] + 1)))
        else:
            object.__setattr__(self, "years", tuple(int(y) for y in self.years))
        if len(self.portfolio_ids) != g.shape[0] or len(self.years) != g.shape[1]:
            raise ValueError("labels do not match mask dimensions")

    @classmethod
    def from_panel(cls, panel: DefaultRatePanel) -> "AvailabilityMask":
        return cls(panel.mask, panel.portfolio_ids, panel.years)

    @property
    def shape(self):
        return self.grid.shape

    def portfolio_index(self, portfolio):
        if isinstance(portfolio, (int, np.integer)) and not isinstance(portfolio, bool):
            return int(portfolio)
        return self.portfolio_ids.index(str(portfolio))


@dataclass
class IdentifiabilityReport:
    identifiable: bool
    numerical_rank: int
    n_parameters: int
    deficiency: int
    components: list = field(default_factory=list)
    unobserved_years: list = field(default_factory=list)
    empty_portfolios: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "identifiable": self.identifiable,
            "numerical_rank": self.numerical_rank,
            "n_parameters": self.n_parameters,
            "deficiency": self.deficiency,
            "components": [
                {"portfolios": list(c["portfolios"]), "years": list(c["years"])} for c in self.components
            ],
            "unobserved_years": list(self.unobserved_years),
            "empty_portfolios": list(self.empty_portfolios),
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def summary(self):
        lines = [
            f"identifiable: {'yes' if self.identifiable else 'no'}",
            f"rank {self.numerical_rank} of {self.n_parameters} (deficiency {self.deficiency})",
        ]
        for k, c in enumerate(self.components, 1):
            lines.append(f"group {k}: portfolios {', '.join(c['portfolios']) or '-'}; years {_span(c['years'])}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


def _span(years):
    if not years:
        return "-"
    runs, start, prev = [], years[0], years[0]
    for y in list(years[1:]) + [None]:
        if y is not None and y == prev + 1:
            prev = y
            continue
        runs.append(f"{start}" if start == prev else f"{start}-{prev}")
        if y is not None:
            start = prev = y
    return ", ".join(runs)


def design_matrix(mask, rho):
    """Unconstrained design matrix, one row per observed cell.

    Columns are ``K_1..K_I`` then ``f_1..f_T``; the row for cell (i, t) holds
    +1 on ``K_i`` and ``-sqrt(rho_i)`` on ``f_t``. Rows are in portfolio-major
    order. Returns ``(A, (row_i, row_t))``.
    """
    grid = mask.grid if isinstance(mask, AvailabilityMask) else np.asarray(mask, dtype=bool)
    n_p, n_t = grid.shape
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (n_p,))
    row_i, row_t = np.nonzero(grid)
    a = np.zeros((len(row_i), n_p + n_t))
    r = np.arange(len(row_i))
    a[r, row_i] = 1.0
    a[r, n_p + row_t] = -np.sqrt(rho[row_i])
    return a, (row_i, row_t)


def constrained_matrix(mask, rho):
    """Design matrix with the factor-sum constraint row appended."""
    a, _ = design_matrix(mask, rho)
    n_p = np.asarray(mask.grid if isinstance(mask, AvailabilityMask) else mask).shape[0]
    c = np.zeros((1, a.shape[1]))
    c[0, n_p:] = 1.0
    return np.vstack([a, c])


def numerical_rank(a, rtol=RANK_RTOL):
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def observation_components(mask):
    """Connected components of the bipartite portfolio/year observation graph.

    Returns a list of ``(portfolio_indices, year_indices)`` pairs. Nodes
    without any edge form singleton components.
    """
    grid = mask.grid if isinstance(mask, AvailabilityMask) else np.asarray(mask, dtype=bool)
    n_p, n_t = grid.shape
    ri, rt = np.nonzero(grid)
    adj = coo_matrix((np.ones(len(ri)), (ri, n_p + rt)), shape=(n_p + n_t, n_p + n_t))
    n_comp, labels = connected_components(adj, directed=False)
    # order components by their first node so output is deterministic
    order = list(dict.fromkeys(labels.tolist()))
    out = []
    for lab in order:
        nodes = np.nonzero(labels == lab)[0]
        out.append(([int(n) for n in nodes if n < n_p], [int(n - n_p) for n in nodes if n >= n_p]))
    return out


def check_identifiability(mask, rho: Sequence[float] | float | None = None) -> IdentifiabilityReport:
    """Decide whether the mask admits a unique constrained least-squares fit.

    ``rho`` defaults to a generic positive value; the rank only depends on
    which correlations are zero.
    """
    if not isinstance(mask, AvailabilityMask):
        mask = AvailabilityMask(mask)
    n_p, n_t = mask.shape
    rho = np.broadcast_to(np.asarray(_GENERIC_RHO if rho is None else rho, dtype=float), (n_p,))

    full = constrained_matrix(mask, rho)
    n_par = n_p + n_t
    rank = numerical_rank(full)
    deficiency = n_par - rank

    comps = observation_components(mask)
    components, empty, unobserved, notes = [], [], [], []
    year_groups = 0
    for pi, ti in comps:
        if pi and not ti:
            empty.extend(mask.portfolio_ids[i] for i in pi)
            continue
        if ti and not pi:
            unobserved.extend(mask.years[t] for t in ti)
        year_groups += 1
        components.append(
            {"portfolios": [mask.portfolio_ids[i] for i in pi], "years": [mask.years[t] for t in ti]}
        )

    if empty:
        notes.append(f"portfolio(s) {', '.join(empty)} have no observations; their TTC level is free")
    if unobserved:
        notes.append(
            f"year(s) {_span(unobserved)} have no observations; the constraint fixes their factor sum "
            "but a common shift of all observed years remains free"
        )
    linked = [c for c in components if c["portfolios"]]
    if len(linked) > 1:
        desc = "; ".join(f"{{{', '.join(c['portfolios'])} | {_span(c['years'])}}}" for c in linked)
        notes.append(
            f"observation graph splits into {len(linked)} disjoint portfolio/year blocks: {desc}; "
            "the relative factor level between blocks cannot be estimated"
        )

    zero_rho = [mask.portfolio_ids[i] for i in range(n_p) if rho[i] == 0.0]
    if zero_rho:
        notes.append(
            f"portfolio(s) {', '.join(zero_rho)} have rho = 0 and carry no factor information; "
            "graph diagnostics are not applicable"
        )
    else:
        predicted = year_groups - 1 + len(empty)
        if predicted != deficiency:
            notes.append(
                f"graph diagnostics predict deficiency {predicted} but numerical rank gives {deficiency}; "
                "numerical rank is authoritative"
            )

    return IdentifiabilityReport(
        identifiable=deficiency == 0,
        numerical_rank=rank,
        n_parameters=n_par,
        deficiency=deficiency,
        components=components,
        unobserved_years=unobserved,
        empty_portfolios=empty,
        notes=notes,
    )


def observed_factor_mean(mask, factor: FactorPath, portfolio) -> float:
    """Mean of the factor over the years where ``portfolio`` is observed.

    A positive value means the portfolio was only seen in a better-than-average
    stretch, so its fitted TTC level sits above the average of its observed
    transformed default rates (and below it for a negative value).
    """
    if not isinstance(mask, AvailabilityMask):
        mask = AvailabilityMask(mask)
    i = mask.portfolio_index(portfolio)
    row = mask.grid[i]
    if not row.any():
        raise EmptyPortfolio([mask.portfolio_ids[i]])
    values = factor.values if isinstance(factor, FactorPath) else np.asarray(factor, dtype=float)
    return float(np.mean(values[row]))
