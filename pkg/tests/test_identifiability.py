import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttcpd import (
    AvailabilityMask,
    EmptyPortfolio,
    FactorPath,
    IdentifiabilityReport,
    check_identifiability,
    observed_factor_mean,
)
from ttcpd.identifiability import constrained_matrix, design_matrix, numerical_rank, observation_components

from panels import block_disjoint_mask, chain_mask


def test_complete_mask():
    report = check_identifiability(np.ones((4, 6), dtype=bool))
    assert report.identifiable and report.deficiency == 0
    assert report.numerical_rank == report.n_parameters == 10
    assert report.notes == []
    assert len(report.components) == 1


def test_two_blocks():
    mask = AvailabilityMask(
        [[1, 1, 1, 0, 0], [1, 1, 0, 0, 0], [0, 0, 0, 1, 1]], portfolio_ids=("A", "B", "C"), years=range(2001, 2006)
    )
    report = check_identifiability(mask)
    assert not report.identifiable and report.deficiency == 1
    assert report.components == [
        {"portfolios": ["A", "B"], "years": [2001, 2002, 2003]},
        {"portfolios": ["C"], "years": [2004, 2005]},
    ]
    assert any("2 disjoint" in n for n in report.notes)
    assert "group 2: portfolios C; years 2004-2005" in report.summary()


def test_overlapping_pair():
    report = check_identifiability([[1, 1, 1, 0], [0, 0, 1, 1]])
    assert report.identifiable


def test_single_unobserved_year():
    # the unobserved factor is only tied to the rest through the sum constraint,
    # so a common shift of the observed years stays free
    report = check_identifiability([[1, 1, 0, 1], [1, 1, 0, 1]])
    assert not report.identifiable and report.deficiency == 1
    assert report.unobserved_years == [3]
    assert not any("numerical rank is authoritative" in n for n in report.notes)


def test_empty_portfolio():
    report = check_identifiability([[1, 1, 1], [0, 0, 0]])
    assert report.empty_portfolios == ["P2"] and report.deficiency == 1


def test_zero_rho_note():
    # P2 alone pins the factor, so the panel is still identifiable
    report = check_identifiability(np.ones((2, 3), dtype=bool), rho=[0.0, 0.2])
    assert report.identifiable
    assert any("rho = 0" in n for n in report.notes)


def test_design_matrix_rows():
    a, (ri, rt) = design_matrix([[1, 0], [1, 1]], [0.04, 0.09])
    np.testing.assert_allclose(a, [[1, 0, -0.2, 0], [0, 1, -0.3, 0], [0, 1, 0, -0.3]])
    assert list(ri) == [0, 1, 1] and list(rt) == [0, 0, 1]


def test_report_round_trip():
    report = check_identifiability([[1, 1, 0, 0], [0, 0, 1, 1]])
    d = json.loads(json.dumps(report.to_dict()))
    assert IdentifiabilityReport.from_dict(d).to_dict() == report.to_dict()


@pytest.mark.parametrize("seed", range(50))
def test_block_disjoint_unidentifiable(seed):
    rng = np.random.default_rng(seed)
    mask = block_disjoint_mask(rng, int(rng.integers(2, 8)), int(rng.integers(2, 21)))
    rho = rng.uniform(0.03, 0.3, size=mask.shape[0])
    report = check_identifiability(mask, rho)
    assert not report.identifiable
    assert len([c for c in report.components if c["portfolios"]]) >= 2


@pytest.mark.parametrize("seed", range(50))
def test_overlapping_chain_identifiable(seed):
    rng = np.random.default_rng(1000 + seed)
    mask = chain_mask(rng, int(rng.integers(1, 8)), int(rng.integers(2, 21)))
    rho = rng.uniform(0.03, 0.3, size=mask.shape[0])
    report = check_identifiability(mask, rho)
    assert report.identifiable, report.summary()


@st.composite
def masks(draw):
    n_p = draw(st.integers(1, 5))
    n_t = draw(st.integers(1, 8))
    cells = draw(st.lists(st.booleans(), min_size=n_p * n_t, max_size=n_p * n_t))
    grid = np.array(cells).reshape(n_p, n_t)
    if not grid.any():
        grid[0, 0] = True
    return grid


@given(masks(), st.integers(0, 2**32 - 1))
@settings(max_examples=300, deadline=None)
def test_graph_agrees_with_rank(grid, seed):
    rho = np.random.default_rng(seed).uniform(0.02, 0.4, size=grid.shape[0])
    report = check_identifiability(grid, rho)
    assert not any("authoritative" in n for n in report.notes)
    assert report.identifiable == (report.deficiency == 0)
    # disconnected portfolio blocks always imply non-identifiability
    linked = [c for c in report.components if c["portfolios"]]
    if len(linked) > 1:
        assert not report.identifiable


@given(masks(), st.integers(0, 2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_removing_cells_never_raises_rank(grid, seed):
    rng = np.random.default_rng(seed)
    rho = rng.uniform(0.02, 0.4, size=grid.shape[0])
    rank = numerical_rank(constrained_matrix(grid, rho))
    observed = np.argwhere(grid)
    for cell in observed[rng.permutation(len(observed))][:-1]:
        grid = grid.copy()
        grid[tuple(cell)] = False
        new_rank = numerical_rank(constrained_matrix(grid, rho))
        assert new_rank <= rank
        rank = new_rank


def test_components_include_isolated_nodes():
    comps = observation_components([[1, 0, 0], [0, 0, 0]])
    assert ([0], [0]) in comps and ([1], []) in comps and ([], [1]) in comps


class TestObservedFactorMean:
    f = FactorPath([1.0, -2.0, 0.5, 0.5])

    def test_full_mask_zero_sum(self):
        assert observed_factor_mean(np.ones((2, 4), dtype=bool), self.f, 1) == pytest.approx(0.0)

    def test_positive_years(self):
        assert observed_factor_mean([[1, 0, 1, 1]], self.f, 0) == pytest.approx(2 / 3)

    def test_single_year(self):
        mask = AvailabilityMask([[0, 1, 0, 0], [1, 1, 1, 1]], portfolio_ids=("X", "Y"))
        assert observed_factor_mean(mask, self.f, "X") == -2.0

    def test_empty(self):
        with pytest.raises(EmptyPortfolio):
            observed_factor_mean([[0, 0, 0, 0], [1, 1, 1, 1]], self.f, 0)
