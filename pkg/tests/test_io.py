import json
import random

import numpy as np
import pytest

from ttcpd import AR1, CalibrationConfig, DefaultRatePanel, FixedRho, calibrate, check_identifiability
from ttcpd.datasets import paper_fig4_mask, paper_setup
from ttcpd.io import (
    PanelFormatError,
    config_from_dict,
    config_to_dict,
    dumps,
    experiment_series,
    experiment_to_dict,
    format_mask,
    format_panel,
    parse_factor_path,
    parse_mask,
    parse_panel,
    result_from_dict,
    result_to_csv,
    result_to_dict,
    spec_from_dict,
    spec_to_dict,
    sweep_table_csv,
)
from ttcpd.simulator import AvailabilityMask, SimulationSpec, run_recovery_experiment, run_sample_size_sweep

COUNTS = """portfolio_id,year,defaults,obligors
P1,2001,5,1000
P1,2002,9,1000
P1,2003,3,1000
P2,2001,40,800
P2,2003,25,800
P10,2002,7,500
P10,2003,11,500
"""


def _shuffled(text, seed):
    lines = text.splitlines(keepends=True)
    body = lines[1:]
    random.Random(seed).shuffle(body)
    return lines[0] + "".join(body)


@pytest.mark.parametrize("seed", range(5))
def test_counts_round_trip_canonical(seed):
    panel = parse_panel(_shuffled(COUNTS, seed))
    assert panel.portfolio_ids == ("P1", "P2", "P10")
    assert format_panel(panel) == COUNTS


def test_rates_round_trip():
    text = "portfolio_id,year,default_rate\nA,1,0.1\nA,2,0.012345678901234567\nB,2,0.3\n"
    panel = parse_panel(text)
    assert panel.obligors is None
    assert format_panel(panel) == text
    assert parse_panel(format_panel(panel)) == panel


def test_missing_cells_are_absent_rows():
    panel = parse_panel(COUNTS)
    assert np.isnan(panel.rates[1, 1]) and not panel.mask[1, 1]
    assert ",," not in format_panel(panel)


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("", "empty"),
        ("a,b,c\n", "header"),
        ("portfolio_id,year,default_rate\n", "no data"),
        ("portfolio_id,year,default_rate\nA,1,0.1\nA,1,0.2\n", "duplicate"),
        ("portfolio_id,year,default_rate\nA,x,0.1\n", "year"),
        ("portfolio_id,year,default_rate\nA,1,1.5\n", "outside"),
        ("portfolio_id,year,default_rate\nA,1,abc\n", "not a number"),
        ("portfolio_id,year,defaults,obligors\nA,1,5,0\n", "obligors"),
        ("portfolio_id,year,defaults,obligors\nA,1,6,5\n", "defaults"),
        ("portfolio_id,year,defaults,obligors\nA,1,2.5,10\n", "integers"),
        ("portfolio_id,year,default_rate\nA,1\n", "fields"),
        ("portfolio_id,year,default_rate\n,1,0.1\n", "empty portfolio id"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(PanelFormatError, match=fragment):
        parse_panel(text)


def test_mask_round_trip():
    mask = paper_fig4_mask()
    again = parse_mask("# comment\n\n" + format_mask(mask))
    np.testing.assert_array_equal(again.grid, mask.grid)
    with pytest.raises(PanelFormatError):
        parse_mask("101\n11\n")
    with pytest.raises(PanelFormatError):
        parse_mask("1a1\n")
    with pytest.raises(PanelFormatError):
        parse_mask("000\n")


def test_factor_path_parse():
    f = parse_factor_path("# c\nyear,factor\n2,0.5\n1,-0.5\n")
    np.testing.assert_array_equal(f.values, [-0.5, 0.5])
    with pytest.raises(PanelFormatError):
        parse_factor_path("t,f\n1,2\n")


def _calibrated(config):
    panel = parse_panel(COUNTS)
    result, trace = calibrate(panel, config)
    report = check_identifiability(AvailabilityMask.from_panel(panel))
    return result, trace, report


@pytest.mark.parametrize("config", [CalibrationConfig(), CalibrationConfig(rho_mode=FixedRho((0.1, 0.2, 0.15)), alpha_mean=0.1)])
def test_result_round_trip(config):
    result, trace, report = _calibrated(config)
    doc = result_to_dict(result, config, report, trace)
    text = dumps(doc)
    back, cfg, rep, tr = result_from_dict(json.loads(text))
    assert dumps(result_to_dict(back, cfg, rep, tr)) == text
    assert cfg == config
    np.testing.assert_array_equal(back.k, result.k)
    np.testing.assert_array_equal(back.pit_pd, result.pit_pd)
    assert np.isnan(back.residuals[1, 1])


def test_result_precision_and_sections():
    result, trace, report = _calibrated(CalibrationConfig())
    doc = result_to_dict(result, CalibrationConfig(), report, trace)
    assert {"config", "portfolios", "factor", "pit_pd", "residuals", "identifiability", "convergence_trace",
            "warnings"} <= set(doc)
    csv_text = result_to_csv(doc)
    row = next(line for line in csv_text.splitlines() if line.startswith("portfolio,P1,,ttc_pd"))
    assert float(row.split(",")[-1]) == result.ttc_pd[0]


def test_result_schema_checked():
    with pytest.raises(PanelFormatError):
        result_from_dict({"schema": "other"})


def test_config_round_trip():
    cfg = CalibrationConfig(alpha_mean=0.2, tol=1e-9, max_iter=7, clamp_eps=1e-5, weight_by_obligors=True)
    assert config_from_dict(json.loads(json.dumps(config_to_dict(cfg)))) == cfg


def test_spec_round_trip():
    spec = SimulationSpec((0.01, 0.02), 4, AR1(0.3), 50, mask=np.array([[1, 1, 0, 0], [0, 1, 1, 1]], bool), seed=8)
    again = spec_from_dict(json.loads(json.dumps(spec_to_dict(spec))))
    assert spec_to_dict(again) == spec_to_dict(spec)
    paper = paper_setup(seed=3, masked=True)
    assert spec_to_dict(spec_from_dict(spec_to_dict(paper))) == spec_to_dict(paper)
    with pytest.raises(PanelFormatError):
        spec_from_dict({"factor": {"kind": "ar1", "persistence": 0.1}})


def test_clamp_warning_in_document():
    panel = DefaultRatePanel(("A", "B"), (1, 2, 3), [[0.0, 0.01, 0.02], [0.03, 0.04, 0.05]], [[100] * 3] * 2)
    result, trace = calibrate(panel)
    doc = result_to_dict(result, CalibrationConfig(), trace=trace)
    assert doc["clamped_cells"] == [{"portfolio_id": "A", "year": 1, "raw": 0.0, "clamped": 0.005}]
    assert any("clamped" in w for w in doc["warnings"])


def test_experiment_outputs():
    exp = run_recovery_experiment(paper_setup(n_obligors=10_000, seed=1, masked=True))
    doc = json.loads(dumps(experiment_to_dict(exp)))
    assert len(doc["errors"]["ttc_rel"]) == 6
    series = experiment_series(exp).splitlines()
    assert series[0] == "series,x,y"
    names = {line.split(",")[0] for line in series[1:]}
    assert {"factor_true", "factor_fitted", "ttc_true:P1", "pit_fitted:P6", "observed:P3"} <= names
    n_observed = sum(line.startswith("observed:") for line in series)
    assert n_observed == int(exp.panel.mask.sum())

    sweep = run_sample_size_sweep(paper_setup(seed=1), [1000, 10_000], replications=2)
    table = sweep_table_csv(sweep).splitlines()
    assert len(table) == 1 + 2 * 2 * 6
    names = {line.split(",")[0] for line in experiment_series(sweep).splitlines()[1:]}
    assert {"estimate:P1", "mean:P1", "truth:P6"} <= names
