import json
import subprocess
import sys

import numpy as np
import pytest

from ttcpd.cli import (
    EXIT_DOMAIN,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_UNIDENTIFIABLE,
    EXIT_USAGE,
    main,
)
from ttcpd.datasets import PAPER_TTC_PDS
from ttcpd.io import format_mask, read_panel, write_panel

from panels import make_panel


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("TTCPD_OUTPUT_DIR", raising=False)
    return tmp_path


def _simulate(workdir, *extra, name="panel.csv", n="100000", seed="4"):
    out = workdir / name
    assert main(["simulate", "--paper-setup", "--n", n, "--seed", seed, "-o", str(out), *extra]) == EXIT_OK
    return out


class TestWcdr:
    def test_fixed_rho(self, capsys):
        assert main(["wcdr", "--pd", "0.01", "--rho", "0.2", "--confidence", "0.999"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "wcdr        0.145525266131" in out

    def test_asset_class(self, capsys):
        assert main(["wcdr", "--pd", "0.005", "--asset-class", "corporate"]) == EXIT_OK
        assert "rho         0.213456093969" in capsys.readouterr().out

    def test_rho_zero(self, capsys):
        main(["wcdr", "--pd", "0.03", "--rho", "0"])
        assert "wcdr        0.03\n" in capsys.readouterr().out

    def test_errors(self):
        assert main(["wcdr", "--pd", "0.01"]) == EXIT_USAGE
        assert main(["wcdr", "--pd", "1.5", "--rho", "0.1"]) == EXIT_DOMAIN
        with pytest.raises(SystemExit):
            main(["wcdr"])


class TestSimulate:
    def test_paper_setup(self, workdir):
        out = _simulate(workdir, n="10000")
        panel = read_panel(out)
        assert panel.shape == (6, 20) and panel.mask.all()
        truth = json.loads((workdir / "panel.truth.json").read_text())
        assert [p["ttc_pd"] for p in truth["portfolios"]] == list(PAPER_TTC_PDS)
        assert len(truth["factor"]) == 20

    def test_byte_identical(self, workdir):
        a = _simulate(workdir, name="a.csv")
        b = _simulate(workdir, name="b.csv")
        assert a.read_bytes() == b.read_bytes()
        assert (workdir / "a.truth.json").read_bytes() == (workdir / "b.truth.json").read_bytes()

    def test_mask(self, workdir):
        mask = np.ones((6, 20), dtype=bool)
        mask[0, 15:] = False
        mask[3, :4] = False
        (workdir / "m.mask").write_text(format_mask(mask))
        panel = read_panel(_simulate(workdir, "--mask", "m.mask"))
        np.testing.assert_array_equal(panel.mask, mask)
        assert sum(1 for _ in open(workdir / "panel.csv")) == 1 + mask.sum()

    def test_custom_spec(self, workdir):
        out = workdir / "ar.csv"
        code = main(["simulate", "--pds", "0.01,0.03", "--n", "500", "--ar1", "0.5", "--years", "8",
                     "--first-year", "2010", "--seed", "1", "-o", str(out)])
        assert code == EXIT_OK
        assert read_panel(out).years == tuple(range(2010, 2018))
        spec = json.loads((workdir / "ar.truth.json").read_text())["spec"]
        (workdir / "spec.json").write_text(json.dumps(spec))
        again = workdir / "again.csv"
        assert main(["simulate", "--spec", "spec.json", "-o", str(again)]) == EXIT_OK
        assert again.read_bytes() == out.read_bytes()

    def test_seed_required(self, workdir):
        assert main(["simulate", "--paper-setup", "--n", "100"]) == EXIT_USAGE

    def test_output_dir_env(self, workdir, monkeypatch):
        (workdir / "outs").mkdir()
        monkeypatch.setenv("TTCPD_OUTPUT_DIR", str(workdir / "outs"))
        assert main(["simulate", "--paper-setup", "--n", "100", "--seed", "2"]) == EXIT_OK
        assert (workdir / "outs" / "panel_seed2.csv").exists()


class TestCalibrate:
    def test_complete_panel(self, workdir):
        panel = _simulate(workdir)
        assert main(["calibrate", str(panel), "--asset-class", "corporate", "-o", "r.json"]) == EXIT_OK
        doc = json.loads((workdir / "r.json").read_text())
        ttc = np.array([p["ttc_pd"] for p in doc["portfolios"]])
        np.testing.assert_allclose(ttc, PAPER_TTC_PDS, rtol=0.05)
        assert doc["identifiability"]["identifiable"]
        assert doc["convergence_trace"]["records"]
        assert len(doc["pit_pd"]) == 6 and len(doc["pit_pd"][0]) == 20

    def test_fixed_rho_equals_flat_custom(self, workdir):
        panel = _simulate(workdir, n="20000")
        assert main(["calibrate", str(panel), "--fixed-rho", "0.18", "-o", "a.json"]) == EXIT_OK
        assert main(["calibrate", str(panel), "--asset-class", "custom", "0.18,0.18,50", "-o", "b.json"]) == EXIT_OK
        a = json.loads((workdir / "a.json").read_text())
        b = json.loads((workdir / "b.json").read_text())
        np.testing.assert_allclose([p["ttc_pd"] for p in a["portfolios"]],
                                   [p["ttc_pd"] for p in b["portfolios"]], rtol=1e-10)

    def test_csv_format(self, workdir, capsys):
        panel = _simulate(workdir, n="20000")
        assert main(["calibrate", str(panel), "--format", "csv"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("section,portfolio_id,year,field,value\n")
        assert "portfolio,P6,,ttc_pd," in out

    def test_block_disjoint_exit_code(self, workdir, capsys):
        rates = np.full((3, 6), 0.02)
        mask = np.array([[1, 1, 1, 0, 0, 0], [1, 1, 0, 0, 0, 0], [0, 0, 0, 1, 1, 1]], dtype=bool)
        write_panel(make_panel(rates, mask), workdir / "blocks.csv")
        assert main(["calibrate", "blocks.csv"]) == EXIT_UNIDENTIFIABLE
        err = capsys.readouterr().err
        assert "portfolios P1, P2; years 2001-2003" in err
        assert "portfolios P3; years 2004-2006" in err

    def test_not_converged(self, workdir):
        panel = _simulate(workdir, n="20000")
        assert main(["calibrate", str(panel), "--max-iter", "1", "--tol", "1e-15"]) == EXIT_NOT_CONVERGED

    def test_parse_error(self, workdir):
        (workdir / "bad.csv").write_text("portfolio_id,year,default_rate\nA,1,0.1\nA,1,0.1\n")
        assert main(["calibrate", "bad.csv"]) == EXIT_PARSE
        assert main(["calibrate", "missing.csv"]) == EXIT_PARSE

    def test_usage_errors(self, workdir):
        panel = _simulate(workdir, n="1000")
        assert main(["calibrate", str(panel), "--fixed-rho", "0.1", "--asset-class", "retail"]) == EXIT_USAGE
        assert main(["calibrate", str(panel), "--fixed-rho", "0.1,0.2"]) == EXIT_USAGE
        assert main(["calibrate", str(panel), "--asset-class", "custom", "1,2"]) == EXIT_USAGE

    def test_clamp_warning_on_both_streams(self, workdir, capsys):
        write_panel(make_panel([[0.0, 0.01, 0.02], [0.03, 0.02, 0.05]]), workdir / "z.csv")
        assert main(["calibrate", "z.csv", "-o", "z.json"]) == EXIT_OK
        err = capsys.readouterr().err
        doc = json.loads((workdir / "z.json").read_text())
        assert doc["warnings"] and all(w in err for w in doc["warnings"])


class TestCheck:
    def _write(self, workdir, mask):
        write_panel(make_panel(np.full(mask.shape, 0.03), mask), workdir / "p.csv")

    def test_complete(self, workdir, capsys):
        self._write(workdir, np.ones((3, 5), dtype=bool))
        assert main(["check", "p.csv"]) == EXIT_OK
        assert "identifiable: yes" in capsys.readouterr().out

    def test_chain(self, workdir):
        self._write(workdir, np.array([[1, 1, 1, 0, 0], [0, 0, 1, 1, 0], [0, 0, 0, 1, 1]], dtype=bool))
        assert main(["check", "p.csv"]) == EXIT_OK

    def test_blocks_json(self, workdir, capsys):
        self._write(workdir, np.array([[1, 1, 0, 0], [0, 0, 1, 1]], dtype=bool))
        assert main(["check", "p.csv", "--json"]) == EXIT_UNIDENTIFIABLE
        report = json.loads(capsys.readouterr().out)
        assert report["components"] == [
            {"portfolios": ["P1"], "years": [2001, 2002]},
            {"portfolios": ["P2"], "years": [2003, 2004]},
        ]


class TestExperiment:
    def test_recovery(self, workdir, capsys):
        code = main(["experiment", "recovery", "--paper-setup", "--n", "100000", "--seed", "0",
                     "--output-dir", "out"])
        assert code == EXIT_OK
        doc = json.loads((workdir / "out" / "recovery.json").read_text())
        assert max(abs(e) for e in doc["errors"]["ttc_rel"]) < 0.05
        assert (workdir / "out" / "recovery.series.csv").read_text().startswith("series,x,y\n")
        assert "P1: true 0.005" in capsys.readouterr().out

    def test_recovery_masked(self, workdir):
        from ttcpd.datasets import paper_fig4_mask

        (workdir / "fig4.mask").write_text(format_mask(paper_fig4_mask()))
        code = main(["experiment", "recovery", "--paper-setup", "--seed", "0", "--mask", "fig4.mask",
                     "--output-dir", "out", "--prefix", "fig5"])
        assert code == EXIT_OK
        doc = json.loads((workdir / "out" / "fig5.json").read_text())
        assert doc["spec"]["mask"] == format_mask(paper_fig4_mask()).split()

    def test_sweep(self, workdir):
        code = main(["experiment", "sweep", "--paper-setup", "--seed", "0", "--sizes", "1000,10000",
                     "--replications", "3", "--output-dir", "out"])
        assert code == EXIT_OK
        table = (workdir / "out" / "sweep.table.csv").read_text().splitlines()
        assert table[0] == "size,replication,portfolio_id,estimate" and len(table) == 1 + 2 * 3 * 6

    def test_unidentifiable_mask(self, workdir):
        mask = np.zeros((6, 20), dtype=bool)
        mask[:3, :10] = True
        mask[3:, 10:] = True
        (workdir / "bad.mask").write_text(format_mask(mask))
        code = main(["experiment", "recovery", "--paper-setup", "--seed", "0", "--mask", "bad.mask",
                     "--output-dir", "out"])
        assert code == EXIT_UNIDENTIFIABLE


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ttcpd.cli", "wcdr", "--pd", "0.02", "--rho", "0.1"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0 and "wcdr" in proc.stdout
