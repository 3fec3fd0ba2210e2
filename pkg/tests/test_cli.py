import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from cqedspec.cli import cli

from test_config import FIG2A
from test_modes import FIG2A_EIGENVALUES

GOLDEN = Path(__file__).parent / "golden"


def run(*args):
    return CliRunner().invoke(cli, list(args))


def rows(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.mark.parametrize(
    "args,golden",
    [
        (("spectrum", "--preset", "fig2a", "--points", "7"), "spectrum_fig2a.csv"),
        (("chi", "--preset", "fig6", "--points", "7"), "chi_fig6.csv"),
        (("modes", "--preset", "fig2a"), "modes_fig2a.csv"),
        (("branches", "--preset", "fig3", "--dc-points", "5"), "branches_fig3.csv"),
    ],
)
def test_golden_outputs(args, golden):
    res = run(*args)
    assert res.exit_code == 0, res.output
    assert res.output == (GOLDEN / golden).read_text()


def test_headers():
    assert run("spectrum", "--preset", "fig2a", "--points", "3").output.splitlines()[0] == "delta_p,re_amplitude,im_amplitude,intensity"
    assert run("chi", "--preset", "fig6", "--points", "3").output.splitlines()[0] == "delta_p,re_chi,im_chi"
    assert run("modes", "--preset", "fig2a").output.splitlines()[0] == "index,eigenvalue,photonic_fraction,w1,w2,w3"
    out = run("branches", "--preset", "fig3", "--dc-points", "2").output
    assert out.splitlines()[0] == "delta_c,lambda_1,lambda_2,lambda_3,lambda_4"


def test_modes_golden_matches_oracle():
    table = rows((GOLDEN / "modes_fig2a.csv").read_text())[1:]
    np.testing.assert_allclose([float(r[1]) for r in table], FIG2A_EIGENVALUES, atol=1e-12)


def test_deterministic_output():
    a = run("spectrum", "--preset", "fig2b", "--gN", "3.3")
    b = run("spectrum", "--preset", "fig2b", "--gN", "3.3")
    assert a.exit_code == 0 and a.output == b.output


def test_spectrum_has_four_peaks():
    from cqedspec import Spectrum, find_peaks

    table = rows(run("spectrum", "--preset", "fig2a", "--gN", "4.3").output)[1:]
    x = np.array([float(r[0]) for r in table])
    y = np.array([float(r[3]) for r in table])
    assert len(find_peaks(Spectrum.from_intensity(x, y))) == 4


def test_config_file(tmp_path):
    p = tmp_path / "fig2a.yaml"
    p.write_text(FIG2A)
    res = run("modes", "--config", str(p))
    assert res.exit_code == 0
    assert res.output == (GOLDEN / "modes_fig2a.csv").read_text()


def test_output_file_and_plot_script(tmp_path):
    out = tmp_path / "s.csv"
    plot = tmp_path / "plot.py"
    res = run("spectrum", "--preset", "fig2a", "--points", "11", "-o", str(out), "--plot-script", str(plot))
    assert res.exit_code == 0
    assert out.read_text().startswith("delta_p,")
    script = plot.read_text()
    assert "matplotlib" in script and "s.csv" in script
    compile(script, str(plot), "exec")


def test_poly_audit():
    res = run("poly", "--preset", "fig3", "--delta-c", "0")
    assert res.exit_code == 0
    report = json.loads(res.output)
    assert report["mismatched_powers"] == [0, 3]
    assert report["consistent"] is False


def test_dynamics_reports_small_error():
    res = run("dynamics", "--preset", "fig2a", "--gN", "4.3", "--dp", "0")
    assert res.exit_code == 0
    last = res.output.strip().splitlines()[-1]
    assert last.startswith("# dp=")
    err = float(last.split("final_vs_closed_form_relative_error=")[1].split()[0])
    assert err < 1e-6
    assert res.output.splitlines()[0] == "time,re_a,im_a,re_s1,im_s1,re_s2,im_s2,re_s3,im_s3"


def test_peaks_table():
    res = run("peaks", "--preset", "fig2a")
    assert res.exit_code == 0
    table = rows(res.output)
    assert table[0] == ["position", "height", "prominence", "eigenvalue", "residual"]
    assert len(table) == 5
    assert all(abs(float(r[4])) < 1.0 for r in table[1:])


def test_fit_round_trip(tmp_path):
    data = tmp_path / "data.csv"
    scan = run("spectrum", "--preset", "fig2a", "--points", "901").output
    lines = ["delta_p,intensity"] + [f"{r[0]},{r[3]}" for r in rows(scan)[1:]]
    data.write_text("\n".join(lines) + "\n")
    best = tmp_path / "best.csv"
    res = run("fit", "--preset", "fig2a", "--gN", "4.8", "--kappa", "1.7", "--delta-c", "0.3",
              "--data", str(data), "--spectrum-out", str(best))
    assert res.exit_code == 0, res.output
    result = json.loads(res.output)
    assert result["converged"]
    assert result["parameters"]["G_common"] == pytest.approx(4.3, rel=1e-6)
    assert best.read_text().splitlines()[0] == "delta_p,intensity,fit"


def test_preset_list_and_show():
    res = run("preset", "list")
    assert res.exit_code == 0
    for name in ("fig2a", "fig2b", "fig2c", "fig2d", "fig3", "fig6", "rb85-d2"):
        assert name in res.output
    show = run("preset", "show", "rb85-d2", "--panel", "d", "--gN", "30MHz")
    assert show.exit_code == 0
    assert "-78.1 MHz" in show.output


@pytest.mark.parametrize(
    "args",
    [
        ("spectrum", "--preset", "rb85-d2"),  # coupling is required
        ("spectrum", "--preset", "nope"),
        ("spectrum",),
        ("spectrum", "--preset", "fig2a", "--kappa", "-1"),
        ("spectrum", "--preset", "fig2a", "--gN", "3 furlongs"),
        ("modes", "--preset", "fig2a", "--method", "qr"),
    ],
)
def test_usage_errors_exit_2(args):
    res = run(*args)
    assert res.exit_code == 2
    assert res.output.strip()


def test_missing_kappa_config_exit_2(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text(FIG2A.replace("  kappa: 2 Gamma\n", ""))
    res = run("spectrum", "--config", str(p))
    assert res.exit_code == 2
    assert "cavity.kappa" in res.output


def test_numerical_failures_exit_3(tmp_path):
    res = run("dynamics", "--preset", "fig2a", "--dp", "0", "--dt", "5")
    assert res.exit_code == 3
    data = tmp_path / "data.csv"
    scan = run("spectrum", "--preset", "fig2a", "--points", "301").output
    data.write_text("delta_p,intensity\n" + "\n".join(f"{r[0]},{r[3]}" for r in rows(scan)[1:]) + "\n")
    res = run("fit", "--preset", "fig2a", "--gN", "6", "--data", str(data), "--max-iter", "1")
    assert res.exit_code == 3


def test_fit_mhz_data_round_trip(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(run("preset", "show", "rb85-d2", "--panel", "c", "--gN", "30MHz").output)
    scan = rows(run("spectrum", "--config", str(cfg), "--points", "1601").output)[1:]
    data = tmp_path / "data.csv"
    data.write_text("delta_p,intensity\n" + "\n".join(f"{float(r[0]) * 6.0666!r},{r[3]}" for r in scan) + "\n")
    best = tmp_path / "best.csv"
    res = run("fit", "--config", str(cfg), "--kappa", "8MHz", "--data", str(data), "--data-unit", "MHz",
              "--spectrum-out", str(best))
    assert res.exit_code == 0, res.output
    assert json.loads(res.output)["parameters"]["G_common"] == pytest.approx(30 / 6.0666, rel=1e-6)
    first = rows(best.read_text())[1]
    assert float(first[0]) == pytest.approx(-250.0)
