"""
Command-line interface.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.
All frequencies in the output are in Gamma units; floats are written with
Python's shortest round-trip representation so outputs are byte-stable.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import os
import sys

import click
import numpy as np

from . import analysis, dynamics, fit as fitting, modes, response
from .config import (
    PRESETS,
    ConfigError,
    Document,
    dump_document,
    load_document,
    parse_document,
    parse_frequency,
    preset_document,
)
from .errors import NumericalError, ValidationError
from .model import Grid, Unit

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def fmt(x) -> str:
    x = float(x)
    if x == 0.0:
        x = 0.0  # drop the sign of negative zero
    return repr(x)


def write_csv(stream, header, rows):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


class _Output:
    """Opens ``path`` for writing, or wraps stdout when ``path`` is None or '-'."""

    def __init__(self, path):
        self.path = path

    def __enter__(self):
        if self.path in (None, "-"):
            self.fh = click.get_text_stream("stdout")
            self.close = False
        else:
            self.fh = open(self.path, "w", encoding="utf-8", newline="")
            self.close = True
        return self.fh

    def __exit__(self, *exc):
        if self.close:
            self.fh.close()
        else:
            self.fh.flush()


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except NumericalError as exc:
            _fail(EXIT_NUMERICAL, f"numerical failure: {exc}")
        except ValidationError as exc:
            _fail(EXIT_CONFIG, str(exc))

    return wrapper


def system_options(func):
    """Options shared by every subcommand that needs a system configuration."""
    opts = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="YAML configuration file."),
        click.option("--preset", "preset_name", help="Named parameter set (see `cqedspec preset list`)."),
        click.option("--panel", help="Figure panel of a preset (e.g. b, c, d for rb85-d2)."),
        click.option("--gN", "g_sqrt_n", help="Collective coupling g*sqrt(N); bare numbers are Gamma units, or e.g. '30MHz'."),
        click.option("--delta-c", "delta_c", help="Cavity detuning override (same unit rules as --gN)."),
        click.option("--kappa", help="Cavity half-width override (same unit rules as --gN)."),
        click.option("-o", "--output", type=click.Path(dir_okay=False), help="Output file (default: stdout)."),
    ]
    for opt in reversed(opts):
        func = opt(func)
    return func


def _tag(value: str) -> str:
    """Attach the Gamma unit to bare numbers given on the command line."""
    try:
        return f"{float(value)!r} Gamma"
    except ValueError:
        return value


def build_document(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa) -> Document:
    if bool(config_path) == bool(preset_name):
        raise ConfigError("", "give exactly one of --config or --preset")
    if config_path:
        if panel:
            raise ConfigError("panel", "--panel only applies to presets")
        with open(config_path, encoding="utf-8") as fh:
            raw = load_document(fh.read())
        if not isinstance(raw, dict):
            raise ConfigError("", "configuration must be a mapping at the top level")
    else:
        raw = preset_document(preset_name, panel=panel)
    if g_sqrt_n is not None:
        raw["coupling"] = {"g_sqrt_n": _tag(g_sqrt_n)}
    if delta_c is not None:
        raw.setdefault("cavity", {})["delta_c"] = _tag(delta_c)
    if kappa is not None:
        raw.setdefault("cavity", {})["kappa"] = _tag(kappa)
    if preset_name and raw.get("coupling", {}).get("g_sqrt_n", "") is None:
        raise ConfigError("coupling.g_sqrt_n", f"preset {preset_name!r} needs a coupling strength (pass --gN)")
    return parse_document(raw)


def _with_grid(doc: Document, dp_min, dp_max, points):
    grid = doc.system.grid
    if dp_min is None and dp_max is None and points is None:
        return doc.system
    lo = parse_frequency(_tag(dp_min), "--dp-min", doc.gamma_mhz) if dp_min is not None else grid.dp_min
    hi = parse_frequency(_tag(dp_max), "--dp-max", doc.gamma_mhz) if dp_max is not None else grid.dp_max
    return doc.system.replace(grid=Grid(lo, hi, points if points is not None else grid.points))


def grid_options(func):
    func = click.option("--points", type=int, help="Number of grid points.")(func)
    func = click.option("--dp-max", help="Upper end of the probe-detuning scan.")(func)
    func = click.option("--dp-min", help="Lower end of the probe-detuning scan.")(func)
    return func


_PLOT_TEMPLATE = '''\
"""Plot {csv_name} (written by `cqedspec {command}`)."""
import numpy as np
import matplotlib.pyplot as plt

data = np.genfromtxt({csv_path!r}, delimiter=",", names=True)
fig, ax = plt.subplots()
for name in {columns!r}:
    ax.plot(data[{x!r}], data[name], label=name)
ax.set_xlabel({xlabel!r})
ax.set_ylabel({ylabel!r})
ax.legend()
plt.show()
'''


def write_plot_script(path, csv_path, command, x, columns, xlabel, ylabel):
    if csv_path in (None, "-"):
        raise ConfigError("--plot-script", "a plot script needs the data written to a file (use -o)")

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_PLOT_TEMPLATE.format(
            csv_name=os.path.basename(csv_path), command=command, csv_path=csv_path,
            x=x, columns=list(columns), xlabel=xlabel, ylabel=ylabel,
        ))


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Transmission spectra and normal modes of a cavity coupled to multi-level atoms."""


@cli.command()
@system_options
@grid_options
@click.option("--plot-script", type=click.Path(dir_okay=False), help="Also write a matplotlib script for the CSV.")
@handle_errors
def spectrum(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa, output, dp_min, dp_max, points, plot_script):
    """Normalized cavity transmission vs probe detuning (CSV)."""
    doc = build_document(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa)
    scan = response.scan_spectrum(_with_grid(doc, dp_min, dp_max, points))
    with _Output(output) as fh:
        write_csv(fh, ["delta_p", "re_amplitude", "im_amplitude", "intensity"],
                  zip(scan.dp, scan.amplitude.real, scan.amplitude.imag, scan.intensity))
    if plot_script:
        write_plot_script(plot_script, output, "spectrum", "delta_p", ["intensity"], "probe detuning / Gamma", "normalized transmission")


@cli.command()
@system_options
@grid_options
@click.option("--plot-script", type=click.Path(dir_okay=False), help="Also write a matplotlib script for the CSV.")
@handle_errors
def chi(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa, output, dp_min, dp_max, points, plot_script):
    """Collective atomic susceptibility vs probe detuning (CSV)."""
    doc = build_document(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa)
    dp, x = response.scan_susceptibility(_with_grid(doc, dp_min, dp_max, points))
    with _Output(output) as fh:
        write_csv(fh, ["delta_p", "re_chi", "im_chi"], zip(dp, x.real, x.imag))
    if plot_script:
        write_plot_script(plot_script, output, "chi", "delta_p", ["re_chi", "im_chi"], "probe detuning / Gamma", "chi / Gamma")


@cli.command(name="modes")
@system_options
@click.option("--method", type=click.Choice(["secular", "dense"]), default="secular", show_default=True)
@handle_errors
def modes_cmd(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa, output, method):
    """Normal-mode eigenvalues and basis weights (CSV)."""
    doc = build_document(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa)
    cfg = doc.system
    pm = modes.eigenmodes(modes.mode_matrix(cfg.ladder, cfg.coupling, cfg.cavity.delta_c), method=method)
    m = cfg.ladder.size
    with _Output(output) as fh:
        write_csv(
            fh,
            ["index", "eigenvalue", "photonic_fraction"] + [f"w{i + 1}" for i in range(m)],
            ([k + 1, float(pm.eigenvalues[k]), float(pm.photonic_fraction[k])] + [float(w) for w in pm.weights[k, :m]]
             for k in range(len(pm))),
        )


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=float))


@cli.command()
@system_options
@handle_errors
def poly(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa, output):
    """Audit the published four-level quartic against the mode-matrix determinant (JSON)."""
    doc = build_document(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa)
    cfg = doc.system
    g = cfg.coupling.strengths
    off = cfg.ladder.offsets
    d34 = off[2] - off[1]
    d23 = off[1] - off[0]
    if cfg.ladder.size != 3 or len(set(g)) != 1:
        raise ConfigError("coupling", "the quartic audit needs three transitions with one common coupling")
    if not math.isclose(d34, 2.0 * d23, rel_tol=1e-12):
        raise ConfigError("levels.delta34", "the published quartic assumes delta34 = 2 * delta23")
    audit = modes.audit_quartic(g[0], 0.5 * d23, cfg.cavity.delta_c)
    mm = modes.mode_matrix(cfg.ladder, cfg.coupling, cfg.cavity.delta_c)
    coeffs = modes.characteristic_polynomial(mm)
    roots = modes.poly_roots(coeffs)
    eig = modes.eigenmodes(mm).eigenvalues
    report = audit.to_dict()
    report["probe_detuning_check"] = {
        "eigenvalues": [float(v) for v in eig],
        "determinant_roots": [float(r.real) for r in roots],
        "max_abs_difference": float(np.max(np.abs(np.sort(roots.real) - eig))),
    }
    report["summary"] = (
        "printed quartic agrees with the determinant" if audit.consistent
        else f"printed quartic disagrees with the determinant in the coefficients of lambda^{list(audit.mismatched_powers)}"
    )
    with _Output(output) as fh:
        fh.write(json.dumps(_jsonable(report), indent=2, sort_keys=False))
        fh.write("\n")


@cli.command()
@system_options
@click.option("--dc-min", default="-40", show_default=True, help="First cavity detuning.")
@click.option("--dc-max", default="20", show_default=True, help="Last cavity detuning.")
@click.option("--dc-points", default=601, show_default=True, type=click.IntRange(min=2))
@click.option("--order", type=click.Choice(["sorted", "continuity"]), default="sorted", show_default=True)
@click.option("--plot-script", type=click.Path(dir_okay=False), help="Also write a matplotlib script for the CSV.")
@handle_errors
def branches(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa, output, dc_min, dc_max, dc_points, order, plot_script):
    """Normal-mode eigenvalues vs cavity detuning (CSV)."""
    doc = build_document(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa)
    lo = parse_frequency(_tag(dc_min), "--dc-min", doc.gamma_mhz)
    hi = parse_frequency(_tag(dc_max), "--dc-max", doc.gamma_mhz)
    if not lo < hi:
        raise ConfigError("--dc-max", "--dc-min must be < --dc-max")
    scan = modes.branch_scan(doc.system.ladder, doc.system.coupling, np.linspace(lo, hi, dc_points))
    vals = scan.sorted if order == "sorted" else scan.branches
    prefix = "lambda" if order == "sorted" else "branch"
    cols = [f"{prefix}_{k + 1}" for k in range(vals.shape[1])]
    with _Output(output) as fh:
        write_csv(fh, ["delta_c"] + cols, ([float(dc)] + [float(v) for v in row] for dc, row in zip(scan.delta_c, vals)))
    if plot_script:
        write_plot_script(plot_script, output, "branches", "delta_c", cols, "cavity detuning / Gamma", "eigenvalue / Gamma")


@cli.command(name="dynamics")
@system_options
@click.option("--dp", required=True, help="Probe detuning.")
@click.option("--t-end", default=200.0, show_default=True, type=float, help="Integration time (1/Gamma).")
@click.option("--dt", type=float, help="Step size (default: min(0.05, 1/max|eig|)).")
@click.option("--every", default=100, show_default=True, type=click.IntRange(min=1), help="Record every N-th step.")
@handle_errors
def dynamics_cmd(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa, output, dp, t_end, dt, every):
    """Integrate the linearized equations of motion from an empty cavity (CSV)."""
    doc = build_document(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa)
    cfg = doc.system
    x = parse_frequency(_tag(dp), "--dp", doc.gamma_mhz)
    sys_ = dynamics.linear_system(cfg, x)
    if dt is None:
        dt = min(0.05, 1.0 / float(np.abs(sys_.eigenvalues()).max()))
    traj = dynamics.integrate(sys_, np.zeros(sys_.dim), dt, t_end, record_every=every)
    closed = response.transmission_amplitude(cfg.cavity, response.susceptibility(cfg.ladder, cfg.coupling, x), x)
    final = dynamics.cavity_transmission(cfg, traj.final)
    steady = dynamics.cavity_transmission(cfg, dynamics.steady_state(sys_))
    err_final = abs(final - closed) / abs(closed)
    err_steady = abs(steady - closed) / abs(closed)
    header = ["time", "re_a", "im_a"]
    for k in range(cfg.ladder.size):
        header += [f"re_s{k + 1}", f"im_s{k + 1}"]
    with _Output(output) as fh:
        rows = []
        for t, v in zip(traj.times, traj.states):
            row = [float(t)]
            for c in v:
                row += [float(c.real), float(c.imag)]
            rows.append(row)
        write_csv(fh, header, rows)
    line = (f"# dp={fmt(x)} final_vs_closed_form_relative_error={err_final:.3e} "
            f"steady_state_vs_closed_form_relative_error={err_steady:.3e}")
    click.echo(line)
    if not err_final < 1e-6:
        _fail(EXIT_NUMERICAL, f"integration did not reach the steady state (relative error {err_final:.3e}); increase --t-end")


@cli.command()
@system_options
@grid_options
@click.option("--min-prominence", default=analysis.DEFAULT_MIN_PROMINENCE, show_default=True, type=click.FloatRange(min=0))
@handle_errors
def peaks(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa, output, dp_min, dp_max, points, min_prominence):
    """Transmission peaks matched to normal-mode eigenvalues (CSV)."""
    doc = build_document(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa)
    cfg = _with_grid(doc, dp_min, dp_max, points)
    scan = response.scan_spectrum(cfg)
    found = analysis.find_peaks(scan, min_prominence)
    pm = modes.eigenmodes(modes.mode_matrix(cfg.ladder, cfg.coupling, cfg.cavity.delta_c))
    match = analysis.match_peaks_to_modes(found, pm)
    by_peak = {p: (m, r) for p, m, r in match.pairs}
    with _Output(output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["position", "height", "prominence", "eigenvalue", "residual"])
        for i, pk in enumerate(found):
            m, r = by_peak.get(i, (None, None))
            w.writerow([fmt(pk.position), fmt(pk.height), fmt(pk.prominence),
                        fmt(pm.eigenvalues[m]) if m is not None else "", fmt(r) if r is not None else ""])


def read_spectrum_csv(path, gamma_mhz, unit: Unit):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigError("--data", "empty data file") from None
        if header not in (["delta_p", "intensity"], ["delta_p", "intensity", "weight"]):
            raise ConfigError("--data", f"expected header delta_p,intensity[,weight], got {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != len(header):
                raise ConfigError(f"--data:{lineno}", f"expected {len(header)} columns")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ConfigError(f"--data:{lineno}", "non-numeric value") from None
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    order = np.argsort(data[:, 0], kind="stable")
    data = data[order]
    dp = data[:, 0]
    if unit is Unit.MHZ:
        if gamma_mhz is None:
            raise ConfigError("units.gamma_mhz", "required for --data-unit MHz")
        dp = dp / gamma_mhz
    weights = data[:, 2] if len(header) == 3 else None
    return dp, data[:, 1], weights


@cli.command(name="fit")
@system_options
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False), help="CSV with delta_p,intensity[,weight].")
@click.option("--data-unit", type=click.Choice(["Gamma", "MHz"]), default="Gamma", show_default=True)
@click.option("--free", help="Comma-separated free parameters (default from config, else G_common,kappa,delta_c).")
@click.option("--spectrum-out", type=click.Path(dir_okay=False), help="Write data and best-fit intensity here (CSV).")
@click.option("--max-iter", type=click.IntRange(min=1), help="Iteration cap.")
@handle_errors
def fit_cmd(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa, output, data_path, data_unit, free, spectrum_out, max_iter):
    """Fit model parameters to a measured spectrum; prints the result as JSON."""
    doc = build_document(config_path, preset_name, panel, g_sqrt_n, delta_c, kappa)
    dp, y, w = read_spectrum_csv(data_path, doc.gamma_mhz, Unit(data_unit))
    settings = doc.fit
    names = tuple(n.strip() for n in free.split(",")) if free else settings.free
    problem = fitting.FitProblem.from_config(doc.system, dp, y, free=names, initial=settings.initial,
                                             bounds=settings.bounds, weights=w)
    result = fitting.fit_spectrum(problem, max_iter=max_iter or settings.max_iter)
    report = result.to_dict()
    report["units"] = "Gamma"
    with _Output(output) as fh:
        fh.write(json.dumps(_jsonable(report), indent=2))
        fh.write("\n")
    if spectrum_out:
        best = fitting.model_intensity(problem.ladder, result.parameters, dp)
        # same detuning unit as the input data
        dp_out = dp * doc.gamma_mhz if data_unit == "MHz" else dp
        with open(spectrum_out, "w", encoding="utf-8", newline="") as fh:
            write_csv(fh, ["delta_p", "intensity", "fit"], zip(dp_out, y, best))
    if not result.converged:
        _fail(EXIT_NUMERICAL, f"fit did not converge: {result.message}")


@cli.group(name="preset")
def preset_group():
    """List or print the built-in parameter sets."""


@preset_group.command(name="list")
def preset_list():
    for name in sorted(PRESETS):
        p = PRESETS[name]
        click.echo(f"{name}\t{p.source}\t{p.notes}")


@preset_group.command(name="show")
@click.argument("name")
@click.option("--gN", "g_sqrt_n", help="Coupling to fill in.")
@click.option("--panel", help="Figure panel.")
@click.option("-o", "--output", type=click.Path(dir_okay=False))
@handle_errors
def preset_show(name, g_sqrt_n, panel, output):
    """Print a preset as a YAML configuration."""
    raw = preset_document(name, g_sqrt_n=_tag(g_sqrt_n) if g_sqrt_n else None, panel=panel)
    with _Output(output) as fh:
        fh.write(f"# preset {name} ({PRESETS[name].source})\n")
        fh.write(dump_document(raw))


def main(argv=None):
    cli.main(args=argv, prog_name="cqedspec")


if __name__ == "__main__":  # pragma: no cover
    main()
