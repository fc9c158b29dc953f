"""Command-line entry points: run scenario configs, emit plot data,
list the bundled scenario gallery.

Reports are JSON with sorted keys and no timing data, so reruns of the
same config are byte-identical; wall-clock measurements go to a separate
timings file next to the reports.
"""

import concurrent.futures
import csv
import json
import os
import sys
import time

import click

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .errors import ConfigError
from .scenarios import STUDIES, Scenario, bundled_scenarios, run_study


def _load_config(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML parse error: {exc}") from exc
    problems = []
    scenarios = []
    tables = data.get("scenario", [])
    if not isinstance(tables, list):
        raise ConfigError(f"{path}: [[scenario]] must be an array of tables")
    global_seed = data.get("run", {}).get("seed")
    for i, tab in enumerate(tables):
        where = f"scenario[{i}]"
        name = tab.get("name")
        if not name:
            problems.append(f"{where}: missing field 'name'")
            continue
        where = f"scenario[{i}] ({name})"
        study = tab.get("study")
        if study not in STUDIES:
            problems.append(
                f"{where}: field 'study' must be one of {', '.join(STUDIES)}, "
                f"got {study!r}")
            continue
        system = tab.get("system")
        if not isinstance(system, dict):
            problems.append(f"{where}: missing [scenario.system] table")
            continue
        seed = tab.get("seed", global_seed)
        if seed is None:
            problems.append(
                f"{where}: missing field 'seed' (reproducibility is "
                "mandatory; set scenario seed or [run].seed)")
            continue
        try:
            scenarios.append(Scenario(
                name=str(name), system=system, study=study,
                seed=int(seed), parameters=tab.get("parameters", {})))
        except ConfigError as exc:
            problems.append(f"{where}: {exc}")
        except Exception as exc:
            problems.append(f"{where}: invalid system: {exc}")
    if problems:
        raise ConfigError("\n".join(problems))
    return scenarios


def _json_default(obj):
    import numpy as np

    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"unserializable object of type {type(obj)!r}")


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1,
                  default=_json_default)
        fh.write("\n")


def _execute(sc):
    start = time.monotonic()
    try:
        result, checks = run_study(sc)
        failure = None
    except Exception as exc:
        result, checks = None, []
        failure = f"{type(exc).__name__}: {exc}"
    elapsed = time.monotonic() - start
    report = {
        "artifact_version": __version__,
        "scenario": {
            "name": sc.name,
            "study": sc.study,
            "system": sc.system,
            "parameters": sc.parameters,
            "seed": sc.seed,
        },
        "result": result,
        "checks": checks,
    }
    if failure is not None:
        report["failure"] = failure
    ok = failure is None and all(c["passed"] for c in checks)
    return report, ok, elapsed


@click.group()
@click.version_option(version=__version__)
def main():
    """Numerical laboratory for Ornstein-Uhlenbeck semigroup gaps,
    Gaussian dichotomies, and generator spectra."""


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", default=None,
              help="Output directory (default: $OULAB_OUT or ./oulab-out).")
@click.option("--workers", default=1, show_default=True,
              help="Parallel scenario workers.")
@click.option("--seed-override", default=None, type=int,
              help="Replace every scenario seed with this value.")
def run(config, out_dir, workers, seed_override):
    """Execute all scenarios in CONFIG and write one report per scenario
    plus a summary index.  Exits nonzero if any embedded check fails."""
    out_dir = out_dir or os.environ.get("OULAB_OUT") or "oulab-out"
    os.makedirs(out_dir, exist_ok=True)
    try:
        scenarios = _load_config(config)
    except ConfigError as exc:
        click.echo(f"config validation failed:\n{exc}", err=True)
        sys.exit(2)
    if seed_override is not None:
        scenarios = [Scenario(name=s.name, system=s.system, study=s.study,
                              seed=seed_override, parameters=s.parameters)
                     for s in scenarios]

    reports = []
    if workers > 1 and len(scenarios) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as ex:
            reports = list(ex.map(_execute, scenarios))
    else:
        reports = [_execute(s) for s in scenarios]

    all_ok = True
    summary = {"artifact_version": __version__, "config": os.path.basename(config),
               "entries": []}
    timings = {}
    for sc, (report, ok, elapsed) in zip(scenarios, reports):
        path = os.path.join(out_dir, f"{sc.name}.report.json")
        _write_json(path, report)
        summary["entries"].append({
            "name": sc.name, "study": sc.study, "passed": ok,
            "report": os.path.basename(path),
            "failures": [c["name"] for c in report["checks"]
                         if not c["passed"]]
                        + (["execution-error"] if "failure" in report else []),
        })
        timings[sc.name] = round(elapsed, 3)
        all_ok = all_ok and ok
        status = "ok" if ok else "FAILED"
        click.echo(f"{sc.name}: {status} ({elapsed:.1f}s)")
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    with open(os.path.join(out_dir, "timings.json"), "w",
              encoding="utf-8") as fh:
        json.dump(timings, fh, sort_keys=True, indent=1)
        fh.write("\n")
    sys.exit(0 if all_ok else 1)


PLOT_KINDS = ("gap-heatmap", "spectral-contour", "witness-curve")


@main.command()
@click.argument("report", type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", required=True, type=click.Choice(PLOT_KINDS))
@click.option("--out", "out_file", required=True, type=click.Path())
def plot(report, kind, out_file):
    """Emit columnar plot data (CSV: x, y, value) from a REPORT file."""
    with open(report, encoding="utf-8") as fh:
        rep = json.load(fh)
    study = rep.get("scenario", {}).get("study")
    result = rep.get("result") or {}
    rows = []
    if kind == "gap-heatmap":
        grid = result.get("grid")
        if study != "norm-gap-buc" or not isinstance(grid, list):
            raise click.ClickException(
                f"report holds study {study!r} without a (t,s) grid; "
                "gap-heatmap needs a norm-gap-buc study with t_grid set")
        rows = [(g["t"], g["s"], g["lower_bound"]) for g in grid]
    elif kind == "spectral-contour":
        if study != "spectral-map":
            raise click.ClickException(
                f"report holds study {study!r}; spectral-contour needs "
                "spectral-map")
        re = result["grid"]["re"]
        im = result["grid"]["im"]
        for i, b in enumerate(im):
            for j, a in enumerate(re):
                v = result["values"][i][j]
                rows.append((a, b, float("nan") if v is None else v))
    elif kind == "witness-curve":
        diag = result.get("diagnostics", {})
        levels = diag.get("levels")
        if levels is None and "ou" in result:
            levels = result["ou"]["diagnostics"].get("levels")
        if not levels:
            raise click.ClickException(
                f"report holds study {study!r} without dilation levels; "
                "witness-curve needs norm-gap-invariant or norm-gap-l1")
        rows = [(lv["n"], lv["certified"], lv["std_error"]) for lv in levels]
    with open(out_file, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "value"])
        writer.writerows(rows)
    click.echo(f"wrote {len(rows)} rows to {out_file}")


@main.command()
@click.option("--list", "do_list", is_flag=True, required=True,
              help="List the bundled scenario gallery.")
def scenarios(do_list):
    """Inspect the bundled scenario gallery."""
    for sc in bundled_scenarios():
        click.echo(f"{sc.name}\t{sc.study}\t{sc.system['kind']}")
