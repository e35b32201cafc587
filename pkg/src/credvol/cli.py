"""Command line front end.

Subcommands wire the pipeline end to end: ``estimate`` fits the
volatility model by particle MCMC, ``extract-shocks`` backs structural
shocks out of the fitted latent path, ``lp`` projects outcomes on those
shocks, and ``irf-decompose``/``simulate`` work with a pruned
third-order model solution. ``filter`` and ``leadlag`` expose the
particle filter and the lead/lag correlation table directly.

Every run writes a ``manifest.json`` (resolved configuration, seeds,
input digests, version, duration) next to its outputs, and nothing is
written outside the chosen output directory. Failures print a single
JSON line to stderr; exit codes distinguish usage errors (2), missing
inputs (3), invalid inputs or configuration conflicts (4) and numerical
failures (5).

All randomness derives from the user-visible ``--seed``: chain i of a
multi-chain run uses SeedSequence([seed, i]).
"""

from __future__ import annotations

import csv
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .local_projections import LpSpec, run_lp
from .manifest import RunManifest, sha256_digest, write_manifest
from .particle_filter import ParticleFilterError, correlated_pf, make_seed_block
from .pmmh import ChainConfig, run_chain, summarize
from .pruned_irf import decompose_impact, demo_solution_path, irf, load_solution
from .sv_model import PriorSpec, SvParams, extract_shocks
from .timeseries import (
    TimeSeries,
    format_period,
    growth_rate_demeaned,
    lead_lag_correlation,
    load_csv,
    parse_period,
)

_TRANSFORMS = ("none", "logdiff-demeaned", "logdiff-demeaned-pct")


def _apply_transform(ts, transform):
    if transform == "none":
        return ts
    if transform not in _TRANSFORMS:
        raise ValueError(f"unknown transform {transform!r}; choose from {_TRANSFORMS}")
    g = growth_rate_demeaned(ts)  # demeaned log growth in percent
    if transform == "logdiff-demeaned-pct":
        return g
    return TimeSeries(g.periods, g.values / 100.0, name=g.name)


def _load_config(path, allowed):
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(unknown)}")
    return data


def _pick(flag, cfg, key, default):
    if flag is not None:
        return flag
    return cfg.get(key, default)


def _derive_seed(seed, index):
    """Chain-level seed: SeedSequence([seed, index]), documented scheme."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def _outdir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _finish(outdir, command, config, seeds, input_paths, t0):
    manifest = RunManifest(
        command=command,
        config=config,
        seeds=seeds,
        inputs={str(p): sha256_digest(p) for p in input_paths},
        package_version=__version__,
        duration_seconds=time.monotonic() - t0,
    )
    write_manifest(manifest, outdir)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(version=__version__, prog_name="credvol")
def cli():
    """Credit-access volatility toolkit: particle MCMC estimation of a
    stochastic volatility model, shock extraction, local projections and
    pruned third-order impulse responses."""


# ---------------------------------------------------------------- estimate


@cli.command()
@click.option("--data", required=True, help="CSV file with the input series.")
@click.option("--column", required=True, help="Value column to model.")
@click.option("--period-column", default=None, help="Period label column (default: first).")
@click.option("--transform", default=None, help=f"One of {_TRANSFORMS} (default logdiff-demeaned).")
@click.option("--prior", "prior_variant", default=None, help="Prior variant: baseline or robustness.")
@click.option("--iterations", type=int, default=None)
@click.option("--burn-in", type=int, default=None)
@click.option("--particles", type=int, default=None)
@click.option("--gamma", type=float, default=None, help="Seed-correlation coefficient.")
@click.option("--variant", default=None, help="Sampler variant: correlated or standard.")
@click.option("--seed", type=int, default=None)
@click.option("--chains", type=int, default=None, help="Independent chains with derived seeds.")
@click.option("--latent-thin", type=int, default=None)
@click.option("--config", "config_path", default=None, help="JSON config; flags override it.")
@click.option("--out", required=True, help="Output directory.")
def estimate(data, column, period_column, transform, prior_variant, iterations,
             burn_in, particles, gamma, variant, seed, chains, latent_thin,
             config_path, out):
    """Fit the stochastic volatility model and write posterior outputs.

    Writes draws.csv, summary.json, volatility.csv, params.json and
    manifest.json into --out.
    """
    t0 = time.monotonic()
    keys = ("transform", "prior", "iterations", "burn_in", "particles", "gamma",
            "variant", "seed", "chains", "latent_thin")
    cfg = _load_config(config_path, keys)
    transform = _pick(transform, cfg, "transform", "logdiff-demeaned")
    prior_variant = _pick(prior_variant, cfg, "prior", "baseline")
    iterations = int(_pick(iterations, cfg, "iterations", 15000))
    burn_in = int(_pick(burn_in, cfg, "burn_in", 5000))
    particles = int(_pick(particles, cfg, "particles", 100))
    gamma = float(_pick(gamma, cfg, "gamma", 0.99))
    variant = _pick(variant, cfg, "variant", "correlated")
    seed = int(_pick(seed, cfg, "seed", 0))
    chains = int(_pick(chains, cfg, "chains", 1))
    latent_thin = int(_pick(latent_thin, cfg, "latent_thin", 10))
    if chains < 1:
        raise ValueError(f"chains must be at least 1, got {chains}")

    series = load_csv(data, column, period_column)
    y = _apply_transform(series, transform)
    outdir = _outdir(out)

    chain_seeds = [_derive_seed(seed, i) for i in range(chains)]
    runs = []
    for cs in chain_seeds:
        config = ChainConfig(
            iterations=iterations,
            burn_in=burn_in,
            particles=particles,
            gamma=gamma,
            variant=variant,
            prior=PriorSpec(variant=prior_variant),
            seed=cs,
            latent_thin=latent_thin,
        )
        runs.append(run_chain(y.values, config))

    rows = []
    for ci, draws in enumerate(runs):
        lls = draws.retained_logliks()
        for j in range(draws.params.shape[0]):
            rows.append([ci] + [repr(float(v)) for v in draws.params[j]]
                        + [repr(float(lls[j]))])
    _write_csv(outdir / "draws.csv",
               ["chain", "mu_h", "phi_y", "phi_h", "tau", "rho", "loglik"], rows)

    pooled = np.vstack([d.params for d in runs])
    pooled_table = {}
    for k, name in enumerate(runs[0].param_names):
        col = pooled[:, k]
        pooled_table[name] = {
            "mean": float(col.mean()),
            "ci_lo": float(np.percentile(col, 2.5)),
            "ci_hi": float(np.percentile(col, 97.5)),
        }
    summary = {
        "pooled": {"parameters": pooled_table, "n_draws": int(pooled.shape[0])},
        "chains": [summarize(d) for d in runs],
        "transform": transform,
        "n_obs": int(y.values.shape[0]),
    }
    _write_json(outdir / "summary.json", summary)

    mean_params = SvParams(*(float(pooled[:, k].mean()) for k in range(5)))
    _write_json(outdir / "params.json", mean_params.to_dict())

    latent = np.vstack([d.latent_paths for d in runs])
    vol = 100.0 * np.exp(0.5 * latent)
    vol_rows = [
        [format_period(p), repr(float(latent[:, t].mean())), repr(float(vol[:, t].mean())),
         repr(float(np.percentile(vol[:, t], 5.0))), repr(float(np.percentile(vol[:, t], 95.0)))]
        for t, p in enumerate(y.periods)
    ]
    _write_csv(outdir / "volatility.csv", ["t", "h_mean", "vol_mean", "vol_lo", "vol_hi"], vol_rows)

    resolved = {"data": str(data), "column": column, "period_column": period_column,
                "transform": transform, "prior": prior_variant, "iterations": iterations,
                "burn_in": burn_in, "particles": particles, "gamma": gamma,
                "variant": variant, "chains": chains, "latent_thin": latent_thin}
    inputs = [data] + ([config_path] if config_path else [])
    _finish(outdir, "estimate", resolved, {"seed": seed, "chain_seeds": chain_seeds}, inputs, t0)


# ------------------------------------------------------------------ filter


@cli.command("filter")
@click.option("--data", required=True)
@click.option("--column", required=True)
@click.option("--period-column", default=None)
@click.option("--transform", default=None)
@click.option("--params", "params_path", required=True, help="SvParams JSON (from estimate).")
@click.option("--particles", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--dump-particles", is_flag=True, help="Also write the raw particle matrix.")
@click.option("--config", "config_path", default=None)
@click.option("--out", required=True)
def filter_cmd(data, column, period_column, transform, params_path, particles,
               seed, dump_particles, config_path, out):
    """Run one particle filter pass; write per-step likelihoods and ESS.

    Writes filter.csv (t, loglik_contribution, ESS_t) and, with
    --dump-particles, particles.bin: little-endian 64-bit floats,
    row-major T x N.
    """
    t0 = time.monotonic()
    cfg = _load_config(config_path, ("transform", "particles", "seed"))
    transform = _pick(transform, cfg, "transform", "logdiff-demeaned")
    particles = int(_pick(particles, cfg, "particles", 100))
    seed = int(_pick(seed, cfg, "seed", 0))

    with open(params_path) as fh:
        params = SvParams.from_dict(json.load(fh))
    series = load_csv(data, column, period_column)
    y = _apply_transform(series, transform)
    outdir = _outdir(out)

    u = make_seed_block(y.values.shape[0], particles, seed)
    system = correlated_pf(y.values, params, u)
    ess = system.ess()
    rows = [
        [format_period(p), repr(float(system.step_logliks[t])), repr(float(ess[t]))]
        for t, p in enumerate(y.periods)
    ]
    _write_csv(outdir / "filter.csv", ["t", "loglik_contribution", "ESS_t"], rows)
    if dump_particles:
        (outdir / "particles.bin").write_bytes(
            np.ascontiguousarray(system.particles, dtype="<f8").tobytes()
        )
    click.echo(f"loglik {system.loglik!r}")

    resolved = {"data": str(data), "column": column, "period_column": period_column,
                "transform": transform, "params": str(params_path),
                "particles": particles, "dump_particles": dump_particles,
                "n_obs": int(y.values.shape[0])}
    inputs = [data, params_path] + ([config_path] if config_path else [])
    _finish(outdir, "filter", resolved, {"seed": seed}, inputs, t0)


# ----------------------------------------------------------- extract-shocks


@cli.command("extract-shocks")
@click.option("--data", required=True)
@click.option("--column", required=True)
@click.option("--period-column", default=None)
@click.option("--transform", default=None)
@click.option("--params", "params_path", required=True, help="SvParams JSON (from estimate).")
@click.option("--volatility", "vol_path", required=True,
              help="volatility.csv from estimate (h_mean column is used).")
@click.option("--out", required=True)
def extract_shocks_cmd(data, column, period_column, transform, params_path, vol_path, out):
    """Back structural shocks out of the fitted latent path.

    Writes shocks.csv with columns (t, eps, eta, eta_star); the first
    row has no volatility innovation, so eta and eta_star are empty
    there.
    """
    t0 = time.monotonic()
    transform = transform or "logdiff-demeaned"
    with open(params_path) as fh:
        params = SvParams.from_dict(json.load(fh))
    series = load_csv(data, column, period_column)
    y = _apply_transform(series, transform)

    with open(vol_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "h_mean" not in reader.fieldnames:
            raise ValueError(f"{vol_path}: expected an h_mean column")
        vol_rows = [(row["t"], float(row["h_mean"])) for row in reader]
    labels = [format_period(p) for p in y.periods]
    if [r[0] for r in vol_rows] != labels:
        raise ValueError(
            "volatility file periods do not match the transformed series "
            f"({len(vol_rows)} rows vs {len(labels)} observations)"
        )
    h = np.array([r[1] for r in vol_rows])

    shocks = extract_shocks(y.values, h, params)
    outdir = _outdir(out)
    rows = [[labels[0], repr(float(shocks.eps[0])), "", ""]]
    for t in range(1, len(labels)):
        rows.append([labels[t], repr(float(shocks.eps[t])),
                     repr(float(shocks.eta[t - 1])), repr(float(shocks.eta_star[t - 1]))])
    _write_csv(outdir / "shocks.csv", ["t", "eps", "eta", "eta_star"], rows)

    resolved = {"data": str(data), "column": column, "period_column": period_column,
                "transform": transform, "params": str(params_path),
                "volatility": str(vol_path)}
    _finish(outdir, "extract-shocks", resolved, {}, [data, params_path, vol_path], t0)


# --------------------------------------------------------------------- lp


def _load_optional_blank_series(path, column, period_column=None):
    """Series reader tolerating empty leading cells (e.g. the eta column
    of shocks.csv, which starts one quarter late)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise ValueError(f"{path}: no column named {column!r}")
        pcol = period_column or reader.fieldnames[0]
        if pcol not in reader.fieldnames:
            raise ValueError(f"{path}: no column named {pcol!r}")
        periods, values = [], []
        for row in reader:
            cell = (row[column] or "").strip()
            if cell == "":
                if values:
                    raise ValueError(f"{path}: empty {column!r} cell after data begins")
                continue
            periods.append(parse_period(row[pcol]))
            values.append(float(cell))
    return TimeSeries(np.array(periods), np.array(values), name=column)


def _common_span(series_list):
    lo = max(s.periods[0] for s in series_list)
    hi = min(s.periods[-1] for s in series_list)
    if hi < lo:
        raise ValueError("series do not overlap on any common period")
    out = []
    for s in series_list:
        a = int(lo - s.periods[0])
        b = int(hi - s.periods[0]) + 1
        out.append(TimeSeries(s.periods[a:b], s.values[a:b], name=s.name))
    return out


@cli.command("lp")
@click.option("--data", required=True, help="CSV with outcome/control/indicator columns.")
@click.option("--outcome", required=True)
@click.option("--period-column", default=None)
@click.option("--shock-file", required=True, help="shocks.csv from extract-shocks.")
@click.option("--shock-column", default=None, help="eps, eta or eta_star (default eta_star).")
@click.option("--controls", default=None, help="Comma-separated control columns of --data.")
@click.option("--indicator", default=None, help="0/1 regime column of --data.")
@click.option("--horizons", type=int, default=None)
@click.option("--lag-order", type=int, default=None)
@click.option("--band-level", type=float, default=None)
@click.option("--config", "config_path", default=None)
@click.option("--out", required=True)
def lp_cmd(data, outcome, period_column, shock_file, shock_column, controls,
           indicator, horizons, lag_order, band_level, config_path, out):
    """Local projections of an outcome on an extracted shock.

    Writes lp.csv with columns (h, regime, beta, se, lo, hi, n_obs).
    """
    t0 = time.monotonic()
    keys = ("shock_column", "controls", "horizons", "lag_order", "band_level")
    cfg = _load_config(config_path, keys)
    shock_column = _pick(shock_column, cfg, "shock_column", "eta_star")
    controls = _pick(controls, cfg, "controls", "")
    horizons = int(_pick(horizons, cfg, "horizons", 12))
    lag_order = int(_pick(lag_order, cfg, "lag_order", 2))
    band_level = float(_pick(band_level, cfg, "band_level", 0.68))
    if shock_column not in ("eps", "eta", "eta_star"):
        raise ValueError(f"shock column must be eps, eta or eta_star, got {shock_column!r}")

    outcome_ts = load_csv(data, outcome, period_column)
    shock_ts = _load_optional_blank_series(shock_file, shock_column)
    control_names = [c.strip() for c in controls.split(",") if c.strip()]
    control_ts = [load_csv(data, c, period_column) for c in control_names]
    series_list = [outcome_ts, shock_ts] + control_ts
    if indicator:
        series_list.append(load_csv(data, indicator, period_column))
    aligned = _common_span(series_list)
    outcome_a, shock_a = aligned[0], aligned[1]
    controls_a = dict(zip(control_names, (s.values for s in aligned[2 : 2 + len(control_ts)])))
    indicator_a = aligned[-1].values if indicator else None

    spec = LpSpec(
        horizons=horizons,
        lag_order=lag_order,
        controls=controls_a,
        regime_indicator=indicator_a,
        band_level=band_level,
    )
    result = run_lp(outcome_a.values, spec, shock_a.values)
    outdir = _outdir(out)
    result.to_frame().to_csv(outdir / "lp.csv", index=False)

    resolved = {"data": str(data), "outcome": outcome, "period_column": period_column,
                "shock_file": str(shock_file), "shock_column": shock_column,
                "controls": control_names, "indicator": indicator,
                "horizons": horizons, "lag_order": lag_order, "band_level": band_level}
    inputs = [data, shock_file] + ([config_path] if config_path else [])
    _finish(outdir, "lp", resolved, {}, inputs, t0)


# ------------------------------------------------------------ model output


@cli.command("irf-decompose")
@click.option("--solution", "solution_path", default=None,
              help="Solution-matrix file (default: bundled demo).")
@click.option("--eta", type=float, default=1.0, help="Volatility impulse size.")
@click.option("--out", required=True)
def irf_decompose_cmd(solution_path, eta, out):
    """Split the impact of a volatility impulse into direct and
    interaction channels; writes decompose.csv."""
    t0 = time.monotonic()
    path = Path(solution_path) if solution_path else demo_solution_path()
    sol = load_solution(path)
    table = decompose_impact(sol, eta_star=eta)
    outdir = _outdir(out)
    table.to_csv(outdir / "decompose.csv", index=False)
    _finish(outdir, "irf-decompose", {"solution": str(path), "eta": eta}, {}, [path], t0)


@cli.command("simulate")
@click.option("--solution", "solution_path", default=None,
              help="Solution-matrix file (default: bundled demo).")
@click.option("--shock", default="eta_star", help="eta_star or eps_zeta.")
@click.option("--size", type=float, default=1.0)
@click.option("--horizon", type=int, default=40)
@click.option("--integrate", "integrate_level_shock", is_flag=True,
              help="Average the level shock out analytically.")
@click.option("--start", default="stochastic", help="stochastic or zero.")
@click.option("--out", required=True)
def simulate_cmd(solution_path, shock, size, horizon, integrate_level_shock, start, out):
    """Impulse response paths of the pruned model; writes irf.csv with
    columns (t, variable, value)."""
    t0 = time.monotonic()
    path = Path(solution_path) if solution_path else demo_solution_path()
    sol = load_solution(path)
    paths = irf(sol, shock, size=size, horizon=horizon,
                integrate_level_shock=integrate_level_shock, start=start)
    rows = []
    for label in list(sol.state_labels) + list(sol.control_labels):
        for t, v in enumerate(paths[label]):
            rows.append([t, label, repr(float(v))])
    outdir = _outdir(out)
    _write_csv(outdir / "irf.csv", ["t", "variable", "value"], rows)
    resolved = {"solution": str(path), "shock": shock, "size": size, "horizon": horizon,
                "integrate": integrate_level_shock, "start": start}
    _finish(outdir, "simulate", resolved, {}, [path], t0)


# ----------------------------------------------------------------- leadlag


@cli.command("leadlag")
@click.option("--series-a", required=True, help="CSV holding the first series.")
@click.option("--column-a", required=True)
@click.option("--period-column-a", default=None)
@click.option("--transform-a", default="none")
@click.option("--series-b", required=True, help="CSV holding the second series.")
@click.option("--column-b", required=True)
@click.option("--period-column-b", default=None)
@click.option("--transform-b", default="none")
@click.option("--k-min", type=int, default=-3)
@click.option("--k-max", type=int, default=4)
@click.option("--out", required=True)
def leadlag_cmd(series_a, column_a, period_column_a, transform_a,
                series_b, column_b, period_column_b, transform_b,
                k_min, k_max, out):
    """Correlation of a_t with b_{t+k} over a range of displacements;
    writes leadlag.csv with columns (k, corr)."""
    t0 = time.monotonic()
    a = _apply_transform(load_csv(series_a, column_a, period_column_a), transform_a)
    b = _apply_transform(load_csv(series_b, column_b, period_column_b), transform_b)
    pairs = lead_lag_correlation(a, b, k_min=k_min, k_max=k_max)
    outdir = _outdir(out)
    _write_csv(outdir / "leadlag.csv", ["k", "corr"],
               [[k, repr(float(c))] for k, c in pairs])
    resolved = {"series_a": str(series_a), "column_a": column_a, "transform_a": transform_a,
                "series_b": str(series_b), "column_b": column_b, "transform_b": transform_b,
                "k_min": k_min, "k_max": k_max}
    _finish(outdir, "leadlag", resolved, {}, [series_a, series_b], t0)


# ------------------------------------------------------------------- entry


def _fail(code, message):
    click.echo(json.dumps({"code": code, "error": message}), err=True)
    return code


def main(argv=None):
    """Dispatch; returns the process exit status."""
    try:
        cli.main(args=argv, prog_name="credvol", standalone_mode=False)
    except click.exceptions.Exit as exc:  # --help and friends
        return exc.exit_code
    except click.UsageError as exc:
        return _fail(2, exc.format_message())
    except FileNotFoundError as exc:
        return _fail(3, str(exc))
    except IsADirectoryError as exc:
        return _fail(3, str(exc))
    except ValueError as exc:
        return _fail(4, str(exc))
    except (ParticleFilterError, RuntimeError) as exc:
        return _fail(5, str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
