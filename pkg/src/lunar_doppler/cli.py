"""
Command-line pipeline: simulate -> fit -> evaluate, plus timeseries export.

Each stage reads the previous stage's directory and writes plain CSV/JSON:

    lunar-doppler simulate --scenario s.yaml --out runs/sim
    lunar-doppler fit      --sim runs/sim --out runs/fit
    lunar-doppler evaluate --sim runs/sim --fit runs/fit --out runs/eval
    lunar-doppler timeseries --sim runs/sim --link LLO-1_LLO-21 --out ts.csv
    lunar-doppler run-all  --scenario s.yaml --out runs
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .constants import GM_MOON, MOON_RADIUS, SPEED_OF_LIGHT
from .doppler import read_series_csv, visibility_windows, write_series_csv
from .gmm import POOLED_ID, ConstellationModel, fit_constellation, gmm_pdf
from .io import atomic_write_text, read_json, write_json
from .metrics import discretize_model, histogram_pdf, kl_divergence, wmrd
from .scenario import (Scenario, default_scenario, dump_scenario, load_scenario,
                       scenario_hash, simulate_links)

SIM_MANIFEST = "manifest.json"
SIM_SCENARIO = "scenario.yaml"
MODELS_FILE = "models.json"
FIT_MANIFEST = "fit_manifest.json"
TABLE_FILE = "metrics.csv"


class PipelineError(RuntimeError):
    pass


def _apply_overrides(s: Scenario, seed=None, bins=None, k=None, min_elevation=None) -> Scenario:
    kw = {}
    if seed is not None:
        kw["fit"] = replace(s.fit, seed=int(seed))
    if bins is not None:
        kw["bins"] = int(bins)
    if k is not None:
        kw["gmm_k"] = int(k)
    if min_elevation is not None:
        kw["min_elevation"] = float(min_elevation)
    return replace(s, **kw) if kw else s


def _load_scenario_file(path) -> Scenario:
    if path is None:
        return default_scenario()
    return load_scenario(Path(path).read_text())


def _sim_scenario(sim_dir: Path) -> tuple[Scenario, dict]:
    manifest_path = sim_dir / SIM_MANIFEST
    if not manifest_path.exists():
        raise PipelineError(f"{sim_dir} has no {SIM_MANIFEST}; run 'simulate' first")
    return load_scenario((sim_dir / SIM_SCENARIO).read_text()), read_json(manifest_path)


def _curve_csv(x, model, hist) -> str:
    lines = ["x_ppm,model_pdf,hist_density"]
    lines += [f"{a!r},{b!r},{c!r}" for a, b, c in zip(x.tolist(), model.tolist(), hist.tolist())]
    return "\n".join(lines) + "\n"


def cmd_simulate(scenario_path, out_dir, seed=None, min_elevation=None) -> int:
    s = _apply_overrides(_load_scenario_file(scenario_path), seed=seed, min_elevation=min_elevation)
    out = Path(out_dir)
    isl, gs = simulate_links(s)
    links = []
    for kind, series_list in (("isl", isl), ("gs", gs)):
        for series in series_list:
            rel = f"{kind}/{series.link_id}.csv"
            write_series_csv(series, out / rel)
            entry = {"link_id": series.link_id, "kind": kind, "file": rel,
                     "samples": len(series), "visible_samples": int(series.visible.sum())}
            if kind == "gs":
                entry["windows"] = len(visibility_windows(series))
            links.append(entry)

    atomic_write_text(out / SIM_SCENARIO, dump_scenario(s))
    write_json(out / SIM_MANIFEST, {
        "tool_version": __version__,
        "scenario_sha256": scenario_hash(s),
        "seed": s.fit.seed,
        "constants": {"gm_km3_s2": s.gm, "moon_radius_km": MOON_RADIUS,
                      "speed_of_light_km_s": SPEED_OF_LIGHT, "default_gm_km3_s2": GM_MOON},
        "duration_s": s.duration,
        "dt_s": s.dt,
        "carrier_frequency_hz": s.carrier_frequency,
        "doppler_model": s.doppler_model,
        "min_elevation_deg": s.min_elevation,
        "samples_per_link": len(isl[0]) if isl else (len(gs[0]) if gs else 0),
        "links": links,
    })
    return 0


def _read_links(sim_dir: Path, manifest: dict, kind: str):
    return {e["link_id"]: read_series_csv(sim_dir / e["file"], e["link_id"])
            for e in manifest["links"] if e["kind"] == kind}


def cmd_fit(sim_dir, out_dir, seed=None, k=None, bins=None) -> int:
    sim_dir, out = Path(sim_dir), Path(out_dir)
    s, manifest = _sim_scenario(sim_dir)
    s = _apply_overrides(s, seed=seed, k=k, bins=bins)
    isl = _read_links(sim_dir, manifest, "isl")
    if not isl:
        raise PipelineError("simulation has no inter-satellite links to fit")
    data = {link: series.visible_ppm() for link, series in isl.items()}
    model = fit_constellation(data, s.gmm_k, s.fit)

    write_json(out / MODELS_FILE, model.to_dict())
    pooled = np.concatenate(list(data.values()))
    fitted = dict(model.links)
    if model.pooled is not None:
        fitted[POOLED_ID] = model.pooled
    for link, params in fitted.items():
        samples = pooled if link == POOLED_ID else data[link]
        hist = histogram_pdf(samples, s.bins)
        atomic_write_text(out / "curves" / f"{link}.csv",
                          _curve_csv(hist.midpoints, gmm_pdf(params, hist.midpoints), hist.densities))

    gs = _read_links(sim_dir, manifest, "gs")
    gs_visible = [series.visible_ppm() for series in gs.values()]
    gs_visible = np.concatenate(gs_visible) if gs_visible else np.empty(0)
    if gs_visible.size and np.ptp(gs_visible) > 0:
        hist = histogram_pdf(gs_visible, s.bins)
        lines = ["x_ppm,hist_density"] + [f"{a!r},{b!r}" for a, b in
                                          zip(hist.midpoints.tolist(), hist.densities.tolist())]
        atomic_write_text(out / "curves" / "gs_all_histogram.csv", "\n".join(lines) + "\n")

    write_json(out / FIT_MANIFEST, {
        "scenario_sha256": manifest["scenario_sha256"],
        "seed": s.fit.seed,
        "k": s.gmm_k,
        "bins": s.bins,
        "em": {"max_iter": s.fit.max_iter, "tol": s.fit.tol, "restarts": s.fit.restarts},
        "traces": {link: {**trace.to_dict(), "monotonic": trace.is_monotonic()}
                   for link, trace in model.traces.items()},
        "errors": model.errors,
    })
    for link, message in model.errors.items():
        print(json.dumps({"warning": "fit_failed", "link_id": link, "message": message}),
              file=sys.stderr)
    return 0


def evaluate_models(data: dict, model: ConstellationModel, bins: int) -> list[tuple[str, float, float]]:
    rows = []
    targets = list(model.links.items())
    if model.pooled is not None:
        targets.append((POOLED_ID, model.pooled))
    pooled = np.concatenate(list(data.values()))
    for link, params in targets:
        samples = pooled if link == POOLED_ID else data[link]
        hist = histogram_pdf(samples, bins)
        p_hat = discretize_model(params, hist)
        rows.append((link, wmrd(p_hat, hist.masses), kl_divergence(p_hat, hist.masses)))
    return rows


def cmd_evaluate(sim_dir, fit_dir, out_dir, bins=None) -> int:
    sim_dir, fit_dir, out = Path(sim_dir), Path(fit_dir), Path(out_dir)
    s, manifest = _sim_scenario(sim_dir)
    s = _apply_overrides(s, bins=bins)
    if bins is None and (fit_dir / FIT_MANIFEST).exists():
        s = replace(s, bins=int(read_json(fit_dir / FIT_MANIFEST)["bins"]))
    models_path = fit_dir / MODELS_FILE
    if not models_path.exists():
        raise PipelineError(f"{fit_dir} has no {MODELS_FILE}; run 'fit' first")
    model = ConstellationModel.from_dict(read_json(models_path))
    isl = _read_links(sim_dir, manifest, "isl")
    missing = sorted(set(model.links) - set(isl))
    if missing:
        raise PipelineError(f"fitted links not present in simulation: {missing}")
    data = {link: series.visible_ppm() for link, series in isl.items()}
    rows = evaluate_models(data, model, s.bins)
    lines = ["link_id,wmrd,kl_divergence"] + [f"{l},{w!r},{d!r}" for l, w, d in rows]
    atomic_write_text(out / TABLE_FILE, "\n".join(lines) + "\n")
    return 0


def cmd_timeseries(sim_dir, link_id, out_path) -> int:
    sim_dir = Path(sim_dir)
    _, manifest = _sim_scenario(sim_dir)
    entries = {e["link_id"]: e for e in manifest["links"]}
    if link_id not in entries:
        raise PipelineError(f"unknown link id {link_id!r}; known: {sorted(entries)}")
    series = read_series_csv(sim_dir / entries[link_id]["file"], link_id)
    write_series_csv(series, out_path)
    return 0


def cmd_run_all(scenario_path, out_dir, seed=None, k=None, bins=None, min_elevation=None) -> int:
    out = Path(out_dir)
    cmd_simulate(scenario_path, out / "sim", seed=seed, min_elevation=min_elevation)
    cmd_fit(out / "sim", out / "fit", seed=seed, k=k, bins=bins)
    cmd_evaluate(out / "sim", out / "fit", out / "eval", bins=bins)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lunar-doppler", description=__doc__.splitlines()[1])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def seed_arg(p):
        p.add_argument("--seed", type=int, help="RNG seed for EM initialisation")

    p = sub.add_parser("simulate", help="propagate the constellation and write Doppler series")
    p.add_argument("--scenario", help="scenario YAML (default: built-in default scenario)")
    p.add_argument("--out", required=True)
    p.add_argument("--min-elevation", type=float)
    seed_arg(p)

    p = sub.add_parser("fit", help="fit per-link and pooled Gaussian mixtures")
    p.add_argument("--sim", required=True, help="output directory of 'simulate'")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--bins", type=int)
    seed_arg(p)

    p = sub.add_parser("evaluate", help="WMRD / KL table for fitted models")
    p.add_argument("--sim", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", type=int)

    p = sub.add_parser("timeseries", help="export one link's (t, ppm, visible) series")
    p.add_argument("--sim", required=True)
    p.add_argument("--link", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("run-all", help="simulate, fit and evaluate into one directory")
    p.add_argument("--scenario")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--min-elevation", type=float)
    seed_arg(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args.scenario, args.out, args.seed, args.min_elevation)
        if args.command == "fit":
            return cmd_fit(args.sim, args.out, args.seed, args.k, args.bins)
        if args.command == "evaluate":
            return cmd_evaluate(args.sim, args.fit, args.out, args.bins)
        if args.command == "timeseries":
            return cmd_timeseries(args.sim, args.link, args.out)
        return cmd_run_all(args.scenario, args.out, args.seed, args.k, args.bins,
                           args.min_elevation)
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(json.dumps({"status": "error", "command": args.command,
                          "error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
