"""Command-line entry point: ``baysize <size|power|table|simulate> --config FILE``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import replace

import numpy as np

from .bayes_factor import BayesFactorBatch
from .config import SCHEMA_VERSION, ConfigError, RunConfig, config_to_dict, load_config
from .design import simulate_trials
from .scenarios import draw_h0, scenario_p1
from .search import (
    PHASE_CALIBRATION,
    PHASE_POWER,
    calibrate_cutoff,
    estimate_power,
    find_sample_size,
    power_table,
    trial_rng,
)

logger = logging.getLogger("baysize")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

COMMANDS = ("size", "power", "table", "simulate")

COLUMNS = {
    "table": ["half_effect", "alpha", "n", "power_min", "power_max", "mc_se", "seed",
              "p_T", "cutoff_log_bf", "empirical_type1", "calib_trials", "power_trials",
              "schema_version"],
    "power": ["n", "alpha", "scenario", "power", "mc_se", "cutoff_log_bf", "empirical_type1",
              "seed", "p_T", "eps1", "eps2", "calib_trials", "power_trials", "schema_version"],
    "size": ["record", "n", "power", "cutoff_log_bf", "empirical_type1", "n_star", "feasible",
             "p_T", "eps1", "eps2", "alpha", "beta", "n_upper", "seed", "schema_version"],
    "simulate": ["source", "scenario", "trial", "dose", "p_true", "dlt", "patients",
                 "terminated_early", "total_treated", "log_bf", "seed", "schema_version"],
}


def _common(cfg: RunConfig) -> dict:
    ei = cfg.design.ei
    return {"p_T": ei.p_T, "eps1": ei.eps1, "eps2": ei.eps2, "seed": cfg.search.root_seed,
            "schema_version": SCHEMA_VERSION}


def _run_size(cfg: RunConfig, workers: int):
    res = find_sample_size(cfg.search, cfg.design, cfg.fitting, cfg.hypothesis_prior, workers)
    base = _common(cfg)
    base.update(alpha=cfg.search.alpha, beta=cfg.search.beta, n_upper=cfg.search.n_upper)
    records = []
    for ev in res.evaluations:
        records.append(dict(base, record="evaluation", n=ev.n, power=ev.power,
                            cutoff_log_bf=ev.cutoff_log_bf, empirical_type1=ev.empirical_type1,
                            n_star="", feasible=""))
    if res.feasible:
        best = next(ev for ev in res.evaluations if ev.n == res.n_unrounded)
        records.append(dict(base, record="result", n=res.n_unrounded, power=best.power,
                            cutoff_log_bf=best.cutoff_log_bf,
                            empirical_type1=best.empirical_type1,
                            n_star=res.n_star, feasible=True))
        return EXIT_OK, records
    top = res.evaluations[0]
    records.append(dict(base, record="result", n=top.n, power=top.power,
                        cutoff_log_bf=top.cutoff_log_bf, empirical_type1=top.empirical_type1,
                        n_star="", feasible=False))
    logger.warning("infeasible: power %.4f at n_upper=%d is below the target %.4f",
                   top.power, top.n, res.target_power)
    return EXIT_INFEASIBLE, records


def _run_power(cfg: RunConfig, workers: int):
    base = _common(cfg)
    base.update(alpha=cfg.search.alpha, calib_trials=cfg.search.calib_trials,
                power_trials=cfg.search.power_trials)
    records = []
    for n in cfg.grid.n_values:
        design = cfg.design.with_max_patients(n)
        cal = calibrate_cutoff(n, cfg.search, design, cfg.fitting, cfg.hypothesis_prior, workers)
        pw = estimate_power(n, cal.cutoff_log_bf, cfg.search, design, cfg.fitting,
                            hp=cfg.hypothesis_prior, workers=workers)
        rows = list(zip(pw.scenario_labels, pw.per_scenario_power, pw.mc_se))
        imin = int(np.argmin(pw.per_scenario_power))
        rows.append(("min", pw.power, pw.mc_se[imin]))
        for label, p, se in rows:
            records.append(dict(base, n=n, scenario=label, power=float(p), mc_se=float(se),
                                cutoff_log_bf=cal.cutoff_log_bf,
                                empirical_type1=cal.empirical_type1))
    return EXIT_OK, records


def _run_table(cfg: RunConfig, workers: int):
    g = cfg.grid
    cells = power_table(g.half_effects, g.alphas, g.n_values, cfg.search, cfg.design,
                        cfg.fitting, cfg.hypothesis_prior, workers)
    records = [
        {"half_effect": c.half_effect, "alpha": c.alpha, "n": c.n,
         "power_min": c.power_min, "power_max": c.power_max, "mc_se": c.mc_se,
         "seed": cfg.search.root_seed, "p_T": cfg.design.ei.p_T,
         "cutoff_log_bf": c.cutoff_log_bf, "empirical_type1": c.empirical_type1,
         "calib_trials": cfg.search.calib_trials, "power_trials": cfg.search.power_trials,
         "schema_version": SCHEMA_VERSION}
        for c in cells
    ]
    return EXIT_OK, records


def _run_simulate(cfg: RunConfig, workers: int):
    """Raw trials from the same streams the calibration and power steps use."""
    design, s = cfg.design, cfg.search
    n, D = design.max_patients, design.num_doses
    bf = BayesFactorBatch(cfg.fitting, cfg.hypothesis_prior)
    sources = [("h0", s.h0_prior.value, PHASE_CALIBRATION, 0, None)]
    for k, sc in enumerate(s.scenarios(design.ei, D)):
        sources.append(("h1", sc.label, PHASE_POWER, k, scenario_p1(sc, design.ei, D)))

    records = []
    for source, label, phase, k, p_star in sources:
        T = cfg.grid.simulate_trials
        p = np.empty((T, D))
        u = np.empty((T, n))
        for t in range(T):
            rng = trial_rng(s.root_seed, phase, k, n, t)
            p[t] = draw_h0(s.h0_prior, D, design.ei, rng) if p_star is None else p_star
            u[t] = rng.random(n)
        X, N, stopped = simulate_trials(p, design, u)
        log_bf = bf.log_bf(X, N)
        for t in range(T):
            for d in range(D):
                records.append({
                    "source": source, "scenario": label, "trial": t, "dose": d + 1,
                    "p_true": float(p[t, d]), "dlt": int(X[t, d]), "patients": int(N[t, d]),
                    "terminated_early": bool(stopped[t]), "total_treated": int(N[t].sum()),
                    "log_bf": float(log_bf[t]), "seed": s.root_seed,
                    "schema_version": SCHEMA_VERSION,
                })
    return EXIT_OK, records


_RUNNERS = {"size": _run_size, "power": _run_power, "table": _run_table,
            "simulate": _run_simulate}


def run_command(cmd: str, cfg: RunConfig, workers: int = 1) -> tuple[int, list[dict]]:
    """Run one command; returns ``(exit_status, records)``."""
    if cmd not in _RUNNERS:
        raise ValueError(f"unknown command {cmd!r}")
    return _RUNNERS[cmd](cfg, workers)


def format_records(cmd: str, cfg: RunConfig, status: int, records: list[dict], fmt: str,
                   runtime: float | None = None) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=COLUMNS[cmd], lineterminator="\n")
        writer.writeheader()
        writer.writerows(records)
        return buf.getvalue()
    doc = {"schema_version": SCHEMA_VERSION, "command": cmd, "exit_status": status,
           "config": config_to_dict(cfg), "records": records}
    if runtime is not None:
        doc["runtime_s"] = runtime
    return json.dumps(doc, indent=2) + "\n"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="baysize",
        description="Bayesian sample size and power for phase I dose-finding trials",
    )
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="TOML run configuration")
    ap.add_argument("--seed", type=int, help="override [search].root_seed")
    ap.add_argument("--out", help="output path ('-' for stdout); overrides [output].path")
    ap.add_argument("--format", choices=("csv", "json"), help="overrides [output].format")
    ap.add_argument("--threads", type=int, default=1, help="worker processes")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, search=replace(cfg.search, root_seed=args.seed))
        output = cfg.output
        if args.out is not None:
            output = replace(output, path=args.out)
        if args.format is not None:
            output = replace(output, format=args.format)
        cfg = replace(cfg, output=output)
    except (ConfigError, OSError) as exc:
        print(f"baysize: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        t0 = time.perf_counter()
        status, records = run_command(args.command, cfg, max(1, args.threads))
        runtime = None if args.command == "simulate" else time.perf_counter() - t0
        text = format_records(args.command, cfg, status, records, cfg.output.format, runtime)
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"baysize: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL

    if cfg.output.path == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.output.path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
