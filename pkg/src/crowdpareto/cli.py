"""Batch command-line front end.

Subcommands: validate, summarize, fit-models, alpha, pareto, simulate.
All outputs are plot-ready CSV/JSON; a fixed seed makes every output
byte reproducible regardless of worker count.  Exit codes: 0 ok,
1 dataset validation failure, 2 runtime error.
"""

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from datetime import date
from pathlib import Path

from . import attribution, dataset, pareto, simulate
from .errors import CrowdParetoError, DatasetError
from .models import (
    DeGroot,
    GaussianPrice,
    GaussianSocial,
    GaussianSocialModes,
    MonteCarloConfig,
    NumericalPrice,
    NumericalSocial,
    residual,
)
from .pareto import t_confidence_interval

_FMT = "{:.6g}".format  # analysis outputs carry 6 significant digits


@dataclass
class RunConfig:
    """Pipeline settings; defaults reproduce the standard analysis
    (100 bootstraps, 15 equal-count alpha groups)."""

    n_boot: int = 100
    n_bins: int = 15
    seed: int = 0
    horizon_days: int | None = None   # None: extrapolate to each round's end
    n_paths: int = 10_000
    n_samples: int = 2_000
    rates_bins: int = 50
    social_bins: int = 50
    dip_n_null: int = 2_000
    workers: int = 1
    resample_full: bool = True
    window: str | None = None         # "FROM:TO" ISO dates
    grid: str | None = None           # comma-separated alpha_s override

    def mc(self) -> MonteCarloConfig:
        return MonteCarloConfig(
            n_paths=self.n_paths, n_samples=self.n_samples, seed=self.seed,
            rates_bins=self.rates_bins, social_bins=self.social_bins,
            dip_n_null=self.dip_n_null,
        )


def _load_run_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        known = {f.name for f in fields(RunConfig)}
        unknown = set(loaded) - known
        if unknown:
            raise CrowdParetoError(f"unknown config keys: {sorted(unknown)}")
        for key, value in loaded.items():
            setattr(cfg, key, value)
    for f in fields(RunConfig):  # flags win over the config file
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, value)
    return cfg


def _parse_window(value: str) -> tuple:
    try:
        lo, hi = value.split(":")
        return date.fromisoformat(lo), date.fromisoformat(hi)
    except ValueError as exc:
        raise CrowdParetoError(f"bad --window {value!r}, expected FROM:TO ISO dates: {exc}")


def _mapper(workers: int):
    if workers <= 1:
        return map, None
    pool = ThreadPoolExecutor(max_workers=workers)
    return pool.map, pool


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if value != value else _FMT(value)  # NaN flags a gap
    return str(value)


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    violations = dataset.validate_dataset(args.input, format=args.format)
    if not violations:
        rounds = dataset.load_dataset(args.input, format=args.format)
        n_sets = sum(len(r.prediction_sets) for r in rounds)
        print(f"0 violations ({len(rounds)} rounds, {n_sets} prediction sets)")
        return 0
    print(f"{len(violations)} violation(s):")
    for v in violations:
        print(f"  {type(v).__name__}: {v}")
    raise violations[0]


def cmd_summarize(args) -> int:
    rounds = dataset.load_dataset(args.input, format=args.format)
    out = Path(args.out)
    rows = []
    for s in dataset.summarize(rounds):
        rows.append([s.round_id, s.asset_symbol, _fmt(s.ground_truth),
                     s.n_prediction_sets, _fmt(s.price_change_pct),
                     _fmt(s.linear_extrapolation_error_pct),
                     _fmt(s.crowd_mean_error_pct),
                     _fmt(s.futures_mean_error_pct)])
    _write_csv(out / "summary.csv",
               ["round_id", "asset_symbol", "ground_truth", "n_prediction_sets",
                "price_change_pct", "linear_extrapolation_error_pct",
                "crowd_mean_error_pct", "futures_mean_error_pct"],
               rows)
    print(f"wrote {out / 'summary.csv'}")
    return 0


_MODEL_ORDER = ("GaussianSocial", "GaussianSocialModes", "NumericalSocial",
                "NumericalPrice", "GaussianPrice", "DeGroot")


def cmd_fit_models(args) -> int:
    cfg = _load_run_config(args)
    rounds = dataset.load_dataset(args.input, format=args.format)
    mc = cfg.mc()
    models = {
        "GaussianSocial": GaussianSocial(),
        "GaussianSocialModes": GaussianSocialModes(n_null=cfg.dip_n_null, seed=cfg.seed),
        "NumericalSocial": NumericalSocial(mc=mc),
        "NumericalPrice": NumericalPrice(mc=mc),
        "GaussianPrice": GaussianPrice(mc=mc),
        "DeGroot": DeGroot(),
    }
    map_fn, pool = _mapper(cfg.workers)
    rows = []
    report = {"settings": vars(cfg).copy(), "models": {}}
    try:
        for name in _MODEL_ORDER:
            model = models[name]
            needs_horizon = name in ("GaussianPrice", "NumericalPrice")
            total_eval, total_skipped = 0, 0
            acceptance = []

            def one(job, model=model, needs_horizon=needs_horizon):
                pset, horizon = job
                try:
                    est = (model.estimate(pset, horizon_days=horizon)
                           if needs_horizon else model.estimate(pset))
                except CrowdParetoError:
                    return None
                return (abs(residual(est, pset.b_post)) * 100.0,
                        est.diagnostics.get("acceptance_rate"))

            for r in rounds:
                jobs = []
                for pset in r.analysis_sets:
                    horizon = cfg.horizon_days
                    if horizon is None:
                        horizon = max((r.end_date - pset.timestamp.date()).days, 1)
                    jobs.append((pset, horizon))
                results = [x for x in map_fn(one, jobs) if x is not None]
                residuals = [res for res, _ in results]
                acceptance.extend(a for _, a in results if a is not None)
                total_eval += len(residuals)
                total_skipped += len(jobs) - len(residuals)
                if residuals:
                    mean = sum(residuals) / len(residuals)
                    if len(residuals) >= 2:
                        lo, hi = t_confidence_interval(residuals)
                        half = (hi - lo) / 2.0
                    else:
                        half = 0.0
                    rows.append([name, r.round_id, len(residuals),
                                 _fmt(mean), _fmt(half)])
            report["models"][name] = {
                "n_evaluated": total_eval,
                "n_skipped": total_skipped,
                "mean_acceptance_rate": (sum(acceptance) / len(acceptance)
                                         if acceptance else None),
            }
    finally:
        if pool:
            pool.shutdown()
    out = Path(args.out)
    _write_csv(out / "residuals.csv",
               ["model", "round_id", "n_sets", "mean_abs_residual_pct",
                "ci95_half_width_pct"],
               rows)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "fit_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out / 'residuals.csv'} and fit_report.json")
    return 0


def _alpha_records(rounds, cfg):
    map_fn, pool = _mapper(cfg.workers)
    try:
        records, n_skipped = attribution.compute_alpha_records(
            rounds, mc=cfg.mc(), horizon_days=cfg.horizon_days, map_fn=map_fn)
    finally:
        if pool:
            pool.shutdown()
    return records, n_skipped


def cmd_alpha(args) -> int:
    cfg = _load_run_config(args)
    rounds = dataset.load_dataset(args.input, format=args.format)
    records, n_skipped = _alpha_records(rounds, cfg)
    out = Path(args.out)
    attribution.write_alphas_csv(records, out / "alphas.csv")
    with open(out / "alpha_report.json", "w", encoding="utf-8") as fh:
        json.dump({"n_records": len(records),
                   "n_skipped_unattributable": n_skipped,
                   "settings": vars(cfg).copy()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out / 'alphas.csv'} ({len(records)} records, "
          f"{n_skipped} skipped)")
    return 0


def cmd_pareto(args) -> int:
    cfg = _load_run_config(args)
    rounds = dataset.load_dataset(args.input, format=args.format)
    if cfg.window:
        lo, hi = _parse_window(cfg.window)
        rounds = pareto.window_filter(rounds, lo, hi)
    records, n_skipped = _alpha_records(rounds, cfg)
    if cfg.grid:
        grid = attribution.AlphaGrid(tuple(float(x) for x in cfg.grid.split(",")))
    else:
        grid = attribution.build_alpha_grid(records, n_bins=cfg.n_bins)

    map_fn, pool = _mapper(cfg.workers)
    try:
        points = pareto.pareto_curve(rounds, records, grid, n_boot=cfg.n_boot,
                                     seed=cfg.seed, resample_full=cfg.resample_full,
                                     map_fn=map_fn)
    finally:
        if pool:
            pool.shutdown()

    out = Path(args.out)
    _write_csv(out / "pareto.csv",
               ["alpha_s", "improvement", "ci95", "risk", "n_rounds_used"],
               [[_fmt(p.alpha_s), _fmt(p.improvement_mean), _fmt(p.ci95_half_width),
                 _fmt(p.risk), p.n_rounds_used] for p in points])
    _write_csv(out / "improvement.csv",
               ["alpha_s", "improvement_pct", "ci95_half_width"],
               [[_fmt(p.alpha_s), _fmt(p.improvement_mean), _fmt(p.ci95_half_width)]
                for p in points])

    finite = [p for p in points if not p.is_gap]
    smooth_rows = []
    if len(finite) >= 3:
        xy = [(p.risk, p.improvement_mean) for p in finite]
        smoothed = pareto.loess_smooth(xy)
        smooth_rows = [[_fmt(p.alpha_s), _fmt(p.risk), _fmt(p.improvement_mean),
                        _fmt(sy)] for p, (_, sy) in zip(finite, smoothed)]
    _write_csv(out / "pareto_smooth.csv",
               ["alpha_s", "risk", "improvement", "improvement_smooth"],
               smooth_rows)
    print(f"wrote {out / 'pareto.csv'}, improvement.csv, pareto_smooth.csv "
          f"({len(points)} boundaries, {n_skipped} sets skipped)")
    return 0


def cmd_simulate(args) -> int:
    configs = simulate.load_sim_configs(args.config)
    out = simulate.generate_dataset(configs, args.out)
    print(f"wrote {len(configs)} simulated round(s) to {out}")
    return 0


# ---------------------------------------------------------------------------


def _add_common(p, with_out=True):
    p.add_argument("--input", required=True, help="dataset directory")
    p.add_argument("--format", default="auto", choices=["auto", "jsonl", "csv-bundle"])
    if with_out:
        p.add_argument("--out", required=True, help="output directory")


def _add_run_flags(p):
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-boot", type=int, dest="n_boot")
    p.add_argument("--n-bins", type=int, dest="n_bins")
    p.add_argument("--horizon-days", type=int, dest="horizon_days")
    p.add_argument("--n-paths", type=int, dest="n_paths")
    p.add_argument("--n-samples", type=int, dest="n_samples")
    p.add_argument("--workers", type=int)
    p.add_argument("--window", help="restrict to predictions in FROM:TO (ISO dates)")
    p.add_argument("--grid", help="comma-separated alpha_s boundaries")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdpareto",
        description="Social-learning attribution and accuracy-risk analysis "
                    "of crowd forecasts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a dataset against the schema")
    _add_common(p, with_out=False)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("summarize", help="per-round baseline statistics")
    _add_common(p)
    p.set_defaults(fn=cmd_summarize)

    p = sub.add_parser("fit-models", help="residuals of all belief models")
    _add_common(p)
    _add_run_flags(p)
    p.set_defaults(fn=cmd_fit_models)

    p = sub.add_parser("alpha", help="social-learning attribution per set")
    _add_common(p)
    _add_run_flags(p)
    p.set_defaults(fn=cmd_alpha)

    p = sub.add_parser("pareto", help="subset improvement and risk frontier")
    _add_common(p)
    _add_run_flags(p)
    p.set_defaults(fn=cmd_pareto)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--config", required=True, help="SimConfig JSON (object or array)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_simulate)

    return parser


def _emit_error(exc: Exception, out_dir: str | None, exit_code: int) -> None:
    record = {
        "error": type(exc).__name__,
        "message": str(exc),
        "record_id": getattr(exc, "record_id", None),
        "exit_code": exit_code,
    }
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    if out_dir:
        try:
            path = Path(out_dir)
            path.mkdir(parents=True, exist_ok=True)
            with open(path / "error.json", "w", encoding="utf-8") as fh:
                json.dump(record, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError:
            pass  # stderr record already emitted


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DatasetError as exc:
        _emit_error(exc, getattr(args, "out", None), 1)
        return 1
    except (CrowdParetoError, OSError) as exc:
        _emit_error(exc, getattr(args, "out", None), 2)
        return 2


if __name__ == "__main__":
    sys.exit(main())
