"""Command-line pipeline driver.

Subcommands: `simulate`, `calibrate`, `validate`, `reproduce`.  Behaviour is
controlled by a JSON config file plus flag overrides (flags win).  Every
output file carries the toolkit version, seed and a hash of the effective
config in its header or meta block.  HAWKESLOB_THREADS caps seed-sweep
parallelism in `reproduce`.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .calibration import CalibrationResult, deviation_measures, heuristic_start, mle_fit
from .classification import ClassifiedStream, classify_simulation, counts_summary
from .diagnostics import run_diagnostics
from .hawkes import HawkesParams, default_params, simulate_thinning
from .injection import (
    MODELS,
    VolumeModel,
    draw_volumes,
    run_simulation,
    write_messages_csv,
)
from .lob import microstructure_series, write_microstructure_csv
from .util import meta_dict, thread_cap


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG = {
    "model": "model1",
    "seed": 1,
    "horizon_s": 28800.0,
    "start_price": 1000,
    "hawkes_params_path": None,
    "hawkes_params": None,
    "volume": {"x_m_lo": 20, "x_m_mo": 50, "alpha": 1.0},
}


def _check_keys(cfg: dict, reference: dict, path: str = "$") -> None:
    for key, value in cfg.items():
        if key not in reference:
            raise ConfigError(f"config: unknown key at {path}.{key}")
        if isinstance(reference[key], dict) and isinstance(value, dict):
            _check_keys(value, reference[key], f"{path}.{key}")


def load_config(path: str | None, overrides: dict) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON in {path}: {exc}")
        if "hawkes_params" in user and user["hawkes_params"] is not None:
            cfg["hawkes_params"] = user.pop("hawkes_params")
        _check_keys(user, DEFAULT_CONFIG)
        for key, value in user.items():
            if isinstance(value, dict) and isinstance(cfg.get(key), dict):
                cfg[key].update(value)
            else:
                cfg[key] = value
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    if cfg["model"] not in MODELS:
        raise ConfigError(f"config: model must be one of {MODELS}, got {cfg['model']!r}")
    return cfg


def resolve_params(cfg: dict) -> HawkesParams:
    if cfg.get("hawkes_params"):
        return HawkesParams.from_json(cfg["hawkes_params"])
    if cfg.get("hawkes_params_path"):
        return HawkesParams.load(cfg["hawkes_params_path"])
    return default_params()


def _volume_model(cfg: dict) -> VolumeModel:
    vol = cfg["volume"]
    return VolumeModel(x_m_lo=vol["x_m_lo"], x_m_mo=vol["x_m_mo"], tail_alpha=vol["alpha"])


def print_counts_table(injected: np.ndarray, classified: np.ndarray | None, model: str) -> None:
    print(f"event counts ({model}):")
    header = f"{'type':>4} {'injected':>9}"
    if classified is not None:
        header += f" {'classified':>11}"
    print(header)
    for m in range(injected.size):
        row = f"{m + 1:>4} {injected[m]:>9}"
        if classified is not None:
            row += f" {classified[m]:>11}"
        print(row)


def simulate_pipeline(cfg: dict, out_dir: str) -> ClassifiedStream:
    """Run one model end to end and write all simulation artifacts."""
    os.makedirs(out_dir, exist_ok=True)
    params = resolve_params(cfg)
    seed = int(cfg["seed"])
    meta = meta_dict(seed=seed, config=cfg, model=cfg["model"])

    stream = simulate_thinning(params, float(cfg["horizon_s"]), seed)
    stream = draw_volumes(stream, _volume_model(cfg), seed)
    params.save(os.path.join(out_dir, "params.json"))
    stream.to_csv(os.path.join(out_dir, "hawkes_stream.csv"), meta=meta)

    result = run_simulation(
        stream, cfg["model"], seed,
        volume_model=_volume_model(cfg), start_price=int(cfg["start_price"]),
    )
    classified = classify_simulation(result)
    classified.to_csv(os.path.join(out_dir, "classified.csv"), meta=meta)

    injected = stream.counts(params.dimension)
    summary = counts_summary(classified, injected)
    summary["meta"] = meta
    summary["dropped_messages"] = result.dropped_count
    summary["price_clamps"] = result.price_clamps
    with open(os.path.join(out_dir, "counts.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")

    if result.log is not None:
        write_messages_csv(result.messages, os.path.join(out_dir, "events.csv"), meta=meta)
        result.log.write_trades_csv(os.path.join(out_dir, "trades.csv"), meta=meta)
        result.log.write_quotes_csv(os.path.join(out_dir, "quotes.csv"), meta=meta)
        series = microstructure_series(result.log)
        write_microstructure_csv(series, os.path.join(out_dir, "microstructure.csv"), meta=meta)

    print_counts_table(injected, classified.counts() if result.log is not None else None,
                       cfg["model"])
    return classified


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, {
        "model": args.model, "seed": args.seed, "horizon_s": args.horizon,
    })
    simulate_pipeline(cfg, args.out_dir)
    return 0


def _resolve_start(args, cfg: dict, classified: ClassifiedStream) -> HawkesParams | None:
    if args.start == "true":
        return resolve_params(cfg)
    if args.start == "heuristic":
        return None  # mle_fit applies its documented heuristic
    return HawkesParams.load(args.start_file or args.start)


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed})
    if not os.path.exists(args.input):
        print(f"error: input not found: {args.input}", file=sys.stderr)
        return 1
    classified = ClassifiedStream.from_csv(args.input, horizon=args.horizon)
    start = _resolve_start(args, cfg, classified)
    result = mle_fit(
        classified,
        start=start,
        dimension=resolve_params(cfg).dimension if start is None else None,
        max_iters=args.max_iters,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    out_path = os.path.join(args.out_dir, "calibration.json")
    result.save(out_path)
    print(f"loglik {result.loglik:.4f}  iterations {result.iterations}  "
          f"converged {result.converged}  elapsed {result.elapsed_s:.1f}s")
    if args.start == "true":
        mae, rmse = deviation_measures(result.theta_hat, resolve_params(cfg))
        print(f"deviation from start/true parameters: MAE {mae:.4f}  RMSE {rmse:.4f}")
    print(f"wrote {out_path}")
    return 0


def print_validation_summary(report) -> None:
    print(f"deviation:  MAE {report.mae:.4f}  RMSE {report.rmse:.4f}")
    print(f"LR test:    stat {report.lr_stat:.2f}  df {report.lr_df}  p {report.lr_p:.6g}")
    print(f"{'type':>4} {'KS p':>10} {'LB p':>10}")
    for m in range(1, report.dimension + 1):
        ks = f"{report.ks[m][1]:.5f}" if report.ks[m] else "-"
        lb = f"{report.lb[m][1]:.5f}" if report.lb[m] else "-"
        print(f"{m:>4} {ks:>10} {lb:>10}")


def cmd_validate(args) -> int:
    for path in (args.input, args.fit, args.params):
        if not os.path.exists(path):
            print(f"error: input not found: {path}", file=sys.stderr)
            return 1
    classified = ClassifiedStream.from_csv(args.input, horizon=args.horizon)
    theta_hat = CalibrationResult.load(args.fit).theta_hat
    theta_true = HawkesParams.load(args.params)
    if theta_hat.dimension != theta_true.dimension:
        print("error: fitted and true parameter dimensions differ", file=sys.stderr)
        return 1
    report = run_diagnostics(classified, theta_hat, theta_true, lags=args.lags,
                             compute_fisher=not args.skip_fisher)
    os.makedirs(args.out_dir, exist_ok=True)
    report.save_json(os.path.join(args.out_dir, "diagnostics.json"))
    report.write_csvs(args.out_dir, meta=meta_dict())
    print_validation_summary(report)
    return 0


def _reproduce_one(task: dict) -> dict:
    """One (seed x model) pipeline stage; returns a summary record."""
    cfg = task["cfg"]
    model = task["model"]
    out_dir = task["out_dir"]
    try:
        cfg = dict(cfg, model=model)
        classified = simulate_pipeline(cfg, out_dir)
        record = {
            "seed": cfg["seed"], "model": model, "ok": True,
            "counts": classified.counts().tolist(),
        }
        if task["calibrate"]:
            theta_true = resolve_params(cfg)
            fit = mle_fit(classified, start=theta_true, max_iters=task["max_iters"])
            fit.save(os.path.join(out_dir, "calibration.json"))
            report = run_diagnostics(classified, fit.theta_hat, theta_true,
                                     lags=task["lags"], compute_fisher=task["fisher"])
            report.save_json(os.path.join(out_dir, "diagnostics.json"))
            report.write_csvs(out_dir, meta=meta_dict(seed=cfg["seed"], config=cfg))
            record.update({
                "mae": report.mae, "rmse": report.rmse,
                "lr_stat": report.lr_stat, "lr_p": report.lr_p,
                "converged": fit.converged,
                "ks_p": {m: (v[1] if v else None) for m, v in report.ks.items()},
                "lb_p": {m: (v[1] if v else None) for m, v in report.lb.items()},
            })
        return record
    except Exception as exc:  # partial failure is reported, not fatal here
        return {"seed": task["cfg"]["seed"], "model": model, "ok": False,
                "error": f"{type(exc).__name__}: {exc}",
                "trace": traceback.format_exc()}


def _write_report_md(path: str, records: list[dict], cfg: dict, calibrated: bool) -> None:
    lines = [
        "# Reproduction report",
        "",
        f"toolkit hawkeslob {__version__}; horizon {cfg['horizon_s']} s; "
        f"seeds {sorted({r['seed'] for r in records})}",
        "",
    ]
    failed = [r for r in records if not r["ok"]]
    if failed:
        lines.append("## Failed stages")
        lines.extend(f"- seed {r['seed']} {r['model']}: {r['error']}" for r in failed)
        lines.append("")

    for seed in sorted({r["seed"] for r in records}):
        rows = {r["model"]: r for r in records if r["seed"] == seed and r["ok"]}
        if not rows:
            continue
        lines.append(f"## Seed {seed}")
        lines.append("")
        lines.append("| type | " + " | ".join(rows.keys()) + " |")
        lines.append("|---" * (len(rows) + 1) + "|")
        for m in range(10):
            cells = [str(rows[model]["counts"][m]) for model in rows]
            lines.append(f"| {m + 1} | " + " | ".join(cells) + " |")
        lines.append("")
        if calibrated:
            lines.append("| measure | " + " | ".join(rows.keys()) + " |")
            lines.append("|---" * (len(rows) + 1) + "|")
            for key, fmt in (("mae", "{:.4f}"), ("rmse", "{:.4f}"),
                             ("lr_stat", "{:.2f}"), ("lr_p", "{:.6g}")):
                cells = [fmt.format(rows[model][key]) if key in rows[model] else "-"
                         for model in rows]
                lines.append(f"| {key} | " + " | ".join(cells) + " |")
            lines.append("")
            lines.append("| type | " + " | ".join(
                f"{model} KS p | {model} LB p" for model in rows) + " |")
            lines.append("|---" * (2 * len(rows) + 1) + "|")
            for m in range(1, 11):
                cells = []
                for model in rows:
                    ks = rows[model].get("ks_p", {}).get(m)
                    lb = rows[model].get("lb_p", {}).get(m)
                    cells.append(f"{ks:.4f}" if ks is not None else "-")
                    cells.append(f"{lb:.4f}" if lb is not None else "-")
                lines.append(f"| {m} | " + " | ".join(cells) + " |")
            lines.append("")

    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_reproduce(args) -> int:
    cfg = load_config(args.config, {"horizon_s": args.horizon})
    seeds = [int(s) for s in args.seeds.split(",") if s]
    os.makedirs(args.out_dir, exist_ok=True)

    tasks = []
    for seed in seeds:
        for model in MODELS:
            tasks.append({
                "cfg": dict(cfg, seed=seed),
                "model": model,
                "out_dir": os.path.join(args.out_dir, f"seed_{seed}", model),
                "calibrate": not args.skip_calibration,
                "max_iters": args.max_iters,
                "lags": args.lags,
                "fisher": not args.skip_fisher,
            })

    workers = min(thread_cap(), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_reproduce_one, tasks))
    else:
        records = [_reproduce_one(t) for t in tasks]

    # seed-to-seed record order is deterministic regardless of pool scheduling
    records.sort(key=lambda r: (r["seed"], MODELS.index(r["model"])))
    _write_report_md(os.path.join(args.out_dir, "report.md"), records, cfg,
                     calibrated=not args.skip_calibration)
    with open(os.path.join(args.out_dir, "report.json"), "w") as fh:
        json.dump({"meta": meta_dict(config=cfg), "records": records}, fh, indent=2)
        fh.write("\n")

    failed = [r for r in records if not r["ok"]]
    for r in failed:
        print(f"FAILED seed {r['seed']} {r['model']}: {r['error']}", file=sys.stderr)
    print(f"report written to {os.path.join(args.out_dir, 'report.md')}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hawkeslob",
        description="simulate order flow through a matching engine, then calibrate "
                    "and validate the generating point process on the output",
    )
    parser.add_argument("--version", action="version", version=f"hawkeslob {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one model and write TAQ-style outputs")
    p_sim.add_argument("--model", choices=MODELS)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--horizon", type=float, dest="horizon")
    p_sim.add_argument("--config")
    p_sim.add_argument("--out-dir", default="out/simulate")
    p_sim.set_defaults(func=cmd_simulate)

    p_cal = sub.add_parser("calibrate", help="maximum-likelihood fit on a classified stream")
    p_cal.add_argument("--input", required=True, help="classified.csv")
    p_cal.add_argument("--start", default="true",
                       help="'true' (config parameters), 'heuristic', or a params JSON path")
    p_cal.add_argument("--start-file", help="explicit params JSON path when --start file")
    p_cal.add_argument("--max-iters", type=int, default=2000)
    p_cal.add_argument("--seed", type=int)
    p_cal.add_argument("--horizon", type=float)
    p_cal.add_argument("--config")
    p_cal.add_argument("--out-dir", default="out/calibrate")
    p_cal.set_defaults(func=cmd_calibrate)

    p_val = sub.add_parser("validate", help="residual tests, LR test and confidence intervals")
    p_val.add_argument("--input", required=True, help="classified.csv")
    p_val.add_argument("--fit", required=True, help="calibration.json")
    p_val.add_argument("--params", required=True, help="true-parameters JSON")
    p_val.add_argument("--lags", type=int, default=20)
    p_val.add_argument("--horizon", type=float)
    p_val.add_argument("--skip-fisher", action="store_true")
    p_val.add_argument("--out-dir", default="out/validate")
    p_val.set_defaults(func=cmd_validate)

    p_rep = sub.add_parser("reproduce", help="end-to-end sweep over seeds and all models")
    p_rep.add_argument("--seeds", default="1", help="comma-separated seed list")
    p_rep.add_argument("--horizon", type=float)
    p_rep.add_argument("--config")
    p_rep.add_argument("--skip-calibration", action="store_true")
    p_rep.add_argument("--skip-fisher", action="store_true")
    p_rep.add_argument("--max-iters", type=int, default=2000)
    p_rep.add_argument("--lags", type=int, default=20)
    p_rep.add_argument("--out-dir", default="out/reproduce")
    p_rep.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
