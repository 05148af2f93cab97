"""Command line entry point: ``epiwave <command> ...``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

log = logging.getLogger("epiwave")


def cmd_simulate(args) -> int:
    from .citysim import CityConfig, emit_raw, simulate, write_truth

    cfg = CityConfig.from_toml(args.config) if args.config else CityConfig()
    raw, truth = simulate(cfg)
    out = Path(args.out)
    counts = emit_raw(raw, out)
    write_truth(truth, out / "truth")
    print(json.dumps(counts))
    return 0


def cmd_preprocess(args) -> int:
    from .preprocess import PreprocessConfig, load_district_map, preprocess_dirs
    from .wmn import write_series

    cfg = PreprocessConfig(min_stay=args.min_stay, bandwidth=args.bandwidth, min_night_records=args.min_night_records,
                           home_days=args.home_days, utc_offset_hours=args.utc_offset)
    res = preprocess_dirs(args.mobility, args.search, args.cases, load_district_map(args.districts), cfg)
    write_series(res.series, args.out)
    homes = {u: {"lat": h.lat, "lon": h.lon, "district": res.series.districts[h.district]}
             for u, h in sorted(res.homes.items())}
    (Path(args.out) / "homes.json").write_text(json.dumps(homes))
    print(json.dumps({"days": len(res.series), "districts": res.series.n, "permanent_users": len(res.permanent_users),
                      "homes": len(res.homes), "skipped_search_records": res.skipped_search_records}))
    return 0


def cmd_experiment(args) -> int:
    from .experiment import ExperimentConfig, run

    exp = ExperimentConfig.from_toml(args.config)
    if args.workers is not None:
        exp = dataclasses.replace(exp, workers=args.workers)
    report = run(exp, args.command)
    for m, d1, d2, mae, rmse, *_ in report.summary:
        print(f"{m:12s} ({d1},{d2})  MAE {mae:.4f}  RMSE {rmse:.4f}")
    for o in report.failed:
        print(f"FAILED {o.spec.tag}: {o.error}", file=sys.stderr)
    print(f"reports in {report.out_dir}")
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="epiwave", description="Multiwave epidemic forecasting from mobility and web search.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic city's raw records and ground truth")
    s.add_argument("--config", help="city TOML (defaults when omitted)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("preprocess", help="raw mobility/search/case records to a daily snapshot series")
    s.add_argument("--mobility", required=True, help="directory of mobility CSVs")
    s.add_argument("--search", required=True, help="directory of search CSVs")
    s.add_argument("--cases", required=True, help="case table CSV")
    s.add_argument("--districts", required=True, help="district map JSON")
    s.add_argument("--out", required=True)
    s.add_argument("--min-stay", type=float, default=10.0, help="minutes")
    s.add_argument("--bandwidth", type=float, default=0.005, help="mean-shift bandwidth in degrees")
    s.add_argument("--min-night-records", type=int, default=20)
    s.add_argument("--home-days", type=int, default=26)
    s.add_argument("--utc-offset", type=float, default=9.0, help="local time offset in hours")
    s.set_defaults(func=cmd_preprocess)

    for name, text in (("train", "train every model and write reports"),
                       ("evaluate", "score saved models on the test windows"),
                       ("ablate", "train the SAB-GNN variants and write the ablation table"),
                       ("sweep", "vary model settings listed under [sweep]")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True, help="experiment TOML")
        s.add_argument("--workers", type=int, help="parallel worker processes (overrides the config)")
        s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
