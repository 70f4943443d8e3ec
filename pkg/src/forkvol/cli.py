"""Command-line pipeline: raw CSVs in, analysis reports out.

Subcommands: descriptive, fit, events, welch, simulate, report, fetch.
Exit codes: 0 success, 2 input error, 3 estimation failure, 64 usage
error, 4 partial report failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from . import egarch, estimation, events, grouptests, ingestion, timeseries

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ESTIMATION = 3
EXIT_PARTIAL = 4
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_config(path) -> dict:
    """Flat key=value config file; '#' starts a comment."""
    cfg = {}
    p = Path(path)
    if not p.exists():
        raise ingestion.IngestionError(f"config file not found: {p}")
    for raw in p.read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ingestion.IngestionError(f"bad config line: {raw!r}")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _write(path: Path, data: bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# shared input loading


def _load_panel(args) -> ingestion.Panel:
    asset = ingestion.read_prices(args.asset, "asset")
    index = ingestion.read_prices(args.index, "index") if args.index else None
    panel = ingestion.align(asset, index)
    if args.start or args.end:
        lo = date.fromisoformat(args.start) if args.start else date.min
        hi = date.fromisoformat(args.end) if args.end else date.max
        if lo > hi:
            raise UsageError("--start must not exceed --end")
        keep = [i for i, d in enumerate(panel.dates) if lo <= d <= hi]
        if not keep:
            raise ingestion.IngestionError("no observations in the requested date range")
        panel = ingestion.Panel(
            dates=tuple(panel.dates[i] for i in keep),
            asset_close=panel.asset_close[keep],
            index_close=None if panel.index_close is None else panel.index_close[keep],
            dropped=panel.dropped,
        )
    return panel


def _panel_returns(panel, method):
    asset_r = timeseries.to_returns(panel.asset_close, panel.dates, method)
    index_r = (
        timeseries.to_returns(panel.index_close, panel.dates, method)
        if panel.index_close is not None
        else None
    )
    return asset_r, index_r


def _load_calendar(args) -> list[events.EventRecord]:
    if args.events in ("bundled", "bundled:all"):
        cal = events.bundled_calendar("all")
    elif args.events == "bundled:hard":
        cal = events.bundled_calendar("hard")
    else:
        cal = events.read_events(args.events)
    if getattr(args, "hard_only", False):
        cal = events.filter_hard(cal)
        if not cal:
            raise ingestion.IngestionError("no hard forks in the supplied calendar")
    return cal


def _returns_from_csv(path):
    """Read a date,value returns CSV (as written by `simulate`)."""
    import csv as _csv

    p = Path(path)
    if not p.exists():
        raise ingestion.IngestionError(f"returns file not found: {p}")
    dates, values = [], []
    with open(p, newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "value"]:
            raise ingestion.IngestionError(f"{p}: expected header 'date,value'")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                dates.append(date.fromisoformat(row[0].strip()))
                values.append(float(row[1]))
            except (ValueError, IndexError):
                raise ingestion.IngestionError(f"{p}: bad row at line {line_no}") from None
    return timeseries.ReturnSeries(dates=tuple(dates), values=np.array(values))


def _spec_from_args(args) -> egarch.ModelSpec:
    try:
        return egarch.ModelSpec(
            include_index=args.with_index,
            dummy_location=args.dummy_location,
            regressor_kind=args.regressor,
            nu=args.nu,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_descriptive(args) -> int:
    panel = _load_panel(args)
    asset_r, index_r = _panel_returns(panel, args.returns)
    columns = {"asset": timeseries.describe(asset_r)}
    if index_r is not None:
        columns["index"] = timeseries.describe(index_r)

    payload = {
        "returns_method": args.returns,
        "stats": {name: st.to_dict() for name, st in columns.items()},
    }
    rows = timeseries.DescriptiveStats.ROW_ORDER
    width = max(len(r) for r in rows) + 2
    lines = ["".ljust(width) + "".join(f"{name:>16}" for name in columns)]
    for row in rows:
        cells = []
        for st in columns.values():
            v = getattr(st, row)
            cells.append(f"{v:>16d}" if row == "n" else f"{v:>16.6f}")
        lines.append(row.ljust(width) + "".join(cells))
    text = "\n".join(lines) + "\n"

    outdir = Path(args.out)
    if args.format in ("json", "text"):
        _write(outdir / "descriptive.json", _json_bytes(payload))
    _write(outdir / "descriptive.txt", text.encode())
    sys.stdout.write(text)
    return EXIT_OK


def _run_fit(args, calendar=None):
    if getattr(args, "asset_returns", None):
        asset_r = _returns_from_csv(args.asset_returns)
        index_r = _returns_from_csv(args.index_returns) if getattr(args, "index_returns", None) else None
    else:
        if not args.asset:
            raise UsageError("either --asset or --asset-returns is required")
        panel = _load_panel(args)
        asset_r, index_r = _panel_returns(panel, args.returns)
    spec = _spec_from_args(args)
    if spec.include_index and index_r is None:
        raise UsageError("--with-index requires an index series")
    regressors = None
    if spec.dummy_location != "none":
        if calendar is None:
            if not args.events:
                raise UsageError("--events required when the spec includes the event term")
            calendar = _load_calendar(args)
        regressors = events.build_regressors(calendar, asset_r.dates, policy=args.event_policy)
    result = estimation.fit(
        asset_r.values,
        index_returns=None if index_r is None else index_r.values,
        regressors=regressors,
        spec=spec,
    )
    return result, asset_r, index_r, regressors


def cmd_fit(args) -> int:
    try:
        result, _, _, _ = _run_fit(args)
    except estimation.EstimationError as exc:
        _write(
            Path(args.out) / "fit_diagnostics.json",
            _json_bytes({"error": str(exc), "diagnostics": exc.diagnostics}),
        )
        raise
    outdir = Path(args.out)
    slug = result.spec.slug()
    _write(outdir / f"fit_{slug}.json", _json_bytes(result.to_dict()))
    _write(outdir / f"fit_{slug}.txt", (result.to_table() + "\n").encode())
    sys.stdout.write(result.to_table() + "\n")
    return EXIT_OK


def cmd_events(args) -> int:
    calendar = _load_calendar(args)
    clusters = events.classify_clusters(calendar, window_days=args.window)
    hard = events.filter_hard(calendar)
    payload = {
        "total_events": len(calendar),
        "hard_events": len(hard),
        "distinct_dates": len(clusters),
        "followed_dates": sum(1 for c in clusters if c.is_followed),
        "window_days": args.window,
        "clusters": [
            {
                "date": c.event_date.isoformat(),
                "is_followed": c.is_followed,
                "same_day_count": c.same_day_count,
            }
            for c in clusters
        ],
    }
    out = _json_bytes(payload)
    _write(Path(args.out) / "events.json", out)
    sys.stdout.write(out.decode())
    return EXIT_OK


def _volatility_proxy(args, panel, asset_r, index_r):
    """Day-indexed volatility for the Welch suites.

    Default: fitted sigma from the index-augmented model with no event
    term (market-adjusted); 'absreturn' uses |return| instead.
    """
    if args.proxy == "absreturn":
        values = np.abs(asset_r.values)
    else:
        spec = egarch.ModelSpec(
            include_index=index_r is not None, dummy_location="none", nu=args.nu
        )
        res = estimation.fit(
            asset_r.values,
            index_returns=None if index_r is None else index_r.values,
            spec=spec,
        )
        values = res.sigma_path
    return dict(zip(asset_r.dates, values))


def _welch_payload(mult, delayed):
    def res_dict(r):
        return None if r is None else r.to_dict()

    return {
        "multiplicity": {k: res_dict(v) for k, v in mult.items()},
        "delayed_effect": {
            branch: None
            if rows is None
            else [
                {
                    "lag": r.lag,
                    "avg_vol": r.avg_vol,
                    "std_error": r.std_error,
                    "t_value": r.t_value,
                    "p_value": r.p_value,
                    "n": r.n,
                }
                for r in rows
            ]
            for branch, rows in delayed.items()
        },
    }


def _welch_csv(mult, delayed) -> str:
    lines = ["table,comparison,lag,mean_1,mean_2,difference,t_value,df,p_value,n_1,n_2"]
    for name, r in mult.items():
        if r is None:
            lines.append(f"multiplicity,{name},,,,,,,,,")
        else:
            lines.append(
                f"multiplicity,{name},,{r.mean_1!r},{r.mean_2!r},{r.difference!r},"
                f"{r.t_value!r},{r.df!r},{r.p_value!r},{r.n_1},{r.n_2}"
            )
    for branch, rows in delayed.items():
        if rows is None:
            lines.append(f"delayed,{branch},,,,,,,,,")
            continue
        for r in rows:
            t = "" if r.t_value is None else repr(r.t_value)
            p = "" if r.p_value is None else repr(r.p_value)
            lines.append(
                f"delayed,{branch},{r.lag},{r.avg_vol!r},,{r.std_error!r},{t},,{p},{r.n},"
            )
    return "\n".join(lines) + "\n"


def cmd_welch(args) -> int:
    panel = _load_panel(args)
    asset_r, index_r = _panel_returns(panel, args.returns)
    calendar = _load_calendar(args)
    clusters = events.classify_clusters(calendar, window_days=args.window)
    vol = _volatility_proxy(args, panel, asset_r, index_r)
    mult = grouptests.multiplicity_suite(vol, clusters)
    delayed = grouptests.delayed_effect_suite(vol, clusters, horizon=args.window)
    outdir = Path(args.out)
    _write(outdir / "welch.json", _json_bytes(_welch_payload(mult, delayed)))
    _write(outdir / "welch.csv", _welch_csv(mult, delayed).encode())
    sys.stdout.write(f"wrote {outdir / 'welch.json'}\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.horizon < 1:
        raise UsageError(f"--horizon must be >= 1, got {args.horizon}")
    try:
        params = egarch.ParameterSet(
            mu=args.mu,
            omega=args.omega,
            alpha=args.alpha,
            gamma=args.gamma,
            beta=args.beta,
            delta_event_mean=args.delta_mean,
            delta_event_var=args.delta_var,
            nu=args.nu,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    start = date(2015, 1, 1)
    dates = [start + timedelta(days=i) for i in range(args.horizon)]
    regressor = None
    if args.events:
        calendar = _load_calendar(args)
        regressor = events.build_regressors(calendar, dates, policy=args.event_policy)
    reg_values = None
    if regressor is not None:
        reg_values = regressor.count if args.regressor == "count" else regressor.dummy
    sim = egarch.simulate(
        params,
        args.horizon,
        args.seed,
        regressor=reg_values,
        dummy_in_mean=args.dummy_location == "mean",
    )
    outdir = Path(args.out)
    ret_lines = ["date,value"] + [
        f"{d.isoformat()},{float(v)!r}" for d, v in zip(dates, sim.returns)
    ]
    sig_lines = ["date,sigma"] + [
        f"{d.isoformat()},{float(v)!r}" for d, v in zip(dates, sim.path.sigma)
    ]
    _write(outdir / "sim_returns.csv", ("\n".join(ret_lines) + "\n").encode())
    _write(outdir / "sim_sigma.csv", ("\n".join(sig_lines) + "\n").encode())
    sys.stdout.write(f"wrote {outdir / 'sim_returns.csv'}\n")
    return EXIT_OK


def cmd_fetch(args) -> int:
    points = ingestion.fetch_prices(
        args.endpoint,
        args.symbol,
        date.fromisoformat(args.start),
        date.fromisoformat(args.end),
        cache_dir=args.cache_dir,
    )
    target = ingestion.cache_path(
        args.cache_dir, args.endpoint, args.symbol,
        date.fromisoformat(args.start), date.fromisoformat(args.end),
    )
    sys.stdout.write(f"{len(points)} records cached at {target}\n")
    return EXIT_OK


def cmd_report(args) -> int:
    """Full pipeline: descriptive stats, the four model fits, hard-fork
    refits, dummy-vs-count comparison, and both Welch suites."""
    outdir = Path(args.out)
    panel = _load_panel(args)
    asset_r, index_r = _panel_returns(panel, args.returns)
    calendar = _load_calendar(args)
    hard_calendar = events.filter_hard(calendar)
    clusters = events.classify_clusters(calendar, window_days=args.window)
    regressors = events.build_regressors(calendar, asset_r.dates, policy=args.event_policy)

    artifacts: dict[str, dict] = {}
    failures = []

    def stage(name: str, fn):
        try:
            paths = fn()
        except Exception as exc:  # a failed stage must not sink the rest
            failures.append(name)
            artifacts[name] = {"status": "failed", "error": str(exc)}
            return
        artifacts[name] = {
            "status": "ok",
            "files": {str(p.relative_to(outdir)): _sha256(p) for p in paths},
        }

    def descriptive_stage():
        columns = {"asset": timeseries.describe(asset_r)}
        if index_r is not None:
            columns["index"] = timeseries.describe(index_r)
        payload = {
            "returns_method": args.returns,
            "stats": {k: v.to_dict() for k, v in columns.items()},
        }
        return [_write(outdir / "descriptive.json", _json_bytes(payload))]

    stage("descriptive", descriptive_stage)

    def fit_stage(spec, regs, tag):
        def run():
            result = estimation.fit(
                asset_r.values,
                index_returns=None if index_r is None else index_r.values,
                regressors=regs,
                spec=spec,
            )
            paths = [
                _write(outdir / f"fit_{tag}.json", _json_bytes(result.to_dict())),
                _write(outdir / f"fit_{tag}.txt", (result.to_table() + "\n").encode()),
            ]
            return paths

        return run

    has_index = index_r is not None
    specs = [
        ("mean", False),
        ("variance", False),
    ]
    if has_index:
        specs += [("mean", True), ("variance", True)]
    for dummy_location, with_index in specs:
        spec = egarch.ModelSpec(
            include_index=with_index, dummy_location=dummy_location, nu=args.nu
        )
        stage(f"fit_{spec.slug()}", fit_stage(spec, regressors, spec.slug()))

    # count-regressor alternative for the information-criterion comparison
    count_spec = egarch.ModelSpec(
        include_index=has_index, dummy_location="variance", regressor_kind="count", nu=args.nu
    )
    stage(f"fit_{count_spec.slug()}", fit_stage(count_spec, regressors, count_spec.slug()))

    def ic_stage():
        dummy_slug = egarch.ModelSpec(
            include_index=has_index, dummy_location="variance", nu=args.nu
        ).slug()
        d = json.loads((outdir / f"fit_{dummy_slug}.json").read_text())
        c = json.loads((outdir / f"fit_{count_spec.slug()}.json").read_text())
        comparison = {
            "dummy": d["ic"],
            "count": c["ic"],
            "preferred": {
                k: "dummy" if d["ic"][k] <= c["ic"][k] else "count" for k in d["ic"]
            },
        }
        return [_write(outdir / "ic_comparison.json", _json_bytes(comparison))]

    stage("ic_comparison", ic_stage)

    # hard-fork robustness refits
    if hard_calendar:
        hard_regressors = events.build_regressors(
            hard_calendar, asset_r.dates, policy=args.event_policy
        )
        for dummy_location in ("mean", "variance"):
            spec = egarch.ModelSpec(
                include_index=has_index, dummy_location=dummy_location, nu=args.nu
            )
            tag = f"hard_{spec.slug()}"
            stage(f"fit_{tag}", fit_stage(spec, hard_regressors, tag))

    def welch_stage():
        vol = _volatility_proxy(args, panel, asset_r, index_r)
        mult = grouptests.multiplicity_suite(vol, clusters)
        delayed = grouptests.delayed_effect_suite(vol, clusters, horizon=args.window)
        return [
            _write(outdir / "welch.json", _json_bytes(_welch_payload(mult, delayed))),
            _write(outdir / "welch.csv", _welch_csv(mult, delayed).encode()),
        ]

    stage("welch", welch_stage)

    inputs = {}
    for label, p in (("asset", args.asset), ("index", args.index), ("events", args.events)):
        if p and Path(p).exists():
            inputs[label] = _sha256(Path(p))
    manifest = {
        "inputs": inputs,
        "settings": {
            "returns": args.returns,
            "window": args.window,
            "nu": args.nu,
            "event_policy": args.event_policy,
            "proxy": args.proxy,
        },
        "artifacts": artifacts,
        "failed_stages": sorted(failures),
    }
    _write(outdir / "manifest.json", _json_bytes(manifest))
    sys.stdout.write(f"report written to {outdir} ({len(artifacts)} stages)\n")
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring


def _add_common_io(p, *, need_asset=True):
    p.add_argument("--asset", required=False, help="asset price CSV (date,close)")
    p.add_argument("--index", default=None, help="index price CSV (date,close)")
    p.add_argument("--events", default=None,
                   help="event CSV, or 'bundled' / 'bundled:hard' for the shipped calendars")
    p.add_argument("--returns", choices=("log", "simple"), default="log")
    p.add_argument("--start", default=None, help="restrict sample: first date (ISO)")
    p.add_argument("--end", default=None, help="restrict sample: last date (ISO)")
    p.add_argument("--hard-only", action="store_true", dest="hard_only")
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--nu", type=float, default=5.0)
    p.add_argument("--event-policy", choices=("drop", "next_day"), default="next_day")
    p.add_argument("--out", default="out")
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")


def _add_spec_flags(p):
    p.add_argument("--dummy-location", choices=("none", "mean", "variance"),
                   default="variance", dest="dummy_location")
    p.add_argument("--regressor", choices=("dummy", "count"), default="dummy")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--with-index", action="store_true", dest="with_index", default=False)
    g.add_argument("--no-index", action="store_false", dest="with_index")


def build_parser() -> _Parser:
    parser = _Parser(prog="forkvol", description=__doc__)
    parser.add_argument("--config", default=None, help="flat key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("descriptive", help="descriptive return statistics")
    _add_common_io(p)
    p.set_defaults(func=cmd_descriptive)

    p = sub.add_parser("fit", help="fit one EGARCH event model")
    _add_common_io(p)
    _add_spec_flags(p)
    p.add_argument("--asset-returns", default=None, dest="asset_returns",
                   help="returns CSV (date,value) instead of prices")
    p.add_argument("--index-returns", default=None, dest="index_returns")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("events", help="event calendar summary")
    _add_common_io(p)
    p.set_defaults(func=cmd_events)

    p = sub.add_parser("welch", help="multiplicity and delayed-effect Welch suites")
    _add_common_io(p)
    p.add_argument("--proxy", choices=("egarch", "absreturn"), default="egarch")
    p.set_defaults(func=cmd_welch)

    p = sub.add_parser("simulate", help="simulate the process to CSV")
    _add_common_io(p)
    _add_spec_flags(p)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--omega", type=float, default=-0.2)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=0.9)
    p.add_argument("--delta-mean", type=float, default=None, dest="delta_mean")
    p.add_argument("--delta-var", type=float, default=None, dest="delta_var")
    p.add_argument("--horizon", "-T", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="full analysis report bundle")
    _add_common_io(p)
    p.add_argument("--proxy", choices=("egarch", "absreturn"), default="egarch")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fetch", help="fetch prices from a JSON endpoint into the cache")
    p.add_argument("--endpoint", required=True,
                   help="URL template with {symbol}, {start}, {end} placeholders")
    p.add_argument("--symbol", required=True)
    p.add_argument("--start", required=True)
    p.add_argument("--end", required=True)
    p.add_argument("--cache-dir", default="cache", dest="cache_dir")
    p.set_defaults(func=cmd_fetch)

    return parser


def _apply_config(argv: list[str]) -> list[str]:
    """Insert config-file values as defaults ahead of explicit flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    cfg = _read_config(argv[i + 1])
    # find the subcommand token (first bare word after global flags)
    rest = argv[:i] + argv[i + 2 :]
    if not rest:
        raise UsageError("config given but no subcommand")
    injected = []
    for key, value in cfg.items():
        flag = "--" + key.replace("_", "-")
        if flag in rest:
            continue  # explicit flag wins
        if value.lower() in ("true", "yes", "1") and key in ("hard_only", "with_index"):
            injected.append(flag)
        elif value.lower() in ("false", "no", "0") and key in ("hard_only", "with_index"):
            continue
        else:
            injected += [flag, value]
    return rest[:1] + injected + rest[1:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (ingestion.IngestionError, ValueError) as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return EXIT_INPUT
    except ingestion.FetchError as exc:
        sys.stderr.write(f"fetch error: {exc}\n")
        return EXIT_INPUT
    except estimation.EstimationError as exc:
        sys.stderr.write(f"estimation error: {exc}\n")
        return EXIT_ESTIMATION


def entrypoint():  # console_scripts hook
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
