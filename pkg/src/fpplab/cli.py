"""Command-line driver: sweep configuration, persistence, reporting.

Config files are line-oriented ``key = value`` with ``#`` comments and a
``name:param,param`` distribution mini-grammar.  Data CSVs are byte-stable
(shortest round-trip float format, no timestamps); timestamps live only in
the run manifest.  Exit codes: 0 success, 1 config error, 2 runtime failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .estimators import (
    EstimatorSummary,
    FitResult,
    ReplicaRecord,
    SweepConfig,
    by_n,
    compare_fn_variance,
    fit_chi,
    geodesic_speed_stats,
    geodesic_window_stats,
    influence_map,
    run_sweep,
    sublinearity_profile,
    summarize,
)
from .ineqlab import fpp_exhaustive_check, run_randomized_suite, suite_to_json
from .lattice import Box
from .lpp import fit_center
from .weights import Bernoulli, parse_spec

FPP_POINT_COLS = (
    "n", "replica", "T", "F_n", "g_dag_size", "g_int_size", "geo_len",
    "geo_diam", "transverse_dev", "Y_n", "win2", "win4", "win8",
    "window_grows", "flagged",
)
TORUS_COLS = ("n", "replica", "T", "g_dag_size", "g_int_size", "g_bitmap")
LPP_COLS = ("n", "replica", "T")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# Config grammar
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "model", "d", "n_list", "dist", "replicas", "seed", "kappa", "bootstrap",
    "dyadic_depth", "threads", "record_fn", "record_geometry", "max_grows",
}
_BOOL = {"true": True, "false": False, "1": True, "0": False}


def parse_config(text: str) -> SweepConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value.strip()
    for required in ("model", "d", "n_list", "dist", "replicas", "seed"):
        if required not in raw:
            raise ConfigError(f"missing required key {required!r}")
    try:
        cfg = SweepConfig(
            model=raw["model"],
            d=int(raw["d"]),
            n_list=tuple(int(tok) for tok in raw["n_list"].split(",") if tok.strip()),
            spec=parse_spec(raw["dist"]),
            replicas=int(raw["replicas"]),
            seed=int(raw["seed"]),
            kappa=float(raw.get("kappa", "0.5")),
            bootstrap=int(raw.get("bootstrap", "2000")),
            dyadic_depth=int(raw.get("dyadic_depth", "53")),
            threads=int(raw.get("threads", "0")),
            record_fn=_parse_bool(raw.get("record_fn", "false")),
            record_geometry=_parse_bool(raw.get("record_geometry", "true")),
            max_grows=int(raw.get("max_grows", "6")),
        )
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _parse_bool(tok: str) -> bool:
    if tok.lower() not in _BOOL:
        raise ConfigError(f"expected a boolean, got {tok!r}")
    return _BOOL[tok.lower()]


def load_config(path: str | Path) -> SweepConfig:
    return parse_config(Path(path).read_text())


def serialize_config(cfg: SweepConfig) -> str:
    lines = [
        f"model = {cfg.model}",
        f"d = {cfg.d}",
        "n_list = " + ",".join(str(n) for n in cfg.n_list),
        f"dist = {cfg.spec.serialize()}",
        f"replicas = {cfg.replicas}",
        f"seed = {cfg.seed}",
        f"kappa = {cfg.kappa!r}",
        f"bootstrap = {cfg.bootstrap}",
        f"dyadic_depth = {cfg.dyadic_depth}",
        f"threads = {cfg.threads}",
        f"record_fn = {'true' if cfg.record_fn else 'false'}",
        f"record_geometry = {'true' if cfg.record_geometry else 'false'}",
        f"max_grows = {cfg.max_grows}",
    ]
    return "\n".join(lines) + "\n"


def config_digest(cfg: SweepConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Record persistence
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _record_row(model: str, rec: ReplicaRecord) -> list[str]:
    if model == "lpp":
        return [_fmt(rec.n), _fmt(rec.replica), _fmt(rec.T)]
    if model == "fpp-torus":
        bitmap = (
            np.packbits(rec.g_bitmap).tobytes().hex()
            if rec.g_bitmap is not None
            else ""
        )
        return [
            _fmt(rec.n), _fmt(rec.replica), _fmt(rec.T),
            _fmt(rec.g_dag_size), _fmt(rec.g_int_size), bitmap,
        ]
    win = rec.win_counts or {}
    return [
        _fmt(rec.n), _fmt(rec.replica), _fmt(rec.T), _fmt(rec.F_n),
        _fmt(rec.g_dag_size), _fmt(rec.g_int_size), _fmt(rec.geo_len),
        _fmt(rec.geo_diam), _fmt(rec.transverse_dev), _fmt(rec.Y_n),
        _fmt(win.get(2)), _fmt(win.get(4)), _fmt(win.get(8)),
        _fmt(rec.window_grows), _fmt(rec.flagged),
    ]


def _columns(model: str) -> tuple[str, ...]:
    return {"lpp": LPP_COLS, "fpp-torus": TORUS_COLS, "fpp-point": FPP_POINT_COLS}[model]


def records_to_csv(model: str, records: Sequence[ReplicaRecord]) -> str:
    lines = [",".join(_columns(model))]
    for rec in records:
        lines.append(",".join(_record_row(model, rec)))
    return "\n".join(lines) + "\n"


def _parse_opt(tok: str, kind):
    return None if tok == "" else kind(tok)


def records_from_csv(model: str, text: str, n_edges: Optional[int] = None) -> list[ReplicaRecord]:
    lines = text.strip().splitlines()
    header = tuple(lines[0].split(","))
    if header != _columns(model):
        raise ConfigError(f"unexpected CSV header for model {model}")
    out = []
    for line in lines[1:]:
        tok = line.split(",")
        if model == "lpp":
            out.append(ReplicaRecord(int(tok[0]), int(tok[1]), float(tok[2])))
        elif model == "fpp-torus":
            bitmap = None
            if tok[5]:
                bits = np.unpackbits(np.frombuffer(bytes.fromhex(tok[5]), dtype=np.uint8))
                bitmap = bits[:n_edges].astype(bool) if n_edges else bits.astype(bool)
            out.append(
                ReplicaRecord(
                    int(tok[0]), int(tok[1]), float(tok[2]),
                    g_dag_size=_parse_opt(tok[3], int),
                    g_int_size=_parse_opt(tok[4], int),
                    g_bitmap=bitmap,
                )
            )
        else:
            win = None
            if tok[10] or tok[11] or tok[12]:
                win = {2: int(tok[10]), 4: int(tok[11]), 8: int(tok[12])}
            out.append(
                ReplicaRecord(
                    int(tok[0]), int(tok[1]), float(tok[2]),
                    F_n=_parse_opt(tok[3], float),
                    g_dag_size=_parse_opt(tok[4], int),
                    g_int_size=_parse_opt(tok[5], int),
                    geo_len=_parse_opt(tok[6], int),
                    geo_diam=_parse_opt(tok[7], int),
                    transverse_dev=_parse_opt(tok[8], int),
                    Y_n=_parse_opt(tok[9], float),
                    win_counts=win,
                    window_grows=int(tok[13]),
                    flagged=tok[14] == "1",
                )
            )
    return out


@dataclass
class ResultStore:
    """Directory layout: one records CSV per (model, n), summary and manifest JSON."""

    root: Path

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    def records_path(self, model: str, n: int) -> Path:
        return self.root / f"records_{model}_n{n}.csv"

    def write_records(self, model: str, records: Sequence[ReplicaRecord]) -> list[Path]:
        paths = []
        for n, recs in by_n(records).items():
            path = self.records_path(model, n)
            path.write_text(records_to_csv(model, recs))
            paths.append(path)
        return paths

    def read_records(self, model: str, n_list: Sequence[int], d: int = 2) -> list[ReplicaRecord]:
        out = []
        for n in n_list:
            n_edges = d * n**d if model == "fpp-torus" else None
            text = self.records_path(model, n).read_text()
            out.extend(records_from_csv(model, text, n_edges))
        return out

    def write_summary(self, summary: dict) -> Path:
        path = self.root / "summary.json"
        path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        return path

    def write_manifest(self, manifest: dict) -> Path:
        path = self.root / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path

    def read_manifest(self) -> dict:
        return json.loads((self.root / "manifest.json").read_text())

    def write_plot_manifest(self, lines: Sequence[str]) -> Path:
        path = self.root / "plots.manifest"
        body = "# csv_path,x_column,y_column,scale,reference_curve\n"
        path.write_text(body + "\n".join(lines) + "\n")
        return path


# ---------------------------------------------------------------------------
# Summary building
# ---------------------------------------------------------------------------


def _summary_dict(s: EstimatorSummary) -> dict:
    return {
        "count": s.count,
        "mean": s.mean,
        "variance": s.variance,
        "mean_ci": list(s.mean_ci),
        "var_ci": list(s.var_ci),
        "mean_ci_half": s.mean_ci_half,
        "var_ci_half": s.var_ci_half,
    }


def _fit_dict(f: FitResult) -> dict:
    return {
        "chi_hat": f.chi_hat,
        "chi_stderr": f.chi_stderr,
        "nu_hat": f.nu_hat,
        "sigma_hat": f.sigma_hat,
        "residuals": list(f.residuals),
        "n_values": list(f.n_values),
    }


def build_summary(cfg: SweepConfig, records: Sequence[ReplicaRecord]) -> dict:
    """Aggregate a record stream into the summary JSON structure.

    Pure function of (config, records): regenerating from the stored CSVs
    reproduces the summary byte for byte.
    """
    grouped = by_n(records)
    per_n = {}
    var_pairs = []
    means = {}
    for n, recs in grouped.items():
        ts = [r.T for r in recs]
        entry = {"T": _summary_dict(summarize(ts, cfg.bootstrap))}
        fs = [r.F_n for r in recs if r.F_n is not None]
        if fs:
            entry["F_n"] = _summary_dict(summarize(fs, cfg.bootstrap))
        gs = [r.g_int_size for r in recs if r.g_int_size is not None]
        if gs:
            entry["mean_g_int"] = float(np.mean(gs))
            entry["mean_g_int_over_n"] = float(np.mean(gs)) / n
        gd = [r.g_dag_size for r in recs if r.g_dag_size is not None]
        if gd:
            entry["mean_g_dag"] = float(np.mean(gd))
        ys = [r.Y_n for r in recs if r.Y_n is not None]
        if ys:
            entry["mean_Y"] = float(np.mean(ys))
        grows = [r.window_grows for r in recs]
        entry["mean_window_grows"] = float(np.mean(grows))
        entry["flagged"] = int(sum(r.flagged for r in recs))
        per_n[str(n)] = entry
        if entry["T"]["variance"] > 0:
            var_pairs.append((n, entry["T"]["variance"]))
        means[n] = entry["T"]["mean"]

    out = {
        "schema": "fpplab-summary-v1",
        "tool": "fpplab",
        "model": cfg.model,
        "d": cfg.d,
        "dist": cfg.spec.serialize(),
        "n_list": list(cfg.n_list),
        "replicas": cfg.replicas,
        "seed": cfg.seed,
        "config_digest": config_digest(cfg),
        "per_n": per_n,
    }
    fits = {}
    if len(var_pairs) >= 3:
        fits["chi"] = _fit_dict(fit_chi(var_pairs, means))
        prof = sublinearity_profile(
            {n: summarize([r.T for r in grouped[n]], cfg.bootstrap) for n, _ in var_pairs}
        )
        out["sublinearity"] = {
            "rows": [
                {"n": r.n, "var": r.var, "var_over_n": r.var_over_n,
                 "var_logn_over_n": r.var_logn_over_n}
                for r in prof.rows
            ],
            "var_over_n_nonincreasing": prof.var_over_n_nonincreasing,
            "log_lower_c": prof.log_lower_c,
        }
    if cfg.model == "lpp" and len(means) >= 2:
        fits["center"] = fit_center(means)
    if fits:
        out["fits"] = fits
    if cfg.model == "fpp-torus":
        inf = influence_map(records, cfg.d)
        out["influence"] = {
            str(n): {
                "axis_pvalues": {str(a): p for a, p in im.axis_pvalues.items()},
                "max_frequency": im.max_frequency,
                "mean_g_size": im.mean_g_size,
            }
            for n, im in inf.items()
        }
    if any(r.F_n is not None for r in records) and len(grouped) >= 2:
        cmp_rows = compare_fn_variance(records)
        out["fn_comparison"] = {
            "rows": [
                {"n": n, "var_T": vt, "var_F": vf, "abs_diff": df, "diff_over_n34": rr}
                for n, vt, vf, df, rr in cmp_rows.rows
            ],
            "growth_trend": cmp_rows.growth_trend,
        }
    if any(r.win_counts for r in records):
        out["window_ratios"] = {
            str(n): {str(m): v for m, v in row.items()}
            for n, row in geodesic_window_stats(records).items()
        }
    if any(r.geo_len for r in records):
        out["min_speed"] = {str(n): v for n, v in geodesic_speed_stats(records).items()}
    return out


def plot_manifest_lines(cfg: SweepConfig, store: ResultStore) -> list[str]:
    lines = []
    for n in cfg.n_list:
        path = store.records_path(cfg.model, n).name
        lines.append(f"{path},replica,T,linear,")
    if len(cfg.n_list) >= 2:
        lines.append("summary.json,n,per_n.*.T.variance,loglog,c*n**(2/3)")
        lines.append("summary.json,n,per_n.*.T.variance,loglog,c*n")
        lines.append("summary.json,n,per_n.*.T.variance,loglog,c*n/log(n)")
    return lines


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _run_model_command(cfg: SweepConfig, out_dir: str, threads: Optional[int]) -> int:
    store = ResultStore(Path(out_dir))
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    records = run_sweep(cfg, threads=threads)
    paths = store.write_records(cfg.model, records)
    summary = build_summary(cfg, records)
    sp = store.write_summary(summary)
    pm = store.write_plot_manifest(plot_manifest_lines(cfg, store))
    finished = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    counts = {str(n): len(v) for n, v in by_n(records).items()}
    store.write_manifest(
        {
            "config_digest": config_digest(cfg),
            "config_text": serialize_config(cfg),
            "master_seed": cfg.seed,
            "tool_version": __version__,
            "started_at": started,
            "finished_at": finished,
            "record_counts": counts,
            "files": sorted(p.name for p in [*paths, sp, pm]),
        }
    )
    print(f"wrote {len(records)} records to {store.root}")
    return 0


def _cfg_from_args(args, model: str, overrides: Optional[dict] = None) -> SweepConfig:
    if args.config:
        cfg = load_config(args.config)
        if cfg.model != model:
            raise ConfigError(
                f"config file model {cfg.model!r} does not match subcommand {model!r}"
            )
    else:
        missing = [k for k in ("d", "dist", "n", "replicas", "seed") if getattr(args, k, None) is None]
        if missing:
            raise ConfigError(f"missing flags: {', '.join('--' + m for m in missing)}")
        cfg = SweepConfig(
            model=model,
            d=args.d,
            n_list=tuple(int(t) for t in args.n.split(",")),
            spec=parse_spec(args.dist),
            replicas=args.replicas,
            seed=args.seed,
            kappa=args.kappa,
        )
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def cmd_fpp_run(args) -> int:
    cfg = _cfg_from_args(args, "fpp-point")
    return _run_model_command(cfg, args.out, args.threads)


def cmd_fpp_fn(args) -> int:
    cfg = _cfg_from_args(args, "fpp-point", overrides={"record_fn": True})
    return _run_model_command(cfg, args.out, args.threads)


def cmd_torus_influence(args) -> int:
    cfg = _cfg_from_args(args, "fpp-torus")
    return _run_model_command(cfg, args.out, args.threads)


def cmd_lpp_run(args) -> int:
    cfg = _cfg_from_args(args, "lpp")
    return _run_model_command(cfg, args.out, args.threads)


def cmd_fit_chi(args) -> int:
    data = json.loads(Path(args.input).read_text())
    if "pairs" in data:
        pairs = [(int(n), float(v)) for n, v in data["pairs"]]
    elif "per_n" in data:
        pairs = [
            (int(n), float(entry["T"]["variance"])) for n, entry in data["per_n"].items()
        ]
    else:
        raise ConfigError("input JSON needs 'pairs' or 'per_n'")
    fit = fit_chi(sorted(pairs))
    print(f"chi_hat = {fit.chi_hat:.6f}")
    print(f"chi_stderr = {fit.chi_stderr:.6f}")
    return 0


def cmd_ineq_verify(args) -> int:
    checks = None if args.suite == "all" else tuple(args.suite.split(","))
    reports = run_randomized_suite(args.seed, instances=args.instances, checks=checks)
    payload = json.loads(suite_to_json(reports))
    exhaustive_ok = True
    if args.suite == "all":
        for box, dst in ((Box((0, 0), (1, 1)), (1, 1)), (Box((0, 0), (2, 1)), (2, 1))):
            res = fpp_exhaustive_check(box, Bernoulli(1, 2, 0.5), (0, 0), dst)
            exhaustive_ok &= res.holds
            payload.append(
                {
                    "check": f"fpp_exhaustive_{res.n_edges}_edges",
                    "lhs": res.var_T,
                    "rhs": res.es_bound,
                    "margin": res.es_bound - res.var_T,
                    "holds": res.holds,
                }
            )
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    violations = sum(r.violations for r in reports)
    if violations or not exhaustive_ok:
        print(f"VERIFICATION FAILURE: {violations} violations", file=sys.stderr)
        return 3
    return 0


def cmd_report(args) -> int:
    store = ResultStore(Path(args.store))
    manifest = store.read_manifest()
    cfg = parse_config(manifest["config_text"])
    records = store.read_records(cfg.model, cfg.n_list, cfg.d)
    summary = build_summary(cfg, records)
    store.write_summary(summary)
    store.write_plot_manifest(plot_manifest_lines(cfg, store))
    print(f"regenerated summary for {store.root}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_sweep_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file (overrides individual flags)")
    p.add_argument("--d", type=int, help="lattice dimension")
    p.add_argument("--dist", help="distribution, e.g. uniform:0,1")
    p.add_argument("--n", help="comma-separated sizes, e.g. 16,32,64")
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpplab",
        description="First/last-passage percolation simulation laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fpp = sub.add_parser("fpp", help="point-to-point passage sweeps")
    fpp_sub = fpp.add_subparsers(dest="subcommand", required=True)
    run = fpp_sub.add_parser("run", help="passage-time sweep")
    _add_sweep_flags(run)
    run.set_defaults(func=cmd_fpp_run)
    fn = fpp_sub.add_parser("fn", help="sweep recording the ball-averaged time")
    _add_sweep_flags(fn)
    fn.set_defaults(func=cmd_fpp_fn)

    torus = sub.add_parser("torus", help="torus winding-geodesic sweeps")
    torus_sub = torus.add_subparsers(dest="subcommand", required=True)
    infl = torus_sub.add_parser("influence", help="edge influence map sweep")
    _add_sweep_flags(infl)
    infl.set_defaults(func=cmd_torus_influence)

    lpp = sub.add_parser("lpp", help="last-passage sweeps")
    lpp_sub = lpp.add_subparsers(dest="subcommand", required=True)
    lrun = lpp_sub.add_parser("run", help="last-passage sweep")
    _add_sweep_flags(lrun)
    lrun.set_defaults(func=cmd_lpp_run)

    fit = sub.add_parser("fit", help="exponent fits")
    fit_sub = fit.add_subparsers(dest="subcommand", required=True)
    chi = fit_sub.add_parser("chi", help="fit the variance scaling exponent")
    chi.add_argument("--input", required=True, help="summary JSON or {'pairs': ...}")
    chi.set_defaults(func=cmd_fit_chi)

    ineq = sub.add_parser("ineq", help="inequality verification")
    ineq_sub = ineq.add_subparsers(dest="subcommand", required=True)
    verify = ineq_sub.add_parser("verify", help="run the verification suite")
    verify.add_argument("--suite", default="all")
    verify.add_argument("--seed", type=int, default=7)
    verify.add_argument("--instances", type=int, default=10_000)
    verify.add_argument("--out", help="JSON output path (default stdout)")
    verify.set_defaults(func=cmd_ineq_verify)

    rep = sub.add_parser("report", help="regenerate summary from stored records")
    rep.add_argument("--store", required=True)
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags; map usage problems to the config-error code
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
