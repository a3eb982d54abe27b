"""Command-line front end: ``movingclt <subcommand> [flags]``.

Every run writes ``report.csv`` and ``report.json`` into ``--out``; some
subcommands add plot-ready CSV dumps next to them.  Values resolve as
defaults < ``--config`` JSON file < flags.

Exit codes: 0 success, 2 usage or schema error, 3 precondition error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .conditions import (ConditionReport, TREND_FACTOR, block_hypotheses, domination_check,
                         hc_statistic, independent_conditions, scaling_ratio, trend_ratio)
from .errors import ModelSchemaError, PreconditionError
from .model import SequenceModel, gen_path, load_model, model_to_dict
from .ruin import ruin_probability, load_scenario, scenario_to_dict
from .sums import Window, block_increments, make_block_scheme, window_variance
from .weakconv import (DEFAULT_CF_GRID, cf_slack, cvm_to_normal, ecf, fdd_covariance_check,
                       fdd_ensemble, ks_cutoff, ks_to_normal, mc_normalized_sums, newman_verify)

SUBCOMMANDS = ("generate", "variance", "conditions", "clt", "fdd", "newman", "ruin")

EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION, EXIT_IO = 0, 2, 3, 4

DEFAULTS: dict[str, Any] = {
    "model": None,
    "n": 1024,
    "p": 0,
    "ell": "cuberoot",
    "delta": 1.0,
    "eps": 0.5,
    "grid": [0.25, 0.5, 1.0],
    "R": 2000,
    "seed": 0,
    "out": "out",
    "workers": 1,
    "mode": "exact",
    "fdd_tol": 0.05,
}

# config-file key -> parser applied to its value
_TYPES = {"n": int, "p": int, "R": int, "seed": int, "workers": int,
          "delta": float, "eps": float, "fdd_tol": float}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser that fails with one diagnostic line and exit status 2."""

    def error(self, message):
        valid = ", ".join(SUBCOMMANDS)
        if "invalid choice" in message and "argument command" in message:
            bad = message.split("invalid choice:", 1)[1].split("(", 1)[0].strip()
            message = f"unknown subcommand {bad}; valid subcommands: {valid}"
        elif "required: command" in message:
            message = f"missing subcommand; valid subcommands: {valid}"
        self.exit(EXIT_USAGE, f"{self.prog}: error: {' '.join(message.split())}\n")


def _grid(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}: expected a comma-separated list of reals")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed {v} is not an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of defaults; flags override it")
    common.add_argument("--model", help="model file (for 'ruin': scenario file)")
    common.add_argument("--n", type=int, help="window length")
    common.add_argument("--p", type=int, help="window offset p(n)")
    common.add_argument("--ell", help="block length: integer or cuberoot|sqrt|power:a")
    common.add_argument("--delta", type=float)
    common.add_argument("--eps", type=float)
    common.add_argument("--grid", type=_grid, help="comma-separated time grid in (0, 1]")
    common.add_argument("--R", type=int, help="Monte-Carlo replicates")
    common.add_argument("--seed", type=_u64)
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="worker threads (results do not depend on it)")
    common.add_argument("--mode", choices=("exact", "monte-carlo"), help="variance mode")

    parser = _Parser(prog="movingclt", description="Moving partial sums: simulation and checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command",
                                parser_class=_Parser)
    helps = {
        "generate": "one sample path and its block increments",
        "variance": "s'_n^2 exactly or by Monte Carlo",
        "conditions": "Lindeberg/Lyapounov/UAN, block hypotheses and domination ledger",
        "clt": "KS / CvM / characteristic-function checks of S'_n / s'_n",
        "fdd": "finite-dimensional covariance of Y_n(t) against a(t_j) ^ a(t_h)",
        "newman": "Newman's inequality on the window indices",
        "ruin": "ruin probability by exact simulation and Brownian approximation",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc.strerror}") from None
        try:
            file_cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelSchemaError(f"{args.config}: line {exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(file_cfg, dict):
            raise ModelSchemaError(f"{args.config}: expected a JSON object")
        for key, value in file_cfg.items():
            if key not in DEFAULTS:
                raise ModelSchemaError(f"{args.config}: unknown config key {key!r}")
            try:
                if key == "grid":
                    value = _grid(",".join(str(x) for x in value)) if isinstance(value, list) else _grid(value)
                elif key in _TYPES:
                    if isinstance(value, bool):
                        raise ValueError
                    value = _TYPES[key](value)
            except (ValueError, TypeError, argparse.ArgumentTypeError):
                raise ModelSchemaError(f"{args.config}: config key {key!r}: invalid value {value!r}") from None
            if key == "model" and value is not None and not Path(value).is_absolute():
                value = str(Path(args.config).parent / value)
            cfg[key] = value
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    cfg["ell"] = str(cfg["ell"])
    if not 0 <= cfg["seed"] < 2**64:
        raise ModelSchemaError(f"seed {cfg['seed']} is not an unsigned 64-bit integer")
    if cfg["workers"] < 1:
        raise PreconditionError("workers must be >= 1")
    cfg["command"] = args.command
    return cfg


# ---------------------------------------------------------------------------
# report plumbing


@dataclass(frozen=True)
class Row:
    statistic: str
    value: float
    threshold: Optional[float] = None
    stderr: float = 0.0

    @property
    def verdict(self) -> str:
        if self.threshold is None:
            return "info"
        return "pass" if self.value <= self.threshold else "fail"


def _f(x) -> str:
    return "" if x is None else format(float(x), ".17g")


def rows_to_csv(rows: Sequence[Row]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(("statistic", "value", "stderr", "threshold", "verdict"))
    for r in rows:
        w.writerow((r.statistic, _f(r.value), _f(r.stderr), _f(r.threshold), r.verdict))
    return buf.getvalue()


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


@dataclass
class Outcome:
    csv: str
    results: list[dict]
    extra_files: dict[str, str]
    notes: list[str]
    subject: dict[str, Any]


def _rows_outcome(rows, subject, extra=None, notes=()) -> Outcome:
    results = [{"statistic": r.statistic, "value": float(r.value), "stderr": float(r.stderr),
                "threshold": r.threshold, "verdict": r.verdict} for r in rows]
    return Outcome(rows_to_csv(rows), results, extra or {}, list(notes), subject)


def _need_model(cfg) -> SequenceModel:
    if not cfg["model"]:
        raise UsageError("--model is required")
    return load_model(cfg["model"])


def _window(cfg) -> Window:
    if cfg["n"] < 1:
        raise PreconditionError("n must be >= 1")
    return Window(cfg["p"], cfg["n"])


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(cfg) -> Outcome:
    model = _need_model(cfg)
    w = _window(cfg)
    scheme = make_block_scheme(w.n, cfg["ell"])
    path = gen_path(model, w.p, w.n, cfg["seed"])
    inc = block_increments(path, w, scheme)
    buf = io.StringIO()
    cw = csv.writer(buf)
    cw.writerow(("k", "x"))
    for k, x in zip(range(path.first, path.last + 1), path.values):
        cw.writerow((k, _f(x)))
    bbuf = io.StringIO()
    bw = csv.writer(bbuf)
    bw.writerow(("j", "y"))
    for j, y in enumerate(inc.values, start=1):
        bw.writerow((j, _f(y)))
    rows = [Row("moving_sum", float(np.sum(path.values))), Row("remainder", inc.remainder),
            Row("ell", scheme.ell), Row("m", scheme.m), Row("r", scheme.r)]
    return _rows_outcome(rows, {"model": model_to_dict(model)},
                         {"path.csv": buf.getvalue(), "blocks.csv": bbuf.getvalue()})


def cmd_variance(cfg) -> Outcome:
    model = _need_model(cfg)
    w = _window(cfg)
    rows = [Row("s2_exact", float(window_variance(model, w)))]
    if cfg["mode"] == "monte-carlo":
        est = window_variance(model, w, "monte-carlo", cfg["R"], cfg["seed"], cfg["workers"])
        rows.append(Row("s2_monte_carlo", float(est), stderr=est.stderr))
        rows.append(Row("abs_error", abs(float(est) - rows[0].value), 3 * est.stderr))
    return _rows_outcome(rows, {"model": model_to_dict(model)})


def cmd_conditions(cfg) -> Outcome:
    model = _need_model(cfg)
    w = _window(cfg)
    delta, eps, seed = cfg["delta"], cfg["eps"], cfg["seed"]
    rep = independent_conditions(model, w, delta, eps, seed=seed)
    # same statistics at 4n: each must at least halve for a vanishing trend
    w4 = Window(cfg["p"], 4 * w.n)
    rep4 = independent_conditions(model, w4, delta, eps, seed=seed)
    trend = ConditionReport()
    for name in ("lyapounov", "lindeberg", "uan"):
        trend.add(f"{name}:trend", trend_ratio(rep[name], rep4[name]), TREND_FACTOR, n=w.n)
    rep.extend(trend)
    scheme = make_block_scheme(w.n, cfg["ell"])
    rep.extend(block_hypotheses(model, w, scheme))
    rep.add("C2", hc_statistic(model, w, scheme, delta, seed=seed), None,
            n=w.n, ell=scheme.ell, delta=delta)
    dom = domination_check(model, w, scheme, delta, eps, seed=seed)
    for c in dom.checks:
        rep.add(c.name, c.lhs, c.rhs, n=w.n, ell=scheme.ell, delta=delta, eps=eps)
    return Outcome(rep.to_csv(), rep.to_dict(), {}, [], {"model": model_to_dict(model)})


def cmd_clt(cfg) -> Outcome:
    model = _need_model(cfg)
    w = _window(cfg)
    ens = mc_normalized_sums(model, w, cfg["R"], cfg["seed"], cfg["workers"])
    pts = np.asarray(DEFAULT_CF_GRID)
    psi = ecf(ens, pts).values
    cf_gap = float(np.max(np.abs(psi - np.exp(-0.5 * pts**2))))
    rows = [Row("ks", ks_to_normal(ens), ks_cutoff(ens.R)),
            Row("cvm", cvm_to_normal(ens)),
            Row("cf_gap", cf_gap, cf_slack(ens.R))]
    return _rows_outcome(rows, {"model": model_to_dict(model)}, {"ensemble.csv": ens.to_csv()})


def cmd_fdd(cfg) -> Outcome:
    model = _need_model(cfg)
    n, grid = cfg["n"], cfg["grid"]
    ens = fdd_ensemble(model, n, grid, cfg["R"], cfg["seed"], cfg["workers"])
    a = scaling_ratio(model, n, grid)
    chk = fdd_covariance_check(ens, a)
    rows = [Row(f"a({t:g})", v) for t, v in zip(a.grid, a.values)]
    k = len(grid)
    rows += [Row(f"E[Y({grid[j]:g})Y({grid[h]:g})]", chk.empirical[j, h])
             for j in range(k) for h in range(j, k)]
    rows.append(Row("max_deviation", chk.max_deviation, cfg["fdd_tol"]))
    notes = [f"target a(t_j) ^ a(t_h) with a(t) = s_[nt]^2 / s_n^2 at n = {n}"]
    return _rows_outcome(rows, {"model": model_to_dict(model)}, {"ensemble.csv": ens.to_csv()}, notes)


def cmd_newman(cfg) -> Outcome:
    model = _need_model(cfg)
    w = _window(cfg)
    rep = newman_verify(model, range(w.first, w.last + 1), R=cfg["R"], seed=cfg["seed"],
                        workers=cfg["workers"])
    rows = []
    for i, t in enumerate(rep.points):
        label = f"t={t[0]:g}" if np.all(t == t[0]) else "t=(" + ",".join(f"{x:g}" for x in t) + ")"
        rows.append(Row(f"gap[{label}]", rep.gap[i], rep.bound[i] + rep.slack))
        if rep.exact_gap is not None:
            rows.append(Row(f"exact_gap[{label}]", rep.exact_gap[i], rep.bound[i]))
    notes = [f"verdict allows Monte-Carlo slack {rep.slack:.17g} above the bound"]
    return _rows_outcome(rows, {"model": model_to_dict(model), "indices": list(rep.indices)}, notes=notes)


def cmd_ruin(cfg) -> Outcome:
    if not cfg["model"]:
        raise UsageError("--model (scenario file) is required")
    sm, horizon = load_scenario(cfg["model"])
    exact = ruin_probability(sm, horizon, cfg["R"], cfg["seed"], "exact-sim")
    approx = ruin_probability(sm, horizon, cfg["R"], cfg["seed"], "brownian-approx")
    rows = [Row("ruin_exact_sim", float(exact), stderr=exact.stderr),
            Row("ruin_brownian_approx", float(approx), stderr=approx.stderr),
            Row("abs_difference", abs(float(exact) - float(approx)))]
    notes = ["claims are centered internally; the claim mean is carried as deterministic drift",
             "the Brownian approximation carries no error bound beyond Monte-Carlo error"]
    return _rows_outcome(rows, {"scenario": scenario_to_dict(sm, horizon)}, notes=notes)


COMMANDS = {"generate": cmd_generate, "variance": cmd_variance, "conditions": cmd_conditions,
            "clt": cmd_clt, "fdd": cmd_fdd, "newman": cmd_newman, "ruin": cmd_ruin}


def run(cfg: dict[str, Any]) -> Path:
    """Execute a resolved config and write its reports; returns the output directory."""
    out = COMMANDS[cfg["command"]](cfg)
    body = {"command": cfg["command"], "config": {k: cfg[k] for k in sorted(cfg)},
            **out.subject, "results": out.results, "notes": out.notes}
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    files = {"report.csv": out.csv,
             "report.json": json.dumps(_json_safe(body), indent=2, sort_keys=True) + "\n",
             **out.extra_files}
    for name, text in files.items():
        with open(outdir / name, "w", newline="") as fh:
            fh.write(text)
    return outdir


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        outdir = run(cfg)
    except UsageError as exc:
        print(f"movingclt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelSchemaError as exc:
        print(f"movingclt {args.command}: schema error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PreconditionError as exc:
        print(f"movingclt {args.command}: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"movingclt {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{args.command}: wrote {outdir / 'report.csv'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
