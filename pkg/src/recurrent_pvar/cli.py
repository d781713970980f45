"""Command-line front end.

    recurrent-pvar estimate --design observed --subjects s.csv --events e.csv --horizon 3 --out curve.csv
    recurrent-pvar pvar --input step.csv --p 1.5 [--oracle]
    recurrent-pvar simulate --config cfg.json --out dir
    recurrent-pvar study {convergence,asbound,coverage,prop1} --config cfg.json --out dir

Failures print one line ``ERROR <code>: <message>`` to stderr and exit with
that code: 2 bad arguments, 3 file/format errors, 4 risk-set failure,
5 study precondition failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import InputFormatError, RecurrentPvarError
from .estimators import KIND_FOR_DESIGN, estimate
from .process import DESIGNS, read_sample, write_sample
from .pseudo import pseudo_values
from .sim import (
    Scenario,
    StudyConfig,
    as_bound_study,
    convergence_study,
    coverage_and_variance_study,
    generate,
    load_config,
    prop1_study,
)
from .stepfn import BRUTEFORCE_MAX_BREAKPOINTS, StepFunction, pvar, pvar_bruteforce

STUDIES = ("convergence", "asbound", "coverage", "prop1")


class UsageError(RecurrentPvarError):
    exit_code = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(x) -> str:
    """Nine significant digits; integers stay integers."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return "%.9g" % float(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def _input_file(path: str | None, flag: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file() or not os.access(p, os.R_OK):
        raise InputFormatError(f"{flag}: cannot read {path}")
    return p


def _output_file(path: str | None, flag: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    parent = p.parent if str(p.parent) else Path(".")
    if not parent.is_dir():
        raise InputFormatError(f"{flag}: directory {parent} does not exist")
    return p


def _output_dir(path: str) -> Path:
    p = Path(path)
    if p.exists() and not p.is_dir():
        raise InputFormatError(f"--out: {path} is not a directory")
    p.mkdir(parents=True, exist_ok=True)
    return p


def _parse_grid(text: str | None) -> np.ndarray | None:
    if text is None:
        return None
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise UsageError(f"--grid: not a comma-separated list of numbers: {text!r}") from None


# -- estimate -----------------------------------------------------------------


def cmd_estimate(args) -> int:
    subjects = _input_file(args.subjects, "--subjects")
    events = _input_file(args.events, "--events")
    out = _output_file(args.out, "--out")
    pseudo_out = _output_file(args.pseudo_out, "--pseudo-out")
    infl_out = _output_file(args.dump_influence, "--dump-influence")
    if (args.pseudo is None) != (pseudo_out is None):
        raise UsageError("--pseudo and --pseudo-out go together")
    if not (args.horizon > 0 and math.isfinite(args.horizon)):
        raise UsageError("--horizon must be a positive finite time")
    grid = _parse_grid(args.grid)
    if grid is not None:
        if grid.size == 0 or np.any(grid < 0) or np.any(grid > args.horizon) or np.any(np.diff(grid) <= 0):
            raise UsageError("--grid must be strictly increasing within [0, horizon]")

    sample = read_sample(subjects, events, args.design)
    curve = estimate(sample, args.horizon, grid, influence=True)
    _write_csv(
        out,
        ["s", "mu_hat", "k_hat", "var_hat", "se_hat"],
        zip(curve.grid, curve.mu_grid, curve.k_hat_at(curve.grid), curve.variance, curve.se),
    )
    if infl_out is not None:
        rows = (
            (sample.ids[i], s, curve.influence[i, g])
            for i in range(sample.n)
            for g, s in enumerate(curve.grid)
        )
        _write_csv(infl_out, ["id", "s", "influence"], rows)
    print(f"design {args.design}, n={sample.n}, events={sample.event_time.size}, horizon {fmt(args.horizon)}")
    last = -1
    print(f"mu_hat({fmt(curve.grid[last])}) = {fmt(curve.mu_grid[last])} (se {fmt(curve.se[last])})")
    if args.pseudo is not None:
        ps = pseudo_values(sample, args.pseudo, KIND_FOR_DESIGN[args.design])
        zs = ps.z if ps.z is not None else np.full(ps.n, math.nan)
        z = ["" if math.isnan(v) else fmt(v) for v in zs]
        _write_csv(pseudo_out, ["id", "z", "pseudo"], zip(ps.ids, z, ps.values))
        print(f"pseudo-values at t={fmt(ps.t)}: mean {fmt(np.mean(ps.values))}, mu_hat {fmt(ps.full_estimate)}")
    return 0


# -- pvar -----------------------------------------------------------------------


def read_step_csv(path) -> StepFunction:
    """``time,value`` rows; the first row ``0,<initial value>``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows or [c.strip() for c in rows[0]] != ["time", "value"]:
        raise InputFormatError(f"{path}: expected header time,value")
    body = rows[1:]
    if not body:
        raise InputFormatError(f"{path}: no rows")
    try:
        data = np.array([[float(a), float(b)] for a, b in body])
    except ValueError:
        raise InputFormatError(f"{path}: rows must be two numbers") from None
    if data[0, 0] != 0.0:
        raise InputFormatError(f"{path}: first row must be 0,<initial value>")
    times, values = data[1:, 0], data[1:, 1]
    if not np.all(np.isfinite(data)):
        raise InputFormatError(f"{path}: values must be finite")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise InputFormatError(f"{path}: times must be strictly increasing")
    return StepFunction.from_levels(times, values, data[0, 1])


def cmd_pvar(args) -> int:
    path = _input_file(args.input, "--input")
    if not args.p >= 1.0:
        raise UsageError("--p must be >= 1")
    f = read_step_csv(path)
    res = pvar(f, args.p)
    print(f"p {fmt(res.p)}")
    print(f"v_p {fmt(res.v_p)}")
    print(f"seminorm {fmt(res.seminorm_p)}")
    print(f"sup {fmt(res.sup_norm)}")
    print(f"norm {fmt(res.norm_p)}")
    print("partition " + " ".join(fmt(t) for t in res.partition))
    if args.oracle:
        if len(f) > BRUTEFORCE_MAX_BREAKPOINTS:
            raise UsageError(f"--oracle supports at most {BRUTEFORCE_MAX_BREAKPOINTS} breakpoints")
        ref = pvar_bruteforce(f, args.p)
        agree = abs(ref.v_p - res.v_p) <= 1e-12 * max(1.0, abs(ref.v_p))
        print(f"oracle v_p {fmt(ref.v_p)} {'agree' if agree else 'DISAGREE'}")
        if not agree:
            raise RecurrentPvarError("dynamic program and brute force disagree")
    return 0


# -- simulate -------------------------------------------------------------------


def _with_seed(cfg: StudyConfig, seed: int | None) -> StudyConfig:
    return cfg if seed is None else replace(cfg, seed=seed)


def cmd_simulate(args) -> int:
    cfg = _with_seed(load_config(_input_file(args.config, "--config")), args.seed)
    out = _output_dir(args.out)
    sample, latent = generate(Scenario(cfg.truth, cfg.n, cfg.seed, cfg.design))
    write_sample(sample, out / "subjects.csv", out / "events.csv")
    ids = sample.ids
    with open(out / "latent.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "c", "t", "z"])
        for i in range(latent.n):
            z = "" if latent.z is None else repr(float(latent.z[i]))
            w.writerow([ids[i], repr(float(latent.c[i])), repr(float(latent.t[i])), z])
    with open(out / "latent_events.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "time"])
        for o, t in zip(latent.event_owner, latent.event_time):
            w.writerow([ids[o], repr(float(t))])
    print(f"simulated n={sample.n}, design {cfg.design}, events observed {sample.event_time.size} "
          f"of {latent.event_time.size}; wrote {out}")
    return 0


# -- study ----------------------------------------------------------------------


def cmd_study(args) -> int:
    cfg = _with_seed(load_config(_input_file(args.config, "--config")), args.seed)
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    out = _output_dir(args.out)
    if args.kind == "convergence":
        rep = convergence_study(cfg.truth, cfg.p, cfg.n_list, cfg.B, cfg.seed, threads=args.threads, with_prop1=True)
        _write_rate(out / "convergence.csv", rep)
        _write_rate(out / "prop1.csv", rep.prop1)
        summary = rep.summary()
    elif args.kind == "prop1":
        rep = prop1_study(cfg.p, cfg.n_list, cfg.B, cfg.seed, threads=args.threads)
        _write_rate(out / "prop1.csv", rep)
        summary = rep.summary()
    elif args.kind == "asbound":
        rep = as_bound_study(cfg.truth, cfg.p, cfg.n_max, cfg.seed, burn_in=cfg.burn_in, stride=cfg.stride)
        _write_csv(out / "asbound.csv", ["n", "r_n"], zip(rep.n_values, rep.scaled))
        summary = rep.summary()
    else:
        rep = coverage_and_variance_study(cfg.truth, cfg.design, cfg.t, cfg.n, cfg.B, cfg.seed, threads=args.threads)
        cols = ["rep", "design", "mu_hat", "var_hat", "lower", "upper", "covered"]
        _write_csv(out / "coverage_replications.csv", cols,
                   ([r[c] if c != "covered" else str(r[c]) for c in cols] for r in rep.replications))
        _write_csv(
            out / "coverage_summary.csv",
            ["design", "coverage", "mean_plugin_var", "empirical_var", "var_ratio", "oracle_var", "failures"],
            ([d.design, d.coverage, d.mean_plugin_var, d.empirical_var, d.var_ratio,
              "" if d.oracle_var is None else fmt(d.oracle_var), d.failures] for d in rep.designs.values()),
        )
        summary = rep.summary()
    (out / "summary.txt").write_text(summary + "\n", encoding="utf-8")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=1, default=str) + "\n",
                                      encoding="utf-8")
    print(summary)
    return 0


def _write_rate(path: Path, rep) -> None:
    _write_csv(path, ["n", "mean", "se"], ((r["n"], r["mean"], r["se"]) for r in rep.rows()))


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="recurrent-pvar", description="IPCW mean functions and p-variation diagnostics.")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    e = sub.add_parser("estimate", help="estimate the mean function from data files")
    e.add_argument("--design", choices=DESIGNS, required=True)
    e.add_argument("--subjects", required=True)
    e.add_argument("--events", required=True)
    e.add_argument("--horizon", type=float, required=True)
    e.add_argument("--grid", help="comma-separated evaluation times")
    e.add_argument("--out", required=True)
    e.add_argument("--pseudo", type=float, metavar="T", help="also compute pseudo-values at T")
    e.add_argument("--pseudo-out")
    e.add_argument("--dump-influence", metavar="FILE")
    e.set_defaults(func=cmd_estimate)

    p = sub.add_parser("pvar", help="p-variation of a step function")
    p.add_argument("--input", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--oracle", action="store_true", help="cross-check by brute force")
    p.set_defaults(func=cmd_pvar)

    s = sub.add_parser("simulate", help="simulate one scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    st = sub.add_parser("study", help="run a Monte Carlo study")
    st.add_argument("kind", choices=STUDIES)
    st.add_argument("--config", required=True)
    st.add_argument("--out", required=True)
    st.add_argument("--seed", type=int)
    st.add_argument("--threads", type=int, default=1)
    st.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except RecurrentPvarError as exc:
        code, msg = exc.exit_code, str(exc)
    except ValueError as exc:
        code, msg = 2, str(exc)
    except OSError as exc:
        code, msg = 3, f"{exc.filename or ''}: {exc.strerror}".lstrip(": ")
    print(f"ERROR {code}: {' '.join(msg.split())}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
