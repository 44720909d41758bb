"""Command-line interface: ``bexdep test | simulate | klproject``.

Reports go to standard output as JSON, logs to standard error.  Exit codes:
0 success, 2 input or configuration error, 3 internal error.  A rejected
null hypothesis is reported in the JSON, never through the exit code.
"""

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import InputError, RankError

log = logging.getLogger("bexdep")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3


@dataclasses.dataclass
class RunConfig:
    method: str = "multifit"
    alpha: float = 0.05
    r_max: int = 4
    d_max: int = 4
    mode: str = "exhaustive"
    min_count: int = 16
    m: int = 30
    seed: int = 0
    correction: str = "bonferroni"
    kl_k: int = None
    kl_energy: float = None
    threads: int = 0

    def validate(self):
        if self.method not in ("multifit", "beret", "bet"):
            raise InputError(f"method must be multifit, beret or bet, not {self.method!r}")
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must lie in (0, 1)")
        if self.r_max < 0 or self.r_max > 12:
            raise InputError("r_max must lie in [0, 12]")
        if self.d_max < 1 or self.d_max > 12:
            raise InputError("d_max must lie in [1, 12]")
        if self.mode not in ("exhaustive", "adaptive"):
            raise InputError("mode must be exhaustive or adaptive")
        if self.min_count < 0:
            raise InputError("min_count must be non-negative")
        if self.m < 1:
            raise InputError("m must be at least 1")
        if self.correction not in ("bonferroni", "holm"):
            raise InputError("correction must be bonferroni or holm")
        if self.kl_k is not None and self.kl_k < 1:
            raise InputError("kl_k must be at least 1")
        if self.kl_energy is not None and not 0.0 < self.kl_energy <= 1.0:
            raise InputError("kl_energy must lie in (0, 1]")
        return self

    def echo(self):
        out = dataclasses.asdict(self)
        out.pop("threads")
        return out


CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_CASTS = {"method": str, "mode": str, "correction": str, "alpha": float, "kl_energy": float}


def _cast(key, value):
    cast = _CASTS.get(key, int)
    try:
        return cast(value)
    except ValueError:
        raise InputError(f"config key {key!r}: cannot parse {value!r}") from None


def read_config_file(path):
    """``key = value`` lines; ``#`` starts a comment.  Unknown keys are errors."""
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}: line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in CONFIG_FIELDS:
                raise InputError(f"{path}: line {lineno}: unknown config key {key!r}")
            out[key] = _cast(key, value)
    return out


def build_config(args):
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in CONFIG_FIELDS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return RunConfig(**values).validate()


# --------------------------------------------------------------------------
# CSV input


def read_matrix_csv(path):
    """Header row, then ``n`` numeric rows.  Returns ``(header, array)``."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise InputError(f"{path}: empty file")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}"
                )
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise InputError(f"{path}: row {lineno} has a non-numeric cell") from None
    if not rows:
        raise InputError(f"{path}: no data rows")
    arr = np.array(rows)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{path}: non-finite value")
    return header, arr


def write_matrix_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _dump(obj):
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


# --------------------------------------------------------------------------
# commands


def cmd_test(args):
    from .beret import bet_test, beret_test, projection_points
    from .kl import FunctionalReport, project, read_curves_csv
    from .multifit import multifit_test

    cfg = build_config(args)
    start = time.perf_counter()

    def load(path, functional):
        if functional:
            return read_curves_csv(path)
        return read_matrix_csv(path)[1]

    X_in = load(args.x, args.functional_x)
    Y_in = load(args.y, args.functional_y)
    X, kx = project(X_in, cfg.kl_k, cfg.kl_energy)
    Y, ky = project(Y_in, cfg.kl_k, cfg.kl_energy)

    if cfg.method == "multifit":
        rep = multifit_test(
            X, Y, r_max=cfg.r_max, alpha=cfg.alpha, mode=cfg.mode,
            min_count=cfg.min_count, correction=cfg.correction,
        )
    elif cfg.method == "beret":
        rep = beret_test(X, Y, m=cfg.m, d_max=cfg.d_max, alpha=cfg.alpha, seed=cfg.seed, correction=cfg.correction)
    else:
        rep = bet_test(X, Y, d_max=cfg.d_max, alpha=cfg.alpha, correction=cfg.correction)

    if args.points_out:
        if cfg.method == "multifit":
            raise InputError("--points-out is available for beret and bet only")
        pts = projection_points(X, Y, rep)
        write_matrix_csv(
            args.points_out,
            ["s_x", "t_y", "region"],
            [[repr(float(u)), repr(float(v)), int(s)] for u, v, s in pts],
        )

    body = (FunctionalReport(rep, kx, ky) if (kx or ky) else rep).to_dict(full=args.full)
    out = {"schema_version": SCHEMA_VERSION, **body, "method": cfg.method, "config": cfg.echo()}
    elapsed = time.perf_counter() - start
    if args.timing:
        out["wall_time_s"] = elapsed
    log.info("%s on n=%d: global_p=%.3g (%.3fs)", cfg.method, X.shape[0], rep.global_p, elapsed)
    sys.stdout.write(_dump(out))
    return EXIT_OK


def _parse_list(text, allowed, what):
    items = [s.strip() for s in text.split(",") if s.strip()]
    for it in items:
        if it not in allowed:
            raise InputError(f"unknown {what} {it!r}; choose from {', '.join(allowed)}")
    return items


def cmd_simulate(args):
    from . import sim

    cfg = build_config(args)
    if args.reps < 1:
        raise InputError("--reps must be at least 1")
    scen_text = ",".join(sim.SHAPES) if args.scenario == "all" else args.scenario
    scenarios = _parse_list(scen_text, sim.SCENARIOS, "scenario")
    placements = list(sim.PLACEMENTS) if args.placement == "both" else _parse_list(args.placement, sim.PLACEMENTS, "placement")
    methods = _parse_list(args.methods, tuple(sim.METHODS), "method")
    try:
        dims = tuple(int(v) for v in args.dims.split(","))
        levels = [float(v) if "." in v else int(v) for v in args.levels.split(",")]
    except ValueError:
        raise InputError("--dims and --levels take comma-separated numbers") from None
    if len(dims) != 2:
        raise InputError("--dims takes two integers p,q")

    params = {
        "multifit": (("r_max", cfg.r_max), ("min_count", cfg.min_count)),
        "beret": (("m", cfg.m), ("d_max", cfg.d_max)),
    }
    os.makedirs(args.out, exist_ok=True)
    threads = sim.resolve_threads(cfg.threads)
    written = []
    for method in methods:
        meth = sim.Method(method, params[method])
        for placement in placements:
            curves = []
            for name in scenarios:
                spec = sim.ScenarioSpec(name, placement, dims, args.n, levels[0], cfg.seed)
                curves.append(
                    sim.estimate_power(meth, spec, levels, args.reps, cfg.alpha, cfg.seed, threads)
                )
                log.info("%s/%s/%s done", method, placement, name)
            path = os.path.join(args.out, f"power_{method}_{placement}.csv")
            sim.write_power_csv(path, curves)
            written.append(path)
    sys.stdout.write(_dump({"schema_version": SCHEMA_VERSION, "files": written, "config": cfg.echo()}))
    return EXIT_OK


def cmd_klproject(args):
    from .kl import choose_k, kl_fit, kl_scores, read_curves_csv, write_scores_csv

    if (args.k is None) == (args.energy is None):
        raise InputError("give exactly one of --k and --energy")
    cs = read_curves_csv(args.curves)
    k = args.k if args.k is not None else choose_k(cs, args.energy)
    model = kl_fit(cs, k)
    os.makedirs(args.out, exist_ok=True)
    write_scores_csv(os.path.join(args.out, "scores.csv"), kl_scores(cs, model))
    summary = {"schema_version": SCHEMA_VERSION, "n": cs.n, "grid_points": len(cs.grid), **model.summary()}
    text = _dump(summary)
    with open(os.path.join(args.out, "kl_summary.json"), "w") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _add_config_flags(p):
    p.add_argument("--config", help="file of 'key = value' lines (flags override it)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--r-max", dest="r_max", type=int, help="MultiFIT maximal resolution (default 4)")
    p.add_argument("--d-max", dest="d_max", type=int, help="BET/BERET depth (default 4)")
    p.add_argument("--mode", choices=("exhaustive", "adaptive"))
    p.add_argument("--min-count", dest="min_count", type=int)
    p.add_argument("--m", type=int, help="BERET projection count (default 30)")
    p.add_argument("--seed", type=int)
    p.add_argument("--correction", choices=("bonferroni", "holm"))
    p.add_argument("--threads", type=int, help="worker cap (default: all cores)")


def build_parser():
    ap = argparse.ArgumentParser(prog="bexdep", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"bexdep {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test independence of two CSV samples")
    t.add_argument("x")
    t.add_argument("y")
    t.add_argument("--method", choices=("multifit", "beret", "bet"))
    _add_config_flags(t)
    t.add_argument("--kl-k", dest="kl_k", type=int, help="KL truncation for functional inputs")
    t.add_argument("--kl-energy", dest="kl_energy", type=float, help="choose k by energy fraction")
    t.add_argument("--functional-x", action="store_true", help="x is a curve-set CSV")
    t.add_argument("--functional-y", action="store_true", help="y is a curve-set CSV")
    t.add_argument("--full", action="store_true", help="include every test in the report")
    t.add_argument("--points-out", help="BERET: write projected points and regions to CSV")
    t.add_argument("--timing", action="store_true", help="add wall time to the report")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="Monte Carlo power curves")
    s.add_argument("--scenario", default="all", help="comma list, 'all' or 'null'")
    s.add_argument("--placement", default="marginal", help="marginal, spread or both")
    s.add_argument("--methods", default="multifit,beret")
    s.add_argument("--reps", type=int, default=200)
    s.add_argument("--n", type=int, default=128)
    s.add_argument("--dims", default="2,2")
    s.add_argument("--levels", default=",".join(str(v) for v in range(1, 21)))
    s.add_argument("--out", required=True, help="output directory")
    _add_config_flags(s)
    s.set_defaults(func=cmd_simulate)

    k = sub.add_parser("klproject", help="Karhunen-Loeve scores of a curve-set CSV")
    k.add_argument("curves")
    k.add_argument("--k", type=int)
    k.add_argument("--energy", type=float)
    k.add_argument("--out", required=True, help="output directory")
    k.set_defaults(func=cmd_klproject)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except RankError as exc:
        print(f"bexdep: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"bexdep: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
