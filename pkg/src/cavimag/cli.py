"""Command-line front end: ``cavimag run|sweep|dicke-bench|validate-ovf``."""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .benchmark import format_report, run_dicke_bench
from .config import build_engine, load_config, sweep_factory
from .errors import CavimagError
from .integrator import run
from .ovf import OvfError, read_ovf

log = logging.getLogger("cavimag")
# summary lines go to the log file only; the console gets them via print
summary_log = logging.getLogger("cavimag.summary")
summary_log.propagate = False

THREADS_ENV = "CAVIMAG_THREADS"


def _threads(arg: int | None) -> int:
    if arg is not None:
        n = arg
    else:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            n = int(raw)
        except ValueError:
            raise CavimagError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if n < 1:
        raise CavimagError(f"thread count must be >= 1, got {n}")
    return n


def _setup_logging(quiet: bool, logfile: Path | None = None) -> None:
    root = logging.getLogger()
    for h in list(root.handlers):
        root.removeHandler(h)
        h.close()
    root.setLevel(logging.INFO)
    fmt = logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.ERROR if quiet else logging.INFO)
    console.setFormatter(fmt)
    root.addHandler(console)
    for h in list(summary_log.handlers):
        summary_log.removeHandler(h)
        h.close()
    if logfile is not None:
        fh = logging.FileHandler(logfile, mode="w", encoding="utf-8")
        fh.setFormatter(fmt)
        root.addHandler(fh)
        summary_log.addHandler(fh)


def _iso(ts: float) -> str:
    return _dt.datetime.fromtimestamp(ts, tz=_dt.timezone.utc).isoformat(timespec="milliseconds")


def _emit_summary(path: Path, lines: list[str], quiet: bool) -> None:
    text = "\n".join(lines) + "\n"
    path.write_text(text, encoding="utf-8")
    for line in lines:
        summary_log.info("%s", line)
    if not quiet:
        print(text, end="")


def _prepare(args) -> tuple:
    if args.config is None:
        raise CavimagError("--config is required")
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _setup_logging(args.quiet, out / cfg.get("output", "log"))
    return cfg, out, _threads(args.threads)


def cmd_run(args) -> int:
    cfg, out, threads = _prepare(args)
    engine = build_engine(cfg, threads=threads)
    series = run(engine, cfg.run_config)
    table = out / cfg.get("output", "table")
    series.write_csv(table)
    s = series.summary
    lines = ["command: run", f"config: {args.config}", *cfg.echo(),
             f"threads: {threads}",
             f"steps: {s['steps']}",
             f"records: {s['records']}",
             f"t_end: {s['t_end']!r}",
             f"norm_drift: {s['norm_drift']:.3e}",
             f"wall_start: {_iso(s['wall_start'])}",
             f"wall_end: {_iso(s['wall_end'])}",
             f"wall_seconds: {s['wall_seconds']:.3f}",
             f"table: {table}",
             f"status: {s['cavity']}"]
    _emit_summary(out / cfg.get("output", "summary"), lines, args.quiet)
    return 0


def cmd_sweep(args) -> int:
    cfg, out, threads = _prepare(args)
    if not cfg.has("sweep"):
        raise CavimagError(f"{args.config}: no [sweep] section")
    axis = cfg.get("sweep", "axis")
    values = cfg.get("sweep", "values")
    wall_start = _dt.datetime.now(tz=_dt.timezone.utc)
    rmap = analysis.sweep(sweep_factory(cfg, threads), axis, values, cfg.run_config,
                          component=cfg.get("sweep", "component"),
                          window=cfg.get("sweep", "window"))
    wall_end = _dt.datetime.now(tz=_dt.timezone.utc)
    path = out / cfg.get("output", "map")
    rmap.write_csv(path)
    lines = ["command: sweep", f"config: {args.config}", *cfg.echo(),
             f"threads: {threads}",
             f"points: {len(values)}",
             f"failed_points: {len(rmap.failed)}"]
    for i, reason in sorted(rmap.failed.items()):
        msg = f"sweep point {axis}={values[i]!r} failed: {reason}"
        lines.append(f"failed: {axis}={values[i]!r} ({reason})")
        log.warning(msg)
        print(f"warning: {msg}", file=sys.stderr)
    if cfg.get("sweep", "splitting"):
        try:
            sp = analysis.extract_splitting(rmap, cfg.get("sweep", "min_prominence"))
            lines.append(f"splitting_2g: {sp.two_g!r} rad/s "
                         f"(2g/2pi = {sp.two_g / (2 * math.pi):.6e} Hz) at {axis}={sp.at_value!r}"
                         f"{'' if sp.resolved else ' (unresolved upper bound)'}")
        except ValueError as exc:
            lines.append(f"splitting_2g: not extracted ({exc})")
            log.warning("splitting not extracted: %s", exc)
    lines += [f"resolution: {rmap.resolution!r} rad/s",
              f"wall_start: {wall_start.isoformat(timespec='milliseconds')}",
              f"wall_end: {wall_end.isoformat(timespec='milliseconds')}",
              f"wall_seconds: {(wall_end - wall_start).total_seconds():.3f}",
              f"map: {path}",
              f"status: {'cavity enabled' if cfg.cavity_enabled else 'cavity disabled'}"]
    _emit_summary(out / cfg.get("output", "summary"), lines, args.quiet)
    if len(rmap.failed) == len(values):
        log.error("every sweep point failed")
        return 1
    return 0


def cmd_dicke_bench(args) -> int:
    _setup_logging(args.quiet, None)
    two_pi = 2 * math.pi
    rep = run_dicke_bench(omega_z=two_pi * args.omega_z, omega_c=two_pi * args.omega_c,
                          ratio=args.lambda_over_lc, kappa=two_pi * args.kappa,
                          gilbert_alpha=args.alpha, periods=args.periods,
                          steps_per_period=args.steps_per_period, s_total=args.s_total)
    text = format_report(rep)
    print(text)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rep.engine.write_csv(out / "dicke_engine.csv")
        (out / "dicke_bench.txt").write_text(text + "\n", encoding="utf-8")
    if not rep.passed:
        log.error("dicke benchmark outside tolerance")
        return 2
    return 0


def cmd_validate_ovf(args) -> int:
    _setup_logging(args.quiet, None)
    path = Path(args.path)
    try:
        doc = read_ovf(path)
    except OSError as exc:
        raise CavimagError(f"cannot read {path}: {exc.strerror}") from None
    except OvfError as exc:
        raise CavimagError(f"{path}: {exc}") from None
    v = doc.values
    print(f"file: {path}")
    print(f"representation: {doc.representation}")
    print(f"nodes: {doc.xnodes} x {doc.ynodes} x {doc.znodes}")
    print(f"steps: {doc.xstepsize!r}, {doc.ystepsize!r}, {doc.zstepsize!r}")
    for k, name in enumerate("xyz"):
        print(f"range_{name}: {float(np.min(v[:, k]))!r} .. {float(np.max(v[:, k]))!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="simulation config file")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default: ${THREADS_ENV} or 1)")
    common.add_argument("--quiet", action="store_true", help="errors only on the console")

    parser = argparse.ArgumentParser(prog="cavimag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run one simulation")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", parents=[common], help="parameter sweep from [sweep]")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dicke-bench", parents=[common],
                       help="engine vs explicit oracle vs closed forms")
    p.set_defaults(func=cmd_dicke_bench, out=None)
    p.add_argument("--omega-z", type=float, default=5e9, help="spin frequency / 2pi, Hz")
    p.add_argument("--omega-c", type=float, default=5e9, help="cavity frequency / 2pi, Hz")
    p.add_argument("--lambda-over-lc", type=float, default=0.5)
    p.add_argument("--kappa", type=float, default=10e6, help="cavity loss / 2pi, Hz")
    p.add_argument("--alpha", type=float, default=0.01, help="Gilbert damping")
    p.add_argument("--periods", type=float, default=300.0, help="duration in cavity periods")
    p.add_argument("--steps-per-period", type=int, default=100)
    p.add_argument("--s-total", type=float, default=50.0, help="collective spin S")

    p = sub.add_parser("validate-ovf", parents=[common], help="check an OVF 2.0 file")
    p.set_defaults(func=cmd_validate_ovf)
    p.add_argument("path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CavimagError, ValueError, OSError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        logging.shutdown()


if __name__ == "__main__":
    sys.exit(main())
