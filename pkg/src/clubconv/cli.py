"""``clubconv`` command line: one subcommand per analysis plus the full pipeline."""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

from . import boxcluster, factor, logt, report, stats, synth
from .boxcluster import AnnealSchedule
from .errors import ClubConvError
from .hp import MONTHLY_LAMBDA, HpParams, hp_panel
from .panel import Panel, read_panel, require_positive, write_panel

log = logging.getLogger("clubconv")

EXIT_USAGE = 2
EXIT_DATA = 3


class UsageError(Exception):
    """Bad invocation detected after argument parsing (e.g. no input)."""


class _Parser(argparse.ArgumentParser):
    """argparse with the same single-line JSON error convention as runtime failures."""

    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        _fail(EXIT_USAGE, "usage", message)
        sys.exit(EXIT_USAGE)


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", default="-", metavar="CSV", help="panel CSV, '-' for stdin (default)")


def _add_anneal(p: argparse.ArgumentParser) -> None:
    d = AnnealSchedule()
    g = p.add_argument_group("box clustering")
    g.add_argument("--seed", type=int, default=d.seed, help="master seed (default %(default)s)")
    g.add_argument("--restarts", type=int, default=d.restarts, help="annealing restarts (default %(default)s)")
    g.add_argument("--anneal-moves", type=int, default=d.moves_per_level, help="moves per temperature level")
    g.add_argument("--anneal-cooling", type=float, default=d.cooling, help="geometric cooling factor")


def _add_hp(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hp-lambda", type=float, default=MONTHLY_LAMBDA, help="HP smoothing (default %(default)s)")


def _add_logt(p: argparse.ArgumentParser, clubs: bool) -> None:
    d = logt.LogTParams()
    g = p.add_argument_group("log t test")
    g.add_argument("--r-fraction", type=float, default=d.r, help="discarded initial fraction r")
    g.add_argument("--critical-t", type=float, default=d.critical_t, help="one-sided critical value")
    g.add_argument("--ols-se", action="store_true", help="plain OLS standard errors instead of Newey-West")
    if clubs:
        g.add_argument("--sieve-c", type=float, default=d.sieve_c, help="sieve threshold c*")
        g.add_argument("--no-hp", action="store_true", help="skip HP filtering before club formation")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clubconv", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("corr", help="correlation matrix (CSV) or correlation + eigen table (JSON)")
    _add_input(p)
    _add_hp(p)
    p.add_argument("--hp", action="store_true", help="correlate HP trends instead of raw series")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("cluster", help="consensus box clustering of the correlation matrix")
    _add_input(p)
    _add_hp(p)
    p.add_argument("--hp", action="store_true", help="cluster the HP-trend correlation")
    _add_anneal(p)

    p = sub.add_parser("partial", help="residual correlation after removing the collective trend")
    _add_input(p)
    _add_hp(p)
    p.add_argument("--hp", action="store_true", help="regress HP trends instead of raw series")

    p = sub.add_parser("decompose", help="market-mode / residual split of the correlation matrix")
    _add_input(p)

    p = sub.add_parser("diff", help="differential paths against the collective trend: corr + eigen")
    _add_input(p)

    p = sub.add_parser("logt", help="log t convergence test on the whole panel")
    _add_input(p)
    _add_logt(p, clubs=False)

    p = sub.add_parser("clubs", help="log t club clustering")
    _add_input(p)
    _add_hp(p)
    _add_logt(p, clubs=True)

    p = sub.add_parser("synth", help="write a synthetic factor-model panel as CSV")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--t", type=int, default=101)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--delta", default="1.0", help="scalar or comma-separated list of n limits")
    p.add_argument("--mu", choices=("linear", "geometric"), default="linear")
    p.add_argument("--mu-a", type=float, default=1.0, help="slope (linear) or growth rate (geometric)")
    p.add_argument("--mu-b", type=float, default=100.0, help="level of the common trend")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("pipeline", help="run every analysis and write a report directory")
    _add_input(p)
    p.add_argument("--out-dir", required=True, type=Path, help="report directory (created if needed)")
    _add_hp(p)
    _add_anneal(p)
    _add_logt(p, clubs=True)
    p.add_argument("--partial-hp", action="store_true", help="partial correlation on HP trends")
    p.add_argument(
        "--fixed-timestamp",
        nargs="?",
        const=report.FIXED_TIMESTAMP,
        default=None,
        metavar="ISO8601",
        help=f"record this timestamp instead of the clock (bare flag: {report.FIXED_TIMESTAMP})",
    )
    return parser


def _read_input(path: str) -> tuple[str, bytes]:
    if path == "-":
        if sys.stdin is None or sys.stdin.isatty():
            raise UsageError("no input: pass --input FILE or pipe a CSV on stdin")
        data = sys.stdin.buffer.read() if hasattr(sys.stdin, "buffer") else sys.stdin.read().encode()
        return "<stdin>", data
    try:
        return path, Path(path).read_bytes()
    except FileNotFoundError:
        raise UsageError(f"input file not found: {path}") from None
    except IsADirectoryError:
        raise UsageError(f"input is a directory: {path}") from None


def _load(args: argparse.Namespace) -> tuple[Panel, str, bytes]:
    name, data = _read_input(args.input)
    text = data.decode("utf-8-sig")
    return read_panel(io.StringIO(text, newline="")), name, data


def _schedule(args: argparse.Namespace) -> AnnealSchedule:
    return AnnealSchedule(
        restarts=args.restarts,
        moves_per_level=args.anneal_moves,
        cooling=args.anneal_cooling,
        seed=args.seed,
    )


def _logt_params(args: argparse.Namespace) -> logt.LogTParams:
    return logt.LogTParams(
        r=args.r_fraction,
        critical_t=args.critical_t,
        sieve_c=getattr(args, "sieve_c", logt.LogTParams().sieve_c),
        se_mode="ols" if args.ols_se else "hac",
    )


def _emit_json(obj: dict) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def _corr_source(args: argparse.Namespace, panel: Panel) -> Panel:
    return hp_panel(panel, HpParams(args.hp_lambda)) if args.hp else panel


def cmd_corr(args: argparse.Namespace) -> None:
    panel, _, _ = _load(args)
    c = stats.pearson_corr(_corr_source(args, panel))
    if args.format == "csv":
        sys.stdout.write(c.to_csv())
    else:
        _emit_json({"hp_trend": args.hp, "corr": c.to_json(), "eigen": stats.eigen_sym(c).to_json()})


def cmd_cluster(args: argparse.Namespace) -> None:
    panel, _, _ = _load(args)
    c = stats.pearson_corr(_corr_source(args, panel))
    schedule = _schedule(args)
    affinity, part = boxcluster.consensus_cluster(c, schedule)
    _emit_json({"schedule": asdict(schedule), "affinity": affinity.to_json(), "partition": part.to_json()})


def _collective_trend(panel: Panel):
    return stats.eigenportfolio(stats.eigen_sym(stats.pearson_corr(panel)).v1, panel)


def cmd_partial(args: argparse.Namespace) -> None:
    panel, _, _ = _load(args)
    source = _corr_source(args, panel)
    require_positive(panel)
    g = _collective_trend(source)
    fit = factor.fit_factor(source, g)
    p = stats.pearson_corr(factor.residual_panel(source, g, fit), kind="partial")
    _emit_json(
        {
            "hp_trend": args.hp,
            "factor": {
                "alpha": dict(zip(fit.entities, fit.alpha.tolist())),
                "beta": dict(zip(fit.entities, fit.beta.tolist())),
                "r2": dict(zip(fit.entities, fit.r2.tolist())),
            },
            "corr": p.to_json(),
        }
    )


def cmd_decompose(args: argparse.Namespace) -> None:
    panel, _, _ = _load(args)
    c = stats.pearson_corr(panel)
    es = stats.eigen_sym(c)
    market, rest = stats.decompose_market(c, es)
    _emit_json({"eigen": es.to_json(), "market": market.to_json(), "residual": rest.to_json()})


def cmd_diff(args: argparse.Namespace) -> None:
    panel, _, _ = _load(args)
    require_positive(panel)
    d = factor.differentials(panel, _collective_trend(panel))
    c = stats.pearson_corr(d.values, labels=d.entities, kind="differential")
    _emit_json({"corr": c.to_json(), "eigen": stats.eigen_sym(c).to_json()})


def cmd_logt(args: argparse.Namespace) -> None:
    panel, _, _ = _load(args)
    require_positive(panel)
    params = _logt_params(args)
    res = logt.logt_regression(panel, params)
    _emit_json({**res.to_json(), "converges": res.converges(params.critical_t), "critical_t": params.critical_t})


def cmd_clubs(args: argparse.Namespace) -> None:
    panel, _, _ = _load(args)
    hp = None if args.no_hp else HpParams(args.hp_lambda)
    clubset = logt.club_cluster(panel, _logt_params(args), hp)
    _emit_json({"hp_filter": hp is not None, "hp_lambda": None if hp is None else hp.lam, **clubset.to_json()})


def cmd_synth(args: argparse.Namespace) -> None:
    parts = [float(x) for x in args.delta.split(",")]
    delta = parts[0] if len(parts) == 1 else tuple(parts)
    params = synth.GenParams(
        n=args.n,
        t=args.t,
        delta=delta,
        alpha=args.alpha,
        sigma=args.sigma,
        mu=synth.CommonTrend(args.mu, args.mu_a, args.mu_b),
        seed=args.seed,
    )
    write_panel(synth.gen_panel(params), sys.stdout)


def cmd_pipeline(args: argparse.Namespace) -> None:
    panel, name, data = _load(args)
    config = report.PipelineConfig(
        anneal=_schedule(args),
        hp=HpParams(args.hp_lambda),
        logt=_logt_params(args),
        logt_hp=not args.no_hp,
        partial_hp=args.partial_hp,
        timestamp=args.fixed_timestamp,
    )
    result = report.run_pipeline(
        panel, config, args.out_dir, input_name=name, input_sha256=hashlib.sha256(data).hexdigest()
    )
    status = {k: result[k]["status"] for k in ("raw", "trend", "partial", "decomposition", "differential", "logt")}
    _emit_json({"out_dir": str(args.out_dir), "stages": status})


COMMANDS = {
    "corr": cmd_corr,
    "cluster": cmd_cluster,
    "partial": cmd_partial,
    "decompose": cmd_decompose,
    "diff": cmd_diff,
    "logt": cmd_logt,
    "clubs": cmd_clubs,
    "synth": cmd_synth,
    "pipeline": cmd_pipeline,
}


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail(EXIT_USAGE, "usage", str(exc))
    except ClubConvError as exc:
        return _fail(exc.exit_code, type(exc).__name__, str(exc))
    except (ValueError, UnicodeDecodeError) as exc:
        return _fail(EXIT_DATA, type(exc).__name__, str(exc))
    except BrokenPipeError:
        return 0
    return 0


if __name__ == "__main__":
    sys.exit(main())
