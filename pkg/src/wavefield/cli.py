"""Command line entry point: ``wavefield run|verify|eigen|plot``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import OutputError, PropagationError, WavefieldError
from .fields import LABELS


def _scenario(path):
    from .scenario import load_scenario

    try:
        return load_scenario(path)
    except OSError as exc:
        raise OutputError(f"cannot read scenario ({exc.strerror})", path) from exc


def _print_report(report):
    for line in report.lines():
        print(line)
    print("overall:", "PASS" if report.passed else "FAIL")


def cmd_run(args) -> int:
    from .output import write_outputs
    from .scenario import run_scenario, serialize

    s = _scenario(args.scenario)
    h, report = run_scenario(s)
    out = Path(args.out) if args.out else Path(s.out.dir)
    entries = write_outputs(h, report, out, plots=s.out.plots, scenario_text=serialize(s))
    _print_report(report)
    print(f"wrote {len(entries)} files to {out}")
    return 0 if report.passed else 1


def cmd_verify(args) -> int:
    from .scenario import run_scenario

    _, report = run_scenario(_scenario(args.scenario))
    _print_report(report)
    return 0 if report.passed else 1


def cmd_eigen(args) -> int:
    from .scenario import stationary_summary

    s = _scenario(args.scenario)
    rows = stationary_summary(s, args.n)
    print(f"{'n':>3} {'eigenvalue':>22} {'E spread':>10} {'Q mean':>22} {'Q spread':>10} {'Q closed form':>22}")
    for r in rows:
        qx = "" if r.q_exact is None else f"{r.q_exact:22.15g}"
        print(f"{r.n:>3} {r.energy:22.15g} {r.e_spread:10.2e} {r.q_mean:22.15g} {r.q_spread:10.2e} {qx}")
    print("Q(n):", ", ".join(f"{r.q_mean:.12g}" for r in rows))
    if len(rows) > 1:
        ratio = rows[-1].q_mean / rows[0].q_mean
        print(f"Q({rows[-1].n})/Q(1) = {ratio:.6g}: Q is constant in x for each state but depends on n")
    return 0


def cmd_plot(args) -> int:
    from .output import plot_field, read_field_table

    table = read_field_table(args.table)
    fields = [f.strip() for f in args.fields.split(",") if f.strip()]
    bad = [f for f in fields if f not in LABELS]
    if bad:
        raise WavefieldError(f"unknown field(s) {bad}; expected from {LABELS}")
    out = Path(args.out) if args.out else Path(args.table).parent
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.table).stem
    for f in fields:
        path = out / f"{stem}_{f}.svg"
        plot_field(table, f, path, title=f"{f} ({stem})")
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavefield", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="propagate, verify and write field tables, report and plots")
    r.add_argument("scenario")
    r.add_argument("--out", help="output directory (default: out.dir of the scenario)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="propagate and print the identity report only")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("eigen", help="stationary states: energies, E and Q constancy, Q(n)")
    e.add_argument("scenario")
    e.add_argument("--n", type=int, required=True, help="number of states")
    e.set_defaults(func=cmd_eigen)

    pl = sub.add_parser("plot", help="SVG line plots from a field table")
    pl.add_argument("table")
    pl.add_argument("--fields", required=True, help="comma-separated columns, e.g. p,E")
    pl.add_argument("--out", help="directory for the images (default: next to the table)")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (WavefieldError, OutputError, PropagationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
