"""Command-line front end.

Exit codes: 0 success (``execute``: final goal reached), 2 the run ended
without reaching the final goal, 1 any error. The only environment variable
read is ``CGDA_LOG_LEVEL``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .errors import CGDAError
from .model import FeatureTrajectory, generalize, load_demonstrations, read_demonstration, resample_observation
from .recognition import discrepancy, feature_weights
from .report import BenchConfig, load_report, plot_report, run_bench, save_report
from .scenario import Scenario
from .simenv import IronWorld, PaintWorld
from .strategies import STRATEGIES, run_strategy

log = logging.getLogger("cgda")

EXIT_OK, EXIT_ERROR, EXIT_NOT_REACHED = 0, 1, 2
KNOWN_UNITS = {
    **dict(zip(PaintWorld.feature_names, PaintWorld.feature_units)),
    **dict(zip(IronWorld.feature_names, IronWorld.feature_units)),
}


class _Parser(argparse.ArgumentParser):
    # usage errors must not collide with the "goal not reached" code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def cmd_generalize(args) -> int:
    demos = load_demonstrations(args.demos)
    units = [KNOWN_UNITS.get(name, "unitless") for name in demos[0].feature_names]
    action = generalize(demos, args.tmin, units)
    action.save(args.out)
    print(f"wrote {args.out}: m={action.m} features, n={action.n} goals")
    return EXIT_OK


def cmd_recognize(args) -> int:
    action = FeatureTrajectory.load(args.action)
    obs = read_demonstration(args.observed)
    if list(obs.feature_names) != list(action.feature_names):
        raise CGDAError(f"observed features {list(obs.feature_names)} do not match action {action.feature_names}")
    observed = resample_observation(obs.t, obs.values, action.t_min)
    w = feature_weights(action)
    result = {"discrepancy": discrepancy(observed, action, w), "observed_columns": observed.n, "n_goals": action.n}
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def cmd_execute(args) -> int:
    action = FeatureTrajectory.load(args.action)
    scenario = Scenario.load(args.scenario)
    cfg = dataclasses.replace(scenario.strategy, name=args.strategy, seed=args.seed)
    report = run_strategy(action, scenario.make_world(), cfg, scenario.schedule())
    save_report(report, args.out)
    print(
        f"{report.strategy}: {report.termination_reason}, {report.total_evaluations} evaluations, "
        f"f={report.final_discrepancy:.4g}, mean RIT {report.mean_rit:.4g} s"
    )
    return EXIT_OK if report.goal_reached else EXIT_NOT_REACHED


def cmd_bench(args) -> int:
    cfg = BenchConfig.load(args.config)
    table, _ = run_bench(cfg, args.repeats, args.out)
    print(table.format())
    print(f"wrote {Path(args.out) / 'bench.csv'}")
    return EXIT_OK


def cmd_plot(args) -> int:
    report = load_report(args.report)
    Path(args.out).write_text(plot_report(report), encoding="utf-8")
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cgda", description="Continuous goal-directed actions: generalize, recognize, execute.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generalize", help="build an action from demonstration CSVs")
    g.add_argument("--demos", required=True, help="directory of demonstration CSV files")
    g.add_argument("--tmin", required=True, type=float, help="goal spacing in seconds")
    g.add_argument("--out", required=True, help="action JSON to write")
    g.set_defaults(func=cmd_generalize)

    r = sub.add_parser("recognize", help="discrepancy of an observed CSV against an action")
    r.add_argument("--action", required=True)
    r.add_argument("--observed", required=True, help="CSV with a 't' column and the action's features")
    r.set_defaults(func=cmd_recognize)

    e = sub.add_parser("execute", help="run one strategy on a scenario")
    e.add_argument("--strategy", required=True, choices=STRATEGIES)
    e.add_argument("--action", required=True)
    e.add_argument("--scenario", required=True)
    e.add_argument("--seed", required=True, type=int)
    e.add_argument("--out", required=True, help="report JSON; timing goes to <stem>.timing.json")
    e.set_defaults(func=cmd_execute)

    b = sub.add_parser("bench", help="run strategies x repeats and tabulate")
    b.add_argument("--config", required=True)
    b.add_argument("--repeats", required=True, type=int)
    b.add_argument("--out", required=True, help="output directory")
    b.set_defaults(func=cmd_bench)

    pl = sub.add_parser("plot", help="SVG of a report's feature trace against its goals")
    pl.add_argument("--report", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    level = os.environ.get("CGDA_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CGDAError, OSError) as exc:
        print(f"cgda {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
