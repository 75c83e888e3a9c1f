"""Command line: ``mindgrid run``, ``mindgrid analyze`` and ``mindgrid replay``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import yaml

from .agents import VARIANTS, AgentConfig
from .bots import scenario_ids
from .core import DEFAULT_MAX_STEPS, substrate_names
from .harness import (
    RunConfig,
    SummaryTable,
    agent_config_from_record,
    interaction_offset_analysis,
    iter_results,
    load_result,
    plot_offset_curve,
    run_agent_episode,
    run_suite,
)
from .reasoner import BACKENDS, make_reasoner
from .reasoner.remote import DEFAULT_KEY_ENV

# keys a --config file may set; they override the matching flags
CONFIG_KEYS = (
    "substrate", "scenarios", "seeds", "agent", "tom", "prompting", "evaluation", "reflection",
    "backend", "base_url", "model", "cassette", "cassette_mode", "cassette_inner", "steps", "out", "workers",
)


def parse_ids(text: str) -> list[int]:
    """``"0-8"``, ``"1,3,5"`` or ``"0-2,6"`` to a sorted list of unique ints."""
    out: set[int] = set()
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            a, b = int(lo), int(hi)
            if b < a:
                raise argparse.ArgumentTypeError(f"empty range {part!r}")
            out.update(range(a, b + 1))
        else:
            out.add(int(part))
    if not out:
        raise argparse.ArgumentTypeError("expected at least one id")
    return sorted(out)


def parse_seeds(text: str) -> list[int]:
    """A bare count ``"5"`` means seeds 0..4; anything with ``,`` or ``-`` is an explicit list."""
    text = str(text).strip()
    if text.isdigit():
        n = int(text)
        if n < 1:
            raise argparse.ArgumentTypeError("seed count must be positive")
        return list(range(n))
    return parse_ids(text)


def _apply_config_file(args: argparse.Namespace) -> None:
    if not args.config:
        return
    data = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise SystemExit(f"{args.config}: expected a mapping at the top level")
    if any(k in data for k in ("api_key", "key")):
        raise SystemExit(f"credentials do not belong in config files; set {DEFAULT_KEY_ENV}")
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise SystemExit(f"{args.config}: unknown keys {unknown}")
    for key, value in data.items():
        if key == "scenarios":
            value = parse_ids(value if isinstance(value, str) else ",".join(map(str, value)))
        elif key == "seeds":
            value = parse_seeds(value if not isinstance(value, list) else ",".join(map(str, value)))
        setattr(args, key, value)


def backend_options(args: argparse.Namespace) -> dict[str, Any]:
    if args.backend == "oracle":
        return {}
    if args.backend == "remote":
        if not args.base_url or not args.model:
            raise SystemExit("--backend remote needs --base-url and --model")
        return {"base_url": args.base_url, "model": args.model}
    if not args.cassette:
        raise SystemExit("--backend cassette needs --cassette PATH")
    opts: dict[str, Any] = {"path": str(args.cassette), "mode": args.cassette_mode}
    if args.cassette_mode == "record":
        if args.cassette_inner == "oracle":
            opts["inner"] = make_reasoner("oracle")
        else:
            if not args.base_url or not args.model:
                raise SystemExit("recording from the remote backend needs --base-url and --model")
            opts.update(base_url=args.base_url, model=args.model)
    return opts


def run_config(args: argparse.Namespace) -> RunConfig:
    agent = AgentConfig(
        variant=args.agent,
        tom=args.tom,
        prompting=args.prompting,
        evaluation=args.evaluation,
        reflection=args.reflection,
    )
    options = backend_options(args)
    workers = args.workers
    if args.backend == "cassette" or "inner" in options:
        workers = 1  # one file, one writer
    return RunConfig(
        substrate=args.substrate,
        scenarios=args.scenarios if args.scenarios is not None else scenario_ids(args.substrate),
        agent=agent,
        backend=args.backend,
        backend_options=options,
        seeds=args.seeds,
        max_steps=args.steps,
        output=Path(args.out),
        workers=workers,
    )


def cmd_run(args: argparse.Namespace) -> int:
    _apply_config_file(args)
    try:
        config = run_config(args)
    except ValueError as exc:
        raise SystemExit(str(exc)) from None
    table, results = run_suite(config)
    print(table.to_markdown())
    failed = sum(1 for r in results if not r.ok)
    if failed:
        print(f"{failed} episode(s) failed; see the 'error' field of their result files", file=sys.stderr)
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    results = list(iter_results(Path(args.results)))
    if not results:
        raise SystemExit(f"no result files under {args.results}")
    table = SummaryTable.from_results(results)
    print(table.to_markdown())
    curve = interaction_offset_analysis(results, n_boot=args.bootstrap, seed=args.seed)
    print()
    print(f"offset analysis: {curve.episodes} episode(s) with a validation, {curve.excluded} without")
    if curve.pre_mean is not None or curve.post_mean is not None:
        fmt = lambda x: "n/a" if x is None else f"{x:.3f}"  # noqa: E731
        print(f"mean reward per interaction: before {fmt(curve.pre_mean)}, after {fmt(curve.post_mean)}")
    if args.json:
        Path(args.json).write_text(
            json.dumps({"summary": json.loads(table.to_json()), "offsets": curve.to_record()}, indent=1, sort_keys=True)
            + "\n",
            encoding="utf-8",
        )
    if args.plot:
        if not curve.points:
            print("nothing to plot", file=sys.stderr)
        else:
            print(f"wrote {plot_offset_curve(curve, Path(args.plot))}")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    path = Path(args.result)
    original = path.read_text(encoding="utf-8")
    recorded = load_result(path)
    if recorded.backend == "oracle":
        reasoner = make_reasoner("oracle")
    elif args.cassette:
        reasoner = make_reasoner("cassette", path=str(args.cassette), mode="replay")
    else:
        raise SystemExit(f"a {recorded.backend!r} episode replays only from a cassette; pass --cassette")
    result = run_agent_episode(
        recorded.substrate, recorded.scenario, recorded.seed,
        agent_config_from_record(recorded.agent), reasoner, recorded.max_steps,
    )
    fresh = result.to_json() + "\n"
    if fresh == original:
        print(f"identical: {path}")
        return 0
    old, new = json.loads(original), json.loads(fresh)
    differing = sorted(k for k in set(old) | set(new) if old.get(k) != new.get(k))
    print(f"replay differs from {path} in: {', '.join(differing)}")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mindgrid", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario sweep and write one result file per episode")
    run.add_argument("--substrate", choices=substrate_names(), default="rws_repeated")
    run.add_argument("--scenarios", type=parse_ids, default=None, help='e.g. "0-8" or "1,6"; default all')
    run.add_argument("--seeds", type=parse_seeds, default=[0], help='a count ("5") or a list ("0,3,7")')
    run.add_argument("--agent", choices=VARIANTS, default="tom")
    run.add_argument("--no-tom", dest="tom", action="store_false", help="tom agent without opponent modelling")
    run.add_argument("--prompting", choices=("modular", "single"), default="modular")
    run.add_argument("--evaluation", choices=("intrinsic", "counterfactual"), default="intrinsic")
    run.add_argument("--no-reflection", dest="reflection", action="store_false",
                     help="tom agent in the kitchen without plan reflection")
    run.add_argument("--backend", choices=BACKENDS, default="oracle")
    run.add_argument("--base-url", default=None, help=f"remote endpoint; the key is read from {DEFAULT_KEY_ENV}")
    run.add_argument("--model", default=None)
    run.add_argument("--cassette", default=None, help="JSON-lines cassette for the cassette backend")
    run.add_argument("--cassette-mode", choices=("record", "replay"), default="replay")
    run.add_argument("--cassette-inner", choices=("remote", "oracle"), default="remote",
                     help="backend whose replies are recorded")
    run.add_argument("--steps", type=int, default=DEFAULT_MAX_STEPS)
    run.add_argument("--out", default="results")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--config", default=None, help="YAML file whose keys override the flags")
    run.set_defaults(func=cmd_run)

    analyze = sub.add_parser("analyze", help="summary table and offset analysis over saved results")
    analyze.add_argument("results", help="directory holding result files")
    analyze.add_argument("--bootstrap", type=int, default=1000)
    analyze.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    analyze.add_argument("--json", default=None, help="also write the analysis as JSON")
    analyze.add_argument("--plot", default=None, help="write a PNG of the offset curve (needs matplotlib)")
    analyze.set_defaults(func=cmd_analyze)

    replay = sub.add_parser("replay", help="re-run a saved episode and compare it byte for byte")
    replay.add_argument("result", help="a result file written by 'run'")
    replay.add_argument("--cassette", default=None, help="cassette for non-oracle episodes")
    replay.set_defaults(func=cmd_replay)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return int(args.func(args))


if __name__ == "__main__":
    sys.exit(main())
