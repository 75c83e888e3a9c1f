"""Episode runner, scenario sweeps, result persistence and summary analyses."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np

from .agents import AgentConfig, ReasoningAgent
from .bots import build_scenario, make_bot, scenario_ids
from .control import Controller
from .core import DEFAULT_MAX_STEPS, EpisodeConfig, GameEvent, derive_seed, make_world, step
from .reasoner import BackendUnavailable, Reasoner, make_reasoner
from .reasoner.base import SamplingConfig
from .tom import ValueParams

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
NORMALISED_STEPS = 1200
QUIET_EVENTS = {"collect", "respawn"}  # counted but not stored one by one


# -- configuration ------------------------------------------------------------------------


def agent_config_from_record(record: dict[str, Any]) -> AgentConfig:
    rec = dict(record)
    sampling = rec.pop("sampling", None)
    value = rec.pop("value", None)
    keys = {"variant", "tom", "prompting", "evaluation", "reflection", "max_replans", "reflection_memory"}
    return AgentConfig(
        **{k: v for k, v in rec.items() if k in keys},
        sampling=SamplingConfig(**sampling) if sampling else SamplingConfig(),
        value=ValueParams(**value) if value else None,
    )


@dataclass
class RunConfig:
    """One sweep: a substrate, its scenarios, an agent, a backend and the seeds."""

    substrate: str
    scenarios: list[int]
    agent: AgentConfig = field(default_factory=AgentConfig)
    backend: str = "oracle"
    backend_options: dict[str, Any] = field(default_factory=dict)
    seeds: list[int] = field(default_factory=lambda: [0])
    max_steps: int = DEFAULT_MAX_STEPS
    output: Path | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        known = scenario_ids(self.substrate)
        bad = [s for s in self.scenarios if s not in known]
        if bad:
            raise ValueError(f"{self.substrate} has no scenario {bad}; known: {known}")
        if not self.scenarios or not self.seeds:
            raise ValueError("a run needs at least one scenario and one seed")
        if self.max_steps <= 0 or self.workers < 1:
            raise ValueError("max_steps and workers must be positive")

    def pairs(self) -> list[tuple[int, int]]:
        return [(sc, seed) for sc in self.scenarios for seed in self.seeds]


# -- episode results --------------------------------------------------------------------------


@dataclass
class EpisodeResult:
    substrate: str
    scenario: int
    seed: int
    max_steps: int
    steps: int
    status: str
    agent: dict[str, Any]
    backend: str
    bots: list[dict[str, Any]]
    focal_reward: float
    rewards: list[float]
    event_counts: dict[str, int]
    events: list[dict[str, Any]]
    interactions: list[dict[str, Any]] = field(default_factory=list)
    snapshots: list[dict[str, Any]] = field(default_factory=list)
    reflections: list[dict[str, Any]] = field(default_factory=list)
    diagnostics: list[dict[str, Any]] = field(default_factory=list)
    traces: list[dict[str, Any]] = field(default_factory=list)
    error: str | None = None
    schema: int = SCHEMA_VERSION

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def deliveries(self) -> int:
        return self.event_counts.get("delivered_soup", 0)

    def normalised_reward(self) -> float:
        return self.focal_reward * NORMALISED_STEPS / max(self.steps, 1)

    def to_record(self) -> dict[str, Any]:
        return {
            "schema": self.schema,
            "substrate": self.substrate,
            "scenario": self.scenario,
            "seed": self.seed,
            "max_steps": self.max_steps,
            "steps": self.steps,
            "status": self.status,
            "error": self.error,
            "agent": self.agent,
            "backend": self.backend,
            "bots": self.bots,
            "focal_reward": self.focal_reward,
            "rewards": self.rewards,
            "event_counts": self.event_counts,
            "events": self.events,
            "interactions": self.interactions,
            "snapshots": self.snapshots,
            "reflections": self.reflections,
            "diagnostics": self.diagnostics,
            "traces": self.traces,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "EpisodeResult":
        if rec.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported results schema {rec.get('schema')!r}")
        fields = {k: v for k, v in rec.items() if k != "schema"}
        return cls(**fields)


def _round(x: float) -> float:
    # keep float noise out of persisted sums so replays compare byte for byte
    return round(float(x), 9)


def run_episode(
    substrate: str,
    scenario: int,
    seed: int,
    focal: Controller,
    max_steps: int = DEFAULT_MAX_STEPS,
    backend: str = "none",
    on_step: Callable[[int, Sequence[GameEvent]], None] | None = None,
) -> EpisodeResult:
    """Play one episode with ``focal`` as player 0 and the scenario's bots as the rest."""
    world = make_world(EpisodeConfig(substrate, scenario, seed, max_steps))
    specs = build_scenario(substrate, scenario, seed)
    if len(specs) != len(world.players) - 1:
        raise ValueError(f"scenario provides {len(specs)} bots for {len(world.players) - 1} seats")
    controllers: list[Controller] = [focal, *(make_bot(s) for s in specs)]
    for i, c in enumerate(controllers):
        c.reset(i, world, derive_seed(seed, "controller", i))
    totals = [0.0] * len(controllers)
    counts: dict[str, int] = {}
    stored: list[dict[str, Any]] = []
    events: Sequence[GameEvent] = ()
    status, error = "ok", None
    try:
        while not world.done:
            joint = [c.act(world, events) for c in controllers]
            _, result = step(world, joint)
            events = result.events
            for i, r in enumerate(result.rewards):
                totals[i] += r
            for ev in events:
                counts[ev.kind] = counts.get(ev.kind, 0) + 1
                if ev.kind not in QUIET_EVENTS:
                    stored.append(ev.to_record())
            if on_step is not None:
                on_step(world.step_count, events)
    except BackendUnavailable as exc:
        status, error = "failed", f"backend unavailable: {exc}"
        log.warning("episode %s/%s/%s failed: %s", substrate, scenario, seed, error)
    report: dict[str, Any] = {}
    traces: list[dict[str, Any]] = []
    if isinstance(focal, ReasoningAgent):
        report = focal.report()
        traces = [t.to_record() for t in focal.session.traces]
    return EpisodeResult(
        substrate=substrate,
        scenario=scenario,
        seed=seed,
        max_steps=max_steps,
        steps=world.step_count,
        status=status,
        agent=focal.describe(),
        backend=backend,
        bots=[s.to_record() for s in specs],
        focal_reward=_round(totals[0]),
        rewards=[_round(t) for t in totals],
        event_counts=dict(sorted(counts.items())),
        events=stored,
        interactions=report.get("interactions", []),
        snapshots=report.get("snapshots", []),
        reflections=report.get("reflections", []),
        diagnostics=report.get("diagnostics", []),
        traces=traces,
        error=error,
    )


def run_agent_episode(
    substrate: str,
    scenario: int,
    seed: int,
    agent: AgentConfig | None = None,
    reasoner: Reasoner | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
    backend: str = "oracle",
) -> EpisodeResult:
    reasoner = reasoner or make_reasoner("oracle")
    focal = ReasoningAgent(reasoner, agent or AgentConfig())
    return run_episode(substrate, scenario, seed, focal, max_steps, backend=getattr(reasoner, "name", backend))


# -- sweeps ---------------------------------------------------------------------------------


def result_path(output: Path, substrate: str, scenario: int, seed: int) -> Path:
    return output / substrate / f"scenario{scenario}_seed{seed}.json"


def load_result(path: Path) -> EpisodeResult:
    return EpisodeResult.from_record(json.loads(path.read_text(encoding="utf-8")))


def iter_results(root: Path) -> Iterator[EpisodeResult]:
    for path in sorted(root.rglob("scenario*_seed*.json")):
        yield load_result(path)


def _write(path: Path, result: EpisodeResult) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(result.to_json() + "\n", encoding="utf-8")
    tmp.replace(path)


def _run_pair(args: tuple[str, int, int, dict[str, Any], str, dict[str, Any], int]) -> EpisodeResult:
    substrate, scenario, seed, agent_rec, backend, options, max_steps = args
    reasoner = make_reasoner(backend, **dict(options))
    return run_agent_episode(
        substrate, scenario, seed, agent_config_from_record(agent_rec), reasoner, max_steps, backend
    )


def run_suite(config: RunConfig) -> tuple["SummaryTable", list[EpisodeResult]]:
    """Run every (scenario, seed) pair, skipping pairs that already have a result file.

    Results are written by this process only, one file per episode, as each
    episode finishes.
    """
    config.validate()
    done: dict[tuple[int, int], EpisodeResult] = {}
    todo = []
    for sc, seed in config.pairs():
        path = result_path(config.output, config.substrate, sc, seed) if config.output else None
        if path is not None and path.exists():
            try:
                done[(sc, seed)] = load_result(path)
                continue
            except (ValueError, json.JSONDecodeError, TypeError) as exc:
                log.warning("re-running %s: %s", path, exc)
        todo.append((sc, seed))
    jobs = [
        (config.substrate, sc, seed, config.agent.to_record(), config.backend, config.backend_options, config.max_steps)
        for sc, seed in todo
    ]

    def finished(result: EpisodeResult) -> None:
        done[(result.scenario, result.seed)] = result
        if config.output is not None:
            _write(result_path(config.output, config.substrate, result.scenario, result.seed), result)

    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for result in pool.map(_run_pair, jobs):
                finished(result)
    else:
        for job in jobs:
            finished(_run_pair(job))
    results = [done[p] for p in config.pairs()]
    table = SummaryTable.from_results(results)
    if config.output is not None:
        out = config.output / config.substrate
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(table.to_json() + "\n", encoding="utf-8")
        (out / "summary.md").write_text(table.to_markdown() + "\n", encoding="utf-8")
    return table, results


# -- summaries --------------------------------------------------------------------------------


@dataclass
class SummaryRow:
    substrate: str
    scenario: int
    agent: str
    mean: float | None
    sem: float | None
    episodes: int
    failed: int

    def to_record(self) -> dict[str, Any]:
        return {
            "substrate": self.substrate, "scenario": self.scenario, "agent": self.agent,
            "mean": self.mean, "sem": self.sem, "episodes": self.episodes, "failed": self.failed,
        }


def _agent_label(agent: dict[str, Any]) -> str:
    label = str(agent.get("label", agent.get("variant", "?")))
    if label == "tom":
        extras = []
        if agent.get("tom") is False:
            extras.append("no-tom")
        if agent.get("prompting") == "single":
            extras.append("single")
        if agent.get("evaluation") == "counterfactual":
            extras.append("counterfactual")
        label = "+".join([label, *extras])
    return label


def mean_sem(values: Sequence[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if len(arr) < 2:
        return mean, None
    return mean, float(arr.std(ddof=1) / math.sqrt(len(arr)))


@dataclass
class SummaryTable:
    rows: list[SummaryRow]

    @classmethod
    def from_results(cls, results: Iterable[EpisodeResult]) -> "SummaryTable":
        groups: dict[tuple[str, int, str], list[EpisodeResult]] = {}
        for r in results:
            groups.setdefault((r.substrate, r.scenario, _agent_label(r.agent)), []).append(r)
        rows = []
        for (sub, sc, agent), group in sorted(groups.items()):
            ok = [r.normalised_reward() for r in group if r.ok]
            mean, sem = mean_sem(ok)
            rows.append(SummaryRow(sub, sc, agent, mean, sem, len(ok), len(group) - len(ok)))
        return cls(rows)

    def to_json(self) -> str:
        return json.dumps(
            {"schema": SCHEMA_VERSION, "normalised_steps": NORMALISED_STEPS,
             "rows": [r.to_record() for r in self.rows]},
            sort_keys=True, indent=1,
        )

    def to_markdown(self) -> str:
        lines = [
            "| substrate | scenario | agent | mean reward / 1200 steps | SEM | episodes | failed |",
            "|---|---|---|---|---|---|---|",
        ]
        for r in self.rows:
            mean = "n/a" if r.mean is None else f"{r.mean:.2f}"
            sem = "n/a" if r.sem is None else f"{r.sem:.2f}"
            lines.append(f"| {r.substrate} | {r.scenario} | {r.agent} | {mean} | {sem} | {r.episodes} | {r.failed} |")
        return "\n".join(lines)


@dataclass
class OffsetPoint:
    offset: int
    mean: float
    low: float
    high: float
    n: int


@dataclass
class OffsetCurve:
    """Reward per interaction, aligned at each episode's first validation."""

    points: list[OffsetPoint]
    episodes: int
    excluded: int
    pre_mean: float | None
    post_mean: float | None

    def to_record(self) -> dict[str, Any]:
        return {
            "points": [vars(p) for p in self.points],
            "episodes": self.episodes,
            "excluded": self.excluded,
            "pre_mean": self.pre_mean,
            "post_mean": self.post_mean,
        }


def validation_index(interactions: Sequence[dict[str, Any]]) -> int | None:
    """Index of the first interaction after which a hypothesis was validated."""
    for i, rec in enumerate(interactions):
        if rec.get("validated"):
            return i
    return None


def interaction_offset_analysis(
    results: Iterable[EpisodeResult],
    n_boot: int = 1000,
    confidence: float = 0.95,
    seed: int = 0,
) -> OffsetCurve:
    """Mean reward by interaction offset from the first validation.

    Offset 0 is the interaction whose evaluation crossed the threshold; it
    counts as neither before nor after. The band is a percentile bootstrap
    of the mean at each offset.
    """
    by_offset: dict[int, list[float]] = {}
    used = excluded = 0
    for r in results:
        if not r.ok:
            continue
        v = validation_index(r.interactions)
        if v is None:
            excluded += 1
            continue
        used += 1
        for i, rec in enumerate(r.interactions):
            by_offset.setdefault(i - v, []).append(float(rec["reward"]))
    rng = np.random.default_rng(seed)
    tail = (1.0 - confidence) / 2
    points = []
    for offset in sorted(by_offset):
        vals = np.asarray(by_offset[offset], dtype=float)
        boots = rng.choice(vals, size=(n_boot, len(vals)), replace=True).mean(axis=1)
        points.append(OffsetPoint(
            offset, float(vals.mean()), float(np.quantile(boots, tail)),
            float(np.quantile(boots, 1 - tail)), len(vals),
        ))
    pre = [x for o, xs in by_offset.items() if o < 0 for x in xs]
    post = [x for o, xs in by_offset.items() if o > 0 for x in xs]
    return OffsetCurve(
        points, used, excluded,
        float(np.mean(pre)) if pre else None,
        float(np.mean(post)) if post else None,
    )


def plot_offset_curve(curve: OffsetCurve, path: Path) -> Path:
    """Write a PNG of the offset curve (needs matplotlib)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3.5))
    xs = [p.offset for p in curve.points]
    ax.plot(xs, [p.mean for p in curve.points], marker="o")
    ax.fill_between(xs, [p.low for p in curve.points], [p.high for p in curve.points], alpha=0.3)
    ax.axvline(0, color="grey", linestyle="--")
    ax.set_xlabel("interactions relative to first validation")
    ax.set_ylabel("mean reward per interaction")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
