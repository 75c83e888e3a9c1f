from __future__ import annotations

import sys
from collections import deque

import pytest

from mindgrid.core import EpisodeConfig, ResourceCell, WorldState, make_world
from mindgrid.layout import Layout, parse_layout

# textual observation of the reconstructed reference scene
REFERENCE = (
    "Player Position: {'player_0-S': [(21, 4)]}, "
    "Observable Yellow Box Locations: [(13, 10), (14, 11)], "
    "Observable Blue Box Locations: [], "
    "Observable Purple Box Locations: [(13, 11), (15, 11)]"
)


def grid(*rows: str, name: str = "test") -> Layout:
    """Layout from bare rows (the header line is added here)."""
    return parse_layout("\n".join([f"MINDGRID-MAP v1 {name}", *rows]))


def bfs_length(layout: Layout, src, dst, obstacles=frozenset()) -> int | None:
    """Independent shortest-path oracle: plain breadth-first search."""
    if src == dst:
        return 0
    seen = {src}
    queue = deque([(src, 0)])
    while queue:
        (x, y), d = queue.popleft()
        for nxt in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if nxt in seen or layout.blocked(nxt) or nxt in obstacles:
                continue
            if nxt == dst:
                return d + 1
            seen.add(nxt)
            queue.append((nxt, d + 1))
    return None


@pytest.fixture
def open_grid() -> Layout:
    return grid(*["....." for _ in range(5)])


def reference_scene() -> WorldState:
    """23x15 repeated-game world holding only the four boxes of the reference text."""
    world = make_world(EpisodeConfig("rws_repeated"))
    world.resources = {
        (13, 10): ResourceCell("rock_yellow"),
        (14, 11): ResourceCell("rock_yellow"),
        (13, 11): ResourceCell("paper_purple"),
        (15, 11): ResourceCell("paper_purple"),
    }
    me, other = world.players
    me.pos, me.orientation = (21, 4), "S"
    other.pos = None
    return world


def pytest_terminal_summary(terminalreporter) -> None:
    """Repeat the acceptance lines at the end of the run, captured or not."""
    module = sys.modules.get("test_acceptance")
    if module is not None and module.LINES:
        terminalreporter.section("acceptance criteria")
        for line in module.LINES:
            terminalreporter.write_line(line)
