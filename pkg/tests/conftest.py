import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from coact.canvas.model import ROOT_ID, CanvasDocument  # noqa: E402
from coact.canvas.tools import ToolCall, apply_tool  # noqa: E402


def doc_with_frames() -> CanvasDocument:
    """Page with a horizontal auto-layout frame ``row`` and a free frame ``board``."""
    doc = CanvasDocument()
    apply_tool(doc, ToolCall("create_frame", {"parent_id": ROOT_ID, "new_id": "row", "name": "Row", "top_level": True,
                                              "layout_mode": "horizontal", "item_spacing": 10, "width": 800, "height": 200}))
    apply_tool(doc, ToolCall("create_frame", {"parent_id": ROOT_ID, "new_id": "board", "name": "Board", "top_level": True,
                                              "x": 900, "width": 600, "height": 600}))
    return doc


@pytest.fixture
def doc() -> CanvasDocument:
    return doc_with_frames()


@pytest.fixture
def rng() -> random.Random:
    return random.Random(1234)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
