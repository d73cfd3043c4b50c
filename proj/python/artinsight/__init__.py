"""Python access to the artinsight core.

The native module speaks JSON strings; these wrappers hand back plain dicts
and lists.
"""

from __future__ import annotations

import json
from typing import Any, Mapping, Optional

from . import _core
from ._core import Error, compute_total, prompt_blocks, prompt_revision

__all__ = [
    "Engine",
    "Error",
    "Store",
    "aggregate",
    "apply_override",
    "assemble_prompt",
    "compute_total",
    "override_cell",
    "parse_scorecard",
    "prompt_blocks",
    "prompt_revision",
    "render_report",
    "sample_for_review",
]


def _dump(value: Any) -> str:
    return value if isinstance(value, str) else json.dumps(value)


def parse_scorecard(raw: str, require_rationale: bool = True) -> dict:
    """Parse a judge answer; returns {"card": ..., "warnings": [...]}."""
    return json.loads(_core.parse_scorecard(raw, require_rationale))


def apply_override(card: Mapping | str, corrections: Mapping[str, int], note: str) -> dict:
    return json.loads(_core.apply_override(_dump(card), dict(corrections), note))


def assemble_prompt(transcript: Optional[str] = None) -> str:
    return _core.assemble_prompt(transcript)


def aggregate(run: Mapping | str) -> dict[str, float]:
    return _core.aggregate(_dump(run))


def render_report(run: Mapping | str, format: str = "markdown") -> str:
    return _core.render_report(_dump(run), format)


def sample_for_review(run: Mapping | str, count: int, seed: int) -> list[dict]:
    return json.loads(_core.sample_for_review(_dump(run), count, seed))


def override_cell(run: Mapping | str, image_id: str, model_id: str,
                  corrections: Mapping[str, int], note: str) -> dict:
    return json.loads(_core.override_cell(_dump(run), image_id, model_id, dict(corrections), note))


class Engine:
    """Description engine and judge. Keys come from the provider's env var."""

    def __init__(self, config_path: Optional[str] = None, mock: bool = False):
        self._native = _core.Engine(config_path, mock)

    @property
    def default_model_id(self) -> str:
        return self._native.default_model_id

    @property
    def prompt_revision(self) -> str:
        return self._native.prompt_revision

    def describe(self, image: bytes, model_id: Optional[str] = None,
                 transcript: Optional[str] = None) -> dict:
        return json.loads(self._native.describe(image, model_id, transcript))

    def score(self, image: bytes, description: str, judge_model_id: Optional[str] = None) -> dict:
        return json.loads(self._native.score(image, description, judge_model_id))


class Store:
    """Read access to a session store directory."""

    def __init__(self, root: str):
        self._native = _core.Store(str(root))

    def __len__(self) -> int:
        return self._native.session_count()

    def list_sessions(self, page: int = 0, page_size: int = 50) -> list[dict]:
        return json.loads(self._native.list_sessions(page, page_size))

    def load_session(self, session_id: str) -> dict:
        return json.loads(self._native.load_session(session_id))

    def list_runs(self) -> list[str]:
        return self._native.list_runs()

    def load_run(self, run_id: str) -> dict:
        return json.loads(self._native.load_run(run_id))
