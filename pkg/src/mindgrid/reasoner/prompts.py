"""Prompt templates stored as text files under ``mindgrid/data/prompts``.

Placeholders are ``{name}``; any other brace (for example an example literal
``{'action_plan': [...]}``) is left alone. The first line of every user
template is a ``[task: <name>]`` tag that names the request.
"""

from __future__ import annotations

import re
from functools import lru_cache
from typing import Any, Mapping

from ..layout import data_text

_PLACEHOLDER = re.compile(r"\{([a-z_][a-z0-9_]*)\}")
_TASK = re.compile(r"\[task: ([a-z_]+)\]")


class TemplateError(KeyError):
    pass


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return data_text("prompts", f"{name}.txt")


def placeholders(template: str) -> list[str]:
    return sorted(set(_PLACEHOLDER.findall(template)))


def render(template: str, fields: Mapping[str, Any]) -> str:
    def sub(m: re.Match[str]) -> str:
        key = m.group(1)
        if key not in fields:
            raise TemplateError(f"template field {key!r} has no value")
        return str(fields[key])

    return _PLACEHOLDER.sub(sub, template)


def render_named(name: str, fields: Mapping[str, Any]) -> str:
    return render(load_template(name), fields)


def task_of(text: str) -> str | None:
    """Last ``[task: ...]`` tag in ``text``."""
    found = _TASK.findall(text)
    return found[-1] if found else None
