"""Slot extraction from the pick-and-place prompt template and the task graph
built from it.

Accepted form (fixed words are case-insensitive, whitespace is free)::

    Pick up the <p>OBJECT</p> and place it in the <p>AREA</p>.
    And bring the <p>OBJECT</p> to <p>LOCATION</p>.

The second sentence is optional.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

OPEN, CLOSE = "<p>", "</p>"

DEFAULT_CLASSES = {"bottle": 0, "cup": 1, "box": 2, "book": 3, "can": 4, "mug": 5}


class TaskParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.message = message
        self.offset = offset


class TaskConsistencyError(TaskParseError):
    pass


class UnknownClassError(KeyError):
    pass


class Action(str, Enum):
    EXPLORE = "EXPLORE"
    APPROACH = "APPROACH"
    PICK = "PICK"
    PLACE = "PLACE"
    DELIVER = "DELIVER"


@dataclass(frozen=True)
class TaskSpec:
    target_class: str
    place_area: str
    destination: str | None
    raw_prompt: str = ""


@dataclass(frozen=True)
class TaskStep:
    action: Action
    argument: str


@dataclass(frozen=True)
class TaskGraph:
    steps: tuple[TaskStep, ...]

    @property
    def target_class(self) -> str:
        return self.steps[0].argument

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


def _check_tags(text: str) -> None:
    open_at = None
    for m in re.finditer(r"</?p>", text, flags=re.IGNORECASE):
        closing = m.group(0).startswith("</")
        if closing:
            if open_at is None:
                raise TaskParseError("closing </p> without an opening tag", m.start())
            open_at = None
        else:
            if open_at is not None:
                raise TaskParseError("unbalanced <p> tag", open_at)
            open_at = m.start()
    if open_at is not None:
        raise TaskParseError("unbalanced <p> tag", open_at)


class _Cursor:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def word(self, w: str):
        self.skip_ws()
        end = self.pos + len(w)
        chunk = self.text[self.pos:end]
        if chunk.lower() != w or (end < len(self.text) and self.text[end].isalnum()):
            raise TaskParseError(f"expected '{w}'", self.pos)
        self.pos = end

    def slot(self, name: str) -> tuple[str, int]:
        self.skip_ws()
        if self.text[self.pos:self.pos + len(OPEN)].lower() != OPEN:
            raise TaskParseError(f"expected <p> opening the {name} slot", self.pos)
        start = self.pos + len(OPEN)
        end = self.text.lower().find(CLOSE, start)
        value = self.text[start:end].strip()
        if not value:
            raise TaskParseError(f"empty {name} slot", self.pos)
        at = self.pos
        self.pos = end + len(CLOSE)
        return value, at

    def optional(self, ch: str) -> None:
        self.skip_ws()
        if self.text.startswith(ch, self.pos):
            self.pos += len(ch)

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)


def parse(prompt: str) -> TaskSpec:
    """Extract object, area and (optional) destination slots.

    Raises :class:`TaskParseError` with a character offset on malformed input
    and :class:`TaskConsistencyError` when the two object slots disagree.
    """
    _check_tags(prompt)
    cur = _Cursor(prompt)
    for w in ("pick", "up", "the"):
        cur.word(w)
    obj, _ = cur.slot("object")
    for w in ("and", "place", "it", "in", "the"):
        cur.word(w)
    area, _ = cur.slot("area")
    cur.optional(".")
    destination = None
    if not cur.at_end():
        for w in ("and", "bring", "the"):
            cur.word(w)
        obj2, at = cur.slot("object")
        if obj2.lower() != obj.lower():
            raise TaskConsistencyError(f"object slots disagree: '{obj}' vs '{obj2}'", at)
        cur.word("to")
        destination, _ = cur.slot("location")
        cur.optional(".")
        if not cur.at_end():
            raise TaskParseError("unexpected trailing text", cur.pos)
    return TaskSpec(obj, area, destination, prompt)


def render(spec: TaskSpec) -> str:
    text = f"Pick up the <p>{spec.target_class}</p> and place it in the <p>{spec.place_area}</p>."
    if spec.destination is not None:
        text += f" And bring the <p>{spec.target_class}</p> to <p>{spec.destination}</p>."
    return text


def to_graph(spec: TaskSpec) -> TaskGraph:
    steps = [
        TaskStep(Action.EXPLORE, spec.target_class),
        TaskStep(Action.APPROACH, spec.target_class),
        TaskStep(Action.PICK, spec.target_class),
        TaskStep(Action.PLACE, spec.place_area),
    ]
    if spec.destination is not None:
        steps.append(TaskStep(Action.DELIVER, spec.destination))
    return TaskGraph(tuple(steps))


def resolve_class(name: str, vocabulary: dict[str, int] | None = None) -> int:
    vocabulary = DEFAULT_CLASSES if vocabulary is None else vocabulary
    key = name.strip().lower()
    for k, v in vocabulary.items():
        if k.lower() == key:
            return v
    raise UnknownClassError(f"class '{name}' not in vocabulary {sorted(vocabulary)}")
