"""TOP seqlogical frames: parsing, serialization and normal forms.

A frame string looks like::

    [in:add_time_timer add [sl:date_time ten minutes ] to the [sl:timer_name oven ] ]

Intents hold text tokens and slots; slots hold either text tokens (the slot
value) or exactly one nested intent. Brackets are always their own tokens, so
``oven]`` and ``]?]`` tokenize the same way as ``oven ]`` and ``] ? ]``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

from .errors import (
    BadLabel,
    EmptyNode,
    FrameParseError,
    MixedSlotChildren,
    RootNotIntent,
    TrailingGarbage,
    UnbalancedBrackets,
)

_TOKEN_RE = re.compile(r"\[|\]|[^\s\[\]]+")

INTENT_PREFIX = "in:"
SLOT_PREFIX = "sl:"


@dataclass(frozen=True)
class SlotNode:
    label: str
    children: tuple[Union[str, "IntentNode"], ...] = ()

    @property
    def nested(self) -> "IntentNode | None":
        if len(self.children) == 1 and isinstance(self.children[0], IntentNode):
            return self.children[0]
        return None

    @property
    def value_tokens(self) -> tuple[str, ...]:
        return tuple(c for c in self.children if isinstance(c, str))


@dataclass(frozen=True)
class IntentNode:
    label: str
    children: tuple[Union[str, SlotNode], ...] = ()

    @property
    def slots(self) -> tuple[SlotNode, ...]:
        return tuple(c for c in self.children if isinstance(c, SlotNode))


# The root of every parse is an intent.
ParseTree = IntentNode


def is_intent_label(label: str) -> bool:
    return label[:3].lower() == INTENT_PREFIX


def is_slot_label(label: str) -> bool:
    return label[:3].lower() == SLOT_PREFIX


def tokenize(s: str) -> list[str]:
    return _TOKEN_RE.findall(s)


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def _next(self) -> str:
        if self.pos >= len(self.tokens):
            raise UnbalancedBrackets("missing ']' at end of input")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def _label(self) -> str:
        label = self._next()
        if label == "]":
            raise EmptyNode(f"empty node at token {self.pos - 2}")
        if label == "[":
            raise BadLabel(f"node without label at token {self.pos - 2}")
        return label

    def node(self, parent: str | None):
        assert self._next() == "["
        label = self._label()
        if parent is None and not is_intent_label(label):
            raise RootNotIntent(f"root label {label!r} is not an intent")
        if parent == "intent" and not is_slot_label(label):
            raise BadLabel(f"{label!r} under an intent must be a slot")
        if parent == "slot" and not is_intent_label(label):
            raise BadLabel(f"{label!r} under a slot must be an intent")
        kind = "intent" if is_intent_label(label) else "slot"
        children: list = []
        while True:
            if self.pos >= len(self.tokens):
                raise UnbalancedBrackets(f"missing ']' for {label!r}")
            tok = self.tokens[self.pos]
            if tok == "]":
                self.pos += 1
                break
            if tok == "[":
                children.append(self.node(kind))
            else:
                self.pos += 1
                children.append(tok)
        if kind == "intent":
            return IntentNode(label, tuple(children))
        nested = [c for c in children if isinstance(c, IntentNode)]
        if nested and len(children) != 1:
            raise MixedSlotChildren(
                f"slot {label!r} mixes text and nested intents"
            )
        return SlotNode(label, tuple(children))


def parse_top(s: str) -> ParseTree:
    """Parse a frame string into a tree. Whitespace runs are insignificant."""
    tokens = tokenize(s)
    if not tokens:
        raise FrameParseError("empty frame string")
    if tokens[0] != "[":
        raise TrailingGarbage(f"text {tokens[0]!r} before the root bracket")
    p = _Parser(tokens)
    tree = p.node(None)
    if p.pos != len(tokens):
        raise TrailingGarbage(f"tokens after the root bracket: {tokens[p.pos:]!r}")
    return tree


def _ser(node, out: list[str]) -> None:
    out.append("[" + node.label)
    for c in node.children:
        if isinstance(c, str):
            out.append(c)
        else:
            _ser(c, out)
    out.append("]")


def serialize(t: IntentNode | SlotNode) -> str:
    out: list[str] = []
    _ser(t, out)
    return " ".join(out)


def _content(slot: SlotNode) -> str:
    return " ".join(c if isinstance(c, str) else serialize(c) for c in slot.children)


def decouple(t: ParseTree) -> ParseTree:
    """Drop text tokens sitting directly under intents; slot values stay."""
    slots = []
    for c in t.children:
        if isinstance(c, SlotNode):
            if c.nested is not None:
                c = SlotNode(c.label, (decouple(c.nested),))
            slots.append(c)
    return IntentNode(t.label, tuple(slots))


def canonicalize(t: ParseTree) -> ParseTree:
    """Decoupled form with each intent's slots sorted by (label, content)."""
    slots = []
    for c in t.children:
        if isinstance(c, SlotNode):
            if c.nested is not None:
                c = SlotNode(c.label, (canonicalize(c.nested),))
            slots.append(c)
    slots.sort(key=lambda s: (s.label, _content(s)))
    return IntentNode(t.label, tuple(slots))


def strip_values(t: ParseTree) -> ParseTree:
    """Remove every text token, keeping intents and slots in place."""
    slots = []
    for c in t.slots:
        if c.nested is not None:
            slots.append(SlotNode(c.label, (strip_values(c.nested),)))
        else:
            slots.append(SlotNode(c.label, ()))
    return IntentNode(t.label, tuple(slots))


def skeleton(t: ParseTree) -> str:
    """Canonical frame with every text token removed, serialized."""
    return serialize(strip_values(canonicalize(t)))


def canonical_string(s: str) -> str:
    return serialize(canonicalize(parse_top(s)))


def depth(t: ParseTree) -> int:
    """Maximum number of intents on any root-to-leaf path."""
    inner = [depth(s.nested) for s in t.slots if s.nested is not None]
    return 1 + max(inner, default=0)


def iter_nodes(t: IntentNode) -> Iterator[IntentNode | SlotNode]:
    """Pre-order walk over intents and slots."""
    yield t
    for s in t.slots:
        yield s
        if s.nested is not None:
            yield from iter_nodes(s.nested)


def intent_labels(t: ParseTree) -> list[str]:
    return [n.label for n in iter_nodes(t) if isinstance(n, IntentNode)]


def slot_labels(t: ParseTree) -> list[str]:
    return [n.label for n in iter_nodes(t) if isinstance(n, SlotNode)]
