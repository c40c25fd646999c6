"""Question vocabulary and grammar.

Legal questions are the root-to-leaf paths of a prefix tree; every path ends
in "?" and maps to exactly one oracle predicate. The dialogue stop token
"<End>" is legal only at the root (between questions). Masks over the
vocabulary are precomputed per trie node so decoding never scores an illegal
token.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .oracle import (
    AttributePredicate,
    CategoryPredicate,
    Predicate,
    Question,
    SpatialPredicate,
)
from .world import GenConfig, Scene

END_TOKEN = "<End>"
QMARK_TOKEN = "?"

SPATIAL_REGIONS = ("left", "right", "top", "bottom")


class GrammarError(ValueError):
    """Token sequence is not a legal question."""


@dataclass(frozen=True)
class GrammarSpec:
    categories: bool = True
    attributes: bool = True
    spatial: bool = True

    def __post_init__(self):
        if not (self.categories or self.attributes or self.spatial):
            raise ValueError("grammar needs at least one template family")


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    index: dict[str, int] = field(compare=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate tokens")
        if END_TOKEN not in self.tokens or QMARK_TOKEN not in self.tokens:
            raise ValueError("vocabulary must contain '?' and '<End>'")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def end_id(self) -> int:
        return self.index[END_TOKEN]

    @property
    def qmark_id(self) -> int:
        return self.index[QMARK_TOKEN]


def templates_from_config(world_cfg: GenConfig, spec: GrammarSpec) -> list[tuple[tuple[str, ...], Predicate]]:
    """Enumerate (token sequence, predicate) templates in stable order."""
    out: list[tuple[tuple[str, ...], Predicate]] = []
    if spec.categories:
        for cat in world_cfg.categories:
            out.append((("is", "it", "a", cat, QMARK_TOKEN), CategoryPredicate(cat)))
    if spec.attributes:
        # values shared by several attributes need the qualified form
        seen: dict[str, int] = {}
        for attr in world_cfg.attributes.values():
            for v in attr.values:
                seen[v] = seen.get(v, 0) + 1
        for name, attr in world_cfg.attributes.items():
            for v in attr.values:
                if seen[v] > 1:
                    tokens = ("is", "the", name, v, QMARK_TOKEN)
                else:
                    tokens = ("is", "it", v, QMARK_TOKEN)
                out.append((tokens, AttributePredicate(name, v)))
    if spec.spatial:
        for region in SPATIAL_REGIONS:
            out.append((("is", "it", "in", "the", region, "half", QMARK_TOKEN), SpatialPredicate(region)))
    return out


class Grammar:
    """Prefix tree over question templates with per-node legality masks."""

    def __init__(self, templates: list[tuple[tuple[str, ...], Predicate]], m_max: int = 12):
        if not templates:
            raise ValueError("empty template list")
        self.m_max = int(m_max)
        words: list[str] = [END_TOKEN, QMARK_TOKEN]
        for tokens, _ in templates:
            for tok in tokens:
                if tok not in words:
                    words.append(tok)
        self.vocab = Vocabulary(tuple(words))
        self.predicates: tuple[Predicate, ...] = tuple(p for _, p in templates)
        self.templates: tuple[tuple[str, ...], ...] = tuple(t for t, _ in templates)

        self._children: list[dict[int, int]] = [{}]
        self._leaf_pred: list[int] = [-1]
        for pred_idx, (tokens, _) in enumerate(templates):
            if len(tokens) > self.m_max:
                raise ValueError(f"template {' '.join(tokens)} longer than m_max={self.m_max}")
            if tokens[-1] != QMARK_TOKEN:
                raise ValueError("templates must end in '?'")
            if QMARK_TOKEN in tokens[:-1] or END_TOKEN in tokens:
                raise ValueError("stop tokens may not appear inside a template")
            node = 0
            for tok in tokens:
                tid = self.vocab.index[tok]
                nxt = self._children[node].get(tid)
                if nxt is None:
                    nxt = len(self._children)
                    self._children.append({})
                    self._leaf_pred.append(-1)
                    self._children[node][tid] = nxt
                node = nxt
            if self._leaf_pred[node] != -1 or self._children[node]:
                raise ValueError(f"template {' '.join(tokens)} collides with another path")
            self._leaf_pred[node] = pred_idx

        v = len(self.vocab)
        self._masks = np.zeros((len(self._children), v), dtype=np.uint8)
        for nid, kids in enumerate(self._children):
            for tid in kids:
                self._masks[nid, tid] = 1
        self._masks[0, self.vocab.end_id] = 1  # dialogue may stop between questions

        # array form of the trie for batched rollouts
        self.child_table = np.full((len(self._children), v), -1, dtype=np.int32)
        for nid, kids in enumerate(self._children):
            for tid, child in kids.items():
                self.child_table[nid, tid] = child
        self.leaf_table = np.array(self._leaf_pred, dtype=np.int32)
        self.masks_array = self._masks

    @property
    def n_predicates(self) -> int:
        return len(self.predicates)

    @property
    def root(self) -> int:
        return 0

    def mask(self, node: int) -> np.ndarray:
        return self._masks[node]

    def child(self, node: int, token_id: int) -> int:
        try:
            return self._children[node][token_id]
        except KeyError:
            raise GrammarError(
                f"token {self.vocab.tokens[token_id]!r} illegal at this prefix"
            ) from None

    def leaf_predicate(self, node: int) -> int:
        """Predicate index if node is a completed question, else -1."""
        return self._leaf_pred[node]

    def walk(self, tokens) -> int:
        """Node reached by a token prefix; raises GrammarError off the trie."""
        node = 0
        for tok in tokens:
            tid = self.vocab.index.get(tok)
            if tid is None:
                raise GrammarError(f"unknown token {tok!r}")
            node = self.child(node, tid)
        return node

    def parse(self, tokens) -> Question:
        """Parse a complete question (must end in '?')."""
        tokens = tuple(tokens)
        node = self.walk(tokens)
        pred = self._leaf_pred[node]
        if pred == -1:
            raise GrammarError(f"incomplete question: {' '.join(tokens)}")
        return Question(tokens=tokens, predicate=self.predicates[pred])

    def question_for(self, pred_idx: int) -> Question:
        return Question(tokens=self.templates[pred_idx], predicate=self.predicates[pred_idx])

    def answer_table(self, scene: Scene) -> np.ndarray:
        """Noiseless answer codes, shape (n_predicates, n_objects), int8."""
        table = np.empty((self.n_predicates, scene.n_objects), dtype=np.int8)
        for p, pred in enumerate(self.predicates):
            for n, obj in enumerate(scene.objects):
                table[p, n] = int(pred.evaluate(obj))
        return table

    def hash(self) -> str:
        h = hashlib.sha256()
        for tok in self.vocab.tokens:
            h.update(tok.encode() + b"\x00")
        h.update(b"|")
        for tokens in self.templates:
            h.update(" ".join(tokens).encode() + b"\x00")
        h.update(str(self.m_max).encode())
        return h.hexdigest()[:16]


def build_grammar(world_cfg: GenConfig, spec: GrammarSpec, m_max: int = 12) -> Grammar:
    return Grammar(templates_from_config(world_cfg, spec), m_max=m_max)


def legal_tokens(grammar: Grammar, state) -> np.ndarray:
    """Boolean legality mask over the vocabulary for the state's prefix."""
    return grammar.mask(state.node)


def recognizes(templates, tokens) -> bool:
    """Independent recognizer: literal membership in the template list."""
    tokens = tuple(tokens)
    if tokens == (END_TOKEN,):
        return True
    return any(tokens == t for t in templates)
