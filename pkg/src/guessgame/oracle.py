"""Answering side of the game.

Questions parse to predicates over scene objects; the oracle evaluates the
predicate for the hidden target, optionally corrupting the answer with a
configurable noise rate. "NA" is returned when a question references an
attribute the object does not carry; category and spatial predicates always
apply.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .world import Scene, SceneObject


class Answer(IntEnum):
    YES = 0
    NO = 1
    NA = 2

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "Answer":
        return _BY_LABEL[label]


_LABELS = {Answer.YES: "Yes", Answer.NO: "No", Answer.NA: "NA"}
_BY_LABEL = {v: k for k, v in _LABELS.items()}


@dataclass(frozen=True)
class CategoryPredicate:
    category: str

    def evaluate(self, obj: SceneObject) -> Answer:
        return Answer.YES if obj.category == self.category else Answer.NO


@dataclass(frozen=True)
class AttributePredicate:
    attribute: str
    value: str

    def evaluate(self, obj: SceneObject) -> Answer:
        held = obj.attributes.get(self.attribute)
        if held is None:
            return Answer.NA
        return Answer.YES if held == self.value else Answer.NO


@dataclass(frozen=True)
class SpatialPredicate:
    region: str  # left / right / top / bottom half

    def evaluate(self, obj: SceneObject) -> Answer:
        x0, y0, x1, y1 = obj.box
        cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
        if self.region == "left":
            hit = cx < 0.5
        elif self.region == "right":
            hit = cx >= 0.5
        elif self.region == "bottom":
            hit = cy < 0.5
        elif self.region == "top":
            hit = cy >= 0.5
        else:
            raise ValueError(f"unknown region {self.region!r}")
        return Answer.YES if hit else Answer.NO


Predicate = CategoryPredicate | AttributePredicate | SpatialPredicate


@dataclass(frozen=True)
class Question:
    """A legal token sequence (ending in "?") and the predicate it parses to."""

    tokens: tuple[str, ...]
    predicate: Predicate

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class OracleConfig:
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in [0, 1), got {self.epsilon}")


def truth_answer(question: Question, obj: SceneObject) -> Answer:
    """Noiseless predicate semantics."""
    return question.predicate.evaluate(obj)


def answer(
    question: Question,
    obj: SceneObject,
    cfg: OracleConfig,
    rng: int | np.random.Generator,
) -> Answer:
    """Truth answer, corrupted with probability epsilon to one of the other
    two values uniformly."""
    truth = truth_answer(question, obj)
    if cfg.epsilon == 0.0:
        return truth
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    if rng.random() >= cfg.epsilon:
        return truth
    others = [a for a in Answer if a != truth]
    return others[0] if rng.random() < 0.5 else others[1]


def answer_all(question: Question, scene: Scene) -> list[Answer]:
    """Noiseless answer for every object in id order (the training probe)."""
    return [truth_answer(question, obj) for obj in scene.objects]
