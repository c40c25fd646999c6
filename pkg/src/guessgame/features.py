"""State featurization for the questioner policy.

The feature vector replaces a recurrent encoder: posterior shape statistics,
progress counters, the last emitted token, and per-predicate blocks (split
score under the current posterior, asked history, noiseless information
gain). Layout and semantics are fixed by the kernel contract in
_kernels.pyref.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kernels
from .grammar import Grammar
from .guesser import Posterior, init_posterior
from .oracle import Answer, Question
from .world import Scene


class Featurizer:
    def __init__(self, grammar: Grammar, j_max: int):
        self.grammar = grammar
        self.j_max = int(j_max)
        self.m_max = grammar.m_max
        self.dim = kernels.feature_dim(len(grammar.vocab), grammar.n_predicates)

    def table(self, scene: Scene) -> np.ndarray:
        return self.grammar.answer_table(scene)

    def featurize(
        self,
        posterior: np.ndarray,
        table: np.ndarray,
        asked: np.ndarray,
        last_token: int,
        round_j: int,
        m: int,
        out: np.ndarray | None = None,
    ) -> np.ndarray:
        return kernels.featurize(
            posterior, table, asked, int(last_token), int(round_j), int(m),
            self.j_max, self.m_max, len(self.grammar.vocab), out,
        )


@dataclass
class QuestionerState:
    """Mutable per-episode state: dialog history plus the current prefix."""

    featurizer: Featurizer
    scene: Scene
    table: np.ndarray
    posterior: Posterior
    asked: np.ndarray
    history: list[tuple[Question, Answer]] = field(default_factory=list)
    round_j: int = 1
    m: int = 0
    node: int = 0
    last_token: int = -1
    t: int = 0

    @classmethod
    def initial(
        cls, featurizer: Featurizer, scene: Scene, table: np.ndarray | None = None
    ) -> "QuestionerState":
        return cls(
            featurizer=featurizer,
            scene=scene,
            table=featurizer.table(scene) if table is None else table,
            posterior=init_posterior(scene),
            asked=np.zeros(featurizer.grammar.n_predicates, dtype=np.uint8),
        )

    @property
    def grammar(self) -> Grammar:
        return self.featurizer.grammar

    def at_question_boundary(self) -> bool:
        return self.m == 0 and self.node == self.grammar.root

    def features(self, out: np.ndarray | None = None) -> np.ndarray:
        return self.featurizer.featurize(
            self.posterior.probs, self.table, self.asked,
            self.last_token, self.round_j, self.m, out,
        )


def features(state: QuestionerState) -> np.ndarray:
    """Feature vector of a state (deterministic in the state)."""
    return state.features()
