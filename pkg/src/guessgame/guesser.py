"""Exact Bayesian guesser.

Tracks a posterior over the scene's objects given the dialog so far. The
likelihood model shares the oracle's corruption rate: an observed answer
matches an object's truth answer with probability 1 - epsilon, and each of
the two wrong answers has probability epsilon / 2. At epsilon = 0 an
inconsistent answer zeroes the whole posterior; that case falls back to the
uniform distribution with an inconsistency flag so rollouts can continue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .oracle import Answer, Question, truth_answer
from .world import Scene


@dataclass(frozen=True)
class Posterior:
    probs: np.ndarray
    inconsistent: bool = False

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or p.shape[0] < 1:
            raise ValueError("posterior must be a non-empty vector")
        if (p < 0).any() or abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError("posterior entries must be >= 0 and sum to 1")

    @classmethod
    def trusted(cls, probs: np.ndarray, inconsistent: bool = False) -> "Posterior":
        """Skip validation for vectors produced by the update kernel."""
        self = object.__new__(cls)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "inconsistent", inconsistent)
        return self


def init_posterior(scene: Scene) -> Posterior:
    n = scene.n_objects
    return Posterior(np.full(n, 1.0 / n))


def update_posterior(
    post: Posterior,
    question: Question,
    observed: Answer,
    scene: Scene,
    epsilon: float,
) -> Posterior:
    truth_codes = np.array(
        [int(truth_answer(question, obj)) for obj in scene.objects], dtype=np.int8
    )
    probs, inconsistent = kernels.bayes_update(
        post.probs, truth_codes, int(observed), float(epsilon)
    )
    return Posterior(probs, inconsistent=bool(inconsistent))


def guess(post: Posterior) -> int:
    """Argmax object id; ties resolve to the lowest id."""
    return int(np.argmax(post.probs))


def target_probability(post: Posterior, target_id: int) -> float:
    if not 0 <= target_id < post.probs.shape[0]:
        raise IndexError(f"target id {target_id} out of range")
    return float(post.probs[target_id])
