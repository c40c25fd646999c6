"""Token-scoring policy and question decoding.

The policy is a linear map from state features to one logit per vocabulary
token; a masked softmax over the grammar's legal tokens gives the action
distribution, so illegal tokens carry exactly zero probability. The log
probability gradient is closed form. Decoding supports sampling, greedy
(ties to the lowest token index) and beam search (ties in lexicographic
token-index order).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .features import QuestionerState
from .grammar import Grammar  # noqa: F401  (part of the module's public surface)


class IllegalActionError(ValueError):
    pass


@dataclass
class Policy:
    w: np.ndarray  # (V, F)
    b: np.ndarray  # (V,)

    @classmethod
    def zeros(cls, v_size: int, feature_dim: int) -> "Policy":
        return cls(w=np.zeros((v_size, feature_dim)), b=np.zeros(v_size))

    @property
    def n_params(self) -> int:
        return self.w.size + self.b.size

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w.ravel(), self.b])

    def set_flat(self, theta: np.ndarray) -> None:
        self.w[...] = theta[: self.w.size].reshape(self.w.shape)
        self.b[...] = theta[self.w.size :]

    def copy(self) -> "Policy":
        return Policy(w=self.w.copy(), b=self.b.copy())

    def probs(self, feats: np.ndarray, mask: np.ndarray) -> np.ndarray:
        return kernels.policy_probs(self.w, self.b, feats, mask)


@dataclass
class PolicyGrad:
    dw: np.ndarray
    db: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.dw.ravel(), self.db])


def action_distribution(policy: Policy, state: QuestionerState, grammar: Grammar | None = None) -> np.ndarray:
    grammar = grammar or state.grammar
    return policy.probs(state.features(), grammar.mask(state.node))


def grad_log_prob(policy: Policy, state: QuestionerState, action: int) -> PolicyGrad:
    """d log pi(action | state) / d theta for the linear-softmax policy."""
    mask = state.grammar.mask(state.node)
    if not mask[action]:
        raise IllegalActionError(f"token {action} is masked at this state")
    feats = state.features()
    probs = policy.probs(feats, mask)
    coef = -probs
    coef[action] += 1.0
    return PolicyGrad(dw=np.outer(coef, feats), db=coef)


def _decode_sampling(policy, state, rng):
    grammar = state.grammar
    node, m, last = grammar.root, 0, state.last_token
    tokens: list[str] = []
    feats = np.empty(state.featurizer.dim)
    while True:
        state.featurizer.featurize(state.posterior.probs, state.table, state.asked, last, state.round_j, m, out=feats)
        probs = policy.probs(feats, grammar.mask(node))
        tok = kernels.sample_index(probs, rng.random())
        if m == 0 and tok == grammar.vocab.end_id:
            return (grammar.vocab.tokens[tok],)
        tokens.append(grammar.vocab.tokens[tok])
        node = grammar.child(node, tok)
        if grammar.leaf_predicate(node) != -1:
            return tuple(tokens)
        last, m = tok, m + 1


def _decode_greedy(policy, state):
    grammar = state.grammar
    node, m, last = grammar.root, 0, state.last_token
    tokens: list[str] = []
    feats = np.empty(state.featurizer.dim)
    while True:
        state.featurizer.featurize(state.posterior.probs, state.table, state.asked, last, state.round_j, m, out=feats)
        probs = policy.probs(feats, grammar.mask(node))
        tok = int(np.argmax(probs))  # ties resolve to the lowest token index
        if m == 0 and tok == grammar.vocab.end_id:
            return (grammar.vocab.tokens[tok],)
        tokens.append(grammar.vocab.tokens[tok])
        node = grammar.child(node, tok)
        if grammar.leaf_predicate(node) != -1:
            return tuple(tokens)
        last, m = tok, m + 1


def _decode_beam(policy, state, width):
    grammar = state.grammar
    vocab = grammar.vocab
    fz = state.featurizer
    # candidates: (logprob, token-id path, node, last token id, m, finished)
    # finished sequences stay in the pool and compete for beam slots, so
    # width 1 reproduces greedy decoding exactly
    pool = [(0.0, (), grammar.root, state.last_token, 0, False)]
    while any(not c[5] for c in pool):
        live = [c for c in pool if not c[5]]
        rows = len(live)
        post = np.empty((rows,) + state.posterior.probs.shape)
        post[:] = state.posterior.probs
        codes = np.empty((rows,) + state.table.shape, dtype=np.int8)
        codes[:] = state.table
        asked = np.empty((rows,) + state.asked.shape, dtype=np.uint8)
        asked[:] = state.asked
        feats = kernels.featurize_batch(
            post, codes, asked,
            np.array([c[3] for c in live], dtype=np.int64),
            np.full(rows, state.round_j, dtype=np.int64),
            np.array([c[4] for c in live], dtype=np.int64),
            fz.j_max, fz.m_max, len(vocab),
        )
        masks = grammar.masks_array[[c[2] for c in live]]
        probs = kernels.masked_softmax_batch(
            np.ascontiguousarray(feats @ policy.w.T + policy.b), masks
        )
        candidates = [c for c in pool if c[5]]
        for r, (logp, path, node, last, m, _) in enumerate(live):
            for tok in np.flatnonzero(probs[r] > 0.0):
                tok = int(tok)
                cand_logp = logp + float(np.log(probs[r, tok]))
                if m == 0 and tok == vocab.end_id:
                    candidates.append((cand_logp, (tok,), node, tok, m, True))
                    continue
                child = grammar.child(node, tok)
                done = grammar.leaf_predicate(child) != -1
                candidates.append((cand_logp, path + (tok,), child, tok, m + 1, done))
        candidates.sort(key=lambda c: (-c[0], c[1]))
        pool = candidates[:width]
    best = pool[0]
    return tuple(vocab.tokens[t] for t in best[1])


def decode_question(
    policy: Policy,
    state: QuestionerState,
    mode: str = "greedy",
    rng: int | np.random.Generator | None = None,
    beam_width: int = 5,
) -> tuple[str, ...]:
    """Decode one question (or the dialogue stop token) from a question
    boundary. The caller's state is not mutated."""
    if not state.at_question_boundary():
        raise ValueError("decoding must start at a question boundary")
    if mode == "sampling":
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        return _decode_sampling(policy, state, rng)
    if mode == "greedy":
        return _decode_greedy(policy, state)
    if mode == "beam":
        return _decode_beam(policy, state, beam_width)
    raise ValueError(f"unknown decode mode {mode!r}")
