"""Pure-numpy reference kernels for the per-token hot path.

The compiled extension (guessgame._ckernels) implements the same signatures;
either backend can drive rollouts. Feature vector layout, with V vocabulary
tokens and P grammar predicates (F = 7 + V + 4P):

    [0]               posterior entropy (nats)
    [1]               max posterior probability
    [2:5]             top-3 posterior values, descending, zero-padded
    [5]               round / j_max
    [6]               position in question / m_max
    [7 : 7+V]         one-hot of last emitted token (zeros at episode start)
    [7+V : 7+V+P]     split score: posterior mass answering Yes, per predicate
    [7+V+P : 7+V+2P]  asked flag per predicate
    [7+V+2P : 7+V+3P] noiseless information gain per predicate (nats)
    [7+V+3P : F]      fresh gain: information gain zeroed for asked predicates
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def feature_dim(v_size: int, n_predicates: int) -> int:
    return 7 + v_size + 4 * n_predicates


def entropy(post: np.ndarray) -> float:
    p = post[post > 0.0]
    return float(-(p * np.log(p)).sum())


def info_gains(post: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Expected entropy reduction per predicate under noiseless answers."""
    plp = np.where(post > 0.0, post * np.log(np.where(post > 0.0, post, 1.0)), 0.0)
    h = -plp.sum()
    expected = np.zeros(codes.shape[0], dtype=np.float64)
    for a in range(3):
        ind = (codes == a).astype(np.float64)
        s = ind @ post
        t = ind @ plp
        pos = s > 0.0
        expected[pos] += -t[pos] + s[pos] * np.log(s[pos])
    return h - expected


def featurize(
    post: np.ndarray,
    codes: np.ndarray,
    asked: np.ndarray,
    last_token: int,
    j: int,
    m: int,
    j_max: int,
    m_max: int,
    v_size: int,
    out: np.ndarray | None = None,
) -> np.ndarray:
    n_pred = codes.shape[0]
    if out is None:
        out = np.zeros(feature_dim(v_size, n_pred), dtype=np.float64)
    else:
        out[:] = 0.0
    out[0] = entropy(post)
    top = np.sort(post)[::-1][:3]
    out[1] = top[0]
    out[2 : 2 + top.shape[0]] = top
    out[5] = j / j_max
    out[6] = m / m_max
    if last_token >= 0:
        out[7 + last_token] = 1.0
    base = 7 + v_size
    out[base : base + n_pred] = (codes == 0).astype(np.float64) @ post
    out[base + n_pred : base + 2 * n_pred] = asked
    gains = info_gains(post, codes)
    out[base + 2 * n_pred : base + 3 * n_pred] = gains
    out[base + 3 * n_pred : base + 4 * n_pred] = gains * (1.0 - asked)
    return out


def masked_softmax(logits: np.ndarray, mask: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    if out is None:
        out = np.empty_like(logits)
    legal = mask != 0
    if not legal.any():
        raise ValueError("all-false legality mask")
    mx = logits[legal].max()
    out[:] = 0.0
    e = np.exp(logits[legal] - mx)
    out[legal] = e / e.sum()
    return out


def policy_probs(
    w: np.ndarray,
    b: np.ndarray,
    feats: np.ndarray,
    mask: np.ndarray,
    out: np.ndarray | None = None,
) -> np.ndarray:
    return masked_softmax(w @ feats + b, mask, out=out)


def sample_index(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF draw; cumulative scan in index order for determinism."""
    cum = np.cumsum(probs)
    idx = int(np.searchsorted(cum, u, side="right"))
    if idx >= probs.shape[0]:
        idx = int(np.flatnonzero(probs > 0.0)[-1])
    return idx


def featurize_batch(
    post: np.ndarray,  # (R, Nmax)
    codes: np.ndarray,  # (R, P, Nmax) int8; padded columns carry code 3
    asked: np.ndarray,  # (R, P) uint8
    last: np.ndarray,  # (R,)
    j: np.ndarray,  # (R,)
    m: np.ndarray,  # (R,)
    j_max: int,
    m_max: int,
    v_size: int,
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Row-wise featurize for a batch of states (vectorized)."""
    r, n_pred = codes.shape[0], codes.shape[1]
    if out is None:
        out = np.zeros((r, 7 + v_size + 4 * n_pred))
    else:
        out[:] = 0.0
    safe = np.where(post > 0.0, post, 1.0)
    plp = np.where(post > 0.0, post * np.log(safe), 0.0)
    h = -plp.sum(axis=1)
    top3 = np.sort(post, axis=1)[:, ::-1][:, :3]
    out[:, 0] = h
    out[:, 1] = top3[:, 0]
    out[:, 2 : 2 + top3.shape[1]] = top3
    out[:, 5] = j / j_max
    out[:, 6] = m / m_max
    has_last = last >= 0
    out[np.flatnonzero(has_last), 7 + last[has_last]] = 1.0
    base = 7 + v_size
    expected = np.zeros((r, n_pred))
    for a in range(3):
        ind = (codes == a).astype(np.float64)
        s = np.einsum("rpn,rn->rp", ind, post)
        t = np.einsum("rpn,rn->rp", ind, plp)
        pos = s > 0.0
        expected[pos] += -t[pos] + s[pos] * np.log(s[pos])
        if a == 0:
            out[:, base : base + n_pred] = s
    out[:, base + n_pred : base + 2 * n_pred] = asked
    gains = h[:, None] - expected
    out[:, base + 2 * n_pred : base + 3 * n_pred] = gains
    out[:, base + 3 * n_pred :] = gains * (1.0 - asked)
    return out


def masked_softmax_batch(
    logits: np.ndarray, masks: np.ndarray, out: np.ndarray | None = None
) -> np.ndarray:
    if out is None:
        out = np.empty_like(logits)
    legal = masks != 0
    if not legal.any(axis=1).all():
        raise ValueError("all-false legality mask")
    lg = np.where(legal, logits, -np.inf)
    mx = lg.max(axis=1, keepdims=True)
    np.exp(lg - mx, out=out)
    out /= out.sum(axis=1, keepdims=True)
    return out


def sample_index_batch(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs, axis=1)
    acts = (cum > u[:, None]).argmax(axis=1)
    overflow = u >= cum[:, -1]
    for k in np.flatnonzero(overflow):
        acts[k] = int(np.flatnonzero(probs[k] > 0.0)[-1])
    return acts.astype(np.int64)


def bayes_update(
    post: np.ndarray,
    truth_codes: np.ndarray,
    observed: int,
    epsilon: float,
    out: np.ndarray | None = None,
) -> tuple[np.ndarray, bool]:
    """One filtering step; returns (new posterior, inconsistent flag)."""
    if out is None:
        out = np.empty_like(post)
    like = np.where(truth_codes == observed, 1.0 - epsilon, epsilon / 2.0)
    np.multiply(post, like, out=out)
    z = out.sum()
    if z <= 0.0:
        out[:] = 1.0 / post.shape[0]
        return out, True
    out /= z
    return out, False
