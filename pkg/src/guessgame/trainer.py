"""Episode rollouts and policy optimization.

One episode engine drives every consumer: REINFORCE training (token-by-token
sampling), evaluation (whole-question decoding), expert demonstrations for
supervised pretraining, and forced-action replay verification. Per-episode
randomness comes from two derived streams (token sampling, oracle noise), so
replaying recorded actions reproduces every reward bit for bit.

The policy gradient is the batch mean of per-episode sums of the score times
the baseline-subtracted return; the baseline is a small value network trained
on squared error against the same returns.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as kernels
from .baseline import BaselineNet
from .config import Config, config_hash, serialize_config
from .features import Featurizer, QuestionerState
from .grammar import Grammar, build_grammar
from .guesser import Posterior, guess
from .oracle import Answer, OracleConfig, Question, answer as oracle_answer
from .policy import Policy, PolicyGrad
from .rewards import (
    RewardConfig,
    RoundOutcome,
    TerminalOutcome,
    returns as suffix_returns,
    reward_values,
)
from .seeding import derive_seed, rng_for
from .world import GameInstance, Scene, make_splits


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class RoundRecord:
    question: tuple[str, ...]
    answer: Answer
    p_target: float
    informative: bool
    progressive: float | None
    inconsistent: bool
    posterior: np.ndarray


@dataclass
class Trajectory:
    scene_id: int
    target_id: int
    seed: int
    features: np.ndarray  # (T, F); empty when steps were not recorded
    actions: np.ndarray  # (T,)
    masks: np.ndarray  # (T, V)
    rewards: np.ndarray  # (T,)
    returns: np.ndarray  # (T,)
    rounds: list[RoundRecord]
    success: bool
    guessed: int
    ended_by_stop: bool

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)

    @property
    def n_steps(self) -> int:
        return int(self.actions.shape[0])

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())

    @property
    def question_texts(self) -> list[str]:
        return [" ".join(r.question) for r in self.rounds]


class _PolicyActor:
    """Samples one token at a time from the policy."""

    needs_features = True

    def __init__(self, policy: Policy):
        self.policy = policy

    def next_token(self, state, feats, mask, rng):
        probs = self.policy.probs(feats, mask)
        return kernels.sample_index(probs, rng.random())


class _PlanActor:
    """Plans a whole question at each boundary (decoder or expert)."""

    needs_features = False

    def __init__(self, plan):
        self.plan = plan  # (state, rng) -> token tuple
        self._queue: list[int] = []

    def next_token(self, state, feats, mask, rng):
        if not self._queue:
            tokens = self.plan(state, rng)
            self._queue = [state.grammar.vocab.index[t] for t in tokens]
        return self._queue.pop(0)


class _ForcedActor:
    """Replays a recorded action sequence."""

    needs_features = False

    def __init__(self, actions):
        self.actions = list(actions)
        self.pos = 0

    def next_token(self, state, feats, mask, rng):
        if self.pos >= len(self.actions):
            raise ValueError("recorded episode ended before the dialogue did")
        a = self.actions[self.pos]
        self.pos += 1
        return a


def apply_round(
    state: QuestionerState,
    question_tokens: tuple[str, ...],
    pred_idx: int,
    target_id: int,
    oracle_cfg: OracleConfig,
    rng_oracle: np.random.Generator,
    prev_p: float | None,
) -> RoundRecord:
    """Close a question round: oracle answer, posterior update, bookkeeping.

    The single authority for round semantics; the rollout engine and the
    human-study service both go through here."""
    grammar = state.grammar
    question = Question(tokens=question_tokens, predicate=grammar.predicates[pred_idx])
    truth_row = state.table[pred_idx]
    observed = oracle_answer(question, state.scene.objects[target_id], oracle_cfg, rng_oracle)
    informative = bool((truth_row != truth_row[0]).any())
    probs, inconsistent = kernels.bayes_update(
        state.posterior.probs, truth_row, int(observed), oracle_cfg.epsilon
    )
    state.posterior = Posterior.trusted(probs, inconsistent=bool(inconsistent))
    p_now = float(probs[target_id])
    record = RoundRecord(
        question=question.tokens,
        answer=observed,
        p_target=p_now,
        informative=informative,
        progressive=None if prev_p is None else p_now - prev_p,
        inconsistent=bool(inconsistent),
        posterior=probs.copy(),
    )
    state.asked[pred_idx] = 1
    state.history.append((question, observed))
    state.node = grammar.root
    state.m = 0
    state.round_j += 1
    return record


def run_episode(
    actor,
    featurizer: Featurizer,
    scene: Scene,
    target_id: int,
    oracle_cfg: OracleConfig,
    reward_cfg: RewardConfig,
    seed: int,
    record_steps: bool = True,
    table: "np.ndarray | None" = None,
) -> Trajectory:
    """Play one full game and assemble step rewards and returns.

    Transitions follow the three cases of the token MDP: "?" closes the round
    and queries the oracle, "<End>" (legal only between questions) ends the
    dialogue and triggers the guess, anything else extends the question. A
    dialogue that completes j_max rounds without "<End>" is force-terminated.
    """
    GameInstance(scene=scene, target_id=target_id)  # validates
    grammar = featurizer.grammar
    vocab = grammar.vocab
    rng_tokens = rng_for(seed, "tokens")
    rng_oracle = rng_for(seed, "oracle")
    state = QuestionerState.initial(featurizer, scene, table=table)
    j_max, m_max = featurizer.j_max, featurizer.m_max
    max_steps = j_max * m_max

    want_feats = record_steps or actor.needs_features
    feat_rows = np.empty((max_steps, featurizer.dim)) if record_steps else None
    act_list: list[int] = []
    mask_rows = np.empty((max_steps, len(vocab)), dtype=np.uint8) if record_steps else None

    rounds: list[RoundRecord] = []
    part_tokens: list[str] = []
    ended_by_stop = False
    prev_p: float | None = None
    t = 0

    while True:
        mask = grammar.mask(state.node)
        feats = state.features() if want_feats else None
        a = int(actor.next_token(state, feats, mask, rng_tokens))
        if not mask[a]:
            raise ValueError(f"illegal action {vocab.tokens[a]!r} at step {t}")
        if record_steps:
            feat_rows[t] = feats
            mask_rows[t] = mask
        act_list.append(a)
        t += 1
        state.t = t

        if state.m == 0 and a == vocab.end_id:
            ended_by_stop = True
            break

        child = grammar.child(state.node, a)
        part_tokens.append(vocab.tokens[a])
        pred_idx = grammar.leaf_predicate(child)
        if pred_idx == -1:
            state.node = child
            state.m += 1
            state.last_token = a
            continue

        # "?" emitted: the round closes
        rounds.append(
            apply_round(state, tuple(part_tokens), pred_idx, target_id, oracle_cfg,
                        rng_oracle, prev_p)
        )
        prev_p = rounds[-1].p_target
        part_tokens = []
        state.last_token = a
        if len(rounds) == j_max:
            break

    guessed = guess(state.posterior)
    success = guessed == target_id
    terminal = TerminalOutcome(success=success, rounds=len(rounds), ended_by_stop=ended_by_stop)
    outcomes = [
        RoundOutcome(n_steps=len(r.question), progressive=r.progressive, informative=r.informative)
        for r in rounds
    ]
    rewards = np.asarray(reward_values(outcomes, terminal, reward_cfg))
    assert rewards.shape[0] == t <= max_steps

    return Trajectory(
        scene_id=scene.id,
        target_id=target_id,
        seed=seed,
        features=feat_rows[:t].copy() if record_steps else np.empty((0, featurizer.dim)),
        actions=np.array(act_list, dtype=np.int64),
        masks=mask_rows[:t].copy() if record_steps else np.empty((0, len(vocab)), dtype=np.uint8),
        rewards=rewards,
        returns=suffix_returns(rewards),
        rounds=rounds,
        success=success,
        guessed=guessed,
        ended_by_stop=ended_by_stop,
    )


def rollout_episode(
    scene: Scene,
    target_id: int,
    policy: Policy,
    oracle_cfg: OracleConfig,
    reward_cfg: RewardConfig,
    grammar: Grammar,
    seed: int,
    featurizer: Featurizer | None = None,
    record_steps: bool = True,
) -> Trajectory:
    """Sample one training episode from the policy."""
    featurizer = featurizer or Featurizer(grammar, reward_cfg.j_max)
    return run_episode(
        _PolicyActor(policy), featurizer, scene, target_id, oracle_cfg, reward_cfg, seed,
        record_steps=record_steps,
    )


def replay_episode(
    scene: Scene,
    target_id: int,
    actions,
    oracle_cfg: OracleConfig,
    reward_cfg: RewardConfig,
    featurizer: Featurizer,
    seed: int,
) -> Trajectory:
    """Re-execute recorded actions; rewards must reproduce bit for bit."""
    return run_episode(
        _ForcedActor(actions), featurizer, scene, target_id, oracle_cfg, reward_cfg, seed,
        record_steps=False,
    )


# -- batched rollouts ------------------------------------------------------------


def rollout_batch(
    jobs: list[tuple[Scene, int, int]],
    featurizer: Featurizer,
    policy: Policy,
    oracle_cfg: OracleConfig,
    reward_cfg: RewardConfig,
    table_cache: dict | None = None,
) -> list[Trajectory]:
    """Sample a batch of episodes in lockstep (the training hot path).

    Oracle answering and posterior updates run per episode through the same
    code as the serial engine, so recorded episodes replay bit-exactly; only
    featurization and token scoring are vectorized across the batch.
    """
    grammar = featurizer.grammar
    vocab = grammar.vocab
    end_id = vocab.end_id
    j_max, m_max = featurizer.j_max, featurizer.m_max
    max_steps = j_max * m_max
    b = len(jobs)
    n_pred = grammar.n_predicates
    v_size = len(vocab)
    n_max = max(scene.n_objects for scene, _, _ in jobs)

    tables = np.full((b, n_pred, n_max), 3, dtype=np.int8)
    post = np.zeros((b, n_max))
    states = []
    for i, (scene, target, seed) in enumerate(jobs):
        table = None
        if table_cache is not None:
            table = table_cache.get(scene.id)
            if table is None:
                table = table_cache[scene.id] = featurizer.table(scene)
        st = QuestionerState.initial(featurizer, scene, table=table)
        states.append(st)
        tables[i, :, : scene.n_objects] = st.table
        post[i, : scene.n_objects] = 1.0 / scene.n_objects

    u_tok = np.stack([rng_for(seed, "tokens").random(max_steps) for _, _, seed in jobs])
    rng_oracle = [rng_for(seed, "oracle") for _, _, seed in jobs]

    asked = np.zeros((b, n_pred), dtype=np.uint8)
    node = np.zeros(b, dtype=np.int64)
    m = np.zeros(b, dtype=np.int64)
    last = np.full(b, -1, dtype=np.int64)
    round_j = np.ones(b, dtype=np.int64)
    alive = np.ones(b, dtype=bool)
    ended_by_stop = np.zeros(b, dtype=bool)
    steps = np.zeros(b, dtype=np.int64)
    prev_p = [None] * b
    parts: list[list[str]] = [[] for _ in range(b)]
    rounds: list[list[RoundRecord]] = [[] for _ in range(b)]

    feats_store = np.empty((b, max_steps, featurizer.dim))
    masks_store = np.empty((b, max_steps, v_size), dtype=np.uint8)
    acts_store = np.empty((b, max_steps), dtype=np.int64)

    while alive.any():
        rows = np.flatnonzero(alive)
        feats = kernels.featurize_batch(
            post[rows], tables[rows], asked[rows], last[rows], round_j[rows], m[rows],
            j_max, m_max, v_size,
        )
        masks = grammar.masks_array[node[rows]]
        probs = kernels.masked_softmax_batch(np.ascontiguousarray(feats @ policy.w.T + policy.b), masks)
        u = np.ascontiguousarray(u_tok[rows, steps[rows]])
        acts = kernels.sample_index_batch(probs, u)

        feats_store[rows, steps[rows]] = feats
        masks_store[rows, steps[rows]] = masks
        acts_store[rows, steps[rows]] = acts
        steps[rows] += 1

        is_end = (m[rows] == 0) & (acts == end_id)
        for k in np.flatnonzero(is_end):
            r = rows[k]
            alive[r] = False
            ended_by_stop[r] = True

        rest = ~is_end
        rest_rows = rows[rest]
        rest_acts = acts[rest]
        childs = grammar.child_table[node[rest_rows], rest_acts]
        leafs = grammar.leaf_table[childs]
        closing = leafs != -1

        adv_rows = rest_rows[~closing]
        node[adv_rows] = childs[~closing]
        m[adv_rows] += 1
        last[adv_rows] = rest_acts[~closing]
        for r, a in zip(adv_rows, rest_acts[~closing]):
            parts[r].append(vocab.tokens[a])

        for r, a, pred_idx in zip(rest_rows[closing], rest_acts[closing], leafs[closing]):
            scene, target, _ = jobs[r]
            st = states[r]
            st.posterior = Posterior.trusted(post[r, : scene.n_objects].copy())
            st.node = int(node[r])
            st.m = int(m[r])
            st.round_j = int(round_j[r])
            st.t = int(steps[r])
            rec = apply_round(
                st, tuple(parts[r]) + (vocab.tokens[a],), int(pred_idx), target,
                oracle_cfg, rng_oracle[r], prev_p[r],
            )
            rounds[r].append(rec)
            prev_p[r] = rec.p_target
            post[r, : scene.n_objects] = st.posterior.probs
            asked[r, pred_idx] = 1
            parts[r] = []
            node[r] = 0
            m[r] = 0
            last[r] = a
            round_j[r] += 1
            if len(rounds[r]) == j_max:
                alive[r] = False

    out = []
    for i, (scene, target, seed) in enumerate(jobs):
        n = scene.n_objects
        guessed = int(np.argmax(post[i, :n]))
        success = guessed == target
        terminal = TerminalOutcome(
            success=success, rounds=len(rounds[i]), ended_by_stop=bool(ended_by_stop[i])
        )
        outcomes = [
            RoundOutcome(n_steps=len(r.question), progressive=r.progressive,
                         informative=r.informative)
            for r in rounds[i]
        ]
        rewards = np.asarray(reward_values(outcomes, terminal, reward_cfg))
        t = int(steps[i])
        out.append(
            Trajectory(
                scene_id=scene.id,
                target_id=target,
                seed=seed,
                features=feats_store[i, :t].copy(),
                actions=acts_store[i, :t].copy(),
                masks=masks_store[i, :t].copy(),
                rewards=rewards,
                returns=suffix_returns(rewards),
                rounds=rounds[i],
                success=success,
                guessed=guessed,
                ended_by_stop=bool(ended_by_stop[i]),
            )
        )
    return out


# -- gradient estimation -------------------------------------------------------


def _batched_masked_probs(logits: np.ndarray, masks: np.ndarray) -> np.ndarray:
    neg_inf = np.float64(-np.inf)
    lg = np.where(masks != 0, logits, neg_inf)
    mx = lg.max(axis=1, keepdims=True)
    p = np.exp(lg - mx)
    p /= p.sum(axis=1, keepdims=True)
    return p


def gradient_from_steps(
    policy: Policy,
    feats: np.ndarray,
    actions: np.ndarray,
    masks: np.ndarray,
    weights: np.ndarray,
    n_episodes: int,
    expected_score: bool = False,
    entropy_bonus: float = 0.0,
) -> PolicyGrad:
    """Sum over steps of weight * grad log pi(action), divided by n_episodes."""
    logits = feats @ policy.w.T + policy.b
    probs = _batched_masked_probs(logits, masks)
    coef = -probs.copy()
    coef[np.arange(actions.shape[0]), actions] += 1.0
    w = weights
    if expected_score:
        # Rao-Blackwell reading of the all-actions sum: unsampled actions are
        # filled with the baseline, which collapses to scaling by pi(a|s)
        w = w * probs[np.arange(actions.shape[0]), actions]
    coef *= w[:, None]
    if entropy_bonus > 0.0:
        logp = np.log(np.where(probs > 0.0, probs, 1.0))
        ent = -(probs * logp).sum(axis=1, keepdims=True)
        coef += entropy_bonus * probs * (-logp - ent) * (masks != 0)
    dw = coef.T @ feats
    db = coef.sum(axis=0)
    dw /= n_episodes
    db /= n_episodes
    return PolicyGrad(dw=dw, db=db)


def policy_gradient(
    batch: list[Trajectory],
    policy: Policy,
    baseline: BaselineNet | None,
    expected_score: bool = False,
    entropy_bonus: float = 0.0,
    normalize_advantage: bool = False,
) -> PolicyGrad:
    """REINFORCE gradient with the learned baseline held constant."""
    if not batch:
        raise ValueError("empty batch")
    feats = np.concatenate([tr.features for tr in batch])
    actions = np.concatenate([tr.actions for tr in batch])
    masks = np.concatenate([tr.masks for tr in batch])
    rets = np.concatenate([tr.returns for tr in batch])
    if feats.shape[0] != actions.shape[0]:
        raise ValueError("batch was rolled out without step recording")
    adv = rets - (baseline.predict(feats) if baseline is not None else 0.0)
    if normalize_advantage:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return gradient_from_steps(
        policy, feats, actions, masks, adv, len(batch),
        expected_score=expected_score, entropy_bonus=entropy_bonus,
    )


def baseline_update(batch: list[Trajectory], baseline: BaselineNet, lr: float) -> float:
    """One SGD step of the value net on this batch; returns the pre-step loss."""
    if not batch:
        raise ValueError("empty batch")
    feats = np.concatenate([tr.features for tr in batch])
    rets = np.concatenate([tr.returns for tr in batch])
    return baseline.sgd_step(feats, rets, lr)


# -- scripted expert and supervised pretraining --------------------------------


def expert_question(
    featurizer: Featurizer,
    state: QuestionerState,
    stop_threshold: float = 0.95,
) -> tuple[str, ...]:
    """Greedy information-gain question choice under noiseless semantics."""
    grammar = featurizer.grammar
    if float(state.posterior.probs.max()) > stop_threshold:
        return (grammar.vocab.tokens[grammar.vocab.end_id],)
    unasked = np.flatnonzero(state.asked == 0)
    if unasked.shape[0] == 0:
        return (grammar.vocab.tokens[grammar.vocab.end_id],)
    gains = kernels.info_gains(state.posterior.probs, state.table)
    best = int(unasked[np.argmax(gains[unasked])])
    return grammar.question_for(best).tokens


def expert_episode(
    featurizer: Featurizer,
    scene: Scene,
    target_id: int,
    oracle_cfg: OracleConfig,
    reward_cfg: RewardConfig,
    seed: int,
    stop_threshold: float = 0.95,
) -> Trajectory:
    actor = _PlanActor(lambda state, rng: expert_question(featurizer, state, stop_threshold))
    return run_episode(
        actor, featurizer, scene, target_id, oracle_cfg, reward_cfg, seed, record_steps=True
    )


def supervised_nll(policy: Policy, episodes: list[Trajectory]) -> float:
    """Mean per-episode total negative log likelihood of recorded actions."""
    feats = np.concatenate([tr.features for tr in episodes])
    actions = np.concatenate([tr.actions for tr in episodes])
    masks = np.concatenate([tr.masks for tr in episodes])
    probs = _batched_masked_probs(feats @ policy.w.T + policy.b, masks)
    logp = np.log(probs[np.arange(actions.shape[0]), actions])
    return float(-logp.sum() / len(episodes))


def supervised_step(policy: Policy, episodes: list[Trajectory], lr: float) -> float:
    """One SGD step on the token NLL; returns the pre-step NLL."""
    nll = supervised_nll(policy, episodes)
    feats = np.concatenate([tr.features for tr in episodes])
    actions = np.concatenate([tr.actions for tr in episodes])
    masks = np.concatenate([tr.masks for tr in episodes])
    grad = gradient_from_steps(
        policy, feats, actions, masks, np.ones(actions.shape[0]), len(episodes)
    )
    policy.w += lr * grad.dw
    policy.b += lr * grad.db
    return nll


def generate_expert_episodes(
    featurizer: Featurizer,
    scenes: list[Scene],
    n_episodes: int,
    oracle_cfg: OracleConfig,
    reward_cfg: RewardConfig,
    master_seed: int,
    stop_threshold: float = 0.95,
    allowed_targets: dict[int, list[int]] | None = None,
) -> list[Trajectory]:
    episodes = []
    for i in range(n_episodes):
        rng = rng_for(master_seed, "expert-pick", i)
        scene = scenes[int(rng.integers(len(scenes)))]
        pool = allowed_targets[scene.id] if allowed_targets else range(scene.n_objects)
        target = int(pool[int(rng.integers(len(pool)))])
        episodes.append(
            expert_episode(
                featurizer, scene, target, oracle_cfg, reward_cfg,
                derive_seed(master_seed, "expert-episode", i), stop_threshold,
            )
        )
    return episodes


def pretrain_supervised(
    episodes: list[Trajectory],
    policy: Policy,
    epochs: int,
    batch: int,
    lr: float,
    master_seed: int,
) -> list[float]:
    """SGD on the masked-softmax NLL over expert token sequences.

    Returns the dataset NLL logged once per epoch (post-update)."""
    history = []
    for e in range(epochs):
        order = rng_for(master_seed, "pretrain-shuffle", e).permutation(len(episodes))
        for lo in range(0, len(order), batch):
            chunk = [episodes[i] for i in order[lo : lo + batch]]
            supervised_step(policy, chunk, lr)
        history.append(supervised_nll(policy, episodes))
    return history


# -- the training loop ----------------------------------------------------------


@dataclass
class TrainResult:
    policy: Policy
    baseline: BaselineNet
    grammar: Grammar
    featurizer: Featurizer
    train_scenes: list[Scene]
    test_scenes: list[Scene]
    target_log: dict[int, set]
    checkpoint_path: Path | None
    metrics_path: Path | None
    epoch_stats: list[dict]


_worker_ctx: dict = {}


def _worker_init(config_toml: str, master_seed: int):
    from .config import parse_config

    cfg = parse_config(config_toml)
    grammar = build_grammar(cfg.world, cfg.grammar, cfg.questioner.m_max)
    featurizer = Featurizer(grammar, cfg.rewards.j_max)
    train_scenes, test_scenes = make_splits(
        cfg.sizes.n_train_scenes, cfg.sizes.n_test_scenes, cfg.world,
        derive_seed(master_seed, "world"),
    )
    _worker_ctx.update(
        cfg=cfg, featurizer=featurizer,
        scenes={s.id: s for s in train_scenes + test_scenes}, tables={},
    )


def _worker_rollout(args):
    w, b, chunk = args
    cfg = _worker_ctx["cfg"]
    policy = Policy(w=w, b=b)
    jobs = [(_worker_ctx["scenes"][sid], target, seed) for sid, target, seed in chunk]
    return rollout_batch(jobs, _worker_ctx["featurizer"], policy, cfg.oracle, cfg.rewards,
                         table_cache=_worker_ctx["tables"])


def trainable_targets(scene: Scene, master_seed: int, holdout_frac: float) -> list[int]:
    """Targets available during training; the rest stay unseen for evaluation."""
    n = scene.n_objects
    k = int(holdout_frac * n)
    if k == 0:
        return list(range(n))
    held = set(
        rng_for(master_seed, "target-holdout", scene.id).choice(n, size=k, replace=False).tolist()
    )
    return [i for i in range(n) if i not in held]


def train(
    cfg: Config,
    master_seed: int,
    out_dir: str | Path | None = None,
    warm_start: Policy | None = None,
    start_epoch: int = 0,
    start_policy: Policy | None = None,
    start_baseline: BaselineNet | None = None,
    target_log: dict[int, set] | None = None,
    run_name: str = "train",
    episode_log_path: str | Path | None = None,
) -> TrainResult:
    """Run the REINFORCE loop: per epoch every training scene is visited once
    in batches of cfg.trainer.batch, each batch giving one SGD update of the
    policy and one of the baseline. Deterministic in (config, master_seed)."""
    from .checkpoint import save_checkpoint
    from .episodes import EpisodeWriter

    tr = cfg.trainer
    grammar = build_grammar(cfg.world, cfg.grammar, cfg.questioner.m_max)
    featurizer = Featurizer(grammar, cfg.rewards.j_max)
    train_scenes, test_scenes = make_splits(
        cfg.sizes.n_train_scenes, cfg.sizes.n_test_scenes, cfg.world, derive_seed(master_seed, "world")
    )
    allowed = {
        s.id: trainable_targets(s, master_seed, tr.target_holdout) for s in train_scenes
    }

    if start_policy is not None:
        policy = start_policy
    elif warm_start is not None:
        policy = warm_start.copy()
    else:
        policy = Policy.zeros(len(grammar.vocab), featurizer.dim)
    baseline = start_baseline or BaselineNet.init(
        featurizer.dim, tr.baseline_hidden, rng_for(master_seed, "baseline-init")
    )
    target_log = target_log if target_log is not None else {s.id: set() for s in train_scenes}

    out_dir = Path(out_dir) if out_dir else None
    metrics_path = None
    metrics_fh = None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics_path = out_dir / f"{run_name}-metrics.jsonl"
        metrics_fh = open(metrics_path, "a", encoding="utf-8")
        if metrics_fh.tell() == 0:
            header = {
                "kind": "header", "schema": 1, "run": run_name,
                "config_hash": config_hash(cfg), "code_version": _code_version(),
                "master_seed": master_seed,
            }
            metrics_fh.write(json.dumps(header) + "\n")

    episode_writer = None
    if tr.log_episodes and (episode_log_path or out_dir):
        episode_writer = EpisodeWriter(
            episode_log_path or out_dir / f"{run_name}-episodes.jsonl", cfg
        )

    workers = cfg.harness.workers or (os.cpu_count() or 1)
    pool = None
    if workers > 1 and tr.epochs > start_epoch:
        pool = ProcessPoolExecutor(
            max_workers=workers,
            initializer=_worker_init,
            initargs=(serialize_config(cfg), master_seed),
        )

    epoch_stats: list[dict] = []
    table_cache: dict = {}
    ckpt_path = None
    try:
        for epoch in range(start_epoch, tr.epochs):
            order = rng_for(master_seed, "shuffle", epoch).permutation(len(train_scenes))
            scenes_by_id = {s.id: s for s in train_scenes}
            ep_success = []
            ep_rounds = []
            ep_reward = []
            for u, lo in enumerate(range(0, len(order), tr.batch)):
                chunk = order[lo : lo + tr.batch]
                jobs = []
                for slot, scene_idx in enumerate(chunk):
                    scene = train_scenes[int(scene_idx)]
                    pool_ids = allowed[scene.id]
                    pick = rng_for(master_seed, "target", epoch, u, slot)
                    target = int(pool_ids[int(pick.integers(len(pool_ids)))])
                    target_log[scene.id].add(target)
                    seed = derive_seed(master_seed, "episode", epoch, u, slot)
                    jobs.append((scene.id, target, seed))
                if pool is not None:
                    size = (len(jobs) + workers - 1) // workers
                    parts = [jobs[i : i + size] for i in range(0, len(jobs), size)]
                    batch = []
                    for result in pool.map(
                        _worker_rollout, [(policy.w, policy.b, part) for part in parts]
                    ):
                        batch.extend(result)
                else:
                    batch = rollout_batch(
                        [(scenes_by_id[sid], tgt, sd) for sid, tgt, sd in jobs],
                        featurizer, policy, cfg.oracle, cfg.rewards,
                        table_cache=table_cache,
                    )

                grad = policy_gradient(
                    batch, policy, baseline,
                    expected_score=tr.expected_score,
                    entropy_bonus=tr.entropy_bonus,
                    normalize_advantage=tr.normalize_advantage,
                )
                if not (np.isfinite(grad.dw).all() and np.isfinite(grad.db).all()):
                    if out_dir:
                        save_checkpoint(
                            out_dir / f"{run_name}-diverged.npz", cfg, master_seed, epoch,
                            policy, baseline, grammar, target_log, kind="diagnostic",
                        )
                    raise TrainingDiverged(f"non-finite policy gradient at epoch {epoch}")
                policy.w += tr.lr * grad.dw
                policy.b += tr.lr * grad.db
                for _ in range(tr.baseline_steps):
                    baseline_update(batch, baseline, tr.baseline_lr)

                for traj in batch:
                    ep_success.append(traj.success)
                    ep_rounds.append(traj.n_rounds)
                    ep_reward.append(traj.total_reward)
                    if episode_writer:
                        episode_writer.write(traj, scenes_by_id[traj.scene_id])

            stats = {
                "kind": "metrics", "epoch": epoch, "split": "train", "mode": "sampling",
                "success": float(np.mean(ep_success)), "mean_rounds": float(np.mean(ep_rounds)),
                "mean_reward": float(np.mean(ep_reward)), "nll": None,
            }
            epoch_stats.append(stats)
            if metrics_fh:
                metrics_fh.write(json.dumps(stats) + "\n")
                metrics_fh.flush()
            if out_dir and tr.checkpoint_every and (epoch + 1) % tr.checkpoint_every == 0:
                ckpt_path = out_dir / f"{run_name}-epoch{epoch + 1:04d}.npz"
                save_checkpoint(
                    ckpt_path, cfg, master_seed, epoch + 1, policy, baseline, grammar, target_log
                )
    finally:
        if pool is not None:
            pool.shutdown()
        if metrics_fh:
            metrics_fh.close()
        if episode_writer:
            episode_writer.close()

    if out_dir:
        ckpt_path = out_dir / f"{run_name}-final.npz"
        save_checkpoint(
            ckpt_path, cfg, master_seed, tr.epochs, policy, baseline, grammar, target_log
        )
    return TrainResult(
        policy=policy, baseline=baseline, grammar=grammar, featurizer=featurizer,
        train_scenes=train_scenes, test_scenes=test_scenes, target_log=target_log,
        checkpoint_path=ckpt_path, metrics_path=metrics_path, epoch_stats=epoch_stats,
    )


def _code_version() -> str:
    from . import __version__

    return __version__
