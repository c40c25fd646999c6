import numpy as np
import pytest

from guessgame.config import default_config
from guessgame.evaluation import (
    evaluate,
    high_quality_pct,
    progressive_trend_pct,
    round_success_curve,
)
from guessgame.features import Featurizer
from guessgame.grammar import build_grammar
from guessgame.oracle import Answer, OracleConfig
from guessgame.policy import Policy
from guessgame.trainer import RoundRecord, Trajectory, _PlanActor, expert_question, run_episode
from guessgame.world import make_splits

CFG = default_config()
GRAMMAR = build_grammar(CFG.world, CFG.grammar, CFG.questioner.m_max)
FEAT = Featurizer(GRAMMAR, CFG.rewards.j_max)
TRAIN_SCENES, TEST_SCENES = make_splits(12, 8, CFG.world, seed=0)


def test_untrained_policy_plays_at_chance_level():
    policy = Policy.zeros(len(GRAMMAR.vocab), FEAT.dim)
    res = evaluate(
        policy, TEST_SCENES, "NewImage", "greedy", 3000, 4, FEAT, CFG.oracle, CFG.rewards
    )
    assert abs(res.success_rate - 0.125) < 0.02
    assert res.mean_rounds == 0.0  # zero-logit greedy stops immediately


def test_evaluate_deterministic_and_side_effect_free():
    rng = np.random.default_rng(1)
    policy = Policy(
        w=rng.normal(0, 0.4, (len(GRAMMAR.vocab), FEAT.dim)),
        b=rng.normal(0, 0.4, len(GRAMMAR.vocab)),
    )
    before = policy.flat().copy()
    r1 = evaluate(policy, TEST_SCENES, "NewImage", "sampling", 300, 7, FEAT, CFG.oracle, CFG.rewards)
    r2 = evaluate(policy, TEST_SCENES, "NewImage", "sampling", 300, 7, FEAT, CFG.oracle, CFG.rewards)
    assert r1.success_rate == r2.success_rate
    assert np.array_equal(policy.flat(), before)


def test_evaluate_rejects_empty_scene_set():
    policy = Policy.zeros(len(GRAMMAR.vocab), FEAT.dim)
    with pytest.raises(ValueError):
        evaluate(policy, [], "NewImage", "greedy", 10, 0, FEAT, CFG.oracle, CFG.rewards)


def test_new_object_excludes_logged_targets():
    policy = Policy.zeros(len(GRAMMAR.vocab), FEAT.dim)
    log = {s.id: set(range(s.n_objects - 2)) for s in TRAIN_SCENES}
    res = evaluate(
        policy, TRAIN_SCENES, "NewObject", "sampling", 400, 3, FEAT, CFG.oracle, CFG.rewards,
        target_log=log,
    )
    for tr in res.records:
        assert tr.target_id not in log[tr.scene_id]


def test_new_object_with_everything_logged_raises():
    policy = Policy.zeros(len(GRAMMAR.vocab), FEAT.dim)
    log = {s.id: set(range(s.n_objects)) for s in TRAIN_SCENES}
    with pytest.raises(ValueError, match="unseen"):
        evaluate(
            policy, TRAIN_SCENES, "NewObject", "greedy", 10, 0, FEAT, CFG.oracle, CFG.rewards,
            target_log=log,
        )


def _shatterable(scene):
    table = GRAMMAR.answer_table(scene)
    cols = {tuple(table[:, n]) for n in range(scene.n_objects)}
    return len(cols) == scene.n_objects


def test_perfect_information_questioner_nearly_always_wins_noiselessly():
    # adaptive information-gain play on scenes whose objects are pairwise
    # distinguishable; noiseless oracle
    scenes = [s for s in TRAIN_SCENES + TEST_SCENES if _shatterable(s)]
    assert scenes, "expected some fully distinguishable scenes"
    oracle_cfg = OracleConfig(epsilon=0.0)
    wins = 0
    games = 0
    rng = np.random.default_rng(5)
    for i in range(1000):
        scene = scenes[i % len(scenes)]
        target = int(rng.integers(scene.n_objects))
        actor = _PlanActor(lambda state, r: expert_question(FEAT, state, 0.95))
        traj = run_episode(actor, FEAT, scene, target, oracle_cfg, CFG.rewards, seed=9000 + i,
                           record_steps=False)
        wins += traj.success
        games += 1
    assert wins / games >= 0.99


def _record(success, p_seq, informative_flags, target=0, posteriors=None):
    rounds = []
    prev = None
    for k, (p, flag) in enumerate(zip(p_seq, informative_flags)):
        post = posteriors[k] if posteriors else np.array([p, 1 - p])
        rounds.append(
            RoundRecord(
                question=("is", "it", "red", "?"), answer=Answer.YES, p_target=p,
                informative=flag, progressive=None if prev is None else p - prev,
                inconsistent=False, posterior=np.asarray(post, dtype=float),
            )
        )
        prev = p
    rewards = np.zeros(max(len(p_seq), 1))
    return Trajectory(
        scene_id=0, target_id=target, seed=0,
        features=np.empty((0, 1)), actions=np.zeros(1, dtype=np.int64),
        masks=np.empty((0, 1), dtype=np.uint8), rewards=rewards, returns=rewards.copy(),
        rounds=rounds, success=success, guessed=target if success else target + 1,
        ended_by_stop=True,
    )


def test_progressive_trend_percentage():
    records = (
        [_record(True, [0.2, 0.4, 0.9], [True] * 3) for _ in range(6)]
        + [_record(True, [0.2, 0.5, 0.4], [True] * 3) for _ in range(2)]
        + [_record(False, [0.9, 0.1], [True] * 2) for _ in range(2)]
    )
    assert progressive_trend_pct(records) == pytest.approx(75.0)


def test_progressive_trend_none_without_successes():
    records = [_record(False, [0.5], [True])]
    assert progressive_trend_pct(records) is None


def test_progressive_trend_allows_ties():
    records = [_record(True, [0.3, 0.3, 0.6], [True] * 3)]
    assert progressive_trend_pct(records) == pytest.approx(100.0)


def test_high_quality_percentage():
    records = [
        _record(True, [0.5] * 5, [True, True, True, True, False]),
        _record(True, [0.5] * 5, [True, True, True, False, False]),
        _record(False, [0.5] * 5, [False] * 5),  # failed games never count
    ]
    assert high_quality_pct(records) == pytest.approx(70.0)


def test_high_quality_none_when_no_questions():
    assert high_quality_pct([_record(True, [], [])]) is None


def test_flags_match_stored_transcripts():
    rng = np.random.default_rng(2)
    policy = Policy(
        w=rng.normal(0, 0.4, (len(GRAMMAR.vocab), FEAT.dim)),
        b=rng.normal(0, 0.4, len(GRAMMAR.vocab)),
    )
    res = evaluate(policy, TEST_SCENES, "NewImage", "sampling", 200, 11, FEAT, CFG.oracle, CFG.rewards)
    scenes = {s.id: s for s in TEST_SCENES}
    from guessgame.oracle import answer_all

    for tr in res.records:
        scene = scenes[tr.scene_id]
        for rec in tr.rounds:
            answers = answer_all(GRAMMAR.parse(rec.question), scene)
            assert rec.informative == (len(set(answers)) > 1)


def test_round_success_curve_definition():
    posteriors = [[0.2, 0.8], [0.9, 0.1], [0.95, 0.05]]
    rec = _record(True, [0.2, 0.9, 0.95], [True] * 3, target=0, posteriors=posteriors)
    curve = round_success_curve([rec], j_max=5)
    assert [c["successes"] for c in curve] == [0, 1, 1, 1, 1]
    assert curve[0]["ratio"] == 0.0


def test_round_success_curve_cross_checks_with_evaluate():
    rng = np.random.default_rng(3)
    policy = Policy(
        w=rng.normal(0, 0.6, (len(GRAMMAR.vocab), FEAT.dim)),
        b=rng.normal(0, 0.6, len(GRAMMAR.vocab)),
    )
    res = evaluate(policy, TEST_SCENES, "NewImage", "sampling", 400, 13, FEAT, CFG.oracle, CFG.rewards)
    curve = round_success_curve(res.records, j_max=CFG.rewards.j_max)
    for j in range(1, CFG.rewards.j_max + 1):
        games = [tr for tr in res.records if tr.n_rounds == j]
        if not games:
            continue
        # forced guess at the final round equals the game outcome
        wins = sum(tr.success for tr in games)
        forced = 0
        for tr in games:
            forced += int(np.argmax(tr.rounds[-1].posterior)) == tr.target_id
        assert forced == wins
    assert len(curve) == CFG.rewards.j_max


def test_round_success_curve_empty_records():
    curve = round_success_curve([], j_max=3)
    assert [c["successes"] for c in curve] == [0, 0, 0]
